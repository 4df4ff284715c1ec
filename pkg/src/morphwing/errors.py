"""Exception types shared across the package."""


class MorphwingError(Exception):
    """Base class for all package errors."""


class ConfigError(MorphwingError):
    """Invalid configuration. Message names the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ParseError(MorphwingError):
    """Config file could not be parsed."""


class NoConvergence(MorphwingError):
    """Loop closure has no solution (mechanism jammed or unassemblable)."""


class BranchJump(MorphwingError):
    """Closure solution is discontinuous from the seed (passed a singularity)."""


class SingularMassMatrix(MorphwingError):
    """Mass/constraint matrix is singular or too ill-conditioned to invert."""


class NonPositiveDefinite(MorphwingError):
    """Mass properties produce a non-positive-definite mass matrix."""


class DegenerateFlow(MorphwingError):
    """Projected airspeed too small for the angle of attack to be defined."""


class SimDiverged(MorphwingError):
    """Simulation state exceeded the configured divergence bounds."""

    def __init__(self, t: float, reason: str):
        self.t = t
        self.reason = reason
        super().__init__(f"simulation diverged at t={t:.6f} s: {reason}")


class TooShort(MorphwingError):
    """Trajectory does not span enough crank periods for the analysis."""


class BudgetExhausted(MorphwingError):
    """Optimizer evaluation budget ran out before convergence."""
