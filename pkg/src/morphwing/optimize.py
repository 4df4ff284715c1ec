"""Derivative-free gain search over simulated episodes.

The cost is a time-discretized quadratic over angular momentum, body
velocity, and pitch error, accumulated after a warm-up window. Candidates
are projected into the box bounds before every evaluation; a diverged
episode scores the configured penalty and can never become the reported
best. Two search methods share the interface: a bounded Nelder-Mead simplex
(default) and a seeded cross-entropy population search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .control import ControllerConfig
from .engine import run_episode
from .errors import BudgetExhausted


@dataclass
class CostWeights:
    momentum: float
    velocity: float
    pitch: float
    sample_dt: float
    horizon: float
    warmup: float

    @classmethod
    def from_config(cls, cfg: Config) -> "CostWeights":
        c = cfg.data["cost"]
        return cls(momentum=c["w_momentum"], velocity=c["w_velocity"],
                   pitch=c["w_pitch"], sample_dt=c["sample_dt_s"],
                   horizon=cfg.duration, warmup=c["warmup_s"])


@dataclass
class GainBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound shapes differ")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    @property
    def dim(self) -> int:
        return self.lower.size


@dataclass
class OptimizationResult:
    best_x: np.ndarray
    best_cost: float
    evaluations: int
    converged: bool
    trace: list[tuple[int, float]] = field(default_factory=list)
    diverged_evals: int = 0

    def trace_csv_rows(self):
        return [(i, repr(c)) for i, c in self.trace]


def evaluate_cost(cfg: Config, pitch_gain=None, zero_path=None,
                  pitch_on: bool = True) -> tuple[float, bool]:
    """One-episode cost under the configured weights.

    Returns (J, diverged). A diverged episode reports the penalty cost.
    """
    ctrl = ControllerConfig.from_config(cfg)
    if pitch_gain is not None:
        ctrl.pitch_gain = np.asarray(pitch_gain, dtype=float)
    if zero_path is not None:
        zp = np.asarray(zero_path, dtype=float)
        shift = zp - ctrl.zero_path_lengths
        ctrl.zero_path_lengths = zp
        ctrl.l_min = ctrl.l_min + shift
        ctrl.l_max = ctrl.l_max + shift
    ctrl.pitch_on = pitch_on
    traj, J = run_episode(cfg, controller=ctrl, with_cost=True)
    if traj.status != "ok":
        return float(cfg.data["cost"]["diverged_penalty"]), True
    return J, False


def _nelder_mead(fn, x0: np.ndarray, bounds: GainBounds, budget: int,
                 init_step: float, rng: np.random.Generator,
                 xtol: float = 1e-6, ftol: float = 1e-10):
    """Bounded Nelder-Mead with projection before every evaluation."""
    n = bounds.dim
    evals = 0
    trace: list[tuple[int, float]] = []
    diverged = 0

    def f(x):
        nonlocal evals, diverged
        xp = bounds.project(x)
        val, bad = fn(xp)
        evals += 1
        trace.append((evals, val))
        if bad:
            diverged += 1
        return val

    span = bounds.upper - bounds.lower
    # simplex seeded around x0 with steps proportional to the box span
    simplex = [bounds.project(x0.copy())]
    for i in range(n):
        step = np.zeros(n)
        base = span[i] if np.isfinite(span[i]) and span[i] > 0 else 1.0
        step[i] = init_step * base
        cand = x0 + step
        if np.array_equal(bounds.project(cand), simplex[0]):
            cand = x0 - step
        simplex.append(bounds.project(cand))
    fvals = []
    for v in simplex:
        if evals >= budget:
            fvals.append(float("inf"))
        else:
            fvals.append(f(v))
    simplex = np.array(simplex)
    fvals = np.array(fvals)

    alpha, gamma, rho_c, sigma = 1.0, 2.0, 0.5, 0.5
    converged = False
    while evals < budget:
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        if (np.max(np.abs(simplex[1:] - simplex[0])) < xtol
                and np.max(np.abs(fvals[1:] - fvals[0])) < ftol):
            converged = True
            break
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = f(xr)
        if fr < fvals[0]:
            if evals < budget:
                xe = centroid + gamma * (centroid - simplex[-1])
                fe = f(xe)
                if fe < fr:
                    simplex[-1], fvals[-1] = bounds.project(xe), fe
                else:
                    simplex[-1], fvals[-1] = bounds.project(xr), fr
            else:
                simplex[-1], fvals[-1] = bounds.project(xr), fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = bounds.project(xr), fr
        else:
            if evals < budget:
                xc = centroid + rho_c * (simplex[-1] - centroid)
                fc = f(xc)
                if fc < fvals[-1]:
                    simplex[-1], fvals[-1] = bounds.project(xc), fc
                else:
                    for i in range(1, len(simplex)):
                        if evals >= budget:
                            break
                        simplex[i] = bounds.project(
                            simplex[0] + sigma * (simplex[i] - simplex[0]))
                        fvals[i] = f(simplex[i])
    order = np.argsort(fvals, kind="stable")
    return simplex[order[0]], float(fvals[order[0]]), evals, converged, trace, diverged


def _cross_entropy(fn, x0: np.ndarray, bounds: GainBounds, budget: int,
                   init_step: float, rng: np.random.Generator):
    """Diagonal-covariance population search (CMA-style simplification)."""
    n = bounds.dim
    pop = max(4 + int(3 * np.log(n)), 6)
    elite = max(pop // 2, 2)
    mean = bounds.project(x0.copy())
    span = np.where(np.isfinite(bounds.upper - bounds.lower),
                    bounds.upper - bounds.lower, 1.0)
    sigma = init_step * np.maximum(span, 1e-12)
    evals = 0
    trace: list[tuple[int, float]] = []
    diverged = 0
    best_x, best_f = mean.copy(), float("inf")
    while evals < budget:
        k = min(pop, budget - evals)
        xs = mean + sigma * rng.standard_normal((k, n))
        fs = np.empty(k)
        for i in range(k):
            xp = bounds.project(xs[i])
            xs[i] = xp
            val, bad = fn(xp)
            evals += 1
            trace.append((evals, val))
            if bad:
                diverged += 1
            fs[i] = val
            if val < best_f and not bad:
                best_f, best_x = val, xp.copy()
        if k < elite:
            break
        order = np.argsort(fs, kind="stable")[:elite]
        mean = xs[order].mean(axis=0)
        sigma = 0.7 * sigma + 0.3 * xs[order].std(axis=0)
        if np.max(sigma) < 1e-9:
            break
    converged = np.max(sigma) < 1e-9
    return best_x, best_f, evals, converged, trace, diverged


def minimize(fn, x0, bounds: GainBounds, budget: int, method: str = "nelder-mead",
             seed: int = 0, init_step: float = 0.25) -> OptimizationResult:
    """Bounded derivative-free minimization of fn(x) -> (cost, diverged).

    The reported best is the cheapest non-diverged candidate seen anywhere
    in the search (penalized episodes are never reported as best unless no
    candidate at all survived).
    """
    x0 = bounds.project(np.asarray(x0, dtype=float))
    rng = np.random.default_rng(seed)

    best_clean = {"x": None, "f": float("inf")}

    def tracked(x):
        val, bad = fn(x)
        if bad:
            # a flagged episode is worst-possible to the search, whatever
            # cost the caller attached to it
            return float("inf"), True
        if val < best_clean["f"]:
            best_clean["f"] = val
            best_clean["x"] = np.array(x, dtype=float)
        return val, bad

    if budget <= 0:
        val, bad = tracked(x0)
        return OptimizationResult(best_x=x0, best_cost=val, evaluations=1,
                                  converged=False, trace=[(1, val)],
                                  diverged_evals=1 if bad else 0)
    if method == "nelder-mead":
        out = _nelder_mead(tracked, x0, bounds, budget, init_step, rng)
    elif method == "cem":
        out = _cross_entropy(tracked, x0, bounds, budget, init_step, rng)
    else:
        raise ValueError(f"unknown optimizer method {method!r}")
    best_x, best_f, evals, converged, trace, diverged = out
    if best_clean["x"] is not None:
        best_x, best_f = best_clean["x"], best_clean["f"]
    else:
        best_x, best_f, converged = x0, float("inf"), False
    return OptimizationResult(best_x=np.asarray(best_x, dtype=float),
                              best_cost=float(best_f), evaluations=evals,
                              converged=converged, trace=trace,
                              diverged_evals=diverged)


def optimize_pitch_gain(cfg: Config, budget: int | None = None,
                        seed: int | None = None,
                        method: str | None = None) -> OptimizationResult:
    """Find the pitch gain matrix minimizing the episode cost within bounds."""
    opt = cfg.data["optimizer"]
    budget = opt["budget"] if budget is None else budget
    seed = opt["seed"] if seed is None else seed
    method = opt["method"] if method is None else method
    scale = float(cfg.data["control"]["pitch_gain_unit_scale"])
    bounds = GainBounds(np.array(opt["pitch_gain_min"]) * scale,
                        np.array(opt["pitch_gain_max"]) * scale)
    x0 = np.array(cfg.data["control"]["pitch_gain"], dtype=float) * scale
    penalty = float(cfg.data["cost"]["diverged_penalty"])

    def fn(x):
        J, bad = evaluate_cost(cfg, pitch_gain=x)
        return (penalty, True) if bad else (J, False)

    return minimize(fn, x0, bounds, budget, method=method, seed=seed,
                    init_step=float(opt["init_step"]))


def optimize_zero_path(cfg: Config, budget: int | None = None,
                       seed: int | None = None,
                       method: str | None = None) -> OptimizationResult:
    """Find zero-path FDC lengths (pitch loop off) minimizing the same cost."""
    opt = cfg.data["optimizer"]
    budget = opt["budget"] if budget is None else budget
    seed = opt["seed"] if seed is None else seed
    method = opt["method"] if method is None else method
    bounds = GainBounds(cfg.fdc_min.copy(), cfg.fdc_max.copy())
    x0 = np.array(cfg.data["control"]["zero_path_lengths_m"], dtype=float)
    penalty = float(cfg.data["cost"]["diverged_penalty"])

    def fn(x):
        J, bad = evaluate_cost(cfg, zero_path=x, pitch_on=False)
        return (penalty, True) if bad else (J, False)

    return minimize(fn, x0, bounds, budget, method=method, seed=seed,
                    init_step=float(opt["init_step"]))


def require_budget(budget: int, dim: int, minimum_per_dim: int = 5):
    if budget < minimum_per_dim * dim:
        raise BudgetExhausted(
            f"budget {budget} below the minimum {minimum_per_dim * dim} "
            f"for dimension {dim}")
