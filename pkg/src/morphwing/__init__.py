"""Flight-dynamics simulator and control/optimization toolkit for a
linkage-driven morphing-wing flapping robot."""

from .config import Config
from .control import ControllerConfig, ControlOutput
from .dynamics import DynamicState, JointCoupling, MassProperties
from .engine import (EnergyAudit, LimitCycleReport, Trajectory,
                     detect_limit_cycle, energy_audit, run_episode)
from .errors import (BranchJump, BudgetExhausted, ConfigError, DegenerateFlow,
                     MorphwingError, NoConvergence, NonPositiveDefinite,
                     ParseError, SimDiverged, SingularMassMatrix, TooShort)
from .linkage import (DrivenJointOutput, KinematicInput, KinematicState,
                      LinkageTopology, driven_joint_output, kinematic_eom,
                      sensitivity_analysis, solve_loop_closure)
from .optimize import (CostWeights, GainBounds, OptimizationResult,
                       evaluate_cost, optimize_pitch_gain, optimize_zero_path)

__version__ = "0.1.0"

__all__ = [
    "Config", "ControllerConfig", "ControlOutput", "DynamicState",
    "JointCoupling", "MassProperties", "EnergyAudit", "LimitCycleReport",
    "Trajectory", "detect_limit_cycle", "energy_audit", "run_episode",
    "BranchJump", "BudgetExhausted", "ConfigError", "DegenerateFlow",
    "MorphwingError", "NoConvergence", "NonPositiveDefinite", "ParseError",
    "SimDiverged", "SingularMassMatrix", "TooShort", "DrivenJointOutput",
    "KinematicInput", "KinematicState", "LinkageTopology",
    "driven_joint_output", "kinematic_eom", "sensitivity_analysis",
    "solve_loop_closure", "CostWeights", "GainBounds", "OptimizationResult",
    "evaluate_cost", "optimize_pitch_gain", "optimize_zero_path",
]
