"""Massless linkage network: topology, loop closure, kinematic equation of
motion, driven-joint outputs, and parameter sensitivity.

Coordinate mapping (documented convention; the loop coordinates are assigned
to the independent angles of the default topology):

    th1   crank gear angle (joint j1), the single drive
    th2   humerus coupler absolute angle (link L2)
    th4   humerus rocker absolute angle (link L3, pivot j4)
    th9   second crank gear angle (joint j9), gear-coupled to th1
    th10  radius coupler absolute angle (link L7)
    th12  radius rocker absolute angle (link L8, pivot j12)
    th13  forearm absolute angle (links L10/L11, pivot j14 on the arm)
    th14  binary link absolute angle (link L12)
    l3b, l3c, l8b, l10b   prismatic FDC segment lengths

The mechanism is two cascaded stages. Stage one (humerus): crank L1 at j1,
coupler L2, rocker L3 whose extension carries the FDC sliders L4 (l3b) and
L5 (l3c) and the driven joint j5. Stage two (radius): crank L6 at j9 (geared
to j1), coupler L7, rocker L8 with FDC slider L9 (l8b) extended to j8; the
forearm L10 with FDC slider L11 (l10b) pivots at j14 on the humerus arm (the
massless elbow) and carries the driven joint j16; the binary link L12 (j17 to
j8) steers it. Twelve moving links, seventeen joints (j5 and j16 are output
markers), four prismatic joints, five degrees of freedom.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .config import Config
from .errors import BranchJump, NoConvergence, SingularMassMatrix

FDC_NAMES = ("l_3b", "l_3c", "l_8b", "l_10b")

# qk layout shared with the core kernels
COORD_NAMES = ("th1", "th2", "th4", "th9", "th10", "th12", "th13", "th14",
               "l_3b", "l_3c", "l_8b", "l_10b")
ACTUATED = (0, 8, 9, 10, 11)
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class LinkDescriptor:
    id: str
    length_m: float
    fdc_segment: str | None = None   # set for the four slider links


@dataclass(frozen=True)
class JointDescriptor:
    id: str
    type: str                        # "revolute" | "prismatic-FDC" | "output"
    parent: str
    child: str
    anchor_m: tuple[float, float] | None = None  # frame-fixed pivots only


@dataclass
class LinkageTopology:
    """Link/joint descriptors plus the packed geometry used by the solvers."""

    links: list[LinkDescriptor]
    joints: list[JointDescriptor]
    crank_joints: tuple[str, str]
    params: np.ndarray = field(repr=False)
    fdc_nominal: np.ndarray = field(repr=False)
    fdc_min: np.ndarray = field(repr=False)
    fdc_max: np.ndarray = field(repr=False)
    jump_tol: float = 0.7

    @classmethod
    def from_config(cls, cfg: Config) -> "LinkageTopology":
        p = cfg.mech
        mm = cfg.data["mechanism"]
        nom = cfg.fdc_nominal
        links = [
            LinkDescriptor("L1", mm["crank1_len_m"]),
            LinkDescriptor("L2", mm["coupler_h_len_m"]),
            LinkDescriptor("L3", mm["rocker_h_base_len_m"]),
            LinkDescriptor("L4", nom[0], "l_3b"),
            LinkDescriptor("L5", nom[1], "l_3c"),
            LinkDescriptor("L6", mm["crank2_len_m"]),
            LinkDescriptor("L7", mm["coupler_r_len_m"]),
            LinkDescriptor("L8", mm["rocker_r_base_len_m"]),
            LinkDescriptor("L9", nom[2], "l_8b"),
            LinkDescriptor("L10", mm["forearm_base_len_m"]),
            LinkDescriptor("L11", nom[3], "l_10b"),
            LinkDescriptor("L12", mm["binary_link_len_m"]),
        ]
        a1 = tuple(mm["crank1_pivot_m"])
        a4 = tuple(mm["rocker_h_pivot_m"])
        a9 = tuple(mm["crank2_pivot_m"])
        a12 = tuple(mm["rocker_r_pivot_m"])
        joints = [
            JointDescriptor("j1", "revolute", "frame", "L1", a1),
            JointDescriptor("j2", "revolute", "L1", "L2"),
            JointDescriptor("j3", "revolute", "L2", "L3"),
            JointDescriptor("j4", "revolute", "frame", "L3", a4),
            JointDescriptor("j5", "output", "L5", "massed-humerus"),
            JointDescriptor("j6", "prismatic-FDC", "L3", "L4"),
            JointDescriptor("j7", "prismatic-FDC", "L4", "L5"),
            JointDescriptor("j8", "revolute", "L9", "L12"),
            JointDescriptor("j9", "revolute", "frame", "L6", a9),
            JointDescriptor("j10", "revolute", "L6", "L7"),
            JointDescriptor("j11", "revolute", "L7", "L9"),
            JointDescriptor("j12", "revolute", "frame", "L8", a12),
            JointDescriptor("j13", "prismatic-FDC", "L8", "L9"),
            JointDescriptor("j14", "revolute", "L4", "L10"),
            JointDescriptor("j15", "prismatic-FDC", "L10", "L11"),
            JointDescriptor("j16", "output", "L11", "massed-radius"),
            JointDescriptor("j17", "revolute", "L11", "L12"),
        ]
        topo = cls(links=links, joints=joints, crank_joints=("j1", "j9"),
                   params=p.copy(), fdc_nominal=nom.copy(),
                   fdc_min=cfg.fdc_min.copy(), fdc_max=cfg.fdc_max.copy(),
                   jump_tol=cfg.jump_tol)
        topo.validate()
        return topo

    @classmethod
    def default(cls) -> "LinkageTopology":
        return cls.from_config(Config.default())

    def validate(self):
        if len(self.links) != 12:
            raise ValueError(f"expected 12 links, got {len(self.links)}")
        if len(self.joints) != 17:
            raise ValueError(f"expected 17 joints, got {len(self.joints)}")
        prismatic = [j for j in self.joints if j.type == "prismatic-FDC"]
        if len(prismatic) != 4:
            raise ValueError("expected exactly 4 prismatic FDC joints")
        seg_names = sorted(l.fdc_segment for l in self.links if l.fdc_segment)
        if seg_names != sorted(FDC_NAMES):
            raise ValueError(f"FDC segments must be {FDC_NAMES}, got {seg_names}")
        for cj in self.crank_joints:
            j = self._joint(cj)
            if j.type != "revolute" or j.parent != "frame":
                raise ValueError(f"crank joint {cj} must be a frame revolute")
        for loop_name, probe_joint in (("humerus", "j3"), ("radius-1", "j11"),
                                       ("radius-2", "j17")):
            if not self._joint_on_cycle(probe_joint):
                raise ValueError(f"{loop_name} stage has no closed kinematic loop")
        if any(not np.isfinite(v) for v in self.params):
            raise ValueError("non-finite geometry parameter")

    def _joint(self, jid: str) -> JointDescriptor:
        for j in self.joints:
            if j.id == jid:
                return j
        raise KeyError(jid)

    def _joint_on_cycle(self, jid: str) -> bool:
        """A joint lies on a closed kinematic loop iff it is not a bridge of
        the link graph (output markers excluded)."""
        probe = self._joint(jid)
        adj: dict[str, set[str]] = {}
        for j in self.joints:
            if j.type == "output" or j.id == jid:
                continue
            adj.setdefault(j.parent, set()).add(j.child)
            adj.setdefault(j.child, set()).add(j.parent)
        # with the probe edge removed, its endpoints must stay connected
        stack = [probe.parent]
        seen = {probe.parent}
        while stack:
            node = stack.pop()
            if node == probe.child:
                return True
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False


@dataclass
class KinematicState:
    """Massless chain state: eight angles, four FDC lengths, and their rates."""

    q: np.ndarray       # 12
    qd: np.ndarray      # 12

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        if self.q.shape != (12,) or self.qd.shape != (12,):
            raise ValueError("kinematic state must be two 12-vectors")

    @property
    def angles(self) -> np.ndarray:
        return self.q[:8]

    @property
    def fdc_lengths(self) -> np.ndarray:
        return self.q[8:]

    def crank_angle(self) -> float:
        return float(self.q[0])

    def crank_rate(self) -> float:
        return float(self.qd[0])


@dataclass
class KinematicInput:
    """Crank angular acceleration plus the four FDC length accelerations."""

    u_g: float
    u_fdc: np.ndarray   # [u_3b, u_3c, u_8b, u_10b]

    def __post_init__(self):
        self.u_fdc = np.asarray(self.u_fdc, dtype=float)
        if self.u_fdc.shape != (4,):
            raise ValueError("FDC input must be a 4-vector")

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.u_g], self.u_fdc))


@dataclass
class DrivenJointOutput:
    """Planar kinematics of the driven joints j5 and j16 in the root frame."""

    p5: np.ndarray
    v5: np.ndarray
    a5: np.ndarray
    p16: np.ndarray
    v16: np.ndarray
    a16: np.ndarray


def closure_residual(topology: LinkageTopology, state: KinematicState) -> np.ndarray:
    """Stacked constraint residual (gear row plus three planar loops)."""
    return _core.kin_residual(topology.params, state.q)


def solve_loop_closure(topology: LinkageTopology, crank_angle: float,
                       fdc_lengths, seed: KinematicState | None = None,
                       crank_rate: float = 0.0,
                       fdc_rates=None) -> KinematicState:
    """Solve the loop-closure constraints at a crank angle and FDC lengths.

    Without a seed the configured assembly branch is used; with a seed the
    branch continuous with it is tracked. Rates, when given, are propagated
    to the dependent coordinates by the velocity constraint.

    Raises NoConvergence when the mechanism cannot assemble and BranchJump
    when the continuous solution is further than the configured threshold
    from the seed.
    """
    if not math.isfinite(crank_angle):
        raise ValueError("crank angle must be finite")
    lengths = np.asarray(fdc_lengths, dtype=float)
    if lengths.shape != (4,):
        raise ValueError("fdc_lengths must be a 4-vector")
    if np.any(lengths < topology.fdc_min) or np.any(lengths > topology.fdc_max):
        raise ValueError("fdc_lengths outside configured bounds")
    use_seed = seed is not None
    seed_q = seed.q if use_seed else np.zeros(12)
    status, qk = _core.kin_solve(topology.params, crank_angle, lengths,
                                 seed_q, use_seed, topology.jump_tol)
    if status == _core.STATUS_NO_ASSEMBLY:
        raise NoConvergence(
            f"loop closure has no solution at crank angle {crank_angle:.6f}")
    if status == _core.STATUS_BRANCH_JUMP:
        raise BranchJump(
            f"closure branch jumped beyond {topology.jump_tol} rad at crank "
            f"angle {crank_angle:.6f}")
    rates = np.zeros(4) if fdc_rates is None else np.asarray(fdc_rates, dtype=float)
    qd = _core.kin_dep_rates(topology.params, qk, crank_rate, rates)
    return KinematicState(qk, qd)


def assemble_eom(topology: LinkageTopology, state: KinematicState):
    """Explicit (M_k, h_k, B_k) of the 12-dim kinematic equation of motion.

    Row layout matches the coordinate order: actuated coordinates carry
    selection rows, the th9 slot carries the gear row, and the remaining
    slots carry the loop-constraint rows, so M qdd + h = B u holds exactly.
    """
    A = _core.kin_jacobian(topology.params, state.q)
    bias = _core.kin_bias(topology.params, state.q, state.qd)
    M = np.zeros((12, 12))
    h = np.zeros(12)
    B = np.zeros((12, 5))
    # selection rows for the directly actuated coordinates
    for u_idx, q_idx in enumerate(ACTUATED):
        M[q_idx, q_idx] = 1.0
        B[q_idx, u_idx] = 1.0
    # gear row sits in the th9 slot (residual row 0)
    M[3, :] = A[0, :]
    h[3] = bias[0]
    # loop rows fill the dependent-angle slots
    for row, slot in ((1, 1), (2, 2), (3, 4), (4, 5), (5, 6), (6, 7)):
        M[slot, :] = A[row, :]
        h[slot] = bias[row]
    return M, h, B


def kinematic_eom(topology: LinkageTopology, state: KinematicState,
                  u: KinematicInput) -> np.ndarray:
    """Coordinate accelerations of the massless chain for a given input."""
    res = closure_residual(topology, state)
    if np.max(np.abs(res)) > 1e-6:
        raise ValueError("state does not satisfy loop closure")
    M, _, _ = assemble_eom(topology, state)
    cond = np.linalg.cond(M)
    # healthy configurations sit near 1e2..1e3; dead centers blow past 1e9
    if not np.isfinite(cond) or cond > 1e8:
        raise SingularMassMatrix(f"kinematic matrix condition {cond:.3e}")
    qdd = _core.kin_accel(topology.params, state.q, state.qd, u.as_vector())
    if not np.all(np.isfinite(qdd)):
        raise SingularMassMatrix("loop Jacobian block is singular")
    return qdd


def driven_joint_output(topology: LinkageTopology, state: KinematicState,
                        accel=None) -> DrivenJointOutput:
    """Positions, velocities, and accelerations of joints 5 and 16."""
    qdd = np.zeros(12) if accel is None else np.asarray(accel, dtype=float)
    o = _core.kin_outputs(topology.params, state.q, state.qd, qdd)
    return DrivenJointOutput(p5=o[0:2].copy(), v5=o[2:4].copy(), a5=o[4:6].copy(),
                             p16=o[6:8].copy(), v16=o[8:10].copy(),
                             a16=o[10:12].copy())


_PARAM_KEYS = {
    "l_3b": 0, "l_3c": 1, "l_8b": 2, "l_10b": 3,
}
_BASE_KEYS = {
    "crank1_len": _core.M_L1, "coupler_h_len": _core.M_L2,
    "rocker_h_base_len": _core.M_L3A, "crank2_len": _core.M_L6,
    "coupler_r_len": _core.M_L7, "rocker_r_base_len": _core.M_L8A,
    "forearm_base_len": _core.M_L10A, "binary_link_len": _core.M_L12,
}


@dataclass
class SensitivityReport:
    parameter: str
    delta: float
    max_dev_j5: float
    rms_dev_j5: float
    max_dev_j16: float
    rms_dev_j16: float

    def per_unit(self) -> "SensitivityReport":
        """Deviations normalized per meter of parameter change."""
        if self.delta == 0.0:
            return self
        d = abs(self.delta)
        return SensitivityReport(self.parameter, self.delta,
                                 self.max_dev_j5 / d, self.rms_dev_j5 / d,
                                 self.max_dev_j16 / d, self.rms_dev_j16 / d)


def _sweep_outputs(topology: LinkageTopology, lengths: np.ndarray,
                   params: np.ndarray, n_samples: int):
    status, qk = _core.kin_solve(params, 0.0, lengths, np.zeros(12), False,
                                 topology.jump_tol)
    if status != _core.STATUS_OK:
        raise NoConvergence("mechanism does not assemble at crank angle 0")
    seed = qk
    p5 = np.empty((n_samples, 2))
    p16 = np.empty((n_samples, 2))
    zero = np.zeros(12)
    for i in range(n_samples):
        th1 = 2.0 * math.pi * i / n_samples
        status, seed = _core.kin_solve(params, th1, lengths, seed, True,
                                       topology.jump_tol)
        if status != _core.STATUS_OK:
            raise NoConvergence(f"mechanism jams at crank angle {th1:.4f}")
        o = _core.kin_outputs(params, seed, zero, zero)
        p5[i] = o[0:2]
        p16[i] = o[6:8]
    return p5, p16


def sensitivity_analysis(topology: LinkageTopology, parameter: str,
                         delta: float, n_samples: int = 180) -> SensitivityReport:
    """Trajectory deviation of the driven joints over one crank revolution
    when a single linkage parameter is perturbed by delta."""
    lengths = topology.fdc_nominal.copy()
    params = topology.params.copy()
    if parameter in _PARAM_KEYS:
        lengths_p = lengths.copy()
        lengths_p[_PARAM_KEYS[parameter]] += delta
        params_p = params
    elif parameter in _BASE_KEYS:
        lengths_p = lengths
        params_p = params.copy()
        params_p[_BASE_KEYS[parameter]] += delta
    else:
        raise KeyError(f"unknown linkage parameter {parameter!r}")
    base5, base16 = _sweep_outputs(topology, lengths, params, n_samples)
    pert5, pert16 = _sweep_outputs(topology, lengths_p, params_p, n_samples)
    d5 = np.hypot(*(pert5 - base5).T)
    d16 = np.hypot(*(pert16 - base16).T)
    return SensitivityReport(parameter, delta,
                             float(d5.max()), float(np.sqrt(np.mean(d5 ** 2))),
                             float(d16.max()), float(np.sqrt(np.mean(d16 ** 2))))


def write_sensitivity_csv(path: str, reports: list[SensitivityReport]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "delta", "max_dev_j5", "rms_dev_j5",
                    "max_dev_j16", "rms_dev_j16"])
        for r in reports:
            w.writerow([r.parameter, repr(r.delta), repr(r.max_dev_j5),
                        repr(r.rms_dev_j5), repr(r.max_dev_j16),
                        repr(r.rms_dev_j16)])
