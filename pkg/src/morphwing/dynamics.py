"""Massed subsystem: floating body plus the humerus/radius links of both
wings, ten generalized velocities, rotation-matrix attitude.

Generalized coordinates: body position (3), wing joint angles (4: left
humerus flap, left elbow, right humerus flap, right elbow; elbow angles are
relative to the humerus). Generalized velocities append the body-frame
angular velocity: v = [pdot, phidot, omega]. The equations of motion are
assembled per body from velocity Jacobians (Kane projection of the
Newton-Euler balance), which is equivalent to the Euler-Lagrange form with
the attitude equation written in body frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .config import Config
from .errors import NonPositiveDefinite, SingularMassMatrix


@dataclass
class DynamicState:
    """Massed-subsystem state with rotation-matrix attitude."""

    q: np.ndarray        # 7: body position (3) + wing joint angles (4)
    qd: np.ndarray       # 7
    R: np.ndarray        # 3x3 body->inertial
    omega: np.ndarray    # 3, body frame

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.q.shape != (7,) or self.qd.shape != (7,):
            raise ValueError("q and qd must be 7-vectors")
        if self.R.shape != (3, 3) or self.omega.shape != (3,):
            raise ValueError("R must be 3x3 and omega a 3-vector")

    @property
    def position(self) -> np.ndarray:
        return self.q[:3]

    @property
    def wing_angles(self) -> np.ndarray:
        return self.q[3:]

    @property
    def velocity(self) -> np.ndarray:
        return self.qd[:3]

    def generalized_velocity(self) -> np.ndarray:
        return np.concatenate((self.qd, self.omega))

    def orthonormality_error(self) -> float:
        return float(np.linalg.norm(self.R.T @ self.R - np.eye(3)))

    def pitch(self) -> float:
        """Z-Y-X Tait-Bryan pitch; negative is nose-up with z-up frames."""
        return float(_core.pitch_of(self.R.reshape(-1)))

    @classmethod
    def at_rest(cls, wing_angles, pitch: float = 0.0,
                position=(0.0, 0.0, 0.0)) -> "DynamicState":
        q = np.concatenate((np.asarray(position, dtype=float),
                            np.asarray(wing_angles, dtype=float)))
        c, s = np.cos(pitch), np.sin(pitch)
        # rotation about the body y axis; pitch_of(R) recovers the argument
        R = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return cls(q, np.zeros(7), R, np.zeros(3))


@dataclass
class MassProperties:
    """Body and per-link inertial data (links mirrored left/right)."""

    body_mass: float
    body_inertia: np.ndarray          # diagonal, body frame
    humerus_mass: float
    humerus_com: float
    humerus_inertia_joint: float
    humerus_length: float
    radius_mass: float
    radius_com: float
    radius_inertia_joint: float
    radius_length: float

    def __post_init__(self):
        self.body_inertia = np.asarray(self.body_inertia, dtype=float)
        for name in ("body_mass", "humerus_mass", "radius_mass"):
            if getattr(self, name) <= 0:
                raise NonPositiveDefinite(f"{name} must be > 0")
        if np.any(self.body_inertia <= 0):
            raise NonPositiveDefinite("body inertia entries must be > 0")
        for link in ("humerus", "radius"):
            m = getattr(self, f"{link}_mass")
            c = getattr(self, f"{link}_com")
            ij = getattr(self, f"{link}_inertia_joint")
            if ij - m * c * c <= 0:
                raise NonPositiveDefinite(
                    f"{link} joint inertia must exceed mass*com^2")

    @classmethod
    def from_config(cls, cfg: Config) -> "MassProperties":
        b = cfg.data["body"]
        lh = cfg.data["links"]["humerus"]
        lr = cfg.data["links"]["radius"]
        return cls(body_mass=b["mass_kg"],
                   body_inertia=np.array(b["inertia_kgm2"], dtype=float),
                   humerus_mass=lh["mass_kg"], humerus_com=lh["com_offset_m"],
                   humerus_inertia_joint=lh["inertia_joint_kgm2"],
                   humerus_length=lh["length_m"],
                   radius_mass=lr["mass_kg"], radius_com=lr["com_offset_m"],
                   radius_inertia_joint=lr["inertia_joint_kgm2"],
                   radius_length=lr["length_m"])

    def total_mass(self) -> float:
        return self.body_mass + 2.0 * (self.humerus_mass + self.radius_mass)


@dataclass
class JointCoupling:
    """Spring-damper site tying a massed link to a driven massless joint."""

    stiffness: float
    damping: float
    rest_length: float
    attach_radius: float

    def __post_init__(self):
        if self.stiffness < 0 or self.damping < 0:
            raise ValueError("stiffness and damping must be >= 0")


def _terms(cfg: Config, state: DynamicState, qk=None, qkd=None,
           gravity=None, damping=None, aero=False, coupling=True):
    toggles = cfg.toggles
    gravity_on = toggles[0] > 0.5 if gravity is None else gravity
    damping_on = toggles[1] > 0.5 if damping is None else damping
    qk = np.zeros(12) if qk is None else qk
    qkd = np.zeros(12) if qkd is None else qkd
    vd = state.generalized_velocity()
    return _core.dyn_terms(cfg.mech, cfg.dyn, cfg.aero, qk, qkd,
                           state.position, state.wing_angles, vd,
                           state.R.reshape(-1), gravity_on, damping_on,
                           aero, coupling)


def mass_matrix(cfg: Config, state: DynamicState) -> np.ndarray:
    """10x10 generalized mass matrix; raises if not positive definite."""
    M = _terms(cfg, state, coupling=False)[0]
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite("mass matrix is not positive definite") from exc
    return M


def bias_forces(cfg: Config, state: DynamicState, gravity: bool | None = None) -> np.ndarray:
    """Velocity-product plus gravity terms h(q, v); M vdot + h = Q."""
    return _terms(cfg, state, gravity=gravity, coupling=False)[1]


def kinetic_energy(cfg: Config, state: DynamicState) -> float:
    v = state.generalized_velocity()
    M = _terms(cfg, state, coupling=False)[0]
    return float(0.5 * v @ M @ v)


def coupling_forces(cfg: Config, state: DynamicState, qk: np.ndarray,
                    qkd: np.ndarray, damping: bool | None = None):
    """Generalized spring-damper force of all four coupling sites.

    Returns (Q, site_forces) where Q is the 10-vector generalized force and
    site_forces the per-site body-frame force 3-vectors, ordered left
    humerus, left radius, right humerus, right radius.
    """
    Q = _terms(cfg, state, qk=qk, qkd=qkd, damping=damping, coupling=True)[2]
    site_forces = _site_forces(cfg, state, qk, qkd, damping=damping)
    return Q, site_forces


def _site_forces(cfg: Config, state: DynamicState, qk, qkd, damping=None):
    """Recompute the per-site coupling forces (body frame) for reporting."""
    dyn = cfg.dyn
    toggles = cfg.toggles
    damping_on = toggles[1] > 0.5 if damping is None else damping
    outs = _core.kin_outputs(cfg.mech, qk, qkd, np.zeros(12))
    phi = state.wing_angles
    om = state.omega
    forces = []
    for side in range(2):
        sgn, sx, sy, sz, dh, dhp, dr, drp = _core._body_points(dyn, cfg.mech,
                                                               phi, side)
        wh = state.qd[3 + 2 * side]
        we = state.qd[4 + 2 * side]
        for site in range(2):
            if site == 0:
                k, cd = dyn[_core.D_KH], dyn[_core.D_CDH] if damping_on else 0.0
                L0, ratt = dyn[_core.D_R0H], dyn[_core.D_RATTH]
                att = np.array([sx, sy, sz]) + ratt * dh
                attv = ratt * dhp * wh
                anch = np.array([dyn[_core.D_WX],
                                 sgn * (dyn[_core.D_WY] + outs[0]),
                                 dyn[_core.D_WZ] + outs[1]])
                anchv = np.array([0.0, sgn * outs[2], outs[3]])
            else:
                k, cd = dyn[_core.D_KR], dyn[_core.D_CDR] if damping_on else 0.0
                L0, ratt = dyn[_core.D_R0R], dyn[_core.D_RATTR]
                att = (np.array([sx, sy, sz]) + dyn[_core.D_LH] * dh
                       + ratt * dr)
                attv = dyn[_core.D_LH] * dhp * wh + ratt * drp * (wh + we)
                anch = np.array([dyn[_core.D_WX],
                                 sgn * (dyn[_core.D_WY] + outs[6]),
                                 dyn[_core.D_WZ] + outs[7]])
                anchv = np.array([0.0, sgn * outs[8], outs[9]])
            dlt = att - anch
            dmag = np.linalg.norm(dlt)
            if dmag > 1e-12:
                f = -k * (1.0 - L0 / dmag) * dlt
            else:
                f = -k * dlt if L0 == 0.0 else np.zeros(3)
            dv = np.cross(om, dlt) + attv - anchv
            f = f - cd * dv
            forces.append(f)
    return forces


def coupling_from_config(cfg: Config) -> dict[str, JointCoupling]:
    d = cfg.dyn
    return {
        "humerus": JointCoupling(d[_core.D_KH], d[_core.D_CDH],
                                 d[_core.D_R0H], d[_core.D_RATTH]),
        "radius": JointCoupling(d[_core.D_KR], d[_core.D_CDR],
                                d[_core.D_R0R], d[_core.D_RATTR]),
    }


def step_attitude(R: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """One RK4 step of Rdot = R [omega]x with re-orthonormalization."""
    Rf = np.ascontiguousarray(R, dtype=float).reshape(-1).copy()
    om = np.asarray(omega, dtype=float)

    def rate(Rv):
        W = np.array([[0.0, -om[2], om[1]],
                      [om[2], 0.0, -om[0]],
                      [-om[1], om[0], 0.0]])
        return (Rv.reshape(3, 3) @ W).reshape(-1)

    k1 = rate(Rf)
    k2 = rate(Rf + 0.5 * dt * k1)
    k3 = rate(Rf + 0.5 * dt * k2)
    k4 = rate(Rf + dt * k3)
    Rn = Rf + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    _core._orthonormalize(Rn)
    return Rn.reshape(3, 3)


def dynamics_accel(cfg: Config, state: DynamicState, forces: np.ndarray) -> np.ndarray:
    """Generalized acceleration [qdd; omegadot] = M^-1 (Q - h)."""
    M, h = _terms(cfg, state, coupling=False)[:2]
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularMassMatrix(f"mass matrix condition number {cond:.3e}")
    return np.linalg.solve(M, np.asarray(forces, dtype=float) - h)


def angular_momentum(cfg: Config, state: DynamicState) -> np.ndarray:
    """Total angular momentum about the vehicle COM, inertial frame."""
    return _core.angular_momentum(cfg.mech, cfg.dyn, np.zeros(12),
                                  np.zeros(12), state.position,
                                  state.wing_angles,
                                  state.generalized_velocity(),
                                  state.R.reshape(-1))
