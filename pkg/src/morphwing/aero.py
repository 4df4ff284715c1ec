"""Quasi-steady blade-element aerodynamics over four rectangular wing
segments (left/right x humerus/radius).

Per strip: the flow is sampled at the mid-chord point, the force acts at the
quarter-chord point, lift/drag magnitudes follow the translational
quasi-steady law (0.5 rho v^2 C c ds) with sinusoidal coefficient fits, and
the force is assembled in a flow-aligned basis (lift, span, drag) before
rotation to the inertial frame. Spanwise flow produces no force.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .config import Config
from .dynamics import DynamicState
from .errors import DegenerateFlow

_SEG_IDS = ("LH", "LR", "RH", "RR")
_SEG_BASE = {"LH": (_core.A_SEG_H, 0), "LR": (_core.A_SEG_R, 0),
             "RH": (_core.A_SEG_H, 1), "RR": (_core.A_SEG_R, 1)}


@dataclass
class WingSegment:
    """Rectangular strip-theory segment riding one massed link."""

    id: str
    chord: float
    span: float
    strips: int
    root_offset: float
    incidence: float
    x_offset: float
    spar_frac: float

    @classmethod
    def from_config(cls, cfg: Config, seg_id: str) -> "WingSegment":
        base, _side = _SEG_BASE[seg_id]
        a = cfg.aero
        return cls(id=seg_id,
                   chord=float(a[base + _core.SEG_CHORD]),
                   span=float(a[base + _core.SEG_SPAN]),
                   strips=int(a[base + _core.SEG_NS]),
                   root_offset=float(a[base + _core.SEG_R0]),
                   incidence=float(a[base + _core.SEG_INC]),
                   x_offset=float(a[base + _core.SEG_XOFF]),
                   spar_frac=float(a[base + _core.SEG_SPAR]))

    def area(self) -> float:
        return self.chord * self.span


@dataclass
class BladeElement:
    """One strip: geometry plus the two reference points in inertial frame."""

    index: int
    chord: float
    span_width: float
    p_quarter: np.ndarray
    p_mid: np.ndarray


@dataclass
class AeroEnvironment:
    density: float
    cl_coeffs: np.ndarray
    cd_coeffs: np.ndarray
    wind: np.ndarray

    @classmethod
    def from_config(cls, cfg: Config) -> "AeroEnvironment":
        a = cfg.aero
        return cls(density=float(a[_core.A_RHO]),
                   cl_coeffs=a[_core.A_CL0:_core.A_CL0 + 4].copy(),
                   cd_coeffs=a[_core.A_CD0:_core.A_CD0 + 4].copy(),
                   wind=a[_core.A_WINDX:_core.A_WINDX + 3].copy())


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if w == -np.pi else w


def lift_drag_coefficients(alpha: float, env: AeroEnvironment) -> tuple[float, float]:
    """Sinusoidal quasi-steady coefficient fits, periodic through wrapping."""
    if not np.isfinite(alpha):
        raise ValueError("angle of attack must be finite")
    a = wrap_angle(alpha)
    cl = env.cl_coeffs[0] + env.cl_coeffs[1] * np.sin(env.cl_coeffs[2] * a
                                                      + env.cl_coeffs[3])
    cd = env.cd_coeffs[0] - env.cd_coeffs[1] * np.cos(env.cd_coeffs[2] * a
                                                      + env.cd_coeffs[3])
    return float(cl), float(cd)


def effective_airspeed(p_m_velocity, span_dir, chord_dir,
                       eps: float = 1e-9) -> tuple[float, float]:
    """Projected airspeed perpendicular to the span, and the angle of attack.

    p_m_velocity is the mid-chord point velocity relative to the air; the
    span/chord directions define the segment frame (chord from leading to
    trailing edge). span_dir must be oriented so chord x span points toward
    the pressure (lower) side of the airfoil; for a right wing this is the
    inboard direction (see the "span_oriented" segment geometry entry).
    Raises DegenerateFlow when the projected speed is below eps, in which
    case downstream forces are zero.
    """
    u = np.asarray(p_m_velocity, dtype=float)
    s = np.asarray(span_dir, dtype=float)
    c = np.asarray(chord_dir, dtype=float)
    up = u - (u @ s) * s
    vr = float(np.linalg.norm(up))
    if vr < eps:
        raise DegenerateFlow("projected airspeed below threshold")
    n = np.cross(c, s)
    alpha = float(np.arctan2(up @ n, -(up @ c)))
    return vr, alpha


def strip_force(element: BladeElement, p_m_velocity, span_dir, chord_dir,
                env: AeroEnvironment) -> np.ndarray:
    """Strip force vector in the frame of the provided directions.

    Lift and drag magnitudes follow the quasi-steady law; drag opposes the
    projected motion, lift is perpendicular to it within the chord-normal
    plane. A degenerate projection yields an exact zero vector.
    """
    try:
        vr, alpha = effective_airspeed(p_m_velocity, span_dir, chord_dir)
    except DegenerateFlow:
        return np.zeros(3)
    cl, cd = lift_drag_coefficients(alpha, env)
    q = 0.5 * env.density * vr * vr * element.chord * element.span_width
    u = np.asarray(p_m_velocity, dtype=float)
    s = np.asarray(span_dir, dtype=float)
    up = u - (u @ s) * s
    dhat = -up / vr
    lhat = np.cross(s, dhat)
    return q * cl * lhat + q * cd * dhat


def build_elements(cfg: Config, state: DynamicState, qk: np.ndarray,
                   seg_id: str) -> list[BladeElement]:
    """Blade elements of one segment at the current state, inertial frame."""
    seg = WingSegment.from_config(cfg, seg_id)
    _base, side = _SEG_BASE[seg_id]
    geo = _segment_geometry(cfg, state, side, seg_id)
    origin, d, cvec = geo["origin"], geo["span"], geo["chord"]
    ds = seg.span / seg.strips
    R = state.R
    p = state.position
    out = []
    for k in range(seg.strips):
        eta = seg.root_offset + (k + 0.5) * ds
        spar = origin + eta * d + np.array([seg.x_offset, 0.0, 0.0])
        pa_b = spar + (0.25 - seg.spar_frac) * seg.chord * cvec
        pm_b = spar + (0.50 - seg.spar_frac) * seg.chord * cvec
        out.append(BladeElement(index=k, chord=seg.chord, span_width=ds,
                                p_quarter=p + R @ pa_b, p_mid=p + R @ pm_b))
    return out


def _segment_geometry(cfg: Config, state: DynamicState, side: int,
                      seg_id: str) -> dict:
    """Origin, span direction, and chord direction of a segment, body frame."""
    phi = state.wing_angles
    sgn, sx, sy, sz, dh, dhp, dr, drp = _core._body_points(cfg.dyn, cfg.mech,
                                                           phi, side)
    base, _s = _SEG_BASE[seg_id]
    inc = float(cfg.aero[base + _core.SEG_INC])
    if seg_id in ("LH", "RH"):
        origin = np.array([sx, sy, sz])
        d = dh
    else:
        origin = np.array([sx, sy, sz]) + cfg.dyn[_core.D_LH] * dh
        d = dr
    edn = sgn * np.cross(d, np.array([1.0, 0.0, 0.0]))
    cvec = -np.cos(inc) * np.array([1.0, 0.0, 0.0]) + np.sin(inc) * edn
    # span_oriented keeps chord x span pointing at the pressure side on
    # both wings (mirror-consistent handedness for the flow basis)
    return {"origin": origin, "span": d, "span_oriented": sgn * d,
            "chord": cvec, "sign": sgn}


def aero_generalized_force(cfg: Config, state: DynamicState, qk=None,
                           qkd=None) -> np.ndarray:
    """Generalized force (10-vector) of all strips via virtual work."""
    qk = np.zeros(12) if qk is None else qk
    qkd = np.zeros(12) if qkd is None else qkd
    out = _core.dyn_terms(cfg.mech, cfg.dyn, cfg.aero, qk, qkd,
                          state.position, state.wing_angles,
                          state.generalized_velocity(), state.R.reshape(-1),
                          False, False, True, False)
    return out[2]


def aero_power(cfg: Config, state: DynamicState, qk=None, qkd=None) -> float:
    """Total aerodynamic power (force dotted with application-point velocity)."""
    qk = np.zeros(12) if qk is None else qk
    qkd = np.zeros(12) if qkd is None else qkd
    out = _core.dyn_terms(cfg.mech, cfg.dyn, cfg.aero, qk, qkd,
                          state.position, state.wing_angles,
                          state.generalized_velocity(), state.R.reshape(-1),
                          False, False, True, False)
    return float(out[3][2])


def segment_forces(cfg: Config, state: DynamicState, qk=None, qkd=None) -> dict:
    """Per-segment total force vectors (inertial), keyed LH/LR/RH/RR."""
    qk = np.zeros(12) if qk is None else qk
    qkd = np.zeros(12) if qkd is None else qkd
    out = _core.dyn_terms(cfg.mech, cfg.dyn, cfg.aero, qk, qkd,
                          state.position, state.wing_angles,
                          state.generalized_velocity(), state.R.reshape(-1),
                          False, False, True, False)
    f = out[4]
    return {sid: f[3 * i:3 * i + 3].copy() for i, sid in enumerate(_SEG_IDS)}


def strip_table(cfg: Config, state: DynamicState, qk=None, qkd=None) -> np.ndarray:
    """Per-strip (side, segment, index, alpha, v_r, lift, drag) rows."""
    qk = np.zeros(12) if qk is None else qk
    qkd = np.zeros(12) if qkd is None else qkd
    return _core.aero_strip_table(cfg.mech, cfg.dyn, cfg.aero, qk, qkd,
                                  state.position, state.wing_angles,
                                  state.generalized_velocity(),
                                  state.R.reshape(-1))


def write_strip_csv(cfg: Config, traj, path: str):
    """Debug export: per-strip flow and force history recomputed from the
    logged states (time, segment, k, alpha, v_r, L, D)."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "segment", "k", "alpha", "v_r", "L", "D"])
        for i in range(len(traj)):
            row = traj.data[i]
            st = DynamicState(
                np.concatenate((row[_core.L_P:_core.L_P + 3],
                                row[_core.L_PHI:_core.L_PHI + 4])),
                row[_core.L_VD:_core.L_VD + 7],
                row[_core.L_R:_core.L_R + 9].reshape(3, 3),
                row[_core.L_VD + 7:_core.L_VD + 10])
            table = strip_table(cfg, st, row[_core.L_QK:_core.L_QK + 12],
                                row[_core.L_QKD:_core.L_QKD + 12])
            t = row[0]
            for entry in table:
                sid = _SEG_IDS[int(entry[0]) * 2 + int(entry[1])]
                w.writerow([repr(float(t)), sid, int(entry[2]),
                            repr(float(entry[3])), repr(float(entry[4])),
                            repr(float(entry[5])), repr(float(entry[6]))])
