"""Episode orchestration: build the initial state, integrate with fixed-step
RK4, log a trajectory, and analyze it (energy ledger, Poincare limit-cycle
detection, exports).

One step couples the subsystems in a fixed order: controllers (zero-order
hold) -> massless-chain accelerations -> driven-joint outputs -> coupling and
aerodynamic generalized forces -> massed-subsystem accelerations -> RK4 ->
attitude re-orthonormalization and closure projection. The massless chain
never receives forces back from the massed one.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .config import Config
from .control import ControllerConfig
from .errors import SimDiverged, TooShort

_MAGIC = b"MWTRJ\x00"
_VERSION = 1


def _log_columns() -> list[str]:
    cols = ["t"]
    cols += [f"qk_{n}" for n in ("th1", "th2", "th4", "th9", "th10", "th12",
                                 "th13", "th14", "l3b", "l3c", "l8b", "l10b")]
    cols += [f"qkd_{n}" for n in ("th1", "th2", "th4", "th9", "th10", "th12",
                                  "th13", "th14", "l3b", "l3c", "l8b", "l10b")]
    cols += ["px", "py", "pz"]
    cols += ["phi_lh", "phi_le", "phi_rh", "phi_re"]
    cols += ["vx", "vy", "vz", "phid_lh", "phid_le", "phid_rh", "phid_re",
             "wx", "wy", "wz"]
    cols += [f"R{i}{j}" for i in range(3) for j in range(3)]
    cols += ["work_drive", "work_damper", "work_aero"]
    cols += ["u_g", "u_3b", "u_3c", "u_8b", "u_10b"]
    cols += ["lref_3b", "lref_3c", "lref_8b", "lref_10b"]
    cols += ["theta_y", "Pi_x", "Pi_y", "Pi_z", "E_kin", "U_spring", "U_grav"]
    cols += [f"F_{seg}_{ax}" for seg in ("LH", "LR", "RH", "RR")
             for ax in ("x", "y", "z")]
    cols += ["p5x", "p5y", "v5x", "v5y", "p16x", "p16y", "v16x", "v16y"]
    return cols


LOG_COLUMNS = _log_columns()
assert len(LOG_COLUMNS) == _core.N_LOG


@dataclass
class Trajectory:
    """Uniform-grid log of one episode plus run metadata."""

    data: np.ndarray                    # (n, N_LOG)
    dt_log: float
    status: str
    steps_done: int
    final_state: np.ndarray = field(repr=False)
    columns: dict[str, int] = field(default_factory=lambda: {
        name: i for i, name in enumerate(LOG_COLUMNS)})

    def __len__(self):
        return self.data.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.columns[name]]

    def cols(self, names) -> np.ndarray:
        idx = [self.columns[n] for n in names]
        return self.data[:, idx]

    def rotations(self) -> np.ndarray:
        return self.data[:, _core.L_R:_core.L_R + 9].reshape(-1, 3, 3)

    def pitch(self) -> np.ndarray:
        return self.col("theta_y")

    def write_csv(self, path: str):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            for row in self.data:
                w.writerow([repr(float(v)) for v in row])

    def write_binary(self, path: str):
        """Compact dump: magic, version, column manifest, little-endian f64."""
        manifest = ",".join(LOG_COLUMNS).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", _VERSION))
            fh.write(struct.pack("<I", len(manifest)))
            fh.write(manifest)
            fh.write(struct.pack("<II", self.data.shape[0], self.data.shape[1]))
            fh.write(self.data.astype("<f8").tobytes())

    @classmethod
    def read_binary(cls, path: str) -> "Trajectory":
        with open(path, "rb") as fh:
            if fh.read(6) != _MAGIC:
                raise ValueError("bad magic")
            (version,) = struct.unpack("<I", fh.read(4))
            if version != _VERSION:
                raise ValueError(f"unsupported version {version}")
            (mlen,) = struct.unpack("<I", fh.read(4))
            manifest = fh.read(mlen).decode().split(",")
            rows, ncol = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(rows * ncol * 8), dtype="<f8")
        data = data.reshape(rows, ncol).copy()
        dt_log = float(data[1, 0] - data[0, 0]) if rows > 1 else 0.0
        return cls(data=data, dt_log=dt_log, status="loaded", steps_done=0,
                   final_state=np.zeros(_core.N_Y),
                   columns={n: i for i, n in enumerate(manifest)})


def initial_state(cfg: Config) -> np.ndarray:
    """Packed initial state: closed linkage, wings tracking the driven
    joints, body pose from the config."""
    ini = cfg.data["sim"]["initial"]
    th1 = float(ini["crank_angle_rad"])
    th1d = float(ini["crank_rate_rad_per_s"])
    status, qk = _core.kin_solve(cfg.mech, th1, cfg.fdc_nominal,
                                 np.zeros(12), False, cfg.jump_tol)
    if status != _core.STATUS_OK:
        raise SimDiverged(0.0, "initial linkage state does not assemble")
    qkd = _core.kin_dep_rates(cfg.mech, qk, th1d, np.zeros(4))
    outs = _core.kin_outputs(cfg.mech, qk, qkd, np.zeros(12))
    a4x, a4y = cfg.mech[_core.M_A4X], cfg.mech[_core.M_A4Y]
    phi_h = math.atan2(outs[1] - a4y, outs[0] - a4x)
    lh = cfg.dyn[_core.D_LH]
    ex = a4x + lh * math.cos(phi_h)
    ey = a4y + lh * math.sin(phi_h)
    psi = math.atan2(outs[7] - ey, outs[6] - ex)
    phi_e = psi - phi_h

    Y = np.zeros(_core.N_Y)
    Y[_core.Y_QK:_core.Y_QK + 12] = qk
    Y[_core.Y_QKD:_core.Y_QKD + 12] = qkd
    Y[_core.Y_P:_core.Y_P + 3] = ini["position_m"]
    offs = np.asarray(ini["wing_angle_offset_rad"], dtype=float)
    Y[_core.Y_PHI:_core.Y_PHI + 4] = np.array([phi_h, phi_e, phi_h, phi_e]) + offs
    Y[_core.Y_VD:_core.Y_VD + 3] = ini["velocity_mps"]
    Y[_core.Y_VD + 3:_core.Y_VD + 7] = ini["wing_rate_rad_per_s"]
    Y[_core.Y_VD + 7:_core.Y_VD + 10] = ini["omega_rad_per_s"]
    pitch = float(ini["pitch_rad"])
    c, s = math.cos(pitch), math.sin(pitch)
    Y[_core.Y_R:_core.Y_R + 9] = [c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c]
    return Y


def run_episode(cfg: Config, controller: ControllerConfig | None = None,
                duration: float | None = None, initial: np.ndarray | None = None,
                raise_on_divergence: bool = False,
                with_cost: bool = False):
    """Integrate one episode. Returns (Trajectory, J) with J = nan unless
    cost accumulation was requested."""
    ctrl = (controller or ControllerConfig.from_config(cfg)).packed()
    dt = cfg.dt
    T = cfg.duration if duration is None else float(duration)
    n_steps = int(round(T / dt))
    Y0 = initial_state(cfg) if initial is None else initial
    sim = cfg.data["sim"]
    status, steps, Yf, log, n_rows, J = _core.run_core(
        cfg.mech, cfg.dyn, cfg.aero, ctrl, Y0, dt, n_steps, cfg.log_every,
        float(sim["max_speed_mps"]), float(sim["max_rate_rad_per_s"]),
        cfg.toggles, cfg.cost_vector(enabled=with_cost), cfg.jump_tol)
    status_name = {_core.STATUS_OK: "ok",
                   _core.STATUS_NO_ASSEMBLY: "no-assembly",
                   _core.STATUS_BRANCH_JUMP: "branch-jump",
                   _core.STATUS_DIVERGED: "diverged"}[status]
    traj = Trajectory(data=log[:n_rows].copy(), dt_log=dt * cfg.log_every,
                      status=status_name, steps_done=int(steps),
                      final_state=Yf)
    if status != _core.STATUS_OK and raise_on_divergence:
        raise SimDiverged(steps * dt, status_name)
    return traj, (float(J) if with_cost else float("nan"))


@dataclass
class LimitCycleReport:
    detected: bool
    period: float
    transient_end: float
    return_distances: list[float]
    crossing_times: list[float]


def detect_limit_cycle(traj: Trajectory, section_phase: float = 0.0,
                       threshold: float = 0.1, min_hits: int = 3,
                       weights: dict | None = None) -> LimitCycleReport:
    """Poincare-section limit-cycle detection at a fixed crank phase.

    The section state is (theta_y, omega, qd_d) under a normalized metric;
    detection requires min_hits consecutive return distances below the
    threshold. The transient ends at the first crossing of the run.
    """
    th1 = traj.col("qk_th1")
    if th1[-1] - th1[0] < 10.0 * 2.0 * math.pi:
        raise TooShort("trajectory spans fewer than 10 crank periods")
    w = {"pitch": 10.0, "omega": 0.2, "vel": 1.0, "joint_rate": 0.02}
    if weights:
        w.update(weights)
    names = (["theta_y"], ["wx", "wy", "wz"], ["vx", "vy", "vz"],
             ["phid_lh", "phid_le", "phid_rh", "phid_re"])
    scales = (w["pitch"], w["omega"], w["vel"], w["joint_rate"])
    mat = np.hstack([traj.cols(n) * s for n, s in zip(names, scales)])
    t = traj.t

    # crossings of th1 mod 2pi through the section phase
    phase = np.mod(th1 - section_phase, 2.0 * math.pi)
    cross = np.nonzero(np.diff(phase) < -math.pi)[0]  # wrap-around samples
    states = []
    times = []
    for i in cross:
        # linear interpolation inside the wrapping interval
        a = phase[i] - 2.0 * math.pi
        b = phase[i + 1]
        frac = (0.0 - a) / (b - a) if b != a else 0.0
        states.append(mat[i] + frac * (mat[i + 1] - mat[i]))
        times.append(t[i] + frac * (t[i + 1] - t[i]))
    if len(states) < min_hits + 1:
        return LimitCycleReport(False, float("nan"), float("nan"), [], times)
    states = np.array(states)
    dists = list(np.linalg.norm(np.diff(states, axis=0), axis=1))

    detected = False
    transient_end = float("nan")
    for i in range(len(dists) - min_hits + 1):
        if all(d < threshold for d in dists[i:i + min_hits]):
            detected = True
            transient_end = times[i]
            break
    period = float(np.mean(np.diff(times))) if len(times) > 1 else float("nan")
    return LimitCycleReport(detected, period, transient_end, dists, times)


@dataclass
class EnergyAudit:
    """Per-step mechanical-energy ledger and its closure defect."""

    t: np.ndarray
    kinetic: np.ndarray
    spring: np.ndarray
    gravity: np.ndarray
    work_drive: np.ndarray
    work_damper: np.ndarray
    work_aero: np.ndarray
    closure: np.ndarray     # E(t) - E(0) - (W_drive + W_damper + W_aero)
    max_closure_error: float


def energy_audit(traj: Trajectory) -> EnergyAudit:
    """Check E(t) - E(0) against the accumulated non-conservative work.

    The work integrals are co-integrated with the state inside the stepper,
    so a conservative setup closes to integrator accuracy.
    """
    t = traj.t
    ek = traj.col("E_kin")
    us = traj.col("U_spring")
    ug = traj.col("U_grav")
    wd = traj.col("work_drive")
    wda = traj.col("work_damper")
    wa = traj.col("work_aero")
    E = ek + us + ug
    closure = (E - E[0]) - ((wd - wd[0]) + (wda - wda[0]) + (wa - wa[0]))
    scale = max(np.max(np.abs(E - E[0])), np.max(np.abs(ek)), 1e-30)
    return EnergyAudit(t=t, kinetic=ek, spring=us, gravity=ug, work_drive=wd,
                       work_damper=wda, work_aero=wa, closure=closure,
                       max_closure_error=float(np.max(np.abs(closure)) / scale))


def closure_residuals(cfg: Config, traj: Trajectory) -> np.ndarray:
    """Loop-closure residual norm at every logged step."""
    out = np.empty(len(traj))
    for i in range(len(traj)):
        qk = traj.data[i, _core.L_QK:_core.L_QK + 12]
        out[i] = np.max(np.abs(_core.kin_residual(cfg.mech, qk)))
    return out


def recompute_pitch_momentum(cfg: Config, traj: Trajectory):
    """Recompute theta_y and Pi from the logged states (consistency check)."""
    n = len(traj)
    thy = np.empty(n)
    Pi = np.empty((n, 3))
    for i in range(n):
        row = traj.data[i]
        R = row[_core.L_R:_core.L_R + 9]
        thy[i] = _core.pitch_of(R)
        Pi[i] = _core.angular_momentum(
            cfg.mech, cfg.dyn, row[_core.L_QK:_core.L_QK + 12],
            row[_core.L_QKD:_core.L_QKD + 12], row[_core.L_P:_core.L_P + 3],
            row[_core.L_PHI:_core.L_PHI + 4], row[_core.L_VD:_core.L_VD + 10], R)
    return thy, Pi


def write_plot_data(traj: Trajectory, out_dir: str):
    """Emit (t, pitch), (t, energies), and wingtip-path CSVs."""
    import os
    with open(os.path.join(out_dir, "pitch.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "theta_y"])
        for ti, yi in zip(traj.t, traj.col("theta_y")):
            w.writerow([repr(float(ti)), repr(float(yi))])
    with open(os.path.join(out_dir, "energies.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "E_kin", "U_spring", "U_grav", "work_drive",
                    "work_damper", "work_aero"])
        for i in range(len(traj)):
            w.writerow([repr(float(traj.t[i]))] +
                       [repr(float(traj.col(c)[i])) for c in
                        ("E_kin", "U_spring", "U_grav", "work_drive",
                         "work_damper", "work_aero")])
    with open(os.path.join(out_dir, "wingtip_path.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "p5x", "p5y", "p16x", "p16y"])
        for i in range(len(traj)):
            w.writerow([repr(float(traj.t[i]))] +
                       [repr(float(traj.col(c)[i])) for c in
                        ("p5x", "p5y", "p16x", "p16y")])
