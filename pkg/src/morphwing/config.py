"""Configuration schema, defaults, validation, and YAML round-tripping.

All physical quantities carry SI unit suffixes in their key names. The file
format is nested YAML with one section per subsystem; absent keys fall back
to defaults, and every load is fully validated (errors name the key path).
"""

from __future__ import annotations

import copy
import io
import math

import numpy as np
import yaml

from . import _core
from .errors import ConfigError, ParseError

# Defaults define a plausible desk-scale vehicle: ~34 g total mass, ~0.30 m
# span, 10 Hz wingbeat. Every number here is overridable from the config file.
DEFAULTS: dict = {
    "mechanism": {
        # planar anchors of the wing-root frame (meters)
        "crank1_pivot_m": [0.0168, 0.0154],
        "rocker_h_pivot_m": [0.020, -0.005],
        "crank2_pivot_m": [0.034, 0.002],
        "rocker_r_pivot_m": [0.040, 0.026],
        # link lengths (meters)
        "crank1_len_m": 0.008,
        "coupler_h_len_m": 0.022,
        "rocker_h_base_len_m": 0.018,
        "bend1_rad": -0.62,
        "bend2_rad": -0.55,
        "crank2_len_m": 0.007,
        "coupler_r_len_m": 0.0286,
        "elbow_mount_offset_m": 0.004,
        "rocker_r_base_len_m": 0.011,
        "rocker_r_ext_len_m": 0.0062,
        "forearm_base_len_m": 0.020,
        "output_ext_len_m": 0.018,
        "binary_link_len_m": 0.022,
        # drive coupling between the two crank gears
        "gear_ratio": 1.0,
        "gear_phase_rad": 3.141592653589793,
        # assembly branch signs for the three loops at the reference pose
        "branch_h": 1,
        "branch_r1": -1,
        "branch_r2": -1,
        # nominal FDC lengths (assembly pose) and hard bounds
        "fdc_nominal_m": [0.0078, 0.0105, 0.0062, 0.0072],
        "fdc_min_m": [0.0048, 0.0075, 0.0032, 0.0042],
        "fdc_max_m": [0.0108, 0.0135, 0.0092, 0.0102],
        "branch_jump_tol_rad": 0.7,
    },
    "body": {
        "mass_kg": 0.022,
        "inertia_kgm2": [8.0e-6, 1.2e-5, 1.0e-5],
        # wing-root frame offset in body coordinates; the linkage plane maps
        # (x_link, y_link) -> body (x: const, y: +/-(wy + x_link), z: wz + y_link)
        "root_offset_m": [0.010, 0.012, 0.004],
        "gravity_mps2": 9.81,
    },
    "links": {
        "humerus": {
            "mass_kg": 0.0025,
            "length_m": 0.0272,
            "com_offset_m": 0.012,
            "inertia_joint_kgm2": 6.5e-7,
        },
        "radius": {
            "mass_kg": 0.0035,
            "length_m": 0.090,
            "com_offset_m": 0.040,
            "inertia_joint_kgm2": 9.5e-6,
        },
    },
    "coupling": {
        "humerus": {
            "stiffness_n_per_m": 450.0,
            "damping_ns_per_m": 5.0,
            "rest_length_m": 0.0,
            # "auto" places the attachment at the nominal driven-joint radius
            "attach_radius_m": "auto",
        },
        "radius": {
            "stiffness_n_per_m": 280.0,
            "damping_ns_per_m": 2.0,
            "rest_length_m": 0.0,
            "attach_radius_m": "auto",
        },
    },
    "aero": {
        "density_kg_per_m3": 1.225,
        # translational quasi-steady sinusoidal coefficient fits,
        # CL = a0 + a1 sin(a2*alpha + a3), CD = b0 - b1 cos(b2*alpha + b3)
        "cl_coeffs": [0.225, 1.58, 2.13, -0.12566370614359174],
        "cd_coeffs": [1.92, 1.55, 2.04, -0.17139133254584316],
        "wind_mps": [0.0, 0.0, 0.0],
        "segments": {
            "humerus": {
                "chord_m": 0.050,
                "span_m": 0.022,
                "root_offset_m": 0.003,
                "strips": 10,
                "incidence_rad": 0.10,
                "x_offset_m": 0.015,
                "spar_chord_frac": 0.25,
            },
            "radius": {
                "chord_m": 0.045,
                "span_m": 0.080,
                "root_offset_m": 0.005,
                "strips": 10,
                "incidence_rad": 0.08,
                "x_offset_m": -0.012,
                "spar_chord_frac": 0.25,
            },
        },
    },
    "control": {
        "flap_rate_gain_per_s": 20.0,
        "flap_rate_target_rad_per_s": 62.83185307179586,  # 2*pi*10
        "fdc_kp_per_s2": 4000.0,
        "fdc_kd_per_s": 120.0,
        # zero-path FDC reference lengths (meters)
        "zero_path_lengths_m": [0.0078, 0.0105, 0.0062, 0.0072],
        # pitch gain entries as printed (per radian); the unit scale converts
        # them to meters per radian
        "pitch_gain": [2.0, -2.0, -2.0, 2.0],
        "pitch_gain_unit_scale": 0.001,
        # Z-Y-X pitch of the body->inertial rotation; with z-up frames a
        # nose-up trim target is negative (33 deg nose-up here)
        "pitch_target_rad": -0.5759586531581288,
        # reference saturation bounds (meters); "auto" uses zero-path +/- 3 mm
        "ref_min_m": "auto",
        "ref_max_m": "auto",
        "flap_control_on": True,
        "fdc_control_on": True,
        "pitch_control_on": True,
    },
    "cost": {
        "w_momentum": 1.0,
        "w_velocity": 1.0,
        "w_pitch": 100.0,
        "sample_dt_s": 0.01,
        "warmup_s": 1.0,
        "diverged_penalty": 1.0e9,
    },
    "sim": {
        "dt_s": 1.0e-4,
        "duration_s": 4.0,
        "log_every": 10,
        "gravity_on": True,
        "aero_on": True,
        "damping_on": True,
        "coupling_on": True,
        "max_speed_mps": 100.0,
        "max_rate_rad_per_s": 1.0e4,
        "initial": {
            "crank_angle_rad": 0.0,
            "crank_rate_rad_per_s": 0.0,
            "position_m": [0.0, 0.0, 0.0],
            "velocity_mps": [0.0, 0.0, 0.0],
            "pitch_rad": 0.0,
            "omega_rad_per_s": [0.0, 0.0, 0.0],
            # offsets/rates on [left humerus, left elbow, right humerus,
            # right elbow] relative to the linkage-tracking pose
            "wing_angle_offset_rad": [0.0, 0.0, 0.0, 0.0],
            "wing_rate_rad_per_s": [0.0, 0.0, 0.0, 0.0],
        },
    },
    "optimizer": {
        "method": "nelder-mead",
        "budget": 80,
        "seed": 0,
        "init_step": 0.25,
        "pitch_gain_min": [-2.0, -2.0, -2.0, -2.0],
        "pitch_gain_max": [2.0, 2.0, 2.0, 2.0],
    },
}

_NUMERIC = (int, float)


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        kp = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(kp, "unknown configuration key")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(kp, "expected a mapping")
            out[key] = _deep_merge(base[key], val, kp)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _require_number(cfg: dict, section: str, key: str, positive=False,
                    nonneg=False):
    val = cfg
    for part in (section + "." + key).split("."):
        val = val[part]
    if isinstance(val, bool) or not isinstance(val, _NUMERIC) or not math.isfinite(val):
        raise ConfigError(f"{section}.{key}", "must be a finite number")
    if positive and val <= 0:
        raise ConfigError(f"{section}.{key}", "must be > 0")
    if nonneg and val < 0:
        raise ConfigError(f"{section}.{key}", "must be >= 0")
    return float(val)


def _require_vec(cfg: dict, section: str, key: str, n: int):
    val = cfg
    for part in (section + "." + key).split("."):
        val = val[part]
    if (not isinstance(val, (list, tuple)) or len(val) != n
            or any(isinstance(v, bool) or not isinstance(v, _NUMERIC)
                   or not math.isfinite(v) for v in val)):
        raise ConfigError(f"{section}.{key}", f"must be a list of {n} finite numbers")
    return [float(v) for v in val]


class Config:
    """Validated full configuration with packed parameter vectors for the core."""

    def __init__(self, data: dict):
        self.data = data
        self._validate_and_pack()

    # -- construction --------------------------------------------------------

    @classmethod
    def default(cls) -> "Config":
        return cls(copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, override: dict) -> "Config":
        return cls(_deep_merge(DEFAULTS, override or {}))

    @classmethod
    def load(cls, path: str) -> "Config":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: top level must be a mapping")
        return cls.from_dict(raw)

    def apply_overrides(self, pairs: list[str]) -> "Config":
        """Apply dotted key=value overrides (CLI --set)."""
        data = copy.deepcopy(self.data)
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(pair, "override must be key=value")
            key, _, raw = pair.partition("=")
            node = data
            parts = key.split(".")
            for part in parts[:-1]:
                if not isinstance(node, dict) or part not in node:
                    raise ConfigError(key, "unknown configuration key")
                node = node[part]
            leaf = parts[-1]
            if not isinstance(node, dict) or leaf not in node:
                raise ConfigError(key, "unknown configuration key")
            node[leaf] = yaml.safe_load(io.StringIO(raw))
        return Config(data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=None)

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_yaml())

    # -- validation + packing -------------------------------------------------

    def _validate_and_pack(self):
        cfg = self.data
        mech = np.zeros(_core.N_MECH)
        m = cfg["mechanism"]
        a1 = _require_vec(cfg, "mechanism", "crank1_pivot_m", 2)
        a4 = _require_vec(cfg, "mechanism", "rocker_h_pivot_m", 2)
        a9 = _require_vec(cfg, "mechanism", "crank2_pivot_m", 2)
        a12 = _require_vec(cfg, "mechanism", "rocker_r_pivot_m", 2)
        mech[_core.M_A1X], mech[_core.M_A1Y] = a1
        mech[_core.M_A4X], mech[_core.M_A4Y] = a4
        mech[_core.M_A9X], mech[_core.M_A9Y] = a9
        mech[_core.M_A12X], mech[_core.M_A12Y] = a12
        mech[_core.M_L1] = _require_number(cfg, "mechanism", "crank1_len_m", positive=True)
        mech[_core.M_L2] = _require_number(cfg, "mechanism", "coupler_h_len_m", positive=True)
        mech[_core.M_L3A] = _require_number(cfg, "mechanism", "rocker_h_base_len_m", positive=True)
        mech[_core.M_B1] = _require_number(cfg, "mechanism", "bend1_rad")
        mech[_core.M_B2] = _require_number(cfg, "mechanism", "bend2_rad")
        mech[_core.M_L6] = _require_number(cfg, "mechanism", "crank2_len_m", positive=True)
        mech[_core.M_L7] = _require_number(cfg, "mechanism", "coupler_r_len_m", positive=True)
        mech[_core.M_EO] = _require_number(cfg, "mechanism", "elbow_mount_offset_m", nonneg=True)
        mech[_core.M_L8A] = _require_number(cfg, "mechanism", "rocker_r_base_len_m", positive=True)
        mech[_core.M_L9E] = _require_number(cfg, "mechanism", "rocker_r_ext_len_m", nonneg=True)
        mech[_core.M_L10A] = _require_number(cfg, "mechanism", "forearm_base_len_m", positive=True)
        mech[_core.M_L16E] = _require_number(cfg, "mechanism", "output_ext_len_m", nonneg=True)
        mech[_core.M_L12] = _require_number(cfg, "mechanism", "binary_link_len_m", positive=True)
        mech[_core.M_GR] = _require_number(cfg, "mechanism", "gear_ratio")
        mech[_core.M_GPH] = _require_number(cfg, "mechanism", "gear_phase_rad")
        for name, idx in (("branch_h", _core.M_BRH), ("branch_r1", _core.M_BR1),
                          ("branch_r2", _core.M_BR2)):
            val = m[name]
            if val not in (1, -1):
                raise ConfigError(f"mechanism.{name}", "must be +1 or -1")
            mech[idx] = float(val)
        fdc_nom = _require_vec(cfg, "mechanism", "fdc_nominal_m", 4)
        fdc_min = _require_vec(cfg, "mechanism", "fdc_min_m", 4)
        fdc_max = _require_vec(cfg, "mechanism", "fdc_max_m", 4)
        for i in range(4):
            if not (fdc_min[i] < fdc_nom[i] < fdc_max[i]):
                raise ConfigError("mechanism.fdc_min_m",
                                  f"channel {i}: need min < nominal < max")
        self.jump_tol = _require_number(cfg, "mechanism", "branch_jump_tol_rad",
                                        positive=True)
        self.mech = mech
        self.fdc_nominal = np.array(fdc_nom)
        self.fdc_min = np.array(fdc_min)
        self.fdc_max = np.array(fdc_max)

        dyn = np.zeros(_core.N_DYN)
        dyn[_core.D_MBODY] = _require_number(cfg, "body", "mass_kg", positive=True)
        J = _require_vec(cfg, "body", "inertia_kgm2", 3)
        if any(v <= 0 for v in J):
            raise ConfigError("body.inertia_kgm2", "entries must be > 0")
        dyn[_core.D_JX], dyn[_core.D_JY], dyn[_core.D_JZ] = J
        dyn[_core.D_GRAV] = _require_number(cfg, "body", "gravity_mps2", nonneg=True)
        W = _require_vec(cfg, "body", "root_offset_m", 3)
        dyn[_core.D_WX], dyn[_core.D_WY], dyn[_core.D_WZ] = W
        for link, (midx, cidx, iidx, lidx) in (
                ("humerus", (_core.D_MH, _core.D_CH, _core.D_ICH, _core.D_LH)),
                ("radius", (_core.D_MR, _core.D_CR, _core.D_ICR, _core.D_LR))):
            sec = f"links.{link}"
            mass = _require_number(cfg, sec, "mass_kg", positive=True)
            length = _require_number(cfg, sec, "length_m", positive=True)
            com = _require_number(cfg, sec, "com_offset_m", positive=True)
            ij = _require_number(cfg, sec, "inertia_joint_kgm2", positive=True)
            icom = ij - mass * com * com
            if icom <= 0:
                raise ConfigError(f"{sec}.inertia_joint_kgm2",
                                  "must exceed mass*com_offset^2 (parallel axis)")
            if com > length:
                raise ConfigError(f"{sec}.com_offset_m", "must not exceed length_m")
            dyn[midx] = mass
            dyn[cidx] = com
            dyn[iidx] = icom
            dyn[lidx] = length

        # coupling; attach radii may be "auto" (resolved from the nominal cycle)
        auto_radii = None
        for site, (kidx, cdidx, r0idx, raidx, auto_slot) in (
                ("humerus", (_core.D_KH, _core.D_CDH, _core.D_R0H, _core.D_RATTH, 0)),
                ("radius", (_core.D_KR, _core.D_CDR, _core.D_R0R, _core.D_RATTR, 1))):
            sec = f"coupling.{site}"
            dyn[kidx] = _require_number(cfg, sec, "stiffness_n_per_m", nonneg=True)
            dyn[cdidx] = _require_number(cfg, sec, "damping_ns_per_m", nonneg=True)
            dyn[r0idx] = _require_number(cfg, sec, "rest_length_m", nonneg=True)
            rval = cfg["coupling"][site]["attach_radius_m"]
            if rval == "auto":
                if auto_radii is None:
                    auto_radii = self._nominal_attach_radii()
                dyn[raidx] = auto_radii[auto_slot]
            else:
                if isinstance(rval, bool) or not isinstance(rval, _NUMERIC) or rval <= 0:
                    raise ConfigError(f"{sec}.attach_radius_m",
                                      'must be "auto" or a positive number')
                dyn[raidx] = float(rval)
        self.dyn = dyn

        aero = np.zeros(_core.N_AERO)
        aero[_core.A_RHO] = _require_number(cfg, "aero", "density_kg_per_m3", positive=True)
        cl = _require_vec(cfg, "aero", "cl_coeffs", 4)
        cd = _require_vec(cfg, "aero", "cd_coeffs", 4)
        if cd[0] - abs(cd[1]) < 0:
            raise ConfigError("aero.cd_coeffs", "fit allows negative drag (need b0 >= |b1|)")
        aero[_core.A_CL0:_core.A_CL0 + 4] = cl
        aero[_core.A_CD0:_core.A_CD0 + 4] = cd
        aero[_core.A_WINDX:_core.A_WINDX + 3] = _require_vec(cfg, "aero", "wind_mps", 3)
        for seg, base in (("humerus", _core.A_SEG_H), ("radius", _core.A_SEG_R)):
            sec = f"aero.segments.{seg}"
            aero[base + _core.SEG_CHORD] = _require_number(cfg, sec, "chord_m", positive=True)
            aero[base + _core.SEG_SPAN] = _require_number(cfg, sec, "span_m", positive=True)
            aero[base + _core.SEG_R0] = _require_number(cfg, sec, "root_offset_m", nonneg=True)
            ns = cfg["aero"]["segments"][seg]["strips"]
            if not isinstance(ns, int) or isinstance(ns, bool) or ns < 1:
                raise ConfigError(f"{sec}.strips", "must be an integer >= 1")
            aero[base + _core.SEG_NS] = float(ns)
            aero[base + _core.SEG_INC] = _require_number(cfg, sec, "incidence_rad")
            aero[base + _core.SEG_XOFF] = _require_number(cfg, sec, "x_offset_m")
            frac = _require_number(cfg, sec, "spar_chord_frac", nonneg=True)
            if frac > 1.0:
                raise ConfigError(f"{sec}.spar_chord_frac", "must be within [0, 1]")
            aero[base + _core.SEG_SPAR] = frac
        self.aero = aero

        ctrl = np.zeros(_core.N_CTRL)
        ctrl[_core.C_KD1] = _require_number(cfg, "control", "flap_rate_gain_per_s", nonneg=True)
        wref = _require_number(cfg, "control", "flap_rate_target_rad_per_s")
        if wref <= 0:
            raise ConfigError("control.flap_rate_target_rad_per_s", "must be > 0")
        ctrl[_core.C_WREF] = wref
        ctrl[_core.C_KP2] = _require_number(cfg, "control", "fdc_kp_per_s2", nonneg=True)
        ctrl[_core.C_KD2] = _require_number(cfg, "control", "fdc_kd_per_s", nonneg=True)
        lzp = _require_vec(cfg, "control", "zero_path_lengths_m", 4)
        ctrl[_core.C_LZP:_core.C_LZP + 4] = lzp
        kc = _require_vec(cfg, "control", "pitch_gain", 4)
        scale = _require_number(cfg, "control", "pitch_gain_unit_scale", positive=True)
        for i in range(4):
            ctrl[_core.C_KC + i] = kc[i] * scale
        ctrl[_core.C_THREF] = _require_number(cfg, "control", "pitch_target_rad")
        rmin = cfg["control"]["ref_min_m"]
        rmax = cfg["control"]["ref_max_m"]
        if rmin == "auto":
            rmin = [v - 0.003 for v in lzp]
        else:
            rmin = _require_vec(cfg, "control", "ref_min_m", 4)
        if rmax == "auto":
            rmax = [v + 0.003 for v in lzp]
        else:
            rmax = _require_vec(cfg, "control", "ref_max_m", 4)
        for i in range(4):
            if not (rmin[i] < lzp[i] < rmax[i]):
                raise ConfigError("control.ref_min_m",
                                  f"channel {i}: need min < zero-path < max")
        ctrl[_core.C_LMIN:_core.C_LMIN + 4] = rmin
        ctrl[_core.C_LMAX:_core.C_LMAX + 4] = rmax
        for name, idx in (("flap_control_on", _core.C_FLAP_ON),
                          ("fdc_control_on", _core.C_FDC_ON),
                          ("pitch_control_on", _core.C_PITCH_ON)):
            val = cfg["control"][name]
            if not isinstance(val, bool):
                raise ConfigError(f"control.{name}", "must be true or false")
            ctrl[idx] = 1.0 if val else 0.0
        self.ctrl = ctrl

        for key, positive in (("w_momentum", False), ("w_velocity", False),
                              ("w_pitch", False)):
            _require_number(cfg, "cost", key, nonneg=True)
        sample = _require_number(cfg, "cost", "sample_dt_s", positive=True)
        _require_number(cfg, "cost", "warmup_s", nonneg=True)
        _require_number(cfg, "cost", "diverged_penalty", positive=True)

        dt = _require_number(cfg, "sim", "dt_s", positive=True)
        dur = _require_number(cfg, "sim", "duration_s", positive=True)
        if dur < dt:
            raise ConfigError("sim.duration_s", "must be >= sim.dt_s")
        stride = sample / dt
        if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
            raise ConfigError("cost.sample_dt_s",
                              "must be an integer multiple of sim.dt_s")
        log_every = cfg["sim"]["log_every"]
        if not isinstance(log_every, int) or isinstance(log_every, bool) or log_every < 1:
            raise ConfigError("sim.log_every", "must be an integer >= 1")
        for name in ("gravity_on", "aero_on", "damping_on", "coupling_on"):
            if not isinstance(cfg["sim"][name], bool):
                raise ConfigError(f"sim.{name}", "must be true or false")
        _require_number(cfg, "sim", "max_speed_mps", positive=True)
        _require_number(cfg, "sim", "max_rate_rad_per_s", positive=True)
        _require_number(cfg, "sim.initial", "crank_angle_rad")
        _require_number(cfg, "sim.initial", "crank_rate_rad_per_s")
        _require_vec(cfg, "sim.initial", "position_m", 3)
        _require_vec(cfg, "sim.initial", "velocity_mps", 3)
        _require_number(cfg, "sim.initial", "pitch_rad")
        _require_vec(cfg, "sim.initial", "omega_rad_per_s", 3)
        _require_vec(cfg, "sim.initial", "wing_angle_offset_rad", 4)
        _require_vec(cfg, "sim.initial", "wing_rate_rad_per_s", 4)

        opt = cfg["optimizer"]
        if opt["method"] not in ("nelder-mead", "cem"):
            raise ConfigError("optimizer.method", 'must be "nelder-mead" or "cem"')
        if not isinstance(opt["budget"], int) or isinstance(opt["budget"], bool) or opt["budget"] < 0:
            raise ConfigError("optimizer.budget", "must be an integer >= 0")
        if not isinstance(opt["seed"], int) or isinstance(opt["seed"], bool) or opt["seed"] < 0:
            raise ConfigError("optimizer.seed", "must be an integer >= 0")
        _require_number(cfg, "optimizer", "init_step", positive=True)
        gmin = _require_vec(cfg, "optimizer", "pitch_gain_min", 4)
        gmax = _require_vec(cfg, "optimizer", "pitch_gain_max", 4)
        for i in range(4):
            if gmin[i] > gmax[i]:
                raise ConfigError("optimizer.pitch_gain_min",
                                  f"channel {i}: min exceeds max")

    def _nominal_attach_radii(self):
        """Driven-joint attach radii, averaged over one crank cycle at the
        nominal FDC lengths; used to resolve "auto" attachment settings."""
        mech = self.mech
        status, qk = _core.kin_solve(mech, 0.0, self.fdc_nominal,
                                     np.zeros(12), False, 1.0)
        if status != _core.STATUS_OK:
            raise ConfigError("mechanism", "linkage does not assemble at the "
                                           "reference pose (crank angle 0)")
        lh = float(self.data["links"]["humerus"]["length_m"])
        a4x, a4y = mech[_core.M_A4X], mech[_core.M_A4Y]
        n = 72
        seed = qk
        sum5 = 0.0
        sum16 = 0.0
        for i in range(n):
            th1 = 2.0 * math.pi * i / n
            status, seed = _core.kin_solve(mech, th1, self.fdc_nominal, seed,
                                           True, 1.0)
            if status != _core.STATUS_OK:
                raise ConfigError("mechanism", "linkage jams during a crank "
                                               f"cycle (crank angle {th1:.3f})")
            outs = _core.kin_outputs(mech, seed, np.zeros(12), np.zeros(12))
            sum5 += math.hypot(outs[0] - a4x, outs[1] - a4y)
            # massed radius link pivots at the elbow = humerus tip
            ph = math.atan2(outs[1] - a4y, outs[0] - a4x)
            ex = a4x + lh * math.cos(ph)
            ey = a4y + lh * math.sin(ph)
            sum16 += math.hypot(outs[6] - ex, outs[7] - ey)
        return sum5 / n, sum16 / n

    # -- convenience accessors -------------------------------------------------

    @property
    def toggles(self) -> np.ndarray:
        s = self.data["sim"]
        return np.array([1.0 if s["gravity_on"] else 0.0,
                         1.0 if s["damping_on"] else 0.0,
                         1.0 if s["aero_on"] else 0.0,
                         1.0 if s["coupling_on"] else 0.0])

    @property
    def dt(self) -> float:
        return float(self.data["sim"]["dt_s"])

    @property
    def duration(self) -> float:
        return float(self.data["sim"]["duration_s"])

    @property
    def log_every(self) -> int:
        return int(self.data["sim"]["log_every"])

    def cost_vector(self, enabled: bool = True) -> np.ndarray:
        c = self.data["cost"]
        stride = int(round(c["sample_dt_s"] / self.dt))
        warmup = int(round(c["warmup_s"] / self.dt))
        return np.array([1.0 if enabled else 0.0, c["w_momentum"],
                         c["w_velocity"], c["w_pitch"], float(stride),
                         float(warmup)])
