"""Feedback laws: crank-rate regulation, FDC length tracking, and the pitch
loop that morphs the FDC reference lengths.

All three laws are memoryless. The crank controller is a rate law
u_g = K_d1 (w_ref - th1dot); the FDC controller is an elementwise PD
u_p = K_p2 (l_ref - l) - K_d2 ldot; the pitch loop shifts the reference
lengths affinely in the pitch error and saturates them to the configured
bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .config import Config


@dataclass
class ControllerConfig:
    """Gains, references, and saturation bounds of the three loops."""

    crank_rate_gain: float            # K_d1, 1/s
    crank_rate_target: float          # w_ref, rad/s
    fdc_kp: float                     # K_p2, 1/s^2
    fdc_kd: float                     # K_d2, 1/s
    zero_path_lengths: np.ndarray     # l_ref_zp, m
    pitch_gain: np.ndarray            # K_c, m/rad (unit scale applied)
    pitch_target: float               # rad
    l_min: np.ndarray
    l_max: np.ndarray
    flap_on: bool = True
    fdc_on: bool = True
    pitch_on: bool = True

    def __post_init__(self):
        self.zero_path_lengths = np.asarray(self.zero_path_lengths, dtype=float)
        self.pitch_gain = np.asarray(self.pitch_gain, dtype=float)
        self.l_min = np.asarray(self.l_min, dtype=float)
        self.l_max = np.asarray(self.l_max, dtype=float)
        for name in ("zero_path_lengths", "pitch_gain", "l_min", "l_max"):
            if getattr(self, name).shape != (4,):
                raise ValueError(f"{name} must be a 4-vector")
        if self.crank_rate_target <= 0:
            raise ValueError("crank rate target must be > 0")
        if np.any(self.l_min >= self.zero_path_lengths) or \
                np.any(self.zero_path_lengths >= self.l_max):
            raise ValueError("need l_min < zero-path < l_max elementwise")

    @classmethod
    def from_config(cls, cfg: Config) -> "ControllerConfig":
        c = cfg.ctrl
        return cls(crank_rate_gain=float(c[_core.C_KD1]),
                   crank_rate_target=float(c[_core.C_WREF]),
                   fdc_kp=float(c[_core.C_KP2]),
                   fdc_kd=float(c[_core.C_KD2]),
                   zero_path_lengths=c[_core.C_LZP:_core.C_LZP + 4].copy(),
                   pitch_gain=c[_core.C_KC:_core.C_KC + 4].copy(),
                   pitch_target=float(c[_core.C_THREF]),
                   l_min=c[_core.C_LMIN:_core.C_LMIN + 4].copy(),
                   l_max=c[_core.C_LMAX:_core.C_LMAX + 4].copy(),
                   flap_on=c[_core.C_FLAP_ON] > 0.5,
                   fdc_on=c[_core.C_FDC_ON] > 0.5,
                   pitch_on=c[_core.C_PITCH_ON] > 0.5)

    def packed(self) -> np.ndarray:
        v = np.zeros(_core.N_CTRL)
        v[_core.C_KD1] = self.crank_rate_gain
        v[_core.C_WREF] = self.crank_rate_target
        v[_core.C_KP2] = self.fdc_kp
        v[_core.C_KD2] = self.fdc_kd
        v[_core.C_LZP:_core.C_LZP + 4] = self.zero_path_lengths
        v[_core.C_KC:_core.C_KC + 4] = self.pitch_gain
        v[_core.C_THREF] = self.pitch_target
        v[_core.C_LMIN:_core.C_LMIN + 4] = self.l_min
        v[_core.C_LMAX:_core.C_LMAX + 4] = self.l_max
        v[_core.C_FLAP_ON] = 1.0 if self.flap_on else 0.0
        v[_core.C_FDC_ON] = 1.0 if self.fdc_on else 0.0
        v[_core.C_PITCH_ON] = 1.0 if self.pitch_on else 0.0
        return v


@dataclass
class ControlOutput:
    u_g: float
    u_fdc: np.ndarray
    l_ref: np.ndarray


def flap_speed_control(crank_rate: float, cfg: ControllerConfig) -> float:
    """Crank acceleration command tracking the target flap rate."""
    if not np.isfinite(crank_rate):
        raise ValueError("crank rate must be finite")
    return cfg.crank_rate_gain * (cfg.crank_rate_target - crank_rate)


def fdc_length_control(lengths, rates, l_ref, cfg: ControllerConfig) -> np.ndarray:
    """Elementwise PD on the FDC lengths toward the reference."""
    l = np.asarray(lengths, dtype=float)
    ld = np.asarray(rates, dtype=float)
    lr = np.asarray(l_ref, dtype=float)
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(ld))
            and np.all(np.isfinite(lr))):
        raise ValueError("controller inputs must be finite")
    return cfg.fdc_kp * (lr - l) - cfg.fdc_kd * ld


def pitch_controller(pitch: float, cfg: ControllerConfig) -> np.ndarray:
    """Saturated affine FDC reference shift driven by the pitch error."""
    raw = cfg.zero_path_lengths + cfg.pitch_gain * (cfg.pitch_target - pitch)
    return np.clip(raw, cfg.l_min, cfg.l_max)


def evaluate(qk: np.ndarray, qkd: np.ndarray, R: np.ndarray,
             cfg: ControllerConfig) -> ControlOutput:
    """Full controller stack as evaluated inside the simulation loop."""
    u5, lref = _core.controller_eval(cfg.packed(), qk, qkd,
                                     np.ascontiguousarray(R, dtype=float).reshape(-1))
    return ControlOutput(u_g=float(u5[0]), u_fdc=u5[1:].copy(), l_ref=lref.copy())
