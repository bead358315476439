"""Squint-blind comparator estimator.

Uses a frequency-independent steering dictionary on the folded angle range
[-1/2, 1/2) and otherwise shares the block-accumulated greedy machinery
and the delay/gain stage, including the stop rule, for a fair comparison.
Reconstruction also ignores the (1 + f/fc) scaling, which is what breaks
down once the bandwidth makes beam squint non-negligible.
"""

from __future__ import annotations

import numpy as np

from .channel import ReflectionSchedule
from .config import SystemConfig
from .tsomp import (
    AngleSupport,
    ChannelEstimate,
    _active_columns,
    _greedy_block_selection,
    _paths_from_estimates,
    _validate_pilots,
    build_delay_dictionary,
    ls_refine,
    stage2_delay_gain,
)


class BaselineEstimate(ChannelEstimate):
    """Estimate produced by the squint-blind method; angle indices refer to
    the folded [-1/2, 1/2) grid."""


def baseline_grid_angle(idx, Nd: int):
    """Folded angular grid point: -1/2 + idx/Nd for 0-based idx."""
    return -0.5 + np.asarray(idx) / Nd


def build_baseline_dictionary(cfg: SystemConfig) -> np.ndarray:
    """Frequency-independent steering dictionary, shape (M, Nd); identical
    for every subcarrier."""
    grid = baseline_grid_angle(np.arange(cfg.Nd), cfg.Nd)
    return np.exp(-2j * np.pi * np.outer(np.arange(cfg.M), grid))


def _reconstruct_no_squint(angles, per_angle, cfg: SystemConfig) -> np.ndarray:
    freqs = np.arange(cfg.Np) * (cfg.W / cfg.Np)
    m = np.arange(cfg.M)
    h = np.zeros((cfg.Np, cfg.M), dtype=complex)
    for angle, est in zip(angles, per_angle):
        steer = np.exp(-2j * np.pi * m * angle)
        gain_per_f = np.zeros(cfg.Np, dtype=complex)
        for tau, gain in zip(est.delays, est.gains):
            gain_per_f += gain * np.exp(-2j * np.pi * freqs * tau)
        h += np.outer(gain_per_f, steer)
    return h


def baseline_estimate(y_bar: np.ndarray, theta: ReflectionSchedule, pilots,
                      cfg: SystemConfig) -> BaselineEstimate:
    """Run the squint-blind recovery on the same observations as estimate()."""
    pilots = _validate_pilots(pilots, cfg)
    if theta.coeffs.shape != (cfg.Ns, cfg.M):
        raise ValueError(f"reflection schedule shape {theta.coeffs.shape} "
                         f"does not match (Ns, M)=({cfg.Ns}, {cfg.M})")
    y_bar = np.asarray(y_bar, dtype=complex)
    if y_bar.shape != (cfg.Ns * len(pilots),):
        raise ValueError(f"y_bar must have length Ns*Np1={cfg.Ns * len(pilots)}")

    F_common = theta.coeffs @ build_baseline_dictionary(cfg)   # (Ns, Nd), no f dependence
    F = np.broadcast_to(F_common, (len(pilots),) + F_common.shape)
    Y = y_bar.reshape(len(pilots), cfg.Ns)
    selected, norms = _greedy_block_selection(Y, F, cfg.zeta)
    support = AngleSupport(indices=selected,
                           angles=[float(baseline_grid_angle(i, cfg.Nd)) for i in selected],
                           residual_norms=norms)
    per_angle = []
    if support.indices:
        coeffs = np.empty((len(pilots), len(support)), dtype=complex)
        for k in range(len(pilots)):
            coeffs[k] = ls_refine(F_common, support, Y[k])[support.indices]
        B = build_delay_dictionary(pilots, cfg)
        for i in _active_columns(coeffs):
            per_angle.append(stage2_delay_gain(coeffs[:, i], B, cfg,
                                               angle_index=support.indices[i]))
    angles = [float(baseline_grid_angle(est.angle_index, cfg.Nd)) for est in per_angle]
    paths = _paths_from_estimates(angles, per_angle)
    h_hat = _reconstruct_no_squint(angles, per_angle, cfg)
    return BaselineEstimate(support=support, per_angle=per_angle, paths=paths, h_hat=h_hat)
