"""Mutual correlation between steering vectors and the cascaded channel.

Scanning a^H((1 + f/fc) x) h(f) over x in (-1, 1) shows two comparable
peaks for each propagation path: a frequency-invariant one at the
equivalent angle and a second one displaced by fc/(f + fc) that drifts
with the subcarrier.  The drift of that second peak across pilots is what
the block-accumulated angle recovery exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import steering_vector
from .config import SystemConfig


@dataclass(frozen=True)
class CorrelationTrace:
    """Magnitude of the angular correlation over a scan grid at one subcarrier."""

    subcarrier_index: int
    grid: np.ndarray
    magnitude: np.ndarray

    def __post_init__(self):
        if len(self.grid) != len(self.magnitude):
            raise ValueError("grid and magnitude lengths differ")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(self.magnitude < 0):
            raise ValueError("magnitude must be nonnegative")


def correlation(x: float, h: np.ndarray, f: float, cfg: SystemConfig) -> complex:
    """a^H((1 + f/fc) x) h for a single search angle x."""
    h = np.asarray(h)
    if h.shape != (cfg.M,):
        raise ValueError(f"h must have length M={cfg.M}, got {h.shape}")
    return complex(np.conj(steering_vector(cfg.squint(f) * x, cfg.M)) @ h)


def false_angle(phi: float, f: float, fc: float) -> float:
    """Location of the squint-induced secondary correlation peak.

    The shift is +fc/(f + fc) for phi <= 0 and -fc/(f + fc) for phi > 0,
    which keeps the result inside the scanned range for interior angles.
    """
    if not -1.0 < phi < 1.0:
        raise ValueError(f"angle {phi} outside (-1, 1)")
    shift = fc / (f + fc)
    return phi + shift if phi <= 0 else phi - shift


def fold_no_squint(phi: float) -> float:
    """Fold an equivalent angle from (-1, 1) onto [-1/2, 1/2).

    This is the squint-blind identification a(phi) = a(phi -+ 1) used by the
    baseline estimator; it is exact only when the steering vectors are
    frequency-independent.
    """
    if not -1.0 < phi < 1.0:
        raise ValueError(f"angle {phi} outside (-1, 1)")
    if -0.5 <= phi < 0.5:
        return phi
    return phi - 1.0 if phi >= 0.5 else phi + 1.0


def scan_grid(grid_size: int) -> np.ndarray:
    """Uniform scan grid x = -1 + 2k/grid_size, k = 0..grid_size-1."""
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    return -1.0 + 2.0 * np.arange(grid_size) / grid_size


def _trace_magnitude(h: np.ndarray, squint: float, grid: np.ndarray) -> np.ndarray:
    # Gamma(x_g) = sum_m h_m e^{+j 2 pi m s x_g}: accumulate powers of the
    # per-grid-point phasor instead of materializing the M x G steering matrix.
    ratio = np.exp(2j * np.pi * squint * grid)
    acc = np.zeros(len(grid), dtype=complex)
    power = np.ones(len(grid), dtype=complex)
    for hm in h:
        acc += hm * power
        power *= ratio
    return np.abs(acc)


def scan(h_per_subcarrier: dict, grid_size: int, cfg: SystemConfig):
    """Correlation traces over the scan grid, one per requested subcarrier.

    h_per_subcarrier maps subcarrier index -> channel vector h(f).
    """
    grid = scan_grid(grid_size)
    traces = []
    for n_p in sorted(h_per_subcarrier):
        h = np.asarray(h_per_subcarrier[n_p])
        if h.shape != (cfg.M,):
            raise ValueError(f"h for subcarrier {n_p} must have length M={cfg.M}")
        s = cfg.squint(cfg.subcarrier_freq(n_p))
        traces.append(
            CorrelationTrace(subcarrier_index=int(n_p), grid=grid,
                             magnitude=_trace_magnitude(h, s, grid))
        )
    return traces


def find_peaks(magnitude: np.ndarray, rel_height: float = 0.0):
    """Indices strictly greater than both neighbors, optionally filtered to
    those above rel_height times the global maximum.  Endpoints are never
    peaks; ties break toward the lower index by construction."""
    mag = np.asarray(magnitude)
    inner = (mag[1:-1] > mag[:-2]) & (mag[1:-1] > mag[2:])
    idx = np.nonzero(inner)[0] + 1
    if rel_height > 0.0 and len(mag):
        idx = idx[mag[idx] > rel_height * mag.max()]
    return list(idx)
