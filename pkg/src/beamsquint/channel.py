"""Cascaded BS-IRS-user wideband channel with beam squint.

The IRS is a ULA of M elements with half-wavelength spacing.  Each
propagation path of the two-hop reflected channel is reduced to an
equivalent (angle, gain, delay) triple; the frequency response then sums
squinted steering vectors, where the effective spatial angle of a path
scales with (1 + f/fc) across the band.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


@dataclass(frozen=True)
class HopPath:
    """One path of a single hop (BS->IRS or IRS->user).

    norm_angle is d*sin(angle)/lambda_c in cycles per element; with
    half-wavelength spacing it lies in [-1/2, 1/2).  delay is the path
    delay seen at the first IRS element, in seconds.
    """

    gain: complex
    delay: float
    norm_angle: float

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError(f"hop delay must be nonnegative, got {self.delay}")
        if not -0.5 <= self.norm_angle < 0.5:
            raise ValueError(f"hop angle {self.norm_angle} outside [-1/2, 1/2)")


@dataclass(frozen=True)
class CascadedPath:
    """Equivalent path of the cascaded channel: angle difference of the two
    hops, delay sum, and gain product (carrier phases absorbed).

    Composed paths have eq_angle strictly inside (-1, 1); paths recovered
    on the angular dictionary grid may sit on its -1 endpoint.
    """

    eq_angle: float
    eq_gain: complex
    eq_delay: float

    def __post_init__(self):
        if not -1.0 <= self.eq_angle < 1.0:
            raise ValueError(f"equivalent angle {self.eq_angle} outside [-1, 1)")
        if self.eq_delay < 0:
            raise ValueError(f"equivalent delay must be nonnegative, got {self.eq_delay}")


@dataclass(frozen=True)
class ReflectionSchedule:
    """Unit-modulus IRS reflection coefficients, one row per training symbol."""

    coeffs: np.ndarray  # (Ns, M)

    def __post_init__(self):
        if self.coeffs.ndim != 2:
            raise ValueError("reflection schedule must be a 2-D matrix")
        if not np.allclose(np.abs(self.coeffs), 1.0, atol=1e-12):
            raise ValueError("reflection coefficients must have unit modulus")

    @property
    def num_symbols(self) -> int:
        return self.coeffs.shape[0]

    @property
    def num_elements(self) -> int:
        return self.coeffs.shape[1]


def normalized_angle(physical_angle_rad: float) -> float:
    """Convert a physical AOA/AOD in radians to normalized cycles per
    element at half-wavelength spacing: sin(angle)/2."""
    return math.sin(physical_angle_rad) / 2.0


def steering_vector(eff_angle: float, M: int) -> np.ndarray:
    """Spatial steering vector; element m is exp(-j*2*pi*m*eff_angle).

    The caller supplies the squinted effective angle (1 + f/fc)*phi when a
    frequency-dependent response is wanted.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    return np.exp(-2j * np.pi * np.arange(M) * eff_angle)


def compose_cascade(bs_irs, irs_user, fc: float):
    """Combine every BS->IRS path with every IRS->user path.

    For hop paths (l1, l2): eq_angle = phi_TR - phi_RR, eq_delay =
    tau_TR + tau_RR, and eq_gain is the product of the hop gains rotated by
    the carrier phase of each hop delay.
    """
    if not bs_irs or not irs_user:
        raise ValueError("both hop path lists must be nonempty")
    out = []
    for p1 in bs_irs:
        alpha = p1.gain * np.exp(-2j * np.pi * fc * p1.delay)
        for p2 in irs_user:
            beta = p2.gain * np.exp(-2j * np.pi * fc * p2.delay)
            out.append(
                CascadedPath(
                    eq_angle=p1.norm_angle - p2.norm_angle,
                    eq_gain=complex(alpha * beta),
                    eq_delay=p1.delay + p2.delay,
                )
            )
    return out


def channel_response(paths, f: float, cfg: SystemConfig) -> np.ndarray:
    """Cascaded channel vector h(f): sum over paths of
    gain * a((1 + f/fc) * angle) * exp(-j*2*pi*f*delay)."""
    h = np.zeros(cfg.M, dtype=complex)
    s = cfg.squint(f)
    for p in paths:
        h += p.eq_gain * np.exp(-2j * np.pi * f * p.eq_delay) * steering_vector(s * p.eq_angle, cfg.M)
    return h


def channel_response_matrix(paths, cfg: SystemConfig, subcarriers=None) -> np.ndarray:
    """h(f) stacked for several subcarriers, shape (len(subcarriers), M).

    Same arithmetic as per-subcarrier channel_response, vectorized for the
    Monte Carlo harness.  Defaults to all Np subcarriers.
    """
    if subcarriers is None:
        subcarriers = np.arange(cfg.Np)
    subcarriers = np.asarray(subcarriers)
    freqs = subcarriers * (cfg.W / cfg.Np)
    squints = 1.0 + freqs / cfg.fc
    m = np.arange(cfg.M)
    h = np.zeros((len(subcarriers), cfg.M), dtype=complex)
    for p in paths:
        # (F, M) squinted steering per subcarrier, scaled by the delay phase
        phase = np.exp(-2j * np.pi * np.outer(squints * p.eq_angle, m))
        h += (p.eq_gain * np.exp(-2j * np.pi * freqs * p.eq_delay))[:, None] * phase
    return h


def received_symbol(theta: np.ndarray, h: np.ndarray, noise: complex = 0.0) -> complex:
    """Pilot observation theta^T h + noise (plain transpose, unit pilot)."""
    theta = np.asarray(theta)
    h = np.asarray(h)
    if theta.shape != h.shape:
        raise ValueError(f"length mismatch: theta {theta.shape} vs h {h.shape}")
    return complex(theta @ h + noise)


def generate_reflection_schedule(cfg: SystemConfig, seed: int) -> ReflectionSchedule:
    """I.i.d. uniform random phases, unit modulus, deterministic per seed."""
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.Ns, cfg.M))
    return ReflectionSchedule(coeffs=np.exp(1j * phases))


SCENARIO_CSV_HEADER = ["eq_angle", "eq_gain_re", "eq_gain_im", "eq_delay_s"]


def write_paths_csv(paths, path) -> None:
    """Serialize cascaded paths, one row per path."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCENARIO_CSV_HEADER)
        for p in paths:
            writer.writerow(
                [f"{p.eq_angle:.17g}", f"{p.eq_gain.real:.17g}",
                 f"{p.eq_gain.imag:.17g}", f"{p.eq_delay:.17g}"]
            )


def read_paths_csv(path):
    """Load cascaded paths written by write_paths_csv."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCENARIO_CSV_HEADER:
            raise ValueError(f"unexpected scenario header {header!r}")
        for row in reader:
            if not row:
                continue
            angle, re, im, delay = (float(v) for v in row)
            out.append(CascadedPath(eq_angle=angle, eq_gain=complex(re, im), eq_delay=delay))
    return out
