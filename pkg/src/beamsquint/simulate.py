"""Scenario generation, Monte Carlo sweeps and NMSE metrics.

Per-trial randomness is derived from (master seed, stream id, trial
index), so trials are reproducible in isolation and the channel/noise
draws are shared across sweep values (common random numbers), which keeps
swept comparisons free of spurious Monte Carlo inversions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .baseline import baseline_estimate
from .channel import (
    HopPath,
    channel_response_matrix,
    compose_cascade,
    generate_reflection_schedule,
)
from .config import SystemConfig, parse_key_values, system_config_from_mapping
from .correlation import fold_no_squint
from .pilots import CrossEntropyParams, cross_entropy_design, random_feasible_pilots
from .tsomp import EstimationError, build_angular_dictionary, estimate

SWEEP_VARIABLES = ("snr_db", "bandwidth", "ns", "np1")
METHODS = ("tsomp", "baseline")
PILOT_MODES = ("designed", "random", "fixed")

# stream ids for per-trial substreams
_SCENARIO, _SCHEDULE, _NOISE, _PILOTS = 11, 22, 33, 44

# Noisy experiments raise the greedy stop threshold to sit above the
# noise-only residual improvement of one junk block, which is about
# 1/(Ns*(1+snr)) of the observation energy; the configured zeta remains
# the floor, so noiseless runs are unaffected.
NOISE_ZETA_FACTOR = 3.0


def noise_adapted_zeta(cfg: SystemConfig, snr_db) -> float:
    if snr_db is None:
        return cfg.zeta
    snr_lin = 10.0 ** (snr_db / 10.0)
    return max(cfg.zeta, NOISE_ZETA_FACTOR / (cfg.Ns * (1.0 + snr_lin)))


def nmse(est, truth) -> float:
    """Ratio of summed squared error to summed squared truth."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    denom = float(np.sum(np.abs(truth) ** 2))
    if denom == 0.0:
        raise ValueError("truth is identically zero")
    return float(np.sum(np.abs(est - truth) ** 2)) / denom


def _complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def generate_scenario(cfg: SystemConfig, L1: int, L2: int, seed):
    """Random on-grid cascaded scenario.

    Hop angles sit on the [-1/2, 1/2) grid with the dictionary step 2/Nd,
    so equivalent angles land on the (-1, 1) dictionary grid; hop delays
    sit on the delay grid with indices small enough that every cascaded
    delay stays below Ttau.  Hop gains are unit-variance complex Gaussian.
    """
    if L1 < 1 or L2 < 1:
        raise ValueError("L1 and L2 must be positive")
    rng = np.random.default_rng(seed)
    angle_steps = cfg.Nd // 2
    delay_steps = max((cfg.Ntau - 1) // 2, 1)

    def hop_paths(count):
        ks = rng.integers(0, angle_steps, size=count)
        ds = rng.integers(0, delay_steps, size=count)
        gains = _complex_normal(rng, count)
        return [
            HopPath(gain=complex(g), delay=float(d * cfg.Ttau / cfg.Ntau),
                    norm_angle=float(-0.5 + 2.0 * k / cfg.Nd))
            for g, d, k in zip(gains, ds, ks)
        ]

    return compose_cascade(hop_paths(L1), hop_paths(L2), cfg.fc)


def synthesize_observations(paths, theta, pilots, cfg: SystemConfig,
                            snr_db=None, noise_rng=None):
    """Stacked pilot observations y_bar for one trial.

    SNR is per observation: the noise power delta^2 is the empirical mean
    of |theta^T h(f)|^2 over the Ns x Np1 clean observations divided by
    the linear SNR.  snr_db=None means noise_power from cfg (0 = noiseless).
    """
    pilots = list(pilots)
    h_pilots = channel_response_matrix(paths, cfg, subcarriers=pilots)  # (Np1, M)
    clean = theta.coeffs @ h_pilots.T                                   # (Ns, Np1)
    y_bar = clean.T.reshape(-1)                                         # pilot-major
    if snr_db is not None:
        sig_power = float(np.mean(np.abs(clean) ** 2))
        delta2 = sig_power / (10.0 ** (snr_db / 10.0))
    else:
        delta2 = cfg.noise_power
    if delta2 > 0.0:
        if noise_rng is None:
            raise ValueError("noise requested but no noise generator supplied")
        y_bar = y_bar + np.sqrt(delta2) * _complex_normal(noise_rng, y_bar.shape)
    return y_bar


def squint_angle_index(angle: float, cfg: SystemConfig) -> int:
    """Column of the (-1, 1) dictionary grid holding this on-grid angle."""
    return int(round((angle + 1.0) * cfg.Nd / 2.0))


def folded_angle_index(angle: float, cfg: SystemConfig) -> int:
    """Column of the baseline [-1/2, 1/2) grid holding the folded angle."""
    return int(round((fold_no_squint(angle) + 0.5) * cfg.Nd))


def delay_index(delay: float, cfg: SystemConfig) -> int:
    return int(round(delay * cfg.Ntau / cfg.Ttau))


def canonical_support(paths, cfg: SystemConfig, folded: bool = False) -> dict:
    """Merge paths into {(angle_index, delay_index): summed gain}.

    Distinct physical paths landing on the same grid cell are one
    recoverable path; folded=True maps angles onto the baseline grid.
    """
    acc: dict = {}
    for p in paths:
        aidx = folded_angle_index(p.eq_angle, cfg) if folded else squint_angle_index(p.eq_angle, cfg)
        key = (aidx, delay_index(p.eq_delay, cfg))
        acc[key] = acc.get(key, 0.0 + 0.0j) + p.eq_gain
    return {k: v for k, v in acc.items() if v != 0.0}


def _coefficient_rows_from_support(support: dict, cfg: SystemConfig):
    """Angle-major coefficient values across all subcarriers.

    support maps (angle_index, delay_index) -> gain; the row of angle i at
    subcarrier j sums gain * exp(-j*2*pi*f_j*delay)."""
    freqs = np.arange(cfg.Np) * (cfg.W / cfg.Np)
    by_angle: dict = {}
    for (aidx, didx), gain in support.items():
        by_angle.setdefault(aidx, []).append((cfg.grid_delay(didx), gain))
    indices = sorted(by_angle)
    rows = np.zeros((len(indices), cfg.Np), dtype=complex)
    for i, aidx in enumerate(indices):
        for tau, gain in by_angle[aidx]:
            rows[i] += gain * np.exp(-2j * np.pi * freqs * tau)
    return indices, rows


def _embed_union(idx_a, rows_a, idx_b, rows_b, width):
    union = sorted(set(idx_a) | set(idx_b))
    pos = {v: i for i, v in enumerate(union)}
    a = np.zeros((len(union), width), dtype=complex)
    b = np.zeros((len(union), width), dtype=complex)
    for i, v in enumerate(idx_a):
        a[pos[v]] = rows_a[i]
    for i, v in enumerate(idx_b):
        b[pos[v]] = rows_b[i]
    return a, b


def trial_metrics(est, paths, h_true, cfg: SystemConfig, folded: bool = False) -> dict:
    """NMSE of the reconstructed channel, of the angular coefficient
    vectors (all subcarriers) and of the delay/gain tables, each against
    the grid truth in the estimator's own dictionary convention."""
    out = {"nmse_h": nmse(est.h_hat, h_true)}

    support = canonical_support(paths, cfg, folded=folded)
    true_idx, true_rows = _coefficient_rows_from_support(support, cfg)
    est_idx, est_rows = est.coefficient_rows(cfg)
    a, b = _embed_union(est_idx, est_rows, true_idx, true_rows, cfg.Np)
    out["nmse_z"] = nmse(a, b)

    est_cells = {}
    for pa in est.per_angle:
        for didx, gain in zip(pa.delay_indices, pa.gains):
            key = (pa.angle_index, didx)
            est_cells[key] = est_cells.get(key, 0.0 + 0.0j) + gain
    cells = sorted(set(support) | set(est_cells))
    truth_vec = np.array([support.get(c, 0.0) for c in cells], dtype=complex)
    est_vec = np.array([est_cells.get(c, 0.0) for c in cells], dtype=complex)
    out["nmse_c"] = nmse(est_vec, truth_vec)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo sweep: vary a single variable, average over trials."""

    cfg: SystemConfig
    sweep: str
    values: tuple
    trials: int = 200
    methods: tuple = ("tsomp",)
    pilot_mode: str = "fixed"
    pilots: tuple | None = None
    snr_db: float | None = None
    L1: int = 2
    L2: int = 3
    seed: int = 0
    ce: CrossEntropyParams | None = None

    def __post_init__(self):
        if self.sweep not in SWEEP_VARIABLES:
            raise ValueError(f"sweep must be one of {SWEEP_VARIABLES}")
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.pilot_mode not in PILOT_MODES:
            raise ValueError(f"pilot_mode must be one of {PILOT_MODES}")
        if self.pilot_mode == "fixed":
            if not self.pilots:
                raise ValueError("fixed pilot mode needs a pilot list")
            if any(not 0 <= p < self.cfg.Np for p in self.pilots):
                raise ValueError("fixed pilots outside subcarrier range")
            if self.sweep != "np1" and len(self.pilots) != self.cfg.Np1:
                raise ValueError("fixed pilot list length must equal Np1")


@dataclass
class MetricsRow:
    """Trial-mean metrics for one (sweep value, method) cell."""

    sweep_value: object
    method: str
    nmse_h: float
    nmse_z: float
    nmse_c: float
    trials_ok: int
    errors: int


def _cfg_for_value(ec: ExperimentConfig, value):
    if ec.sweep == "snr_db":
        return ec.cfg, float(value)
    if ec.sweep == "bandwidth":
        return ec.cfg.with_(W=float(value)), ec.snr_db
    if ec.sweep == "ns":
        return ec.cfg.with_(Ns=int(value)), ec.snr_db
    return ec.cfg.with_(Np1=int(value)), ec.snr_db


def _resolve_fixed_pilots(ec: ExperimentConfig, cfg_v: SystemConfig, designed_cache: dict):
    """Pilot set shared by all trials at one sweep value (None for random mode)."""
    if ec.pilot_mode == "fixed":
        if len(ec.pilots) != cfg_v.Np1:
            raise ValueError(f"fixed pilot list length {len(ec.pilots)} != Np1={cfg_v.Np1}")
        return list(ec.pilots)
    if ec.pilot_mode == "designed":
        key = (cfg_v.Np, cfg_v.Np1, cfg_v.W, cfg_v.fc, cfg_v.Nd, cfg_v.Ntau, cfg_v.Ttau)
        if key not in designed_cache:
            ce = ec.ce or CrossEntropyParams(seed=ec.seed)
            designed_cache[key] = list(cross_entropy_design(cfg_v, ce))
        return designed_cache[key]
    return None


def run_experiment(ec: ExperimentConfig, csv_path=None):
    """Execute the sweep; returns MetricsRow list and optionally writes CSV.

    Estimator failures in a trial are counted in the errors column and the
    trial is excluded from that method's means.
    """
    rows = []
    designed_cache: dict = {}
    for value in ec.values:
        cfg_v, snr_db = _cfg_for_value(ec, value)
        cfg_v = cfg_v.with_(zeta=noise_adapted_zeta(cfg_v, snr_db))
        shared_pilots = _resolve_fixed_pilots(ec, cfg_v, designed_cache)
        dict_cache: dict = {}
        sums = {m: np.zeros(3) for m in ec.methods}
        oks = {m: 0 for m in ec.methods}
        errs = {m: 0 for m in ec.methods}
        for t in range(ec.trials):
            paths = generate_scenario(cfg_v, ec.L1, ec.L2, seed=[ec.seed, _SCENARIO, t])
            theta = generate_reflection_schedule(cfg_v, seed=[ec.seed, _SCHEDULE, t])
            if shared_pilots is None:
                prng = np.random.default_rng([ec.seed, _PILOTS, t])
                pilots = list(random_feasible_pilots(cfg_v, prng))
            else:
                pilots = shared_pilots
            for n_p in pilots:
                if n_p not in dict_cache:
                    dict_cache[n_p] = build_angular_dictionary(n_p, cfg_v)
            noise_rng = np.random.default_rng([ec.seed, _NOISE, t])
            y_bar = synthesize_observations(paths, theta, pilots, cfg_v,
                                            snr_db=snr_db, noise_rng=noise_rng)
            h_true = channel_response_matrix(paths, cfg_v)
            for method in ec.methods:
                try:
                    if method == "tsomp":
                        est = estimate(y_bar, theta, pilots, cfg_v, dictionaries=dict_cache)
                        metrics = trial_metrics(est, paths, h_true, cfg_v, folded=False)
                    else:
                        est = baseline_estimate(y_bar, theta, pilots, cfg_v)
                        metrics = trial_metrics(est, paths, h_true, cfg_v, folded=True)
                except EstimationError:
                    errs[method] += 1
                    continue
                sums[method] += (metrics["nmse_h"], metrics["nmse_z"], metrics["nmse_c"])
                oks[method] += 1
        for method in ec.methods:
            n = max(oks[method], 1)
            rows.append(MetricsRow(
                sweep_value=value, method=method,
                nmse_h=float(sums[method][0] / n),
                nmse_z=float(sums[method][1] / n),
                nmse_c=float(sums[method][2] / n),
                trials_ok=oks[method], errors=errs[method]))
    if csv_path is not None:
        write_metrics_csv(rows, csv_path)
    return rows


def write_metrics_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "method", "nmse_h", "nmse_z", "nmse_c", "trials", "errors"])
        for r in rows:
            writer.writerow([
                f"{r.sweep_value:.10g}" if isinstance(r.sweep_value, float) else str(r.sweep_value),
                r.method, f"{r.nmse_h:.10e}", f"{r.nmse_z:.10e}", f"{r.nmse_c:.10e}",
                str(r.trials_ok), str(r.errors)])


_EXPERIMENT_KEYS = {
    "trials": int, "pilot_mode": str, "snr_db": float,
    "l1": int, "l2": int, "seed": int,
}


def load_experiment_config(path) -> ExperimentConfig:
    """Build an ExperimentConfig from a line-oriented key = value file."""
    with open(path) as fh:
        mapping = parse_key_values(fh.read())
    cfg = system_config_from_mapping(mapping)
    if "sweep" not in mapping or "values" not in mapping:
        raise ValueError("experiment config needs 'sweep' and 'values'")
    sweep = mapping["sweep"].lower()
    values = tuple(float(v) if sweep in ("snr_db", "bandwidth") else int(float(v))
                   for v in mapping["values"].split(","))
    kwargs = {"cfg": cfg, "sweep": sweep, "values": values}
    for key, conv in _EXPERIMENT_KEYS.items():
        if key in mapping:
            kwargs[{"l1": "L1", "l2": "L2"}.get(key, key)] = conv(mapping[key])
    if "methods" in mapping:
        kwargs["methods"] = tuple(m.strip() for m in mapping["methods"].split(","))
    if "pilots" in mapping:
        kwargs["pilots"] = tuple(int(v) for v in mapping["pilots"].split(","))
    if any(k in mapping for k in ("nc", "ne", "niter")):
        kwargs["ce"] = CrossEntropyParams(
            Nc=int(mapping.get("nc", 100)), Ne=int(mapping.get("ne", 20)),
            Niter=int(mapping.get("niter", 20)), seed=int(mapping.get("seed", 0)))
    return ExperimentConfig(**kwargs)
