"""Two-stage greedy recovery of the cascaded channel parameters.

Stage 1 works on the stacked pilot observations.  Each angular grid point
owns one column of the per-pilot measurement matrix F(n_p) = Theta A(n_p);
stacking pilots row-wise makes those columns a block whose energy is
accumulated across subcarriers, which favors the frequency-invariant
actual angle over the drifting squint-induced false angle.  Blocks are
selected greedily with a joint least-squares refit and a relative
residual-change stop rule.

Stage 2 runs, for every recovered angle, a standard greedy pursuit of the
per-pilot coefficient vector against a delay dictionary, yielding grid
delays and complex gains.  The full per-subcarrier channel is then rebuilt
from the recovered (angle, delay, gain) triples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import CascadedPath, ReflectionSchedule, channel_response_matrix
from .config import SystemConfig


class EstimationError(RuntimeError):
    """Raised when a recovery step cannot proceed (rank loss, divergence, bad input)."""


@dataclass(frozen=True)
class AngularDictionary:
    """Squinted steering vectors on the (-1, 1) angular grid for one subcarrier."""

    subcarrier_index: int
    columns: np.ndarray  # (M, Nd)


@dataclass
class BlockMeasurement:
    """Stacked pilot observations and their block-structured measurement.

    F_blocks[k] is F(n_k) = Theta A(n_k), shape (Ns, Nd).  The stacked
    forms F_bar (block diagonal) and F_tilde (columns regrouped so the
    Np1 columns of one grid angle are adjacent) are derived on demand.
    """

    pilot_indices: list
    F_blocks: np.ndarray         # (Np1, Ns, Nd)
    y_bar: np.ndarray | None = None

    @property
    def num_pilots(self) -> int:
        return self.F_blocks.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.F_blocks.shape[1]

    @property
    def grid_size(self) -> int:
        return self.F_blocks.shape[2]

    @cached_property
    def F_bar(self) -> np.ndarray:
        """Block-diagonal stack, shape (Ns*Np1, Np1*Nd)."""
        np1, ns, nd = self.F_blocks.shape
        out = np.zeros((ns * np1, np1 * nd), dtype=complex)
        for k in range(np1):
            out[k * ns:(k + 1) * ns, k * nd:(k + 1) * nd] = self.F_blocks[k]
        return out

    @cached_property
    def F_tilde(self) -> np.ndarray:
        """Column-permuted stack grouping the same grid angle across pilots."""
        np1, ns, nd = self.F_blocks.shape
        rows = ns * np1
        return self.F_bar.reshape(rows, np1, nd).transpose(0, 2, 1).reshape(rows, np1 * nd)


@dataclass(frozen=True)
class AngleSupport:
    """Recovered angular grid columns, in selection order."""

    indices: list                      # 0-based dictionary columns, no duplicates
    angles: list                       # grid angle of each index
    residual_norms: list = field(default_factory=list)  # diagnostic, incl. initial

    def __post_init__(self):
        if len(self.indices) != len(set(self.indices)):
            raise ValueError("support indices must be distinct")
        if len(self.indices) != len(self.angles):
            raise ValueError("indices and angles lengths differ")

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class DelayGainEstimate:
    """Grid delays and complex gains of the paths sharing one recovered angle."""

    angle_index: int
    delay_indices: list
    delays: list
    gains: list

    def __post_init__(self):
        if not (len(self.delay_indices) == len(self.delays) == len(self.gains)):
            raise ValueError("delay/gain lists must have equal length")
        if not self.delay_indices:
            raise ValueError("a delay/gain estimate needs at least one path")


@dataclass(frozen=True)
class ChannelEstimate:
    """Recovered parameter triples and the reconstructed channel.

    h_hat has shape (Np, M): one cascaded channel vector per subcarrier.
    """

    support: AngleSupport
    per_angle: list
    paths: list
    h_hat: np.ndarray

    def coefficient_rows(self, cfg: SystemConfig, subcarriers=None):
        """Per-angle coefficient values across subcarriers.

        Returns (angle_indices, rows) with rows[i, j] the summed
        gain * exp(-j*2*pi*f_j*delay) of angle i at subcarrier j, i.e. the
        nonzero entries of the sparse angular coefficient vectors.
        """
        if subcarriers is None:
            subcarriers = np.arange(cfg.Np)
        freqs = np.asarray(subcarriers) * (cfg.W / cfg.Np)
        indices = [est.angle_index for est in self.per_angle]
        rows = np.zeros((len(indices), len(freqs)), dtype=complex)
        for i, est in enumerate(self.per_angle):
            for tau, gain in zip(est.delays, est.gains):
                rows[i] += gain * np.exp(-2j * np.pi * freqs * tau)
        return indices, rows


def build_angular_dictionary(n_p: int, cfg: SystemConfig) -> AngularDictionary:
    """Steering dictionary A(n_p): column k is a(grid_angle(k) * (1 + f/fc))."""
    if not 0 <= n_p < cfg.Np:
        raise ValueError(f"subcarrier {n_p} outside 0..{cfg.Np - 1}")
    s = cfg.squint(cfg.subcarrier_freq(n_p))
    grid = cfg.grid_angle(np.arange(cfg.Nd))
    cols = np.exp(-2j * np.pi * np.outer(np.arange(cfg.M), s * grid))
    return AngularDictionary(subcarrier_index=n_p, columns=cols)


def _validate_pilots(pilots, cfg: SystemConfig):
    pilots = [int(p) for p in pilots]
    if len(set(pilots)) != len(pilots):
        raise ValueError(f"duplicate pilot indices in {pilots}")
    if sorted(pilots) != pilots:
        raise ValueError("pilot indices must be sorted ascending")
    if pilots and (pilots[0] < 0 or pilots[-1] >= cfg.Np):
        raise ValueError(f"pilot indices must lie in 0..{cfg.Np - 1}")
    if len(pilots) != cfg.Np1:
        raise ValueError(f"expected Np1={cfg.Np1} pilots, got {len(pilots)}")
    return pilots


def build_measurement(theta: ReflectionSchedule, pilots, cfg: SystemConfig,
                      y_bar=None, dictionaries=None) -> BlockMeasurement:
    """Per-pilot measurement matrices F(n_p) = Theta A(n_p), stacked.

    dictionaries optionally supplies prebuilt AngularDictionary objects
    keyed by subcarrier (the Monte Carlo harness reuses them across trials).
    """
    pilots = _validate_pilots(pilots, cfg)
    if theta.coeffs.shape != (cfg.Ns, cfg.M):
        raise ValueError(f"reflection schedule shape {theta.coeffs.shape} "
                         f"does not match (Ns, M)=({cfg.Ns}, {cfg.M})")
    blocks = np.empty((len(pilots), cfg.Ns, cfg.Nd), dtype=complex)
    for k, n_p in enumerate(pilots):
        if dictionaries is not None and n_p in dictionaries:
            cols = dictionaries[n_p].columns
        else:
            cols = build_angular_dictionary(n_p, cfg).columns
        blocks[k] = theta.coeffs @ cols
    if y_bar is not None:
        y_bar = np.asarray(y_bar, dtype=complex)
        if y_bar.shape != (cfg.Ns * len(pilots),):
            raise ValueError(f"y_bar must have length Ns*Np1={cfg.Ns * len(pilots)}")
    return BlockMeasurement(pilot_indices=pilots, F_blocks=blocks, y_bar=y_bar)


def interleave(z_bar: np.ndarray, num_pilots: int, grid_size: int) -> np.ndarray:
    """Regroup a pilot-major stacked vector by grid index:
    out[(k_d)*Np1 + k_p] = z_bar[(k_p)*Nd + k_d]."""
    z_bar = np.asarray(z_bar)
    if z_bar.shape != (num_pilots * grid_size,):
        raise ValueError("z_bar length must be Np1*Nd")
    return z_bar.reshape(num_pilots, grid_size).T.reshape(-1)


def deinterleave(z_tilde: np.ndarray, num_pilots: int, grid_size: int) -> np.ndarray:
    """Inverse of interleave."""
    z_tilde = np.asarray(z_tilde)
    if z_tilde.shape != (num_pilots * grid_size,):
        raise ValueError("z_tilde length must be Np1*Nd")
    return z_tilde.reshape(grid_size, num_pilots).T.reshape(-1)


def _lstsq_qr(A: np.ndarray, y: np.ndarray, rtol: float = 1e-10, label: str = "system"):
    """Least squares via QR with an explicit relative rank check.

    Near-singular working matrices abort instead of being regularized, so
    the estimator keeps plain pseudo-inverse semantics.
    """
    if A.shape[1] > A.shape[0]:
        raise EstimationError(f"{label}: underdetermined ({A.shape[0]} rows, {A.shape[1]} columns)")
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.size and (diag.max() == 0.0 or diag.min() <= rtol * diag.max()):
        raise EstimationError(f"{label}: rank-deficient to relative tolerance {rtol:g}")
    return np.linalg.solve(r, q.conj().T @ y)


def _greedy_block_selection(Y: np.ndarray, F: np.ndarray, zeta: float):
    """Shared stage-1 engine over pilot-major observations.

    Y is (Np1, Ns); F is (Np1, Ns, Nd).  Selects grid blocks by accumulated
    matched-filter energy, refits jointly by least squares (the block rows
    are disjoint, so the joint fit decomposes per pilot), and stops when
    either the residual energy or its latest change falls below zeta
    relative to the observation energy.  A block whose addition triggered
    the change rule is discarded: it contributed nothing measurable.

    Returns (selected indices in order, residual 2-norms incl. initial).
    """
    num_pilots, _, grid_size = F.shape
    energy = float(np.sum(np.abs(Y) ** 2))
    norms = [float(np.sqrt(energy))]
    if energy == 0.0:
        return [], norms
    selected = []
    available = np.ones(grid_size, dtype=bool)
    R = Y.copy()
    while True:
        if not available.any():
            raise EstimationError(
                "angle recovery selected every dictionary block without meeting the stop rule")
        proj = np.einsum("kmn,km->kn", F.conj(), R)
        obj = np.sum(proj.real ** 2 + proj.imag ** 2, axis=0)
        obj[~available] = -1.0
        idx = int(np.argmax(obj))
        selected.append(idx)
        available[idx] = False
        new_R = np.empty_like(Y)
        for k in range(num_pilots):
            A = F[k][:, selected]
            coef = _lstsq_qr(A, Y[k], label="stage-1 joint refit")
            new_R[k] = Y[k] - A @ coef
        res_energy = float(np.sum(np.abs(new_R) ** 2)) / energy
        change = float(np.sum(np.abs(R - new_R) ** 2)) / energy
        R = new_R
        norms.append(float(np.linalg.norm(R)))
        if res_energy <= zeta:
            break
        if change <= zeta:
            if len(selected) > 1:
                selected.pop()
                norms.pop()
            break
    return selected, norms


def stage1_angle_recovery(meas: BlockMeasurement, cfg: SystemConfig) -> AngleSupport:
    """Recover the angular support from the stacked pilot observations."""
    if meas.y_bar is None:
        raise ValueError("measurement carries no observation vector")
    Y = meas.y_bar.reshape(meas.num_pilots, meas.num_symbols)
    selected, norms = _greedy_block_selection(Y, meas.F_blocks, cfg.zeta)
    return AngleSupport(indices=selected,
                        angles=[float(cfg.grid_angle(i)) for i in selected],
                        residual_norms=norms)


def ls_refine(F_np: np.ndarray, support: AngleSupport, y_np: np.ndarray) -> np.ndarray:
    """Least-squares coefficients on the recovered support for one subcarrier.

    Returns the full sparse vector of length Nd with nonzeros at the
    support indices.  Rank deficiency of the restricted columns raises,
    naming the most collinear column pair.
    """
    F_np = np.asarray(F_np)
    y_np = np.asarray(y_np)
    z = np.zeros(F_np.shape[1], dtype=complex)
    if not support.indices:
        return z
    A = F_np[:, support.indices]
    try:
        coef = _lstsq_qr(A, y_np, label="restricted least squares")
    except EstimationError as exc:
        i, j = _most_collinear_pair(A)
        raise EstimationError(
            f"{exc}; offending dictionary columns "
            f"{support.indices[i]} and {support.indices[j]}") from None
    z[support.indices] = coef
    return z


def _most_collinear_pair(A: np.ndarray):
    norms = np.linalg.norm(A, axis=0)
    norms = np.where(norms == 0.0, 1.0, norms)
    gram = np.abs(A.conj().T @ A) / np.outer(norms, norms)
    np.fill_diagonal(gram, -1.0)
    flat = int(np.argmax(gram))
    return divmod(flat, gram.shape[1])


def build_delay_dictionary(pilots, cfg: SystemConfig) -> np.ndarray:
    """Delay dictionary B, shape (Np1, Ntau); column k samples the phase
    ramp of grid delay k*Ttau/Ntau at the pilot subcarrier frequencies."""
    pilots = np.asarray(list(pilots))
    freqs = pilots * (cfg.W / cfg.Np)
    delays = np.arange(cfg.Ntau) * (cfg.Ttau / cfg.Ntau)
    return np.exp(-2j * np.pi * np.outer(freqs, delays))


def stage2_delay_gain(z_i: np.ndarray, B: np.ndarray, cfg: SystemConfig,
                      angle_index: int = -1) -> DelayGainEstimate:
    """Greedy pursuit of delays and gains for one recovered angle.

    z_i collects the refined coefficient of this angle at each pilot
    subcarrier.  Stops with the same relative residual-change rule as
    stage 1, normalized by the energy of z_i.
    """
    z = np.asarray(z_i, dtype=complex)
    energy = float(np.sum(np.abs(z) ** 2))
    if energy == 0.0:
        raise EstimationError("stage-2 input coefficient vector is identically zero")
    num_pilots, _ = B.shape
    if z.shape != (num_pilots,):
        raise ValueError(f"z_i must have length Np1={num_pilots}")
    work = B.copy()
    selected = []
    r = z.copy()
    while True:
        if len(selected) >= num_pilots:
            raise EstimationError(
                f"delay recovery tried to select more than Np1={num_pilots} atoms")
        scores = np.abs(work.conj().T @ r) ** 2
        k = int(np.argmax(scores))
        selected.append(k)
        work[:, k] = 0.0
        A = B[:, selected]
        coef = _lstsq_qr(A, z, label="stage-2 refit")
        new_r = z - A @ coef
        res_energy = float(np.sum(np.abs(new_r) ** 2)) / energy
        change = float(np.sum(np.abs(r - new_r) ** 2)) / energy
        r = new_r
        if res_energy <= cfg.zeta:
            break
        if change <= cfg.zeta:
            if len(selected) > 1:
                selected.pop()
            break
    coef = _lstsq_qr(B[:, selected], z, label="stage-2 final fit")
    return DelayGainEstimate(
        angle_index=angle_index,
        delay_indices=selected,
        delays=[float(cfg.grid_delay(k)) for k in selected],
        gains=[complex(c) for c in coef],
    )


def _paths_from_estimates(angles, per_angle):
    paths = []
    for angle, est in zip(angles, per_angle):
        for tau, gain in zip(est.delays, est.gains):
            paths.append(CascadedPath(eq_angle=angle, eq_gain=gain, eq_delay=tau))
    return paths


# A support column whose refined coefficients carry less than this fraction
# of the total coefficient energy is arithmetic residue (typically a
# false-angle block whose weight collapsed once the actual angle joined the
# fit), not a recovered path.
DUST_ENERGY_FLOOR = 1e-20


def _active_columns(coeffs: np.ndarray):
    energies = np.sum(np.abs(coeffs) ** 2, axis=0)
    total = float(energies.sum())
    if total == 0.0:
        return []
    return [i for i, e in enumerate(energies) if e > DUST_ENERGY_FLOOR * total]


def estimate(y_bar: np.ndarray, theta: ReflectionSchedule, pilots,
             cfg: SystemConfig, dictionaries=None) -> ChannelEstimate:
    """Full pipeline: measurement, angle recovery, per-pilot refinement,
    per-angle delay/gain recovery, reconstruction at every subcarrier."""
    meas = build_measurement(theta, pilots, cfg, y_bar=y_bar, dictionaries=dictionaries)
    support = stage1_angle_recovery(meas, cfg)
    Y = meas.y_bar.reshape(meas.num_pilots, meas.num_symbols)
    per_angle = []
    if support.indices:
        coeffs = np.empty((meas.num_pilots, len(support)), dtype=complex)
        for k in range(meas.num_pilots):
            coeffs[k] = ls_refine(meas.F_blocks[k], support, Y[k])[support.indices]
        B = build_delay_dictionary(meas.pilot_indices, cfg)
        for i in _active_columns(coeffs):
            per_angle.append(stage2_delay_gain(coeffs[:, i], B, cfg,
                                               angle_index=support.indices[i]))
    angles = [cfg.grid_angle(est.angle_index) for est in per_angle]
    paths = _paths_from_estimates(angles, per_angle)
    if paths:
        h_hat = channel_response_matrix(paths, cfg)
    else:
        h_hat = np.zeros((cfg.Np, cfg.M), dtype=complex)
    return ChannelEstimate(support=support, per_angle=per_angle, paths=paths, h_hat=h_hat)
