"""Pilot subcarrier placement by cross-entropy search.

Two requirements drive the placement: the pilot band must be wide enough
that a path's false angle drifts by more than one angular grid step
between the first and last pilot (otherwise the false-angle energy
accumulates like the actual one), and the delay dictionary sampled at the
pilots should have near-orthogonal columns for the delay/gain stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .tsomp import build_delay_dictionary

PROBABILITY_FLOOR = 1e-3
REJECTION_CAP_FACTOR = 1000


@dataclass(frozen=True)
class CrossEntropyParams:
    """Search budget: candidates per iteration, elites kept, iterations."""

    Nc: int = 100
    Ne: int = 20
    Niter: int = 20
    seed: int = 0
    elitism: bool = True   # re-inject the best candidate seen so far

    def __post_init__(self):
        if self.Nc < 1 or self.Ne < 1 or self.Niter < 1:
            raise ValueError("Nc, Ne and Niter must be positive")
        if self.Ne > self.Nc:
            raise ValueError(f"Ne={self.Ne} exceeds Nc={self.Nc}")


@dataclass(frozen=True)
class PilotSet:
    """Strictly increasing pilot subcarrier indices."""

    indices: tuple

    def __post_init__(self):
        idx = list(self.indices)
        if sorted(set(idx)) != idx:
            raise ValueError(f"pilot indices must be strictly increasing, got {idx}")

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


def span_constraint_satisfied(pilots, cfg: SystemConfig) -> bool:
    """True iff fc/(fc + f_first) - fc/(fc + f_last) >= 2/Nd.

    The left side is the drift of any path's false angle between the first
    and last pilot subcarrier; 2/Nd is one angular grid step.
    """
    idx = sorted(int(p) for p in pilots)
    f_first = idx[0] * cfg.W / cfg.Np
    f_last = idx[-1] * cfg.W / cfg.Np
    drift = cfg.fc / (cfg.fc + f_first) - cfg.fc / (cfg.fc + f_last)
    return drift >= 2.0 / cfg.Nd


def coherence_objective(B: np.ndarray, cfg: SystemConfig) -> float:
    """Squared deviation of B^H B from Np1 * I (sum over all entries)."""
    B = np.asarray(B)
    if B.shape != (cfg.Np1, cfg.Ntau):
        raise ValueError(f"B must be shaped (Np1, Ntau)=({cfg.Np1}, {cfg.Ntau}), got {B.shape}")
    gram = B.conj().T @ B
    gram[np.diag_indices_from(gram)] -= B.shape[0]
    return float(np.sum(gram.real ** 2 + gram.imag ** 2))


def pilot_objective(pilots, cfg: SystemConfig) -> float:
    """Coherence objective of the delay dictionary sampled at these pilots."""
    return coherence_objective(build_delay_dictionary(sorted(pilots), cfg), cfg)


def random_feasible_pilots(cfg: SystemConfig, rng: np.random.Generator,
                           max_draws: int = 100000) -> PilotSet:
    """Uniformly random span-valid pilot set, by rejection."""
    for _ in range(max_draws):
        idx = np.sort(rng.choice(cfg.Np, size=cfg.Np1, replace=False))
        if span_constraint_satisfied(idx, cfg):
            return PilotSet(indices=tuple(int(i) for i in idx))
    raise RuntimeError("constraint infeasible or too tight")


def _sample_candidate(prob: np.ndarray, cfg: SystemConfig, rng: np.random.Generator):
    p = prob / prob.sum()
    idx = np.sort(rng.choice(cfg.Np, size=cfg.Np1, replace=False, p=p))
    return tuple(int(i) for i in idx)


def initial_probability(cfg: SystemConfig) -> np.ndarray:
    """Starting per-subcarrier occupation probabilities, Np1/Np everywhere."""
    return np.full(cfg.Np, cfg.Np1 / cfg.Np)


def elite_probability_update(elites, cfg: SystemConfig) -> np.ndarray:
    """Mean of the elite indicator vectors, floored so no subcarrier is
    permanently zeroed; collapses back to uniform if fewer than Np1
    subcarriers stay above the floor."""
    indicators = np.zeros(cfg.Np)
    for e in elites:
        indicators[list(e)] += 1.0
    prob = indicators / len(elites)
    prob = np.maximum(prob, PROBABILITY_FLOOR)
    if np.count_nonzero(prob > PROBABILITY_FLOOR) < cfg.Np1:
        return initial_probability(cfg)
    return prob


def cross_entropy_design(cfg: SystemConfig, ce: CrossEntropyParams,
                         trace_out: list | None = None) -> PilotSet:
    """Minimize the delay-dictionary coherence over span-valid pilot sets.

    Each iteration samples Nc span-valid candidates (Np1 distinct indices
    drawn without replacement, selection probability proportional to the
    current per-subcarrier probabilities), keeps the Ne best as elites and
    replaces the probabilities by the elite indicator mean.  With elitism
    on, the best set seen so far joins every candidate pool, which makes
    the best objective monotone non-increasing across iterations;
    trace_out, if given, collects that per-iteration best objective.
    """
    rng = np.random.default_rng(ce.seed)
    prob = initial_probability(cfg)
    best: tuple | None = None
    best_mu = np.inf
    cap = REJECTION_CAP_FACTOR * ce.Nc
    for _ in range(ce.Niter):
        candidates = []
        if ce.elitism and best is not None:
            candidates.append(best)
        draws = 0
        while len(candidates) < ce.Nc:
            cand = _sample_candidate(prob, cfg, rng)
            draws += 1
            if span_constraint_satisfied(cand, cfg):
                candidates.append(cand)
            elif draws >= cap:
                raise RuntimeError("constraint infeasible or too tight")
        scores = np.array([pilot_objective(c, cfg) for c in candidates])
        order = np.argsort(scores, kind="stable")
        elites = [candidates[i] for i in order[:ce.Ne]]
        if scores[order[0]] < best_mu:
            best_mu = float(scores[order[0]])
            best = candidates[order[0]]
        if trace_out is not None:
            trace_out.append(best_mu if ce.elitism else float(scores[order[0]]))
        prob = elite_probability_update(elites, cfg)
    chosen = best if ce.elitism else elites[0]
    return PilotSet(indices=chosen)
