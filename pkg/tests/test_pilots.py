import numpy as np
import pytest

from beamsquint.config import SystemConfig
from beamsquint.pilots import (
    CrossEntropyParams,
    PilotSet,
    coherence_objective,
    cross_entropy_design,
    elite_probability_update,
    initial_probability,
    pilot_objective,
    random_feasible_pilots,
    span_constraint_satisfied,
)
from beamsquint.tsomp import build_delay_dictionary

WIDEBAND_CFG = SystemConfig(M=256, Np=128, W=510e6, fc=20e9, Ns=32, Np1=6,
                         Nd=256, Ntau=64, Ttau=200e-9)


class TestSpanConstraint:
    def test_grid_of_two_is_never_satisfiable(self):
        # each term is at most 1, so the drift can never reach 2/Nd = 1
        cfg = WIDEBAND_CFG.with_(Nd=2)
        for pilots in ([0, 127], [0, 1], [60, 61, 62, 63, 64, 127]):
            assert not span_constraint_satisfied(pilots, cfg)

    def test_reference_designed_set_is_feasible(self):
        assert span_constraint_satisfied([2, 20, 26, 43, 67, 91], WIDEBAND_CFG)

    def test_adjacent_pilots_with_narrow_band_fail(self):
        cfg = WIDEBAND_CFG.with_(W=1e6, Np1=2)
        assert not span_constraint_satisfied([10, 11], cfg)

    def test_matches_direct_formula(self):
        cfg = WIDEBAND_CFG
        rng = np.random.default_rng(51)
        for _ in range(50):
            pilots = np.sort(rng.choice(cfg.Np, cfg.Np1, replace=False))
            f1 = pilots[0] * cfg.W / cfg.Np
            f2 = pilots[-1] * cfg.W / cfg.Np
            expected = (cfg.fc / (cfg.fc + f1) - cfg.fc / (cfg.fc + f2)) >= 2 / cfg.Nd
            assert span_constraint_satisfied(pilots, cfg) == expected


class TestCoherenceObjective:
    def test_orthogonal_columns_score_zero(self):
        np1 = 8
        cfg = WIDEBAND_CFG.with_(Np1=np1, Ntau=np1)
        dft = np.exp(-2j * np.pi * np.outer(np.arange(np1), np.arange(np1)) / np1)
        assert coherence_objective(dft, cfg) == pytest.approx(0.0, abs=1e-18)

    def test_nonnegative(self):
        rng = np.random.default_rng(52)
        cfg = WIDEBAND_CFG.with_(Np1=6, Ntau=16)
        for _ in range(20):
            B = rng.standard_normal((6, 16)) + 1j * rng.standard_normal((6, 16))
            assert coherence_objective(B, cfg) >= 0.0

    def test_matches_entrywise_definition(self):
        rng = np.random.default_rng(53)
        cfg = WIDEBAND_CFG.with_(Np1=4, Ntau=8)
        B = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
        gram = B.conj().T @ B - 4 * np.eye(8)
        assert coherence_objective(B, cfg) == pytest.approx(np.sum(np.abs(gram) ** 2))

    def test_designed_set_beats_unconstrained_set(self):
        mu_designed = pilot_objective([2, 20, 26, 43, 67, 91], WIDEBAND_CFG)
        mu_nocon = pilot_objective([2, 4, 5, 6, 10, 12], WIDEBAND_CFG)
        assert mu_designed < mu_nocon

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            coherence_objective(np.ones((3, 3)), WIDEBAND_CFG)


class TestProbabilityMechanics:
    def test_initial_probability_vector(self):
        p = initial_probability(WIDEBAND_CFG)
        assert p.shape == (WIDEBAND_CFG.Np,)
        assert np.allclose(p, WIDEBAND_CFG.Np1 / WIDEBAND_CFG.Np)

    def test_update_is_exact_elite_mean(self):
        cfg = WIDEBAND_CFG.with_(Np=16, Np1=3, Nd=8)
        elites = [(0, 5, 9), (0, 5, 12), (0, 7, 9), (1, 5, 9)]
        p = elite_probability_update(elites, cfg)
        assert p[0] == pytest.approx(0.75)
        assert p[5] == pytest.approx(0.75)
        assert p[9] == pytest.approx(0.75)
        assert p[1] == pytest.approx(0.25)
        assert np.all((p >= 0.0) & (p <= 1.0))

    def test_unused_subcarriers_get_floor_not_zero(self):
        cfg = WIDEBAND_CFG.with_(Np=16, Np1=3, Nd=8)
        p = elite_probability_update([(0, 5, 9)] * 4, cfg)
        assert p[2] == pytest.approx(1e-3)

    def test_degenerate_support_resets_to_uniform(self):
        cfg = WIDEBAND_CFG.with_(Np=16, Np1=3, Nd=8)
        p = elite_probability_update([(0, 5)] * 4, cfg)  # only 2 live entries
        assert np.allclose(p, 3 / 16)


class TestCrossEntropyDesign:
    def test_output_is_valid_and_feasible(self):
        ce = CrossEntropyParams(Nc=40, Ne=8, Niter=5, seed=0)
        pilots = cross_entropy_design(WIDEBAND_CFG, ce)
        assert len(pilots) == WIDEBAND_CFG.Np1
        assert span_constraint_satisfied(pilots, WIDEBAND_CFG)
        assert list(pilots) == sorted(set(pilots))

    def test_elitism_makes_trace_monotone(self):
        trace = []
        ce = CrossEntropyParams(Nc=40, Ne=8, Niter=8, seed=1)
        cross_entropy_design(WIDEBAND_CFG, ce, trace_out=trace)
        assert len(trace) == 8
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_seed_determinism(self):
        ce = CrossEntropyParams(Nc=30, Ne=6, Niter=4, seed=7)
        a = cross_entropy_design(WIDEBAND_CFG, ce)
        b = cross_entropy_design(WIDEBAND_CFG, ce)
        assert list(a) == list(b)

    def test_beats_median_random_feasible(self):
        ce = CrossEntropyParams(Nc=100, Ne=20, Niter=10, seed=2)
        designed = cross_entropy_design(WIDEBAND_CFG, ce)
        mu = pilot_objective(designed, WIDEBAND_CFG)
        rng = np.random.default_rng(54)
        random_mus = [pilot_objective(random_feasible_pilots(WIDEBAND_CFG, rng), WIDEBAND_CFG)
                      for _ in range(1000)]
        assert mu <= float(np.median(random_mus))

    def test_infeasible_constraint_raises(self):
        cfg = WIDEBAND_CFG.with_(Nd=2)  # unsatisfiable for any pilot set
        ce = CrossEntropyParams(Nc=2, Ne=1, Niter=1, seed=0)
        with pytest.raises(RuntimeError, match="infeasible or too tight"):
            cross_entropy_design(cfg, ce)


class TestValidation:
    def test_pilot_set_must_increase(self):
        with pytest.raises(ValueError):
            PilotSet(indices=(3, 3, 5))
        with pytest.raises(ValueError):
            PilotSet(indices=(5, 3))

    def test_elites_cannot_exceed_candidates(self):
        with pytest.raises(ValueError):
            CrossEntropyParams(Nc=5, Ne=6, Niter=1, seed=0)

    def test_random_feasible_is_feasible(self):
        rng = np.random.default_rng(55)
        for _ in range(20):
            s = random_feasible_pilots(WIDEBAND_CFG, rng)
            assert span_constraint_satisfied(s, WIDEBAND_CFG)
            assert len(s) == WIDEBAND_CFG.Np1


def test_delay_dictionary_objective_against_manual_gram():
    cfg = WIDEBAND_CFG.with_(Np1=4, Ntau=8)
    pilots = [3, 40, 80, 120]
    B = build_delay_dictionary(pilots, cfg)
    manual = 0.0
    for i in range(8):
        for j in range(8):
            entry = np.vdot(B[:, i], B[:, j]) - (4.0 if i == j else 0.0)
            manual += abs(entry) ** 2
    assert coherence_objective(B, cfg) == pytest.approx(manual)
