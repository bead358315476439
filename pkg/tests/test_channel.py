import numpy as np
import pytest

from beamsquint.channel import (
    CascadedPath,
    HopPath,
    channel_response,
    channel_response_matrix,
    compose_cascade,
    generate_reflection_schedule,
    read_paths_csv,
    received_symbol,
    steering_vector,
    write_paths_csv,
)
from beamsquint.config import SystemConfig


def small_cfg(**kw):
    defaults = dict(M=16, Np=32, W=500e6, fc=10e9, Ns=4, Np1=4, Nd=32, Ntau=8,
                    Ttau=200e-9, zeta=1e-3)
    defaults.update(kw)
    return SystemConfig(**defaults)


def random_paths(rng, count, Ttau=200e-9):
    out = []
    for _ in range(count):
        gain = complex(rng.standard_normal(), rng.standard_normal())
        out.append(CascadedPath(eq_angle=float(rng.uniform(-0.99, 0.99)),
                                eq_gain=gain,
                                eq_delay=float(rng.uniform(0.0, Ttau))))
    return out


class TestSteeringVector:
    def test_zero_angle_is_all_ones(self):
        assert np.allclose(steering_vector(0.0, 4), np.ones(4))

    def test_half_cycle_alternates(self):
        assert np.allclose(steering_vector(0.5, 2), [1.0, -1.0])

    def test_squint_scaling_is_plain_multiplication(self):
        # effective angle (1 + fc/fc) * 0.25 at f = fc equals angle 0.5
        assert np.allclose(steering_vector(2.0 * 0.25, 2), steering_vector(0.5, 2))

    def test_norm_is_sqrt_m(self):
        for m in (1, 7, 64):
            assert np.linalg.norm(steering_vector(0.37, m)) == pytest.approx(np.sqrt(m))

    def test_element_phase(self):
        v = steering_vector(0.13, 8)
        for m in range(8):
            assert v[m] == pytest.approx(np.exp(-2j * np.pi * m * 0.13))


class TestComposeCascade:
    def test_angle_and_delay_arithmetic(self):
        bs = [HopPath(gain=1.0, delay=50e-9, norm_angle=0.3)]
        ue = [HopPath(gain=1.0, delay=30e-9, norm_angle=-0.4)]
        (p,) = compose_cascade(bs, ue, fc=10e9)
        assert p.eq_angle == pytest.approx(0.7)
        assert p.eq_delay == pytest.approx(80e-9)

    def test_full_cycle_carrier_phases_cancel(self):
        fc = 10e9
        bs = [HopPath(gain=1.0, delay=5.0 / fc, norm_angle=0.1)]
        ue = [HopPath(gain=1.0, delay=3.0 / fc, norm_angle=0.0)]
        (p,) = compose_cascade(bs, ue, fc=fc)
        assert p.eq_gain == pytest.approx(1.0, abs=1e-12)

    def test_pair_count_is_product(self):
        rng = np.random.default_rng(0)
        bs = [HopPath(gain=1.0, delay=float(rng.uniform(0, 1e-7)),
                      norm_angle=float(rng.uniform(-0.5, 0.49))) for _ in range(2)]
        ue = [HopPath(gain=1.0, delay=float(rng.uniform(0, 1e-7)),
                      norm_angle=float(rng.uniform(-0.5, 0.49))) for _ in range(3)]
        assert len(compose_cascade(bs, ue, fc=10e9)) == 6

    def test_gain_is_carrier_rotated_product(self):
        fc = 10e9
        bs = [HopPath(gain=2.0 - 1.0j, delay=13e-9, norm_angle=0.2)]
        ue = [HopPath(gain=0.5 + 0.5j, delay=7e-9, norm_angle=-0.1)]
        (p,) = compose_cascade(bs, ue, fc=fc)
        expected = (2.0 - 1.0j) * np.exp(-2j * np.pi * fc * 13e-9) \
            * (0.5 + 0.5j) * np.exp(-2j * np.pi * fc * 7e-9)
        assert p.eq_gain == pytest.approx(expected, rel=1e-12)

    def test_empty_hop_list_rejected(self):
        hop = [HopPath(gain=1.0, delay=0.0, norm_angle=0.0)]
        with pytest.raises(ValueError):
            compose_cascade([], hop, fc=10e9)
        with pytest.raises(ValueError):
            compose_cascade(hop, [], fc=10e9)


class TestChannelResponse:
    def test_single_path_at_dc(self):
        cfg = small_cfg()
        p = CascadedPath(eq_angle=0.25, eq_gain=1.5 - 0.5j, eq_delay=90e-9)
        h = channel_response([p], 0.0, cfg)
        assert np.allclose(h, p.eq_gain * steering_vector(0.25, cfg.M))

    def test_empty_path_list_is_zero(self):
        cfg = small_cfg()
        assert np.array_equal(channel_response([], 1e6, cfg), np.zeros(cfg.M))

    def test_matches_per_element_oracle(self):
        # independent oracle: scalar sum per element, no vectorization
        cfg = small_cfg()
        rng = np.random.default_rng(7)
        paths = random_paths(rng, 6)
        f = cfg.subcarrier_freq(11)
        h = channel_response(paths, f, cfg)
        for m in range(cfg.M):
            expected = 0.0 + 0.0j
            for p in paths:
                expected += (p.eq_gain
                             * np.exp(-2j * np.pi * m * p.eq_angle * (1.0 + f / cfg.fc))
                             * np.exp(-2j * np.pi * f * p.eq_delay))
            assert abs(h[m] - expected) <= 1e-12 * max(abs(expected), 1.0)

    def test_linearity_in_paths(self):
        cfg = small_cfg()
        rng = np.random.default_rng(8)
        a, b = random_paths(rng, 3), random_paths(rng, 2)
        f = cfg.subcarrier_freq(5)
        combined = channel_response(a + b, f, cfg)
        separate = channel_response(a, f, cfg) + channel_response(b, f, cfg)
        assert np.linalg.norm(combined - separate) <= 1e-12 * np.linalg.norm(combined)

    def test_matrix_form_matches_scalar_form(self):
        cfg = small_cfg()
        rng = np.random.default_rng(9)
        paths = random_paths(rng, 5)
        H = channel_response_matrix(paths, cfg)
        for n_p in range(cfg.Np):
            h = channel_response(paths, cfg.subcarrier_freq(n_p), cfg)
            assert np.linalg.norm(H[n_p] - h) <= 1e-12 * np.linalg.norm(h)

    def test_squint_free_at_zero_frequency(self):
        cfg = small_cfg()
        p = CascadedPath(eq_angle=-0.6, eq_gain=1.0, eq_delay=0.0)
        assert np.allclose(channel_response([p], 0.0, cfg),
                           steering_vector(-0.6, cfg.M))


class TestAngularOrthogonality:
    # finite-M proxy for the asymptotic angular orthogonality of squinted
    # steering vectors: grid-separated pairs correlate weakly, and the
    # normalized correlation shrinks ~1/M

    @staticmethod
    def _max_normalized_corr(M, squint):
        grid = -1.0 + 2.0 * np.arange(M) / M
        worst = 0.0
        for k in range(1, M // 2, max(M // 64, 1)):
            # squinted separation k grid steps away from zero
            if squint * (grid[k] - grid[0]) < 2.0 / M:
                continue
            v1 = steering_vector(squint * grid[0], M)
            v2 = steering_vector(squint * grid[k], M)
            worst = max(worst, abs(np.vdot(v1, v2)) / M ** 2)
        return worst

    def test_separated_grid_pairs_nearly_orthogonal(self):
        squint = 1.0 + 510e6 / 20e9
        assert self._max_normalized_corr(256, squint) <= 0.01

    def test_correlation_shrinks_with_array_size(self):
        squint = 1.0 + 510e6 / 20e9
        v_m = self._max_normalized_corr(256, squint)
        v_4m = self._max_normalized_corr(1024, squint)
        assert v_4m <= v_m * 0.25 * 1.2


class TestReceivedSymbol:
    def test_all_ones_theta_sums_h(self):
        rng = np.random.default_rng(1)
        h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert received_symbol(np.ones(8), h) == pytest.approx(h.sum())

    def test_zero_channel_returns_noise(self):
        assert received_symbol(np.ones(4), np.zeros(4), noise=0.3 - 0.2j) \
            == pytest.approx(0.3 - 0.2j)

    def test_matches_naive_summation(self):
        rng = np.random.default_rng(2)
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 16))
        h = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        expected = sum(theta[m] * h[m] for m in range(16))
        assert received_symbol(theta, h) == pytest.approx(expected)

    def test_transpose_not_conjugate(self):
        theta = np.array([1j])
        h = np.array([1j])
        assert received_symbol(theta, h) == pytest.approx(-1.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            received_symbol(np.ones(3), np.ones(4))


class TestReflectionSchedule:
    def test_unit_modulus(self):
        cfg = small_cfg()
        sched = generate_reflection_schedule(cfg, seed=3)
        assert np.allclose(np.abs(sched.coeffs), 1.0)

    def test_shape(self):
        cfg = small_cfg()
        assert generate_reflection_schedule(cfg, seed=3).coeffs.shape == (cfg.Ns, cfg.M)

    def test_seed_determinism(self):
        cfg = small_cfg()
        a = generate_reflection_schedule(cfg, seed=7).coeffs
        b = generate_reflection_schedule(cfg, seed=7).coeffs
        assert np.array_equal(a, b)
        c = generate_reflection_schedule(cfg, seed=8).coeffs
        assert not np.array_equal(a, c)

    def test_rejects_non_unit_modulus(self):
        from beamsquint.channel import ReflectionSchedule
        with pytest.raises(ValueError):
            ReflectionSchedule(coeffs=np.full((2, 3), 0.5 + 0.0j))


def test_scenario_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    paths = random_paths(rng, 6)
    dest = tmp_path / "scenario.csv"
    write_paths_csv(paths, dest)
    loaded = read_paths_csv(dest)
    assert len(loaded) == 6
    for orig, back in zip(paths, loaded):
        assert back.eq_angle == pytest.approx(orig.eq_angle, rel=0, abs=0)
        assert back.eq_gain == pytest.approx(orig.eq_gain, rel=0, abs=0)
        assert back.eq_delay == pytest.approx(orig.eq_delay, rel=0, abs=0)
    assert dest.read_text().splitlines()[0] == "eq_angle,eq_gain_re,eq_gain_im,eq_delay_s"


def test_scenario_csv_rejects_foreign_header(tmp_path):
    dest = tmp_path / "bad.csv"
    dest.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_paths_csv(dest)
