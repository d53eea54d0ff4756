import numpy as np
import pytest

from rydgan.errors import ValidationError
from rydgan.generator import (ErrorModel, EXACT, GeneratorParams,
                              NoisyMode, ShotsMode, build_spec, draw_seeds,
                              generate_features, modulo_encode, perturb_params)
from rydgan.sim import AtomArrangement


def square_params(**kw):
    defaults = dict(
        arrangement=AtomArrangement(((6.0, 6.0), (12.0, 6.0),
                                     (6.0, 12.0), (12.0, 12.0)),
                                    (0.5, 0.5, 0.5, 0.5)),
        rabi_shape="linear", rabi_param=2.0,
        local_shape="triangle", local_param=-3.0,
        global_detuning_offset=0.5)
    defaults.update(kw)
    return GeneratorParams(**defaults)


class TestModuloEncode:
    def test_wraps_interior_value(self):
        p = np.zeros(16)
        p[3] = 0.1
        p[0] = 0.9
        f = modulo_encode(p)
        assert f[3] == pytest.approx(0.1 % 0.0625, abs=1e-15)
        assert f[3] == pytest.approx(0.0375, abs=1e-12)

    def test_exact_multiple_maps_to_window_top(self):
        p = np.full(16, 0.0625)
        f = modulo_encode(p)
        assert np.all(f == 0.0625)

    def test_all_mass_on_one_outcome(self):
        p = np.zeros(16)
        p[0] = 1.0
        f = modulo_encode(p)
        assert f[0] == 0.0625
        assert np.all(f[1:] == 0.0)

    def test_identity_below_window_top(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = rng.dirichlet(np.ones(16))
            f = modulo_encode(p)
            small = p < 1.0 / 16.0
            assert np.array_equal(f[small], p[small])

    def test_range_over_random_states(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            p = rng.dirichlet(rng.uniform(0.2, 3.0, 16))
            f = modulo_encode(p)
            assert np.all(f <= 1.0 / 16.0 + 1e-15)
            assert np.all(f[p > 0] > 0.0)
            assert np.all(f[p == 0] == 0.0)

    def test_negative_probability_rejected(self):
        p = np.full(16, 1.0 / 16.0)
        p[0], p[1] = -0.01, 0.135
        with pytest.raises(ValidationError):
            modulo_encode(p)

    def test_unnormalized_rejected(self):
        with pytest.raises(ValidationError):
            modulo_encode(np.full(16, 0.1))


class TestGenerateFeatures:
    def test_zero_drive_gives_degenerate_features(self):
        # triangle with zero peak is identically zero regardless of the
        # seed, so this run has no dynamics at all
        params = square_params(rabi_shape="triangle", rabi_param=0.0,
                               local_shape="triangle", local_param=0.0,
                               global_detuning_offset=0.0)
        f = generate_features(params, seed=0.5)
        expected = np.zeros(16)
        expected[0] = 1.0 / 16.0
        assert np.allclose(f, expected, atol=1e-12)

    def test_exact_mode_deterministic(self):
        params = square_params()
        a = generate_features(params, 0.7, EXACT, steps=300)
        b = generate_features(params, 0.7, EXACT, steps=300)
        assert np.array_equal(a, b)

    def test_shots_mode_converges_to_exact(self):
        params = square_params()
        exact = generate_features(params, 0.4, EXACT, steps=300)
        shots = generate_features(params, 0.4,
                                  ShotsMode(shots=1_000_000, rng_seed=8),
                                  steps=300)
        assert np.abs(shots - exact).max() < 2e-3

    def test_shots_mode_deterministic_per_seed(self):
        params = square_params()
        mode = ShotsMode(shots=1000, rng_seed=3)
        a = generate_features(params, 0.4, mode, steps=200)
        b = generate_features(params, 0.4, mode, steps=200)
        assert np.array_equal(a, b)

    def test_noisy_mode_differs_from_exact(self):
        params = square_params()
        noisy = generate_features(
            params, 0.4, NoisyMode(ErrorModel(rng_seed=5)), steps=200)
        exact = generate_features(params, 0.4, EXACT, steps=200)
        assert not np.array_equal(noisy, exact)

    def test_noisy_mode_does_not_mutate_params(self):
        params = square_params()
        before = params.arrangement.positions
        generate_features(params, 0.4, NoisyMode(ErrorModel(rng_seed=2)),
                          steps=100)
        assert params.arrangement.positions == before
        assert params.rabi_gain == 1.0 and params.local_shift == 0.0

    def test_seed_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            generate_features(square_params(), 1.5)
        with pytest.raises(ValidationError):
            generate_features(square_params(), 0.0)

    def test_build_spec_shares_one_seed_scalar(self):
        params = square_params()
        spec = build_spec(params, 0.5)
        assert spec.rabi.seed_noise == pytest.approx(0.5 * 15.8)
        assert spec.local_detuning.seed_noise == pytest.approx(0.5 * -125.0)


class TestPerturbParams:
    def test_zero_sigmas_identity(self):
        params = square_params()
        model = ErrorModel(0.0, 0.0, 0.0, rng_seed=1)
        out = perturb_params(params, model)
        assert out == params

    def test_same_seed_same_perturbation(self):
        params = square_params()
        model = ErrorModel(rng_seed=77)
        assert perturb_params(params, model) == perturb_params(params, model)

    def test_position_sigma_statistics(self):
        params = square_params()
        draws = []
        for i in range(10_000):
            out = perturb_params(params, ErrorModel(rng_seed=i))
            delta = (np.array(out.arrangement.positions)
                     - np.array(params.arrangement.positions))
            draws.append(delta.reshape(-1))
        draws = np.concatenate(draws)
        assert 0.095 <= draws.std() <= 0.105
        assert abs(draws.mean()) < 0.005

    def test_detuning_sigma_statistics(self):
        params = square_params()
        deltas = np.array([
            perturb_params(params, ErrorModel(rng_seed=i)).global_detuning_offset
            - params.global_detuning_offset for i in range(10_000)])
        assert abs(deltas.std() - 0.1) / 0.1 < 0.05
        assert abs(deltas.mean()) < 0.005

    def test_local_shift_statistics(self):
        params = square_params()
        shifts = np.array([
            perturb_params(params, ErrorModel(rng_seed=i)).local_shift
            for i in range(10_000)])
        assert abs(shifts.std() - 0.1) / 0.1 < 0.05

    def test_rabi_gain_statistics(self):
        params = square_params()
        gains = np.array([
            perturb_params(params, ErrorModel(rng_seed=i)).rabi_gain
            for i in range(10_000)])
        assert abs(gains.std() - 0.01) / 0.01 < 0.05
        assert abs(gains.mean() - 1.0) < 0.001

    def test_original_untouched(self):
        params = square_params()
        perturb_params(params, ErrorModel(rng_seed=3))
        assert params == square_params()

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValidationError):
            ErrorModel(detuning_sigma=-0.1)


class TestParamValidation:
    def test_valid_params_pass(self):
        square_params().validate()

    def test_rabi_param_out_of_range(self):
        with pytest.raises(ValidationError):
            square_params(rabi_param=20.0).validate()

    def test_local_param_positive(self):
        with pytest.raises(ValidationError):
            square_params(local_param=1.0).validate()

    def test_constant_shape_rejected(self):
        with pytest.raises(ValidationError):
            square_params(rabi_shape="constant").validate()

    def test_spacing_violation(self):
        params = square_params(arrangement=AtomArrangement(
            ((6.0, 6.0), (7.0, 6.0), (6.0, 12.0), (12.0, 12.0)),
            (0.5, 0.5, 0.5, 0.5)))
        with pytest.raises(ValidationError):
            params.validate()


def test_draw_seeds_in_legal_range():
    seeds = draw_seeds(np.random.default_rng(0), 1000)
    assert seeds.min() >= 0.1 and seeds.max() <= 1.0
