import numpy as np
import pytest

from uqbench.model import SolverModel
from uqbench.physics import UncertainInput
from uqbench.reference import (
    MomentField,
    moments_from_runs,
    run_reference,
    single_factor_reference,
)
from uqbench.stochastic import DistributionSpec, SampleSet, generate_samples


@pytest.fixture(scope="module")
def small_model(cfg):
    return SolverModel(cfg, n_cells=50, workers=1)


@pytest.fixture(scope="module")
def samples():
    return generate_samples(DistributionSpec.default(), 80, seed=11)


class TestMomentField:
    def test_validation(self):
        with pytest.raises(ValueError):
            MomentField(np.array([0.5]), np.array([-0.1]), 1, 0.0)
        with pytest.raises(ValueError):
            MomentField(np.array([1.5]), np.array([0.1]), 1, 0.0)

    def test_single_run_convention(self):
        runs = np.array([[0.1, 0.4, 0.0]])
        mf = moments_from_runs(runs, 1.0)
        np.testing.assert_array_equal(mf.mean, runs[0])
        np.testing.assert_array_equal(mf.std, 0.0)


class TestRunReference:
    def test_single_sample(self, cfg, small_model):
        s = SampleSet(np.array([[0.05, 2.1, 0.16]]), "test")
        mf = run_reference(s, small_model)
        np.testing.assert_array_equal(mf.mean, small_model(s.input(0)))
        assert np.all(mf.std == 0.0)

    def test_duplicated_sample_zero_std(self, cfg, small_model):
        s = SampleSet(np.array([[0.05, 2.1, 0.16]] * 2), "test")
        mf = run_reference(s, small_model)
        np.testing.assert_allclose(mf.std, 0.0, atol=1e-15)

    def test_permutation_invariance(self, cfg, small_model, samples):
        mf = run_reference(samples, small_model)
        perm = np.random.default_rng(1).permutation(len(samples))
        mf2 = run_reference(SampleSet(samples.samples[perm], "test"), small_model)
        np.testing.assert_allclose(mf2.mean, mf.mean, atol=1e-14)
        np.testing.assert_allclose(mf2.std, mf.std, atol=1e-13)

    def test_far_field_identically_zero(self, cfg, small_model, samples):
        mf = run_reference(samples, small_model)
        runs = small_model.run_many(samples.samples)
        quiet = np.all(runs == 0.0, axis=0)
        assert quiet[-1]  # domain edge ahead of every front
        assert np.all(mf.mean[quiet] == 0.0) and np.all(mf.std[quiet] == 0.0)

    def test_rms_mean_error_scales_with_sample_count(self, cfg, samples):
        # bootstrap the stored runs: subset means deviate from the full mean
        # like 1/sqrt(n); quadrupling n halves the RMS deviation
        model = SolverModel(cfg, n_cells=50, workers=1)
        big = generate_samples(DistributionSpec.default(), 600, seed=23)
        runs = model.run_many(big.samples)
        full_mean = runs.mean(axis=0)
        rng = np.random.default_rng(5)

        def rms_dev(n, reps=40):
            acc = 0.0
            for _ in range(reps):
                idx = rng.choice(len(big), size=n, replace=False)
                acc += np.mean((runs[idx].mean(axis=0) - full_mean) ** 2)
            return np.sqrt(acc / reps)

        ratio = rms_dev(100) / rms_dev(400)
        assert 1.3 < ratio < 3.1  # ideal sqrt(4)=2 with finite-population slack


class TestSingleFactor:
    def test_frozen_dimensions_at_nominal(self, cfg, small_model, samples):
        mf = single_factor_reference(samples, 1, small_model)
        nominal = UncertainInput.nominal(cfg).as_array()
        frozen = np.tile(nominal, (len(samples), 1))
        frozen[:, 0] = samples.samples[:, 0]
        runs = small_model.run_many(frozen)
        np.testing.assert_allclose(mf.mean, runs.mean(axis=0), atol=1e-14)

    def test_relperm_dimension_contributes_least(self, cfg, small_model, samples):
        joint = run_reference(samples, small_model)
        norms = {d: np.linalg.norm(single_factor_reference(samples, d, small_model).std)
                 for d in (1, 2, 3)}
        assert norms[2] <= 0.6 * min(norms[1], norms[3])
        assert norms[2] <= 0.5 * np.linalg.norm(joint.std)

    def test_rate_and_porosity_dominate(self, cfg, small_model, samples):
        for dim in (1, 3):
            mf = single_factor_reference(samples, dim, small_model)
            assert mf.std.max() > 0.05  # visible uncertainty near the front

    def test_invalid_dim(self, cfg, small_model, samples):
        with pytest.raises(ValueError):
            single_factor_reference(samples, 0, small_model)
