import math

import numpy as np
import pytest
from scipy.special import ndtri

from uqbench.apc import (
    FT_MAX_ORDER,
    MomentMatrixError,
    MultiIndexSet,
    PCM_MAX_ORDER,
    analytic_moments,
    build_bases,
    build_basis,
    fit_ft_surrogate,
    fit_least_squares_ft,
    fit_pcm,
    fit_pcm_surrogate,
    pce_moments,
    pcm_points,
    tensor_grid,
)
from uqbench.model import SolverModel
from uqbench.physics import ConfigError
from uqbench.stochastic import DistributionSpec, SampleSet, generate_samples, raw_moments


from conftest import FakeModel


def moments_of_values(x, k_max):
    n = x.size
    return np.array([math.fsum(x**k) / n for k in range(k_max + 1)])


@pytest.fixture(scope="module")
def theta():
    return generate_samples(DistributionSpec.default(), 10_000, seed=7)


class TestBuildBasis:
    def test_degree_zero_is_constant_one(self, theta):
        basis = build_basis(raw_moments(theta, 1, 2))
        np.testing.assert_allclose(basis.eval(0, np.array([0.0, 0.2])), 1.0, rtol=1e-12)

    def test_legendre_recovery_on_uniform_grid(self):
        n = 20_000
        x = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
        basis = build_basis(moments_of_values(x, 10))
        mono = basis.monomial_coefficients()
        for k in range(6):
            ref = np.sqrt(2 * k + 1) * np.polynomial.legendre.leg2poly([0.0] * k + [1.0])
            np.testing.assert_allclose(mono[k, :k + 1], ref, atol=1e-3)

    def test_hermite_recovery_exact_moments(self):
        # standard normal raw moments 1, 0, 1, 0, 3
        basis = build_basis(np.array([1.0, 0.0, 1.0, 0.0, 3.0]))
        np.testing.assert_allclose(basis.monomial_coefficients()[2],
                                   [-1 / np.sqrt(2), 0.0, 1 / np.sqrt(2)], atol=1e-12)

    def test_hermite_recovery_stratified_draws(self):
        # deterministic quantile-stratified stand-in for 1e5 normal draws;
        # iid draws would bury the construction under sampling noise
        n = 100_000
        x = ndtri((np.arange(n) + 0.5) / n)
        basis = build_basis(moments_of_values(x, 4))
        np.testing.assert_allclose(basis.monomial_coefficients()[2],
                                   [-1 / np.sqrt(2), 0.0, 1 / np.sqrt(2)], atol=1e-3)

    def test_gram_identity_on_sample_set(self, theta):
        for dim in (1, 2, 3):
            basis = build_basis(raw_moments(theta, dim, 10))
            values = basis.eval_all(theta.samples[:, dim - 1])
            gram = values.T @ values / len(theta)
            assert np.abs(gram - np.eye(6)).max() <= 1e-6

    def test_leading_coefficients_positive(self, theta):
        basis = build_basis(raw_moments(theta, 2, 10))
        assert np.all(np.diag(basis.coeffs) > 0)

    def test_degenerate_measure_rejected(self):
        with pytest.raises(MomentMatrixError):
            build_basis(np.array([1.0, 0.5, 0.25]))  # zero variance

    def test_indefinite_hankel_advises_lower_order(self):
        # two-point measure supports order 1 only; order-2 moments collapse
        m = moments_of_values(np.array([-1.0, 1.0]), 4)
        with pytest.raises(MomentMatrixError, match="lower"):
            build_basis(m)

    def test_roots_match_companion_matrix(self, theta):
        basis = build_basis(raw_moments(theta, 3, 10))
        for k in (2, 4):
            poly = np.polynomial.Polynomial(basis.monomial_coefficients()[k][:k + 1])
            np.testing.assert_allclose(np.sort(basis.roots(k)), np.sort(poly.roots()),
                                       rtol=1e-7)


class TestMultiIndexSet:
    def test_cardinality_formula(self):
        for order in range(6):
            assert len(MultiIndexSet(order)) == math.comb(order + 3, 3)
            assert len(MultiIndexSet(order, include_constant=False)) == \
                math.comb(order + 3, 3) - 1

    def test_graded_order_starts_with_constant(self):
        idx = MultiIndexSet(2).indices
        assert idx[0] == (0, 0, 0)
        totals = [sum(t) for t in idx]
        assert totals == sorted(totals)


class TestPcmPoints:
    def test_node_counts(self, theta):
        for order, count in [(1, 4), (2, 10), (3, 20)]:
            bases = build_bases(theta, order)
            assert pcm_points(bases, order, theta).shape == (count, 3)

    def test_uniform_roots_are_rescaled_legendre_roots(self):
        n = 20_000
        rows = np.column_stack([
            np.zeros(n), np.full(n, 2.0), (np.arange(n) + 0.5) / n])
        s = SampleSet(rows, "uniform-grid")
        basis = build_basis(raw_moments(s, 3, 4))
        roots = basis.roots(2)
        expected = 0.5 + 0.5 * np.array([-1, 1]) / np.sqrt(3)
        np.testing.assert_allclose(np.sort(roots), expected, atol=1e-4)

    def test_nodes_inside_sample_box(self, theta):
        bases = build_bases(theta, 2)
        nodes = pcm_points(bases, 2, theta)
        lo, hi = theta.samples.min(axis=0), theta.samples.max(axis=0)
        assert np.all(nodes >= lo - 1e-9) and np.all(nodes <= hi + 1e-9)


class TestFits:
    def test_constant_model_recovered(self, theta):
        model = FakeModel(lambda om: np.array([0.37, 0.11]))
        surrogate = fit_pcm_surrogate(theta, 1, model)
        np.testing.assert_allclose(surrogate.coeffs[0], [0.37, 0.11], atol=1e-10)
        np.testing.assert_allclose(surrogate.coeffs[1:], 0.0, atol=1e-10)

    def test_linear_model_reproduced_at_order_one(self, theta):
        model = FakeModel(lambda om: np.array([0.2 + 0.05 * om[0]]))
        surrogate = fit_pcm_surrogate(theta, 1, model)
        probe = theta.samples[:50]
        np.testing.assert_allclose(surrogate(probe)[:, 0],
                                   0.2 + 0.05 * probe[:, 0], atol=1e-8)

    def test_pcm_interpolates_solver_runs(self, cfg, theta):
        model = SolverModel(cfg, n_cells=40, workers=1)
        surrogate = fit_pcm_surrogate(theta, 2, model)
        assert surrogate.n_runs == 10
        bases = surrogate.bases
        nodes = pcm_points(bases, 2, theta)
        outputs = model.run_many(nodes)
        np.testing.assert_allclose(surrogate(nodes), outputs, atol=1e-8)

    @pytest.mark.parametrize("order", [2, 3])
    def test_polynomial_reproduction_both_variants(self, theta, order):
        rng = np.random.default_rng(order)
        terms = [(idx, rng.normal())
                 for idx in MultiIndexSet(order).indices]

        def poly(om):
            return np.array([sum(c * om[0]**i * om[1]**j * om[2]**k
                                 for (i, j, k), c in terms)])

        probe = theta.samples[:100]
        expected = np.array([poly(om)[0] for om in probe])
        for fitter in (fit_pcm_surrogate, fit_ft_surrogate):
            surrogate = fitter(theta, order, FakeModel(poly))
            np.testing.assert_allclose(surrogate(probe)[:, 0], expected,
                                       atol=1e-8 * max(1, np.abs(expected).max()))

    def test_ft_run_counts(self, theta):
        model = FakeModel(lambda om: np.array([om[0] ** 2]))
        assert fit_ft_surrogate(theta, 4, model).n_runs == 125
        model = FakeModel(lambda om: np.array([om[0] ** 2]))
        assert fit_ft_surrogate(theta, 10, model).n_runs == 1331

    def test_ft_zero_residual_on_exact_polynomial(self, theta):
        model = FakeModel(lambda om: np.array([0.1 + om[0] * om[2] + om[1] ** 2]))
        surrogate = fit_ft_surrogate(theta, 2, model)
        assert surrogate.residual <= 1e-8

    def test_order_caps(self, theta):
        with pytest.raises(ConfigError):
            fit_pcm_surrogate(theta, PCM_MAX_ORDER + 1, FakeModel(lambda om: [0.0]))
        with pytest.raises(ConfigError):
            fit_ft_surrogate(theta, FT_MAX_ORDER + 1, FakeModel(lambda om: [0.0]))

    def test_scale_equivariance(self, theta):
        a, b = 2.5, -1.0
        scaled_rows = theta.samples.copy()
        scaled_rows[:, 1] = a * scaled_rows[:, 1] + b
        scaled = SampleSet(scaled_rows, "scaled")

        model = FakeModel(lambda om: np.array([np.sin(om[0]) + 0.1 * om[1] + om[2] ** 2]))
        model_scaled = FakeModel(
            lambda om: np.array([np.sin(om[0]) + 0.1 * (om[1] - b) / a + om[2] ** 2]))

        s1 = fit_ft_surrogate(theta, 2, model)
        s2 = fit_ft_surrogate(scaled, 2, model_scaled)
        probe = theta.samples[:60]
        probe_scaled = probe.copy()
        probe_scaled[:, 1] = a * probe_scaled[:, 1] + b
        np.testing.assert_allclose(s2(probe_scaled), s1(probe), atol=1e-8)


class TestMoments:
    def test_constant_surrogate_zero_std(self, theta):
        surrogate = fit_pcm_surrogate(theta, 1, FakeModel(lambda om: np.array([0.25])))
        mf = pce_moments(surrogate, theta)
        np.testing.assert_allclose(mf.std, 0.0, atol=1e-12)
        np.testing.assert_allclose(mf.mean, 0.25, atol=1e-10)

    def test_order_zero_std_identically_zero(self, cfg, theta):
        model = SolverModel(cfg, n_cells=40, workers=1)
        surrogate = fit_pcm_surrogate(theta, 0, model)
        assert surrogate.n_runs == 1
        assert np.all(analytic_moments(surrogate).std == 0.0)
        # evaluation route: identical rows up to summation roundoff
        assert pce_moments(surrogate, theta).std.max() <= 1e-12

    def test_analytic_and_evaluation_routes_agree_without_clipping(self, theta):
        # a surrogate staying inside [0,1] makes the two routes coincide up
        # to the empirical orthonormality defect and the (n-1) factor
        model = FakeModel(lambda om: np.array([0.4 + 0.02 * om[0] + 0.01 * om[2]]))
        surrogate = fit_pcm_surrogate(theta, 2, model)
        mf_eval = pce_moments(surrogate, theta)
        mf_ana = analytic_moments(surrogate)
        np.testing.assert_allclose(mf_ana.mean, mf_eval.mean, atol=1e-6)
        np.testing.assert_allclose(mf_ana.std, mf_eval.std, atol=1e-4)

    def test_save_roundtrip_keys(self, theta, tmp_path):
        surrogate = fit_pcm_surrogate(theta, 1, FakeModel(lambda om: np.array([0.2])))
        surrogate.save(tmp_path / "apc.npz")
        data = np.load(tmp_path / "apc.npz")
        assert data["variant"] == "pcm"
        np.testing.assert_array_equal(data["coeffs"], surrogate.coeffs)
