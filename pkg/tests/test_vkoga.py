import numpy as np
import pytest

from conftest import FakeModel
from uqbench.stochastic import DistributionSpec, SampleSet, generate_samples
from uqbench.vkoga import (
    CandidateSet,
    DegenerateHullError,
    GreedyModel,
    GreedySelector,
    KernelSpec,
    PowerSaturationError,
    build_candidates,
    greedy_models,
    kernel_eval,
    kernel_moments,
    schedule_run,
)


def brute_force_power2(unit, selected, spec):
    """P^2 via the full kernel-matrix inverse (independent of the Newton
    update path)."""
    if not selected:
        return np.ones(len(unit))
    K = kernel_eval(unit[selected], unit[selected], spec)
    k_x = kernel_eval(unit, unit[selected], spec)
    return 1.0 - np.einsum("ij,ij->i", k_x @ np.linalg.inv(K), k_x)


def random_candidates(n, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, (n, 3))
    pts = pts[np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))]
    return CandidateSet(points=pts, box_lo=np.zeros(3), box_hi=np.ones(3),
                        resolution=0, hull_facets=0)


@pytest.fixture(scope="module")
def theta():
    return generate_samples(DistributionSpec.default(), 1000, seed=7)


class TestKernel:
    def test_value_at_center(self):
        spec = KernelSpec(delta=0.3)
        x = np.array([0.1, 0.5, 0.9])
        assert kernel_eval(x, x, spec) == 1.0

    def test_compact_support(self):
        spec = KernelSpec(delta=2.0)  # support radius 1/2
        assert kernel_eval(np.zeros(3), np.array([0.6, 0.0, 0.0]), spec) == 0.0

    def test_midpoint_value(self):
        # s = 0.5 -> (1/2)^4 * 3 = 0.1875
        spec = KernelSpec(delta=1.0)
        assert kernel_eval(np.zeros(3), np.array([0.5, 0.0, 0.0]),
                           spec) == pytest.approx(0.1875, rel=1e-14)

    def test_radius_convention(self):
        spec = KernelSpec(delta=0.5, convention="radius")  # support radius 0.5
        assert kernel_eval(np.zeros(3), np.array([0.25, 0.0, 0.0]),
                           spec) == pytest.approx(0.1875, rel=1e-14)

    def test_symmetry_matrix(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, (15, 3))
        K = kernel_eval(X, X, KernelSpec(delta=0.4))
        np.testing.assert_allclose(K, K.T)
        np.testing.assert_allclose(np.diag(K), 1.0)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            KernelSpec(delta=0.0)
        with pytest.raises(ValueError):
            KernelSpec(delta=0.1, convention="weird")


class TestCandidates:
    def test_box_samples_keep_full_grid(self):
        # hull of the box corners is the box itself
        corners = np.array([[o1, o2, o3]
                            for o1 in (-0.3, 0.3)
                            for o2 in (2.0, 4.0)
                            for o3 in (0.1, 0.3)])
        s = SampleSet(corners, "corners")
        cand = build_candidates(s, resolution=3)
        assert len(cand) == 27

    def test_simplex_against_delaunay_oracle(self):
        import scipy.spatial
        simplex = np.array([[0.0, 2.0, 0.10], [0.4, 2.0, 0.10],
                            [0.0, 4.0, 0.10], [0.0, 2.0, 0.30]])
        s = SampleSet(simplex, "simplex")
        cand = build_candidates(s, resolution=7)
        tri = scipy.spatial.Delaunay(simplex)
        axes = [np.linspace(simplex[:, d].min(), simplex[:, d].max(), 7)
                for d in range(3)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.column_stack([m.ravel() for m in mesh])
        inside = tri.find_simplex(grid) >= 0
        assert len(cand) == int(np.sum(inside))

    def test_degenerate_hull_rejected(self):
        flat = np.column_stack([np.linspace(-0.2, 0.2, 10),
                                np.linspace(2, 4, 10),
                                np.full(10, 0.15)])
        with pytest.raises(DegenerateHullError):
            build_candidates(SampleSet(flat, "flat"), resolution=4)

    def test_candidates_in_lexicographic_order(self, theta):
        cand = build_candidates(theta, resolution=6)
        order = np.lexsort((cand.points[:, 2], cand.points[:, 1], cand.points[:, 0]))
        np.testing.assert_array_equal(order, np.arange(len(cand)))


class TestGreedySelection:
    def test_first_center_is_lexicographically_smallest(self):
        cand = random_candidates(100)
        selector = GreedySelector(cand, KernelSpec(delta=0.3))
        idx = selector.step()
        assert idx == 0  # constant power, first-max tie-break

    def test_power_vanishes_at_selected_center(self):
        cand = random_candidates(200, seed=3)
        selector = GreedySelector(cand, KernelSpec(delta=0.3))
        for _ in range(5):
            idx = selector.step()
            assert selector.power2[idx] == pytest.approx(0.0, abs=1e-12)

    def test_matches_brute_force_for_20_steps(self):
        cand = random_candidates(400, seed=5)
        spec = KernelSpec(delta=0.25)
        selector = GreedySelector(cand, spec)
        unit = cand.unit_points()
        selected = []
        for _ in range(20):
            p2_oracle = brute_force_power2(unit, selected, spec)
            np.testing.assert_allclose(selector.power2, p2_oracle, atol=1e-8)
            idx_oracle = int(np.argmax(p2_oracle))
            idx = selector.step()
            assert idx == idx_oracle
            selected.append(idx)

    def test_power_monotone_nonincreasing(self):
        cand = random_candidates(300, seed=8)
        selector = GreedySelector(cand, KernelSpec(delta=0.4))
        prev = selector.power2.copy()
        for _ in range(25):
            selector.step()
            assert np.all(selector.power2 <= prev + 1e-12)
            assert np.all(selector.power2 >= 0.0)
            prev = selector.power2.copy()

    def test_saturation_signal(self):
        cand = random_candidates(4, seed=2)
        selector = GreedySelector(cand, KernelSpec(delta=0.2))
        for _ in range(4):
            selector.step()
        with pytest.raises(PowerSaturationError):
            selector.step()


class TestGreedyModel:
    def build(self, n, seed=4, delta=0.3):
        cand = random_candidates(300, seed=seed)
        spec = KernelSpec(delta=delta)
        selector = GreedySelector(cand, spec)
        for _ in range(n):
            selector.step()
        return GreedyModel(
            spec=spec, box_lo=cand.box_lo, box_hi=cand.box_hi,
            centers=cand.points[selector.selected],
            newton_factor=selector.newton_factor())

    def test_single_center_coefficient_is_output(self):
        gm = self.build(1)
        out = np.array([[0.3, 0.7, 0.1]])
        gm.fit(out)
        np.testing.assert_allclose(gm.coeffs, out, rtol=1e-12)
        np.testing.assert_allclose(gm(gm.centers), out, rtol=1e-12)

    def test_constant_outputs_interpolated(self):
        gm = self.build(12)
        out = np.full((12, 4), 0.42)
        gm.fit(out)
        np.testing.assert_allclose(gm(gm.centers), out, atol=1e-9)

    def test_interpolation_exact_at_centers(self):
        gm = self.build(30)
        rng = np.random.default_rng(0)
        out = rng.uniform(0, 1, (30, 6))
        gm.fit(out)
        np.testing.assert_allclose(gm(gm.centers), out, atol=1e-8)

    def test_error_bound_with_known_native_norm(self):
        # f = sum c_j k(., z_j) has native norm ||f||^2 = c' K c; the power
        # function certifies the worst-case interpolation error
        cand = random_candidates(500, seed=9)
        spec = KernelSpec(delta=0.3)
        rng = np.random.default_rng(1)
        z = rng.uniform(0, 1, (8, 3))
        c = rng.normal(size=8)
        K_zz = kernel_eval(z, z, spec)
        native_norm = float(np.sqrt(c @ K_zz @ c))

        unit = cand.unit_points()
        f_values = (kernel_eval(unit, z, spec) @ c)[:, None]

        selector = GreedySelector(cand, spec)
        for _ in range(15):
            selector.step()
        gm = GreedyModel(spec=spec, box_lo=cand.box_lo, box_hi=cand.box_hi,
                         centers=cand.points[selector.selected],
                         newton_factor=selector.newton_factor())
        gm.fit(f_values[selector.selected])
        residual = np.abs(gm(cand.points) - f_values).max()
        p_max = float(np.sqrt(selector.power2.max()))
        assert residual <= p_max * native_norm + 1e-10

    def test_singular_system_cites_delta(self):
        gm = self.build(5)
        broken = GreedyModel(spec=gm.spec, box_lo=gm.box_lo, box_hi=gm.box_hi,
                             centers=gm.centers,
                             newton_factor=np.zeros_like(gm.newton_factor))
        with pytest.raises(np.linalg.LinAlgError, match="delta"):
            broken.fit(np.zeros((5, 2)))


class TestSchedule:
    def test_checkpoints_nested(self, theta):
        model = FakeModel(lambda om: np.array([om[0] ** 2 + om[2]]))
        cand = build_candidates(theta, resolution=8)
        models = greedy_models(cand, KernelSpec(delta=0.2), (2, 5, 9), model)
        c2, c5, c9 = (models[n].centers for n in (2, 5, 9))
        np.testing.assert_array_equal(c5[:2], c2)
        np.testing.assert_array_equal(c9[:5], c5)

    def test_model_runs_shared_across_checkpoints(self, cfg, theta):
        model = FakeModel(lambda om: np.array([om[1]]))
        cand = build_candidates(theta, resolution=8)
        greedy_models(cand, KernelSpec(delta=0.2), (2, 5, 9), model)
        assert model.run_count == 2 + 5 + 9  # FakeModel has no cache

    def test_schedule_run_emits_requested_grid(self, theta):
        model = FakeModel(lambda om: np.array([om[0]]))
        models = schedule_run(theta, model, deltas=(0.2, 0.4), ns=(1, 4, 16),
                              resolution=8)
        assert len(models) == 6
        assert all(key in models for key in
                   [(0.2, 1), (0.2, 4), (0.2, 16), (0.4, 1), (0.4, 4), (0.4, 16)])

    def test_kernel_moments_clamped(self, theta):
        model = FakeModel(lambda om: np.array([1.2 * om[2]]))  # can exceed 1? no: om3<0.3
        cand = build_candidates(theta, resolution=6)
        models = greedy_models(cand, KernelSpec(delta=0.2), (8,), model)
        mf = kernel_moments(models[8], theta)
        assert mf.mean.min() >= 0.0 and mf.mean.max() <= 1.0
