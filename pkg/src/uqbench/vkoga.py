"""Vector-valued kernel interpolation with P-greedy center selection.

The Wendland C2 kernel acts on inputs affinely scaled to the unit cube of
the candidate box.  Selection is target-independent: one greedy pass per
shape parameter serves every checkpoint of the n-schedule, and the Newton
basis keeps the power-function update O(n) per candidate.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg
import scipy.spatial

from .reference import MomentField, moments_from_runs
from .stochastic import SampleSet, to_unit_cube

DELTAS = (0.1, 0.2, 0.3, 0.4, 0.5)
N_SCHEDULE = (1, 4, 16, 64, 252, 1000)


class DegenerateHullError(ValueError):
    """Sample cloud does not span a 3-d convex hull."""


class PowerSaturationError(RuntimeError):
    """Maximum power below threshold: candidate set is interpolated."""


@dataclasses.dataclass(frozen=True)
class KernelSpec:
    """Wendland C2 kernel with shape parameter delta.

    The default convention scales the distance, s = delta * ||x-y||, so the
    support radius is 1/delta; the alternative "radius" convention uses
    s = ||x-y|| / delta with support radius delta.
    """

    delta: float
    convention: str = "scale"

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.convention not in ("scale", "radius"):
            raise ValueError(f"unknown delta convention {self.convention!r}")


def kernel_eval(x, y, spec: KernelSpec):
    """k(x, y) = (1-s)_+^4 (4s+1); pairwise matrix for 2-d inputs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 1 and y.ndim == 1
    r = scipy.spatial.distance.cdist(np.atleast_2d(x), np.atleast_2d(y))
    s = spec.delta * r if spec.convention == "scale" else r / spec.delta
    k = np.clip(1.0 - s, 0.0, None) ** 4 * (4.0 * s + 1.0)
    return float(k[0, 0]) if scalar else k


@dataclasses.dataclass(frozen=True)
class CandidateSet:
    """Uniform grid points inside the convex hull of the sample cloud."""

    points: np.ndarray           # (N, 3) in omega space, lexicographic order
    box_lo: np.ndarray
    box_hi: np.ndarray
    resolution: int
    hull_facets: int

    def __len__(self) -> int:
        return self.points.shape[0]

    def unit_points(self) -> np.ndarray:
        return to_unit_cube(self.points, self.box_lo, self.box_hi)


def build_candidates(sample_set: SampleSet, resolution: int = 50) -> CandidateSet:
    """Intersect a resolution^3 grid over the minimum enclosing box with the
    convex hull of the samples (linear-feasibility test per point)."""
    samples = sample_set.samples
    lo, hi = samples.min(axis=0), samples.max(axis=0)
    try:
        hull = scipy.spatial.ConvexHull(samples)
    except scipy.spatial.QhullError as exc:
        raise DegenerateHullError(f"convex hull construction failed: {exc}") from exc
    axes = [np.linspace(lo[d], hi[d], resolution) for d in range(3)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.column_stack([m.ravel() for m in mesh])
    # half-space test A x + b <= 0 with a tolerance scaled to the box
    A, b = hull.equations[:, :3], hull.equations[:, 3]
    tol = 1e-9 * float(np.linalg.norm(hi - lo))
    inside = np.all(grid @ A.T + b <= tol, axis=1)
    return CandidateSet(points=grid[inside], box_lo=lo, box_hi=hi,
                        resolution=resolution, hull_facets=len(hull.simplices))


class GreedySelector:
    """Incremental P-greedy selection over a fixed candidate set.

    Maintains the Newton basis values of the selected centers on all
    candidates and the residual squared power function.
    """

    def __init__(self, candidates: CandidateSet, spec: KernelSpec,
                 n_max: int | None = None):
        self.candidates = candidates
        self.spec = spec
        self.unit = candidates.unit_points()
        n = len(candidates)
        self.power2 = np.ones(n)  # k(x, x) = 1 for the Wendland kernel
        self._capacity = min(n, n_max) if n_max is not None else min(n, 1024)
        self._V = np.empty((self._capacity, n))
        self.selected: list[int] = []

    @property
    def n_selected(self) -> int:
        return len(self.selected)

    @property
    def V(self) -> np.ndarray:
        """Newton basis values of the selected centers on all candidates."""
        return self._V[:self.n_selected]

    def _grow(self):
        self._capacity = min(2 * self._capacity, len(self.candidates))
        bigger = np.empty((self._capacity, self._V.shape[1]))
        bigger[:self.n_selected] = self._V[:self.n_selected]
        self._V = bigger

    def step(self) -> int:
        """Select the power-function argmax (first occurrence = smallest
        lexicographic candidate) and update the Newton basis."""
        if self.n_selected >= len(self.candidates):
            raise PowerSaturationError("candidate set exhausted")
        idx = int(np.argmax(self.power2))
        p_star2 = self.power2[idx]
        if p_star2 < 1e-14:
            raise PowerSaturationError(
                f"max squared power {p_star2:.3e} below threshold")
        p_star = np.sqrt(p_star2)
        k_col = kernel_eval(self.unit, self.unit[idx], self.spec)[:, 0]
        n = self.n_selected
        if n:
            v_new = (k_col - self._V[:n].T @ self._V[:n, idx]) / p_star
        else:
            v_new = k_col / p_star
        self.power2 = np.maximum(self.power2 - v_new ** 2, 0.0)
        if n == self._capacity:
            self._grow()
        self._V[n] = v_new
        self.selected.append(idx)
        return idx

    def newton_factor(self) -> np.ndarray:
        """Lower-triangular matrix L[m, i] = v_i(center_m)."""
        return np.tril(self.V[:, self.selected].T)


@dataclasses.dataclass
class GreedyModel:
    """Kernel interpolant on greedily selected centers."""

    spec: KernelSpec
    box_lo: np.ndarray
    box_hi: np.ndarray
    centers: np.ndarray          # (n, 3) omega space, selection order
    newton_factor: np.ndarray    # (n, n) lower triangular
    coeffs: np.ndarray | None = None   # (n, n_out)

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    def fit(self, outputs: np.ndarray) -> "GreedyModel":
        """Solve the interpolation system through the Newton factorisation."""
        outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
        if outputs.shape[0] != self.n_centers:
            raise ValueError("one output row per center required")
        L = self.newton_factor
        if np.min(np.abs(np.diag(L))) < 1e-14:
            raise np.linalg.LinAlgError(
                f"numerically singular kernel system at delta={self.spec.delta}; "
                "centers too close for this shape parameter")
        half = scipy.linalg.solve_triangular(L, outputs, lower=True,
                                             check_finite=False)
        self.coeffs = scipy.linalg.solve_triangular(L.T, half, lower=False,
                                                    check_finite=False)
        return self

    def __call__(self, omegas: np.ndarray) -> np.ndarray:
        if self.coeffs is None:
            raise RuntimeError("model is not fitted")
        unit = to_unit_cube(np.atleast_2d(omegas), self.box_lo, self.box_hi)
        unit_centers = to_unit_cube(self.centers, self.box_lo, self.box_hi)
        return kernel_eval(unit, unit_centers, self.spec) @ self.coeffs

    def save(self, path):
        np.savez(path, delta=self.spec.delta, convention=self.spec.convention,
                 box_lo=self.box_lo, box_hi=self.box_hi, centers=self.centers,
                 newton_factor=self.newton_factor,
                 coeffs=np.empty(0) if self.coeffs is None else self.coeffs)


def greedy_models(candidates: CandidateSet, spec: KernelSpec, ns,
                  model) -> dict[int, GreedyModel]:
    """One greedy pass checkpointed at the requested center counts; the
    checkpoints share nested centers and model runs."""
    ns = sorted(set(int(n) for n in ns))
    selector = GreedySelector(candidates, spec, n_max=ns[-1])
    out = {}
    for n in ns:
        while selector.n_selected < n:
            try:
                selector.step()
            except PowerSaturationError:
                break
        count = min(n, selector.n_selected)
        if count < 1:
            continue
        centers = candidates.points[selector.selected[:count]]
        L = selector.newton_factor()[:count, :count]
        gm = GreedyModel(spec=spec, box_lo=candidates.box_lo,
                         box_hi=candidates.box_hi, centers=centers,
                         newton_factor=L)
        gm.fit(model.run_many(centers))
        out[count] = gm
    return out


def schedule_run(sample_set: SampleSet, model, deltas=DELTAS, ns=N_SCHEDULE,
                 resolution: int = 50,
                 convention: str = "scale") -> dict[tuple, GreedyModel]:
    """The full kernel study: one model per (delta, n) pair."""
    candidates = build_candidates(sample_set, resolution)
    out = {}
    for delta in deltas:
        spec = KernelSpec(delta=delta, convention=convention)
        for n, gm in greedy_models(candidates, spec, ns, model).items():
            out[(delta, n)] = gm
    return out


def kernel_moments(model: GreedyModel, sample_set: SampleSet,
                   t: float = 0.0) -> MomentField:
    """Evaluate the interpolant over the sample set, clamp to [0, 1], return
    empirical moments."""
    fields = np.clip(model(sample_set.samples), 0.0, 1.0)
    return moments_from_runs(fields, t)
