"""Spatially adaptive sparse-grid collocation on [0,1]^d with boundary and
modified (extrapolating) basis variants and density-weighted refinement.

A grid point is the pair (levels, indices) of integer tuples; coordinates
are the dyadic rationals i * 2^-l per dimension.  Boundary points live on
level 0 with indices {0, 1}; interior points have odd indices.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .reference import MomentField, moments_from_runs
from .stochastic import SampleSet, bounding_box, from_unit_cube, to_unit_cube

VARIANTS = ("boundary", "modified")

Point = tuple  # ((l1,...,ld), (i1,...,id))


class GridStructureError(ValueError):
    """Raised when a level-index set violates the structural invariants."""


def validate_point(point: Point, variant: str):
    levels, indices = point
    for l, i in zip(levels, indices):
        if l == 0:
            if variant != "boundary":
                raise GridStructureError("level 0 exists only in the boundary variant")
            if i not in (0, 1):
                raise GridStructureError(f"boundary index must be 0 or 1, got {i}")
        else:
            if not (1 <= i < 2 ** l) or i % 2 == 0:
                raise GridStructureError(f"interior index must be odd in [1, 2^l), got ({l},{i})")


def coordinates(points) -> np.ndarray:
    """Unit-cube coordinates of a list of points, shape (n, d)."""
    return np.array([[i * 2.0 ** -l for l, i in zip(ls, js)] for ls, js in points])


def _sort_key(point: Point):
    levels, indices = point
    return (sum(levels), levels, indices)


def canonical_order(points) -> list:
    return sorted(points, key=_sort_key)


# ---------------------------------------------------------------------------
# basis functions

def _basis_1d(l: int, i: int, x: np.ndarray, variant: str, degree_cap: int,
              ancestors_1d=None) -> np.ndarray:
    """Evaluate the 1-d basis function of (l, i) at points x in [0, 1]."""
    if l == 0:
        return 1.0 - x if i == 0 else np.asarray(x, dtype=float)
    h = 2.0 ** -l
    if variant == "modified":
        if l == 1:
            return np.ones_like(x)
        if i == 1:
            return np.where(x < 2 * h, 2.0 - x / h, 0.0)
        if i == 2 ** l - 1:
            return np.where(x > 1.0 - 2 * h, 2.0 - (1.0 - x) / h, 0.0)
    degree = min(l + 1, degree_cap)
    center = i * h
    left, right = center - h, center + h
    if degree <= 1:
        return np.maximum(0.0, 1.0 - np.abs(x / h - i))
    inside = (x > left) & (x < right)
    if degree == 2:
        value = (x - left) * (right - x) / ((center - left) * (right - center))
        return np.where(inside, value, 0.0)
    # degree 3: extra root at the nearest hierarchical ancestor outside the
    # support (falls back to the parabola at the root level)
    third = None
    if ancestors_1d:
        outside = [a for a in ancestors_1d if a <= left or a >= right]
        if outside:
            third = min(outside, key=lambda a: abs(a - center))
    if third is None:
        value = (x - left) * (right - x) / ((center - left) * (right - center))
    else:
        value = ((x - left) * (right - x) * (x - third)
                 / ((center - left) * (right - center) * (center - third)))
    return np.where(inside, value, 0.0)


def _ancestor_coords_1d(l: int, i: int, variant: str) -> list:
    """Coordinates of the 1-d hierarchical ancestors of (l, i)."""
    coords = []
    while l > 1:
        i = (i + 1) // 2 if ((i + 1) // 2) % 2 == 1 else (i - 1) // 2
        l -= 1
        coords.append(i * 2.0 ** -l)
    if l == 1 and variant == "boundary":
        coords.extend([0.0, 1.0])
    return coords


def basis_eval(point: Point, X: np.ndarray, variant: str,
               degree_cap: int = 1) -> np.ndarray:
    """Tensor-product basis value of one grid point at rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    levels, indices = point
    out = np.ones(X.shape[0])
    for d, (l, i) in enumerate(zip(levels, indices)):
        anc = (_ancestor_coords_1d(l, i, variant)
               if degree_cap >= 3 and l >= 1 else None)
        out *= _basis_1d(l, i, X[:, d], variant, degree_cap, anc)
    return out


def basis_matrix(points, X: np.ndarray, variant: str,
                 degree_cap: int = 1) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty((X.shape[0], len(points)))
    for col, point in enumerate(points):
        out[:, col] = basis_eval(point, X, variant, degree_cap)
    return out


# ---------------------------------------------------------------------------
# level-index machinery

def _index_range(l: int, variant: str):
    if l == 0:
        return (0, 1) if variant == "boundary" else ()
    return tuple(range(1, 2 ** l, 2))


def regular_grid(level: int, variant: str, dim: int = 3) -> list:
    """Regular sparse-grid points: |max(l,1)|_1 <= level + dim - 1, with
    level-0 boundary points admitted in the boundary variant."""
    if level < 1:
        raise ValueError("regular level must be at least 1")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    min_level = 0 if variant == "boundary" else 1
    points = []

    def recurse(prefix):
        if len(prefix) == dim:
            if sum(max(l, 1) for l in prefix) <= level + dim - 1:
                for idx in _cartesian_indices(prefix, variant):
                    points.append((tuple(prefix), idx))
            return
        for l in range(min_level, level + 1):
            if sum(max(v, 1) for v in prefix) + max(l, 1) + (dim - len(prefix) - 1) \
                    <= level + dim - 1:
                recurse(prefix + [l])

    recurse([])
    return canonical_order(points)


def _cartesian_indices(levels, variant: str):
    ranges = [_index_range(l, variant) for l in levels]
    if any(len(r) == 0 for r in ranges):
        return
    idx = [0] * len(ranges)
    while True:
        yield tuple(r[k] for r, k in zip(ranges, idx))
        for d in reversed(range(len(ranges))):
            idx[d] += 1
            if idx[d] < len(ranges[d]):
                break
            idx[d] = 0
        else:
            return


def children(point: Point, dim: int, variant: str) -> list:
    """Valid hierarchical successors of the point in one dimension."""
    levels, indices = point
    l, i = levels[dim], indices[dim]
    out = []
    for child_i in (2 * i - 1, 2 * i + 1):
        cl = l + 1
        if 1 <= child_i < 2 ** cl and child_i % 2 == 1:
            new_levels = levels[:dim] + (cl,) + levels[dim + 1:]
            new_indices = indices[:dim] + (child_i,) + indices[dim + 1:]
            out.append((new_levels, new_indices))
    return sorted(set(out))


def parents(point: Point, dim: int, variant: str) -> list:
    """Hierarchical ancestors of the point one level up in one dimension."""
    levels, indices = point
    l, i = levels[dim], indices[dim]
    if l == 0:
        return []
    if l == 1:
        if variant != "boundary":
            return []
        return [(levels[:dim] + (0,) + levels[dim + 1:],
                 indices[:dim] + (b,) + indices[dim + 1:]) for b in (0, 1)]
    parent_i = (i + 1) // 2 if ((i + 1) // 2) % 2 == 1 else (i - 1) // 2
    return [(levels[:dim] + (l - 1,) + levels[dim + 1:],
             indices[:dim] + (parent_i,) + indices[dim + 1:])]


def ancestor_closure(points, variant: str) -> set:
    closed = set(points)
    stack = list(points)
    while stack:
        p = stack.pop()
        for dim in range(len(p[0])):
            for parent in parents(p, dim, variant):
                if parent not in closed:
                    closed.add(parent)
                    stack.append(parent)
    return closed


def balance(points: set, variant: str) -> set:
    """Enforce that each point has none or all valid successors per
    direction, re-closing under ancestors until stable."""
    out = set(points)
    changed = True
    while changed:
        changed = False
        for p in list(out):
            for dim in range(len(p[0])):
                kids = children(p, dim, variant)
                if kids and any(k in out for k in kids):
                    for k in kids:
                        if k not in out:
                            out.add(k)
                            changed = True
        closed = ancestor_closure(out, variant)
        if len(closed) != len(out):
            out = closed
            changed = True
    return out


def is_downward_closed(points, variant: str) -> bool:
    pts = set(points)
    return all(parent in pts
               for p in pts for dim in range(len(p[0]))
               for parent in parents(p, dim, variant))


def is_balanced(points, variant: str) -> bool:
    pts = set(points)
    for p in pts:
        for dim in range(len(p[0])):
            kids = children(p, dim, variant)
            present = sum(1 for k in kids if k in pts)
            if present not in (0, len(kids)):
                return False
    return True


# ---------------------------------------------------------------------------
# surrogate

@dataclasses.dataclass
class SparseGridSurrogate:
    """Hierarchical sparse-grid interpolant of the vector-valued model."""

    variant: str
    degree_cap: int
    points: list                 # canonical order
    coeffs: np.ndarray           # (n_points, n_out) hierarchical surpluses
    box_lo: np.ndarray
    box_hi: np.ndarray

    def unit_coordinates(self) -> np.ndarray:
        return coordinates(self.points)

    def omega_coordinates(self) -> np.ndarray:
        return from_unit_cube(self.unit_coordinates(), self.box_lo, self.box_hi)

    def eval_unit(self, X: np.ndarray) -> np.ndarray:
        return basis_matrix(self.points, X, self.variant, self.degree_cap) @ self.coeffs

    def __call__(self, omegas: np.ndarray) -> np.ndarray:
        unit = to_unit_cube(np.atleast_2d(omegas), self.box_lo, self.box_hi)
        return self.eval_unit(unit)

    def save(self, path):
        levels = np.array([p[0] for p in self.points])
        indices = np.array([p[1] for p in self.points])
        np.savez(path, variant=self.variant, degree_cap=self.degree_cap,
                 levels=levels, indices=indices, coeffs=self.coeffs,
                 box_lo=self.box_lo, box_hi=self.box_hi)


def hierarchize(points, nodal_values: np.ndarray, variant: str,
                degree_cap: int = 1) -> tuple:
    """Hierarchical coefficients interpolating the nodal values.

    Returns (canonical points, coefficient matrix).  The collocation matrix
    is unit lower triangular in the canonical (coarse-to-fine) order.
    """
    pts = canonical_order(points)
    if not is_downward_closed(pts, variant):
        raise GridStructureError("hierarchization requires a downward-closed set")
    order = {p: k for k, p in enumerate(points)}
    values = np.atleast_2d(np.asarray(nodal_values, dtype=float))
    values = values[[order[p] for p in pts]]
    A = basis_matrix(pts, coordinates(pts), variant, degree_cap)
    coeffs = scipy.linalg.solve_triangular(A, values, lower=True, check_finite=False)
    return pts, coeffs


def density_weights(points, theta_unit: np.ndarray, variant: str,
                    degree_cap: int = 1) -> np.ndarray:
    """Monte-Carlo L2 norms of the basis functions under the input measure:
    sqrt of the mean squared basis value over the mapped sample set."""
    W = basis_matrix(points, theta_unit, variant, degree_cap)
    return np.sqrt(np.mean(W ** 2, axis=0))


def rank_candidates(points, coeffs: np.ndarray, weights: np.ndarray,
                    variant: str) -> list:
    """Refinable points (missing at least one successor) in descending
    surplus-times-norm score; deterministic lexicographic tie-break."""
    pts = set(points)
    scored = []
    for k, p in enumerate(points):
        missing = any(kid not in pts
                      for dim in range(len(p[0]))
                      for kid in children(p, dim, variant))
        if missing:
            score = np.max(np.abs(coeffs[k])) * weights[k]
            scored.append((-score, _sort_key(p), p))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [p for _, _, p in scored]


def refine(points, ranked_candidates, variant: str, k: int = 2) -> tuple:
    """Add all missing successors of the top-k candidates, close under
    ancestors and re-balance; returns (new points, updated set)."""
    current = set(points)
    for candidate in ranked_candidates[:k]:
        for dim in range(len(candidate[0])):
            for kid in children(candidate, dim, variant):
                current.add(kid)
    current = balance(ancestor_closure(current, variant), variant)
    new_points = canonical_order(current - set(points))
    return new_points, current


def adaptive_loop(model, sample_set: SampleSet, budget: int, variant: str,
                  degree_cap: int = 1, refine_count: int = 2):
    """Rank -> refine -> run -> hierarchize until the model-run budget is
    reached; returns (surrogate, history of grid sizes per iteration)."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    box_lo, box_hi = bounding_box(sample_set, margin=0.01)
    theta_unit = to_unit_cube(sample_set.samples, box_lo, box_hi)

    points = regular_grid(1, variant, dim=3)
    if budget < len(points):
        raise ValueError(f"budget {budget} below the initial grid size {len(points)}")

    nodal = {}

    def run_at(new_points):
        omegas = from_unit_cube(coordinates(new_points), box_lo, box_hi)
        outputs = model.run_many(omegas)
        for p, out in zip(new_points, outputs):
            nodal[p] = out

    run_at(points)
    pts, coeffs = hierarchize(points, np.array([nodal[p] for p in points]), variant,
                              degree_cap)
    history = [len(pts)]
    while len(pts) < budget:
        weights = density_weights(pts, theta_unit, variant, degree_cap)
        ranked = rank_candidates(pts, coeffs, weights, variant)
        if not ranked:
            break
        new_points, updated = refine(pts, ranked, variant, k=refine_count)
        if not new_points:
            break
        run_at(new_points)
        updated_pts = canonical_order(updated)
        pts, coeffs = hierarchize(updated_pts,
                                  np.array([nodal[p] for p in updated_pts]),
                                  variant, degree_cap)
        history.append(len(pts))
    surrogate = SparseGridSurrogate(variant=variant, degree_cap=degree_cap,
                                    points=pts, coeffs=coeffs,
                                    box_lo=box_lo, box_hi=box_hi)
    return surrogate, history


def sg_moments(surrogate: SparseGridSurrogate, sample_set: SampleSet,
               t: float = 0.0) -> MomentField:
    """Evaluate the surrogate over the sample set, clamp to [0, 1], return
    empirical moments."""
    fields = np.clip(surrogate(sample_set.samples), 0.0, 1.0)
    return moments_from_runs(fields, t)
