"""Data-driven arbitrary polynomial chaos: moment-based orthonormal bases,
probabilistic collocation (PCM) and full-tensor least-squares fits.

The moment matrix is factorised in extended precision on the standardised
variable; expansions above the conditioning caps (PCM order 5, FT order 10)
are rejected rather than fitted.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
import scipy.stats

from .model import SolverModel
from .physics import ConfigError
from .reference import MomentField, moments_from_runs
from .stochastic import SampleSet

PCM_MAX_ORDER = 5
FT_MAX_ORDER = 10
ILL_CONDITIONED = 1e12


class MomentMatrixError(ValueError):
    """Moment (Hankel) matrix not positive definite at the requested order."""


def _cholesky_ld(H: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor in extended precision; raises on indefiniteness."""
    n = H.shape[0]
    L = np.zeros_like(H)
    for i in range(n):
        for j in range(i + 1):
            acc = H[i, j] - np.dot(L[i, :j], L[j, :j])
            if i == j:
                if acc <= 0.0:
                    raise MomentMatrixError(
                        f"moment matrix indefinite at degree {i}; the sample "
                        "moments cannot support this order, use a lower one")
                L[i, i] = np.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    return L


def _solve_lower_ld(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = L.shape[0]
    X = np.array(B, dtype=L.dtype, copy=True)
    for i in range(n):
        X[i] -= L[i, :i] @ X[:i]
        X[i] /= L[i, i]
    return X


@dataclasses.dataclass(frozen=True)
class OrthonormalBasis1D:
    """Orthonormal polynomials of one input dimension w.r.t. its empirical
    measure, stored on the standardised variable t = (x - shift)/scale."""

    order: int
    shift: float
    scale: float
    coeffs: np.ndarray   # (order+1, order+1), row k ascending in t
    jacobi: np.ndarray   # (order, order) matrix E[t p_a p_b]

    def eval_all(self, x) -> np.ndarray:
        """Values of all basis polynomials at x; shape (len(x), order+1)."""
        t = (np.atleast_1d(np.asarray(x, dtype=float)) - self.shift) / self.scale
        powers = np.vander(t, self.order + 1, increasing=True)
        return powers @ self.coeffs.T

    def eval(self, k: int, x):
        return self.eval_all(x)[:, k]

    def roots(self, k: int) -> np.ndarray:
        """Zeros of the degree-k basis polynomial (eigenvalues of the leading
        k-by-k Jacobi block), mapped back to the raw variable.  The Jacobi
        matrix extends one degree past the stored polynomials when the
        construction received the extra odd-order moment."""
        if not 1 <= k <= self.jacobi.shape[0]:
            raise ValueError(f"roots available for degrees 1..{self.jacobi.shape[0]}")
        t = np.linalg.eigvalsh(self.jacobi[:k, :k])
        return self.shift + self.scale * np.sort(t)

    def monomial_coefficients(self) -> np.ndarray:
        """Coefficient matrix in the raw variable (row k = degree-k polynomial)."""
        out = np.zeros_like(self.coeffs)
        sub = np.polynomial.Polynomial([-self.shift / self.scale, 1.0 / self.scale])
        for k in range(self.order + 1):
            composed = np.polynomial.Polynomial(self.coeffs[k])(sub)
            out[k, :len(composed.coef)] = composed.coef
        return out


def _basis_from_standardized(ms: np.ndarray, mu: float, sigma: float) -> OrthonormalBasis1D:
    """Assemble the basis from standardised moments ms[k] = E[t^k]; an odd
    trailing moment (len = 2N+2) extends the Jacobi matrix by one degree."""
    k_max = ms.size - 1
    order = k_max // 2
    H = np.empty((order + 1, order + 1), dtype=np.longdouble)
    for a in range(order + 1):
        for b in range(order + 1):
            H[a, b] = ms[a + b]
    L = _cholesky_ld(H)
    coeffs = _solve_lower_ld(L, np.eye(order + 1, dtype=np.longdouble))

    # Jacobi matrix E[t p_a p_b] (shifted-Hankel sandwich)
    n_j = order + 1 if k_max >= 2 * order + 1 else order
    H1 = np.empty((n_j, n_j), dtype=np.longdouble)
    for a in range(n_j):
        for b in range(n_j):
            H1[a, b] = ms[a + b + 1]
    Cn = coeffs[:n_j, :n_j]
    J = Cn @ H1 @ Cn.T
    J = 0.5 * (J + J.T)

    return OrthonormalBasis1D(order=order, shift=float(mu), scale=float(sigma),
                              coeffs=coeffs.astype(float), jacobi=J.astype(float))


def build_basis(moments) -> OrthonormalBasis1D:
    """Construct the orthonormal basis of order N from raw moments E[x^k],
    k = 0..2N (an extra odd moment extends the collocation-root range)."""
    m = np.asarray(moments, dtype=np.longdouble)
    if m.ndim != 1 or m.size < 3:
        raise ValueError("moments must be E[x^k] for k = 0..2N with N >= 1")
    if abs(float(m[0]) - 1.0) > 1e-12:
        raise ValueError("zeroth moment must be 1")

    mu = m[1]
    var = m[2] - mu * mu
    if var <= 0.0:
        raise MomentMatrixError("degenerate measure: zero variance")
    sigma = np.sqrt(var)

    # standardised central moments via the binomial expansion; adequate in
    # extended precision for the conditioning caps enforced below
    k_max = m.size - 1
    ms = np.zeros(k_max + 1, dtype=np.longdouble)
    for k in range(k_max + 1):
        acc = np.longdouble(0.0)
        for j in range(k + 1):
            acc += math.comb(k, j) * m[j] * (-mu) ** (k - j)
        ms[k] = acc / sigma**k
    return _basis_from_standardized(ms, float(mu), float(sigma))


def build_bases(sample_set: SampleSet, order: int) -> tuple:
    """Per-dimension bases of the given order with collocation roots up to
    degree order+1.

    Moments are accumulated in extended precision on the centered variable,
    which is the equilibration that keeps the moment matrix factorisable at
    the full-tensor order cap.
    """
    bases = []
    for dim in (1, 2, 3):
        x = sample_set.samples[:, dim - 1].astype(np.longdouble)
        mu = x.mean()
        sigma = np.sqrt(((x - mu) ** 2).mean())
        if sigma <= 0.0:
            raise MomentMatrixError("degenerate measure: zero variance")
        t = (x - mu) / sigma
        ms = np.empty(2 * order + 2, dtype=np.longdouble)
        power = np.ones_like(t)
        ms[0] = 1.0
        for k in range(1, 2 * order + 2):
            power = power * t
            ms[k] = power.mean()
        bases.append(_basis_from_standardized(ms, float(mu), float(sigma)))
    return tuple(bases)


@dataclasses.dataclass(frozen=True)
class MultiIndexSet:
    """Total-degree multi-index set in 3 dimensions, graded lexicographic."""

    order: int
    include_constant: bool = True
    indices: tuple = dataclasses.field(init=False)

    def __post_init__(self):
        start = 0 if self.include_constant else 1
        idx = [(i, j, k)
               for total in range(start, self.order + 1)
               for i in range(total, -1, -1)
               for j in range(total - i, -1, -1)
               for k in (total - i - j,)]
        idx.sort(key=lambda t: (sum(t), t))
        object.__setattr__(self, "indices", tuple(idx))
        expected = math.comb(self.order + 3, 3) - (0 if self.include_constant else 1)
        assert len(self.indices) == expected

    def __len__(self) -> int:
        return len(self.indices)


@dataclasses.dataclass(frozen=True)
class PceSurrogate:
    """Polynomial chaos expansion with vector-valued coefficients."""

    bases: tuple
    index_set: MultiIndexSet
    coeffs: np.ndarray          # (n_terms, n_cells)
    variant: str                # "pcm" | "ft"
    n_runs: int
    condition: float | None = None
    residual: float | None = None

    @property
    def order(self) -> int:
        return self.index_set.order

    def basis_matrix(self, omegas: np.ndarray) -> np.ndarray:
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        per_dim = [self.bases[d].eval_all(omegas[:, d]) for d in range(3)]
        out = np.empty((omegas.shape[0], len(self.index_set)))
        for col, (i, j, k) in enumerate(self.index_set.indices):
            out[:, col] = per_dim[0][:, i] * per_dim[1][:, j] * per_dim[2][:, k]
        return out

    def __call__(self, omegas: np.ndarray) -> np.ndarray:
        return self.basis_matrix(omegas) @ self.coeffs

    def save(self, path):
        np.savez(path,
                 variant=self.variant, order=self.order, n_runs=self.n_runs,
                 indices=np.array(self.index_set.indices),
                 coeffs=self.coeffs,
                 condition=np.nan if self.condition is None else self.condition,
                 residual=np.nan if self.residual is None else self.residual,
                 **{f"basis{d}_{name}": getattr(self.bases[d], name)
                    for d in range(3)
                    for name in ("coeffs", "jacobi", "shift", "scale")})


def pcm_points(bases, order: int, sample_set: SampleSet) -> np.ndarray:
    """Collocation nodes: tensor combinations of the degree-(order+1) roots
    ranked by the product of empirical marginal densities (Gaussian KDE,
    Silverman bandwidth); ties break lexicographically.

    Nodes are taken in rank order subject to keeping the collocation matrix
    nonsingular (the top-ranked combinations alone can reuse a single root
    of some dimension, which would make the interpolation system rank
    deficient).
    """
    index_set = MultiIndexSet(order)
    n_terms = len(index_set)
    roots = [b.roots(order + 1) for b in bases]
    n_comb = (order + 1) ** 3
    if n_comb < n_terms:
        raise ValueError(f"only {n_comb} tensor combinations for {n_terms} basis terms")
    dens = []
    for d in range(3):
        kde = scipy.stats.gaussian_kde(sample_set.samples[:, d], bw_method="silverman")
        dens.append(kde(roots[d]))
    combos = []
    for a in range(order + 1):
        for b in range(order + 1):
            for c in range(order + 1):
                node = (roots[0][a], roots[1][b], roots[2][c])
                score = dens[0][a] * dens[1][b] * dens[2][c]
                combos.append((-score, node))
    combos.sort()
    nodes_ranked = np.array([node for _, node in combos])

    per_dim = [bases[d].eval_all(nodes_ranked[:, d]) for d in range(3)]
    rows = np.empty((n_comb, n_terms))
    for col, (i, j, k) in enumerate(index_set.indices):
        rows[:, col] = per_dim[0][:, i] * per_dim[1][:, j] * per_dim[2][:, k]

    selected = []
    ortho = np.zeros((0, n_terms))
    for idx in range(n_comb):
        if len(selected) == n_terms:
            break
        v = rows[idx]
        residual = v - ortho.T @ (ortho @ v)
        norm = np.linalg.norm(residual)
        if norm > 1e-10 * max(1.0, np.linalg.norm(v)):
            selected.append(idx)
            ortho = np.vstack([ortho, residual / norm])
    if len(selected) < n_terms:
        raise ValueError(
            f"tensor combinations span only {len(selected)} of {n_terms} basis terms")
    return nodes_ranked[selected]


def fit_pcm(nodes: np.ndarray, outputs: np.ndarray, bases,
            order: int) -> PceSurrogate:
    """Interpolating fit on the square collocation system."""
    index_set = MultiIndexSet(order)
    if nodes.shape[0] != len(index_set):
        raise ValueError(f"need {len(index_set)} nodes, got {nodes.shape[0]}")
    stub = PceSurrogate(bases, index_set, np.zeros((len(index_set), 1)), "pcm", 0)
    phi = stub.basis_matrix(nodes)
    condition = float(np.linalg.cond(phi))
    if condition > ILL_CONDITIONED:
        warnings.warn(f"PCM collocation matrix ill-conditioned (cond={condition:.2e})",
                      RuntimeWarning)
    coeffs = np.linalg.solve(phi, outputs)
    return PceSurrogate(bases, index_set, coeffs, "pcm", nodes.shape[0],
                        condition=condition)


def fit_least_squares_ft(grid_nodes: np.ndarray, outputs: np.ndarray, bases,
                         order: int) -> PceSurrogate:
    """Least-squares fit over the full tensor grid of collocation points."""
    index_set = MultiIndexSet(order)
    stub = PceSurrogate(bases, index_set, np.zeros((len(index_set), 1)), "ft", 0)
    phi = stub.basis_matrix(grid_nodes)
    coeffs, _, rank, _ = np.linalg.lstsq(phi, outputs, rcond=None)
    if rank < len(index_set):
        raise ValueError(f"rank-deficient tensor-grid system: rank {rank} < {len(index_set)}")
    residual = float(np.linalg.norm(phi @ coeffs - outputs))
    return PceSurrogate(bases, index_set, coeffs, "ft", grid_nodes.shape[0],
                        residual=residual)


def tensor_grid(bases, order: int) -> np.ndarray:
    """Full tensor product of the degree-(order+1) roots: (order+1)^3 nodes."""
    roots = [b.roots(order + 1) for b in bases]
    mesh = np.meshgrid(*roots, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def fit_pcm_surrogate(sample_set: SampleSet, order: int,
                      model: SolverModel) -> PceSurrogate:
    if not 0 <= order <= PCM_MAX_ORDER:
        raise ConfigError(f"PCM order must lie in 0..{PCM_MAX_ORDER}")
    bases = build_bases(sample_set, order)
    nodes = pcm_points(bases, order, sample_set)
    outputs = model.run_many(nodes)
    return fit_pcm(nodes, outputs, bases, order)


def fit_ft_surrogate(sample_set: SampleSet, order: int,
                     model: SolverModel) -> PceSurrogate:
    if not 0 <= order <= FT_MAX_ORDER:
        raise ConfigError(f"FT order must lie in 0..{FT_MAX_ORDER}")
    bases = build_bases(sample_set, order)
    nodes = tensor_grid(bases, order)
    outputs = model.run_many(nodes)
    return fit_least_squares_ft(nodes, outputs, bases, order)


def pce_moments(surrogate: PceSurrogate, sample_set: SampleSet,
                t: float = 0.0) -> MomentField:
    """Method-uniform moment protocol: evaluate the surrogate on the whole
    sample set, clamp to [0, 1], return the empirical moments."""
    fields = np.clip(surrogate(sample_set.samples), 0.0, 1.0)
    return moments_from_runs(fields, t)


def analytic_moments(surrogate: PceSurrogate, t: float = 0.0) -> MomentField:
    """Coefficient-based moments: mean = c_0, var = sum of squared higher
    coefficients.  The mean is clipped into [0, 1] for the field contract."""
    if surrogate.index_set.indices[0] != (0, 0, 0):
        raise ValueError("expansion must include the constant term")
    mean = surrogate.coeffs[0].copy()
    var = np.sum(surrogate.coeffs[1:] ** 2, axis=0)
    return MomentField(mean=np.clip(mean, 0.0, 1.0), std=np.sqrt(var),
                       n_samples=surrogate.n_runs, t=t)
