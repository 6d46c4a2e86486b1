"""Rank-2 model geometry: minors, likelihoods, analytic gradient, Hessian.

A subspace is stored as the free 2 x (n-2) block of a gauge-fixed matrix
[[1, 0, x_3..x_n], [0, 1, y_3..y_n]].  The 2x2 minors of that matrix are
the coordinates of the model; their sum of squares (written ``square_sum``
throughout) is the normalizing quadric.  The open domain consists of the
blocks where every minor and the quadric are nonzero.

The gradient and second-derivative routines are written batched: every
function accepts stacks of blocks of shape (B, n-2) and data vectors of
shape (P,) or (B, P).  The solver tracks thousands of points at once
through these kernels; the scalar API below wraps batch size 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from .exceptions import DomainError
from .pairs import minors_batch, num_pairs, pair_table

DEFAULT_ZERO_TOL = 1e-12


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixParam:
    """Free block (x_3..x_n, y_3..y_n) of a gauge-fixed 2 x n matrix."""

    n: int
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need n >= 3, got n={self.n}")
        xs = np.atleast_1d(np.asarray(self.xs))
        ys = np.atleast_1d(np.asarray(self.ys))
        if xs.shape != (self.n - 2,) or ys.shape != (self.n - 2,):
            raise ValueError(
                f"free block for n={self.n} needs {self.n - 2} entries per row, "
                f"got xs{xs.shape}, ys{ys.shape}"
            )
        dtype = np.complex128 if np.iscomplexobj(xs) or np.iscomplexobj(ys) else np.float64
        object.__setattr__(self, "xs", xs.astype(dtype))
        object.__setattr__(self, "ys", ys.astype(dtype))

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.xs)

    @property
    def n_unknowns(self) -> int:
        return 2 * (self.n - 2)

    def flat(self) -> np.ndarray:
        """Unknowns in solver order (x-block then y-block)."""
        return np.concatenate([self.xs, self.ys])

    @classmethod
    def from_flat(cls, n: int, z: np.ndarray) -> "MatrixParam":
        z = np.asarray(z)
        k = n - 2
        return cls(n=n, xs=z[:k], ys=z[k:])

    def full_matrix(self) -> np.ndarray:
        """The 2 x n matrix with the implicit identity prefix made explicit."""
        out = np.zeros((2, self.n), dtype=self.xs.dtype)
        out[0, 0] = 1.0
        out[1, 1] = 1.0
        out[0, 2:] = self.xs
        out[1, 2:] = self.ys
        return out


@dataclass(frozen=True)
class PlueckerVector:
    """All 2x2 minors in pair order, plus their sum of squares."""

    n: int
    minors: np.ndarray
    square_sum: complex | float

    def __post_init__(self):
        minors = np.atleast_1d(np.asarray(self.minors))
        if minors.shape != (num_pairs(self.n),):
            raise ValueError(f"expected {num_pairs(self.n)} minors, got {minors.shape}")
        object.__setattr__(self, "minors", minors)


@dataclass(frozen=True)
class DataCounts:
    """Observed counts, one per pair, in lexicographic pair order.

    Zero counts are allowed but leave the data non-generic; estimation
    still runs on such data, with a warning attached by the callers that
    need genericity.
    """

    n: int
    counts: np.ndarray
    total: int = field(init=False)

    def __post_init__(self):
        counts = np.atleast_1d(np.asarray(self.counts))
        if counts.shape != (num_pairs(self.n),):
            raise ValueError(
                f"expected {num_pairs(self.n)} counts for n={self.n}, got {counts.shape}"
            )
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(np.asarray(counts, dtype=np.float64))
            if not np.array_equal(rounded, np.asarray(counts, dtype=np.float64)):
                raise ValueError("counts must be integers")
            counts = rounded.astype(np.int64)
        counts = counts.astype(np.int64)
        if (counts < 0).any():
            raise ValueError("counts must be nonnegative")
        if counts.sum() == 0:
            raise ValueError("counts must not be all zero")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "total", int(counts.sum()))

    @property
    def is_generic(self) -> bool:
        return bool((self.counts >= 1).all())

    def zero_pairs(self) -> list[tuple[int, int]]:
        tab = pair_table(self.n)
        return [tab.pairs[t] for t in np.flatnonzero(self.counts == 0)]


# ---------------------------------------------------------------------------
# Minors and domain membership
# ---------------------------------------------------------------------------

def plucker(m: MatrixParam) -> PlueckerVector:
    """All 2x2 minors of the gauge-fixed matrix, plus their square sum."""
    p = minors_batch(m.xs[None, :], m.ys[None, :], m.n)[0]
    return PlueckerVector(n=m.n, minors=p, square_sum=complex_or_float(np.sum(p * p)))


def complex_or_float(v):
    v = complex(v)
    return v.real if v.imag == 0.0 else v


def in_domain(m: MatrixParam, zero_tol: float = DEFAULT_ZERO_TOL) -> bool:
    """True iff every minor and the square sum clear the relative tolerance.

    Minors are compared against ``zero_tol * max|minor|`` and the square
    sum against ``zero_tol * max|minor|**2`` (it is quadratic in the
    minors).
    """
    p = minors_batch(m.xs[None, :], m.ys[None, :], m.n)[0]
    mag = np.abs(p)
    scale = mag.max()
    if not np.isfinite(scale):
        return False
    q = np.sum(p * p)
    return bool(mag.min() > zero_tol * scale and abs(q) > zero_tol * scale * scale)


def _require_domain(m: MatrixParam, zero_tol: float = DEFAULT_ZERO_TOL) -> None:
    if not in_domain(m, zero_tol):
        raise DomainError(
            f"matrix block lies outside the open domain (a minor or the "
            f"square sum vanishes at relative tolerance {zero_tol:g})"
        )


# ---------------------------------------------------------------------------
# Log-likelihoods
# ---------------------------------------------------------------------------

def log_likelihood_parametric(m: MatrixParam, u: DataCounts) -> float | complex:
    """Log-likelihood of the data at a subspace, in squared-minor form.

    Real blocks give a real value.  Complex blocks use the principal
    branch, so the value is only meaningful modulo 2*pi*i; gradients are
    branch-free and should be preferred for any cross-point comparison.
    """
    if u.n != m.n:
        raise ValueError(f"data is for n={u.n}, block is for n={m.n}")
    _require_domain(m)
    p = minors_batch(m.xs[None, :], m.ys[None, :], m.n)[0]
    q = np.sum(p * p)
    counts = u.counts
    if m.is_real:
        return float(2.0 * np.sum(counts * np.log(np.abs(p))) - u.total * math.log(q.real))
    return complex(np.sum(counts * np.log(p * p)) - u.total * np.log(q))


def log_likelihood_implicit(q: np.ndarray, u: DataCounts) -> float:
    """Log-likelihood at a point of the probability cone (scale-invariant)."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (num_pairs(u.n),):
        raise ValueError(f"expected {num_pairs(u.n)} coordinates, got {q.shape}")
    if (q <= 0).any():
        raise DomainError("implicit coordinates must be strictly positive")
    return float(np.sum(u.counts * np.log(q)) - u.total * math.log(q.sum()))


# ---------------------------------------------------------------------------
# Batched derivative kernels (shared with the solver)
# ---------------------------------------------------------------------------

def minor_derivatives(xs: np.ndarray, ys: np.ndarray, n: int) -> np.ndarray:
    """First derivatives of every minor w.r.t. the unknowns.

    Returns D of shape (B, P, m) with D[b, t, a] = d minor_t / d z_a at
    block b, unknown order (x_3..x_n, y_3..y_n).
    """
    tab = pair_table(n)
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    B, k = xs.shape
    m = 2 * k
    D = np.zeros((B, tab.n_pairs, m), dtype=np.result_type(xs, ys))
    D[:, tab.rows_1i, k + tab.cols_1i] = 1.0
    D[:, tab.rows_2i, tab.cols_2i] = -1.0
    if tab.rows_ij.size:
        ci, cj, rij = tab.cols_i, tab.cols_j, tab.rows_ij
        D[:, rij, ci] = ys[:, cj]
        D[:, rij, k + ci] = -xs[:, cj]
        D[:, rij, cj] = -ys[:, ci]
        D[:, rij, k + cj] = xs[:, ci]
    return D


@lru_cache(maxsize=None)
def second_derivative_tensor(n: int) -> np.ndarray:
    """Constant second derivatives of the minors: (P, m, m)."""
    tab = pair_table(n)
    k = n - 2
    E = np.zeros((tab.n_pairs, 2 * k, 2 * k))
    for t, a, b in zip(tab.rows_ij, tab.cols_i, tab.cols_j):
        E[t, a, k + b] = 1.0   # d2 p / dx_i dy_j
        E[t, k + b, a] = 1.0
        E[t, k + a, b] = -1.0  # d2 p / dy_i dx_j
        E[t, b, k + a] = -1.0
    E.setflags(write=False)
    return E


def _as_batch_params(u: np.ndarray, B: int, P: int) -> np.ndarray:
    u = np.asarray(u)
    if u.shape == (P,):
        return np.broadcast_to(u, (B, P))
    if u.shape == (B, P):
        return u
    raise ValueError(f"parameter vector must have shape ({P},) or ({B},{P}), got {u.shape}")


def gradient_batch(xs: np.ndarray, ys: np.ndarray, u: np.ndarray, n: int) -> np.ndarray:
    """Analytic gradient of the log-likelihood, batched: (B, m).

    The gradient is a rational function, linear in the data vector, so
    arbitrary complex ``u`` are accepted; passing a difference of data
    vectors evaluates the corresponding coefficient-matrix product.
    """
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    p = minors_batch(xs, ys, n)
    D = minor_derivatives(xs, ys, n)
    u = _as_batch_params(u, p.shape[0], p.shape[1])
    q = np.sum(p * p, axis=1)
    total = np.sum(u, axis=1)
    w = 2.0 * np.einsum("bt,bta->ba", p, D) / q[:, None]
    return 2.0 * np.einsum("bt,bta->ba", u / p, D) - total[:, None] * w


def jacobian_batch(xs: np.ndarray, ys: np.ndarray, u: np.ndarray, n: int) -> np.ndarray:
    """Derivative of the gradient w.r.t. the unknowns, batched: (B, m, m).

    For real blocks and data this is the (exact) Hessian of the
    log-likelihood; the solver uses it as the Newton/Davidenko matrix.
    """
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    p = minors_batch(xs, ys, n)
    D = minor_derivatives(xs, ys, n)
    E = second_derivative_tensor(n)
    u = _as_batch_params(u, p.shape[0], p.shape[1])
    q = np.sum(p * p, axis=1)
    total = np.sum(u, axis=1)
    r = 2.0 * u / p
    w = 2.0 * np.einsum("bt,bta->ba", p, D) / q[:, None]
    J = np.einsum("bt,tac->bac", r, E)
    J -= np.einsum("bt,bta,btc->bac", r / p, D, D)
    J -= (2.0 * total / q)[:, None, None] * (
        np.einsum("bta,btc->bac", D, D) + np.einsum("bt,tac->bac", p, E)
    )
    J += total[:, None, None] * np.einsum("ba,bc->bac", w, w)
    return J


def coefficient_matrix(xs: np.ndarray, ys: np.ndarray, n: int) -> np.ndarray:
    """Matrix A with gradient = A @ u, batched: (B, m, P)."""
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    p = minors_batch(xs, ys, n)
    D = minor_derivatives(xs, ys, n)
    q = np.sum(p * p, axis=1)
    w = 2.0 * np.einsum("bt,bta->ba", p, D) / q[:, None]
    return 2.0 * np.swapaxes(D, 1, 2) / p[:, None, :] - w[:, :, None]


def scaled_residual_batch(
    xs: np.ndarray, ys: np.ndarray, u: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and its componentwise backward-error norm, batched.

    The scaled norm divides each gradient component by the total
    magnitude of the terms that were summed to produce it, so a value
    near machine precision means the point is a numerically exact
    critical point regardless of the size of the data.
    """
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    A = coefficient_matrix(xs, ys, n)
    u = _as_batch_params(u, xs.shape[0], A.shape[2])
    g = np.einsum("bap,bp->ba", A, u)
    denom = np.einsum("bap,bp->ba", np.abs(A), np.abs(u))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(g) / denom
    rel = np.where(denom > 0, rel, np.inf)
    return g, rel.max(axis=1)


def gradient(m: MatrixParam, u: DataCounts) -> np.ndarray:
    """Analytic gradient at one block, ordered (x_3..x_n, y_3..y_n)."""
    if u.n != m.n:
        raise ValueError(f"data is for n={u.n}, block is for n={m.n}")
    _require_domain(m)
    return gradient_batch(m.xs[None, :], m.ys[None, :], u.counts.astype(m.xs.dtype), m.n)[0]


def hessian(m: MatrixParam, u: DataCounts, step_scale: float = 1e-5) -> np.ndarray:
    """Symmetrized central-difference Hessian of the log-likelihood.

    Differences the analytic gradient with step h = step_scale * (1 +
    max|entry|) and returns (H + H^T) / 2.  Real blocks only; the result
    backs the local-maximality classification, where the finite-difference
    error is far below the eigenvalue scale at nondegenerate critical
    points.
    """
    if not m.is_real:
        raise DomainError("Hessian classification is defined for real blocks only")
    if u.n != m.n:
        raise ValueError(f"data is for n={u.n}, block is for n={m.n}")
    _require_domain(m)
    z = m.flat().real
    k = m.n - 2
    h = step_scale * (1.0 + np.abs(z).max())
    dim = 2 * k
    Z = np.repeat(z[None, :], 2 * dim, axis=0)
    for a in range(dim):
        Z[2 * a, a] += h
        Z[2 * a + 1, a] -= h
    G = gradient_batch(Z[:, :k], Z[:, k:], u.counts.astype(np.float64), m.n)
    H = (G[0::2, :] - G[1::2, :]) / (2.0 * h)
    return (H + H.T) / 2.0


# ---------------------------------------------------------------------------
# General-rank likelihood (evaluation only)
# ---------------------------------------------------------------------------

def _maximal_minors(mat: np.ndarray) -> np.ndarray:
    d, n = mat.shape
    subsets = list(combinations(range(n), d))
    cols = mat[:, np.asarray(subsets)]          # (d, N, d)
    return np.linalg.det(np.moveaxis(cols, 1, 0))


def log_likelihood_general_d(mat: np.ndarray, u: np.ndarray) -> float | complex:
    """Log-likelihood for a rank-d subspace given counts over d-subsets.

    ``mat`` is a d x n matrix whose first d columns are the identity
    (the same gauge as the rank-2 block); ``u`` has one count per
    d-subset of columns in lexicographic order.  Evaluation only: no
    critical-point machinery exists for d >= 3.
    """
    mat = np.asarray(mat)
    d, n = mat.shape
    if not 2 <= d < n:
        raise ValueError(f"need 2 <= d < n, got d={d}, n={n}")
    if not np.allclose(mat[:, :d], np.eye(d), atol=1e-12):
        raise ValueError("matrix must carry a d x d identity prefix")
    u = np.asarray(u)
    dets = _maximal_minors(mat)
    if u.shape != dets.shape:
        raise ValueError(f"expected {dets.shape[0]} counts, got {u.shape}")
    mags = np.abs(dets)
    if mags.min() <= DEFAULT_ZERO_TOL * mags.max():
        raise DomainError("a maximal minor vanishes")
    total = u.sum()
    square_sum = np.sum(dets * dets)
    if not np.iscomplexobj(mat):
        return float(2.0 * np.sum(u * np.log(mags)) - total * math.log(square_sum.real))
    return complex(np.sum(u * np.log(dets * dets)) - total * np.log(square_sum))


def gradient_general_d(mat: np.ndarray, u: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the general-rank likelihood.

    Returns the d x (n - d) array of partials w.r.t. the free block.
    """
    mat = np.asarray(mat, dtype=np.float64).copy()
    d, n = mat.shape
    out = np.zeros((d, n - d))
    for r in range(d):
        for c in range(d, n):
            keep = mat[r, c]
            mat[r, c] = keep + step
            hi = log_likelihood_general_d(mat, u)
            mat[r, c] = keep - step
            lo = log_likelihood_general_d(mat, u)
            mat[r, c] = keep
            out[r, c - d] = (hi - lo) / (2.0 * step)
    return out


# ---------------------------------------------------------------------------
# One-column extension quadric (used by the geometry self-checks)
# ---------------------------------------------------------------------------

def appended_column_quadric(m: MatrixParam) -> np.ndarray:
    """Quadratic form of the square sum after appending one more column.

    Appending a column (x, y) turns the square sum into a quadratic form
    in (1, x, y); this returns its symmetric 3x3 matrix.  Its determinant
    equals the square of the current square sum, which the test suite
    verifies as an exact-identity check on the minor algebra.
    """
    p = plucker(m)
    sx = np.sum(m.xs * m.xs)
    sy = np.sum(m.ys * m.ys)
    sxy = np.sum(m.xs * m.ys)
    return np.array(
        [
            [p.square_sum, 0.0, 0.0],
            [0.0, 1.0 + sy, -sxy],
            [0.0, -sxy, 1.0 + sx],
        ]
    )
