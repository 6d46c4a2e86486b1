"""Projection kernels, their subset distributions, and synthetic data.

The bridge this module implements: for a projection kernel built from the
rows of a full-rank d x n matrix, the probability of each d-subset of
columns equals the squared maximal minor over the sum of all squared
maximal minors.  That identity is what lets the estimator work entirely
in minor coordinates and convert back to kernels at the end.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .exceptions import KernelError, RankError
from .model import DataCounts
from .pairs import num_pairs

NEGATIVE_MINOR_TOL = 1e-10


@dataclass(frozen=True)
class ProjectionKernel:
    """Real symmetric idempotent n x n matrix of integer rank d."""

    n: int
    d: int
    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.shape != (self.n, self.n):
            raise KernelError(f"kernel must be {self.n}x{self.n}, got {P.shape}")
        if np.abs(P - P.T).max() > 1e-12:
            raise KernelError("kernel is not symmetric to 1e-12")
        if np.abs(P @ P - P).max() > 1e-10:
            raise KernelError("kernel is not idempotent to 1e-10")
        tr = float(np.trace(P))
        if abs(tr - self.d) > 1e-10:
            raise KernelError(f"trace {tr!r} does not match rank d={self.d} to 1e-10")
        P = (P + P.T) / 2.0
        P.setflags(write=False)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True)
class DppDistribution:
    """Probabilities of all d-subsets of {1..n}, lexicographic order."""

    n: int
    d: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        expected = _n_subsets(self.n, self.d)
        if probs.shape != (expected,):
            raise ValueError(f"expected {expected} probabilities, got {probs.shape}")
        if (probs < 0).any():
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 to 1e-12")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def subsets(self) -> list[tuple[int, ...]]:
        return [tuple(c + 1 for c in s) for s in combinations(range(self.n), self.d)]


def _n_subsets(n: int, d: int) -> int:
    out = 1
    for i in range(d):
        out = out * (n - i) // (i + 1)
    return out


def projection_from_rows(M: np.ndarray) -> ProjectionKernel:
    """Orthogonal projection onto the row span of a full-rank d x n matrix."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] >= M.shape[1]:
        raise RankError(f"need a wide d x n matrix with d < n, got shape {M.shape}")
    d, n = M.shape
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise RankError(
            f"matrix rows are rank-deficient (singular values {s[0]:.3e} .. {s[-1]:.3e})"
        )
    P = M.T @ np.linalg.solve(M @ M.T, M)
    P = (P + P.T) / 2.0
    return ProjectionKernel(n=n, d=d, P=P)


def dpp_distribution(P: ProjectionKernel) -> DppDistribution:
    """Principal-minor probabilities of all rank-many subsets."""
    idx = np.asarray(list(combinations(range(P.n), P.d)))        # (N, d)
    blocks = P.P[idx[:, :, None], idx[:, None, :]]               # (N, d, d)
    probs = np.linalg.det(blocks)
    if probs.min() < -NEGATIVE_MINOR_TOL:
        raise KernelError(
            f"principal minor {probs.min():.3e} is negative beyond {-NEGATIVE_MINOR_TOL:g}; "
            "kernel is not a valid projection"
        )
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()   # exact-1 normalization; the raw sum is 1 to ~1e-14
    return DppDistribution(n=P.n, d=P.d, probs=probs)


def sample_counts(P: ProjectionKernel, N: int, seed: int) -> DataCounts:
    """Counts of N i.i.d. draws from a rank-2 projection kernel.

    Uses inverse-CDF categorical sampling over all pairs with a seeded
    generator.  Pairs that were never drawn leave the result non-generic;
    a warning lists how many.
    """
    if P.d != 2:
        raise ValueError(f"sampling is implemented for rank 2 only, got d={P.d}")
    if N < 1:
        raise ValueError(f"need N >= 1 draws, got {N}")
    dist = dpp_distribution(P)
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    rng = np.random.default_rng(seed)
    draws = np.searchsorted(cdf, rng.random(N), side="right")
    counts = np.bincount(draws, minlength=num_pairs(P.n)).astype(np.int64)
    out = DataCounts(n=P.n, counts=counts)
    if not out.is_generic:
        warnings.warn(
            f"{len(out.zero_pairs())} of {num_pairs(P.n)} pairs were never drawn; "
            "counts are non-generic",
            stacklevel=2,
        )
    return out


def random_counts(n: int, max_count: int, seed: int) -> DataCounts:
    """Counts drawn uniformly from {1..max_count} for every pair, seeded."""
    if max_count < 1:
        raise ValueError(f"need max_count >= 1, got {max_count}")
    rng = np.random.default_rng(seed)
    counts = rng.integers(1, max_count + 1, size=num_pairs(n), dtype=np.int64)
    return DataCounts(n=n, counts=counts)
