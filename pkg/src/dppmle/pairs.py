"""Lexicographic indexing of 2-subsets of {1..n}.

Every vector indexed by pairs (counts, minors, probabilities) uses the
lexicographic order (1,2), (1,3), ..., (1,n), (2,3), ..., (n-1,n) fixed
here, and every file format uses the string keys produced by
:func:`pair_key`.  Nothing else in the package is allowed to invent its
own pair order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_list(n: int) -> list[tuple[int, int]]:
    """All pairs (i, j) with 1 <= i < j <= n in lexicographic order."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    return list(combinations(range(1, n + 1), 2))


def pair_key(i: int, j: int, n: int) -> str:
    """String key for a pair: '13' for small n, '1,13' once labels reach 10."""
    if not 1 <= i < j <= n:
        raise ValueError(f"bad pair ({i},{j}) for n={n}")
    return f"{i},{j}" if n >= 10 else f"{i}{j}"


def parse_pair_key(key: str, n: int) -> tuple[int, int]:
    """Inverse of :func:`pair_key`; raises ValueError on malformed keys."""
    if "," in key:
        a, _, b = key.partition(",")
        i, j = int(a), int(b)
    elif len(key) == 2 and key.isdigit():
        i, j = int(key[0]), int(key[1])
    else:
        raise ValueError(f"malformed pair key {key!r}")
    if not 1 <= i < j <= n:
        raise ValueError(f"pair key {key!r} out of range for n={n}")
    return i, j


@dataclass(frozen=True)
class PairTable:
    """Precomputed index arrays for vectorized minor evaluation.

    Unknowns of the gauge-fixed 2 x (n-2) block are ordered
    (x_3..x_n, y_3..y_n); ``col`` indices below are 0-based positions
    within the x-block (the y-block sits at offset ``n - 2``).
    """

    n: int
    pairs: tuple[tuple[int, int], ...]
    index: dict[tuple[int, int], int]
    # pairs (1,i): minor equals y_i
    rows_1i: np.ndarray  # pair positions
    cols_1i: np.ndarray  # x-block column of item i
    # pairs (2,i): minor equals -x_i
    rows_2i: np.ndarray
    cols_2i: np.ndarray
    # pairs (i,j) with 3 <= i < j: minor equals x_i y_j - y_i x_j
    rows_ij: np.ndarray
    cols_i: np.ndarray
    cols_j: np.ndarray

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def n_unknowns(self) -> int:
        return 2 * (self.n - 2)


@lru_cache(maxsize=None)
def pair_table(n: int) -> PairTable:
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    pairs = tuple(pair_list(n))
    index = {pq: t for t, pq in enumerate(pairs)}
    r1, c1, r2, c2, rij, ci, cj = [], [], [], [], [], [], []
    for t, (i, j) in enumerate(pairs):
        if i == 1 and j == 2:
            continue
        if i == 1:
            r1.append(t)
            c1.append(j - 3)
        elif i == 2:
            r2.append(t)
            c2.append(j - 3)
        else:
            rij.append(t)
            ci.append(i - 3)
            cj.append(j - 3)
    as_idx = lambda a: np.asarray(a, dtype=np.intp)
    return PairTable(
        n=n,
        pairs=pairs,
        index=index,
        rows_1i=as_idx(r1),
        cols_1i=as_idx(c1),
        rows_2i=as_idx(r2),
        cols_2i=as_idx(c2),
        rows_ij=as_idx(rij),
        cols_i=as_idx(ci),
        cols_j=as_idx(cj),
    )


def minors_batch(xs: np.ndarray, ys: np.ndarray, n: int) -> np.ndarray:
    """2x2 minors of [I_2 | block] for a batch of blocks.

    xs, ys: arrays of shape (B, n-2).  Returns (B, C(n,2)) in pair order.
    """
    tab = pair_table(n)
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    out = np.empty((xs.shape[0], tab.n_pairs), dtype=np.result_type(xs, ys))
    out[:, 0] = 1.0
    out[:, tab.rows_1i] = ys[:, tab.cols_1i]
    out[:, tab.rows_2i] = -xs[:, tab.cols_2i]
    if tab.rows_ij.size:
        out[:, tab.rows_ij] = (
            xs[:, tab.cols_i] * ys[:, tab.cols_j]
            - ys[:, tab.cols_i] * xs[:, tab.cols_j]
        )
    return out
