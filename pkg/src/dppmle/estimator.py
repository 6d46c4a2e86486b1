"""Scikit-learn style estimator around the exact-MLE pipeline.

The estimator consumes observed pairs (or ready-made counts), finds the
global maximum-likelihood rank-2 projection kernel by complete critical
point enumeration, and then behaves like a fitted density model: per
sample log-probabilities, total score, and sampling.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted, check_random_state

from . import analysis, dpp, model, pipeline, solver
from .exceptions import IncompleteSetError
from .pairs import num_pairs, pair_list, pair_table


class ProjectionDppMle(DensityMixin, BaseEstimator):
    """Exact maximum-likelihood estimator for rank-2 projection DPPs.

    Parameters
    ----------
    n_items : int or None
        Ground-set size.  Inferred from the data when None: the largest
        item index seen in pair samples, or the unique size matching a
        count vector's length.
    seed : int
        Master seed for the monodromy start system and homotopy detours.
    workers : int
        Worker threads for path tracking.
    deterministic : bool
        Force single-worker tracking (reproducibility mode).
    stall_limit, dedup_tol, reality_tol : numerical knobs
        Forwarded into the tracker configuration.

    Attributes
    ----------
    n_items_ : int
        Ground-set size actually used.
    counts_ : DataCounts
        The per-pair counts the model was fitted on.
    solutions_ : SolutionSet
        Every critical point of the log-likelihood, classified.
    mle_ : MleResult
        The argmax and its implicit probability vector.
    probs_ : ndarray of shape (n_items_ choose 2,)
        Fitted pair probabilities in lexicographic pair order.
    kernel_ : ProjectionKernel
        The fitted rank-2 projection kernel.
    log_likelihood_ : float
        Log-likelihood of the training counts at the MLE.

    Examples
    --------
    >>> est = ProjectionDppMle(seed=0)
    >>> X = [[1, 2], [1, 3], [2, 3], [1, 2]]
    >>> probs = est.fit(X).probs_
    """

    def __init__(
        self,
        n_items: int | None = None,
        seed: int = 42,
        workers: int = 1,
        deterministic: bool = False,
        stall_limit: int = 30,
        dedup_tol: float = 1e-6,
        reality_tol: float = 1e-8,
    ):
        self.n_items = n_items
        self.seed = seed
        self.workers = workers
        self.deterministic = deterministic
        self.stall_limit = stall_limit
        self.dedup_tol = dedup_tol
        self.reality_tol = reality_tol

    # -- data wrangling -----------------------------------------------------

    def _as_counts(self, X) -> model.DataCounts:
        if isinstance(X, model.DataCounts):
            if self.n_items is not None and X.n != self.n_items:
                raise ValueError(f"n_items={self.n_items} but counts are for n={X.n}")
            return X
        if isinstance(X, dict):
            from .serialize import counts_from_dict

            n = self.n_items
            if n is None:
                items = set()
                for key in X:
                    parts = key.split(",") if "," in key else list(key)
                    items.update(int(p) for p in parts)
                n = max(items)
            return counts_from_dict({"n": n, "u": {k: int(v) for k, v in X.items()}}, where="X")
        arr = np.asarray(X)
        if arr.ndim == 1:
            if self.n_items is None:
                for cand in range(3, 50):
                    if num_pairs(cand) == arr.size:
                        break
                else:
                    raise ValueError(f"a 1-d X of length {arr.size} is not a pair count vector")
                n = cand
            else:
                n = self.n_items
            return model.DataCounts(n=n, counts=arr)
        if arr.ndim == 2 and arr.shape[1] == 2:
            return self._pairs_to_counts(arr)
        raise ValueError(
            "X must be observed pairs of shape (n_samples, 2), a count vector, "
            f"a pair-count dict, or DataCounts; got array of shape {arr.shape}"
        )

    def _pairs_to_counts(self, arr: np.ndarray) -> model.DataCounts:
        if not np.issubdtype(arr.dtype, np.number):
            raise ValueError("pair samples must be numeric item indices")
        pairs = np.asarray(np.rint(arr), dtype=np.int64)
        if not np.array_equal(pairs, arr):
            raise ValueError("pair samples must be integer item indices")
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        if (lo < 1).any():
            raise ValueError("item indices are 1-based; found an index below 1")
        if (lo == hi).any():
            raise ValueError("observed sets must contain two distinct items")
        n = self.n_items if self.n_items is not None else int(hi.max())
        if n < 3:
            raise ValueError(f"need at least 3 items, inferred n={n}")
        if (hi > n).any():
            raise ValueError(f"item index {int(hi.max())} exceeds n_items={n}")
        tab = pair_table(n)
        counts = np.zeros(num_pairs(n), dtype=np.int64)
        for i, j in zip(lo, hi):
            counts[tab.index[(int(i), int(j))]] += 1
        return model.DataCounts(n=n, counts=counts)

    # -- fitting ------------------------------------------------------------

    def fit(self, X, y=None):
        """Fit the exact MLE by full critical-point enumeration.

        X may be observed pairs of shape (n_samples, 2) with 1-based item
        indices, a count vector in lexicographic pair order, a dict of
        pair-key counts, or a DataCounts instance.
        """
        counts = self._as_counts(X)
        cfg = solver.TrackerConfig(
            stall_limit=self.stall_limit,
            dedup_tol=self.dedup_tol,
            reality_tol=self.reality_tol,
        )
        workers = 1 if self.deterministic else max(1, self.workers)
        run = pipeline.run_solve(counts, seed=self.seed, cfg=cfg, workers=workers)
        if not run.solutions.complete:
            raise IncompleteSetError(
                f"found {len(run.solutions)} of {run.solutions.target_count} critical "
                "points; refusing to report a possibly non-global optimum "
                "(raise stall_limit or change seed)"
            )
        if run.mle is None:
            raise analysis.NoRealSolutionError(
                "no real critical point found; cannot produce an MLE"
            )
        self.n_items_ = counts.n
        self.counts_ = counts
        self.solutions_ = run.solutions
        self.mle_ = run.mle
        self.probs_ = run.mle.implicit.q
        self.log_likelihood_ = run.mle.loglik
        z = run.mle.solution.point.real
        k = counts.n - 2
        self.matrix_ = model.MatrixParam(n=counts.n, xs=z[:k], ys=z[k:])
        self.kernel_ = dpp.projection_from_rows(self.matrix_.full_matrix())
        return self

    # -- fitted behavior ----------------------------------------------------

    def _pair_indices(self, X) -> np.ndarray:
        arr = np.asarray(X)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"expected pairs of shape (n_samples, 2), got {arr.shape}")
        pairs = np.asarray(np.rint(arr), dtype=np.int64)
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        if (lo < 1).any() or (hi > self.n_items_).any() or (lo == hi).any():
            raise ValueError("pairs must hold two distinct 1-based indices within n_items_")
        tab = pair_table(self.n_items_)
        return np.asarray([tab.index[(int(i), int(j))] for i, j in zip(lo, hi)])

    def score_samples(self, X) -> np.ndarray:
        """Log-probability of each observed pair under the fitted kernel."""
        check_is_fitted(self, "probs_")
        return np.log(self.probs_[self._pair_indices(X)])

    def score(self, X, y=None) -> float:
        """Total log-likelihood of the pairs in X."""
        return float(self.score_samples(X).sum())

    def sample(self, n_samples: int = 1, random_state=None) -> np.ndarray:
        """Draw pairs from the fitted distribution, shape (n_samples, 2)."""
        check_is_fitted(self, "probs_")
        rs = check_random_state(random_state)
        if not isinstance(n_samples, numbers.Integral) or n_samples < 1:
            raise ValueError(f"n_samples must be a positive integer, got {n_samples!r}")
        cdf = np.cumsum(self.probs_)
        cdf[-1] = 1.0
        draws = np.searchsorted(cdf, rs.random_sample(int(n_samples)), side="right")
        pairs = np.asarray(pair_list(self.n_items_), dtype=np.int64)
        return pairs[draws]
