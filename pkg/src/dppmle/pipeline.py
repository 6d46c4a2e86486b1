"""End-to-end runs: monodromy warmstart, homotopy to data, classification.

A warmstart (complex start data plus its full solution set) is the
expensive artifact; everything downstream reuses it, so batch consumers
build one per n and pass it around.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import analysis, dpp, model, solver


@dataclass(frozen=True)
class Warmstart:
    """Start data and its complete critical-point set, ready to re-track."""

    n: int
    u0: np.ndarray
    start: solver.SolutionSet

    @property
    def complete(self) -> bool:
        return self.start.complete

    def as_pair(self) -> tuple[np.ndarray, solver.SolutionSet]:
        return self.u0, self.start


@dataclass(frozen=True)
class SolveRun:
    """Everything one estimation run produced."""

    n: int
    u: model.DataCounts
    solutions: solver.SolutionSet
    mle: analysis.MleResult | None
    timings_ms: dict[str, float]


def build_warmstart(
    n: int,
    seed: int = 42,
    cfg: solver.TrackerConfig | None = None,
    target_count: int | None = None,
) -> Warmstart:
    """Populate the solution set at random complex start data by monodromy."""
    S = solver.GradientSystem(n)
    u0, start = solver.monodromy_solve(S, seed=seed, target_count=target_count, cfg=cfg)
    return Warmstart(n=n, u0=u0, start=start)


def run_solve(
    u: model.DataCounts,
    seed: int = 42,
    cfg: solver.TrackerConfig | None = None,
    warmstart: Warmstart | None = None,
    workers: int = 1,
    target_count: int | None = None,
) -> SolveRun:
    """Full pipeline: warmstart (reused if given), homotopy, Hessians, MLE.

    Non-generic data (zero counts) still runs but warns: the reality and
    count guarantees assume strictly positive counts.  When no real
    critical point survives, the MLE slot is None rather than an error.
    """
    cfg = cfg or solver.TrackerConfig()
    if not u.is_generic:
        warnings.warn(
            f"data has {len(u.zero_pairs())} zero counts; count and reality "
            "guarantees hold for strictly positive data only",
            stacklevel=2,
        )
    S = solver.GradientSystem(u.n)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    if warmstart is None:
        warmstart = build_warmstart(u.n, seed=seed, cfg=cfg, target_count=target_count)
    timings["monodromy_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    sset = solver.solve_at(
        S, u.counts.astype(np.float64), warmstart.as_pair(), cfg, seed=seed, workers=workers
    )
    timings["tracking_ms"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    sset = analysis.classify_hessians(sset, u)
    try:
        mle = analysis.select_mle(sset, u)
    except analysis.NoRealSolutionError:
        mle = None
    timings["classify_ms"] = 1e3 * (time.perf_counter() - t0)
    timings["total_ms"] = sum(timings.values())

    return SolveRun(n=u.n, u=u, solutions=sset, mle=mle, timings_ms=timings)


def run_verify(
    n: int,
    seed: int = 42,
    cfg: solver.TrackerConfig | None = None,
    max_count: int = 1000,
    workers: int = 1,
    warmstart: Warmstart | None = None,
) -> tuple[SolveRun, analysis.VerificationReport]:
    """Solve at seeded random data and check all structural claims."""
    u = dpp.random_counts(n, max_count, seed)
    run = run_solve(u, seed=seed, cfg=cfg, warmstart=warmstart, workers=workers)
    report = analysis.verify_counts(n, u, run.solutions, region_seed=seed)
    return run, report
