"""Statistical conclusions: MLE selection, implicit images, sign regions.

Parametric critical points are 2^(n-1)-to-1 over the implicit
(squared-minor) probability points, so the estimator's answer lives
here: collapse solutions to implicit images, pick the likelihood argmax,
certify local maximality through Hessian eigenvalues, and cross-check
the counts against the combinatorial region enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import permutations

import numpy as np

from .exceptions import DegenerateInstanceError, DomainError, NoRealSolutionError
from . import model
from .pairs import minors_batch, num_pairs, pair_table
from .solver import Solution, SolutionSet, expected_count, ml_degree

HESSIAN_ZERO_TOL = 1e-7
IMPLICIT_DEDUP_TOL = 1e-8
LOGLIK_TIE_TOL = 1e-9


@dataclass(frozen=True)
class ImplicitPoint:
    """A probability vector on pairs lying on the squared-minor model."""

    n: int
    q: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=np.float64))
        if q.shape != (num_pairs(self.n),):
            raise ValueError(f"expected {num_pairs(self.n)} coordinates, got {q.shape}")
        if (q <= 0).any():
            raise ValueError("implicit coordinates must be strictly positive")
        if abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("implicit coordinates must sum to 1 to 1e-12")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def tv_distance(self, other: "ImplicitPoint") -> float:
        return 0.5 * float(np.abs(self.q - other.q).sum())


@dataclass(frozen=True)
class SignVector:
    """Signs of all minors except the leading one (which is fixed at +1)."""

    n: int
    s: tuple[int, ...]

    def __post_init__(self):
        if len(self.s) != num_pairs(self.n) - 1:
            raise ValueError(
                f"expected {num_pairs(self.n) - 1} signs for n={self.n}, got {len(self.s)}"
            )
        if any(v not in (-1, 1) for v in self.s):
            raise ValueError("sign entries must be +1 or -1")


@dataclass(frozen=True)
class MleResult:
    """The likelihood argmax over the computed critical points."""

    implicit: ImplicitPoint
    solution: Solution
    loglik: float
    tied: tuple[ImplicitPoint, ...] = ()

    @property
    def has_ties(self) -> bool:
        return len(self.tied) > 0


@dataclass(frozen=True)
class VerificationReport:
    """Pass/fail ledger for the count, reality, fiber, region, and Hessian checks."""

    n: int
    count: int
    count_real: int
    implicit_count: int
    region_matched: bool
    checks: tuple[tuple[str, bool, str], ...]

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failures(self) -> list[str]:
        return [f"{name}: {detail}" for name, ok, detail in self.checks if not ok]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "passed": self.passed,
            "count": self.count,
            "count_real": self.count_real,
            "implicit_count": self.implicit_count,
            "region_matched": self.region_matched,
            "checks": [
                {"name": name, "passed": ok, "detail": detail}
                for name, ok, detail in self.checks
            ],
        }


# ---------------------------------------------------------------------------
# Implicit projection
# ---------------------------------------------------------------------------

def to_implicit(sol: Solution, n: int) -> ImplicitPoint:
    """Squared minors of a real solution, normalized to a probability vector."""
    if not sol.is_real:
        raise DomainError("only real solutions project to probability vectors")
    z = sol.point.real
    k = n - 2
    p = minors_batch(z[None, :k], z[None, k:], n)[0]
    q = p * p
    return ImplicitPoint(n=n, q=q / q.sum())


def implicit_images(
    solutions: SolutionSet, tol: float = IMPLICIT_DEDUP_TOL
) -> list[tuple[ImplicitPoint, list[int]]]:
    """Group real solutions by implicit image (total-variation dedup).

    Returns (image, indices into solutions.solutions) pairs, in first-seen
    order of the deterministic solution ordering.
    """
    groups: list[tuple[ImplicitPoint, list[int]]] = []
    for i, sol in enumerate(solutions):
        if not sol.is_real:
            continue
        q = to_implicit(sol, solutions.n)
        for img, members in groups:
            if img.tv_distance(q) <= tol:
                members.append(i)
                break
        else:
            groups.append((q, [i]))
    return groups


def select_mle(solutions: SolutionSet, u: model.DataCounts) -> MleResult:
    """Argmax of the log-likelihood over the real critical points.

    Ties are detected between distinct implicit images (solutions above
    one image share their value structurally and never count as ties);
    any image within the tie tolerance of the best is reported, not
    silently dropped.
    """
    if u.n != solutions.n:
        raise ValueError(f"data is for n={u.n}, solutions are for n={solutions.n}")
    groups = implicit_images(solutions)
    if not groups:
        raise NoRealSolutionError(
            "no real critical points to select from (non-generic data or a failed run)"
        )
    sols = solutions.solutions
    scored = []
    for img, members in groups:
        best = max(members, key=lambda i: sols[i].loglik)
        scored.append((sols[best].loglik, img, sols[best]))
    scored.sort(key=lambda t: -t[0])
    top_ll, top_img, top_sol = scored[0]
    tied = tuple(img for ll, img, _ in scored[1:] if top_ll - ll <= LOGLIK_TIE_TOL)
    return MleResult(implicit=top_img, solution=top_sol, loglik=float(top_ll), tied=tied)


# ---------------------------------------------------------------------------
# Hessian classification
# ---------------------------------------------------------------------------

def classify_hessians(
    solutions: SolutionSet, u: model.DataCounts, step_scale: float = 1e-5
) -> SolutionSet:
    """Attach Hessian classes to all real solutions (complex stay unknown).

    Builds the symmetrized central-difference Hessian of every real
    solution in one batched gradient evaluation, then classifies by
    eigenvalue signs: all below -1e-7 means a strict local maximum, all
    above +1e-7 a minimum, a clean mix a saddle, and anything within
    1e-7 of zero stays unknown.
    """
    real_idx = [i for i, s in enumerate(solutions) if s.is_real]
    if not real_idx:
        return solutions
    m = 2 * (solutions.n - 2)
    k = solutions.n - 2
    Z = np.array([solutions.solutions[i].point.real for i in real_idx])
    R = Z.shape[0]
    h = step_scale * (1.0 + np.abs(Z).max(axis=1))                  # (R,)

    shifts = np.repeat(Z[:, None, :], 2 * m, axis=1)                # (R, 2m, m)
    for a in range(m):
        shifts[:, 2 * a, a] += h
        shifts[:, 2 * a + 1, a] -= h
    flat = shifts.reshape(R * 2 * m, m)
    G = model.gradient_batch(
        flat[:, :k], flat[:, k:], u.counts.astype(np.float64), solutions.n
    ).reshape(R, 2 * m, m)
    H = (G[:, 0::2, :] - G[:, 1::2, :]) / (2.0 * h)[:, None, None]
    H = (H + np.swapaxes(H, 1, 2)) / 2.0
    eigs = np.linalg.eigvalsh(H)

    classes = []
    for r in range(R):
        ev = eigs[r]
        if (np.abs(ev) <= HESSIAN_ZERO_TOL).any():
            classes.append("unknown")
        elif (ev < -HESSIAN_ZERO_TOL).all():
            classes.append("max")
        elif (ev > HESSIAN_ZERO_TOL).all():
            classes.append("min")
        else:
            classes.append("saddle")

    new = list(solutions.solutions)
    for r, i in enumerate(real_idx):
        new[i] = replace(new[i], hessian_class=classes[r])
    return SolutionSet(
        n=solutions.n,
        solutions=tuple(new),
        target_count=solutions.target_count,
        complete=solutions.complete,
        lost_paths=solutions.lost_paths,
    )


# ---------------------------------------------------------------------------
# Sign vectors and region enumeration
# ---------------------------------------------------------------------------

def sign_vector(m: model.MatrixParam) -> SignVector:
    """Signs of the minors of a real in-domain block, leading pair dropped."""
    if not m.is_real:
        raise DomainError("sign vectors are defined for real blocks only")
    if not model.in_domain(m):
        raise DomainError("a minor vanishes; the sign vector is undefined")
    p = model.plucker(m).minors.real
    return SignVector(n=m.n, s=tuple(int(v) for v in np.sign(p[1:]).astype(int)))


def solution_sign_vector(sol: Solution, n: int) -> SignVector:
    if not sol.is_real:
        raise DomainError("sign vectors are defined for real solutions only")
    z = sol.point.real
    k = n - 2
    return sign_vector(model.MatrixParam(n=n, xs=z[:k], ys=z[k:]))


def _signs_of_rows(xs: np.ndarray, ys: np.ndarray, n: int) -> np.ndarray | None:
    """Sign patterns (rows x pairs-1) of a batch, or None if any minor vanishes."""
    p = minors_batch(xs, ys, n)
    mag = np.abs(p)
    if (mag.min(axis=1) <= 1e-9 * mag.max(axis=1)).any():
        return None
    return np.sign(p[:, 1:]).astype(np.int8)


def enumerate_regions(n: int, seed: int = 0) -> set[SignVector]:
    """All sign vectors realized by real points of the open domain.

    Mirrors the constructive count: a generic positive block, with the
    x-row negated on the first (k-2) free columns for each cut k, hit
    with every permutation of the free columns and every pattern of
    column sign flips.  The result must have exactly 2^(n-2)*(n-1)!
    members; a degenerate random instantiation triggers a retry and, if
    persistent, a DegenerateInstanceError.
    """
    if not 3 <= n <= 8:
        raise ValueError(f"region enumeration supports 3 <= n <= 8, got n={n}")
    expected = expected_count(n)
    k = n - 2
    flips = 1.0 - 2.0 * np.indices((2,) * k).reshape(k, -1).T      # (2^k, k)
    last_err = None
    for attempt in range(6):
        rng = np.random.default_rng(seed + 104729 * attempt)
        xs0 = rng.uniform(0.5, 2.0, size=k)
        ys0 = rng.uniform(0.5, 2.0, size=k)
        found: set[tuple[int, ...]] = set()
        degenerate = False
        for cut in range(2, n + 1):
            xs_cut = xs0.copy()
            xs_cut[: cut - 2] *= -1.0
            for perm in permutations(range(k)):
                xs_p = xs_cut[list(perm)]
                ys_p = ys0[list(perm)]
                signs = _signs_of_rows(flips * xs_p[None, :], flips * ys_p[None, :], n)
                if signs is None:
                    degenerate = True
                    break
                found.update(map(tuple, signs))
            if degenerate:
                break
        if degenerate:
            last_err = "a minor vanished on a constructed block"
            continue
        if len(found) != expected:
            last_err = f"instantiation realized {len(found)} of {expected} sign vectors"
            continue
        return {SignVector(n=n, s=s) for s in found}
    raise DegenerateInstanceError(
        f"region enumeration failed after 6 random instantiations: {last_err}"
    )


# ---------------------------------------------------------------------------
# Count verification
# ---------------------------------------------------------------------------

def verify_counts(
    n: int, u: model.DataCounts, solutions: SolutionSet, region_seed: int = 0
) -> VerificationReport:
    """Check the solved set against every provable structural claim.

    (a) the total count, (b) all points real, (c) the implicit-image
    count with exact 2^(n-1) fibers, (d) sign vectors pairwise distinct
    and exactly the enumerable region set, (e) every Hessian a strict
    local maximum.  Failures carry the offending data; nothing raises.
    """
    checks: list[tuple[str, bool, str]] = []
    target = expected_count(n)

    count = len(solutions)
    checks.append(
        ("count", count == target, f"found {count}, expected {target}")
    )

    n_real = solutions.count_real
    checks.append(("all_real", n_real == count, f"{n_real} of {count} real"))

    groups = implicit_images(solutions)
    fiber = 2 ** (n - 1)
    want_imgs = ml_degree(n)
    sizes = sorted(len(members) for _, members in groups)
    ok_imgs = len(groups) == want_imgs and all(s == fiber for s in sizes)
    checks.append(
        (
            "implicit_fibers",
            ok_imgs,
            f"{len(groups)} images (want {want_imgs}), fiber sizes "
            f"{sizes[:3]}..{sizes[-3:]} (want all {fiber})" if groups else "no real solutions",
        )
    )

    region_matched = False
    try:
        regions = enumerate_regions(n, seed=region_seed)
        vecs = [solution_sign_vector(s, n) for s in solutions if s.is_real]
        distinct = len(set(vecs)) == len(vecs)
        region_matched = distinct and set(vecs) == regions
        detail = (
            f"{len(set(vecs))} distinct sign vectors over {len(vecs)} real solutions, "
            f"region set size {len(regions)}"
        )
    except (DegenerateInstanceError, DomainError) as e:
        detail = f"region comparison failed: {e}"
    checks.append(("regions", region_matched, detail))

    classed = solutions
    if any(s.is_real and s.hessian_class == "unknown" for s in solutions):
        classed = classify_hessians(solutions, u)
    bad = [
        s.hessian_class
        for s in classed
        if s.is_real and s.hessian_class != "max"
    ]
    checks.append(
        ("hessians_max", not bad, f"{len(bad)} real solutions not classified max: {bad[:5]}")
    )

    return VerificationReport(
        n=n,
        count=count,
        count_real=n_real,
        implicit_count=len(groups),
        region_matched=region_matched,
        checks=tuple(checks),
    )
