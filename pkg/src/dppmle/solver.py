"""Complex critical-point solving for the rank-2 likelihood equations.

The critical system is square — 2(n-2) rational equations in 2(n-2)
unknowns — and linear in the data vector.  That linearity gives a free
start pair (take a random complex point, solve a linear system for data
that make it critical), after which monodromy loops in data space
populate the full solution set and a straight-line parameter homotopy
carries every solution to the requested data.

Everything here is batched: a tracking call advances B paths at once,
each with its own time, step size, and status.  The coordinatewise sign
symmetries of the parameterization (2^(n-1) of them) commute with
tracking, so monodromy only ever tracks one representative per symmetry
orbit and expands orbits for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import (
    DivergedError,
    PathFailureError,
    PoleHitError,
    SeedFailureError,
    SingularJacobianError,
)
from . import model
from .pairs import num_pairs

# Per-path status codes used by the batched tracker.
TRACK_ACTIVE = -1
TRACK_OK = 0
TRACK_PATH_FAILURE = 1
TRACK_POLE_HIT = 2
TRACK_DIVERGED = 3


def expected_count(n: int) -> int:
    """Total number of complex critical points for generic data."""
    return 2 ** (n - 2) * math.factorial(n - 1)


def ml_degree(n: int) -> int:
    """Number of distinct critical points of the implicit likelihood."""
    return math.factorial(n - 1) // 2


@dataclass(frozen=True)
class GradientSystem:
    """The square rational system gradient(z; u) = 0 with complex scalars.

    Unknowns are ordered (x_3..x_n, y_3..y_n); the parameter slots are the
    per-pair counts, which may be arbitrary complex numbers during solving.
    The residual is linear in the parameter vector, so ``residual(Z, v)``
    doubles as the product A(Z) @ v with the coefficient matrix.
    """

    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"need n >= 3, got n={self.n}")

    @property
    def n_unknowns(self) -> int:
        return 2 * (self.n - 2)

    @property
    def n_params(self) -> int:
        return num_pairs(self.n)

    def _split(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Z = np.atleast_2d(Z)
        k = self.n - 2
        return Z[:, :k], Z[:, k:]

    def residual(self, Z: np.ndarray, u: np.ndarray) -> np.ndarray:
        xs, ys = self._split(Z)
        return model.gradient_batch(xs, ys, u, self.n)

    def jacobian(self, Z: np.ndarray, u: np.ndarray) -> np.ndarray:
        xs, ys = self._split(Z)
        return model.jacobian_batch(xs, ys, u, self.n)

    def coefficient_matrix(self, Z: np.ndarray) -> np.ndarray:
        xs, ys = self._split(Z)
        return model.coefficient_matrix(xs, ys, self.n)

    def scaled_residual(self, Z: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xs, ys = self._split(Z)
        return model.scaled_residual_batch(xs, ys, u, self.n)

    def minors(self, Z: np.ndarray) -> np.ndarray:
        from .pairs import minors_batch

        xs, ys = self._split(Z)
        return minors_batch(xs, ys, self.n)

    def domain_ok(self, Z: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Rows whose minors and square sum all clear a relative floor."""
        p = self.minors(Z)
        mag = np.abs(p)
        scale = mag.max(axis=1)
        q = np.abs(np.sum(p * p, axis=1))
        with np.errstate(invalid="ignore"):
            ok = (mag.min(axis=1) > tol * scale) & (q > tol * scale * scale)
        return ok & np.isfinite(scale)


@dataclass(frozen=True)
class TrackerConfig:
    """Numerical knobs for path tracking, deduplication, and reality tests."""

    step_init: float = 0.1
    step_min: float = 1e-7
    newton_tol: float = 1e-11
    max_corrector_iters: int = 3
    max_steps: int = 10000
    dedup_tol: float = 1e-6
    reality_tol: float = 1e-8
    stall_limit: int = 30
    # plumbing beyond the core knobs
    step_max: float = 0.25
    refine_iters: int = 40
    pole_tol: float = 1e-12
    near_real_threshold: float = 1e-4

    def __post_init__(self):
        for name in (
            "step_init", "step_min", "newton_tol", "dedup_tol", "reality_tol",
            "step_max", "pole_tol", "near_real_threshold",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_corrector_iters", "max_steps", "stall_limit", "refine_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.step_min >= self.step_init:
            raise ValueError("step_min must be smaller than step_init")


@dataclass(frozen=True)
class Solution:
    """One refined critical point with its certificates."""

    point: np.ndarray
    residual: float
    is_real: bool
    loglik: float | None = None
    hessian_class: str = "unknown"

    def __post_init__(self):
        point = np.atleast_1d(np.asarray(self.point, dtype=np.complex128))
        point.setflags(write=False)
        object.__setattr__(self, "point", point)
        if self.hessian_class not in ("max", "min", "saddle", "unknown"):
            raise ValueError(f"bad hessian_class {self.hessian_class!r}")

    def sort_key(self) -> tuple:
        return tuple(
            v for c in self.point for v in (round(c.real, 9) + 0.0, round(c.imag, 9) + 0.0)
        )


@dataclass(frozen=True)
class SolutionSet:
    """Deduplicated, deterministically sorted critical points."""

    n: int
    solutions: tuple[Solution, ...]
    target_count: int
    complete: bool
    lost_paths: int = 0

    def __post_init__(self):
        ordered = tuple(sorted(self.solutions, key=Solution.sort_key))
        object.__setattr__(self, "solutions", ordered)

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def points(self) -> np.ndarray:
        if not self.solutions:
            return np.zeros((0, 2 * (self.n - 2)), dtype=np.complex128)
        return np.array([s.point for s in self.solutions])

    def real_solutions(self) -> tuple[Solution, ...]:
        return tuple(s for s in self.solutions if s.is_real)

    @property
    def count_real(self) -> int:
        return sum(1 for s in self.solutions if s.is_real)


# ---------------------------------------------------------------------------
# Sign symmetries of the parameterization
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def deck_signs(n: int) -> np.ndarray:
    """All 2^(n-1) coordinatewise sign maps that fix the squared minors.

    Row 0 is the identity.  Each row (s, c*s) flips the x-block by s in
    {+-1}^(n-2) and the y-block by c*s; every minor then changes by a
    global sign pattern that squares away.
    """
    k = n - 2
    grids = np.indices((2,) * k).reshape(k, -1).T  # (2^k, k) of {0,1}
    s = 1.0 - 2.0 * grids                          # {+1,-1}
    rows = []
    for c in (1.0, -1.0):
        rows.append(np.hstack([s, c * s]))
    out = np.vstack(rows)
    # put the identity first for reproducible orbit layout
    ident = np.flatnonzero((out == 1.0).all(axis=1))[0]
    out[[0, ident]] = out[[ident, 0]]
    out.setflags(write=False)
    return out


def deck_orbit(z: np.ndarray, n: int) -> np.ndarray:
    """All sign-symmetry images of one point: (2^(n-1), m)."""
    return deck_signs(n) * np.asarray(z)[None, :]


def canonical_representative(Z: np.ndarray, n: int) -> np.ndarray:
    """Lexicographically smallest sign-orbit image of each row."""
    Z = np.atleast_2d(Z)
    sigs = deck_signs(n)
    images = sigs[None, :, :] * Z[:, None, :]        # (B, O, m)
    B, O, m = images.shape
    keys = np.empty((B, O, 2 * m))
    keys[:, :, 0::2] = np.round(images.real, 10)
    keys[:, :, 1::2] = np.round(images.imag, 10)
    out = np.empty_like(Z)
    for b in range(B):
        order = np.lexsort(keys[b].T[::-1])
        out[b] = images[b, order[0]]
    return out


def pairwise_min_distance(Z: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Relative sup-norm distance from each row of Z to its nearest row of W."""
    Z = np.atleast_2d(Z)
    W = np.atleast_2d(W)
    if W.shape[0] == 0:
        return np.full(Z.shape[0], np.inf)
    diff = np.abs(Z[:, None, :] - W[None, :, :]).max(axis=2)     # (B, K)
    scale = 1.0 + np.maximum(
        np.abs(Z).max(axis=1)[:, None], np.abs(W).max(axis=1)[None, :]
    )
    return (diff / scale).min(axis=1)


def dedup_rows(Z: np.ndarray, tol: float) -> np.ndarray:
    """Indices of a maximal subset of rows pairwise farther apart than tol."""
    keep: list[int] = []
    for i in range(Z.shape[0]):
        if not keep or pairwise_min_distance(Z[i : i + 1], Z[keep])[0] > tol:
            keep.append(i)
    return np.asarray(keep, dtype=np.int64)


# ---------------------------------------------------------------------------
# Newton correction (batched)
# ---------------------------------------------------------------------------

def _solve_rows(J: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-batched linear solve that survives singular rows.

    Returns the solutions (zeros on failed rows) and an ok mask.
    """
    try:
        x = np.linalg.solve(J, rhs[..., None])[..., 0]
        ok = np.isfinite(x).all(axis=1)
        x = np.where(ok[:, None], x, 0.0)
        return x, ok
    except np.linalg.LinAlgError:
        pass
    B = J.shape[0]
    x = np.zeros_like(rhs)
    ok = np.zeros(B, dtype=bool)
    for b in range(B):
        try:
            xb = np.linalg.solve(J[b], rhs[b])
            if np.isfinite(xb).all():
                x[b] = xb
                ok[b] = True
        except np.linalg.LinAlgError:
            pass
    return x, ok


def newton_correct(
    S: GradientSystem,
    Z: np.ndarray,
    U: np.ndarray,
    tol: float,
    max_iters: int,
    pole_tol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Plain Newton on a batch at fixed parameters.

    Returns (points, scaled residuals, converged mask, pole mask).  Rows
    that leave the domain or hit a singular Jacobian stop early with
    converged=False.
    """
    Z = np.atleast_2d(Z).astype(np.complex128).copy()
    B = Z.shape[0]
    conv = np.zeros(B, dtype=bool)
    pole = np.zeros(B, dtype=bool)
    dead = np.zeros(B, dtype=bool)
    res = np.full(B, np.inf)

    for it in range(max_iters + 1):
        live = np.flatnonzero(~(conv | dead))
        if live.size == 0:
            break
        ok_dom = S.domain_ok(Z[live], pole_tol)
        newly_dead = live[~ok_dom]
        pole[newly_dead] = True
        dead[newly_dead] = True
        live = live[ok_dom]
        if live.size == 0:
            break
        g, rel = S.scaled_residual(Z[live], U[live])
        res[live] = rel
        hit = rel <= tol
        conv[live[hit]] = True
        live = live[~hit]
        if live.size == 0 or it == max_iters:
            continue
        J = S.jacobian(Z[live], U[live])
        dz, ok = _solve_rows(J, -g[~hit])
        dead[live[~ok]] = True
        Z[live[ok]] += dz[ok]
    return Z, res, conv, pole


# ---------------------------------------------------------------------------
# Batched path tracking
# ---------------------------------------------------------------------------

def _bcast_params(u, B: int, P: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape == (P,):
        return np.broadcast_to(u, (B, P)).copy()
    if u.shape == (B, P):
        return u.copy()
    raise ValueError(f"parameters must have shape ({P},) or ({B},{P}), got {u.shape}")


def _velocity(
    S: GradientSystem, Z: np.ndarray, t: np.ndarray, U0: np.ndarray, dU: np.ndarray,
    pole_tol: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Path velocity dz/dt = -J(z, u(t))^-1 A(z) (u1 - u0), batched."""
    ok_dom = S.domain_ok(Z, pole_tol)
    U = U0 + t[:, None] * dU
    V = np.zeros_like(Z)
    ok = ok_dom.copy()
    live = np.flatnonzero(ok_dom)
    if live.size:
        J = S.jacobian(Z[live], U[live])
        rhs = -S.residual(Z[live], dU[live])
        v, sok = _solve_rows(J, rhs)
        V[live] = v
        ok[live] = sok
    return V, ok, ~ok_dom


def track_paths(
    S: GradientSystem,
    Z0: np.ndarray,
    U0: np.ndarray,
    U1: np.ndarray,
    cfg: TrackerConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Track a batch of solutions along straight parameter segments.

    Z0 is (B, m); U0/U1 are (P,) or (B, P) — per-row segments are allowed
    so many data targets can share one batch.  Returns (endpoints, status,
    scaled residuals); endpoints are refined at U1 on TRACK_OK rows.

    The predictor is fourth-order Runge–Kutta on the path-velocity
    equation J dz/dt = -A(z) (u1 - u0); the corrector is plain Newton at
    the stepped parameter value.  A failed correction halves the step,
    four consecutive successes grow it by 1.5x, and a step underflow ends
    the row with a pole/path-failure status.
    """
    Z = np.atleast_2d(np.asarray(Z0, dtype=np.complex128)).copy()
    B, m = Z.shape
    P = S.n_params
    U0b = _bcast_params(U0, B, P)
    U1b = _bcast_params(U1, B, P)
    dU = U1b - U0b

    status = np.full(B, TRACK_ACTIVE, dtype=np.int8)
    t = np.zeros(B)
    h = np.full(B, min(cfg.step_init, cfg.step_max))
    succ = np.zeros(B, dtype=np.int64)
    nsteps = np.zeros(B, dtype=np.int64)
    last_fail_pole = np.zeros(B, dtype=bool)

    # constant segments skip straight to the final refinement
    scale = np.abs(U0b).max(axis=1) + np.abs(U1b).max(axis=1)
    t[np.abs(dU).max(axis=1) <= 1e-15 * scale] = 1.0

    while True:
        act = np.flatnonzero((status == TRACK_ACTIVE) & (t < 1.0 - 1e-12))
        if act.size == 0:
            break
        za = Z[act]
        ta = t[act]
        ha = np.minimum(h[act], 1.0 - ta)
        u0a, dua = U0b[act], dU[act]

        ok = np.ones(act.size, dtype=bool)
        pole = np.zeros(act.size, dtype=bool)
        k1, o, p = _velocity(S, za, ta, u0a, dua, cfg.pole_tol)
        ok &= o; pole |= p
        k2, o, p = _velocity(S, za + (ha / 2)[:, None] * k1, ta + ha / 2, u0a, dua, cfg.pole_tol)
        ok &= o; pole |= p
        k3, o, p = _velocity(S, za + (ha / 2)[:, None] * k2, ta + ha / 2, u0a, dua, cfg.pole_tol)
        ok &= o; pole |= p
        k4, o, p = _velocity(S, za + ha[:, None] * k3, ta + ha, u0a, dua, cfg.pole_tol)
        ok &= o; pole |= p

        zp = za + (ha / 6)[:, None] * (k1 + 2 * k2 + 2 * k3 + k4)
        ok &= np.isfinite(zp).all(axis=1)
        tn = ta + ha

        zc, _, conv, cpole = newton_correct(
            S, np.where(ok[:, None], zp, za), U0b[act] + tn[:, None] * dU[act],
            cfg.newton_tol, cfg.max_corrector_iters, cfg.pole_tol,
        )
        good = ok & conv
        pole |= cpole

        gi = act[good]
        Z[gi] = zc[good]
        t[gi] = tn[good]
        succ[gi] += 1
        grew = succ[gi] >= 4
        h[gi[grew]] = np.minimum(h[gi[grew]] * 1.5, cfg.step_max)
        succ[gi[grew]] = 0
        last_fail_pole[gi] = False

        bi = act[~good]
        h[bi] /= 2.0
        succ[bi] = 0
        last_fail_pole[bi] = pole[~good]
        under = bi[h[bi] < cfg.step_min]
        status[under] = np.where(last_fail_pole[under], TRACK_POLE_HIT, TRACK_PATH_FAILURE)

        nsteps[act] += 1
        tired = act[(nsteps[act] >= cfg.max_steps) & (status[act] == TRACK_ACTIVE)]
        tired = tired[t[tired] < 1.0 - 1e-12]
        status[tired] = TRACK_PATH_FAILURE

    res = np.full(B, np.inf)
    fin = np.flatnonzero(status == TRACK_ACTIVE)
    if fin.size:
        zf, rel, conv, _ = newton_correct(
            S, Z[fin], U1b[fin], cfg.newton_tol, cfg.refine_iters, cfg.pole_tol
        )
        Z[fin] = zf
        res[fin] = rel
        status[fin[conv]] = TRACK_OK
        status[fin[~conv]] = TRACK_DIVERGED
    return Z, status, res


def track_path(
    S: GradientSystem,
    z0: np.ndarray,
    u0: np.ndarray,
    u1: np.ndarray,
    cfg: TrackerConfig | None = None,
) -> np.ndarray:
    """Track one solution from parameters u0 to u1; raises on failure."""
    cfg = cfg or TrackerConfig()
    Z, status, _ = track_paths(S, np.atleast_2d(z0), u0, u1, cfg)
    code = int(status[0])
    if code == TRACK_OK:
        return Z[0]
    if code == TRACK_POLE_HIT:
        raise PoleHitError("path ran into vanishing denominators and could not recover")
    raise PathFailureError("path tracking failed (step size underflow or no convergence)")


# ---------------------------------------------------------------------------
# Scalar Newton refinement
# ---------------------------------------------------------------------------

def newton_refine(
    S: GradientSystem,
    z: np.ndarray,
    u: np.ndarray,
    cfg: TrackerConfig | None = None,
) -> Solution:
    """Damped Newton refinement of a single approximate critical point.

    Iterates until the componentwise scaled residual drops below
    newton_tol.  Raises SingularJacobianError when the Jacobian condition
    estimate exceeds 1e12 and DivergedError when iterations run out or
    the point escapes the domain.
    """
    cfg = cfg or TrackerConfig()
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128)).copy()
    U = _bcast_params(u, 1, S.n_params)

    if not S.domain_ok(z[None, :], cfg.pole_tol)[0]:
        raise DivergedError("start point sits on a pole of the rational system")

    best = np.inf
    for _ in range(cfg.refine_iters):
        g, rel = S.scaled_residual(z[None, :], U)
        rel = float(rel[0])
        if not np.isfinite(rel):
            raise DivergedError("residual became non-finite")
        if rel <= cfg.newton_tol:
            return _bare_solution(S, z, U, cfg)
        J = S.jacobian(z[None, :], U)[0]
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularJacobianError(f"Jacobian condition estimate {cond:.3e} exceeds 1e12")
        dz = np.linalg.solve(J, -g[0])
        # damp: halve the step until the residual stops growing
        step = 1.0
        for _ in range(5):
            z_new = z + step * dz
            if S.domain_ok(z_new[None, :], cfg.pole_tol)[0]:
                _, rel_new = S.scaled_residual(z_new[None, :], U)
                if float(rel_new[0]) < rel or float(rel_new[0]) <= cfg.newton_tol:
                    break
            step /= 2.0
        else:
            z_new = z + step * dz
        z = z_new
        best = min(best, rel)
    g, rel = S.scaled_residual(z[None, :], U)
    if float(rel[0]) <= cfg.newton_tol:
        return _bare_solution(S, z, U, cfg)
    raise DivergedError(
        f"Newton did not reach {cfg.newton_tol:g} in {cfg.refine_iters} iterations "
        f"(best scaled residual {best:.3e})"
    )


def _bare_solution(S: GradientSystem, z: np.ndarray, U: np.ndarray, cfg: TrackerConfig) -> Solution:
    _, rel = S.scaled_residual(z[None, :], U)
    real_params = float(np.abs(np.asarray(U).imag).max()) == 0.0
    im_ok = bool((np.abs(z.imag) <= cfg.reality_tol * (1.0 + np.abs(z.real))).all())
    return Solution(point=z, residual=float(rel[0]), is_real=real_params and im_ok)


# ---------------------------------------------------------------------------
# Seeding: a free (parameters, solution) pair from linearity
# ---------------------------------------------------------------------------

def seed_solution(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """A random complex point plus data that make it critical.

    Draws coordinates uniformly on the annulus 0.5 <= |z| <= 1.5 with
    random phase, assembles the coefficient matrix A(z0) of the residual
    (which is linear in the data), and returns a random null-space vector
    scaled to Euclidean norm C(n,2).  The verified residual at the pair is
    <= 1e-12.
    """
    rng = np.random.default_rng(seed)
    m = 2 * (n - 2)
    P = num_pairs(n)
    radius = rng.uniform(0.5, 1.5, size=m)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=m)
    z0 = radius * np.exp(1j * phase)

    S = GradientSystem(n)
    A = S.coefficient_matrix(z0[None, :])[0]          # (m, P)
    U_, s, Vh = np.linalg.svd(A)
    if s[m - 1] <= 1e-8 * s[0]:
        raise SeedFailureError(
            f"coefficient matrix rank is ambiguous (singular values {s[0]:.3e} .. {s[-1]:.3e})"
        )
    null_basis = Vh[m:].conj()                         # (P - m, P), rows span null space
    coeffs = rng.standard_normal(P - m) + 1j * rng.standard_normal(P - m)
    u0 = coeffs @ null_basis
    u0 *= P / np.linalg.norm(u0)
    check = np.abs(A @ u0).max()
    if check > 1e-12:
        raise SeedFailureError(f"seed residual {check:.3e} exceeds 1e-12")
    return u0, z0


# ---------------------------------------------------------------------------
# Monodromy population
# ---------------------------------------------------------------------------

def _distinct_orbit(z: np.ndarray, n: int, tol: float) -> np.ndarray:
    """All distinct sign images of one point (2^(n-1) of them generically).

    Distinct canonical representatives have disjoint orbits — equal orbits
    would share the same lexicographic minimum — so orbits expanded this
    way never need a cross-orbit dedup.
    """
    orb = deck_orbit(z, n)
    return orb[dedup_rows(orb, tol)]


def monodromy_solve(
    S: GradientSystem,
    seed: int,
    target_count: int | None = None,
    cfg: TrackerConfig | None = None,
) -> tuple[np.ndarray, SolutionSet]:
    """Populate the full solution set at random complex start data.

    Starts from the free seed pair, then repeatedly tracks all known
    orbit representatives around random triangle loops in data space
    (start -> g1 -> g2 -> start with g1, g2 on the sphere of the start
    data's norm).  New endpoints and their whole sign orbits are added
    until the expected count is reached or ``stall_limit`` consecutive
    loops bring nothing new.  The returned set has ``complete=False`` in
    the stalled case — partial results are kept, not thrown away.
    """
    cfg = cfg or TrackerConfig()
    n = S.n
    target = expected_count(n) if target_count is None else int(target_count)
    rng = np.random.default_rng(seed)

    u0 = z0 = None
    for attempt in range(8):
        try:
            u0, z0 = seed_solution(n, seed + 7919 * attempt)
            break
        except SeedFailureError:
            continue
    if u0 is None:
        raise SeedFailureError("seeding failed after 8 attempts")

    Zref, _, conv, _ = newton_correct(
        S, z0[None, :], u0[None, :], cfg.newton_tol, cfg.refine_iters, cfg.pole_tol
    )
    if not conv[0]:
        raise SeedFailureError("seed point failed to refine")
    reps = canonical_representative(Zref, n)
    orbits = [_distinct_orbit(reps[0], n, cfg.dedup_tol)]
    total = orbits[0].shape[0]

    P = S.n_params
    radius = np.linalg.norm(u0)
    stall = 0
    while total < target and stall < cfg.stall_limit:
        g1 = rng.standard_normal(P) + 1j * rng.standard_normal(P)
        g2 = rng.standard_normal(P) + 1j * rng.standard_normal(P)
        g1 *= radius / np.linalg.norm(g1)
        g2 *= radius / np.linalg.norm(g2)

        Z = reps.copy()
        alive = np.ones(Z.shape[0], dtype=bool)
        for ua, ub in ((u0, g1), (g1, g2), (g2, u0)):
            if not alive.any():
                break
            Zn, st, _ = track_paths(S, Z[alive], ua, ub, cfg)
            keep = st == TRACK_OK
            idx = np.flatnonzero(alive)
            Z[idx[keep]] = Zn[keep]
            alive[idx[~keep]] = False

        found_new = False
        if alive.any():
            cand = canonical_representative(Z[alive], n)
            cand = cand[dedup_rows(cand, cfg.dedup_tol)]
            fresh = np.flatnonzero(pairwise_min_distance(cand, reps) > cfg.dedup_tol)
            if fresh.size:
                for i in fresh:
                    orbits.append(_distinct_orbit(cand[i], n, cfg.dedup_tol))
                    total += orbits[-1].shape[0]
                reps = np.vstack([reps, cand[fresh]])
                found_new = True
        stall = 0 if found_new else stall + 1

    all_rows = np.vstack(orbits)
    Zfin, res, conv, _ = newton_correct(
        S, all_rows, np.broadcast_to(u0, (all_rows.shape[0], P)).copy(),
        cfg.newton_tol, cfg.refine_iters, cfg.pole_tol,
    )
    sols = [
        Solution(point=Zfin[i], residual=float(res[i]), is_real=False)
        for i in range(Zfin.shape[0])
        if conv[i]
    ]
    sset = SolutionSet(
        n=n, solutions=tuple(sols), target_count=target, complete=len(sols) == target
    )
    return u0, sset


# ---------------------------------------------------------------------------
# Parameter homotopy to target data
# ---------------------------------------------------------------------------

def _real_restricted_refine(
    S: GradientSystem, Z: np.ndarray, u: np.ndarray, cfg: TrackerConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Newton on the real slice: returns (real points, residuals, converged)."""
    Zr = np.real(Z).astype(np.float64).copy()
    B = Zr.shape[0]
    conv = np.zeros(B, dtype=bool)
    res = np.full(B, np.inf)
    U = np.broadcast_to(np.asarray(u, dtype=np.float64), (B, S.n_params))
    for _ in range(cfg.refine_iters):
        live = np.flatnonzero(~conv)
        if live.size == 0:
            break
        ok_dom = S.domain_ok(Zr[live], cfg.pole_tol)
        live = live[ok_dom]
        if live.size == 0:
            break
        g, rel = S.scaled_residual(Zr[live], U[live])
        res[live] = rel
        hit = rel <= cfg.newton_tol
        conv[live[hit]] = True
        live = live[~hit]
        if live.size == 0:
            continue
        J = S.jacobian(Zr[live], U[live])
        dz, ok = _solve_rows(J.real, -g[~hit].real)
        Zr[live[ok]] += dz[ok]
    return Zr, res, conv


def classify_reality(
    S: GradientSystem, Z: np.ndarray, res: np.ndarray, u_target: np.ndarray, cfg: TrackerConfig
) -> list[Solution]:
    """Turn tracked endpoints into Solutions with reality decided.

    A point is real when every coordinate passes the componentwise
    imaginary test; near-real points (relative imaginary part below the
    near-real threshold) get a real-restricted Newton polish first and
    count as real only if it converges without moving materially farther
    than their imaginary part.  Logliks are attached to real solutions.
    """
    Z = np.atleast_2d(Z)
    B = Z.shape[0]
    im = np.abs(Z.imag)
    re = np.abs(Z.real)
    im_rel = (im / (1.0 + re)).max(axis=1)
    candidate = im_rel < cfg.near_real_threshold

    is_real = np.zeros(B, dtype=bool)
    Zout = Z.copy()
    resout = res.copy()
    idx = np.flatnonzero(candidate)
    if idx.size:
        Zr, rres, conv = _real_restricted_refine(S, Z[idx], u_target, cfg)
        moved = np.abs(Zr - Z[idx].real).max(axis=1)
        allowance = 10.0 * im[idx].max(axis=1) + 1e-9 * (1.0 + re[idx].max(axis=1))
        accept = conv & (moved <= allowance)
        quick = (im[idx] <= cfg.reality_tol * (1.0 + re[idx])).all(axis=1)
        accept |= quick & conv
        sel = idx[accept]
        is_real[sel] = True
        Zout[sel] = Zr[accept]
        resout[sel] = rres[accept]

    logliks = np.full(B, np.nan)
    real_idx = np.flatnonzero(is_real)
    if real_idx.size:
        logliks[real_idx] = _loglik_rows(S, Zout[real_idx].real, u_target)

    out = []
    for b in range(B):
        out.append(
            Solution(
                point=Zout[b],
                residual=float(resout[b]),
                is_real=bool(is_real[b]),
                loglik=float(logliks[b]) if is_real[b] else None,
            )
        )
    return out


def _loglik_rows(S: GradientSystem, Zreal: np.ndarray, u: np.ndarray) -> np.ndarray:
    p = S.minors(Zreal).real
    q = np.sum(p * p, axis=1)
    u = np.asarray(u, dtype=np.float64)
    return 2.0 * np.log(np.abs(p)) @ u - u.sum() * np.log(q)


def solve_at_many(
    S: GradientSystem,
    u_targets: np.ndarray,
    warmstart: tuple[np.ndarray, SolutionSet],
    cfg: TrackerConfig | None = None,
    seed: int = 0,
    workers: int = 1,
    max_rows: int = 4096,
) -> list[SolutionSet]:
    """Carry the warmstart solutions to many real data vectors at once.

    Each target gets the full start set tracked along start -> detour
    midpoint -> target, where the midpoint is the average of the two
    parameter vectors rotated by a random unit complex number (so the
    path leaves the real locus and misses its discriminant).  Failed rows
    are retried once with a fresh detour; stragglers are reported in
    ``lost_paths``.  Targets are batched together up to ``max_rows`` rows
    per tracking call.
    """
    cfg = cfg or TrackerConfig()
    u0, start = warmstart
    u_targets = np.atleast_2d(np.asarray(u_targets, dtype=np.float64))
    R, P = u_targets.shape
    if P != S.n_params:
        raise ValueError(f"targets have {P} parameters, system needs {S.n_params}")
    K = len(start)
    Z0 = start.points()
    rng = np.random.default_rng(seed)
    gammas = np.exp(2j * np.pi * rng.random(R))
    retry_gammas = np.exp(2j * np.pi * rng.random(R))

    per = max(1, min(R, max_rows // max(K, 1)))
    results: list[SolutionSet] = []
    for lo in range(0, R, per):
        hi = min(R, lo + per)
        results.extend(
            _solve_block(
                S, Z0, u0, u_targets[lo:hi], gammas[lo:hi], retry_gammas[lo:hi], start, cfg,
                workers,
            )
        )
    return results


def _solve_block(
    S: GradientSystem,
    Z0: np.ndarray,
    u0: np.ndarray,
    targets: np.ndarray,
    gammas: np.ndarray,
    retry_gammas: np.ndarray,
    start: SolutionSet,
    cfg: TrackerConfig,
    workers: int,
) -> list[SolutionSet]:
    Rc, P = targets.shape
    K = Z0.shape[0]
    B = Rc * K
    Zs = np.tile(Z0, (Rc, 1))
    U0 = np.repeat(np.broadcast_to(u0, (Rc, P)), K, axis=0)
    U1 = np.repeat(targets.astype(np.complex128), K, axis=0)

    def run(gam_rows: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mids = gam_rows[:, None] * (U0[rows] + U1[rows]) / 2.0
        Z1, st1, _ = track_paths(S, Zs[rows], U0[rows], mids, cfg)
        Zend = Z1.copy()
        stat = st1.copy()
        res = np.full(rows.size, np.inf)
        ok = st1 == TRACK_OK
        if ok.any():
            Z2, st2, r2 = track_paths(S, Z1[ok], mids[ok], U1[rows][ok], cfg)
            Zend[ok] = Z2
            stat[ok] = st2
            res[ok] = r2
        return Zend, stat, res

    def run_split(gam_rows: np.ndarray, rows: np.ndarray):
        if workers <= 1 or rows.size < 2 * workers:
            return run(gam_rows, rows)
        # deterministic regardless of scheduling: every chunk writes its own slots
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(np.arange(rows.size), workers)
        Zend = np.empty((rows.size, Zs.shape[1]), dtype=np.complex128)
        stat = np.empty(rows.size, dtype=np.int8)
        res = np.empty(rows.size)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [
                (c, pool.submit(run, gam_rows[c], rows[c])) for c in chunks if c.size
            ]
            for c, f in futs:
                Zc, sc, rc = f.result()
                Zend[c] = Zc
                stat[c] = sc
                res[c] = rc
        return Zend, stat, res

    gam_rows = np.repeat(gammas, K)
    all_rows = np.arange(B)
    Zend, stat, res = run_split(gam_rows, all_rows)

    failed = np.flatnonzero(stat != TRACK_OK)
    if failed.size:
        Zr, sr, rr = run_split(np.repeat(retry_gammas, K)[failed], failed)
        Zend[failed] = Zr
        stat[failed] = sr
        res[failed] = rr

    out = []
    for r in range(Rc):
        rows = np.arange(r * K, (r + 1) * K)
        ok = stat[rows] == TRACK_OK
        Zr = Zend[rows][ok]
        resr = res[rows][ok]
        lost = int((~ok).sum())
        keep = dedup_rows(Zr, cfg.dedup_tol)
        dropped = Zr.shape[0] - keep.size
        sols = classify_reality(S, Zr[keep], resr[keep], targets[r].real, cfg)
        out.append(
            SolutionSet(
                n=S.n,
                solutions=tuple(sols),
                target_count=start.target_count,
                complete=(len(sols) == start.target_count),
                lost_paths=lost + dropped,
            )
        )
    return out


def solve_at(
    S: GradientSystem,
    u_target: np.ndarray,
    warmstart: tuple[np.ndarray, SolutionSet],
    cfg: TrackerConfig | None = None,
    seed: int = 0,
    workers: int = 1,
) -> SolutionSet:
    """Track the warmstart set to one real data vector and classify reality."""
    return solve_at_many(
        S, np.atleast_2d(np.asarray(u_target, dtype=np.float64)), warmstart, cfg,
        seed=seed, workers=workers,
    )[0]


# ---------------------------------------------------------------------------
# Set-level checks and the cleared-denominator oracle
# ---------------------------------------------------------------------------

def is_deck_closed(sset: SolutionSet, tol: float | None = None) -> bool:
    """Every sign image of every solution matches a set member."""
    tol = 1e-6 if tol is None else tol
    Z = sset.points()
    if Z.shape[0] == 0:
        return True
    sigs = deck_signs(sset.n)
    images = (sigs[None, :, :] * Z[:, None, :]).reshape(-1, Z.shape[1])
    return bool((pairwise_min_distance(images, Z) <= tol).all())


def is_conjugation_closed(sset: SolutionSet, tol: float | None = None) -> bool:
    """The set is fixed (as a set) by complex conjugation."""
    tol = 1e-6 if tol is None else tol
    Z = sset.points()
    if Z.shape[0] == 0:
        return True
    return bool((pairwise_min_distance(Z.conj(), Z) <= tol).all())


def cleared_residual(z: np.ndarray, u: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Denominator-cleared polynomial residual, for cross-checks at n = 3, 4.

    Multiplies each gradient component by (square sum) * (product of all
    minors), which turns the rational system into polynomials.  Returns
    (values, term scales); values / scales is a backward-error measure.
    Exposed as an independent oracle only — the solver itself never
    clears denominators.
    """
    if n not in (3, 4):
        raise ValueError("the cleared-denominator oracle is provided for n = 3, 4 only")
    z = np.asarray(z, dtype=np.complex128)
    k = n - 2
    xs, ys = z[None, :k], z[None, k:]
    from .pairs import minors_batch

    p = minors_batch(xs, ys, n)[0]
    D = model.minor_derivatives(xs, ys, n)[0]          # (P, m)
    u = np.asarray(u)
    q = np.sum(p * p)
    dq = 2.0 * p @ D                                    # (m,)
    P = p.shape[0]
    prod_all = np.prod(p)
    prod_except = np.array([np.prod(np.delete(p, t)) for t in range(P)])
    terms = 2.0 * (u * prod_except)[:, None] * D * q   # (P, m)
    main = terms.sum(axis=0)
    norm_term = u.sum() * dq * prod_all
    value = main - norm_term
    scale = np.abs(terms).sum(axis=0) + np.abs(norm_term)
    return value, scale
