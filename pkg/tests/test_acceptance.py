"""End-to-end acceptance gates.

One test per shipped guarantee; under ``pytest -v`` each prints a single
pass/fail line.  The expensive shared artifact — five solved-and-classified
random-data runs for each of n = 4, 5, 6 — is built once per session and
reused by the count, reality, fiber, and region gates.
"""

import json
import math
import subprocess
import sys
import time
from itertools import combinations

import numpy as np
import pytest

from dppmle import (
    DataCounts,
    GradientSystem,
    classify_hessians,
    dpp_distribution,
    enumerate_regions,
    expected_count,
    log_likelihood_general_d,
    ml_degree,
    projection_from_rows,
    random_counts,
    select_mle,
    solve_at_many,
)
from dppmle.analysis import implicit_images, solution_sign_vector
from dppmle.model import appended_column_quadric, gradient_batch, MatrixParam, _maximal_minors
from dppmle.pairs import minors_batch, num_pairs


N_RUNS = 5
WALL_BUDGET_N6_S = 300.0


@pytest.fixture(scope="session")
def random_runs(warm4, warm5, warm6):
    """Five solved random-integer-data runs per n, with Hessians classified."""
    warms = {4: warm4, 5: warm5, 6: warm6}
    runs = {}
    walls = {}
    for n, warm in warms.items():
        S = GradientSystem(n)
        data = [random_counts(n, 1000, seed=100 * n + i) for i in range(N_RUNS)]
        targets = np.array([u.counts for u in data], dtype=np.float64)
        t0 = time.perf_counter()
        ssets = solve_at_many(S, targets, warm.as_pair(), seed=n)
        walls[n] = time.perf_counter() - t0
        runs[n] = [(u, classify_hessians(s, u)) for u, s in zip(data, ssets)]
    return runs, walls


def test_closed_form_family_speed_and_values(warm3):
    # n = 3 in closed form: counts (a, b, c) have exactly the four critical
    # points (+-sqrt(c/a), +-sqrt(b/a)) and MLE probabilities u / total
    rng = np.random.default_rng(314)
    S = GradientSystem(3)
    data = [DataCounts(3, rng.integers(1, 1001, size=3)) for _ in range(50)]
    targets = np.array([u.counts for u in data], dtype=np.float64)
    t0 = time.perf_counter()
    ssets = solve_at_many(S, targets, warm3.as_pair(), seed=1)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"50 solves took {elapsed:.2f}s, budget is 1s"
    for u, sset in zip(data, ssets):
        assert sset.complete and len(sset) == 4
        a, b, c = (float(v) for v in u.counts)
        expect = np.sort(
            [[sx * math.sqrt(c / a), sy * math.sqrt(b / a)] for sx in (1, -1) for sy in (1, -1)],
            axis=0,
        )
        got = np.sort(sset.points().real, axis=0)
        np.testing.assert_allclose(got, expect, atol=1e-8)
        mle = select_mle(sset, u)
        np.testing.assert_allclose(mle.implicit.q, u.counts / u.total, atol=1e-10)


def test_critical_point_counts_n4_n5_n6(random_runs):
    runs, walls = random_runs
    for n in (4, 5, 6):
        want = expected_count(n)
        for u, sset in runs[n]:
            assert sset.complete, f"n={n}, u={u.counts.tolist()}: incomplete set"
            assert len(sset) == want, f"n={n}: found {len(sset)}, expected {want}"
    assert walls[6] < WALL_BUDGET_N6_S, (
        f"five n=6 solves took {walls[6]:.0f}s, budget {WALL_BUDGET_N6_S:.0f}s"
    )


def test_implicit_image_counts_and_fiber_sizes(random_runs):
    runs, _ = random_runs
    for n in (4, 5, 6):
        fiber = 2 ** (n - 1)
        for u, sset in runs[n]:
            groups = implicit_images(sset)  # TV dedup at 1e-8
            assert len(groups) == ml_degree(n), (
                f"n={n}: {len(groups)} implicit images, expected {ml_degree(n)}"
            )
            sizes = {len(members) for _, members in groups}
            assert sizes == {fiber}, f"n={n}: fiber sizes {sizes}, expected all {fiber}"


def test_all_solutions_real_and_strict_local_maxima(random_runs):
    runs, _ = random_runs
    for n in (4, 5, 6):
        for u, sset in runs[n]:
            assert sset.count_real == len(sset), (
                f"n={n}: only {sset.count_real} of {len(sset)} solutions real at 1e-8"
            )
            # "max" requires every Hessian eigenvalue below -1e-7
            classes = {s.hessian_class for s in sset}
            assert classes == {"max"}, f"n={n}: Hessian classes {classes}"


def test_region_enumeration_matches_solution_signs(random_runs):
    runs, _ = random_runs
    for n in (3, 4, 5, 6):
        assert len(enumerate_regions(n)) == expected_count(n)
    for n in (4, 5, 6):
        regions = enumerate_regions(n)
        for _, sset in runs[n]:
            vecs = [solution_sign_vector(s, n) for s in sset if s.is_real]
            assert len(set(vecs)) == len(vecs), f"n={n}: repeated sign vector"
            assert set(vecs) == regions, f"n={n}: sign vectors differ from the region set"


def test_kernel_minors_match_squared_plucker():
    # subset probabilities from the projection kernel equal normalized
    # squared maximal minors of any spanning matrix
    rng = np.random.default_rng(2718)
    for trial in range(200):
        d = 2 if trial % 2 == 0 else 3
        n = int(rng.integers(d + 2, 9))
        M = rng.standard_normal((d, n))
        probs = dpp_distribution(projection_from_rows(M)).probs
        dets = _maximal_minors(M)
        q = dets**2 / np.sum(dets**2)
        np.testing.assert_allclose(probs, q, rtol=1e-10, atol=1e-12)


def test_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(1618)
    h = 1e-6
    for n in (3, 4, 5, 6, 7):
        m = 2 * (n - 2)
        P = num_pairs(n)
        # oversample, keep 100 comfortably in-domain rows
        Z = rng.uniform(0.6, 1.8, size=(300, m)) * rng.choice([-1.0, 1.0], size=(300, m))
        p = minors_batch(Z[:, : m // 2], Z[:, m // 2 :], n)
        ok = np.abs(p).min(axis=1) > 1e-3 * np.abs(p).max(axis=1)
        Z = Z[ok][:100]
        assert Z.shape[0] == 100
        u = rng.integers(1, 50, size=P).astype(float)
        total = u.sum()

        def L(W):
            q = minors_batch(W[:, : m // 2], W[:, m // 2 :], n)
            sq = q * q
            return np.log(sq) @ u - total * np.log(sq.sum(axis=1))

        g = gradient_batch(Z[:, : m // 2], Z[:, m // 2 :], u, n)
        for a in range(m):
            Zp, Zm = Z.copy(), Z.copy()
            Zp[:, a] += h
            Zm[:, a] -= h
            fd = (L(Zp) - L(Zm)) / (2 * h)
            err = np.abs(g[:, a] - fd) / (1.0 + np.abs(g[:, a]))
            assert err.max() <= 1e-6, f"n={n}, coordinate {a}: relative error {err.max():.2e}"


def test_extension_quadric_determinant_identity():
    rng = np.random.default_rng(577)
    for n in (3, 4, 5, 6):
        k = n - 2
        for _ in range(100):
            mp = MatrixParam(n, rng.normal(size=k) * 2.0, rng.normal(size=k) * 2.0)
            G = appended_column_quadric(mp)
            p = minors_batch(mp.xs[None], mp.ys[None], n)[0]
            q = float(np.sum(p * p))
            rel = abs(np.linalg.det(G) - q * q) / (q * q)
            assert rel <= 1e-10, f"n={n}: relative determinant error {rel:.2e}"


def test_cli_deterministic_byte_identical(tmp_path):
    def run(path):
        proc = subprocess.run(
            [
                sys.executable, "-m", "dppmle", "solve",
                "--u", "3,1,4,1,5,9", "--deterministic", "--out", str(path),
            ],
            capture_output=True,
            text=True,
            timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        return path.read_bytes()

    first = run(tmp_path / "run1.json")
    second = run(tmp_path / "run2.json")
    assert first == second
    parsed = json.loads(first)
    assert parsed["n"] == 4 and parsed["count"] == 24


def test_rank3_likelihood_against_direct_oracle():
    # independent oracle: 3x3 determinants expanded by hand, plain loops
    def det3(c0, c1, c2):
        return (
            c0[0] * (c1[1] * c2[2] - c1[2] * c2[1])
            - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1])
            + c2[0] * (c0[1] * c1[2] - c0[2] * c1[1])
        )

    rng = np.random.default_rng(4242)
    for n in (5, 6, 7, 8):
        mat = np.hstack([np.eye(3), rng.uniform(0.5, 2.0, size=(3, n - 3))])
        subsets = list(combinations(range(n), 3))
        u = rng.integers(1, 20, size=len(subsets)).astype(float)
        dets = [det3(mat[:, i], mat[:, j], mat[:, k]) for i, j, k in subsets]
        sq = [d * d for d in dets]
        direct = sum(ui * math.log(s) for ui, s in zip(u, sq)) - u.sum() * math.log(sum(sq))
        got = log_likelihood_general_d(mat, u)
        assert abs(got - direct) <= 1e-10 * (1.0 + abs(direct))
