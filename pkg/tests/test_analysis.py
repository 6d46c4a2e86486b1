import math

import numpy as np
import pytest

from dppmle import (
    DataCounts,
    DomainError,
    GradientSystem,
    MatrixParam,
    NoRealSolutionError,
    Solution,
    SolutionSet,
    classify_hessians,
    enumerate_regions,
    select_mle,
    sign_vector,
    solve_at,
    verify_counts,
)
from dppmle.analysis import (
    ImplicitPoint,
    SignVector,
    implicit_images,
    solution_sign_vector,
    to_implicit,
)


@pytest.fixture(scope="module")
def solved4(warm4):
    S = GradientSystem(4)
    u = DataCounts(4, np.array([3, 1, 4, 1, 5, 9]))
    sset = solve_at(S, u.counts.astype(float), warm4.as_pair(), seed=2)
    return u, classify_hessians(sset, u)


# ---------------------------------------------------------------------------
# Implicit projection
# ---------------------------------------------------------------------------

def test_implicit_point_validation():
    with pytest.raises(ValueError):
        ImplicitPoint(n=3, q=np.array([0.5, 0.5, 0.5]))  # sums to 1.5
    with pytest.raises(ValueError):
        ImplicitPoint(n=3, q=np.array([1.0, 0.0, 0.0]))  # zero entry
    p = ImplicitPoint(n=3, q=np.array([0.2, 0.3, 0.5]))
    r = ImplicitPoint(n=3, q=np.array([0.25, 0.25, 0.5]))
    assert p.tv_distance(r) == pytest.approx(0.05)
    assert r.tv_distance(p) == pytest.approx(0.05)
    assert p.tv_distance(p) == 0.0


def test_to_implicit_worked_example():
    # x = sqrt(3), y = sqrt(2): squared minors (1, 2, 3) normalize to (1, 2, 3)/6
    sol = Solution(
        point=np.array([math.sqrt(3.0) + 0j, math.sqrt(2.0)]), residual=0.0, is_real=True
    )
    q = to_implicit(sol, 3)
    np.testing.assert_allclose(q.q, np.array([1.0, 2.0, 3.0]) / 6.0, atol=1e-12)


def test_to_implicit_rejects_complex():
    sol = Solution(point=np.array([1.0 + 1j, 2.0]), residual=0.0, is_real=False)
    with pytest.raises(DomainError):
        to_implicit(sol, 3)


def test_sign_orbit_shares_implicit_image(warm3):
    S = GradientSystem(3)
    u = np.array([1.0, 2.0, 3.0])
    sset = solve_at(S, u, warm3.as_pair(), seed=0)
    images = implicit_images(sset)
    assert len(images) == 1
    assert sorted(images[0][1]) == [0, 1, 2, 3]
    np.testing.assert_allclose(images[0][0].q, u / u.sum(), atol=1e-9)


def test_implicit_images_fiber_structure(solved4):
    _, sset = solved4
    images = implicit_images(sset)
    assert len(images) == 3
    assert sorted(len(m) for _, m in images) == [8, 8, 8]
    # groups partition the 24 real solutions
    all_members = sorted(i for _, m in images for i in m)
    assert all_members == list(range(24))


# ---------------------------------------------------------------------------
# MLE selection
# ---------------------------------------------------------------------------

def test_select_mle_is_argmax(solved4):
    u, sset = solved4
    mle = select_mle(sset, u)
    best = max(s.loglik for s in sset if s.is_real)
    assert mle.loglik == pytest.approx(best, abs=1e-12)
    assert not mle.has_ties
    assert mle.solution.is_real
    np.testing.assert_allclose(to_implicit(mle.solution, 4).q, mle.implicit.q, atol=1e-12)


def test_select_mle_invariant_under_count_scaling(warm4):
    S = GradientSystem(4)
    base = np.array([3, 1, 4, 1, 5, 9])
    q = []
    for scale in (1, 3):
        u = DataCounts(4, scale * base)
        sset = solve_at(S, u.counts.astype(float), warm4.as_pair(), seed=4)
        q.append(select_mle(sset, u).implicit.q)
    np.testing.assert_allclose(q[0], q[1], atol=1e-9)


def test_select_mle_requires_real_solutions(warm4):
    # the warmstart set lives at complex data, so nothing in it is real
    u = DataCounts(4, np.ones(6, dtype=int))
    with pytest.raises(NoRealSolutionError):
        select_mle(warm4.start, u)


def test_select_mle_constant_data_three_way_tie(warm4):
    # frozen oracle: constant counts put probability (1/4, 1/4, 1/8 x4) on
    # a complementary pair of pairs, three ways, at loglik exactly -16*total/6*log 2
    S = GradientSystem(4)
    u = DataCounts(4, 5 * np.ones(6, dtype=int))
    sset = solve_at(S, u.counts.astype(float), warm4.as_pair(), seed=0)
    mle = select_mle(sset, u)
    assert mle.loglik == pytest.approx(-80.0 * math.log(2.0), abs=1e-9)
    np.testing.assert_allclose(
        np.sort(mle.implicit.q), [0.125, 0.125, 0.125, 0.125, 0.25, 0.25], atol=1e-9
    )
    assert mle.has_ties and len(mle.tied) == 2
    for t in mle.tied:
        np.testing.assert_allclose(
            np.sort(t.q), [0.125, 0.125, 0.125, 0.125, 0.25, 0.25], atol=1e-9
        )
    # the three tied images place the heavy pairs on the three complementary splits
    heavy = {tuple(np.flatnonzero(img.q > 0.2)) for img in (mle.implicit, *mle.tied)}
    assert heavy == {(0, 5), (1, 4), (2, 3)}


# ---------------------------------------------------------------------------
# Hessian classification
# ---------------------------------------------------------------------------

def test_classify_hessians_all_max_on_generic_data(solved4):
    _, sset = solved4
    assert {s.hessian_class for s in sset if s.is_real} == {"max"}


def test_classify_hessians_leaves_complex_unknown(warm4):
    u = DataCounts(4, np.ones(6, dtype=int))
    classed = classify_hessians(warm4.start, u)
    assert all(s.hessian_class == "unknown" for s in classed)


# ---------------------------------------------------------------------------
# Sign vectors and regions
# ---------------------------------------------------------------------------

def test_sign_vector_worked_example():
    v = sign_vector(MatrixParam(3, np.array([math.sqrt(3.0)]), np.array([math.sqrt(2.0)])))
    assert v.s == (1, -1)  # minors (1, y, -x)
    flipped = sign_vector(
        MatrixParam(3, np.array([-math.sqrt(3.0)]), np.array([-math.sqrt(2.0)]))
    )
    assert flipped.s == (-1, 1)


def test_sign_vector_rejects_degenerate_or_complex():
    with pytest.raises(DomainError):
        sign_vector(MatrixParam(3, np.array([0.0]), np.array([1.0])))
    with pytest.raises(DomainError):
        sign_vector(MatrixParam(3, np.array([1j]), np.array([1.0 + 0j])))


def test_sign_vector_validation():
    with pytest.raises(ValueError):
        SignVector(n=3, s=(1, -1, 1))  # too long
    with pytest.raises(ValueError):
        SignVector(n=3, s=(1, 0))


def test_enumerate_regions_n3_exact():
    regions = enumerate_regions(3)
    assert regions == {SignVector(n=3, s=s) for s in [(1, 1), (1, -1), (-1, 1), (-1, -1)]}


@pytest.mark.parametrize("n,count", [(3, 4), (4, 24), (5, 192)])
def test_enumerate_regions_counts(n, count):
    assert len(enumerate_regions(n)) == count


def test_enumerate_regions_seed_independent():
    assert enumerate_regions(4, seed=0) == enumerate_regions(4, seed=99)


def test_solution_sign_vectors_hit_every_region(solved4):
    _, sset = solved4
    vecs = [solution_sign_vector(s, 4) for s in sset if s.is_real]
    assert len(set(vecs)) == len(vecs) == 24
    assert set(vecs) == enumerate_regions(4)


# ---------------------------------------------------------------------------
# Verification report
# ---------------------------------------------------------------------------

def test_verify_counts_passes_on_full_set(solved4):
    u, sset = solved4
    report = verify_counts(4, u, sset)
    assert report.passed
    assert report.failures() == []
    assert report.count == 24 and report.count_real == 24
    assert report.implicit_count == 3
    assert report.region_matched
    d = report.to_dict()
    assert d["passed"] is True
    assert {c["name"] for c in d["checks"]} == {
        "count", "all_real", "implicit_fibers", "regions", "hessians_max",
    }


def test_verify_counts_flags_truncated_set(solved4):
    u, sset = solved4
    broken = SolutionSet(
        n=4, solutions=sset.solutions[:20], target_count=24, complete=False
    )
    report = verify_counts(4, u, broken)
    assert not report.passed
    names = {f.split(":")[0] for f in report.failures()}
    assert "count" in names
