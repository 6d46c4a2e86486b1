import numpy as np
import pytest

from dppmle import (
    DppDistribution,
    KernelError,
    MatrixParam,
    ProjectionKernel,
    RankError,
    dpp_distribution,
    plucker,
    projection_from_rows,
    random_counts,
    sample_counts,
)
from dppmle.pairs import num_pairs


def rank2_kernel(xs, ys):
    n = len(xs) + 2
    return projection_from_rows(MatrixParam(n, np.asarray(xs, float), np.asarray(ys, float)).full_matrix())


def test_projection_from_rows_properties():
    K = rank2_kernel([1.0, 2.0], [1.0, 3.0])
    assert K.n == 4 and K.d == 2
    np.testing.assert_allclose(K.P, K.P.T, atol=1e-14)
    np.testing.assert_allclose(K.P @ K.P, K.P, atol=1e-12)
    assert np.trace(K.P) == pytest.approx(2.0)


def test_projection_from_rows_basis_invariance():
    # row operations change the matrix but not the projection
    rng = np.random.default_rng(0)
    M = rng.normal(size=(2, 5))
    T = rng.normal(size=(2, 2)) + 3 * np.eye(2)
    np.testing.assert_allclose(
        projection_from_rows(M).P, projection_from_rows(T @ M).P, atol=1e-10
    )


def test_projection_from_rows_rejects_rank_deficiency():
    with pytest.raises(RankError):
        projection_from_rows(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))
    with pytest.raises(RankError):
        projection_from_rows(np.eye(3))  # not wide


def test_kernel_validation():
    with pytest.raises(KernelError):
        ProjectionKernel(n=3, d=2, P=np.array([[1.0, 0.1, 0], [0, 1, 0], [0, 0, 0]]))
    P = np.diag([1.0, 1.0, 0.0])
    with pytest.raises(KernelError):
        ProjectionKernel(n=3, d=1, P=P)  # trace mismatch
    half = np.full((2, 2), 0.5)
    ProjectionKernel(n=2, d=1, P=half)  # valid projection onto the diagonal


def test_dpp_distribution_matches_squared_minors():
    # rank-2 subset probabilities are squared minors over their total
    xs, ys = np.array([0.7, -1.2, 0.4]), np.array([1.1, 0.3, -0.8])
    K = rank2_kernel(xs, ys)
    dist = dpp_distribution(K)
    p = plucker(MatrixParam(5, xs, ys))
    np.testing.assert_allclose(dist.probs, p.minors**2 / p.square_sum, atol=1e-12)
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_dpp_distribution_rank3():
    rng = np.random.default_rng(1)
    K = projection_from_rows(rng.normal(size=(3, 6)))
    dist = dpp_distribution(K)
    assert dist.probs.shape == (20,)
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.subsets[0] == (1, 2, 3)
    assert dist.subsets[-1] == (4, 5, 6)


def test_dpp_distribution_rejects_non_projection():
    # symmetric, trace 2, idempotent fails -> caught before minors
    A = np.diag([0.5, 0.5, 0.5, 0.5])
    with pytest.raises(KernelError):
        dpp_distribution(ProjectionKernel(n=4, d=2, P=A))


def test_distribution_validation():
    with pytest.raises(ValueError):
        DppDistribution(n=4, d=2, probs=np.full(6, 0.1))  # sums to 0.6
    with pytest.raises(ValueError):
        DppDistribution(n=4, d=2, probs=np.full(5, 0.2))  # wrong length


def test_sample_counts_reproducible_and_sized():
    K = rank2_kernel([1.0, 2.0], [1.0, 3.0])
    u1 = sample_counts(K, 500, seed=7)
    u2 = sample_counts(K, 500, seed=7)
    np.testing.assert_array_equal(u1.counts, u2.counts)
    assert u1.total == 500
    assert u1.n == 4


def test_sample_counts_approaches_distribution():
    K = rank2_kernel([1.0, 2.0], [1.0, 3.0])
    dist = dpp_distribution(K)
    u = sample_counts(K, 200_000, seed=3)
    np.testing.assert_allclose(u.counts / u.total, dist.probs, atol=5e-3)


def test_sample_counts_warns_on_missing_pairs():
    # a tiny sample from a 10-item model cannot hit all 45 pairs
    rng = np.random.default_rng(5)
    K = projection_from_rows(rng.normal(size=(2, 10)))
    with pytest.warns(UserWarning, match="non-generic"):
        u = sample_counts(K, 3, seed=0)
    assert not u.is_generic


def test_sample_counts_rank2_only():
    rng = np.random.default_rng(6)
    K = projection_from_rows(rng.normal(size=(3, 6)))
    with pytest.raises(ValueError):
        sample_counts(K, 10, seed=0)


def test_random_counts_in_range_and_seeded():
    u = random_counts(5, 50, seed=11)
    assert u.n == 5 and u.counts.shape == (num_pairs(5),)
    assert u.counts.min() >= 1 and u.counts.max() <= 50
    assert u.is_generic
    np.testing.assert_array_equal(u.counts, random_counts(5, 50, seed=11).counts)
    assert (u.counts != random_counts(5, 50, seed=12).counts).any()
