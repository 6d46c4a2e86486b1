import dataclasses

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from dppmle import DataCounts, IncompleteSetError, ProjectionDppMle
from dppmle import pipeline


@pytest.fixture(scope="module")
def fitted():
    est = ProjectionDppMle(seed=42)
    return est.fit(np.array([1, 2, 3, 1, 2, 3], dtype=np.int64))  # n=4 count vector


def test_get_params_and_clone():
    est = ProjectionDppMle(n_items=5, seed=7, workers=2, stall_limit=10)
    params = est.get_params()
    assert params["n_items"] == 5
    assert params["seed"] == 7
    dup = clone(est)
    assert dup.get_params() == params
    est2 = est.set_params(seed=9)
    assert est2.seed == 9


def test_unfitted_raises():
    est = ProjectionDppMle()
    with pytest.raises(NotFittedError):
        est.score_samples(np.array([[1, 2]]))
    with pytest.raises(NotFittedError):
        est.sample(3)


def test_fit_from_count_vector(fitted):
    check_is_fitted(fitted, "probs_")
    assert fitted.n_items_ == 4
    assert fitted.counts_.total == 12
    assert len(fitted.solutions_) == 24
    assert fitted.probs_.shape == (6,)
    assert fitted.probs_.sum() == pytest.approx(1.0)
    assert np.isfinite(fitted.log_likelihood_)
    # the reported kernel reproduces the reported probabilities
    from dppmle import dpp_distribution

    np.testing.assert_allclose(
        dpp_distribution(fitted.kernel_).probs, fitted.probs_, atol=1e-9
    )


def test_fit_from_data_counts_and_dict_agree(fitted):
    u = DataCounts(4, np.array([1, 2, 3, 1, 2, 3]))
    a = ProjectionDppMle(seed=42).fit(u)
    np.testing.assert_allclose(a.probs_, fitted.probs_, atol=1e-10)
    d = {"12": 1, "13": 2, "14": 3, "23": 1, "24": 2, "34": 3}
    b = ProjectionDppMle(seed=42).fit(d)
    assert b.n_items_ == 4
    np.testing.assert_allclose(b.probs_, fitted.probs_, atol=1e-10)


def test_fit_from_raw_pairs():
    pairs = np.array([[1, 2], [2, 1], [1, 3], [3, 4], [2, 4], [1, 4], [2, 3], [3, 4]])
    est = ProjectionDppMle(seed=42).fit(pairs)
    assert est.n_items_ == 4
    # order within a pair must not matter
    np.testing.assert_array_equal(
        est.counts_.counts, [2, 1, 1, 1, 1, 2]
    )


def test_fit_rejects_malformed_pairs():
    with pytest.raises(ValueError):
        ProjectionDppMle().fit(np.array([[1, 1], [1, 2]]))  # repeated item
    with pytest.raises(ValueError):
        ProjectionDppMle().fit(np.array([[0, 2], [1, 2]]))  # 0-based
    with pytest.raises(ValueError):
        ProjectionDppMle(n_items=3).fit(np.array([[1, 4]]))  # index beyond n
    with pytest.raises(ValueError):
        ProjectionDppMle().fit(np.ones((2, 3)))  # not pairs


def test_n_items_must_match_explicit_counts():
    u = DataCounts(4, np.array([1, 1, 1, 1, 1, 1]))
    with pytest.raises(ValueError):
        ProjectionDppMle(n_items=5).fit(u)


def test_score_samples_are_fitted_log_probs(fitted):
    X = np.array([[1, 2], [3, 4], [2, 3]])
    logp = fitted.score_samples(X)
    np.testing.assert_allclose(
        logp, np.log(fitted.probs_[[0, 5, 3]]), atol=1e-12
    )
    assert fitted.score(X) == pytest.approx(logp.sum())


def test_sample_reproducible_and_valid(fitted):
    a = fitted.sample(200, random_state=3)
    b = fitted.sample(200, random_state=3)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (200, 2)
    assert (a[:, 0] < a[:, 1]).all()
    assert a.min() >= 1 and a.max() <= 4
    with pytest.raises(ValueError):
        fitted.sample(0)


def test_fit_refuses_incomplete_solution_set(monkeypatch):
    # without the full critical-point set, the argmax is not certified global
    real_run_solve = pipeline.run_solve

    def truncated(u, **kwargs):
        run = real_run_solve(u, **kwargs)
        broken = dataclasses.replace(
            run.solutions, solutions=run.solutions.solutions[:2], complete=False
        )
        return dataclasses.replace(run, solutions=broken)

    monkeypatch.setattr(pipeline, "run_solve", truncated)
    with pytest.raises(IncompleteSetError, match="2 of 4"):
        ProjectionDppMle(seed=42).fit(np.array([1, 2, 3]))


def test_sample_then_fit_round_trip(fitted):
    # heavy resampling from the fitted model recovers its probabilities
    pairs = fitted.sample(50_000, random_state=0)
    refit = ProjectionDppMle(seed=42).fit(pairs)
    np.testing.assert_allclose(refit.probs_, fitted.probs_, atol=0.02)
