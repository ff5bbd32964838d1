import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penclogit.cv import (
    ThresholdSet,
    average_roc,
    cross_validate,
    make_folds,
    predict,
    roc_auc,
    roc_points,
    stratum_thresholds,
)
from penclogit.data import Dataset, Stratum, standardize
from penclogit.exceptions import ParameterError
from penclogit.likelihood import log_cond_likelihood, stratum_loglik
from penclogit.path import GridSpec
from penclogit.simulate import SimConfig, simulate

from conftest import random_dataset


def test_folds_one_stratum_each(rng):
    ds = random_dataset(rng, 10, 3, 1, 2)
    f = make_folds(ds, 10, seed=1)
    assert sorted(np.bincount(f.fold_of_stratum)) == [1] * 10


def test_fold_sizes_balanced(rng):
    ds = random_dataset(rng, 63, 3, 1, 1)
    f = make_folds(ds, 10, seed=4)
    assert set(np.bincount(f.fold_of_stratum)) == {6, 7}


def test_folds_deterministic(rng):
    ds = random_dataset(rng, 20, 3, 1, 1)
    a, b = make_folds(ds, 5, 9), make_folds(ds, 5, 9)
    np.testing.assert_array_equal(a.fold_of_stratum, b.fold_of_stratum)


@pytest.mark.parametrize("k", [1, 8])
def test_fold_count_validated(rng, k):
    with pytest.raises(ParameterError):
        make_folds(random_dataset(rng, 7, 3, 1, 1), k, 0)


def test_cv_decomposition(rng):
    ds = random_dataset(rng, 9, 5, 2, 4)
    f = make_folds(ds, 3, 0)
    beta = rng.uniform(-1, 1, 4)
    total = log_cond_likelihood(ds, beta)
    for i in range(3):
        held = f.members(i)
        rest = np.setdiff1d(np.arange(ds.K), held)
        direct = total - log_cond_likelihood(ds.subset(rest), beta)
        assert direct == pytest.approx(stratum_loglik(ds, beta)[held].sum(), abs=1e-10)


@pytest.fixture(scope="module")
def cv_result():
    ds, _ = simulate(SimConfig(K=12, n=6, m=3, p=15, seed=2))
    ds, sc = standardize(ds)
    folds = make_folds(ds, 4, 0)
    return ds, sc, folds, cross_validate(ds, 1.0, GridSpec(nlambda=30, linear_steps=25), folds, scaling=sc)


def test_cv_shapes_and_rule(cv_result):
    _, _, folds, res = cv_result
    n = res.lambdas.size
    assert res.per_fold.shape == (4, n) and res.cv_mean.shape == (n,)
    np.testing.assert_allclose(res.cv_mean, -res.per_fold.mean(0))
    assert res.lambda_1se >= res.lambda_min
    assert res.lambda_min in res.lambdas and res.lambda_1se in res.lambdas
    bound = res.cv_mean[res.idx_min] + res.cv_se[res.idx_min]
    assert res.cv_mean[res.idx_1se] <= bound
    assert np.all(res.cv_mean[: res.idx_1se] > bound)


def test_cv_per_fold_matches_direct_evaluation(cv_result):
    from penclogit.path import fit_path

    ds, sc, folds, res = cv_result
    held = folds.members(1)
    train = np.setdiff1d(np.arange(ds.K), held)
    sol = fit_path(ds.subset(train), 1.0, lambdas=res.lambdas, scaling=sc, early_stop=None)
    k = res.lambdas.size // 2
    expected = stratum_loglik(ds.subset(held), sol.betas[k]).sum()
    assert res.per_fold[1, k] == pytest.approx(expected, rel=1e-12)


def test_cv_deterministic(cv_result):
    ds, sc, folds, res = cv_result
    again = cross_validate(ds, 1.0, GridSpec(nlambda=30, linear_steps=25), folds, scaling=sc)
    assert again.cv_mean.tobytes() == res.cv_mean.tobytes()


def test_cv_threads_match_serial(cv_result):
    ds, sc, folds, res = cv_result
    par = cross_validate(ds, 1.0, GridSpec(nlambda=30, linear_steps=25), folds, scaling=sc, threads=3)
    assert par.per_fold.tobytes() == res.per_fold.tobytes()


def test_thresholds_separable():
    X = np.array([[3.0], [2.0], [0.0], [-1.0]])
    thr = stratum_thresholds(Dataset((Stratum("s", 2, X),)), [1.0])
    assert thr.errors[0] == 0
    assert 0.0 <= thr.t[0] < 2.0


def test_thresholds_degenerate():
    X = np.ones((5, 1))
    thr = stratum_thresholds(Dataset((Stratum("s", 2, X),)), [0.0])
    assert thr.degenerate[0] and thr.t[0] == 0.0 and thr.errors[0] == 2


def _errors(eta, m, t):
    case = np.arange(eta.size) < m
    return int(np.sum(case & (eta <= t)) + np.sum(~case & (eta > t)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 9))
def test_thresholds_exhaustive(seed, n):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, n))
    X = np.round(rng.standard_normal((n, 2)), 1)  # rounding creates ties
    beta = rng.uniform(-2, 2, 2)
    thr = stratum_thresholds(Dataset((Stratum("s", m, X),)), beta)
    eta = X @ beta
    best = min(_errors(eta, m, t) for t in eta)
    if not thr.degenerate[0]:
        assert thr.errors[0] == best == _errors(eta, m, thr.t[0])
        assert eta.min() <= thr.t[0] <= eta.max()
        # ties go to the smallest qualifying candidate
        assert thr.t[0] == min(t for t in eta if _errors(eta, m, t) == best)


def test_predict_hand_example():
    thr = ThresholdSet(np.array([-1.0, 0.0, 3.0]), np.zeros(3, int), np.zeros(3, bool))
    x = np.array([[1.0]])
    assert predict(x, [1.0], thr, "mean").tolist() == [1]
    assert predict(x, [1.0], thr, "committee").tolist() == [1]


def test_predict_committee_tie_is_control():
    thr = ThresholdSet(np.array([0.0, 2.0]), np.zeros(2, int), np.zeros(2, bool))
    assert predict([[1.0]], [1.0], thr, "committee").tolist() == [0]


def test_predict_degenerate_abstains():
    thr = ThresholdSet(np.array([0.0, 5.0, 5.0]), np.zeros(3, int), np.array([False, True, True]))
    assert predict([[1.0]], [1.0], thr, "committee").tolist() == [1]


def test_predict_equal_thresholds_agree(rng):
    thr = ThresholdSet(np.full(4, 0.3), np.zeros(4, int), np.zeros(4, bool))
    X = rng.standard_normal((50, 2))
    beta = np.array([1.0, -0.5])
    np.testing.assert_array_equal(predict(X, beta, thr, "mean"), predict(X, beta, thr, "committee"))


def test_predict_dominance():
    thr = ThresholdSet(np.array([-1.0, 0.5, 2.0]), np.zeros(3, int), np.zeros(3, bool))
    for method in ("mean", "committee"):
        assert predict([[2.5]], [1.0], thr, method).tolist() == [1]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-5, 5))
def test_predict_shift_consistency(seed, c):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(5)
    X = rng.standard_normal((20, 1))
    a = ThresholdSet(t, np.zeros(5, int), np.zeros(5, bool))
    b = ThresholdSet(t + c, np.zeros(5, int), np.zeros(5, bool))
    # a constant column in X with coefficient 1 shifts every linear predictor by c
    Xs = np.column_stack([X, np.full(20, c)])
    for method in ("mean", "committee"):
        np.testing.assert_array_equal(
            predict(X, [1.0], a, method), predict(Xs, [1.0, 1.0], b, method)
        )


def test_predict_validation():
    empty = ThresholdSet(np.array([]), np.array([], int), np.array([], bool))
    with pytest.raises(ParameterError):
        predict([[1.0]], [1.0], empty)
    thr = ThresholdSet(np.zeros(1), np.zeros(1, int), np.zeros(1, bool))
    with pytest.raises(ParameterError):
        predict([[1.0]], [1.0], thr, "vote")


def test_roc_points():
    betas = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [1, 1, 0, 0], [1, 1, 1, 0.0]])
    sens, spec = roc_points(betas, [0, 1])
    np.testing.assert_allclose(sens, [0, 0.5, 1, 1])
    np.testing.assert_allclose(spec, [1, 1, 1, 0.5])
    with pytest.raises(ParameterError):
        roc_points(betas, [])


def test_average_roc_and_auc():
    c1 = (np.array([0, 0.5, 1.0]), np.array([1.0, 0.8, 0.2]))
    c2 = (np.array([0, 0.5, 0.5]), np.array([1.0, 0.6, 0.4]))
    levels, spec = average_roc([c1, c2])
    np.testing.assert_allclose(levels, [0, 0.5, 1])
    np.testing.assert_allclose(spec, [1.0, 0.6, 0.2])
    assert roc_auc(np.array([1.0]), np.array([1.0])) == pytest.approx(1.0)
    assert roc_auc(np.array([0.5]), np.array([0.5])) == pytest.approx(0.5)


def test_threshold_brute_force_all_candidates():
    # every candidate value, including interior ties, is examined
    eta_rows = np.array([[0.0], [1.0], [1.0], [2.0], [-1.0]])
    thr = stratum_thresholds(Dataset((Stratum("s", 2, eta_rows),)), [1.0])
    eta = eta_rows[:, 0]
    scores = {t: _errors(eta, 2, t) for t in eta}
    assert thr.errors[0] == min(scores.values())
    assert thr.t[0] == min(t for t, e in scores.items() if e == thr.errors[0])
