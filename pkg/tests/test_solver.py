import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penclogit.data import Dataset, Stratum
from penclogit.exceptions import ConvergenceError, ParameterError
from penclogit.likelihood import QuadraticModel, log_cond_likelihood, score, score_hessian
from penclogit.path import lambda_max
from penclogit.solver import PenaltyConfig, cd_epoch, newton_solve, objective, penalty, soft_threshold

from conftest import random_dataset

PAIR = Dataset((Stratum("a", 1, np.array([[1.0], [0.0]])),))


def quad(s, H, beta=None):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    beta = np.zeros(s.size) if beta is None else np.asarray(beta, dtype=float)
    return QuadraticModel(beta, s, np.arange(s.size), H, 0.0)


@pytest.mark.parametrize("x, t, expected", [(3, 1, 2), (-3, 1, -2), (0.5, 1, 0), (1, 1, 0)])
def test_soft_threshold(x, t, expected):
    assert soft_threshold(x, t) == expected


def test_penalty_mix():
    assert penalty([1.0, -2.0], 1.0) == 3.0
    assert penalty([1.0, -2.0], 0.0) == 2.5
    assert penalty([1.0, -2.0], 0.5) == pytest.approx(1.5 + 1.25)


def test_config_validation():
    for bad in (dict(alpha=0.0), dict(alpha=1.5), dict(lam=-1.0), dict(inner_tol=0.0), dict(max_outer=0)):
        with pytest.raises(ParameterError):
            PenaltyConfig(**bad)


def test_cd_zero_score_stays_at_zero():
    out = cd_epoch(quad([0.0, 0.0], np.eye(2)), PenaltyConfig(lam=0.3), np.zeros(2), [0, 1])
    assert np.all(out == 0.0)


def test_cd_scalar_lasso():
    out = cd_epoch(quad(3.0, 2.0), PenaltyConfig(lam=1.0, alpha=1.0), [0.0], [0])
    assert out[0] == 1.0


def test_cd_scalar_elastic_net():
    out = cd_epoch(quad(3.0, 2.0), PenaltyConfig(lam=1.0, alpha=0.5), [0.0], [0])
    assert out[0] == pytest.approx(1.0, abs=1e-15)


def test_cd_single_coordinate_closed_form(rng):
    s = rng.standard_normal(4)
    A = rng.standard_normal((4, 4))
    H = A @ A.T + np.eye(4)
    bt = rng.standard_normal(4)
    cfg = PenaltyConfig(lam=0.4, alpha=0.7)
    out = cd_epoch(quad(s, H, bt), cfg, bt, [2])
    z = bt[2] * H[2, 2] + s[2]
    expected = soft_threshold(z, cfg.lam * cfg.alpha) / (H[2, 2] + cfg.lam * (1 - cfg.alpha))
    assert out[2] == pytest.approx(expected, rel=1e-15)
    np.testing.assert_array_equal(np.delete(out, 2), np.delete(bt, 2))


def test_cd_solves_penalized_quadratic(rng):
    # lasso on a positive definite quadratic: check subgradient optimality
    A = rng.standard_normal((6, 6))
    H = A @ A.T + 0.5 * np.eye(6)
    s = 3 * rng.standard_normal(6)
    lam = 1.0
    b = cd_epoch(quad(s, H), PenaltyConfig(lam=lam, inner_tol=1e-12), np.zeros(6), range(6))
    g = s - H @ b  # gradient of the quadratic model at b
    nz = b != 0
    np.testing.assert_allclose(g[nz], lam * np.sign(b[nz]), atol=1e-9)
    assert np.all(np.abs(g[~nz]) <= lam + 1e-9)


def test_cd_requires_hessian_rows():
    q = QuadraticModel(np.zeros(3), np.ones(3), np.array([0, 1]), np.eye(2), 0.0)
    with pytest.raises(ParameterError):
        cd_epoch(q, PenaltyConfig(lam=0.1), np.zeros(3), [0, 2])


def test_cd_sweep_cap_raises_with_iterate():
    H = np.array([[1.0, 0.99], [0.99, 1.0]])
    cfg = PenaltyConfig(lam=0.01, max_inner=1, inner_tol=1e-14)
    with pytest.raises(ConvergenceError) as info:
        cd_epoch(quad([1.0, 0.5], H), cfg, np.zeros(2), [0, 1])
    assert info.value.beta is not None and np.any(info.value.beta != 0)


def test_above_lambda_max_returns_zero(rng):
    ds = random_dataset(rng, 5, 6, 3, 10)
    lmax = lambda_max(ds, 1.0)
    res = newton_solve(ds, PenaltyConfig(lam=lmax * (1 + 1e-9)), np.zeros(10), range(10))
    assert np.all(res.beta == 0.0) and res.n_outer == 1


@pytest.mark.parametrize("frac", [1e-4, 1e-2, 0.3])
def test_pair_matches_closed_form(frac):
    # -log sigmoid(b) + lam |b| is stationary at sigmoid(b) = 1 - lam
    lam = frac * lambda_max(PAIR, 1.0)
    res = newton_solve(PAIR, PenaltyConfig(lam=lam), [0.0], [0])
    assert res.beta[0] == pytest.approx(np.log(1.0 / lam - 1.0), abs=1e-6)


def test_pair_lambda_max():
    assert lambda_max(PAIR, 1.0) == 0.5
    assert lambda_max(PAIR, 0.5) == 1.0


def test_damping_recovers_from_bad_warm_start():
    res = newton_solve(PAIR, PenaltyConfig(lam=1e-3), [-10.0], [0])
    assert res.n_damped >= 1
    assert res.beta[0] == pytest.approx(np.log(1e3 - 1.0), abs=1e-6)


def test_damping_gives_up_after_four_halvings():
    with pytest.raises(ConvergenceError, match="damped"):
        newton_solve(PAIR, PenaltyConfig(lam=0.1), [-10.0], [0])


def test_outer_cap():
    with pytest.raises(ConvergenceError) as info:
        newton_solve(PAIR, PenaltyConfig(lam=1e-4, max_outer=1), [0.0], [0])
    assert info.value.beta is not None


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.05, 0.9), alpha=st.sampled_from([1.0, 0.5]))
def test_objective_decreases_from_warm_start(seed, frac, alpha):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 5, 6, 3, 10)
    cfg = PenaltyConfig(lam=frac * lambda_max(ds, alpha), alpha=alpha)
    warm = np.zeros(10)
    res = newton_solve(ds, cfg, warm, range(10))
    before = objective(log_cond_likelihood(ds, warm), warm, cfg)
    after = objective(log_cond_likelihood(ds, res.beta), res.beta, cfg)
    assert after <= before + 1e-10
    assert res.objective == pytest.approx(after, rel=1e-12)


def test_lasso_fixed_point(rng):
    ds = random_dataset(rng, 6, 6, 3, 8)
    lam = 0.3 * lambda_max(ds, 1.0)
    res = newton_solve(ds, PenaltyConfig(lam=lam), np.zeros(8), range(8))
    s = score(ds, res.beta)
    nz = res.beta != 0
    assert nz.any()
    np.testing.assert_allclose(np.abs(s[nz]), lam, rtol=1e-4)
    assert np.all(np.sign(s[nz]) == np.sign(res.beta[nz]))
    assert np.all(np.abs(s[~nz]) <= lam * (1 + 1e-4))
    np.testing.assert_allclose(res.score, s, rtol=1e-12, atol=1e-14)


def test_outside_working_set_untouched(rng):
    ds = random_dataset(rng, 4, 5, 2, 6)
    warm = np.array([0.0, 0.2, 0.0, 0.0, -0.1, 0.0])
    res = newton_solve(ds, PenaltyConfig(lam=0.05), warm, [0, 1, 2])
    np.testing.assert_array_equal(res.beta[3:], warm[3:])


def test_deterministic(rng):
    ds = random_dataset(rng, 5, 6, 3, 10)
    cfg = PenaltyConfig(lam=0.2 * lambda_max(ds, 1.0))
    a = newton_solve(ds, cfg, np.zeros(10), range(10))
    b = newton_solve(ds, cfg, np.zeros(10), range(10))
    assert a.beta.tobytes() == b.beta.tobytes()


def test_obs_route_gives_same_solution(rng):
    ds = random_dataset(rng, 5, 6, 3, 6)
    lam = 0.2 * lambda_max(ds, 1.0)
    a = newton_solve(ds, PenaltyConfig(lam=lam), np.zeros(6), range(6))
    b = newton_solve(ds, PenaltyConfig(lam=lam, method="obs"), np.zeros(6), range(6))
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-9)
    q = score_hessian(ds, a.beta, range(6))
    assert q.loglik == pytest.approx(a.loglik, rel=1e-12)
