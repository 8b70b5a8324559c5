import math

import numpy as np
import pytest

from simplicity_ood.errors import (NonconvergenceError, ScheduleDomainError,
                                   SingularMatrixError)
from simplicity_ood.estimator import (SolverConfig, _descend, default_starts,
                                      empirical_loss, lambda_constant_gap,
                                      lambda_vanishing_gap, minimize,
                                      regularized_objective, ridge_closed_form)
from simplicity_ood.families import Dataset, make_family, sample_dataset
from simplicity_ood.regularizers import SquaredL2


def solver_with_default_starts(family, dataset, window=2.0 * math.pi,
                               count=9):
    starts = default_starts(family, dataset, window, count)
    return SolverConfig().with_starts(starts)


# -- empirical objective -----------------------------------------------------------

def test_single_sample_empirical_loss():
    fam = make_family("dense_linear")
    ds = sample_dataset(fam, "source", 1, 0)
    beta = np.array([0.2, -0.7])
    single = next(ds.samples())
    assert empirical_loss(fam, ds, beta) == pytest.approx(
        fam.loss(single, beta), rel=1e-15)


def test_duplicated_dataset_leaves_mean_unchanged():
    fam = make_family("dense_linear")
    ds = sample_dataset(fam, "source", 50, 1)
    doubled = Dataset(covariates=np.vstack([ds.covariates, ds.covariates]),
                      responses=np.concatenate([ds.responses, ds.responses]),
                      domain=ds.domain, seed=ds.seed)
    beta = np.array([0.5, 0.5])
    assert empirical_loss(fam, doubled, beta) == pytest.approx(
        empirical_loss(fam, ds, beta), rel=1e-14)


def test_empirical_loss_reflection_tie():
    fam = make_family("sinusoidal_link")
    rng = np.random.default_rng(5)
    for trial in range(10):
        ds = sample_dataset(fam, "source", 300, trial)
        beta = rng.standard_normal(2) * 2.0
        a = empirical_loss(fam, ds, beta)
        b = empirical_loss(fam, ds, np.array([beta[0], math.pi - beta[1]]))
        assert abs(a - b) / (1.0 + abs(a)) <= 1e-12


def test_regularized_objective_lambda_zero_and_origin():
    fam = make_family("dense_linear")
    ds = sample_dataset(fam, "source", 40, 2)
    reg = SquaredL2()
    beta = np.array([0.3, 0.1])
    value, _ = regularized_objective(fam, ds, reg, 0.0, beta)
    assert value == pytest.approx(empirical_loss(fam, ds, beta), rel=1e-15)
    value0, _ = regularized_objective(fam, ds, reg, 0.7, np.zeros(2))
    assert value0 == pytest.approx(empirical_loss(fam, ds, np.zeros(2)),
                                   rel=1e-15)
    with pytest.raises(ScheduleDomainError):
        regularized_objective(fam, ds, reg, -0.1, beta)


def test_regularized_objective_grad_matches_finite_differences():
    fam = make_family("sinusoidal_link")
    ds = sample_dataset(fam, "source", 120, 3)
    reg = SquaredL2()
    rng = np.random.default_rng(6)
    for _ in range(30):
        beta = rng.standard_normal(2) * 2.0
        lam = float(rng.uniform(0.01, 0.5))
        _, grad = regularized_objective(fam, ds, reg, lam, beta)
        numeric = np.zeros(2)
        for i in range(2):
            h = 1e-6 * (1.0 + abs(beta[i]))
            up, dn = beta.copy(), beta.copy()
            up[i] += h
            dn[i] -= h
            numeric[i] = (regularized_objective(fam, ds, reg, lam, up)[0]
                          - regularized_objective(fam, ds, reg, lam, dn)[0]) / (2 * h)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)


# -- schedules (frozen against direct formula evaluation) ---------------------------

def test_lambda_constant_gap_values():
    assert lambda_constant_gap(1.0, 2.0, 100) == pytest.approx(
        0.8583864105157389, rel=1e-14)
    assert lambda_constant_gap(1.0, 1.0, 10_000) == pytest.approx(
        0.24278834070162345, rel=1e-14)
    half = lambda_constant_gap(1.0, 4.0, 100)
    assert half == pytest.approx(lambda_constant_gap(1.0, 2.0, 100) / 2.0,
                                 rel=1e-14)
    with pytest.raises(ScheduleDomainError):
        lambda_constant_gap(1.0, 2.0, 1)
    with pytest.raises(ScheduleDomainError):
        lambda_constant_gap(0.0, 2.0, 100)


def test_lambda_vanishing_gap_values():
    assert lambda_vanishing_gap(1.0, 0.5, 9.0, 10_000) == pytest.approx(
        0.6829768305247221, rel=1e-14)
    big_tau = lambda_vanishing_gap(1.0, 0.5, 1e9, 10_000)
    assert big_tau == pytest.approx(lambda_constant_gap(1.0, 0.5, 10_000),
                                    rel=1e-6)
    with pytest.raises(ScheduleDomainError):
        lambda_vanishing_gap(1.0, 0.5, 8.9, 100)
    with pytest.raises(ScheduleDomainError):
        lambda_vanishing_gap(1.0, 1.5, 9.0, 100)


# -- solver -------------------------------------------------------------------------

def test_unregularized_matches_least_squares():
    fam = make_family("dense_linear")
    ds = sample_dataset(fam, "source", 200, 7)
    reg = SquaredL2()
    config = SolverConfig().with_starts([np.zeros(2)])
    result = minimize(fam, ds, reg, 0.0, config)
    expected = np.linalg.lstsq(ds.covariates, ds.responses, rcond=None)[0]
    assert np.max(np.abs(result.beta_hat - expected)) <= 1e-6
    assert result.grad_norm <= config.grad_tol


def test_ridge_oracle_equivalence_random_instances():
    rng = np.random.default_rng(17)
    reg = SquaredL2()
    for i in range(8):
        d = int(rng.integers(2, 9))
        n = int(rng.integers(50, 501))
        lam = (0.01, 0.1, 1.0)[i % 3]
        if i % 2 == 0:
            fam = make_family("dense_linear", d=d,
                              beta_star=rng.normal(size=d))
        else:
            nulls = (int(rng.integers(0, d)),)
            beta = rng.normal(size=d)
            beta[list(nulls)] = 0.0
            fam = make_family("degenerate_linear", d=d, null_coords=nulls,
                              beta_star=beta)
        ds = sample_dataset(fam, "source", n, 100 + i)
        config = solver_with_default_starts(fam, ds)
        result = minimize(fam, ds, reg, lam, config)
        oracle = ridge_closed_form(ds, lam)
        assert np.max(np.abs(result.beta_hat - oracle)) <= 1e-6


def test_minimize_objective_not_above_any_start():
    fam = make_family("sinusoidal_link")
    ds = sample_dataset(fam, "source", 400, 8)
    reg = SquaredL2()
    config = solver_with_default_starts(fam, ds)
    lam = lambda_constant_gap(1.0, 2.0 * math.pi ** 2 / 3.0, ds.n)
    result = minimize(fam, ds, reg, lam, config)
    for start in config.starts:
        start_val, _ = regularized_objective(fam, ds, reg, lam, start)
        assert result.objective <= start_val + 1e-12


def test_minimize_tie_breaks_to_lower_start_index():
    fam = make_family("sinusoidal_link")
    ds = sample_dataset(fam, "source", 500, 9)
    reg = SquaredL2()
    config = solver_with_default_starts(fam, ds)
    result = minimize(fam, ds, reg, 0.0, config)
    # with lambda = 0 the reflected basins tie exactly; the winner must be
    # the earliest start reaching the shared optimum
    ties = []
    for idx, start in enumerate(config.starts):
        single = SolverConfig().with_starts([start])
        r = minimize(fam, ds, reg, 0.0, single)
        if r.objective <= result.objective + 1e-12:
            ties.append(idx)
    assert result.start_index == min(ties)


def test_monotone_descent_trace():
    fam = make_family("sinusoidal_link")
    ds = sample_dataset(fam, "source", 300, 10)
    reg = SquaredL2()
    lam = 0.05
    seen = []
    nll_value, nll_value_grad = fam.empirical_nll_closures(ds.covariates,
                                                           ds.responses)

    def value_fn(beta):
        return nll_value(beta) + lam * reg.value(beta)

    def value_grad_fn(beta):
        value, grad = nll_value_grad(beta)
        seen.append(value + lam * reg.value(beta))
        return value + lam * reg.value(beta), grad + lam * reg.grad(beta)

    converged, *_ = _descend(value_fn, value_grad_fn,
                             np.array([0.0, 2.0]), SolverConfig())
    assert converged
    diffs = np.diff(np.array(seen))
    assert np.all(diffs <= 1e-12)


def test_nonconvergence_carries_diagnostics():
    fam = make_family("dense_linear")
    ds = sample_dataset(fam, "source", 100, 11)
    config = SolverConfig(max_iters=1).with_starts([np.array([50.0, -50.0])])
    with pytest.raises(NonconvergenceError) as err:
        minimize(fam, ds, SquaredL2(), 0.5, config)
    assert err.value.best_beta is not None
    assert err.value.best_grad_norm > config.grad_tol


def test_null_coordinates_exact_for_degenerate_ridge():
    fam = make_family("degenerate_linear")
    ds = sample_dataset(fam, "source", 300, 12)
    closed = ridge_closed_form(ds, 0.3)
    assert np.max(np.abs(closed[[2, 3]])) <= 1e-12
    result = minimize(fam, ds, SquaredL2(), 0.3,
                      solver_with_default_starts(fam, ds))
    assert np.max(np.abs(result.beta_hat[[2, 3]])) <= 1e-6


# -- starts ---------------------------------------------------------------------------

def test_default_starts_shapes_and_determinism():
    sin = make_family("sinusoidal_link")
    ds = sample_dataset(sin, "source", 100, 13)
    starts = default_starts(sin, ds, 2.0 * math.pi, 9)
    assert len(starts) == 9
    angles = [s[1] for s in starts]
    np.testing.assert_allclose(np.diff(angles), np.diff(angles)[0])
    again = default_starts(sin, ds, 2.0 * math.pi, 9)
    assert all(np.array_equal(a, b) for a, b in zip(starts, again))
    for s in starts:
        assert not np.allclose(s, sin.beta_star)

    lin = make_family("dense_linear")
    ds2 = sample_dataset(lin, "source", 100, 14)
    lin_starts = default_starts(lin, ds2, 2.0 * math.pi, 9)
    assert len(lin_starts) == 2
    np.testing.assert_array_equal(lin_starts[0], np.zeros(2))


# -- closed form --------------------------------------------------------------------

def test_ridge_closed_form_hand_examples():
    ds = Dataset(covariates=np.array([[1.0], [1.0]]),
                 responses=np.array([1.0, 1.0]), domain="source", seed=0)
    assert ridge_closed_form(ds, 0.0)[0] == pytest.approx(1.0, rel=1e-14)
    assert ridge_closed_form(ds, 0.5)[0] == pytest.approx(0.5, rel=1e-14)


def test_ridge_closed_form_singular_at_lambda_zero():
    ds = Dataset(covariates=np.array([[1.0, 0.0], [2.0, 0.0]]),
                 responses=np.array([1.0, 2.0]), domain="source", seed=0)
    with pytest.raises(SingularMatrixError):
        ridge_closed_form(ds, 0.0)
