import math

import numpy as np
import pytest

from simplicity_ood.errors import DimensionMismatchError, EmptyDatasetError
from simplicity_ood.families import (Sample, dataset_to_csv, family_names,
                                     make_family, sample_dataset)

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

ALL_FAMILIES = sorted(family_names())


def random_beta(rng, fam, scale=2.0):
    return rng.standard_normal(fam.d) * scale


def random_sample(rng, fam):
    x = fam.sample_covariates("source", 1, rng)[0]
    return Sample(x=x, y=float(rng.standard_normal()))


# -- loss values ---------------------------------------------------------------

def test_loss_zero_residual_is_half_log_2pi():
    fam = make_family("dense_linear")
    s = Sample(x=np.array([1.0, 0.0]), y=0.0)
    assert fam.loss(s, np.zeros(2)) == pytest.approx(0.9189385, abs=1e-7)


def test_loss_unit_residual():
    fam = make_family("dense_linear")
    s = Sample(x=np.array([1.0, 1.0]), y=2.0)
    assert fam.loss(s, np.array([1.0, 0.0])) == pytest.approx(1.4189385, abs=1e-7)


def test_sinusoidal_loss_zero_residual_on_e2():
    fam = make_family("sinusoidal_link")
    s = Sample(x=np.array([0.0, 1.0, 0.0]), y=0.5)
    assert fam.loss(s, np.array([0.0, math.pi / 6.0])) == pytest.approx(
        0.9189385, abs=1e-7)


def test_loss_dimension_mismatch_names_sizes():
    fam = make_family("dense_linear")
    s = Sample(x=np.array([1.0, 0.0]), y=0.0)
    with pytest.raises(DimensionMismatchError) as err:
        fam.loss(s, np.zeros(3))
    assert err.value.expected == 2
    assert err.value.actual == 3


def test_loss_grad_examples():
    fam = make_family("dense_linear")
    s = Sample(x=np.array([1.0, 2.0]), y=1.0)
    np.testing.assert_allclose(fam.loss_grad(s, np.zeros(2)), [-1.0, -2.0])

    sin = make_family("sinusoidal_link")
    s3 = Sample(x=np.array([0.0, 0.0, 1.0]), y=0.0)
    np.testing.assert_allclose(sin.loss_grad(s3, np.zeros(2)), [0.0, 0.0],
                               atol=1e-15)


def test_loss_hessian_examples():
    fam = make_family("dense_linear")
    s = Sample(x=np.array([1.0, 2.0]), y=3.7)
    np.testing.assert_allclose(fam.loss_hessian(s, np.array([0.3, -0.4])),
                               [[1.0, 2.0], [2.0, 4.0]])

    sin = make_family("sinusoidal_link")
    s1 = Sample(x=np.array([1.0, 0.0, 0.0]), y=-2.0)
    np.testing.assert_allclose(sin.loss_hessian(s1, np.array([0.9, 2.2])),
                               [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)


# -- derivative oracles ----------------------------------------------------------

def fd_grad(f, beta, rel=1e-6):
    g = np.zeros_like(beta)
    for i in range(beta.size):
        h = rel * (1.0 + abs(beta[i]))
        up, dn = beta.copy(), beta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (2.0 * h)
    return g


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_gradients_match_finite_differences(name):
    rng = np.random.default_rng(3)
    fam = make_family(name)
    for _ in range(100):
        s = random_sample(rng, fam)
        beta = random_beta(rng, fam)
        analytic = fam.loss_grad(s, beta)
        numeric = fd_grad(lambda b: fam.loss(s, b), beta)
        np.testing.assert_allclose(analytic, numeric,
                                   rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_hessians_match_finite_differences(name):
    rng = np.random.default_rng(4)
    fam = make_family(name)
    for _ in range(100):
        s = random_sample(rng, fam)
        beta = random_beta(rng, fam)
        hess = fam.loss_hessian(s, beta)
        np.testing.assert_allclose(hess, hess.T, atol=1e-12)
        for i in range(fam.d):
            col = fd_grad(lambda b: fam.loss_grad(s, b)[i], beta)
            np.testing.assert_allclose(hess[i], col, rtol=1e-4, atol=1e-6)


# -- sampling --------------------------------------------------------------------

def test_sinusoidal_source_support():
    fam = make_family("sinusoidal_link")
    ds = sample_dataset(fam, "source", 100, 9)
    basis = np.eye(3)
    for x in ds.covariates:
        assert any(np.array_equal(x, basis[i]) for i in (0, 1))


def test_degenerate_null_coordinates_exactly_zero():
    fam = make_family("degenerate_linear")
    ds = sample_dataset(fam, "source", 500, 11)
    assert np.all(ds.covariates[:, [2, 3]] == 0.0)


def test_dense_sample_covariance_close_to_identity():
    fam = make_family("dense_linear")
    ds = sample_dataset(fam, "source", 100_000, 13)
    cov = ds.covariates.T @ ds.covariates / ds.n
    assert np.linalg.norm(cov - np.eye(2)) <= 0.05


def test_sampling_deterministic_per_seed():
    fam = make_family("sinusoidal_link")
    a = sample_dataset(fam, "source", 64, 21)
    b = sample_dataset(fam, "source", 64, 21)
    assert np.array_equal(a.covariates, b.covariates)
    assert np.array_equal(a.responses, b.responses)
    c = sample_dataset(fam, "source", 64, 22)
    assert not np.array_equal(a.responses, c.responses)


def test_empty_dataset_rejected():
    fam = make_family("dense_linear")
    with pytest.raises(EmptyDatasetError):
        sample_dataset(fam, "source", 0, 1)


# -- minimizer sets ----------------------------------------------------------------

def test_dense_minimizer_is_singleton():
    fam = make_family("dense_linear")
    desc = fam.minimizer_set(10.0)
    assert desc.kind == "singleton"
    np.testing.assert_allclose(desc.elements[0], fam.beta_star)


def test_sinusoidal_minimizers_within_two_pi():
    fam = make_family("sinusoidal_link")
    desc = fam.minimizer_set(2.0 * math.pi)
    angles = sorted(el[1] for el in desc.elements)
    expected = sorted([math.pi / 6.0, 5.0 * math.pi / 6.0,
                       math.pi / 6.0 - 2.0 * math.pi,
                       5.0 * math.pi / 6.0 - 2.0 * math.pi])
    np.testing.assert_allclose(angles, expected, atol=1e-12)
    for el in desc.elements:
        assert el[0] == fam.beta_star[0]
        assert abs(math.sin(el[1]) - 0.5) < 1e-12


def test_degenerate_minimizer_is_affine():
    fam = make_family("degenerate_linear", d=3, null_coords=(2,))
    desc = fam.minimizer_set(5.0)
    assert desc.kind == "affine_subspace"
    np.testing.assert_allclose(desc.basis[:, 0], [0.0, 0.0, 1.0])
    np.testing.assert_allclose(desc.anchor, fam.beta_star)


def population_source_loss(fam, beta):
    """Exact population source loss for the zoo (finite sum / quadratic form)."""
    fisher_free = fam.mean_diff_second_moment("source", beta)
    return HALF_LOG_2PI + 0.5 + 0.5 * fisher_free


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_minimizer_elements_share_population_loss(name):
    fam = make_family(name)
    desc = fam.minimizer_set(2.0 * math.pi)
    base = population_source_loss(fam, fam.beta_star)
    for el in desc.elements:
        assert abs(population_source_loss(fam, el) - base) <= 1e-12


# -- invariants --------------------------------------------------------------------

def test_reflection_tie_exact():
    fam = make_family("sinusoidal_link")
    rng = np.random.default_rng(8)
    for trial in range(20):
        ds = sample_dataset(fam, "source", 200, trial)
        beta = rng.standard_normal(2) * 3.0
        mirrored = np.array([beta[0], math.pi - beta[1]])
        a = np.mean([fam.loss(s, beta) for s in ds.samples()])
        b = np.mean([fam.loss(s, mirrored) for s in ds.samples()])
        assert abs(a - b) / (1.0 + abs(a)) <= 1e-12


@pytest.mark.parametrize("name", ALL_FAMILIES)
def test_score_mean_zero_at_beta_star(name):
    fam = make_family(name)
    n = 20_000
    ds = sample_dataset(fam, "source", n, 5)
    grads = fam.mean_grad_batch(ds.covariates, fam.beta_star)
    resid = ds.responses - fam.mean_batch(ds.covariates, fam.beta_star)
    score = -(resid @ grads) / n
    assert np.linalg.norm(score) <= 5.0 * math.sqrt(fam.d / n)


# -- serialization -------------------------------------------------------------------

def test_dataset_csv_round_trip():
    fam = make_family("dense_linear")
    ds = sample_dataset(fam, "target", 5, 3)
    text = dataset_to_csv(ds)
    lines = text.splitlines()
    assert lines[0] == "x1,x2,y"
    assert len(lines) == 6
    assert text.endswith("\n")
    parsed = np.array([[float(v) for v in line.split(",")]
                       for line in lines[1:]])
    np.testing.assert_array_equal(parsed[:, :2], ds.covariates)
    np.testing.assert_array_equal(parsed[:, 2], ds.responses)
