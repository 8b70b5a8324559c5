import numpy as np
import pytest

from simplicity_ood.errors import ConfigError
from simplicity_ood.regularizers import (GroupSquaredL2, HuberizedL1,
                                         SquaredL2, check_a4,
                                         make_regularizer)

ALL_KINDS = [SquaredL2(), GroupSquaredL2([[0, 2], [1]]), HuberizedL1(1.0)]


def test_squared_l2_value_and_grad():
    reg = SquaredL2()
    assert reg.value(np.array([1.0, 2.0])) == 5.0
    np.testing.assert_allclose(reg.grad(np.array([1.0, -1.0])), [2.0, -2.0])


def test_huberized_value_example():
    reg = HuberizedL1(1.0)
    assert reg.value(np.array([0.5, 2.0])) == pytest.approx(1.625, abs=1e-12)
    np.testing.assert_allclose(reg.grad(np.array([0.5, 2.0])), [0.5, 1.0])


@pytest.mark.parametrize("reg", ALL_KINDS, ids=lambda r: r.kind)
def test_zero_at_origin(reg):
    d = getattr(reg, "d", 3)
    assert reg.value(np.zeros(d)) == 0.0
    np.testing.assert_array_equal(reg.grad(np.zeros(d)), np.zeros(d))


def test_group_form_coincides_with_squared_l2():
    reg = GroupSquaredL2([[0, 3], [1], [2, 4]])
    rng = np.random.default_rng(0)
    for _ in range(50):
        beta = rng.standard_normal(5) * 3.0
        assert abs(reg.value(beta) - float(beta @ beta)) <= 1e-12


def test_group_partition_validation():
    with pytest.raises(ConfigError):
        GroupSquaredL2([[0, 1], [1, 2]])  # overlapping
    with pytest.raises(ConfigError):
        GroupSquaredL2([[0, 2]])          # gap at index 1
    with pytest.raises(ConfigError):
        GroupSquaredL2([])
    reg = GroupSquaredL2([[0], [1]])
    with pytest.raises(ConfigError):
        reg.value(np.zeros(3))


@pytest.mark.parametrize("reg", ALL_KINDS, ids=lambda r: r.kind)
def test_grad_matches_finite_differences(reg):
    d = getattr(reg, "d", 3)
    rng = np.random.default_rng(1)
    for _ in range(100):
        beta = rng.standard_normal(d) * 2.0
        # keep probes away from the huber kink so the quotient is smooth
        beta = np.where(np.abs(np.abs(beta) - 1.0) < 1e-3, beta + 0.01, beta)
        numeric = np.zeros(d)
        for i in range(d):
            h = 1e-6 * (1.0 + abs(beta[i]))
            up, dn = beta.copy(), beta.copy()
            up[i] += h
            dn[i] -= h
            numeric[i] = (reg.value(up) - reg.value(dn)) / (2.0 * h)
        np.testing.assert_allclose(reg.grad(beta), numeric,
                                   rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("reg", ALL_KINDS, ids=lambda r: r.kind)
def test_grad_norm_bounded_by_smoothness(reg):
    d = getattr(reg, "d", 3)
    rng = np.random.default_rng(2)
    for _ in range(200):
        beta = rng.standard_normal(d) * rng.uniform(0.01, 10.0)
        assert (np.linalg.norm(reg.grad(beta))
                <= reg.smoothness_L * np.linalg.norm(beta) + 1e-12)


def test_check_a4_squared_l2():
    report = check_a4(SquaredL2(), d=4, trials=300, seed=0)
    assert report.origin_ok and report.nonneg_ok and report.convex_ok
    assert report.smooth_L_estimate <= 2.0 * (1.0 + 1e-9)
    assert report.passed


def test_check_a4_huber_small_delta():
    report = check_a4(HuberizedL1(0.5), d=3, trials=300, seed=1)
    assert report.smooth_L_estimate <= 2.0 * (1.0 + 1e-9)
    assert report.passed


def test_check_a4_rejects_nonsmooth_norm():
    class RawL2Norm:
        kind = "raw_l2_norm"
        smoothness_L = 1.0

        def value(self, beta):
            return float(np.linalg.norm(beta))

        def grad(self, beta):
            norm = np.linalg.norm(beta)
            if norm == 0.0:
                return np.zeros_like(np.asarray(beta, dtype=float))
            return np.asarray(beta, dtype=float) / norm

    report = check_a4(RawL2Norm(), d=3, trials=400, seed=2)
    assert report.smooth_L_estimate > 10.0  # diverges near the origin
    assert not report.passed


def test_check_a4_requires_enough_trials():
    with pytest.raises(ValueError):
        check_a4(SquaredL2(), d=2, trials=10, seed=0)


def test_make_regularizer_dispatch():
    assert make_regularizer("squared_l2").kind == "squared_l2"
    assert make_regularizer("huberized_l1", delta=0.25).smoothness_L == 4.0
    grouped = make_regularizer("group_squared_l2", groups=[[0], [1, 2]])
    assert grouped.d == 3
    with pytest.raises(ConfigError):
        make_regularizer("l1")
    with pytest.raises(ConfigError):
        make_regularizer("group_squared_l2")
