"""Smooth simplicity measures: value, exact gradient, and a property harness.

Each regularizer is convex, nonnegative, zero at the origin, and L-smooth
with a declared constant.  check_a4 verifies those properties numerically
on random probes and estimates the smoothness constant from gradient
differences.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


class Regularizer:
    """Base contract: value(beta), grad(beta), and a declared smoothness."""

    kind: str
    smoothness_L: float

    def value(self, beta) -> float:
        raise NotImplementedError

    def grad(self, beta) -> np.ndarray:
        raise NotImplementedError


class SquaredL2(Regularizer):
    """Weight decay: sum of squared entries."""

    kind = "squared_l2"
    smoothness_L = 2.0

    def value(self, beta):
        beta = np.asarray(beta, dtype=float)
        return float(beta @ beta)

    def grad(self, beta):
        return 2.0 * np.asarray(beta, dtype=float)


class GroupSquaredL2(Regularizer):
    """Sum over groups of the squared l2 norm of each subvector.

    With a true partition this coincides with the plain squared l2 norm;
    the groups are kept so the configuration surface and bookkeeping are
    exercised.  `groups` uses 0-based indices and must cover every
    coordinate exactly once.
    """

    kind = "group_squared_l2"
    smoothness_L = 2.0

    def __init__(self, groups):
        groups = [tuple(int(i) for i in g) for g in groups]
        if not groups or any(len(g) == 0 for g in groups):
            raise ConfigError("groups must be nonempty index lists")
        flat = [i for g in groups for i in g]
        self.d = len(flat)
        if sorted(flat) != list(range(self.d)):
            raise ConfigError(
                "groups must partition coordinates 0..d-1 exactly once")
        self.groups = groups

    def _check(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.d,):
            raise ConfigError(
                f"beta has dimension {beta.size}, groups cover {self.d}")
        return beta

    def value(self, beta):
        beta = self._check(beta)
        return float(sum(beta[list(g)] @ beta[list(g)] for g in self.groups))

    def grad(self, beta):
        return 2.0 * self._check(beta)


class HuberizedL1(Regularizer):
    """Coordinatewise Huber penalty: quadratic inside |t| <= delta, linear outside."""

    kind = "huberized_l1"

    def __init__(self, delta: float = 1.0):
        if not delta > 0:
            raise ConfigError("huberized_l1 requires delta > 0")
        self.delta = float(delta)
        self.smoothness_L = 1.0 / self.delta

    def value(self, beta):
        t = np.abs(np.asarray(beta, dtype=float))
        inside = t <= self.delta
        return float(np.sum(np.where(inside, t * t / (2.0 * self.delta),
                                     t - self.delta / 2.0)))

    def grad(self, beta):
        beta = np.asarray(beta, dtype=float)
        inside = np.abs(beta) <= self.delta
        return np.where(inside, beta / self.delta, np.sign(beta))


def make_regularizer(kind: str, delta: float = 1.0,
                     groups=None) -> Regularizer:
    """Construct a regularizer by kind name."""
    if kind == "squared_l2":
        return SquaredL2()
    if kind == "group_squared_l2":
        if groups is None:
            raise ConfigError("group_squared_l2 requires groups")
        return GroupSquaredL2(groups)
    if kind == "huberized_l1":
        return HuberizedL1(delta)
    raise ConfigError(f"unknown regularizer kind {kind!r}")


@dataclass(frozen=True)
class A4Report:
    """Result of the numerical property check for one regularizer."""

    origin_ok: bool
    nonneg_ok: bool
    convex_ok: bool
    smooth_L_estimate: float
    declared_L: float

    @property
    def passed(self) -> bool:
        return (self.origin_ok and self.nonneg_ok and self.convex_ok
                and self.smooth_L_estimate <= self.declared_L * (1.0 + 1e-9))


def check_a4(reg: Regularizer, d: int, trials: int = 200,
             seed: int = 0) -> A4Report:
    """Probe nonnegativity, midpoint convexity, and gradient smoothness.

    Pairs are drawn at log-spaced scales from 1e-6 up to 10 so that
    nonsmooth behavior near the origin (the classic failure of the raw
    l2 norm) inflates the smoothness estimate and fails the report.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    rng = np.random.default_rng(seed)
    zero = np.zeros(d)
    grad0 = np.asarray(reg.grad(zero), dtype=float)
    origin_ok = reg.value(zero) == 0.0 and float(np.max(np.abs(grad0))) == 0.0

    nonneg_ok = True
    convex_ok = True
    smooth_est = 0.0
    scales = np.exp(rng.uniform(np.log(1e-6), np.log(10.0), size=trials))
    for i in range(trials):
        a = rng.standard_normal(d) * scales[i]
        b = rng.standard_normal(d) * scales[i]
        ra, rb = reg.value(a), reg.value(b)
        nonneg_ok &= ra >= 0.0 and rb >= 0.0
        convex_ok &= reg.value(0.5 * (a + b)) <= 0.5 * (ra + rb) + 1e-12
        gap = float(np.linalg.norm(a - b))
        if gap > 0.0:
            ratio = float(np.linalg.norm(reg.grad(a) - reg.grad(b))) / gap
            smooth_est = max(smooth_est, ratio)
    return A4Report(origin_ok=origin_ok, nonneg_ok=bool(nonneg_ok),
                    convex_ok=bool(convex_ok), smooth_L_estimate=smooth_est,
                    declared_L=reg.smoothness_L)
