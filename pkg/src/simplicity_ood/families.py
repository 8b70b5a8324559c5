"""Well-specified Gaussian-mean model families with exact derivatives.

Every family models y | x ~ Normal(m(x; beta), 1), so the negative
log-likelihood of one sample is

    loss(x, y, beta) = 0.5 * (y - m(x; beta))**2 + 0.5 * ln(2*pi)

and all gradients, Hessians, Fisher matrices, and excess risks below are
closed-form.  The zoo is closed: three families, each with an analytic
description of its set of population source-loss minimizers.
"""

import math
import zlib
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DimensionMismatchError, EmptyDatasetError

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

SOURCE = "source"
TARGET = "target"
_DOMAIN_CODE = {SOURCE: 0, TARGET: 1}


@dataclass(frozen=True)
class Sample:
    """One (covariate, response) pair."""

    x: np.ndarray
    y: float


@dataclass(frozen=True)
class Dataset:
    """An ordered batch of samples from one domain, tagged with its seed."""

    covariates: np.ndarray  # shape (n, x_dim)
    responses: np.ndarray   # shape (n,)
    domain: str
    seed: int

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def x_dim(self) -> int:
        return self.covariates.shape[1]

    def samples(self) -> Iterator[Sample]:
        for i in range(self.n):
            yield Sample(self.covariates[i], float(self.responses[i]))


@dataclass(frozen=True)
class MinimizerSetDescription:
    """Analytic description of the population source-loss minimizers.

    kind is one of:
      * "singleton":       the true parameter is the only minimizer.
      * "isolated_list":   finitely many isolated minimizers inside the
                           query window, listed in `elements`.
      * "affine_subspace": anchor + span(columns of basis); `elements`
                           holds only the anchor.

    `anchor` is always the true parameter.
    """

    kind: str
    elements: tuple
    anchor: np.ndarray
    basis: np.ndarray | None = None

    def spurious_elements(self) -> list:
        """Enumerated minimizers other than the anchor."""
        out = []
        for el in self.elements:
            if not np.allclose(el, self.anchor, rtol=0.0, atol=1e-12):
                out.append(el)
        return out


@dataclass(frozen=True)
class AssumptionConstants:
    """User-facing constants for schedules, bounds, and diagnostics.

    All entries must be strictly positive; delta_max must be below 1.
    delta may be None, meaning "resolve from the family's simplicity gap".
    """

    b0: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    b3: float = 1.0
    smoothness_l: float = 2.0
    alpha: float = 1.0
    minima_gap: float = 1.0
    delta: float | None = None
    delta_max: float = 0.5
    tau: float = 9.0

    def __post_init__(self):
        for name in ("b0", "b1", "b2", "b3", "smoothness_l", "alpha",
                     "minima_gap", "delta_max", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"constant {name} must be strictly positive")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("constant delta must be strictly positive")
        if not self.delta_max < 1:
            raise ValueError("delta_max must be < 1")


class ModelFamily:
    """Base class: exposes the model function m(x; beta) and its derivatives.

    Subclasses provide vectorized mean/gradient evaluations, exact
    covariate expectations for both domains, sampling, and the analytic
    minimizer-set description.  All instances are immutable after
    construction and safe to share across threads.
    """

    name: str
    d: int          # parameter dimension
    x_dim: int      # covariate dimension
    beta_star: np.ndarray
    noise_sigma: float = 1.0

    # -- model function ----------------------------------------------------

    def mean_batch(self, X: np.ndarray, beta: np.ndarray) -> np.ndarray:
        """m(x; beta) for each row of X; shape (n,)."""
        raise NotImplementedError

    def mean_grad_batch(self, X: np.ndarray, beta: np.ndarray) -> np.ndarray:
        """Gradient of m w.r.t. beta for each row of X; shape (n, d)."""
        raise NotImplementedError

    def hessian_mean(self, X: np.ndarray, y: np.ndarray,
                     beta: np.ndarray) -> np.ndarray:
        """Average over samples of the per-sample loss Hessian."""
        raise NotImplementedError

    # -- distributions -----------------------------------------------------

    def sample_covariates(self, domain: str, size: int,
                          rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def fisher(self, domain: str, beta: np.ndarray) -> np.ndarray:
        """Exact E_domain[loss Hessian] at beta (responses drawn at beta_star)."""
        raise NotImplementedError

    def mean_diff_second_moment(self, domain: str, beta: np.ndarray) -> float:
        """Exact E_domain[(m(x; beta) - m(x; beta_star))^2]."""
        raise NotImplementedError

    def minimizer_set(self, window: float) -> MinimizerSetDescription:
        raise NotImplementedError

    def empirical_nll_closures(self, X: np.ndarray, y: np.ndarray):
        """Build (value, value_and_grad) callables for the mean NLL on (X, y).

        The generic path touches every sample per evaluation; families with
        structured designs override it with exact sufficient-statistic
        forms so the optimizer's per-iteration cost is independent of n.
        """
        n = y.shape[0]

        def value(beta):
            resid = y - self.mean_batch(X, beta)
            return float(0.5 * np.mean(resid ** 2) + HALF_LOG_2PI)

        def value_grad(beta):
            resid = y - self.mean_batch(X, beta)
            grads = self.mean_grad_batch(X, beta)
            val = float(0.5 * np.mean(resid ** 2) + HALF_LOG_2PI)
            return val, -(resid @ grads) / n

        return value, value_grad

    # -- per-sample loss surface -------------------------------------------

    def check_beta(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.d,):
            raise DimensionMismatchError(self.d, beta.size)
        return beta

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.x_dim,):
            raise DimensionMismatchError(self.x_dim, x.size, what="covariate")
        return x

    def loss(self, sample: Sample, beta) -> float:
        """Negative log-likelihood of one sample, in nats."""
        beta = self.check_beta(beta)
        x = self.check_x(sample.x)
        m = self.mean_batch(x[None, :], beta)[0]
        return 0.5 * (sample.y - m) ** 2 + HALF_LOG_2PI

    def loss_grad(self, sample: Sample, beta) -> np.ndarray:
        """Exact gradient -(y - m) * grad m of the per-sample loss."""
        beta = self.check_beta(beta)
        x = self.check_x(sample.x)
        m = self.mean_batch(x[None, :], beta)[0]
        g = self.mean_grad_batch(x[None, :], beta)[0]
        return -(sample.y - m) * g

    def loss_hessian(self, sample: Sample, beta) -> np.ndarray:
        """Exact per-sample loss Hessian grad m grad m^T - (y - m) * hess m."""
        beta = self.check_beta(beta)
        x = self.check_x(sample.x)
        return self.hessian_mean(x[None, :], np.array([sample.y]), beta)


def _default_beta_star(d: int) -> np.ndarray:
    # decaying alternating pattern: 1, -0.5, 0.25, ...
    return (-0.5) ** np.arange(d)


def _as_spd(matrix, d: int, label: str) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.shape != (d, d):
        raise ValueError(f"{label} must be {d}x{d}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError(f"{label} must be symmetric")
    return m


class LinearMeanFamily(ModelFamily):
    """Shared machinery for families with mean m(x; beta) = beta . x."""

    def _sigma(self, domain: str) -> np.ndarray:
        return self.sigma_source if domain == SOURCE else self.sigma_target

    def mean_batch(self, X, beta):
        return X @ beta

    def mean_grad_batch(self, X, beta):
        return np.array(X, dtype=float, copy=True)

    def hessian_mean(self, X, y, beta):
        # linear mean: the residual term vanishes, leaving E[x x^T]
        return (X.T @ X) / X.shape[0]

    def fisher(self, domain, beta):
        return np.array(self._sigma(domain), copy=True)

    def mean_diff_second_moment(self, domain, beta):
        delta = np.asarray(beta, dtype=float) - self.beta_star
        return float(delta @ self._sigma(domain) @ delta)

    def empirical_nll_closures(self, X, y):
        # quadratic objective: carry only the Gram matrix and moments
        n = y.shape[0]
        gram = (X.T @ X) / n
        xty = (X.T @ y) / n
        yty = float(y @ y) / n

        def value(beta):
            return float(0.5 * (beta @ gram @ beta - 2.0 * (xty @ beta) + yty)
                         + HALF_LOG_2PI)

        def value_grad(beta):
            gb = gram @ beta
            val = float(0.5 * (beta @ gb - 2.0 * (xty @ beta) + yty)
                        + HALF_LOG_2PI)
            return val, gb - xty

        return value, value_grad


class DenseLinear(LinearMeanFamily):
    """Linear mean m(x; beta) = beta . x with full-rank Gaussian covariates.

    The population source loss has the unique minimizer beta_star, so the
    minimizer set is a singleton.
    """

    def __init__(self, d: int = 2, beta_star=None, sigma_source=None,
                 sigma_target=None, name: str = "dense_linear"):
        self.name = name
        self.d = d
        self.x_dim = d
        self.beta_star = (_default_beta_star(d) if beta_star is None
                          else np.asarray(beta_star, dtype=float))
        if self.beta_star.shape != (d,):
            raise DimensionMismatchError(d, self.beta_star.size)
        self.sigma_source = (np.eye(d) if sigma_source is None
                             else _as_spd(sigma_source, d, "sigma_source"))
        self.sigma_target = (np.eye(d) if sigma_target is None
                             else _as_spd(sigma_target, d, "sigma_target"))
        self._chol = {SOURCE: np.linalg.cholesky(self.sigma_source),
                      TARGET: np.linalg.cholesky(self.sigma_target)}

    def sample_covariates(self, domain, size, rng):
        z = rng.standard_normal((size, self.d))
        return z @ self._chol[domain].T

    def minimizer_set(self, window: float) -> MinimizerSetDescription:
        return MinimizerSetDescription(kind="singleton",
                                       elements=(self.beta_star.copy(),),
                                       anchor=self.beta_star.copy())


class DegenerateLinear(LinearMeanFamily):
    """Linear family whose source covariates are exactly zero on some coords.

    The source Fisher matrix is rank deficient, and the minimizer set is the
    affine subspace beta_star + span{e_k : k in null_coords}.  For the true
    parameter to be the simplicity minimizer over that subspace (under a
    norm-type penalty) its null coordinates must be zero; the registry
    default satisfies this, and the analysis gap probe verifies it.
    """

    def __init__(self, d: int = 4, null_coords=(2, 3), beta_star=None,
                 sigma_informative=None, sigma_target=None,
                 name: str = "degenerate_linear"):
        self.name = name
        self.d = d
        self.x_dim = d
        self.null_coords = tuple(sorted(int(k) for k in null_coords))
        if not self.null_coords:
            raise ValueError("null_coords must be nonempty")
        if any(k < 0 or k >= d for k in self.null_coords):
            raise ValueError("null_coords out of range")
        self.live_coords = tuple(k for k in range(d)
                                 if k not in self.null_coords)
        if not self.live_coords:
            raise ValueError("at least one informative coordinate required")
        if beta_star is None:
            # moderate live values keep the ridge-style bias of sqrt(log n / n)
            # schedules in its linear-response regime on desk-scale grids
            bs = 0.4 * _default_beta_star(d)
            bs[list(self.null_coords)] = 0.0
        else:
            bs = np.asarray(beta_star, dtype=float)
            if bs.shape != (d,):
                raise DimensionMismatchError(d, bs.size)
        self.beta_star = bs
        n_live = len(self.live_coords)
        block = (np.eye(n_live) if sigma_informative is None
                 else _as_spd(sigma_informative, n_live, "sigma_informative"))
        self.sigma_source = np.zeros((d, d))
        self.sigma_source[np.ix_(self.live_coords, self.live_coords)] = block
        self.sigma_target = (np.eye(d) if sigma_target is None
                             else _as_spd(sigma_target, d, "sigma_target"))
        self._chol_live = np.linalg.cholesky(block)
        self._chol_target = np.linalg.cholesky(self.sigma_target)

    def sample_covariates(self, domain, size, rng):
        if domain == SOURCE:
            x = np.zeros((size, self.d))
            z = rng.standard_normal((size, len(self.live_coords)))
            x[:, self.live_coords] = z @ self._chol_live.T
            return x
        return rng.standard_normal((size, self.d)) @ self._chol_target.T

    def minimizer_set(self, window: float) -> MinimizerSetDescription:
        basis = np.zeros((self.d, len(self.null_coords)))
        for j, k in enumerate(self.null_coords):
            basis[k, j] = 1.0
        return MinimizerSetDescription(kind="affine_subspace",
                                       elements=(self.beta_star.copy(),),
                                       anchor=self.beta_star.copy(),
                                       basis=basis)


class SinusoidalLink(ModelFamily):
    """Two-parameter nonlinear family with isolated reflected minimizers.

    Covariates live on the standard basis {e1, e2, e3} of R^3 and the model
    mean is m(x; beta) = beta1*x1 + sin(beta2)*x2 + cos(beta2)*x3.  Source
    covariates are uniform on {e1, e2}, so the source loss only sees
    sin(beta2) and cannot distinguish beta2 from pi - beta2 (plus 2*pi
    shifts).  The target adds e3 and therefore resolves the reflection.
    """

    def __init__(self, beta_star=(1.0, math.pi / 6.0),
                 name: str = "sinusoidal_link"):
        self.name = name
        self.d = 2
        self.x_dim = 3
        self.beta_star = np.asarray(beta_star, dtype=float)
        if self.beta_star.shape != (2,):
            raise DimensionMismatchError(2, self.beta_star.size)

    def _support(self, domain: str) -> np.ndarray:
        k = 2 if domain == SOURCE else 3
        return np.eye(3)[:k]

    def _coeffs(self, beta):
        return np.array([beta[0], math.sin(beta[1]), math.cos(beta[1])])

    def mean_batch(self, X, beta):
        return X @ self._coeffs(beta)

    def mean_grad_batch(self, X, beta):
        s, c = math.sin(beta[1]), math.cos(beta[1])
        g = np.empty((X.shape[0], 2))
        g[:, 0] = X[:, 0]
        g[:, 1] = c * X[:, 1] - s * X[:, 2]
        return g

    def _mean_curvature(self, X, beta):
        # second derivative of m w.r.t. beta2, per sample
        s, c = math.sin(beta[1]), math.cos(beta[1])
        return -s * X[:, 1] - c * X[:, 2]

    def hessian_mean(self, X, y, beta):
        n = X.shape[0]
        g = self.mean_grad_batch(X, beta)
        h = (g.T @ g) / n
        resid = y - self.mean_batch(X, beta)
        h[1, 1] -= float(resid @ self._mean_curvature(X, beta)) / n
        return h

    def sample_covariates(self, domain, size, rng):
        k = 2 if domain == SOURCE else 3
        idx = rng.integers(0, k, size=size)
        return np.eye(3)[idx]

    def fisher(self, domain, beta):
        beta = np.asarray(beta, dtype=float)
        support = self._support(domain)
        g = self.mean_grad_batch(support, beta)
        h = (g.T @ g) / support.shape[0]
        expected_resid = (self.mean_batch(support, self.beta_star)
                          - self.mean_batch(support, beta))
        h[1, 1] -= float(expected_resid
                         @ self._mean_curvature(support, beta)) / support.shape[0]
        return h

    def mean_diff_second_moment(self, domain, beta):
        support = self._support(domain)
        diff = (self.mean_batch(support, np.asarray(beta, dtype=float))
                - self.mean_batch(support, self.beta_star))
        return float(np.mean(diff ** 2))

    def empirical_nll_closures(self, X, y):
        # covariates are basis vectors, so per-basis counts and response
        # moments determine the empirical loss exactly
        n = y.shape[0]
        counts = X.sum(axis=0)
        sums = X.T @ y
        sum_sq = float(y @ y)

        def value(beta):
            c = self._coeffs(beta)
            total = sum_sq - 2.0 * (c @ sums) + (c * c) @ counts
            return float(total / (2.0 * n) + HALF_LOG_2PI)

        def value_grad(beta):
            c = self._coeffs(beta)
            total = sum_sq - 2.0 * (c @ sums) + (c * c) @ counts
            d_coeff = (counts * c - sums) / n
            s, co = math.sin(beta[1]), math.cos(beta[1])
            grad = np.array([d_coeff[0], co * d_coeff[1] - s * d_coeff[2]])
            return float(total / (2.0 * n) + HALF_LOG_2PI), grad

        return value, value_grad

    def minimizer_set(self, window: float) -> MinimizerSetDescription:
        """All (beta1*, b) with sin(b) = sin(beta2*) and |b| <= window."""
        if window <= 0:
            raise ValueError("window must be positive")
        b_star = self.beta_star[1]
        values = []
        k_lo = math.floor((-window - math.pi) / (2.0 * math.pi)) - 1
        k_hi = math.ceil((window + math.pi) / (2.0 * math.pi)) + 1
        for k in range(k_lo, k_hi + 1):
            for b in (b_star + 2.0 * math.pi * k,
                      math.pi - b_star + 2.0 * math.pi * k):
                if abs(b) <= window:
                    values.append(b)
        values.sort()
        elements = tuple(np.array([self.beta_star[0], b]) for b in values)
        return MinimizerSetDescription(kind="isolated_list",
                                       elements=elements,
                                       anchor=self.beta_star.copy())


_FACTORIES = {
    "dense_linear": DenseLinear,
    "degenerate_linear": DegenerateLinear,
    "sinusoidal_link": SinusoidalLink,
}


def make_family(name: str, **overrides) -> ModelFamily:
    """Construct a zoo family by name with optional constructor overrides."""
    if name not in _FACTORIES:
        raise ValueError(f"unknown family {name!r}; "
                         f"choose from {sorted(_FACTORIES)}")
    return _FACTORIES[name](**overrides)


def family_names() -> list:
    return sorted(_FACTORIES)


def _dataset_rng(family: ModelFamily, domain: str, n: int,
                 seed: int) -> np.random.Generator:
    name_code = zlib.crc32(family.name.encode("utf-8"))
    ss = np.random.SeedSequence([int(seed), _DOMAIN_CODE[domain], int(n),
                                 name_code])
    return np.random.default_rng(ss)


def sample_dataset(family: ModelFamily, domain: str, n: int,
                   seed: int) -> Dataset:
    """Draw n i.i.d. samples from the domain's covariate law.

    Responses are m(x; beta_star) plus unit Gaussian noise.  The draw is
    deterministic per (family, domain, n, seed).
    """
    if domain not in _DOMAIN_CODE:
        raise ValueError(f"domain must be 'source' or 'target', got {domain!r}")
    if n < 1:
        raise EmptyDatasetError("cannot sample an empty dataset (n >= 1)")
    rng = _dataset_rng(family, domain, n, seed)
    X = family.sample_covariates(domain, n, rng)
    noise = rng.standard_normal(n) * family.noise_sigma
    y = family.mean_batch(X, family.beta_star) + noise
    return Dataset(covariates=X, responses=y, domain=domain, seed=int(seed))


def dataset_to_csv(dataset: Dataset) -> str:
    """Serialize a dataset: header x1,...,xd,y then one full-precision row per sample."""
    d = dataset.x_dim
    lines = [",".join([f"x{i + 1}" for i in range(d)] + ["y"])]
    for i in range(dataset.n):
        cells = [f"{v:.17g}" for v in dataset.covariates[i]]
        cells.append(f"{dataset.responses[i]:.17g}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
