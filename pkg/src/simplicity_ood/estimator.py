"""Regularized empirical objective and its multi-start minimizer.

The solver is plain gradient descent with Armijo backtracking, run from
every supplied start; the reported estimate is the lowest-objective
converged terminal point (ties within 1e-12 break toward the lower start
index, which matters for exactly tied unregularized sinusoidal runs).
Closed-form ridge solutions provide the oracle for the linear families.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (EmptyDatasetError, NonconvergenceError,
                     ScheduleDomainError, SingularMatrixError)
from .families import HALF_LOG_2PI, Dataset, ModelFamily, SinusoidalLink
from .regularizers import Regularizer


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-9
    max_iters: int = 100_000
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    init_step: float = 1.0
    starts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.init_step > 0:
            raise ValueError("init_step must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def with_starts(self, starts) -> "SolverConfig":
        return SolverConfig(grad_tol=self.grad_tol, max_iters=self.max_iters,
                            armijo_c=self.armijo_c,
                            backtrack_factor=self.backtrack_factor,
                            init_step=self.init_step,
                            starts=tuple(np.asarray(s, dtype=float)
                                         for s in starts))


@dataclass(frozen=True)
class EstimateResult:
    beta_hat: np.ndarray
    objective: float
    lam: float
    n: int
    grad_norm: float
    start_index: int
    iters: int


def empirical_loss(family: ModelFamily, dataset: Dataset, beta) -> float:
    """Average negative log-likelihood over the dataset, in nats."""
    if dataset.n == 0:
        raise EmptyDatasetError("empirical loss of an empty dataset")
    beta = family.check_beta(beta)
    resid = dataset.responses - family.mean_batch(dataset.covariates, beta)
    return float(0.5 * np.mean(resid ** 2) + HALF_LOG_2PI)


def empirical_loss_grad(family: ModelFamily, dataset: Dataset,
                        beta) -> np.ndarray:
    if dataset.n == 0:
        raise EmptyDatasetError("empirical gradient of an empty dataset")
    beta = family.check_beta(beta)
    resid = dataset.responses - family.mean_batch(dataset.covariates, beta)
    grads = family.mean_grad_batch(dataset.covariates, beta)
    return -(resid @ grads) / dataset.n


def regularized_objective(family: ModelFamily, dataset: Dataset,
                          reg: Regularizer, lam: float, beta):
    """Value and gradient of empirical loss + lam * R at beta."""
    if lam < 0:
        raise ScheduleDomainError("lambda must be nonnegative")
    value = empirical_loss(family, dataset, beta) + lam * reg.value(beta)
    grad = empirical_loss_grad(family, dataset, beta) + lam * reg.grad(beta)
    return value, grad


def lambda_constant_gap(b0: float, delta: float, n: int) -> float:
    """Schedule (8 * b0 / delta) * sqrt(ln n / n) for the constant-gap regime."""
    if not b0 > 0 or not delta > 0:
        raise ScheduleDomainError("b0 and delta must be positive")
    if n < 2:
        raise ScheduleDomainError("schedule requires n >= 2")
    return (8.0 * b0 / delta) * math.sqrt(math.log(n) / n)


def lambda_vanishing_gap(b0: float, delta_max: float, tau: float,
                         n: int) -> float:
    """Schedule (8 * b0 / delta_max) * sqrt(ln n / n**(1 - 2/(3*tau)))."""
    if not b0 > 0:
        raise ScheduleDomainError("b0 must be positive")
    if not 0.0 < delta_max < 1.0:
        raise ScheduleDomainError("delta_max must lie in (0, 1)")
    if tau < 9.0:
        raise ScheduleDomainError(
            f"vanishing-gap schedule requires tau >= 9, got {tau}")
    if n < 2:
        raise ScheduleDomainError("schedule requires n >= 2")
    exponent = 1.0 - 2.0 / (3.0 * tau)
    return (8.0 * b0 / delta_max) * math.sqrt(math.log(n) / n ** exponent)


_EPS = float(np.finfo(np.float64).eps)


def _descend(value_fn, value_grad_fn, start, config: SolverConfig):
    """One gradient-descent run with Armijo backtracking.

    Near a minimum the Armijo margin c*t*||g||^2 falls below the float
    resolution of the objective, where the sufficient-decrease comparison
    is pure rounding noise; from that point a step is accepted only if it
    strictly shrinks the gradient norm, which stays reliably measurable
    and keeps the endgame a contraction.  The objective sequence is
    nonincreasing up to float rounding.

    Returns (converged, beta, value, grad_norm, iters).
    """
    beta = np.array(start, dtype=float)
    val, grad = value_grad_fn(beta)
    if not np.isfinite(val):
        raise ValueError("objective is not finite at a start point")
    iters = 0
    gnorm = float(np.linalg.norm(grad))
    while gnorm > config.grad_tol and iters < config.max_iters:
        gsq = gnorm * gnorm
        noise_floor = 8.0 * _EPS * max(1.0, abs(val))
        step = config.init_step
        accepted = False
        cand_state = None
        while step > 1e-20:
            cand = beta - step * grad
            margin = config.armijo_c * step * gsq
            if margin >= noise_floor:
                if value_fn(cand) <= val - margin:
                    accepted = True
                    break
            else:
                cand_val, cand_grad = value_grad_fn(cand)
                if float(np.linalg.norm(cand_grad)) < gnorm:
                    accepted = True
                    cand_state = (cand_val, cand_grad)
                    break
            step *= config.backtrack_factor
        if not accepted:
            break  # stationary to within numerical precision
        beta = cand
        val, grad = cand_state if cand_state else value_grad_fn(beta)
        gnorm = float(np.linalg.norm(grad))
        iters += 1
    return gnorm <= config.grad_tol, beta, float(val), gnorm, iters


def minimize(family: ModelFamily, dataset: Dataset, reg: Regularizer,
             lam: float, config: SolverConfig) -> EstimateResult:
    """Multi-start minimization of the regularized empirical objective."""
    if not config.starts:
        raise ValueError("solver config supplies no start points")
    if lam < 0:
        raise ScheduleDomainError("lambda must be nonnegative")
    nll_value, nll_value_grad = family.empirical_nll_closures(
        dataset.covariates, dataset.responses)

    def value_fn(beta):
        return nll_value(beta) + lam * reg.value(beta)

    def value_grad_fn(beta):
        value, grad = nll_value_grad(beta)
        return value + lam * reg.value(beta), grad + lam * reg.grad(beta)

    runs = []
    for idx, start in enumerate(config.starts):
        family.check_beta(start)
        converged, beta, val, gnorm, iters = _descend(
            value_fn, value_grad_fn, start, config)
        runs.append((converged, val, gnorm, beta, idx, iters))

    converged_runs = [r for r in runs if r[0]]
    if not converged_runs:
        best = min(runs, key=lambda r: (r[1], r[4]))
        raise NonconvergenceError(
            f"no start reached grad_tol={config.grad_tol} within "
            f"{config.max_iters} iterations (best grad norm {best[2]:.3e})",
            best_beta=best[3], best_objective=best[1], best_grad_norm=best[2])

    best_val = min(r[1] for r in converged_runs)
    tied = [r for r in converged_runs if r[1] <= best_val + 1e-12]
    winner = min(tied, key=lambda r: r[4])
    _, val, gnorm, beta, idx, iters = winner
    return EstimateResult(beta_hat=beta, objective=val, lam=float(lam),
                          n=dataset.n, grad_norm=gnorm, start_index=idx,
                          iters=iters)


def default_starts(family: ModelFamily, dataset: Dataset, window: float,
                   count_per_axis: int) -> list:
    """Deterministic start points that never use the true parameter.

    For the sinusoidal family: an equally spaced grid for the angle
    coordinate on [-window, window], with the slope coordinate set to the
    least-squares estimate from the e1 samples.  For linear families: the
    zero vector plus the least-squares point.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    if count_per_axis < 2:
        raise ValueError("count_per_axis must be >= 2")
    X, y = dataset.covariates, dataset.responses
    if isinstance(family, SinusoidalLink):
        e1_rows = X[:, 0] == 1.0
        slope = float(np.mean(y[e1_rows])) if np.any(e1_rows) else 0.0
        grid = np.linspace(-window, window, count_per_axis)
        return [np.array([slope, b]) for b in grid]
    lstsq = np.linalg.lstsq(X, y, rcond=None)[0]
    return [np.zeros(family.d), lstsq]


def ridge_closed_form(dataset: Dataset, lam: float) -> np.ndarray:
    """Exact minimizer of the ridge-regularized Gaussian-linear objective.

    Solves (X^T X / n + 2*lam*I) beta = X^T y / n, the stationarity
    condition of empirical loss + lam * ||beta||^2; lam = 0 requires a
    full-rank Gram matrix.
    """
    if lam < 0:
        raise ScheduleDomainError("lambda must be nonnegative")
    if dataset.n == 0:
        raise EmptyDatasetError("ridge solve on an empty dataset")
    X, y, n = dataset.covariates, dataset.responses, dataset.n
    gram = (X.T @ X) / n
    rhs = (X.T @ y) / n
    system = gram + 2.0 * lam * np.eye(X.shape[1])
    if lam == 0.0:
        eigs = np.linalg.eigvalsh(gram)
        if eigs[0] <= 1e-12 * max(eigs[-1], 1e-300):
            raise SingularMatrixError(
                "Gram matrix is singular; lam = 0 has no unique solution")
    return np.linalg.solve(system, rhs)
