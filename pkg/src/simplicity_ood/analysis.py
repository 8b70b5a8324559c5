"""Fisher information, excess risk, theorem-style bounds, and assumption probes.

The two risk-bound evaluators mirror the two regimes of the estimator's
regularization schedule: a full-rank source Fisher matrix paired with a
finite simplicity gap, and a possibly singular source Fisher matrix whose
pseudoinverse acts only on the informative subspace.  The absolute
constant in front of both bounds is reported as 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .families import SOURCE, TARGET, ModelFamily, sample_dataset
from .regularizers import A4Report, Regularizer, check_a4

DEFAULT_RANK_TOL = 1e-10
DEFAULT_WINDOW = 2.0 * math.pi


@dataclass(frozen=True)
class FisherReport:
    """Source/target Fisher matrices at the true parameter, with spectrum info."""

    i_s: np.ndarray
    i_t: np.ndarray
    i_s_pinv: np.ndarray
    rank_s: int
    smallest_nonzero_eig: float
    d_s: int  # dimension of the flat directions, d - rank_s


@dataclass(frozen=True)
class BoundTerms:
    term1: float
    term2: float
    regime: str  # "constant_gap" | "vanishing_gap"

    @property
    def total(self) -> float:
        return self.term1 + self.term2


@dataclass(frozen=True)
class AssumptionReport:
    a4: A4Report
    alpha_hat: float
    rank_s: int
    d_s: int
    rank_consistent: bool
    delta_hat: float            # +inf for singleton minimizer sets
    tau_hat: float | None       # None unless the minimizer set is a continuum


def fisher_analytic(family: ModelFamily, domain: str, beta) -> np.ndarray:
    """Exact expected loss Hessian under the domain's covariate law."""
    return family.fisher(domain, family.check_beta(beta))


def fisher_monte_carlo(family: ModelFamily, domain: str, beta, m: int,
                       seed: int) -> np.ndarray:
    """Sampling estimate of the Fisher matrix; symmetrized average of
    per-sample Hessians over m draws, deterministic per (m, seed)."""
    if m < 1000:
        raise ValueError("monte carlo estimate requires m >= 1000")
    beta = family.check_beta(beta)
    data = sample_dataset(family, domain, m, seed)
    h = family.hessian_mean(data.covariates, data.responses, beta)
    return 0.5 * (h + h.T)


def pseudoinverse(matrix: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via eigendecomposition.

    Eigenvalues below rank_tol times the largest are treated as exact
    zeros, so degenerate directions map to zero instead of blowing up.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not rank_tol > 0:
        raise ValueError("rank_tol must be positive")
    asym = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asym > 1e-8:
        raise ValueError(f"matrix is not symmetric (asymmetry {asym:.3e})")
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    top = float(np.max(eigvals, initial=0.0))
    if top <= 0.0:
        return np.zeros_like(sym)
    keep = eigvals >= rank_tol * top
    inv = np.zeros_like(eigvals)
    inv[keep] = 1.0 / eigvals[keep]
    return (eigvecs * inv) @ eigvecs.T


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(np.asarray(matrix, dtype=float))
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def fisher_report(family: ModelFamily, rank_tol: float = DEFAULT_RANK_TOL) -> FisherReport:
    """Evaluate both Fisher matrices at the true parameter."""
    i_s = fisher_analytic(family, SOURCE, family.beta_star)
    i_t = fisher_analytic(family, TARGET, family.beta_star)
    eigvals = np.linalg.eigvalsh(i_s)
    top = float(np.max(eigvals, initial=0.0))
    nonzero = eigvals[eigvals >= rank_tol * top] if top > 0 else eigvals[:0]
    rank_s = int(nonzero.size)
    smallest = float(nonzero[0]) if rank_s else 0.0
    return FisherReport(i_s=i_s, i_t=i_t,
                        i_s_pinv=pseudoinverse(i_s, rank_tol),
                        rank_s=rank_s, smallest_nonzero_eig=smallest,
                        d_s=family.d - rank_s)


def excess_risk(family: ModelFamily, beta) -> float:
    """Target-domain risk at beta minus at the true parameter, in nats.

    For the Gaussian-mean zoo this is exactly half the expected squared
    difference of model means under the target covariate law.
    """
    beta = family.check_beta(beta)
    return 0.5 * family.mean_diff_second_moment(TARGET, beta)


def bound_constant_gap(fisher: FisherReport, reg_grad_at_star, b0: float,
                       delta: float, n: int) -> BoundTerms:
    """Two-term risk bound for the constant-gap regime (full-rank source Fisher).

    term1 = Tr(I_T I_S^-1) * ln(n) / n
    term2 = b0^2 * ||I_T^(1/2) I_S^-1 grad R(beta*)||^2 * ln(n) / (delta^2 * n)

    delta = +inf (a singleton minimizer set) zeroes term2.
    """
    if fisher.rank_s < fisher.i_s.shape[0]:
        raise SingularMatrixError(
            "source Fisher matrix is singular; use bound_vanishing_gap")
    if not b0 > 0 or not delta > 0 or n < 2:
        raise ValueError("require b0 > 0, delta > 0, n >= 2")
    i_s_inv = np.linalg.inv(fisher.i_s)
    log_n = math.log(n)
    term1 = float(np.trace(fisher.i_t @ i_s_inv)) * log_n / n
    vec = _psd_sqrt(fisher.i_t) @ (i_s_inv @ np.asarray(reg_grad_at_star,
                                                        dtype=float))
    term2 = b0 ** 2 * float(vec @ vec) * log_n / (delta ** 2 * n)
    return BoundTerms(term1=term1, term2=term2, regime="constant_gap")


def bound_vanishing_gap(fisher: FisherReport, reg_grad_at_star, b0: float,
                        delta_max: float, tau: float, n: int) -> BoundTerms:
    """Pseudoinverse analogue of the two-term bound for the vanishing-gap regime.

    term2's sample-size decay weakens from n to n**(1 - 2/(3*tau)); as
    tau -> inf this reduces to the constant-gap bound with delta = delta_max.
    """
    if not b0 > 0 or n < 2:
        raise ValueError("require b0 > 0 and n >= 2")
    if not 0.0 < delta_max < 1.0:
        raise ValueError("delta_max must lie in (0, 1)")
    if tau < 9.0:
        raise ValueError(f"vanishing-gap bound requires tau >= 9, got {tau}")
    log_n = math.log(n)
    term1 = float(np.trace(fisher.i_t @ fisher.i_s_pinv)) * log_n / n
    vec = _psd_sqrt(fisher.i_t) @ (fisher.i_s_pinv
                                   @ np.asarray(reg_grad_at_star, dtype=float))
    exponent = 1.0 - 2.0 / (3.0 * tau)
    term2 = b0 ** 2 * float(vec @ vec) * log_n / (delta_max ** 2 * n ** exponent)
    return BoundTerms(term1=term1, term2=term2, regime="vanishing_gap")


def simplicity_gap(family: ModelFamily, reg: Regularizer,
                   window: float = DEFAULT_WINDOW) -> float:
    """Minimum simplicity excess of spurious source minimizers over the truth.

    Singleton minimizer sets have an infinite gap; a continuum through the
    true parameter has gap zero (values along the subspace approach the
    truth's); isolated sets report the minimum over enumerated points
    inside the window.
    """
    desc = family.minimizer_set(window)
    if desc.kind == "singleton":
        return math.inf
    if desc.kind == "affine_subspace":
        return 0.0
    spurious = desc.spurious_elements()
    if not spurious:
        raise ValueError("window contains no spurious minimizer; enlarge it")
    r_star = reg.value(desc.anchor)
    return min(reg.value(el) - r_star for el in spurious)


def estimate_tau(family: ModelFamily, reg: Regularizer, k: int = 10,
                 seed: int = 0, window: float = DEFAULT_WINDOW) -> float:
    """Empirical exponent linking parameter distance to simplicity gap.

    Samples points of the minimizer continuum at log-spaced distances
    t in [1e-4, 1e-1] from the true parameter, then regresses ln(distance)
    on ln(gap).  A slope near 0.5 means gap ~ distance^2 (the orthogonal
    squared-norm case); a slope near 1 means the penalty varies to first
    order along the continuum.
    """
    if k < 10:
        raise ValueError("k must be >= 10")
    desc = family.minimizer_set(window)
    if desc.kind != "affine_subspace":
        raise ValueError(
            "tau estimation needs a minimizer continuum; "
            f"this family's minimizer set is {desc.kind}")
    basis = desc.basis
    rng = np.random.default_rng(seed)
    distances = np.exp(np.linspace(math.log(1e-4), math.log(1e-1), k))
    r_star = reg.value(desc.anchor)
    log_t, log_gap = [], []
    for t in distances:
        coef = rng.standard_normal(basis.shape[1])
        direction = basis @ coef
        direction /= np.linalg.norm(direction)
        gap = reg.value(desc.anchor + t * direction) - r_star
        if gap <= 0.0:
            gap = reg.value(desc.anchor - t * direction) - r_star
        if gap <= 0.0:
            continue  # exactly flat direction; carries no exponent signal
        log_t.append(math.log(t))
        log_gap.append(math.log(gap))
    if len(log_t) < 3:
        raise ValueError("too few usable probe points for the tau fit")
    slope = np.polyfit(log_gap, log_t, deg=1)[0]
    return float(slope)


def assumption_report(family: ModelFamily, reg: Regularizer,
                      window: float = DEFAULT_WINDOW, trials: int = 200,
                      seed: int = 0,
                      rank_tol: float = DEFAULT_RANK_TOL) -> AssumptionReport:
    """Bundle the executable assumption diagnostics for one family/penalty pair."""
    a4 = check_a4(reg, family.d, trials=trials, seed=seed)
    desc = family.minimizer_set(window)
    d_s = desc.basis.shape[1] if desc.kind == "affine_subspace" else 0

    alpha_hat = math.inf
    rank_consistent = True
    rank_s = 0
    for idx, element in enumerate(desc.elements):
        eigvals = np.linalg.eigvalsh(fisher_analytic(family, SOURCE, element))
        top = float(np.max(eigvals, initial=0.0))
        nonzero = eigvals[eigvals >= rank_tol * top] if top > 0 else eigvals[:0]
        rank = int(nonzero.size)
        if nonzero.size:
            alpha_hat = min(alpha_hat, float(nonzero[0]))
        rank_consistent &= rank == family.d - d_s
        if np.allclose(element, desc.anchor, rtol=0.0, atol=1e-12):
            rank_s = rank

    delta_hat = simplicity_gap(family, reg, window)
    tau_hat = (estimate_tau(family, reg, seed=seed, window=window)
               if desc.kind == "affine_subspace" else None)
    return AssumptionReport(a4=a4, alpha_hat=alpha_hat, rank_s=rank_s,
                            d_s=d_s, rank_consistent=bool(rank_consistent),
                            delta_hat=delta_hat, tau_hat=tau_hat)
