"""Repeated-trial excess-risk sweeps over the sample size and rate fitting.

Each trial draws a fresh source dataset, resolves the regularization level
from a schedule, minimizes the regularized objective from deterministic
multi-starts, and records the exact target excess risk plus which
minimizer basin won.  Trials are independent; seeds derive from
(master_seed, n, trial) so parallel and serial execution emit identical
records.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import excess_risk
from .errors import DegenerateFitError, ScheduleDomainError
from .estimator import (SolverConfig, default_starts, lambda_constant_gap,
                        lambda_vanishing_gap, minimize)
from .families import SOURCE, ModelFamily, sample_dataset
from .io_utils import fmt
from .regularizers import Regularizer
from .seeding import derive_seed

BASIN_RADIUS = 0.5
DEFAULT_WINDOW = 2.0 * math.pi


# -- regularization schedules (picklable callables of n) ---------------------

@dataclass(frozen=True)
class ConstantGapSchedule:
    b0: float
    delta: float

    def __post_init__(self):
        if not math.isfinite(self.delta) or not self.delta > 0:
            raise ScheduleDomainError(
                "constant-gap schedule requires a finite positive delta")

    def __call__(self, n: int) -> float:
        return lambda_constant_gap(self.b0, self.delta, n)


@dataclass(frozen=True)
class VanishingGapSchedule:
    b0: float
    delta_max: float
    tau: float

    def __post_init__(self):
        # fail fast instead of at the first trial
        lambda_vanishing_gap(self.b0, self.delta_max, self.tau, 2)

    def __call__(self, n: int) -> float:
        return lambda_vanishing_gap(self.b0, self.delta_max, self.tau, n)


@dataclass(frozen=True)
class FixedSchedule:
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ScheduleDomainError("fixed schedule requires lambda >= 0")

    def __call__(self, n: int) -> float:
        return self.lam


@dataclass(frozen=True)
class RootLogSchedule:
    """lambda(n) = scale * sqrt(ln n / n); handy for degenerate-family runs."""

    scale: float = 1.0

    def __call__(self, n: int) -> float:
        if n < 2:
            raise ScheduleDomainError("schedule requires n >= 2")
        return self.scale * math.sqrt(math.log(n) / n)


# -- records ------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    family_name: str
    n: int
    trial_index: int
    seed: int
    lam: float
    excess: float
    objective: float
    basin: str  # "true" | "spurious" | "other"
    beta_hat: np.ndarray


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_grid: tuple
    medians: tuple


@dataclass(frozen=True)
class RateConfig:
    n_grid: tuple
    trials_per_n: int
    window: float = DEFAULT_WINDOW
    starts_per_axis: int = 9
    solver: SolverConfig = field(default_factory=SolverConfig)
    master_seed: int = 0

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if list(grid) != sorted(set(grid)):
            raise ValueError("n_grid must be strictly increasing")
        if self.trials_per_n < 1:
            raise ValueError("trials_per_n must be >= 1")
        object.__setattr__(self, "n_grid", grid)


def classify_basin(family: ModelFamily, beta_hat,
                   window: float = DEFAULT_WINDOW,
                   radius: float = BASIN_RADIUS) -> str:
    """Label an estimate by its nearest enumerated minimizer within `radius`."""
    beta_hat = family.check_beta(beta_hat)
    desc = family.minimizer_set(window)
    dists = [float(np.linalg.norm(beta_hat - el)) for el in desc.elements]
    nearest = int(np.argmin(dists))
    if dists[nearest] > radius:
        return "other"
    if np.allclose(desc.elements[nearest], desc.anchor, rtol=0.0, atol=1e-12):
        return "true"
    return "spurious"


def run_trial(family: ModelFamily, reg: Regularizer, n: int, schedule,
              config: RateConfig, seed: int, trial_index: int = 0) -> TrialRecord:
    """One draw of the full pipeline: sample, schedule, minimize, evaluate."""
    dataset = sample_dataset(family, SOURCE, n, seed)
    lam = float(schedule(n))
    starts = default_starts(family, dataset, config.window,
                            config.starts_per_axis)
    solver = config.solver.with_starts(starts)
    result = minimize(family, dataset, reg, lam, solver)
    return TrialRecord(family_name=family.name, n=n, trial_index=trial_index,
                       seed=int(seed), lam=lam,
                       excess=excess_risk(family, result.beta_hat),
                       objective=result.objective,
                       basin=classify_basin(family, result.beta_hat,
                                            config.window),
                       beta_hat=result.beta_hat)


def _trial_cell(args):
    family, reg, n, schedule, config, trial = args
    seed = derive_seed(config.master_seed, n, trial)
    return run_trial(family, reg, n, schedule, config, seed, trial_index=trial)


def sweep(family: ModelFamily, reg: Regularizer, schedule,
          config: RateConfig, workers: int = 1) -> list:
    """All (n, trial) cells of the grid, sorted by (n, trial)."""
    cells = [(family, reg, n, schedule, config, trial)
             for n in config.n_grid
             for trial in range(config.trials_per_n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trial_cell, cells, chunksize=4))
    else:
        records = [_trial_cell(cell) for cell in cells]
    records.sort(key=lambda r: (r.n, r.trial_index))
    return records


def fit_rate(records) -> RateFit:
    """Least-squares slope of ln(median excess) against ln(n)."""
    by_n = {}
    for record in records:
        by_n.setdefault(record.n, []).append(record.excess)
    if len(by_n) < 3:
        raise DegenerateFitError("rate fit needs at least 3 distinct n values")
    n_grid = tuple(sorted(by_n))
    medians = tuple(float(np.median(by_n[n])) for n in n_grid)
    if any(m <= 0.0 for m in medians):
        raise DegenerateFitError(
            "nonpositive median excess; increase noise or decrease n")
    x = np.log(np.array(n_grid, dtype=float))
    y = np.log(np.array(medians))
    slope, intercept = np.polyfit(x, y, deg=1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 and ss_res == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept),
                   r_squared=float(r_squared), n_grid=n_grid, medians=medians)


def basin_true_fraction(records) -> dict:
    """Fraction of trials per n that landed in the true basin."""
    totals, hits = {}, {}
    for record in records:
        totals[record.n] = totals.get(record.n, 0) + 1
        hits[record.n] = hits.get(record.n, 0) + (record.basin == "true")
    return {n: hits[n] / totals[n] for n in sorted(totals)}


RECORD_HEADER = ("family", "n", "trial", "seed", "lambda", "excess",
                 "objective", "basin", "beta_hat")


def records_to_rows(records):
    for r in records:
        yield (r.family_name, str(r.n), str(r.trial_index), str(r.seed),
               fmt(r.lam), fmt(r.excess), fmt(r.objective), r.basin,
               ";".join(fmt(v) for v in r.beta_hat))


def summary_dict(fit: RateFit, records) -> dict:
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "n_grid": list(fit.n_grid),
        "medians": list(fit.medians),
        "basin_true_fraction_by_n": {str(n): frac for n, frac
                                     in basin_true_fraction(records).items()},
    }
