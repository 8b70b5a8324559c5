"""Numerical lab for simplicity-regularized maximum likelihood under covariate shift."""

from .analysis import (AssumptionReport, BoundTerms, FisherReport,
                       assumption_report, bound_constant_gap,
                       bound_vanishing_gap, estimate_tau, excess_risk,
                       fisher_analytic, fisher_monte_carlo, fisher_report,
                       pseudoinverse, simplicity_gap)
from .estimator import (EstimateResult, SolverConfig, default_starts,
                        empirical_loss, lambda_constant_gap,
                        lambda_vanishing_gap, minimize, regularized_objective,
                        ridge_closed_form)
from .families import (AssumptionConstants, Dataset, MinimizerSetDescription,
                       ModelFamily, Sample, dataset_to_csv, family_names,
                       make_family, sample_dataset)
from .rate_lab import (ConstantGapSchedule, FixedSchedule, RateConfig,
                       RateFit, RootLogSchedule, TrialRecord,
                       VanishingGapSchedule, classify_basin, fit_rate,
                       run_trial, sweep)
from .regularizers import (A4Report, GroupSquaredL2, HuberizedL1, Regularizer,
                           SquaredL2, check_a4, make_regularizer)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
