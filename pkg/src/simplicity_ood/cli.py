"""Config-driven experiment runner emitting reproducible CSV/JSON artifacts.

Usage: simplicity-ood <config-path> [--seed N] [--out DIR]

The flags override the config's master_seed and out_dir.  On failure the
process prints a machine-readable error JSON to stdout and exits nonzero.
The SIMPLICITY_OOD_THREADS environment variable caps the worker count for
trial-parallel commands (0 or unset means auto).
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import analysis, estimator, mlp_lab, rate_lab
from .config import ExperimentConfig, groups_to_zero_based, parse_config
from .errors import SimplicityOodError
from .families import SOURCE, make_family, sample_dataset
from .io_utils import atomic_write_text, csv_text, fmt, json_text
from .regularizers import make_regularizer
from .seeding import derive_seed


def worker_count(cells: int) -> int:
    raw = os.environ.get("SIMPLICITY_OOD_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, cells))


def _family(cfg: ExperimentConfig):
    return make_family(cfg["family"])


def _regularizer(cfg: ExperimentConfig):
    return make_regularizer(cfg["regularizer.kind"],
                            delta=cfg["regularizer.delta"],
                            groups=groups_to_zero_based(
                                cfg["regularizer.groups"]))


def _resolve_delta(cfg, family, reg) -> float:
    if cfg["schedule.delta"] is not None:
        return float(cfg["schedule.delta"])
    return analysis.simplicity_gap(family, reg, cfg["solver.window"])


def _schedule(cfg: ExperimentConfig, family, reg):
    kind = cfg["schedule.kind"]
    if kind == "constant_gap":
        return rate_lab.ConstantGapSchedule(b0=cfg["schedule.b0"],
                                            delta=_resolve_delta(cfg, family,
                                                                 reg))
    if kind == "vanishing_gap":
        return rate_lab.VanishingGapSchedule(b0=cfg["schedule.b0"],
                                             delta_max=cfg["schedule.delta_max"],
                                             tau=cfg["schedule.tau"])
    return rate_lab.FixedSchedule(lam=float(cfg["schedule.lambda"]))


def _solver_config(cfg: ExperimentConfig) -> estimator.SolverConfig:
    return estimator.SolverConfig(grad_tol=cfg["solver.grad_tol"],
                                  max_iters=cfg["solver.max_iters"])


def _json_safe(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def cmd_rate(cfg: ExperimentConfig, out_dir: str) -> None:
    family = _family(cfg)
    reg = _regularizer(cfg)
    schedule = _schedule(cfg, family, reg)
    run_cfg = rate_lab.RateConfig(n_grid=tuple(cfg["rate.n_grid"]),
                                  trials_per_n=cfg["rate.trials_per_n"],
                                  window=cfg["solver.window"],
                                  starts_per_axis=cfg["solver.starts_per_axis"],
                                  solver=_solver_config(cfg),
                                  master_seed=cfg["master_seed"])
    cells = len(run_cfg.n_grid) * run_cfg.trials_per_n
    records = rate_lab.sweep(family, reg, schedule, run_cfg,
                             workers=worker_count(cells))
    fit = rate_lab.fit_rate(records)
    atomic_write_text(os.path.join(out_dir, "records.csv"),
                      csv_text(rate_lab.RECORD_HEADER,
                               rate_lab.records_to_rows(records)))
    atomic_write_text(os.path.join(out_dir, "summary.json"),
                      json_text(rate_lab.summary_dict(fit, records)))


def cmd_mlp(cfg: ExperimentConfig, out_dir: str) -> None:
    train_cfg = mlp_lab.MlpTrainConfig(hidden=cfg["mlp.hidden"],
                                       lr=cfg["mlp.lr"],
                                       epochs=cfg["mlp.epochs"])
    scheme = cfg["mlp.scheme"]
    trials = cfg["mlp.trials"]
    alpha_list = cfg["mlp.alpha_list"]
    cells = (len(alpha_list) if scheme == "interpolation" else trials) \
        * cfg["mlp.runs"]
    records = mlp_lab.run_scheme(scheme, trials, cfg["mlp.runs"], train_cfg,
                                 cfg["master_seed"], alpha_list=alpha_list,
                                 workers=worker_count(cells))
    atomic_write_text(os.path.join(out_dir, "records.csv"),
                      csv_text(mlp_lab.MLP_RECORD_HEADER,
                               mlp_lab.mlp_records_to_rows(records)))
    atomic_write_text(os.path.join(out_dir, "summary.json"),
                      json_text(mlp_lab.mlp_summary_dict(scheme, records,
                                                         alpha_list)))


def cmd_assumptions(cfg: ExperimentConfig, out_dir: str) -> None:
    family = _family(cfg)
    reg = _regularizer(cfg)
    report = analysis.assumption_report(family, reg,
                                        window=cfg["solver.window"],
                                        seed=cfg["master_seed"])
    payload = {
        "alpha_hat": report.alpha_hat,
        "rank_S": report.rank_s,
        "d_S": report.d_s,
        "rank_consistent": report.rank_consistent,
        "delta_hat": _json_safe(report.delta_hat),
        "tau_hat": _json_safe(report.tau_hat),
        "a4": {
            "origin_ok": report.a4.origin_ok,
            "nonneg_ok": report.a4.nonneg_ok,
            "convex_ok": report.a4.convex_ok,
            "smooth_L_estimate": report.a4.smooth_L_estimate,
            "declared_L": report.a4.declared_L,
            "passed": report.a4.passed,
        },
    }
    text = json_text(payload)
    atomic_write_text(os.path.join(out_dir, "assumptions.json"), text)
    sys.stdout.write(text)


def oracle_rows(cfg: ExperimentConfig):
    """Random linear instances comparing the iterative solver to the closed form."""
    reg = make_regularizer("squared_l2")
    lambdas = (0.01, 0.1, 1.0)
    rows = []
    worst = 0.0
    for i in range(cfg["oracle.instances"]):
        rng = np.random.default_rng(derive_seed(cfg["master_seed"], 202, i))
        d = int(rng.integers(2, 9))
        n = int(rng.integers(50, 501))
        lam = lambdas[i % len(lambdas)]
        if i % 2 == 0:
            family = make_family("dense_linear", d=d,
                                 beta_star=rng.normal(size=d))
        else:
            nulls = tuple(rng.choice(d, size=max(1, d // 3), replace=False))
            beta = rng.normal(size=d)
            beta[list(nulls)] = 0.0
            family = make_family("degenerate_linear", d=d, null_coords=nulls,
                                 beta_star=beta)
        data = sample_dataset(family, SOURCE, n,
                              derive_seed(cfg["master_seed"], 203, i))
        starts = estimator.default_starts(family, data, cfg["solver.window"],
                                          cfg["solver.starts_per_axis"])
        solver = _solver_config(cfg).with_starts(starts)
        result = estimator.minimize(family, data, reg, lam, solver)
        oracle = estimator.ridge_closed_form(data, lam)
        diff = float(np.max(np.abs(result.beta_hat - oracle)))
        worst = max(worst, diff)
        rows.append((str(i), family.name, str(n), str(d), fmt(lam), fmt(diff)))
    return rows, worst


def cmd_oracle(cfg: ExperimentConfig, out_dir: str) -> None:
    rows, worst = oracle_rows(cfg)
    atomic_write_text(os.path.join(out_dir, "oracle.csv"),
                      csv_text(("instance", "family", "n", "d", "lambda",
                                "max_abs_diff"), rows))
    atomic_write_text(os.path.join(out_dir, "summary.json"),
                      json_text({"instances": len(rows),
                                 "max_abs_diff": worst}))
    sys.stdout.write(f"oracle comparison: max |delta beta| = {worst:.3e} "
                     f"over {len(rows)} instances\n")


def cmd_bound(cfg: ExperimentConfig, out_dir: str) -> None:
    family = _family(cfg)
    reg = _regularizer(cfg)
    report = analysis.fisher_report(family)
    grad_star = reg.grad(family.beta_star)
    kind = cfg["schedule.kind"]
    entries = []
    for n in cfg["rate.n_grid"]:
        if kind == "vanishing_gap":
            terms = analysis.bound_vanishing_gap(report, grad_star,
                                                 cfg["schedule.b0"],
                                                 cfg["schedule.delta_max"],
                                                 cfg["schedule.tau"], n)
        else:
            terms = analysis.bound_constant_gap(report, grad_star,
                                                cfg["schedule.b0"],
                                                _resolve_delta(cfg, family,
                                                               reg), n)
        entries.append({"n": n, "term1": terms.term1, "term2": terms.term2,
                        "total": terms.total})
    payload = {"family": family.name, "regime": terms.regime,
               "entries": entries}
    atomic_write_text(os.path.join(out_dir, "bound.json"), json_text(payload))


_COMMANDS = {
    "rate": cmd_rate,
    "mlp": cmd_mlp,
    "assumptions": cmd_assumptions,
    "oracle": cmd_oracle,
    "bound": cmd_bound,
}


def run(cfg: ExperimentConfig) -> None:
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    _COMMANDS[cfg["command"]](cfg, out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="simplicity-ood",
        description="Run a configured experiment and write CSV/JSON artifacts.")
    parser.add_argument("config", help="path to a flat dotted-key config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override master_seed")
    parser.add_argument("--out", default=None, help="override out_dir")
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as handle:
            cfg = parse_config(handle.read())
        values = dict(cfg.values)
        if args.seed is not None:
            values["master_seed"] = args.seed
        if args.out is not None:
            values["out_dir"] = args.out
        run(ExperimentConfig(values=values))
    except (SimplicityOodError, OSError, ValueError) as exc:
        error = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stdout.write(json.dumps(error, sort_keys=True) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
