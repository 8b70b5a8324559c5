"""Flat dotted-key experiment configuration.

Grammar: one `section.key = value` assignment per line, `#` comments,
UTF-8.  Values are JSON literals (numbers, double-quoted strings, lists,
booleans, null).  Unknown keys are hard errors with a nearest-key hint so
typos never silently fall back to defaults.
"""

import difflib
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .families import family_names
from .mlp_lab import SCHEMES

COMMANDS = ("rate", "mlp", "assumptions", "oracle", "bound")
SCHEDULE_KINDS = ("constant_gap", "vanishing_gap", "fixed")
REGULARIZER_KINDS = ("squared_l2", "group_squared_l2", "huberized_l1")

DEFAULT_N_GRID = [250, 500, 1000, 2000, 4000, 8000, 16000]


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive_number(v):
    return _is_number(v) and v > 0


def _positive_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _int_list(v):
    return (isinstance(v, list) and len(v) > 0
            and all(_positive_int(i) for i in v))


def _number_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_is_number(i) for i in v)


def _group_list(v):
    return (isinstance(v, list) and len(v) > 0
            and all(isinstance(g, list) and len(g) > 0
                    and all(_positive_int(i) for i in g) for g in v))


# key -> (default, predicate, description)
_SCHEMA = {
    "command": (None, lambda v: v in COMMANDS, f"one of {COMMANDS}"),
    "family": ("sinusoidal_link", lambda v: v in family_names(),
               f"one of {family_names()}"),
    "master_seed": (0, lambda v: isinstance(v, int) and v >= 0,
                    "a nonnegative integer"),
    "out_dir": ("out", lambda v: isinstance(v, str) and v != "",
                "a nonempty path string"),
    "regularizer.kind": ("squared_l2", lambda v: v in REGULARIZER_KINDS,
                         f"one of {REGULARIZER_KINDS}"),
    "regularizer.delta": (1.0, _positive_number, "a positive number"),
    "regularizer.groups": (None, _group_list,
                           "a list of 1-based index lists"),
    "solver.grad_tol": (1e-9, _positive_number, "a positive number"),
    "solver.max_iters": (100_000, _positive_int, "a positive integer"),
    "solver.window": (2.0 * math.pi, _positive_number, "a positive number"),
    "solver.starts_per_axis": (9, lambda v: _positive_int(v) and v >= 2,
                               "an integer >= 2"),
    "schedule.kind": ("constant_gap", lambda v: v in SCHEDULE_KINDS,
                      f"one of {SCHEDULE_KINDS}"),
    "schedule.lambda": (None, lambda v: _is_number(v) and v >= 0,
                        "a nonnegative number"),
    "schedule.b0": (1.0, _positive_number, "a positive number"),
    "schedule.delta": (None, _positive_number, "a positive number"),
    "schedule.delta_max": (0.5, lambda v: _is_number(v) and 0 < v < 1,
                           "a number in (0, 1)"),
    "schedule.tau": (9.0, lambda v: _is_number(v) and v >= 9,
                     "a number >= 9"),
    "rate.n_grid": (DEFAULT_N_GRID, _int_list, "a list of positive integers"),
    "rate.trials_per_n": (50, _positive_int, "a positive integer"),
    "oracle.instances": (20, _positive_int, "a positive integer"),
    "mlp.hidden": (128, _positive_int, "a positive integer"),
    "mlp.lr": (5e-5, _positive_number, "a positive number"),
    "mlp.epochs": (40_000, _positive_int, "a positive integer"),
    "mlp.scheme": ("identity", lambda v: v in SCHEMES, f"one of {SCHEMES}"),
    "mlp.trials": (1, _positive_int, "a positive integer"),
    "mlp.runs": (10, _positive_int, "a positive integer"),
    "mlp.alpha_list": ([0.0, 0.5, 1.0], _number_list,
                       "a list of numbers in [0, 1]"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment settings with defaults applied."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]


def _parse_lines(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected `key = value`")
        key, _, value_text = stripped.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            raw[key] = json.loads(value_text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"line {lineno}: value for {key!r} is not a JSON literal "
                f"({exc.msg}); strings need double quotes") from None
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse, validate, and fill defaults; unknown keys are errors."""
    raw = _parse_lines(text)
    values = {key: default for key, (default, _, _) in _SCHEMA.items()}
    for key, value in raw.items():
        if key not in _SCHEMA:
            hint = difflib.get_close_matches(key, _SCHEMA.keys(), n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown config key {key!r}{suffix}")
        _, predicate, description = _SCHEMA[key]
        if not predicate(value):
            raise ConfigError(f"config key {key!r} must be {description}, "
                              f"got {value!r}")
        values[key] = value

    if values["command"] is None:
        raise ConfigError("missing required key 'command'")
    if values["regularizer.kind"] == "group_squared_l2" \
            and values["regularizer.groups"] is None:
        raise ConfigError("group_squared_l2 requires regularizer.groups")
    if values["schedule.kind"] == "fixed" and values["schedule.lambda"] is None:
        raise ConfigError("schedule.kind = \"fixed\" requires schedule.lambda")
    if values["mlp.scheme"] == "interpolation" \
            and any(not 0.0 <= a <= 1.0 for a in values["mlp.alpha_list"]):
        raise ConfigError("mlp.alpha_list entries must lie in [0, 1]")
    grid = values["rate.n_grid"]
    if sorted(set(grid)) != list(grid):
        raise ConfigError("rate.n_grid must be strictly increasing")
    if values["schedule.kind"] != "fixed" and min(grid) < 2:
        raise ConfigError("rate.n_grid entries must be >= 2 for "
                          "theorem-derived schedules")
    return ExperimentConfig(values=values)


def groups_to_zero_based(groups):
    """Config groups are 1-based index lists; internals are 0-based."""
    if groups is None:
        return None
    return [[i - 1 for i in g] for g in groups]
