"""Two-layer MLP experiments comparing generalizable and spurious solutions.

The network learns the identity map on R^3 from Gaussian clouds around
hypercube vertices.  Half the vertices are the training domain; the other
half either keep identity labels (the generalizable setup) or get labels
from a spurious mapping scheme (uniform shifts, vertex permutations, the
flipped map, or identity/flipped interpolations).  After full-batch Adam
training, solutions are compared by the sum of squared Frobenius norms of
all weights and biases.

Training arithmetic defaults to float32, the customary deep-learning
precision; gradients are exact backpropagation in whatever dtype the
inputs carry.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .io_utils import fmt
from .seeding import derive_seed

SOURCE_CENTERS = np.array([(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0)],
                          dtype=float)
TARGET_CENTERS = np.array([(1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)],
                          dtype=float)
ALL_CENTERS = np.vstack([SOURCE_CENTERS, TARGET_CENTERS])
TRAIN_SAMPLES_PER_CENTER = 100
TEST_SAMPLES_PER_CENTER = 20
TRAIN_COV = 0.01
TEST_COV = 0.001

SCHEMES = ("identity", "uniform", "permutation", "flipped", "interpolation")
DEFAULT_ALPHAS = (0.0, 0.5, 1.0)


# -- mapping schemes ----------------------------------------------------------

@dataclass(frozen=True)
class MapSpec:
    """Resolved labeling rule for covariates near the held-out vertices."""

    kind: str
    shifts: tuple = ()      # four 3-vectors for uniform/permutation kinds
    alpha: float = 0.0      # interpolation weight toward the flipped map

    def target_labels(self, x: np.ndarray, target_index: int) -> np.ndarray:
        """Labels for covariates x sampled around TARGET_CENTERS[target_index]."""
        if self.kind == "identity":
            return np.array(x, copy=True)
        if self.kind in ("uniform", "permutation"):
            t = TARGET_CENTERS[target_index]
            return np.asarray(self.shifts[target_index]) + x - t
        if self.kind == "flipped":
            return 1.0 - x
        if self.kind == "interpolated":
            return self.alpha * (1.0 - x) + (1.0 - self.alpha) * x
        raise ValueError(f"unknown map kind {self.kind!r}")


def identity_map() -> MapSpec:
    return MapSpec(kind="identity")


def flipped_map() -> MapSpec:
    return MapSpec(kind="flipped")


def interpolated_map(alpha: float) -> MapSpec:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return MapSpec(kind="interpolated", alpha=float(alpha))


def uniform_map(shifts) -> MapSpec:
    shifts = tuple(np.asarray(r, dtype=float) for r in shifts)
    if len(shifts) != 4 or any(r.shape != (3,) for r in shifts):
        raise ValueError("uniform map needs four 3-vectors")
    if any(np.any(r < 0.0) or np.any(r > 2.0) for r in shifts):
        raise ValueError("uniform shift vectors must lie in [0, 2]^3")
    return MapSpec(kind="uniform", shifts=shifts)


def permutation_map(shifts) -> MapSpec:
    shifts = tuple(np.asarray(r, dtype=float) for r in shifts)
    if len(shifts) != 4 or any(r.shape != (3,) for r in shifts):
        raise ValueError("permutation map needs four 3-vectors")
    for j, r in enumerate(shifts):
        if not np.all((r == 0.0) | (r == 1.0)):
            raise ValueError("permutation centers must be hypercube vertices")
        if np.array_equal(r, TARGET_CENTERS[j]):
            raise ValueError(
                "permutation must reassign each vertex to a different center")
    return MapSpec(kind="permutation", shifts=shifts)


# -- data ----------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledSet:
    """Covariate/label batch with the originating center of every row."""

    x: np.ndarray             # (n, 3)
    y: np.ndarray             # (n, 3)
    center_index: np.ndarray  # (n,) index into `centers`
    centers: np.ndarray       # (k, 3)

    @property
    def n(self) -> int:
        return self.x.shape[0]


def generate_train_set(map_spec: MapSpec, seed: int) -> LabeledSet:
    """Training clouds around the hypercube vertices, labeled per the map.

    The identity kind uses only the four training vertices (400 samples,
    labels equal covariates).  Every other kind adds the four held-out
    vertices (800 samples), with identity labels on the training vertices
    and map-defined labels on the held-out ones.
    """
    rng = np.random.default_rng(seed)
    std = math.sqrt(TRAIN_COV)
    xs, ys, idx = [], [], []
    centers = (SOURCE_CENTERS if map_spec.kind == "identity" else ALL_CENTERS)
    for i, center in enumerate(centers):
        x = center + std * rng.standard_normal((TRAIN_SAMPLES_PER_CENTER, 3))
        if i < len(SOURCE_CENTERS):
            y = np.array(x, copy=True)
        else:
            y = map_spec.target_labels(x, i - len(SOURCE_CENTERS))
        xs.append(x)
        ys.append(y)
        idx.append(np.full(TRAIN_SAMPLES_PER_CENTER, i))
    return LabeledSet(x=np.vstack(xs), y=np.vstack(ys),
                      center_index=np.concatenate(idx), centers=centers)


def generate_test_set(seed: int) -> LabeledSet:
    """Tight clouds around the held-out vertices with identity labels."""
    rng = np.random.default_rng(seed)
    std = math.sqrt(TEST_COV)
    xs, idx = [], []
    for i, center in enumerate(TARGET_CENTERS):
        xs.append(center + std * rng.standard_normal((TEST_SAMPLES_PER_CENTER, 3)))
        idx.append(np.full(TEST_SAMPLES_PER_CENTER, i))
    x = np.vstack(xs)
    return LabeledSet(x=x, y=np.array(x, copy=True),
                      center_index=np.concatenate(idx),
                      centers=np.array(TARGET_CENTERS, copy=True))


# -- network -------------------------------------------------------------------

@dataclass(frozen=True)
class MlpParams:
    w1: np.ndarray  # (hidden, 3)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (3, hidden)
    b2: np.ndarray  # (3,)

    def arrays(self):
        return self.w1, self.b1, self.w2, self.b2

    def astype(self, dtype) -> "MlpParams":
        return MlpParams(*(a.astype(dtype) for a in self.arrays()))


@dataclass(frozen=True)
class MlpTrainConfig:
    hidden: int = 128
    lr: float = 5e-5
    epochs: int = 40_000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    compute_dtype: str = "float32"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def init_params(config: MlpTrainConfig, seed: int) -> MlpParams:
    """Uniform fan-in initialization: U(-sqrt(1/fan_in), +sqrt(1/fan_in))."""
    rng = np.random.default_rng(seed)
    h = config.hidden
    bound1 = math.sqrt(1.0 / 3.0)
    bound2 = math.sqrt(1.0 / h)
    return MlpParams(w1=rng.uniform(-bound1, bound1, size=(h, 3)),
                     b1=rng.uniform(-bound1, bound1, size=h),
                     w2=rng.uniform(-bound2, bound2, size=(3, h)),
                     b2=rng.uniform(-bound2, bound2, size=3))


def forward(params: MlpParams, x) -> np.ndarray:
    """w2 @ relu(w1 @ x + b1) + b2 for a single 3-vector."""
    x = np.asarray(x)
    hidden = np.maximum(params.w1 @ x + params.b1, 0.0)
    return params.w2 @ hidden + params.b2


def forward_batch(params: MlpParams, x: np.ndarray) -> np.ndarray:
    hidden = np.maximum(x @ params.w1.T + params.b1, 0.0)
    return hidden @ params.w2.T + params.b2


def mse_loss(params: MlpParams, x: np.ndarray, y: np.ndarray) -> float:
    err = forward_batch(params, x) - y
    return float(np.mean(err * err))


def mse_loss_and_grad(params: MlpParams, x: np.ndarray, y: np.ndarray):
    """Mean squared error over all n*3 output entries, with exact backprop.

    The rectifier's subgradient at exactly zero is taken to be zero.
    """
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    pre = x @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    err = hidden @ params.w2.T + params.b2 - y
    loss = float(np.mean(err * err))
    d_out = (2.0 / err.size) * err
    g_w2 = d_out.T @ hidden
    g_b2 = d_out.sum(axis=0)
    d_hidden = d_out @ params.w2
    d_pre = np.where(pre > 0, d_hidden, 0.0)
    g_w1 = d_pre.T @ x
    g_b1 = d_pre.sum(axis=0)
    return loss, MlpParams(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)


@dataclass(frozen=True)
class AdamState:
    m: MlpParams
    v: MlpParams


def init_adam_state(params: MlpParams) -> AdamState:
    zeros = MlpParams(*(np.zeros_like(a) for a in params.arrays()))
    return AdamState(m=zeros, v=MlpParams(*(np.zeros_like(a)
                                            for a in params.arrays())))


def adam_update(params: MlpParams, grads: MlpParams, state: AdamState,
                config: MlpTrainConfig, step_index: int):
    """One bias-corrected Adam step; pure in all arguments."""
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    b1, b2, eps, lr = (config.adam_beta1, config.adam_beta2,
                       config.adam_eps, config.lr)
    c1 = 1.0 - b1 ** step_index
    c2 = 1.0 - b2 ** step_index
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(),
                          state.m.arrays(), state.v.arrays()):
        m_next = b1 * m + (1.0 - b1) * g
        v_next = b2 * v + (1.0 - b2) * (g * g)
        step = lr * (m_next / c1) / (np.sqrt(v_next / c2) + eps)
        new_p.append(p - step)
        new_m.append(m_next)
        new_v.append(v_next)
    return (MlpParams(*new_p),
            AdamState(m=MlpParams(*new_m), v=MlpParams(*new_v)))


def train(map_spec: MapSpec, config: MlpTrainConfig, seed: int):
    """Full-batch Adam on a freshly generated training set.

    Data and initialization seeds derive from `seed`, so the whole run is
    reproducible from (map_spec, config, seed).  Returns the final
    parameters and the per-epoch loss trace (loss at the parameters the
    epoch started with).
    """
    data_seed, init_seed = _train_seeds(seed)
    train_set = generate_train_set(map_spec, data_seed)
    dtype = np.dtype(config.compute_dtype)
    x = train_set.x.astype(dtype)
    y = train_set.y.astype(dtype)
    params = init_params(config, init_seed).astype(dtype)
    state = init_adam_state(params)
    trace = []
    for epoch in range(1, config.epochs + 1):
        loss, grads = mse_loss_and_grad(params, x, y)
        if not math.isfinite(loss):
            raise DivergenceError(epoch=epoch, value=loss)
        trace.append(loss)
        params, state = adam_update(params, grads, state, config, epoch)
    return params, trace


def weight_norm(params: MlpParams) -> float:
    """Sum of squared entries over all weight matrices and bias vectors."""
    return float(sum(np.sum(a.astype(np.float64) ** 2)
                     for a in params.arrays()))


def center_key(center) -> str:
    return "".join(str(int(round(c))) for c in center)


def per_center_test_mse(params: MlpParams, test_set: LabeledSet) -> dict:
    """Mean squared error (per output coordinate) grouped by test center."""
    out = {}
    pred = forward_batch(params, test_set.x)
    err = pred - test_set.y
    for i, center in enumerate(test_set.centers):
        rows = test_set.center_index == i
        out[center_key(center)] = float(np.mean(err[rows] ** 2))
    return out


# -- scheme sweeps ---------------------------------------------------------------

@dataclass(frozen=True)
class MlpTrialRecord:
    scheme: str
    trial: int
    run: int
    final_train_mse: float
    weight_norm: float
    test_mse: dict  # center key -> mse


def _train_seeds(seed: int):
    return derive_seed(seed, 0), derive_seed(seed, 1)


def _map_for_trial(scheme: str, trial: int, master_seed: int,
                   alpha_list) -> MapSpec:
    if scheme == "identity":
        return identity_map()
    if scheme == "flipped":
        return flipped_map()
    if scheme == "interpolation":
        return interpolated_map(alpha_list[trial])
    rng = np.random.default_rng(derive_seed(master_seed, trial, 101))
    if scheme == "uniform":
        return uniform_map(rng.uniform(0.0, 2.0, size=(4, 3)))
    if scheme == "permutation":
        shifts = []
        for t in TARGET_CENTERS:
            others = [v for v in ALL_CENTERS if not np.array_equal(v, t)]
            shifts.append(others[int(rng.integers(0, len(others)))])
        return permutation_map(shifts)
    raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def _run_cell(args):
    scheme, trial, run, map_spec, config, master_seed = args
    run_seed = derive_seed(master_seed, trial, run)
    params, _ = train(map_spec, config, run_seed)
    data_seed, _ = _train_seeds(run_seed)
    train_set = generate_train_set(map_spec, data_seed)
    dtype = np.dtype(config.compute_dtype)
    final_mse = mse_loss(params, train_set.x.astype(dtype),
                         train_set.y.astype(dtype))
    test_set = generate_test_set(derive_seed(master_seed, trial, run, 2))
    return MlpTrialRecord(scheme=scheme, trial=trial, run=run,
                          final_train_mse=final_mse,
                          weight_norm=weight_norm(params),
                          test_mse=per_center_test_mse(params, test_set))


def run_scheme(scheme: str, trials: int, runs_per_trial: int,
               config: MlpTrainConfig, master_seed: int,
               alpha_list=DEFAULT_ALPHAS, workers: int = 1) -> list:
    """Train every (trial, run) cell of a scheme and collect records.

    Map randomness (uniform shift vectors, permutation reassignments)
    resamples per trial; data and initialization resample per run.  For
    the interpolation scheme the trials traverse alpha_list, one alpha
    per trial, and `trials` is overridden accordingly.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if trials < 1 or runs_per_trial < 1:
        raise ValueError("trials and runs_per_trial must be >= 1")
    alpha_list = [float(a) for a in alpha_list]
    if scheme == "interpolation":
        trials = len(alpha_list)
    maps = [_map_for_trial(scheme, t, master_seed, alpha_list)
            for t in range(trials)]
    cells = [(scheme, trial, run, maps[trial], config, master_seed)
             for trial in range(trials) for run in range(runs_per_trial)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(cell) for cell in cells]
    records.sort(key=lambda r: (r.trial, r.run))
    return records


MLP_RECORD_HEADER = ("scheme", "trial", "run", "final_train_mse",
                     "weight_norm", "test_mse_110", "test_mse_101",
                     "test_mse_011", "test_mse_111")
_TEST_KEYS = ("110", "101", "011", "111")


def mlp_records_to_rows(records):
    for r in records:
        yield ((r.scheme, str(r.trial), str(r.run), fmt(r.final_train_mse),
                fmt(r.weight_norm))
               + tuple(fmt(r.test_mse[k]) for k in _TEST_KEYS))


def trial_mean_norms(records) -> dict:
    """Mean weight norm per trial index."""
    sums, counts = {}, {}
    for r in records:
        sums[r.trial] = sums.get(r.trial, 0.0) + r.weight_norm
        counts[r.trial] = counts.get(r.trial, 0) + 1
    return {t: sums[t] / counts[t] for t in sorted(sums)}


def mlp_summary_dict(scheme: str, records, alpha_list=None) -> dict:
    norms = [r.weight_norm for r in records]
    summary = {
        "scheme": scheme,
        "records": len(records),
        "mean_weight_norm": float(np.mean(norms)),
        "mean_final_train_mse": float(np.mean([r.final_train_mse
                                               for r in records])),
        "trial_mean_weight_norms": {str(t): v for t, v
                                    in trial_mean_norms(records).items()},
        "mean_test_mse_by_center": {
            k: float(np.mean([r.test_mse[k] for r in records]))
            for k in _TEST_KEYS},
    }
    if scheme == "interpolation" and alpha_list is not None:
        summary["alpha_list"] = [float(a) for a in alpha_list]
    return summary
