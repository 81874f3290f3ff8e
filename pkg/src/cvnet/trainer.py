"""Mini-batch SGD with momentum, power-decay scheduling, and random search.

One optimizer step per training batch, a full validation pass per epoch,
and validation-based selection of the reported model. Diverged trials
(non-finite loss, exploding parameters, activation poles) are first-class
results with their partial history, not errors: instability is one of the
phenomena this harness exists to observe.

Everything is deterministic given (dataset seed, config): trial substreams
are derived by counter, batch order is fixed unless shuffling is requested,
and CSV exports use a fixed 17-significant-digit float format.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import datagen, nn
from .complex_ops import make_rng

FLOAT_FMT = ".16e"  # 17 significant digits, stable across platforms

CURVES_HEADER = ["epoch", "lr", "train_mse", "val_mse"]
SEARCH_HEADER = ["trial_id", "lr0", "half_life", "init_scale", "best_val", "status"]


class ConfigError(ValueError):
    """A training configuration is inconsistent with the data or model."""


@dataclass(frozen=True)
class TrainConfig:
    lr0: float
    half_life: float
    init_scale: float
    momentum: float = 0.9
    epochs: int = 1000
    batch_size: int = 1000
    seed: int = 0
    decay_power: float = 1.0
    clip: float | None = None
    shuffle: bool = False

    def __post_init__(self):
        if self.lr0 < 0:
            raise ConfigError(f"lr0 must be >= 0, got {self.lr0}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.half_life <= 0:
            raise ConfigError(f"half_life must be positive, got {self.half_life}")
        if self.init_scale <= 0:
            raise ConfigError(f"init_scale must be positive, got {self.init_scale}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")


def lr_at(config: TrainConfig, epoch: int) -> float:
    """Power decay lr0 * (1 + epoch/half_life)^(-p).

    With the default p = 1 the rate halves exactly at epoch = half_life,
    which is what the half-life name promises.
    """
    return config.lr0 * (1.0 + epoch / config.half_life) ** (-config.decay_power)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def sgd_momentum_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    velocity: dict[str, np.ndarray],
    lr: float,
    momentum: float,
    clip: float | None = None,
) -> None:
    """In-place update v <- momentum*v - lr*g, theta <- theta + v.

    g is the conjugate cogradient, the steepest-ascent direction of a real
    loss, so stepping along -g descends. Raises on non-finite updates.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        if clip is not None:
            total = np.sqrt(sum(float(np.sum(np.abs(g) ** 2)) for g in grads.values()))
            if total > clip:
                scale = clip / total
                grads = {name: g * scale for name, g in grads.items()}
        for name, theta in params.items():
            v = velocity[name]
            v *= momentum
            v -= lr * grads[name]
            theta += v
            if not np.all(np.isfinite(theta)):
                raise ad.NumericError(f"non-finite parameter update in {name}")


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    train_mse: float
    val_mse: float


@dataclass
class TrialResult:
    config: TrainConfig
    history: list[EpochRecord]
    best_val: float
    best_epoch: int
    status: str  # "completed" or "diverged"
    model: nn.RecurrentModel | None
    trial_id: int = 0

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"


def _check_dims(model: nn.RecurrentModel, kind: datagen.DatasetKind) -> None:
    d_in, d_out = datagen.model_dims(kind, model.field)
    if model.d_in != d_in or model.d_out != d_out:
        raise ConfigError(
            f"model dims ({model.d_in}, {model.d_out}) do not match "
            f"{kind.value}/{model.field} data dims ({d_in}, {d_out})"
        )


def _batch_slices(n: int, batch_size: int) -> list[slice]:
    return [slice(lo, min(lo + batch_size, n)) for lo in range(0, n, batch_size)]


def evaluate(model: nn.RecurrentModel, samples: np.ndarray, kind: datagen.DatasetKind) -> float:
    """Mean squared error per real DOF over a partition; no gradients."""
    _check_dims(model, kind)
    frames, target = datagen.build_views(samples, kind, model.field)
    loss, _ = nn.forward_loss(model, frames, target)
    return float(loss.value.real)


def zero_baseline_mse(samples: np.ndarray, kind: datagen.DatasetKind, field: str) -> float:
    """Error of the all-zero predictor, the floor any model must beat."""
    _, target = datagen.build_views(samples, kind, field)
    n_dof = nn.dof_multiplier(field) * target.size
    return float(np.sum(target.real**2 + target.imag**2) / n_dof)


def train(
    model: nn.RecurrentModel, data: datagen.DatasetBundle, config: TrainConfig
) -> TrialResult:
    """Train in place; returns history plus the best-validation snapshot.

    Each epoch takes one momentum step per batch at lr_at(epoch); the step
    objective is the summed per-observation error, so larger batches take
    proportionally larger steps. The history records the per-observation
    mean train error seen during the epoch and a full validation error.
    Divergence ends the trial with status "diverged" and whatever history
    accumulated.
    """
    _check_dims(model, data.kind)
    train_frames, train_target = datagen.build_views(data.train, data.kind, model.field)
    val_frames, val_target = datagen.build_views(data.val, data.kind, model.field)
    n_train = data.train.shape[0]
    slices = _batch_slices(n_train, config.batch_size)
    shuffle_rng = make_rng(config.seed, 7) if config.shuffle else None
    # Batch objective: sum of per-observation errors (each already averaged
    # over its real DOF). Gradients therefore scale with batch size and the
    # learning rate is calibrated for full-scale 1000-observation
    # batches. Reported MSEs are per-observation means.
    per_obs_dof = nn.dof_multiplier(model.field) * train_target.shape[0]

    velocity = {name: np.zeros_like(arr) for name, arr in model.params().items()}
    history: list[EpochRecord] = []
    best_val = np.inf
    best_epoch = -1
    best_model: nn.RecurrentModel | None = None
    status = "completed"

    for epoch in range(config.epochs):
        lr = lr_at(config, epoch)
        order = np.arange(n_train)
        if shuffle_rng is not None:
            shuffle_rng.shuffle(order)
        loss_sum = 0.0
        try:
            # Overflow on the way to divergence is expected; the isfinite
            # checks below turn it into a diverged status.
            with np.errstate(over="ignore", invalid="ignore"):
                for sl in slices:
                    idx = order[sl]
                    frames = [f[:, idx] for f in train_frames]
                    target = train_target[:, idx]
                    pvars = nn.param_vars(model)
                    pred = nn.predict_frame(pvars, frames, model.activation)
                    loss = ad.mse(pred, target, per_obs_dof)
                    if not np.isfinite(loss.value.real):
                        raise ad.NumericError("non-finite training loss")
                    ad.backward(loss)
                    grads = {name: v.grad for name, v in pvars.items()}
                    sgd_momentum_step(
                        model.params(), grads, velocity, lr, config.momentum, config.clip
                    )
                    loss_sum += float(loss.value.real)
                val_loss, _ = nn.forward_loss(model, val_frames, val_target)
                val_mse = float(val_loss.value.real)
            if not np.isfinite(val_mse):
                raise ad.NumericError("non-finite validation loss")
        except (ad.NumericError, nn.SingularityError):
            status = "diverged"
            break
        history.append(EpochRecord(epoch, lr, loss_sum / n_train, val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_model = model.copy()

    return TrialResult(
        config=config,
        history=history,
        best_val=float(best_val),
        best_epoch=best_epoch,
        status=status,
        model=best_model,
    )


# ---------------------------------------------------------------------------
# Random hyperparameter search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchSpace:
    """Log-uniform ranges; a degenerate (x, x) range pins the value."""

    lr0: tuple[float, float] = (1e-5, 1.0)
    half_life: tuple[float, float] = (10.0, 1000.0)
    init_scale: tuple[float, float] = (1e-2, 10.0)

    def __post_init__(self):
        for name in ("lr0", "half_life", "init_scale"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"invalid {name} range ({lo}, {hi})")


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def sample_config(
    space: SearchSpace,
    rng: np.random.Generator,
    epochs: int,
    batch_size: int,
    seed: int,
    momentum: float = 0.9,
) -> TrainConfig:
    """Draw order: lr0, half_life, init_scale."""
    return TrainConfig(
        lr0=_log_uniform(rng, *space.lr0),
        half_life=_log_uniform(rng, *space.half_life),
        init_scale=_log_uniform(rng, *space.init_scale),
        momentum=momentum,
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
    )


def _run_trial(args) -> TrialResult:
    data, fld, hidden, space, seed, epochs, batch_size, trial_id = args
    rng = make_rng(seed, trial_id)
    trial_seed = int(rng.integers(0, 2**63))
    config = sample_config(space, rng, epochs, batch_size, trial_seed)
    d_in, d_out = datagen.model_dims(data.kind, fld)
    model = nn.init_model(
        d_in, hidden, d_out, field=fld, init_scale=config.init_scale, seed=trial_seed
    )
    result = train(model, data, config)
    result.trial_id = trial_id
    return result


def rank_results(results: Sequence[TrialResult]) -> list[TrialResult]:
    """Completed trials by ascending best_val; diverged trials last."""
    completed = sorted(
        (r for r in results if not r.diverged), key=lambda r: (r.best_val, r.trial_id)
    )
    diverged = sorted((r for r in results if r.diverged), key=lambda r: r.trial_id)
    return completed + diverged


def random_search(
    data: datagen.DatasetBundle,
    field: str,
    hidden: int,
    n_trials: int,
    seed: int,
    epochs: int,
    batch_size: int,
    space: SearchSpace | None = None,
    jobs: int = 1,
) -> list[TrialResult]:
    """n_trials independent seeded trials, ranked by validation error.

    Trials draw from independent substreams of the search seed, so results
    do not depend on execution order and jobs > 1 changes nothing but wall
    time.
    """
    if n_trials < 1:
        raise ConfigError(f"n_trials must be >= 1, got {n_trials}")
    space = space or SearchSpace()
    work = [
        (data, field, hidden, space, seed, epochs, batch_size, t) for t in range(n_trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial, work))
    else:
        results = [_run_trial(w) for w in work]
    return rank_results(results)


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FMT)


def write_curves_csv(result: TrialResult, path) -> None:
    """Per-epoch curve: epoch, lr, train_mse, val_mse."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVES_HEADER)
        for rec in result.history:
            writer.writerow([rec.epoch, _fmt(rec.lr), _fmt(rec.train_mse), _fmt(rec.val_mse)])


def write_search_csv(results: Sequence[TrialResult], path) -> None:
    """Ranked trial summary: trial_id, lr0, half_life, init_scale, best_val, status."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SEARCH_HEADER)
        for r in results:
            writer.writerow(
                [
                    r.trial_id,
                    _fmt(r.config.lr0),
                    _fmt(r.config.half_life),
                    _fmt(r.config.init_scale),
                    _fmt(r.best_val),
                    r.status,
                ]
            )
