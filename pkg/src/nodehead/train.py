"""Optimizers, the training loop, and training-stability statistics.

The loop is fully deterministic for a fixed config: head init, the
train/val split, and every epoch's shuffle derive from the master seed
through named sub-seeds. Per-epoch telemetry lands in
:class:`MetricsRecord`; :func:`stability_stats` turns a metrics series into
the rolling-variability numbers the head comparison is judged on.

Metrics CSV layout (stable contract): header
``epoch,train_loss,train_acc,val_loss,val_acc,wall_ms,n_feval``, one row per
epoch, floats at 6 significant digits, newline-terminated.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .data import split_train_val
from .errors import ContractError, FormatError, ShapeError
from .model import evaluate, head_from_flat, head_to_flat, init_baseline_head, init_node_head, train_step
from .seeding import subseed
from .solvers import SolverConfig

METRICS_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "wall_ms", "n_feval")


@dataclass
class AdamConfig:
    """Adam with bias correction; defaults follow common practice."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0:
            raise ContractError(f"lr must be >= 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ContractError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0:
            raise ContractError(f"eps must be > 0, got {self.eps}")


@dataclass
class SgdConfig:
    """Stochastic gradient descent with classical momentum."""

    lr: float = 1e-2
    momentum: float = 0.9

    def __post_init__(self):
        if self.lr < 0:
            raise ContractError(f"lr must be >= 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ContractError(f"momentum must lie in [0, 1), got {self.momentum}")


def adam_update(params, grads, state, cfg):
    """One Adam step. ``state`` is the (m, v, step) triple; step counts
    completed updates, so bias correction uses step + 1. Returns the new
    (params, state) pair without mutating the inputs."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ShapeError(f"params shape {params.shape} vs grads shape {grads.shape}")
    m, v, step = state
    t = step + 1
    m2 = cfg.beta1 * m + (1 - cfg.beta1) * grads
    v2 = cfg.beta2 * v + (1 - cfg.beta2) * grads * grads
    m_hat = m2 / (1 - cfg.beta1 ** t)
    v_hat = v2 / (1 - cfg.beta2 ** t)
    new_params = params - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new_params, (m2, v2, t)


def sgd_update(params, grads, velocity, cfg):
    """One momentum-SGD step: v <- momentum*v + g, p <- p - lr*v."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ShapeError(f"params shape {params.shape} vs grads shape {grads.shape}")
    v2 = cfg.momentum * velocity + grads
    return params - cfg.lr * v2, v2


@dataclass
class TrainConfig:
    """Everything one training run depends on, seed included."""

    optimizer: AdamConfig | SgdConfig = field(default_factory=AdamConfig)
    epochs: int = 1
    batch_size: int = 64
    seed: int = 0
    grad_method: str = "discrete"
    solver: SolverConfig = field(default_factory=SolverConfig)
    val_fraction: float = 0.1
    width: int = 64
    init_scale: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.grad_method not in ("discrete", "adjoint"):
            raise ContractError(f"unknown grad_method {self.grad_method!r}")
        if not 0 < self.val_fraction < 1:
            raise ContractError(f"val_fraction must be in (0, 1), got {self.val_fraction}")


@dataclass
class MetricsRecord:
    """Telemetry for one epoch; epochs are numbered from 1."""

    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    wall_ms: float
    n_feval: int


@dataclass
class StabilityReport:
    """Rolling-variability view of a metrics series.

    Rolling standard deviations use the population convention (divisor =
    window); each series has len(metrics) - window + 1 entries.
    """

    window: int
    rolling_std_val_loss: np.ndarray
    rolling_std_val_acc: np.ndarray
    mean_rolling_std_val_loss: float
    max_epoch_to_epoch_jump: float


def train(head_kind, dataset, cfg):
    """Train a head of ``head_kind`` ("node" or "baseline") on ``dataset``.

    Splits off a validation part, initializes the head from the seed, and
    runs seeded-shuffle minibatch epochs. Returns (trained head, list of
    MetricsRecord). Identical configs produce identical metric series;
    wall_ms is the one wall-clock field.
    """
    if head_kind not in ("node", "baseline"):
        raise ContractError(f"unknown head kind {head_kind!r}")
    if len(dataset) == 0:
        raise ContractError("empty dataset")
    train_ds, val_ds = split_train_val(dataset, cfg.val_fraction, subseed(cfg.seed, "split"))
    classes = dataset.class_count
    if head_kind == "node":
        head = init_node_head(cfg.seed, dataset.d, classes, width=cfg.width, scale=cfg.init_scale)
    else:
        head = init_baseline_head(cfg.seed, dataset.d, classes)

    flat = head_to_flat(head)
    if isinstance(cfg.optimizer, AdamConfig):
        opt_state = (np.zeros_like(flat), np.zeros_like(flat), 0)
        step_fn = adam_update
    else:
        opt_state = np.zeros_like(flat)
        step_fn = sgd_update

    shuffle_rng = np.random.default_rng(subseed(cfg.seed, "shuffle"))
    n_train = len(train_ds)
    records = []
    for epoch in range(1, cfg.epochs + 1):
        tic = time.perf_counter()
        perm = shuffle_rng.permutation(n_train)
        loss_sum = 0.0
        n_correct = 0
        n_feval = 0
        for start in range(0, n_train, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, grads, stats, correct = train_step(
                head, train_ds.features[idx], train_ds.labels[idx], cfg.grad_method, cfg.solver
            )
            flat, opt_state = step_fn(flat, grads, opt_state, cfg.optimizer)
            head = head_from_flat(head, flat)
            loss_sum += loss * idx.size
            n_correct += correct
            n_feval += stats.n_feval
        val_loss, val_acc, val_stats = evaluate(head, val_ds.features, val_ds.labels, cfg.solver)
        n_feval += val_stats.n_feval
        records.append(
            MetricsRecord(
                epoch=epoch,
                train_loss=loss_sum / n_train,
                train_acc=n_correct / n_train,
                val_loss=val_loss,
                val_acc=val_acc,
                wall_ms=(time.perf_counter() - tic) * 1000.0,
                n_feval=n_feval,
            )
        )
    return head, records


def stability_stats(metrics, window):
    """Rolling population-std of validation loss/accuracy plus the largest
    epoch-to-epoch validation-loss jump."""
    if window < 2:
        raise ContractError(f"window must be >= 2, got {window}")
    if len(metrics) < window:
        raise ContractError(f"need at least {window} epochs for window {window}, got {len(metrics)}")
    val_loss = np.array([m.val_loss for m in metrics])
    val_acc = np.array([m.val_acc for m in metrics])
    std_loss = np.lib.stride_tricks.sliding_window_view(val_loss, window).std(axis=-1)
    std_acc = np.lib.stride_tricks.sliding_window_view(val_acc, window).std(axis=-1)
    return StabilityReport(
        window=window,
        rolling_std_val_loss=std_loss,
        rolling_std_val_acc=std_acc,
        mean_rolling_std_val_loss=float(std_loss.mean()),
        max_epoch_to_epoch_jump=float(np.max(np.abs(np.diff(val_loss)))),
    )


def _fmt(x):
    return f"{x:.6g}"


def write_metrics_csv(records, path):
    """Write the metrics series in the documented CSV layout."""
    lines = [",".join(METRICS_HEADER)]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.epoch),
                    _fmt(r.train_loss),
                    _fmt(r.train_acc),
                    _fmt(r.val_loss),
                    _fmt(r.val_acc),
                    _fmt(r.wall_ms),
                    str(r.n_feval),
                ]
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_metrics_csv(path):
    """Parse a metrics CSV back into records, naming the line of any defect."""
    with open(path, "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty metrics file")
    if tuple(rows[0]) != METRICS_HEADER:
        raise FormatError(f"{path}: line 1: bad header {rows[0]!r}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(METRICS_HEADER):
            raise FormatError(f"{path}: line {lineno}: expected {len(METRICS_HEADER)} fields, got {len(row)}")
        try:
            records.append(
                MetricsRecord(
                    epoch=int(row[0]),
                    train_loss=float(row[1]),
                    train_acc=float(row[2]),
                    val_loss=float(row[3]),
                    val_acc=float(row[4]),
                    wall_ms=float(row[5]),
                    n_feval=int(row[6]),
                )
            )
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return records
