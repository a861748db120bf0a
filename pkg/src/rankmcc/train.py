"""Experiment harness: configs, the training loop, and the loss x head grid.

A run is fully determined by its config: dataset construction, splitting,
parameter initialization, batch order, and stochastic loss noise all derive
from the config seed through tagged seed sequences, so repeating a run
reproduces every byte of its report.

Checkpoint selection follows the validate-each-epoch protocol: the model
state with the best validation value of the selection metric is kept and the
report carries that checkpoint's test metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .autodiff import Tensor
from .data import Dataset, batches, load_csv, split, synth_blobs
from .losses import LOSS_KINDS, LossParams, batch_loss
from .metrics import evaluate_scores
from .model import INTERACTION_KINDS, RankingModel, build_model, score_matrix
from .optim import OPTIMIZER_KINDS, lr_grid, make_optimizer
from .report import ExperimentReport, ReportRow

__all__ = [
    "ExperimentConfig",
    "TrainOutcome",
    "SELECTION_METRICS",
    "load_experiment_data",
    "run_train",
    "run_grid",
]

SELECTION_METRICS = ("top1_error", "top5_error", "ndcg5")

# seed-stream tags so dataset, split, model, batches and loss noise never share
_TAG_MODEL = 10
_TAG_SPLIT = 11
_TAG_BLOBS = 12
_TAG_BATCH = 13
_TAG_LOSS = 14


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; immutable so grid cells can share one base."""

    data_path: str | None = None
    synth: tuple[int, int, int, float] | None = (10, 20, 700, 1.0)
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    loss: LossParams = field(default_factory=LossParams)
    interaction: str = "dot"
    width: int = 64
    optimizer: str = "adam"
    lr: float | str = 0.003
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    selection_metric: str = "ndcg5"
    embed_dim: int = 16
    encoder_hidden: tuple[int, ...] = (32,)
    activation: str = "relu"

    def __post_init__(self):
        if (self.data_path is None) == (self.synth is None):
            raise ValueError("config needs exactly one of data_path or synth")
        if self.interaction not in INTERACTION_KINDS:
            raise ValueError(
                f"unknown interaction {self.interaction!r}; "
                f"valid kinds: {', '.join(INTERACTION_KINDS)}"
            )
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ValueError(
                f"unknown optimizer {self.optimizer!r}; "
                f"valid kinds: {', '.join(OPTIMIZER_KINDS)}"
            )
        if self.selection_metric not in SELECTION_METRICS:
            raise ValueError(
                f"unknown selection metric {self.selection_metric!r}; "
                f"valid: {', '.join(SELECTION_METRICS)}"
            )
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if isinstance(self.lr, str) and self.lr != "sweep":
            raise ValueError("lr must be a float or 'sweep'")
        if not isinstance(self.lr, str) and self.lr <= 0:
            raise ValueError("lr must be positive")

    def echo(self) -> dict[str, Any]:
        """JSON-serializable summary embedded in reports."""
        return {
            "data": self.data_path or ("synth:" + ",".join(map(str, self.synth))),
            "split": list(self.split_fractions),
            "loss": {
                "kind": self.loss.kind,
                "sigma": self.loss.sigma,
                "alpha": self.loss.alpha,
                "gumbel_samples": self.loss.gumbel_samples,
                "gumbel_scale": self.loss.gumbel_scale,
                "mse_target": self.loss.mse_target,
            },
            "interaction": self.interaction,
            "width": self.width,
            "optimizer": self.optimizer,
            "lr": self.lr,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "selection_metric": self.selection_metric,
            "embed_dim": self.embed_dim,
            "encoder_hidden": list(self.encoder_hidden),
            "activation": self.activation,
        }


@dataclass
class TrainOutcome:
    report: ExperimentReport
    model: RankingModel
    best_epoch: int
    best_lr: float
    history: list[dict[str, float]]


def load_experiment_data(config: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    if config.data_path is not None:
        ds = load_csv(config.data_path)
    else:
        n, d0, per_class, std = config.synth
        ds = synth_blobs(int(n), int(d0), int(per_class), float(std),
                         seed=[config.seed, _TAG_BLOBS])
    return split(ds, config.split_fractions, seed=[config.seed, _TAG_SPLIT])


def _metric_row(scores: np.ndarray, labels: np.ndarray) -> dict[str, float]:
    n = scores.shape[1]
    k5 = min(5, n)
    table = evaluate_scores(scores, labels, ks=(1, k5))
    return {
        "top1_error": 100.0 * table["err@1"],
        "top5_error": 100.0 * table[f"err@{k5}"],
        "ndcg5": 100.0 * table[f"ndcg@{k5}"],
    }


def _better(metric: str, candidate: float, incumbent: float) -> bool:
    if metric == "ndcg5":
        return candidate > incumbent
    return candidate < incumbent


def _train_once(
    config: ExperimentConfig,
    datasets: tuple[Dataset, Dataset, Dataset],
    lr: float,
) -> tuple[RankingModel, int, list[dict[str, float]]]:
    """Train at one learning rate; returns the best-epoch model."""
    train_ds, val_ds, _ = datasets
    model = build_model(
        n_classes=train_ds.n_classes,
        d0=train_ds.dim,
        embed_dim=config.embed_dim,
        encoder_hidden=config.encoder_hidden,
        activation=config.activation,
        head_kind=config.interaction,
        width=config.width,
        seed=[config.seed, _TAG_MODEL],
    )
    opt = make_optimizer(config.optimizer, model.parameters(), lr)

    best_state = model.state_arrays()
    best_value: float | None = None
    best_epoch = 0
    history: list[dict[str, float]] = []

    for epoch in range(config.epochs):
        for step, idx in enumerate(batches(train_ds, config.batch_size,
                                           [config.seed, _TAG_BATCH], epoch)):
            scores = model.forward(Tensor(train_ds.features[idx]))
            loss = batch_loss(config.loss, scores, train_ds.labels[idx],
                              seed=[config.loss.seed, _TAG_LOSS, epoch, step])
            opt.zero_grad()
            loss.backward()
            opt.step()

        if val_ds.size:
            val_row = _metric_row(score_matrix(model, val_ds.features), val_ds.labels)
            history.append(val_row)
            value = val_row[config.selection_metric]
            if best_value is None or _better(config.selection_metric, value, best_value):
                best_value = value
                best_epoch = epoch
                best_state = model.state_arrays()
        else:
            best_epoch = epoch
            best_state = model.state_arrays()

    model.load_state_arrays(best_state)
    return model, best_epoch, history


def run_train(config: ExperimentConfig, datasets=None) -> TrainOutcome:
    """Train one configuration (sweeping the lr grid if asked) and report.

    The report carries the test metrics of the checkpoint that scored best on
    validation, as a single row scaled by 100.
    """
    if datasets is None:
        datasets = load_experiment_data(config)
    train_ds, _, test_ds = datasets

    if config.lr == "sweep":
        best = None
        for lr in lr_grid():
            model, best_epoch, history = _train_once(config, datasets, lr)
            val_value = (history[best_epoch][config.selection_metric]
                         if history else float("nan"))
            if best is None or _better(config.selection_metric, val_value, best[0]):
                best = (val_value, lr, model, best_epoch, history)
        _, lr, model, best_epoch, history = best
    else:
        lr = float(config.lr)
        model, best_epoch, history = _train_once(config, datasets, lr)

    test_row = _metric_row(score_matrix(model, test_ds.features), test_ds.labels)
    row = ReportRow(
        dataset=train_ds.name.removesuffix("/train"),
        loss=config.loss.kind,
        interaction=config.interaction,
        **test_row,
    )
    report = ExperimentReport(rows=[row], config=config.echo(), seed=config.seed)
    return TrainOutcome(report, model, best_epoch, lr, history)


def run_grid(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """All loss kinds x interaction heads on one dataset, in fixed cell order.

    Cells are independent single-config runs sharing the dataset; with
    ``workers`` > 1 they run on a thread pool, and the report is assembled in
    the fixed order either way.
    """
    datasets = load_experiment_data(config)
    cells = [
        replace(config, loss=replace(config.loss, kind=kind), interaction=head)
        for kind in LOSS_KINDS
        for head in INTERACTION_KINDS
    ]

    def cell_row(cell_config: ExperimentConfig) -> ReportRow:
        return run_train(cell_config, datasets=datasets).report.rows[0]

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(cell_row, cells))
    else:
        rows = [cell_row(c) for c in cells]

    echo = config.echo()
    echo["loss"] = {"kind": "grid", **{k: v for k, v in echo["loss"].items() if k != "kind"}}
    echo["interaction"] = "grid"
    return ExperimentReport(rows=rows, config=echo, seed=config.seed)


def config_from_dict(doc: dict[str, Any]) -> ExperimentConfig:
    """Build a config from a JSON-style dict (the config-file format)."""
    known = {
        "data_path", "synth", "split_fractions", "interaction", "width",
        "optimizer", "lr", "epochs", "batch_size", "seed", "selection_metric",
        "embed_dim", "encoder_hidden", "activation",
    }
    loss_keys = {"kind", "sigma", "alpha", "gumbel_samples", "gumbel_scale",
                 "mse_target", "seed"}
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key == "loss":
            kwargs["loss"] = LossParams(**{k: value[k] for k in value if k in loss_keys})
        elif key in known:
            if key in ("synth", "split_fractions", "encoder_hidden") and value is not None:
                value = tuple(value)
            kwargs[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "data_path" in kwargs and kwargs["data_path"] is not None and "synth" not in kwargs:
        kwargs["synth"] = None
    return ExperimentConfig(**kwargs)


def config_to_json(config: ExperimentConfig) -> str:
    return json.dumps(config.echo(), indent=2, sort_keys=True)
