"""Training stage: per-graph cross-entropy steps with AdamW over precomputed graph bundles."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import GradTape
from .config import TrainConfig
from .data import Corpus, Dataset, build_training_corpus, cap_dataset, derive_seed
from .graph import GraphBundle, build_bundle
from .model import ModelParams, forward_logits, init_params

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingError(RuntimeError):
    """Raised when a training step produces a non-finite loss."""


def cross_entropy(predictions, labels, reduction: str = "mean") -> float:
    """Mean or summed ``-log p[true class]`` of row-stochastic predictions (log floor 1e-12)."""
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels)
    if predictions.ndim != 2 or predictions.shape[1] != 2:
        raise ValueError(f"predictions must be n x 2, got {predictions.shape}")
    return float(ad.nll_rows(predictions, labels, reduction).value.item())


@dataclass
class AdamWState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    weight_decay: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> AdamWState:
    """One AdamW update with decoupled weight decay. Arrays in ``params`` are updated in place."""
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {theta.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        step = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        step += lr * weight_decay * theta
        theta -= step
    return state


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    final_loss: float | None = None
    graph_seconds: float = 0.0
    optimize_seconds: float = 0.0
    graphs: list[str] = field(default_factory=list)
    steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def prepare_bundle(ds: Dataset, config: TrainConfig) -> tuple[Dataset, GraphBundle]:
    """Apply the sample cap (and optional z-scoring), then build the graphs.

    Returns the rows actually used alongside their bundle.
    """
    ds = cap_dataset(ds, config.max_samples, config.seed)
    x = ds.features
    if config.standardize:
        std = x.std(axis=0)
        x = (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0)
    return ds, build_bundle(x, config.bandwidths_squared, config.d_star)


def loss_and_grads(
    bundle: GraphBundle,
    targets: np.ndarray,
    params: ModelParams,
    reduction: str = "mean",
    graph_id: str = "",
) -> tuple[float, dict[str, np.ndarray]]:
    tape = GradTape()
    bound = params.bind(tape)
    logits = forward_logits(bundle, bound, params.config)
    loss = ad.softmax_nll(logits, targets, reduction)
    if not np.isfinite(loss.value).all():
        raise TrainingError(f"non-finite loss on graph {graph_id!r}")
    names = list(bound)
    grads = tape.gradient(loss, [bound[n] for n in names])
    return float(loss.value.item()), dict(zip(names, grads))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm


def fit(
    corpus: Corpus,
    config: TrainConfig,
    progress: Callable[[str], None] | None = None,
    init: ModelParams | None = None,
) -> tuple[ModelParams, TrainReport]:
    """Build every training graph once, then run ``config.epochs`` passes of per-graph AdamW steps."""
    if len(corpus) == 0:
        raise ValueError("training corpus is empty")
    report = TrainReport()
    started = time.perf_counter()
    training = build_training_corpus(
        corpus, config.subsample_copies, config.subsample_ratio, config.include_original
    )
    bundles = []
    for ds in training.datasets:
        used, bundle = prepare_bundle(ds, config)
        bundles.append((ds.id, bundle, np.asarray(used.labels)))
    report.graphs = [gid for gid, _, _ in bundles]
    report.graph_seconds = time.perf_counter() - started

    params = init.copy() if init is not None else init_params(config)
    state = AdamWState()
    rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))
    started = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        losses = []
        for i in rng.permutation(len(bundles)):
            gid, bundle, targets = bundles[i]
            loss, grads = loss_and_grads(bundle, targets, params, config.loss_reduction, gid)
            if config.grad_clip > 0:
                clip_gradients(grads, config.grad_clip)
            adamw_step(params.arrays, grads, state, config.learning_rate, config.weight_decay)
            losses.append(loss)
            report.steps += 1
        mean_loss = float(np.mean(losses))
        report.epoch_losses.append(mean_loss)
        if progress is not None:
            progress(f"epoch {epoch} mean_loss {mean_loss:.6f}")
    report.optimize_seconds = time.perf_counter() - started
    report.final_loss = report.epoch_losses[-1] if report.epoch_losses else None
    return params, report
