"""Testing stage: outlier scores for unseen datasets plus AUROC / AUPRC."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .data import OUTLIER, Dataset, derive_seed
from .model import ModelParams, forward
from .train import prepare_bundle


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreReport:
    dataset_id: str
    scores: np.ndarray
    auroc: float | None = None
    auprc: float | None = None


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError(f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors")
    if not np.all(np.isfinite(scores)):
        raise MetricError("scores must be finite")
    return scores, labels == OUTLIER


def auroc(scores, labels) -> float:
    """Probability that a random outlier outscores a random inlier, ties counting one half."""
    scores, is_out = _check(scores, labels)
    n_out = int(is_out.sum())
    n_in = len(is_out) - n_out
    if n_out == 0 or n_in == 0:
        raise MetricError("AUROC needs both inliers and outliers")
    ranks = rankdata(scores)  # midranks give exactly half credit to ties
    u = ranks[is_out].sum() - n_out * (n_out + 1) / 2.0
    return float(u / (n_out * n_in))


def auprc(scores, labels) -> float:
    """Average precision; samples with equal scores enter the sweep as one group."""
    scores, is_out = _check(scores, labels)
    n_out = int(is_out.sum())
    if n_out == 0:
        raise MetricError("AUPRC needs at least one outlier")
    order = np.argsort(-scores, kind="stable")
    s, hit = scores[order], is_out[order]
    # last position of every tie group in the descending sweep
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(hit)[ends]
    seen = ends + 1
    gained = np.diff(np.r_[0, tp])
    return float(np.sum(gained / n_out * (tp / seen)))


def chunk_rows(n: int, max_samples: int, seed: int) -> list[np.ndarray]:
    """Split ``range(n)`` into near-equal random chunks of at most ``max_samples`` rows."""
    if n <= max_samples:
        return [np.arange(n)]
    parts = math.ceil(n / max_samples)
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(c) for c in np.array_split(perm, parts)]


def score(ds: Dataset, params: ModelParams) -> ScoreReport:
    """Outlier probability for every row of ``ds`` (row order preserved).

    Datasets above ``max_samples`` rows are scored as several random chunks,
    each converted into its own graphs.
    """
    config = params.config
    scores = np.empty(ds.n)
    for rows in chunk_rows(ds.n, config.max_samples, derive_seed(config.seed, ds.id, "chunks")):
        part = ds if len(rows) == ds.n else ds.take(rows)
        _, bundle = prepare_bundle(part, config)
        scores[rows] = forward(bundle, params)[:, 1]
    if ds.labels is not None and 0 < ds.labels.sum() < ds.n:
        return ScoreReport(ds.id, scores, auroc(scores, ds.labels), auprc(scores, ds.labels))
    return ScoreReport(ds.id, scores)


def write_scores(path, report: ScoreReport, labels: np.ndarray | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "score", "label"] if labels is not None else ["index", "score"])
        for i, s in enumerate(report.scores):
            row = [i, repr(float(s))]
            if labels is not None:
                row.append(int(labels[i]))
            w.writerow(row)
