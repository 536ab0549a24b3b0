"""Ablation sweeps: number of historical datasets, number of bandwidths, subsampling on/off."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import TrainConfig
from .data import Corpus, Dataset, derive_seed
from .evaluate import score
from .train import fit

M_POINTS = (1, 3, 5, 10, 15)
SWEEPS = ("m", "k", "subsampling")


@dataclass(frozen=True)
class SweepPoint:
    label: str
    corpus: Corpus
    config: TrainConfig


@dataclass(frozen=True)
class SweepResult:
    label: str
    auroc: float
    auprc: float
    final_loss: float | None


def sweep_points(sweep: str, corpus: Corpus, config: TrainConfig, independent_seeds: bool = False) -> list[SweepPoint]:
    if sweep == "m":
        ms = sorted({min(m, len(corpus)) for m in M_POINTS})
        points = [
            SweepPoint(str(m), Corpus(corpus.datasets[:m], corpus.seed, corpus.fingerprint), config) for m in ms
        ]
    elif sweep == "k":
        points = [SweepPoint(str(k), corpus, config.updated(k=k)) for k in range(1, config.k + 1)]
    elif sweep == "subsampling":
        copies = config.subsample_copies or 5
        points = [
            SweepPoint("on", corpus, config.updated(subsample_copies=copies, include_original=False)),
            SweepPoint("off", corpus, config.updated(subsample_copies=0, include_original=True)),
        ]
    else:
        raise ValueError(f"unknown sweep {sweep!r}; expected one of {SWEEPS}")
    if independent_seeds:
        points = [
            SweepPoint(p.label, p.corpus, p.config.updated(seed=derive_seed(p.config.seed, sweep, p.label) % 2**31))
            for p in points
        ]
    return points


def evaluate_point(point: SweepPoint, tests: Sequence[Dataset]) -> SweepResult:
    params, report = fit(point.corpus, point.config)
    reports = [score(ds, params) for ds in tests]
    return SweepResult(
        label=point.label,
        auroc=float(np.mean([r.auroc for r in reports])),
        auprc=float(np.mean([r.auprc for r in reports])),
        final_loss=report.final_loss,
    )


def run_sweep(
    sweep: str,
    corpus: Corpus,
    tests: Sequence[Dataset],
    config: TrainConfig,
    jobs: int = 1,
    progress: Callable[[str], None] | None = None,
) -> list[SweepResult]:
    """Train one model per sweep point and report mean AUROC / AUPRC over ``tests``.

    With ``jobs > 1`` points run in separate processes, each with its own seed.
    """
    unlabeled = [ds.id for ds in tests if ds.labels is None or not 0 < ds.labels.sum() < ds.n]
    if unlabeled:
        raise ValueError(f"test datasets need both classes labeled: {unlabeled}")
    points = sweep_points(sweep, corpus, config, independent_seeds=jobs > 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate_point, points, [tests] * len(points)))
    else:
        results = []
        for p in points:
            results.append(evaluate_point(p, tests))
            if progress is not None:
                r = results[-1]
                progress(f"{sweep}={r.label} auroc {r.auroc:.4f} auprc {r.auprc:.4f}")
    return results


def write_results(path, sweep: str, results: Sequence[SweepResult]) -> Path:
    """Write a CSV plus a whitespace-separated ``.dat`` twin for gnuplot; returns the latter."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([sweep, "auroc", "auprc"])
        for r in results:
            w.writerow([r.label, f"{r.auroc:.6f}", f"{r.auprc:.6f}"])
    dat = path.with_suffix(".dat")
    with dat.open("w", encoding="utf-8") as fh:
        fh.write(f"# index {sweep} auroc auprc\n")
        for i, r in enumerate(results):
            fh.write(f"{i} {r.label} {r.auroc:.6f} {r.auprc:.6f}\n")
    return dat
