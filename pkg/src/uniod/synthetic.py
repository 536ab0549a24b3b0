"""Synthetic labeled outlier datasets: Gaussian-mixture inliers plus uniform-box outliers."""

from __future__ import annotations

import numpy as np

from .data import Corpus, Dataset


def make_dataset(
    rng: np.random.Generator,
    dim: int,
    n: int,
    outlier_ratio: float,
    id: str = "synthetic",
    clusters: int | None = None,
) -> Dataset:
    """Inliers from a random axis-aligned Gaussian mixture, outliers uniform on its padded bounding box.

    Rows are shuffled and a random global scale / offset is applied so that
    datasets differ in units as well as shape.
    """
    n_out = max(1, int(round(outlier_ratio * n)))
    n_in = n - n_out
    clusters = clusters or int(rng.integers(1, 4))
    centers = rng.uniform(-4.0, 4.0, size=(clusters, dim))
    spreads = rng.uniform(0.5, 1.5, size=(clusters, dim))
    weights = rng.dirichlet(np.full(clusters, 2.0))
    member = rng.choice(clusters, size=n_in, p=weights)
    inliers = centers[member] + spreads[member] * rng.standard_normal((n_in, dim))
    lo, hi = inliers.min(axis=0), inliers.max(axis=0)
    pad = 0.1 * (hi - lo)
    outliers = rng.uniform(lo - pad, hi + pad, size=(n_out, dim))
    x = np.vstack([inliers, outliers])
    y = np.r_[np.zeros(n_in, dtype=np.int64), np.ones(n_out, dtype=np.int64)]
    perm = rng.permutation(n)
    x = x[perm] * 10.0 ** rng.uniform(-1.0, 2.0) + rng.normal(0.0, 5.0, size=dim)
    return Dataset(id=id, features=x, labels=y[perm], origin="synthetic")


def synthetic_suite(
    seed: int = 0,
    n_train: int = 10,
    n_test: int = 5,
    dims=range(2, 21),
    samples=(200, 500),
    ratios=(0.05, 0.20),
) -> tuple[Corpus, list[Dataset]]:
    """Historical corpus and held-out test sets whose dimensions never appear in training."""
    rng = np.random.default_rng(seed)
    dims = np.asarray(list(dims))
    if n_train + n_test > len(dims):
        raise ValueError("not enough distinct dimensions for disjoint train/test splits")
    chosen = rng.permutation(dims)
    train_dims, test_dims = chosen[:n_train], chosen[n_train : n_train + n_test]

    def draw(dim, tag, i):
        n = int(rng.integers(samples[0], samples[1] + 1))
        ratio = float(rng.uniform(*ratios))
        return make_dataset(rng, int(dim), n, ratio, id=f"{tag}{i:02d}_d{dim}")

    train = [draw(d, "hist", i) for i, d in enumerate(train_dims)]
    test = [draw(d, "test", i) for i, d in enumerate(test_dims)]
    return Corpus(datasets=tuple(train), seed=seed), test


def two_cluster_graph(seed: int = 0, n: int = 60, outlier_ratio: float = 0.1, dim: int = 2) -> Dataset:
    """Two Gaussian clusters with a fraction of uniform outliers (small overfitting target)."""
    rng = np.random.default_rng(seed)
    return make_dataset(rng, dim, n, outlier_ratio, id=f"two_cluster_{seed}", clusters=2)


def write_csv(ds: Dataset, path, label_column: str = "label") -> None:
    header = [f"x{j}" for j in range(ds.d)]
    if ds.labels is not None:
        header.append(label_column)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.features[i]]
            if ds.labels is not None:
                cells.append(str(int(ds.labels[i])))
            fh.write(",".join(cells) + "\n")
