"""Tabular datasets: CSV loading, validation and class-preserving subsampling."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INLIER = 0
OUTLIER = 1

MANIFEST_NAME = "corpus.cfg"
DEFAULT_LABEL_COLUMN = "label"


class DataError(ValueError):
    """Invalid dataset contents or corpus layout."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` feature matrix with optional 0/1 labels (1 = outlier)."""

    id: str
    features: np.ndarray
    labels: np.ndarray | None = None
    origin: str = ""

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise DataError(f"{self.id}: features must be 2-D, got shape {x.shape}")
        n, d = x.shape
        if n < 2:
            raise DataError(f"{self.id}: need at least 2 samples, got {n}")
        if d < 1:
            raise DataError(f"{self.id}: need at least 1 feature column")
        if not np.all(np.isfinite(x)):
            raise DataError(f"{self.id}: features contain non-finite values")
        if np.all(x == x[0]):
            raise DataError(f"{self.id}: all rows are identical")
        x.setflags(write=False)
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (n,):
                raise DataError(f"{self.id}: {y.shape[0] if y.ndim else 0} labels for {n} samples")
            if not np.all((y == INLIER) | (y == OUTLIER)):
                raise DataError(f"{self.id}: labels must be 0 (inlier) or 1 (outlier)")
            y = y.astype(np.int64)
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def take(self, index: np.ndarray, id: str | None = None) -> Dataset:
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            id=id or self.id,
            features=self.features[index],
            labels=None if self.labels is None else self.labels[index],
            origin=self.origin,
        )


@dataclass(frozen=True)
class Corpus:
    datasets: tuple[Dataset, ...]
    seed: int = 0
    fingerprint: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        for ds in self.datasets:
            require_two_classes(ds)

    def __len__(self) -> int:
        return len(self.datasets)


def require_two_classes(ds: Dataset) -> None:
    if ds.labels is None:
        raise DataError(f"dataset {ds.id!r} is unlabeled")
    n_out = int(ds.labels.sum())
    if n_out == 0 or n_out == ds.n:
        raise DataError(f"dataset {ds.id!r} needs at least one inlier and one outlier")


def load_dataset(path, label_column: str | None = None, standardize: bool = False) -> Dataset:
    """Read a headered comma-separated file; the label column, if named, is split off."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    feature_idx = [i for i in range(len(header)) if i != label_idx]
    if not feature_idx:
        raise DataError(f"{path}: no feature columns")

    features = np.empty((len(rows), len(feature_idx)))
    labels = np.empty(len(rows), dtype=np.int64) if label_idx is not None else None
    for r, row in enumerate(rows):
        line = r + 2
        if len(row) != len(header):
            raise DataError(f"{path}: row {line} has {len(row)} cells, header has {len(header)}")
        for c, j in enumerate(feature_idx):
            try:
                v = float(row[j])
            except ValueError:
                raise DataError(f"{path}: row {line}, column {header[j]!r}: not a number: {row[j]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {line}, column {header[j]!r}: non-finite value {row[j]!r}")
            features[r, c] = v
        if label_idx is not None:
            cell = row[label_idx].strip()
            if cell not in ("0", "1"):
                raise DataError(f"{path}: row {line}: label must be 0 or 1, got {cell!r}")
            labels[r] = int(cell)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 rows, got {len(rows)}")
    if standardize:
        std = features.std(axis=0)
        features = (features - features.mean(axis=0)) / np.where(std > 0, std, 1.0)
    return Dataset(id=path.stem, features=features, labels=labels, origin=str(path))


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def derive_seed(seed: int, *parts) -> int:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return (seed ^ int.from_bytes(digest[:8], "little")) & 0xFFFFFFFFFFFFFFFF


def subsample_index(labels: np.ndarray, ratio: float, seed: int) -> np.ndarray:
    """Sorted row indices of a class-ratio-preserving subsample."""
    if not 0.0 < ratio <= 1.0:
        raise DataError(f"ratio must be in (0, 1], got {ratio}")
    labels = np.asarray(labels)
    out_idx = np.flatnonzero(labels == OUTLIER)
    in_idx = np.flatnonzero(labels == INLIER)
    n = len(labels)
    m = round_half_away(ratio * n)
    m_out = max(1, round_half_away(ratio * len(out_idx)))
    m_in = m - m_out
    if m_out > len(out_idx) or m_in > len(in_idx) or m_in < 1:
        raise DataError(
            f"cannot draw {m_out} outliers / {m_in} inliers from {len(out_idx)} / {len(in_idx)}"
        )
    rng = np.random.default_rng(seed)
    picked = np.concatenate(
        [rng.choice(out_idx, m_out, replace=False), rng.choice(in_idx, m_in, replace=False)]
    )
    return np.sort(picked)


def subsample(ds: Dataset, ratio: float, seed: int, id: str | None = None) -> Dataset:
    require_two_classes(ds)
    return ds.take(subsample_index(ds.labels, ratio, seed), id=id)


def build_training_corpus(
    corpus: Corpus, copies: int = 5, ratio: float = 0.6, include_original: bool = False
) -> Corpus:
    """Expand each historical dataset into ``copies`` subsampled variants.

    ``copies=0`` is allowed together with ``include_original`` to train on the
    untouched datasets only.
    """
    if copies < 0 or (copies == 0 and not include_original):
        raise DataError("need copies >= 1, or copies == 0 with include_original")
    out = []
    for ds in corpus.datasets:
        if include_original:
            out.append(ds)
        for k in range(copies):
            seed = derive_seed(corpus.seed, ds.id, k)
            out.append(subsample(ds, ratio, seed, id=f"{ds.id}#sub{k}"))
    return Corpus(datasets=tuple(out), seed=corpus.seed, fingerprint=corpus.fingerprint)


def cap_index(n: int, max_samples: int, seed: int, labels: np.ndarray | None = None) -> np.ndarray:
    """Rows kept when a dataset exceeds ``max_samples`` (stratified when labeled)."""
    if n <= max_samples:
        return np.arange(n)
    if labels is not None and 0 < labels.sum() < n:
        return subsample_index(labels, max_samples / n, seed)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, max_samples, replace=False))


def cap_dataset(ds: Dataset, max_samples: int, seed: int) -> Dataset:
    if ds.n <= max_samples:
        return ds
    return ds.take(cap_index(ds.n, max_samples, derive_seed(seed, ds.id, "cap"), ds.labels))


def corpus_fingerprint(files) -> str:
    h = hashlib.sha256()
    for name, size in sorted((Path(f).name, Path(f).stat().st_size) for f in files):
        h.update(f"{name}\0{size}\n".encode())
    return h.hexdigest()[:16]


def read_manifest(directory: Path) -> list[tuple[Path, str]]:
    """Files and label columns of a corpus directory.

    A ``corpus.cfg`` with ``file.csv = label_column`` lines takes precedence;
    otherwise every ``*.csv`` is used with the column ``label``.
    """
    manifest = directory / MANIFEST_NAME
    if manifest.is_file():
        entries = []
        for lineno, raw in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{manifest}:{lineno}: expected 'file.csv = label_column'")
            name, column = (s.strip() for s in line.split("=", 1))
            entries.append((directory / name, column))
        return entries
    return [(p, DEFAULT_LABEL_COLUMN) for p in sorted(directory.glob("*.csv"))]


def _entries_with_labels(directory: Path, require_labels: bool) -> list[tuple[Path, str | None]]:
    if not directory.is_dir():
        raise DataError(f"corpus directory not found: {directory}")
    entries = read_manifest(directory)
    if not entries:
        raise DataError(f"{directory}: no datasets found")
    resolved = []
    for path, column in entries:
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        with path.open(encoding="utf-8") as fh:
            header = [h.strip() for h in fh.readline().strip().split(",")]
        if column not in header:
            if require_labels:
                raise DataError(f"dataset {path.stem!r} is unlabeled (no column {column!r})")
            column = None
        resolved.append((path, column))
    return resolved


def load_corpus(directory, seed: int = 0) -> Corpus:
    """Load a directory of labeled historical datasets."""
    directory = Path(directory)
    entries = _entries_with_labels(directory, require_labels=True)
    datasets = tuple(load_dataset(path, label_column=column) for path, column in entries)
    return Corpus(datasets=datasets, seed=seed, fingerprint=corpus_fingerprint([p for p, _ in entries]))


def load_directory(directory) -> list[Dataset]:
    """Load every dataset of a directory, keeping labels where the column exists."""
    entries = _entries_with_labels(Path(directory), require_labels=False)
    return [load_dataset(path, label_column=column) for path, column in entries]
