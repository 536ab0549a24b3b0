"""Dataset -> multi-bandwidth Gaussian kernel graphs with fixed-width spectral node features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import Dataset
from .numeric import NumericError, as_matrix, sym_eig_topk

DEFAULT_BETAS_SQUARED = (0.3, 0.5, 1.0, 3.0, 5.0)
DEFAULT_D_STAR = 256


@dataclass(frozen=True, eq=False)
class GraphBundle:
    """K kernel adjacencies of one dataset plus the ``n x (K * d_star)`` feature matrix.

    Feature block ``k`` (columns ``k*d_star`` to ``(k+1)*d_star``) is the
    spectral embedding of ``adjacencies[k]``.
    """

    adjacencies: tuple[np.ndarray, ...]
    features: np.ndarray
    bandwidths: tuple[float, ...]
    sigma_bar: float
    d_star: int

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def k(self) -> int:
        return len(self.adjacencies)

    def block(self, k: int) -> np.ndarray:
        return self.features[:, k * self.d_star : (k + 1) * self.d_star]


def mean_pairwise_distance(features) -> float:
    """Mean Euclidean distance over all ``n**2`` ordered pairs, self-pairs included."""
    x = as_matrix(features, "features")
    n = x.shape[0]
    if n < 2:
        raise NumericError("need at least 2 rows")
    total = 2.0 * pdist(x).sum()
    if total == 0.0:
        raise NumericError("all rows are identical; mean pairwise distance is zero")
    return total / (n * n)


def squared_distances(features) -> np.ndarray:
    x = as_matrix(features, "features")
    return squareform(pdist(x, "sqeuclidean"))


def kernel_adjacency(features, sigma: float, sq_dists: np.ndarray | None = None) -> np.ndarray:
    """Gaussian kernel ``exp(-|x_a - x_b|^2 / (2 sigma^2))``; unit diagonal, symmetric."""
    if not sigma > 0:
        raise NumericError(f"sigma must be positive, got {sigma}")
    if sq_dists is None:
        sq_dists = squared_distances(features)
    a = np.exp(-sq_dists / (2.0 * sigma * sigma))
    # exp underflow would break the (0, 1] range for far-apart points
    np.maximum(a, np.finfo(np.float64).tiny, out=a)
    np.fill_diagonal(a, 1.0)
    return a


def embed_nodes(adjacency, d_star: int) -> np.ndarray:
    """Top-``d_star`` eigenvectors scaled by sqrt(eigenvalue); zero columns past ``n``."""
    a = as_matrix(adjacency, "adjacency")
    n = a.shape[0]
    if d_star < 1:
        raise NumericError(f"d_star must be positive, got {d_star}")
    k = min(d_star, n)
    eig = sym_eig_topk(a, k)
    x = np.zeros((n, d_star))
    x[:, :k] = eig.vectors * np.sqrt(eig.values)
    return x


def build_bundle(
    ds: Dataset | np.ndarray,
    betas_squared=DEFAULT_BETAS_SQUARED,
    d_star: int = DEFAULT_D_STAR,
) -> GraphBundle:
    features = ds.features if isinstance(ds, Dataset) else as_matrix(ds, "features")
    betas_squared = tuple(float(b) for b in betas_squared)
    if not betas_squared or min(betas_squared) <= 0:
        raise NumericError(f"betas_squared must be non-empty and positive, got {betas_squared}")
    sigma_bar = mean_pairwise_distance(features)
    sq = squared_distances(features)
    sigmas = tuple(float(np.sqrt(b)) * sigma_bar for b in betas_squared)
    adjacencies = tuple(kernel_adjacency(features, s, sq) for s in sigmas)
    blocks = [embed_nodes(a, d_star) for a in adjacencies]
    x = np.concatenate(blocks, axis=1)
    for a in adjacencies:
        a.setflags(write=False)
    x.setflags(write=False)
    return GraphBundle(adjacencies=adjacencies, features=x, bandwidths=sigmas, sigma_bar=sigma_bar, d_star=d_star)
