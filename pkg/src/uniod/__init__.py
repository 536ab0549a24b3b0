"""Universal outlier detection: one graph neural network trained on labeled historical
tables scores outliers in unseen tables of any dimensionality."""

from .config import TrainConfig, desk_config
from .data import Corpus, Dataset, build_training_corpus, load_corpus, load_dataset, subsample
from .evaluate import ScoreReport, auprc, auroc, score
from .graph import GraphBundle, build_bundle, embed_nodes, kernel_adjacency, mean_pairwise_distance
from .model import ModelParams, forward, init_params
from .train import TrainReport, fit

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "Dataset",
    "GraphBundle",
    "ModelParams",
    "ScoreReport",
    "TrainConfig",
    "TrainReport",
    "auprc",
    "auroc",
    "build_bundle",
    "build_training_corpus",
    "desk_config",
    "embed_nodes",
    "fit",
    "forward",
    "init_params",
    "kernel_adjacency",
    "load_corpus",
    "load_dataset",
    "mean_pairwise_distance",
    "score",
    "subsample",
]
