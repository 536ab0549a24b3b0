"""K GIN stacks + K graph-transformer stacks + MLP head, one stack pair per bandwidth.

Parameters live in a flat, ordered ``name -> array`` mapping so that the
optimizer and the checkpoint writer can walk them without knowing the
architecture. Names follow ``gin{k}.{layer}.*``, ``gt{k}.{layer}.*`` and
``head.{layer}.*``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import GradTape, Var
from .config import TrainConfig
from .graph import GraphBundle

GAIN_LEAVES = frozenset({"ln1_g", "ln2_g"})
ZERO_LEAVES = frozenset({"b", "b1", "b2", "bq", "bk", "bv", "bo", "ff_b1", "ff_b2", "ln1_b", "ln2_b", "eps"})


def param_shapes(config: TrainConfig) -> dict[str, tuple[int, int]]:
    """Canonical parameter order and shapes for ``config``."""
    shapes: dict[str, tuple[int, int]] = {}
    d = config.d_star
    for k in range(config.k):
        width_in = d
        for l, w in enumerate(config.gin_widths):
            p = f"gin{k}.{l}."
            shapes[p + "w1"] = (width_in, w)
            shapes[p + "b1"] = (1, w)
            shapes[p + "w2"] = (w, w)
            shapes[p + "b2"] = (1, w)
            shapes[p + "eps"] = (1, 1)
            width_in = w
    for k in range(config.k):
        f = config.gt_ffn_width
        for l in range(config.gt_layers):
            p = f"gt{k}.{l}."
            for name in ("q", "k", "v", "o"):
                shapes[p + "w" + name] = (d, d)
                shapes[p + "b" + name] = (1, d)
            shapes[p + "ln1_g"] = (1, d)
            shapes[p + "ln1_b"] = (1, d)
            shapes[p + "ff_w1"] = (d, f)
            shapes[p + "ff_b1"] = (1, f)
            shapes[p + "ff_w2"] = (f, d)
            shapes[p + "ff_b2"] = (1, d)
            shapes[p + "ln2_g"] = (1, d)
            shapes[p + "ln2_b"] = (1, d)
    width_in = config.head_input_width
    for l, w in enumerate(config.head_widths):
        shapes[f"head.{l}.w"] = (width_in, w)
        shapes[f"head.{l}.b"] = (1, w)
        width_in = w
    return shapes


@dataclass(eq=False)
class ModelParams:
    config: TrainConfig
    arrays: dict[str, np.ndarray]

    def __post_init__(self):
        expected = param_shapes(self.config)
        if list(self.arrays) != list(expected):
            missing = set(expected) - set(self.arrays)
            extra = set(self.arrays) - set(expected)
            raise ValueError(f"parameter names do not match config (missing {sorted(missing)[:3]}, extra {sorted(extra)[:3]})")
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ValueError(f"{name}: shape {self.arrays[name].shape} does not match config {shape}")

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()

    def __iter__(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.arrays.items())

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> ModelParams:
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def size(self) -> int:
        return sum(v.size for v in self.arrays.values())

    def bind(self, tape: GradTape | None = None) -> dict[str, Var]:
        """Wrap every array as a tape-watched variable, or as a constant without a tape."""
        if tape is None:
            return {k: ad.constant(v) for k, v in self.arrays.items()}
        return {k: tape.watch(v) for k, v in self.arrays.items()}


def init_params(config: TrainConfig, seed: int | None = None) -> ModelParams:
    """Glorot-uniform weights, zero biases and epsilons, unit layer-norm gains."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    arrays = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[1]
        if leaf in GAIN_LEAVES:
            arrays[name] = np.ones(shape)
        elif leaf in ZERO_LEAVES:
            arrays[name] = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(config, arrays)


def dense(x, w, b) -> Var:
    return ad.add(ad.matmul(x, w), b)


def two_layer_mlp(w1, b1, w2, b2) -> Callable[[Var], Var]:
    return lambda m: ad.relu(dense(ad.relu(dense(m, w1, b1)), w2, b2))


def neighbor_weights(adjacency: np.ndarray, aggregation: str = "normalized") -> np.ndarray:
    """Aggregation weights: the adjacency with its diagonal zeroed.

    Self-loops enter through the (1 + eps) term instead. With ``"normalized"``
    the weights are divided by ``n - 1`` so that dense kernel graphs of any size
    produce activations on the same scale; ``"sum"`` keeps the raw weights.
    """
    w = np.array(adjacency, dtype=np.float64, copy=True)
    np.fill_diagonal(w, 0.0)
    if aggregation == "normalized":
        w /= max(w.shape[0] - 1, 1)
    elif aggregation != "sum":
        raise ValueError(f"unknown GIN aggregation {aggregation!r}")
    return w


def gin_aggregate(h, neighbors, eps) -> Var:
    """``(1 + eps) * h_j + sum_{u != j} A_ju h_u`` for every node ``j``."""
    h = h if isinstance(h, Var) else ad.constant(h)
    return ad.add(ad.add(h, ad.mul(h, eps)), ad.matmul(neighbors, h))


def gin_layer(h, neighbors, eps, mlp: Callable[[Var], Var]) -> Var:
    return mlp(gin_aggregate(h, neighbors, eps))


def gin_stack(x, neighbors, p: Mapping[str, Var], k: int, depth: int) -> Var:
    h = ad.constant(x)
    nb = ad.constant(neighbors)
    for l in range(depth):
        q = f"gin{k}.{l}."
        h = gin_layer(h, nb, p[q + "eps"], two_layer_mlp(p[q + "w1"], p[q + "b1"], p[q + "w2"], p[q + "b2"]))
    return h


def kgin_forward(bundle: GraphBundle, p: Mapping[str, Var], config: TrainConfig) -> Var:
    if bundle.k != config.k:
        raise ValueError(f"bundle has {bundle.k} graphs, model expects {config.k}")
    outs = [
        gin_stack(
            bundle.block(k),
            neighbor_weights(bundle.adjacencies[k], config.gin_aggregation),
            p,
            k,
            len(config.gin_widths),
        )
        for k in range(config.k)
    ]
    return outs[0] if len(outs) == 1 else ad.concat_cols(outs)


def self_attention(h: Var, p: Mapping[str, Var], prefix: str, heads: int) -> Var:
    d = h.shape[1]
    dh = d // heads
    q = dense(h, p[prefix + "wq"], p[prefix + "bq"])
    k = dense(h, p[prefix + "wk"], p[prefix + "bk"])
    v = dense(h, p[prefix + "wv"], p[prefix + "bv"])
    outs = []
    for i in range(heads):
        lo, hi = i * dh, (i + 1) * dh
        qi, ki, vi = ad.cols(q, lo, hi), ad.cols(k, lo, hi), ad.cols(v, lo, hi)
        scores = ad.scale(ad.matmul(qi, ad.transpose(ki)), 1.0 / np.sqrt(dh))
        outs.append(ad.matmul(ad.softmax_rows(scores), vi))
    joined = outs[0] if heads == 1 else ad.concat_cols(outs)
    return dense(joined, p[prefix + "wo"], p[prefix + "bo"])


def gt_layer(h: Var, p: Mapping[str, Var], prefix: str, heads: int) -> Var:
    h = ad.layer_norm_rows(ad.add(h, self_attention(h, p, prefix, heads)), p[prefix + "ln1_g"], p[prefix + "ln1_b"])
    ff = dense(ad.relu(dense(h, p[prefix + "ff_w1"], p[prefix + "ff_b1"])), p[prefix + "ff_w2"], p[prefix + "ff_b2"])
    return ad.layer_norm_rows(ad.add(h, ff), p[prefix + "ln2_g"], p[prefix + "ln2_b"])


def gt_stack(x, p: Mapping[str, Var], k: int, config: TrainConfig) -> Var:
    h = ad.constant(x)
    for l in range(config.gt_layers):
        h = gt_layer(h, p, f"gt{k}.{l}.", config.gt_heads)
    return h


def kgt_forward(bundle: GraphBundle, p: Mapping[str, Var], config: TrainConfig) -> Var:
    if bundle.k != config.k:
        raise ValueError(f"bundle has {bundle.k} graphs, model expects {config.k}")
    outs = [gt_stack(bundle.block(k), p, k, config) for k in range(config.k)]
    return outs[0] if len(outs) == 1 else ad.concat_cols(outs)


def head_logits(z: Var, p: Mapping[str, Var], depth: int) -> Var:
    h = z
    for l in range(depth):
        h = dense(h, p[f"head.{l}.w"], p[f"head.{l}.b"])
        if l < depth - 1:
            h = ad.relu(h)
    return h


def forward_logits(bundle: GraphBundle, p: Mapping[str, Var], config: TrainConfig) -> Var:
    """Pre-softmax class scores; GIN blocks come before GT blocks in the joint embedding."""
    if bundle.d_star != config.d_star:
        raise ValueError(f"bundle feature width {bundle.d_star} does not match d_star {config.d_star}")
    z = ad.concat_cols([kgin_forward(bundle, p, config), kgt_forward(bundle, p, config)])
    return head_logits(z, p, len(config.head_widths))


def forward_vars(bundle: GraphBundle, p: Mapping[str, Var], config: TrainConfig) -> Var:
    return ad.softmax_rows(forward_logits(bundle, p, config))


def forward(bundle: GraphBundle, params: ModelParams) -> np.ndarray:
    """Class probabilities ``n x 2`` (column 1 = outlier) without recording gradients."""
    return forward_vars(bundle, params.bind(), params.config).value
