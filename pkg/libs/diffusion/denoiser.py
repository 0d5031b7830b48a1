"""
Graph-transformer noise predictor.

Nodes are regions (state initialised from the condition vectors plus a
diffusion-time embedding); edges are ordered region pairs carrying the
noisy flow value in both directions, the centroid distance and a
self-loop flag. Each block lets edge states bias the attention logits,
feeds the logits back into the edge states, and updates both with
feed-forward layers. The head reads one noise value per ordered pair.

Every operation acts per node, per edge, or symmetrically over all
nodes, so relabelling the regions relabels the output the same way.
"""

from dataclasses import asdict, dataclass

import numpy as np

from libs.errors import ShapeError
from libs.features.conditions import ConditionSet
from libs.nn import functional as F
from libs.nn.layers import MLP, LayerNorm, Linear, Module
from libs.nn.tensor import Tensor, no_grad

EDGE_INPUTS = 4


@dataclass(frozen=True)
class DenoiserDims:
    cond_dim: int
    d_model: int = 64
    heads: int = 4
    layers: int = 3
    d_edge: int = 16
    time_dim: int = 32

    def __post_init__(self) -> None:
        if min(self.cond_dim, self.d_model, self.heads, self.layers, self.d_edge, self.time_dim) < 1:
            raise ShapeError(f"Denoiser dimensions must be positive: {self}")
        if self.d_model % self.heads:
            raise ShapeError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.time_dim % 2:
            raise ShapeError("time_dim must be even")

    def as_array(self) -> np.ndarray:
        return np.array(list(asdict(self).values()), dtype=np.int64)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "DenoiserDims":
        return cls(*(int(v) for v in values))


def time_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding [sin(t w_k), cos(t w_k)] with w_k = 10000^(-k / (dim / 2))."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    angles = float(t) * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])


def edge_inputs(zt: np.ndarray, distances: np.ndarray) -> np.ndarray:
    """(N, N, 4): forward flow, reverse flow, log1p(distance km), self-loop flag."""
    n = zt.shape[0]
    return np.stack([zt, zt.T, np.log1p(distances), np.eye(n)], axis=-1)


class GraphTransformerBlock(Module):
    def __init__(self, dims: DenoiserDims, rng: np.random.Generator):
        d, de, h = dims.d_model, dims.d_edge, dims.heads
        self.heads = h
        self.head_dim = d // h
        self.node_norm = LayerNorm(d)
        self.query = Linear(d, d, rng, bias=False)
        self.key = Linear(d, d, rng, bias=False)
        self.value = Linear(d, d, rng, bias=False)
        self.out = Linear(d, d, rng)
        self.edge_norm = LayerNorm(de)
        self.edge_bias = Linear(de, h, rng)
        self.logit_to_edge = Linear(h, de, rng)
        self.node_ffn_norm = LayerNorm(d)
        self.node_ffn = MLP([d, 2 * d, d], rng)
        self.edge_ffn_norm = LayerNorm(de)
        self.edge_ffn = MLP([de, 2 * de, de], rng)

    def _split_heads(self, x: Tensor, n: int) -> Tensor:
        # (N, d) -> (H, N, d_head)
        return x.reshape(n, self.heads, self.head_dim).transpose(1, 0, 2)

    def forward(self, h: Tensor, e: Tensor) -> tuple[Tensor, Tensor]:
        n = h.shape[0]
        hn = self.node_norm(h)
        q = self._split_heads(self.query(hn), n)
        k = self._split_heads(self.key(hn), n)
        v = self._split_heads(self.value(hn), n)

        bias = self.edge_bias(self.edge_norm(e)).transpose(2, 0, 1)  # (H, N, N)
        logits = (q @ k.transpose(0, 2, 1)) * (1.0 / np.sqrt(self.head_dim)) + bias
        attended = F.softmax(logits, axis=-1) @ v  # (H, N, d_head)
        h = h + self.out(attended.transpose(1, 0, 2).reshape(n, self.heads * self.head_dim))

        e = e + self.logit_to_edge(logits.transpose(1, 2, 0))
        h = h + self.node_ffn(self.node_ffn_norm(h))
        e = e + self.edge_ffn(self.edge_ffn_norm(e))
        return h, e


class GraphDenoiser(Module):
    """eps_theta(Z_t, t, C): one noise value per ordered region pair."""

    def __init__(self, dims: DenoiserDims, rng: np.random.Generator):
        self.dims = dims
        d, de = dims.d_model, dims.d_edge
        self.project = MLP([dims.cond_dim, d, d], rng)
        self.time_mlp = MLP([dims.time_dim, d, d], rng)
        self.time_to_edge = Linear(d, de, rng)
        self.edge_embed = Linear(EDGE_INPUTS, de, rng)
        self.blocks = [GraphTransformerBlock(dims, rng) for _ in range(dims.layers)]
        self.head_norm = LayerNorm(d)
        self.head_edge_norm = LayerNorm(de)
        self.head_source = Linear(d, de, rng)
        self.head_target = Linear(d, de, rng)
        self.head_out = Linear(de, 1, rng)

    def check_inputs(self, zt: np.ndarray, cond: ConditionSet) -> None:
        n = cond.n_regions
        if np.shape(zt) != (n, n):
            raise ShapeError(f"Noisy state is {np.shape(zt)} but the condition set has {n} regions")
        if cond.width != self.dims.cond_dim:
            raise ShapeError(f"Condition width {cond.width} does not match the model's {self.dims.cond_dim}")

    def forward(self, zt: np.ndarray, t: int, cond: ConditionSet) -> Tensor:
        self.check_inputs(zt, cond)
        n = cond.n_regions
        distances = cond.distances if cond.distances is not None else np.zeros((n, n))

        temb = self.time_mlp(Tensor(time_embedding(t, self.dims.time_dim)).reshape(1, -1))
        temb = temb.reshape(self.dims.d_model)
        h = self.project(Tensor(cond.X)) + temb
        e = self.edge_embed(Tensor(edge_inputs(np.asarray(zt, dtype=np.float64), distances)))
        e = e + self.time_to_edge(temb.reshape(1, -1)).reshape(self.dims.d_edge)

        for block in self.blocks:
            h, e = block(h, e)

        hn = self.head_norm(h)
        source = F.expand(self.head_source(hn), axis=1, n=n)  # [i, j] <- node i
        target = F.expand(self.head_target(hn), axis=0, n=n)  # [i, j] <- node j
        readout = F.gelu(self.head_edge_norm(e) + source + target)
        return self.head_out(readout).reshape(n, n)


def predict_noise(model: GraphDenoiser, zt: np.ndarray, t: int, cond: ConditionSet) -> np.ndarray:
    """Graph-free evaluation of the denoiser; returns an (N, N) array."""
    with no_grad():
        return model(zt, t, cond).data
