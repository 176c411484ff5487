"""No-reference quality regressor: pillar encoder + transformer.

The point cloud is rasterized into bird's-eye-view pillars, refined by
a small convolutional backbone, and cut into patch queries.  A
transformer encoder runs self-attention over the queries; a decoder
cross-attends from the queries to every backbone cell token; a shared
MLP head scores each query and the frame score is the mean.

Everything is built from the autodiff primitives so the whole model is
one differentiable graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NotDivisible, OddDim, SchemaMismatch, ShapeMismatch

PILLAR_RAW_FEATURES = 5  # mean dx, mean dy, max z, log1p(count), mean intensity

POS_ENCODINGS = ("none", "sinusoidal", "learned")
INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs; defaults are the desk-scale configuration."""

    x_range: tuple = (-32.0, 32.0)
    y_range: tuple = (-32.0, 32.0)
    cell_size: float = 1.0
    pillar_channels: int = 32
    embed_dim: int = 64
    heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    patch_size: int = 8
    pos_encoding: str = "sinusoidal"
    ffn_dim: int = 128
    head_widths: tuple = (64, 32)
    backbone: str = "pillar"

    def __post_init__(self):
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        object.__setattr__(self, "y_range", tuple(float(v) for v in self.y_range))
        object.__setattr__(self, "head_widths", tuple(int(v) for v in self.head_widths))
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.x_range[1] <= self.x_range[0] or self.y_range[1] <= self.y_range[0]:
            raise ValueError("bev ranges must be increasing")
        h, w = self.grid_shape
        if h < 1 or w < 1:
            raise ValueError("bev grid is empty")
        if h % self.patch_size or w % self.patch_size:
            raise NotDivisible(
                f"grid {h}x{w} not divisible by patch size {self.patch_size}"
            )
        if self.embed_dim % self.heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if self.decoder_layers < 1:
            raise ValueError("decoder needs at least one layer")
        if self.pos_encoding not in POS_ENCODINGS:
            raise ValueError(f"unknown positional encoding {self.pos_encoding!r}")
        if self.backbone not in ("pillar", "voxel"):
            raise ValueError(f"unknown backbone {self.backbone!r}")

    @property
    def grid_shape(self) -> tuple:
        w = int(round((self.x_range[1] - self.x_range[0]) / self.cell_size))
        h = int(round((self.y_range[1] - self.y_range[0]) / self.cell_size))
        return h, w

    def to_dict(self) -> dict:
        return {
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "cell_size": self.cell_size,
            "pillar_channels": self.pillar_channels,
            "embed_dim": self.embed_dim,
            "heads": self.heads,
            "encoder_layers": self.encoder_layers,
            "decoder_layers": self.decoder_layers,
            "patch_size": self.patch_size,
            "pos_encoding": self.pos_encoding,
            "ffn_dim": self.ffn_dim,
            "head_widths": list(self.head_widths),
            "backbone": self.backbone,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise SchemaMismatch(f"unknown model config keys: {sorted(unknown)}")
        kwargs = dict(payload)
        for key in ("x_range", "y_range", "head_widths"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def pillarize(points: np.ndarray, config: ModelConfig, dtype=np.float32):
    """Aggregate a point cloud into per-pillar features.

    Returns (features, cell_index, n_cells) where features is
    (n_occupied, 5) and cell_index gives each occupied pillar's
    row-major BEV cell.  Points outside the BEV range are dropped.
    Members are brought into a canonical order before aggregation so
    the output is bit-exactly invariant to input point order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    h, w = config.grid_shape
    n_cells = h * w
    (x0, x1), (y0, y1) = config.x_range, config.y_range
    keep = ((pts[:, 0] >= x0) & (pts[:, 0] < x1)
            & (pts[:, 1] >= y0) & (pts[:, 1] < y1))
    pts = pts[keep]
    if pts.shape[0] == 0:
        return (np.zeros((0, PILLAR_RAW_FEATURES), dtype=dtype),
                np.zeros(0, dtype=np.int64), n_cells)
    col = np.floor((pts[:, 0] - x0) / config.cell_size).astype(np.int64)
    row = np.floor((pts[:, 1] - y0) / config.cell_size).astype(np.int64)
    cell = row * w + col
    order = np.lexsort((pts[:, 3], pts[:, 2], pts[:, 1], pts[:, 0], cell))
    pts = pts[order]
    cell = cell[order]
    uniq, starts = np.unique(cell, return_index=True)
    counts = np.diff(np.append(starts, cell.shape[0]))
    sum_x = np.add.reduceat(pts[:, 0], starts)
    sum_y = np.add.reduceat(pts[:, 1], starts)
    max_z = np.maximum.reduceat(pts[:, 2], starts)
    sum_i = np.add.reduceat(pts[:, 3], starts)
    center_x = x0 + ((uniq % w) + 0.5) * config.cell_size
    center_y = y0 + ((uniq // w) + 0.5) * config.cell_size
    features = np.stack([
        sum_x / counts - center_x,
        sum_y / counts - center_y,
        max_z,
        np.log1p(counts),
        sum_i / counts,
    ], axis=1)
    return features.astype(dtype), uniq, n_cells


def patchify(bev: Tensor, patch: int) -> Tensor:
    """Cut a (C, H, W) map into row-major PxP patch vectors.

    Output is ((H/P)*(W/P), C*P*P); each row is one patch flattened
    channel-major.
    """
    c, h, w = bev.shape
    if h % patch or w % patch:
        raise NotDivisible(f"map {h}x{w} not divisible by patch {patch}")
    hp, wp = h // patch, w // patch
    x = ad.reshape(bev, (c, hp, patch, wp, patch))
    x = ad.transpose(x, (1, 3, 0, 2, 4))
    return ad.reshape(x, (hp * wp, c * patch * patch))


def sinusoidal_encoding(count: int, dim: int) -> np.ndarray:
    """Interleaved sin/cos table over positions at geometric frequencies."""
    if dim % 2:
        raise OddDim(f"sinusoidal encoding needs an even dim, got {dim}")
    pos = np.arange(count, dtype=np.float64)[:, None]
    idx = np.arange(dim // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * idx / dim)
    table = np.empty((count, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table


def positional_encoding(kind: str, count: int, dim: int, rng=None) -> np.ndarray:
    if kind == "none":
        return np.zeros((count, dim), dtype=np.float64)
    if kind == "sinusoidal":
        return sinusoidal_encoding(count, dim)
    if kind == "learned":
        rng = rng if rng is not None else np.random.default_rng(0)
        return rng.normal(0.0, INIT_STD, size=(count, dim))
    raise ValueError(f"unknown positional encoding {kind!r}")


def multi_head_attention(query: Tensor, memory: Tensor, wq, wk, wv, wo,
                         heads: int, attn_sink: list = None) -> Tensor:
    """Standard scaled dot-product attention from query rows to memory rows.

    ``attn_sink``, when given, receives the (heads, Tq, Tk) softmax
    weights as a plain array for inspection.
    """
    tq, dim = query.shape
    tk = memory.shape[0]
    dh = dim // heads
    q = ad.transpose(ad.reshape(ad.matmul(query, wq), (tq, heads, dh)), (1, 0, 2))
    k = ad.transpose(ad.reshape(ad.matmul(memory, wk), (tk, heads, dh)), (1, 2, 0))
    v = ad.transpose(ad.reshape(ad.matmul(memory, wv), (tk, heads, dh)), (1, 0, 2))
    scores = ad.scale(ad.matmul(q, k), 1.0 / math.sqrt(dh))
    attn = ad.softmax(scores, axis=-1)
    if attn_sink is not None:
        attn_sink.append(np.array(attn.values, copy=True))
    ctx = ad.reshape(ad.transpose(ad.matmul(attn, v), (1, 0, 2)), (tq, dim))
    return ad.matmul(ctx, wo)


def _ffn(x: Tensor, w1, b1, w2, b2) -> Tensor:
    return ad.add(ad.matmul(ad.gelu(ad.add(ad.matmul(x, w1), b1)), w2), b2)


def encoder_layer(x: Tensor, p: dict, prefix: str, heads: int,
                  attn_sink=None) -> Tensor:
    """Pre-norm self-attention block: x + MHA(LN(x)), then x + FFN(LN(x))."""
    n = ad.layer_norm(x)
    x = ad.add(x, multi_head_attention(
        n, n, p[f"{prefix}.wq"], p[f"{prefix}.wk"], p[f"{prefix}.wv"],
        p[f"{prefix}.wo"], heads, attn_sink))
    n = ad.layer_norm(x)
    return ad.add(x, _ffn(n, p[f"{prefix}.ffn_w1"], p[f"{prefix}.ffn_b1"],
                          p[f"{prefix}.ffn_w2"], p[f"{prefix}.ffn_b2"]))


def decoder_layer(x: Tensor, tokens: Tensor, p: dict, prefix: str, heads: int,
                  attn_sink=None) -> Tensor:
    """Pre-norm cross-attention block; queries attend to the map tokens."""
    n = ad.layer_norm(x)
    x = ad.add(x, multi_head_attention(
        n, tokens, p[f"{prefix}.wq"], p[f"{prefix}.wk"], p[f"{prefix}.wv"],
        p[f"{prefix}.wo"], heads, attn_sink))
    n = ad.layer_norm(x)
    return ad.add(x, _ffn(n, p[f"{prefix}.ffn_w1"], p[f"{prefix}.ffn_b1"],
                          p[f"{prefix}.ffn_w2"], p[f"{prefix}.ffn_b2"]))


def im2col3x3(x: Tensor) -> Tensor:
    """Unfold a (C, H, W) map into (H*W, 9C) rows of 3x3 neighborhoods.

    Zero padding keeps the spatial size; column block t*C:(t+1)*C holds
    tap t of the kernel in row-major tap order.  One fused node: the
    nine shifted views are gathered in the forward and scatter-added in
    the backward, which is much cheaper than nine slice ops.
    """
    c, h, w = x.shape
    padded = np.pad(x.values, ((0, 0), (1, 1), (1, 1)))
    cols = np.empty((h * w, 9 * c), dtype=x.dtype)
    for tap, (di, dj) in enumerate((i, j) for i in range(3) for j in range(3)):
        view = padded[:, di:di + h, dj:dj + w]
        cols[:, tap * c:(tap + 1) * c] = view.reshape(c, h * w).T
    out = Tensor(cols, x.requires_grad, (x,))

    def backward(g):
        gpad = np.zeros_like(padded)
        for tap, (di, dj) in enumerate((i, j) for i in range(3) for j in range(3)):
            block = g[:, tap * c:(tap + 1) * c].T.reshape(c, h, w)
            gpad[:, di:di + h, dj:dj + w] += block
        ad._accumulate(x, gpad[:, 1:1 + h, 1:1 + w])

    out._backward = backward
    return out


def conv3x3(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """3x3 same-padding convolution on a (C, H, W) map via im2col.

    ``weight`` is (9*C_in, C_out): the nine kernel taps stacked in
    row-major tap order, each tap a C_in block.
    """
    c, h, w = x.shape
    out = ad.add(ad.matmul(im2col3x3(x), weight), bias)
    return ad.reshape(ad.transpose(out), (weight.shape[1], h, w))


def _attention_params(rng, dim, dtype, prefix, params):
    for name in ("wq", "wk", "wv", "wo"):
        params[f"{prefix}.{name}"] = Tensor(
            rng.normal(0.0, INIT_STD, size=(dim, dim)).astype(dtype),
            requires_grad=True)


def _ffn_params(rng, dim, ffn_dim, dtype, prefix, params):
    params[f"{prefix}.ffn_w1"] = Tensor(
        rng.normal(0.0, INIT_STD, size=(dim, ffn_dim)).astype(dtype),
        requires_grad=True)
    params[f"{prefix}.ffn_b1"] = Tensor(np.zeros(ffn_dim, dtype=dtype),
                                        requires_grad=True)
    params[f"{prefix}.ffn_w2"] = Tensor(
        rng.normal(0.0, INIT_STD, size=(ffn_dim, dim)).astype(dtype),
        requires_grad=True)
    params[f"{prefix}.ffn_b2"] = Tensor(np.zeros(dim, dtype=dtype),
                                        requires_grad=True)


SCORE_BIAS_INIT = 50.0  # center of the 0-100 target range


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float32) -> dict:
    """Seeded parameter dictionary for the full model.

    Layers followed by relu use He initialization, plain projections
    use 1/sqrt(fan_in), and the residual attention/FFN weights use the
    small transformer standard.  The final bias starts at mid-scale so
    early training spends its steps on spread, not on the offset.
    """
    rng = np.random.default_rng(seed)
    dtype = np.dtype(dtype)
    c = config.pillar_channels
    dim = config.embed_dim
    h, w = config.grid_shape
    n_queries = (h // config.patch_size) * (w // config.patch_size)
    params = {}

    def linear(name, fan_in, fan_out, std=None):
        if std is None:
            std = math.sqrt(1.0 / fan_in)
        params[f"{name}.w"] = Tensor(
            rng.normal(0.0, std, size=(fan_in, fan_out)).astype(dtype),
            requires_grad=True)
        params[f"{name}.b"] = Tensor(np.zeros(fan_out, dtype=dtype),
                                     requires_grad=True)

    def he(fan_in):
        return math.sqrt(2.0 / fan_in)

    linear("pillar", PILLAR_RAW_FEATURES, c, he(PILLAR_RAW_FEATURES))
    linear("conv1", 9 * c, c, he(9 * c))
    linear("conv2", 9 * c, c, he(9 * c))
    linear("patch_embed", c * config.patch_size ** 2, dim)
    linear("token_embed", c, dim)
    if config.pos_encoding == "learned":
        params["pe.queries"] = Tensor(
            positional_encoding("learned", n_queries, dim, rng).astype(dtype),
            requires_grad=True)
        params["pe.tokens"] = Tensor(
            positional_encoding("learned", h * w, dim, rng).astype(dtype),
            requires_grad=True)
    for i in range(config.encoder_layers):
        _attention_params(rng, dim, dtype, f"enc{i}", params)
        _ffn_params(rng, dim, config.ffn_dim, dtype, f"enc{i}", params)
    for i in range(config.decoder_layers):
        _attention_params(rng, dim, dtype, f"dec{i}", params)
        _ffn_params(rng, dim, config.ffn_dim, dtype, f"dec{i}", params)
    widths = (dim,) + config.head_widths
    for j in range(len(config.head_widths)):
        linear(f"head{j}", widths[j], widths[j + 1], he(widths[j]))
    linear("head_out", widths[-1], 1)
    params["head_out.b"] = Tensor(
        np.full(1, SCORE_BIAS_INIT, dtype=dtype), requires_grad=True)
    return params


class ScoreRegressor:
    """The assembled model: weights plus the differentiable forward."""

    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 0,
                 dtype=np.float32):
        if config.backbone == "voxel":
            raise NotImplementedError("voxel backbone not implemented at desk scale")
        self.config = config
        self.dtype = np.dtype(dtype)
        self.params = init_params(config, seed, self.dtype)
        h, w = config.grid_shape
        n_queries = (h // config.patch_size) * (w // config.patch_size)
        if config.pos_encoding != "learned":
            self._pe_queries = Tensor(positional_encoding(
                config.pos_encoding, n_queries, config.embed_dim).astype(self.dtype))
            self._pe_tokens = Tensor(positional_encoding(
                config.pos_encoding, h * w, config.embed_dim).astype(self.dtype))

    def _pe(self, which: str) -> Tensor:
        if self.config.pos_encoding == "learned":
            return self.params[f"pe.{which}"]
        return self._pe_queries if which == "queries" else self._pe_tokens

    def forward(self, points, attn_sink: list = None) -> Tensor:
        """Differentiable score for one (N, 4) point cloud."""
        cfg = self.config
        p = self.params
        feats, cells, n_cells = pillarize(points, cfg, self.dtype)
        h, w = cfg.grid_shape
        if feats.shape[0]:
            pillar = ad.relu(ad.add(ad.matmul(Tensor(feats), p["pillar.w"]),
                                    p["pillar.b"]))
            bev_flat = ad.scatter_rows(pillar, cells, n_cells)
        else:
            # Keep the graph rooted in the weights even for an empty view.
            bev_flat = ad.scale(ad.matmul(
                Tensor(np.zeros((n_cells, PILLAR_RAW_FEATURES), dtype=self.dtype)),
                p["pillar.w"]), 0.0)
        bev = ad.transpose(ad.reshape(bev_flat, (h, w, cfg.pillar_channels)),
                           (2, 0, 1))
        bev = ad.relu(conv3x3(bev, p["conv1.w"], p["conv1.b"]))
        bev = ad.relu(conv3x3(bev, p["conv2.w"], p["conv2.b"]))

        queries = patchify(bev, cfg.patch_size)
        queries = ad.add(ad.matmul(queries, p["patch_embed.w"]), p["patch_embed.b"])
        queries = ad.add(queries, self._pe("queries"))
        for i in range(cfg.encoder_layers):
            queries = encoder_layer(queries, p, f"enc{i}", cfg.heads, attn_sink)

        tokens = ad.transpose(ad.reshape(bev, (cfg.pillar_channels, h * w)))
        tokens = ad.add(ad.matmul(tokens, p["token_embed.w"]), p["token_embed.b"])
        # Normalize token magnitudes once so cross-attention logits stay
        # in softmax's responsive range regardless of point counts.
        tokens = ad.add(ad.layer_norm(tokens), self._pe("tokens"))
        for i in range(cfg.decoder_layers):
            queries = decoder_layer(queries, tokens, p, f"dec{i}", cfg.heads,
                                    attn_sink)

        x = queries
        for j in range(len(cfg.head_widths)):
            x = ad.relu(ad.add(ad.matmul(x, p[f"head{j}.w"]), p[f"head{j}.b"]))
        x = ad.add(ad.matmul(x, p["head_out.w"]), p["head_out.b"])
        return ad.tmean(x)

    def predict(self, points) -> float:
        return float(self.forward(points).values)

    def parameter_list(self) -> list:
        return [self.params[name] for name in sorted(self.params)]

    def state_dict(self) -> dict:
        return {name: np.array(t.values, copy=True)
                for name, t in self.params.items()}

    def load_state(self, state: dict) -> None:
        missing = set(self.params) ^ set(state)
        if missing:
            raise ShapeMismatch(f"checkpoint/model name mismatch: {sorted(missing)}")
        for name, tensor in self.params.items():
            arr = np.asarray(state[name], dtype=self.dtype)
            if arr.shape != tensor.values.shape:
                raise ShapeMismatch(
                    f"parameter {name}: checkpoint {arr.shape} vs model "
                    f"{tensor.values.shape}")
            tensor.values = arr
