"""Small post-norm transformer encoder trained from scratch."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthError, PreconditionError, ShapeError
from .numcore import (
    Tensor,
    embedding_lookup,
    gelu,
    layer_norm,
    linear,
    masked_softmax,
    ones,
    uniform_embedding,
    xavier_uniform,
    zeros,
)


@dataclass
class EncoderConfig:
    vocab_size: int
    d_enc: int = 48
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 96
    max_positions: int = 128
    n_segments: int = 2
    embed_layer_norm: bool = True

    def __post_init__(self):
        if self.d_enc % self.n_heads:
            raise PreconditionError(f"d_enc={self.d_enc} is not divisible by n_heads={self.n_heads}")


@dataclass
class LayerParams:
    Wq: Tensor
    bq: Tensor
    Wk: Tensor  # no key bias: it shifts every score in a row equally, so softmax ignores it
    Wv: Tensor
    bv: Tensor
    Wo: Tensor
    bo: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    ln2_g: Tensor
    ln2_b: Tensor

    def tensors(self) -> list[Tensor]:
        return list(vars(self).values())


@dataclass
class EncoderParams:
    token: Tensor
    position: Tensor
    segment: Tensor
    emb_ln_g: Tensor
    emb_ln_b: Tensor
    layers: list[LayerParams] = field(default_factory=list)

    def tensors(self) -> list[Tensor]:
        out = [self.token, self.position, self.segment, self.emb_ln_g, self.emb_ln_b]
        for layer in self.layers:
            out += layer.tensors()
        return out


def init_encoder(rng: np.random.Generator, cfg: EncoderConfig) -> EncoderParams:
    d, f = cfg.d_enc, cfg.d_ff
    layers = []
    for i in range(cfg.n_layers):
        p = f"enc.{i}."
        layers.append(
            LayerParams(
                xavier_uniform(rng, (d, d), p + "Wq"), zeros((d,), p + "bq"),
                xavier_uniform(rng, (d, d), p + "Wk"),
                xavier_uniform(rng, (d, d), p + "Wv"), zeros((d,), p + "bv"),
                xavier_uniform(rng, (d, d), p + "Wo"), zeros((d,), p + "bo"),
                ones((d,), p + "ln1_g"), zeros((d,), p + "ln1_b"),
                xavier_uniform(rng, (d, f), p + "W1"), zeros((f,), p + "b1"),
                xavier_uniform(rng, (f, d), p + "W2"), zeros((d,), p + "b2"),
                ones((d,), p + "ln2_g"), zeros((d,), p + "ln2_b"),
            )  # fmt: skip
        )
    return EncoderParams(
        uniform_embedding(rng, (cfg.vocab_size, d), "enc.token"),
        uniform_embedding(rng, (cfg.max_positions, d), "enc.position"),
        uniform_embedding(rng, (cfg.n_segments, d), "enc.segment"),
        ones((d,), "enc.emb_ln_g"),
        zeros((d,), "enc.emb_ln_b"),
        layers,
    )


def encode(ids, segments, mask, params: EncoderParams, cfg: EncoderConfig, attention: list | None = None) -> Tensor:
    """Contextual encodings for ids of shape [L] or [batch, L].

    Keys where ``mask`` is 0 receive no attention. When ``attention`` is a
    list, each layer's attention probabilities [batch, heads, L, L] are
    appended to it.
    """
    ids = np.asarray(ids, dtype=np.int64)
    segments = np.asarray(segments, dtype=np.int64)
    mask = np.asarray(mask).astype(bool)
    if not (ids.shape == segments.shape == mask.shape):
        raise ShapeError(f"encode: ids {ids.shape}, segments {segments.shape}, mask {mask.shape} differ")
    squeeze = ids.ndim == 1
    if squeeze:
        ids, segments, mask = ids[None], segments[None], mask[None]
    batch, length = ids.shape
    if length > cfg.max_positions:
        raise LengthError(f"sequence of {length} tokens exceeds max_positions={cfg.max_positions}")
    d, heads = cfg.d_enc, cfg.n_heads
    dh = d // heads

    x = (
        embedding_lookup(params.token, ids)
        + embedding_lookup(params.position, np.arange(length))
        + embedding_lookup(params.segment, segments)
    )
    if cfg.embed_layer_norm:
        x = layer_norm(x, params.emb_ln_g, params.emb_ln_b)
    key_mask = mask[:, None, None, :]
    scale = 1.0 / math.sqrt(dh)
    for layer in params.layers:
        q = linear(x, layer.Wq, layer.bq).reshape(batch, length, heads, dh).transpose(0, 2, 1, 3)
        k = (x @ layer.Wk).reshape(batch, length, heads, dh).transpose(0, 2, 3, 1)
        v = linear(x, layer.Wv, layer.bv).reshape(batch, length, heads, dh).transpose(0, 2, 1, 3)
        probs = masked_softmax((q @ k) * scale, key_mask)
        if attention is not None:
            attention.append(probs.data)
        ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(batch, length, d)
        x = layer_norm(x + linear(ctx, layer.Wo, layer.bo), layer.ln1_g, layer.ln1_b)
        ff = linear(gelu(linear(x, layer.W1, layer.b1)), layer.W2, layer.b2)
        x = layer_norm(x + ff, layer.ln2_g, layer.ln2_b)
    return x.reshape(length, d) if squeeze else x
