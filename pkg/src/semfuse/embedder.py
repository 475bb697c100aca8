"""Joint semantic embedding from m word-aligned label sequences."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .numcore import (
    BiGRUParams,
    Tensor,
    bigru_forward,
    concat,
    embedding_lookup,
    gru_scan,
    init_bigru,
    linear,
    uniform_embedding,
    xavier_uniform,
    zeros,
)
from .srl import SrlFrame


@dataclass
class EmbedderParams:
    label_table: Tensor  # [n_labels, d_srl]
    bigru: BiGRUParams  # shared by all m frames
    W: Tensor  # [m * 2h, d]
    b: Tensor  # [d]

    @property
    def m(self) -> int:
        return self.W.shape[0] // (2 * self.bigru.forward.hidden)

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def tensors(self) -> list[Tensor]:
        return [self.label_table, *self.bigru.tensors(), self.W, self.b]


def init_embedder(rng: np.random.Generator, n_labels: int, m: int, d_srl: int = 10, hidden: int = 10, d: int = 10) -> EmbedderParams:
    table = uniform_embedding(rng, (n_labels, d_srl), "srl.label_table")
    bigru = init_bigru(rng, d_srl, hidden, "srl.bigru")
    if d > 0:
        W = xavier_uniform(rng, (m * 2 * hidden, d), "srl.W")
    else:
        W = zeros((m * 2 * hidden, 0), "srl.W")
    return EmbedderParams(table, bigru, W, zeros((d,), "srl.b"))


def embed_frames(frames: Sequence[SrlFrame] | np.ndarray, params: EmbedderParams) -> Tensor:
    """Label lookup, shared BiGRU per frame, per-word concat over frames, projection.

    Returns ``e_t`` of shape [n, d].
    """
    rows = frames if isinstance(frames, np.ndarray) else [f.labels for f in frames]
    try:
        ids = np.asarray(rows, dtype=np.int64)
    except ValueError:
        raise ShapeError("embed_frames: frames have unequal lengths") from None
    if ids.ndim != 2 or ids.shape[0] != params.m:
        raise ShapeError(f"embed_frames: expected {params.m} frames of equal length, got array of shape {ids.shape}")
    m, n = ids.shape
    vectors = embedding_lookup(params.label_table, ids)  # [m, n, d_srl]
    states = bigru_forward(vectors, params.bigru)  # [m, n, 2h]
    per_word = states.transpose(1, 0, 2).reshape(n, -1)  # [n, m*2h], frame-major blocks
    return linear(per_word, params.W, params.b)


def embed_frames_batch(batch: Sequence[np.ndarray], params: EmbedderParams) -> list[Tensor]:
    """:func:`embed_frames` for several sentences at once.

    Frames are right-padded to a common length. The right-to-left direction
    runs left-to-right over each sentence reversed within its own length, so
    padding never reaches a real position in either direction.
    """
    batch = [np.asarray(f, dtype=np.int64) for f in batch]
    m = params.m
    for f in batch:
        if f.ndim != 2 or f.shape[0] != m:
            raise ShapeError(f"embed_frames_batch: expected {m} frames per sentence, got shape {f.shape}")
    lengths = [f.shape[1] for f in batch]
    width = max(lengths)
    fwd = np.zeros((len(batch), m, width), dtype=np.int64)
    rev = np.zeros_like(fwd)
    for b, f in enumerate(batch):
        fwd[b, :, : f.shape[1]] = f
        rev[b, :, : f.shape[1]] = f[:, ::-1]
    fwd_states = gru_scan(embedding_lookup(params.label_table, fwd.reshape(-1, width)), params.bigru.forward)
    rev_states = gru_scan(embedding_lookup(params.label_table, rev.reshape(-1, width)), params.bigru.backward)
    out = []
    for b, n in enumerate(lengths):
        rows = slice(b * m, (b + 1) * m)
        left = fwd_states[rows, :n]
        right = rev_states[rows, n - 1 :: -1] if n > 0 else rev_states[rows, :0]
        states = concat([left, right], axis=-1)
        per_word = states.transpose(1, 0, 2).reshape(n, -1)
        out.append(linear(per_word, params.W, params.b))
    return out
