"""Subword-to-word alignment and concatenation fusion."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlignmentError, ShapeError
from .numcore import (
    Tensor,
    concat,
    conv1d_valid,
    embedding_lookup,
    linear,
    pad_rows,
    relu_maxpool,
    stack,
    xavier_uniform,
    zeros,
)

FUSION_MODES = ("sembert", "subword_ablation", "baseline")


@dataclass
class FusionParams:
    W: Tensor  # [k * d_enc, d_w]
    b: Tensor  # [d_w]
    k: int

    def tensors(self) -> list[Tensor]:
        return [self.W, self.b]


def init_fusion(rng: np.random.Generator, d_enc: int, d_w: int, k: int = 3) -> FusionParams:
    if k < 1 or d_w < 1:
        raise ValueError(f"kernel size and d_w must be positive, got k={k}, d_w={d_w}")
    return FusionParams(xavier_uniform(rng, (k * d_enc, d_w), "fusion.W"), zeros((d_w,), "fusion.b"), k)


def _check_spans(spans: Sequence[tuple[int, int]], rows: int) -> None:
    for i, (start, length) in enumerate(spans):
        if length < 1 or start < 0 or start + length > rows:
            raise AlignmentError(f"word {i}: span ({start}, {length}) outside {rows} encoder rows")


def subwords_to_words(enc: Tensor, spans: Sequence[tuple[int, int]], params: FusionParams) -> Tensor:
    """One vector per word: conv over its own subword rows, then ReLU + max-pool.

    Words with fewer than ``k`` pieces are zero-padded on the right. All
    words are processed in one gather; :func:`subwords_to_words_reference`
    is the word-by-word equivalent.
    """
    spans = getattr(spans, "spans", spans)
    _check_spans(spans, enc.shape[0])
    k = params.k
    rows, width = enc.shape
    lengths = np.array([n for _, n in spans])
    starts = np.array([s for s, _ in spans])
    positions = np.maximum(lengths, k) - k + 1
    offsets = np.arange(positions.max())[None, :, None] + np.arange(k)[None, None, :]
    gather = starts[:, None, None] + offsets
    # row index ``rows`` is an appended zero row serving as right padding
    gather = np.where(offsets < lengths[:, None, None], gather, rows)
    padded = concat([enc, Tensor(np.zeros((1, width)))], axis=0)
    windows = embedding_lookup(padded, gather).reshape(len(spans), -1, k * width)
    conv = linear(windows, params.W, params.b)
    valid = np.arange(positions.max())[None, :] < positions[:, None]
    return relu_maxpool(conv, valid)


def subwords_to_words_reference(enc: Tensor, spans: Sequence[tuple[int, int]], params: FusionParams) -> Tensor:
    """Word-by-word composition of pad, ``conv1d_valid`` and ``relu_maxpool``."""
    spans = getattr(spans, "spans", spans)
    _check_spans(spans, enc.shape[0])
    words = []
    for start, length in spans:
        pieces = pad_rows(enc[start : start + length], params.k)
        words.append(relu_maxpool(conv1d_valid(pieces, params.W, params.b, params.k)))
    return stack(words, axis=0)


def fuse(e_w: Tensor, e_t: Tensor | None) -> Tensor:
    """Row-wise concatenation ``[e_w | e_t]``; ``e_t`` of width 0 or ``None`` gives ``e_w``."""
    if e_t is None or e_t.shape[-1] == 0:
        if e_t is not None and e_t.shape[0] != e_w.shape[0]:
            raise ShapeError(f"fuse: {e_w.shape[0]} word rows vs {e_t.shape[0]} semantic rows")
        return e_w
    if e_w.shape[0] != e_t.shape[0]:
        raise ShapeError(f"fuse: {e_w.shape[0]} word rows vs {e_t.shape[0]} semantic rows")
    return concat([e_w, e_t], axis=-1)


def subword_label_ids(frames: np.ndarray, spans: Sequence[tuple[int, int]], length: int, outside_id: int) -> np.ndarray:
    """Copy each word's m labels onto every one of its subwords; other rows get O."""
    frames = np.asarray(frames, dtype=np.int64)
    if frames.shape[1] != len(spans):
        raise AlignmentError(f"{frames.shape[1]} labels per frame for {len(spans)} words")
    _check_spans(spans, length)
    ids = np.full((frames.shape[0], length), outside_id, dtype=np.int64)
    for w, (start, n) in enumerate(spans):
        ids[:, start : start + n] = frames[:, w : w + 1]
    return ids


def fuse_subword_ablation(
    enc: Tensor, frames, spans: Sequence[tuple[int, int]], label_table: Tensor, outside_id: int
) -> Tensor:
    """Subword-level variant: raw label embeddings appended to every encoder row."""
    spans = getattr(spans, "spans", spans)
    if not isinstance(frames, np.ndarray):
        frames = np.asarray([f.labels for f in frames], dtype=np.int64)
    length = enc.shape[0]
    ids = subword_label_ids(frames, spans, length, outside_id)
    m = ids.shape[0]
    labels = embedding_lookup(label_table, ids).transpose(1, 0, 2).reshape(length, m * label_table.shape[1])
    return concat([enc, labels], axis=-1)
