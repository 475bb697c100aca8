"""Task heads and span decoding with a null-answer threshold."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DecodeError
from .metrics import squad_em_f1
from .numcore import Tensor, linear, xavier_uniform, zeros


@dataclass
class HeadParams:
    W: Tensor  # [width, outputs]
    b: Tensor

    def tensors(self) -> list[Tensor]:
        return [self.W, self.b]


def init_head(rng: np.random.Generator, width: int, outputs: int) -> HeadParams:
    return HeadParams(xavier_uniform(rng, (width, outputs), "head.W"), zeros((outputs,), "head.b"))


def classify(h: Tensor, params: HeadParams) -> Tensor:
    """Logits (or a single regression score) from the first-token row of ``h``."""
    return linear(h[0:1], params.W, params.b).reshape(-1)


def span_logits(h: Tensor, params: HeadParams) -> tuple[Tensor, Tensor]:
    out = linear(h, params.W, params.b)
    return out[:, 0], out[:, 1]


@dataclass
class NullThreshold:
    tau: float


@dataclass
class SpanPrediction:
    start: int
    end: int
    score: float  # best non-null span score
    is_null: bool
    null_score: float = 0.0
    best_start: int = 0
    best_end: int = 0


def _softmax(x: np.ndarray, keep: np.ndarray) -> np.ndarray:
    z = np.where(keep, x, -np.inf)
    e = np.exp(z - z.max())
    return e / e.sum()


def decode_span(
    start_logits,
    end_logits,
    tau: NullThreshold | float = 0.0,
    max_span_len: int = 30,
    mask: Sequence[bool] | None = None,
) -> SpanPrediction:
    """Best ``(i, j)`` with ``i <= j < i + max_span_len`` against the null span at 0.

    Position 0 is the null slot. ``mask`` marks the positions allowed to start
    or end an answer (position 0 never is). Start and end logits are each
    softmax-normalized over the candidates plus position 0, a span scores
    ``s_i + e_j``, and it is returned only when that score exceeds
    ``s_0 + e_0 + tau``.
    """
    s_log = np.asarray(getattr(start_logits, "data", start_logits), dtype=np.float64)
    e_log = np.asarray(getattr(end_logits, "data", end_logits), dtype=np.float64)
    n = s_log.shape[0]
    cand = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
    cand[0] = False
    if not cand.any():
        raise DecodeError("every position is masked; no candidate span exists")
    keep = cand.copy()
    keep[0] = True
    s = _softmax(s_log, keep)
    e = _softmax(e_log, keep)
    idx = np.arange(n)
    legal = (idx[None, :] >= idx[:, None]) & (idx[None, :] - idx[:, None] < max_span_len)
    legal &= cand[:, None] & cand[None, :]
    scores = np.where(legal, s[:, None] + e[None, :], -np.inf)
    flat = int(scores.argmax())
    i, j = divmod(flat, n)
    best = float(scores[i, j])
    null = float(s[0] + e[0])
    tau = tau.tau if isinstance(tau, NullThreshold) else float(tau)
    if best > null + tau:
        return SpanPrediction(i, j, best, False, null, i, j)
    return SpanPrediction(0, 0, best, True, null, i, j)


def threshold_f1(diffs, f1_answer, f1_null, tau: float) -> float:
    """Mean F1 when an answer is given exactly for examples with ``diff > tau``."""
    diffs = np.asarray(diffs, dtype=float)
    answered = diffs > tau
    return float(np.where(answered, f1_answer, f1_null).mean())


def _per_example(pred_texts, gold_answers) -> tuple[np.ndarray, np.ndarray]:
    f1_ans = np.array([squad_em_f1(p, g)[1] for p, g in zip(pred_texts, gold_answers)])
    f1_null = np.array([squad_em_f1(None, g)[1] for g in gold_answers])
    return f1_ans, f1_null


def threshold_grid(diffs) -> list[float]:
    return [-math.inf] + sorted(set(float(d) for d in diffs)) + [math.inf]


def tune_threshold(best_scores, null_scores, pred_texts, gold_answers) -> NullThreshold:
    """Dev-F1-maximizing ``tau`` over observed score margins and the two infinities.

    Ties go to the larger ``tau``.
    """
    diffs = np.asarray(best_scores, dtype=float) - np.asarray(null_scores, dtype=float)
    if diffs.size == 0:
        raise ValueError("tune_threshold needs a non-empty dev set")
    f1_ans, f1_null = _per_example(pred_texts, gold_answers)
    order = np.argsort(diffs, kind="stable")
    sorted_diffs = diffs[order]
    null_prefix = np.concatenate([[0.0], np.cumsum(f1_null[order])])
    ans_prefix = np.concatenate([[0.0], np.cumsum(f1_ans[order])])
    grid = threshold_grid(diffs)
    # examples with diff <= tau abstain
    counts = np.searchsorted(sorted_diffs, grid, side="right")
    totals = null_prefix[counts] + (ans_prefix[-1] - ans_prefix[counts])
    best_total = totals.max()
    winners = [t for t, v in zip(grid, totals) if v >= best_total - 1e-12]
    return NullThreshold(max(winners))
