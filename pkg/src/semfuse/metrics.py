"""Evaluation metrics: SQuAD-style EM/F1, accuracy, binary F1, Matthews, Pearson."""
from __future__ import annotations

import collections
import math
import re
import string
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, ShapeError

_ARTICLES = re.compile(r"\b(a|an|the)\b", re.UNICODE)
_PUNCT = set(string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = "".join(ch for ch in text.lower() if ch not in _PUNCT)
    return " ".join(_ARTICLES.sub(" ", text).split())


def _tokens(text: str | None) -> list[str]:
    return normalize_answer(text).split() if text else []


def _f1(pred: list[str], gold: list[str]) -> float:
    if not pred or not gold:
        return float(pred == gold)
    same = sum((collections.Counter(pred) & collections.Counter(gold)).values())
    if same == 0:
        return 0.0
    precision = same / len(pred)
    recall = same / len(gold)
    return 2 * precision * recall / (precision + recall)


def squad_em_f1(pred: str | None, golds: Sequence[str]) -> tuple[float, float]:
    """Exact match and token F1 of one prediction, maximized over gold answers.

    ``None`` or ``""`` is the null answer; an empty ``golds`` list is a
    null gold.
    """
    golds = [g for g in golds if _tokens(g)]
    pred_toks = _tokens(pred)
    if not golds:
        score = float(not pred_toks)
        return score, score
    em = max(float(normalize_answer(pred or "") == normalize_answer(g)) for g in golds)
    f1 = max(_f1(pred_toks, _tokens(g)) for g in golds)
    return em, f1


def _pair(preds, golds) -> tuple[np.ndarray, np.ndarray]:
    p, g = np.asarray(preds), np.asarray(golds)
    if p.shape != g.shape or p.ndim != 1:
        raise ShapeError(f"predictions {p.shape} and gold {g.shape} must be equal-length vectors")
    return p, g


def accuracy(preds, golds) -> float:
    p, g = _pair(preds, golds)
    return float((p == g).mean()) if p.size else 0.0


def f1_binary(preds, golds, positive=1) -> float:
    p, g = _pair(preds, golds)
    tp = int(((p == positive) & (g == positive)).sum())
    fp = int(((p == positive) & (g != positive)).sum())
    fn = int(((p != positive) & (g == positive)).sum())
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def matthews(preds, golds) -> float:
    """Matthews correlation (multi-class form); 0 whenever the denominator vanishes."""
    p, g = _pair(preds, golds)
    classes = np.union1d(p, g)
    conf = np.zeros((classes.size, classes.size))
    np.add.at(conf, (np.searchsorted(classes, g), np.searchsorted(classes, p)), 1)
    t = conf.sum(axis=1)
    pk = conf.sum(axis=0)
    c = np.trace(conf)
    s = conf.sum()
    cov_pg = c * s - t @ pk
    cov_pp = s * s - pk @ pk
    cov_gg = s * s - t @ t
    if cov_pp == 0 or cov_gg == 0:
        return 0.0
    return float(cov_pg / math.sqrt(cov_pp * cov_gg))


def pearson(preds, golds) -> float:
    p, g = _pair(np.asarray(preds, dtype=float), np.asarray(golds, dtype=float))
    if p.size < 2:
        raise DegenerateInputError("pearson needs at least two points")
    dp, dg = p - p.mean(), g - g.mean()
    sp, sg = math.sqrt(dp @ dp), math.sqrt(dg @ dg)
    if sp == 0 or sg == 0:
        raise DegenerateInputError("pearson is undefined for a zero-variance input")
    return float((dp @ dg) / (sp * sg))


METRICS = {"accuracy": accuracy, "f1_binary": f1_binary, "matthews": matthews, "pearson": pearson}


def metric(preds, golds, kind: str) -> float:
    try:
        fn = METRICS[kind]
    except KeyError:
        raise ValueError(f"unknown metric {kind!r}; choose from {sorted(METRICS)}") from None
    return fn(preds, golds)
