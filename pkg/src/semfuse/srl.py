"""Semantic role label inventory, annotation ingestion, constrained decoding
and label-noise injection."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DecodeError, PreconditionError, StructureError, VocabError

OUTSIDE = "O"
VERB = "V"

_CORE = ["ARG0", "ARG1", "ARG2", "ARG3", "ARG4", "ARG5", "ARGA"]
_ADJUNCTS = [
    "ADJ", "ADV", "CAU", "COM", "DIR", "DIS", "DSP", "EXT", "GOL", "LOC",
    "LVB", "MNR", "MOD", "NEG", "PNC", "PRD", "PRP", "PRR", "REC", "TMP",
]  # fmt: skip
_REFERENT = ["R-ARG0", "R-ARG1", "R-ARG2", "R-ARG3", "R-ARG4"] + [
    f"R-ARGM-{r}" for r in ("ADV", "CAU", "EXT", "LOC", "MNR", "PRP", "TMP")
]
_CONTINUATION = ["C-ARG0", "C-ARG1", "C-ARG2", "C-ARG3", "C-ARG4"] + [
    f"C-ARGM-{r}" for r in ("ADV", "LOC", "MNR", "TMP")
]
DEFAULT_LABEL_COUNT = 104


def default_roles() -> list[str]:
    roles = _CORE + [f"ARGM-{r}" for r in _ADJUNCTS] + _REFERENT + _CONTINUATION
    n_roles = (DEFAULT_LABEL_COUNT - 2) // 2
    roles += [f"ARGX{i}" for i in range(1, n_roles - len(roles) + 1)]
    return roles


def split_label(label: str) -> tuple[str | None, str]:
    """``"B-ARG0" -> ("B", "ARG0")``; labels without a BIO prefix get ``None``."""
    if len(label) > 2 and label[1] == "-" and label[0] in "BI":
        return label[0], label[2:]
    return None, label


class LabelVocab:
    def __init__(self, labels: Sequence[str]):
        labels = list(labels)
        self.labels = labels
        self.index = {lab: i for i, lab in enumerate(labels)}
        if len(self.index) != len(labels):
            raise VocabError("duplicate entries in label vocabulary")
        if OUTSIDE not in self.index:
            raise VocabError(f"label vocabulary lacks {OUTSIDE!r}")
        self._allowed: np.ndarray | None = None

    @classmethod
    def default(cls) -> "LabelVocab":
        roles = default_roles()
        labels = [OUTSIDE, VERB]
        for r in roles:
            labels += [f"B-{r}", f"I-{r}"]
        return cls(labels)

    @classmethod
    def from_file(cls, path) -> "LabelVocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln.strip() for ln in lines if ln.strip()])

    @classmethod
    def fixture(cls) -> "LabelVocab":
        return cls.from_file(resources.files("semfuse") / "fixtures" / "labels.txt")

    def __len__(self) -> int:
        return len(self.labels)

    def id(self, label: str) -> int:
        try:
            return self.index[label]
        except KeyError:
            raise VocabError(f"unknown SRL label {label!r}") from None

    @property
    def outside_id(self) -> int:
        return self.index[OUTSIDE]

    def transitions(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean ``(start_allowed[cur], allowed[prev, cur])`` BIO masks."""
        if self._allowed is None:
            size = len(self.labels)
            start = np.ones(size, dtype=bool)
            allowed = np.ones((size, size), dtype=bool)
            parsed = [split_label(lab) for lab in self.labels]
            for cur, (tag, role) in enumerate(parsed):
                if tag != "I":
                    continue
                start[cur] = False
                for prev, (ptag, prole) in enumerate(parsed):
                    allowed[prev, cur] = ptag in ("B", "I") and prole == role
            self._allowed = (start, allowed)
        return self._allowed


def bio_violation(labels: Sequence[int], vocab: LabelVocab) -> int | None:
    """Position of the first illegal ``I-X``, or ``None`` if the sequence is valid."""
    start, allowed = vocab.transitions()
    for pos, cur in enumerate(labels):
        ok = start[cur] if pos == 0 else allowed[labels[pos - 1], cur]
        if not ok:
            return pos
    return None


@dataclass
class SrlFrame:
    """One predicate's word-aligned label ids. Padding frames have no predicate."""

    predicate_word_index: int | None
    labels: list[int]

    def tags(self, vocab: LabelVocab) -> list[str]:
        return [vocab.labels[i] for i in self.labels]


@dataclass
class SrlAnnotation:
    frames: list[SrlFrame] = field(default_factory=list)

    def to_record(self, vocab: LabelVocab) -> list[dict]:
        return [{"pred": f.predicate_word_index, "tags": f.tags(vocab)} for f in self.frames]


def viterbi_decode(scores, vocab: LabelVocab) -> list[int]:
    """Highest-scoring label path whose ``I-X`` tags all continue an ``X`` span.

    Transitions carry no score; they are either allowed or forbidden.
    """
    scores = np.asarray(getattr(scores, "data", scores), dtype=np.float64)
    n, size = scores.shape
    if size != len(vocab):
        raise PreconditionError(f"score width {size} does not match {len(vocab)} labels")
    start, allowed = vocab.transitions()
    penalty = np.where(allowed, 0.0, -np.inf)
    trellis = np.where(start, scores[0], -np.inf)
    back = np.zeros((n, size), dtype=np.int64)
    for t in range(1, n):
        cand = trellis[:, None] + penalty
        back[t] = cand.argmax(axis=0)
        trellis = cand[back[t], np.arange(size)] + scores[t]
    if not np.isfinite(trellis.max()):
        raise DecodeError("no BIO-legal label path exists for this vocabulary")
    path = [int(trellis.argmax())]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    return path[::-1]


def load_annotation(frames: Sequence[dict], n_words: int, vocab: LabelVocab) -> SrlAnnotation:
    """Validate raw ``{"pred": int, "tags": [str]}`` frames against a sentence."""
    parsed = []
    for fi, raw in enumerate(frames):
        try:
            pred, tags = int(raw["pred"]), list(raw["tags"])
        except (KeyError, TypeError, ValueError):
            raise StructureError(f"frame {fi}: expected an object with 'pred' and 'tags'") from None
        if len(tags) != n_words:
            raise AlignmentError(f"frame {fi}: {len(tags)} tags for a sentence of {n_words} words")
        if not 0 <= pred < n_words:
            raise AlignmentError(f"frame {fi}: predicate index {pred} outside sentence of {n_words} words")
        ids = []
        for pos, tag in enumerate(tags):
            if tag not in vocab.index:
                raise VocabError(f"frame {fi}: unknown SRL label {tag!r} at position {pos}")
            ids.append(vocab.index[tag])
        bad = bio_violation(ids, vocab)
        if bad is not None:
            raise StructureError(f"frame {fi}: {tags[bad]!r} at position {bad} does not continue a span")
        verbs = [pos for pos, tag in enumerate(tags) if tag == VERB]
        if verbs != [pred]:
            raise StructureError(f"frame {fi}: predicate at {pred} but {VERB!r} found at positions {verbs}")
        parsed.append(SrlFrame(pred, ids))
    parsed.sort(key=lambda f: f.predicate_word_index)
    for prev, cur in zip(parsed, parsed[1:]):
        if prev.predicate_word_index == cur.predicate_word_index:
            raise StructureError(f"two frames share predicate index {cur.predicate_word_index}")
    return SrlAnnotation(parsed)


def inject_noise(ann: SrlAnnotation, p: float, rng: np.random.Generator, vocab: LabelVocab) -> SrlAnnotation:
    """Replace each label, with probability ``p``, by a uniformly drawn different label.

    The result is deliberately not re-validated for BIO structure.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise fraction {p} outside [0, 1]")
    size = len(vocab)
    out = []
    for frame in ann.frames:
        labels = np.asarray(frame.labels, dtype=np.int64)
        hit = rng.random(labels.size) < p
        shift = rng.integers(1, size, size=labels.size)
        noisy = np.where(hit, (labels + shift) % size, labels)
        out.append(SrlFrame(frame.predicate_word_index, noisy.tolist()))
    return SrlAnnotation(out)


def select_frames(ann: SrlAnnotation, m: int, n_words: int, vocab: LabelVocab) -> list[SrlFrame]:
    """Exactly ``m`` frames: the first ``m`` by predicate order, padded with all-O frames."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    kept = sorted(ann.frames, key=lambda f: f.predicate_word_index)[:m]
    for f in kept:
        if len(f.labels) != n_words:
            raise AlignmentError(f"frame has {len(f.labels)} labels for {n_words} words")
    pad = [SrlFrame(None, [vocab.outside_id] * n_words) for _ in range(m - len(kept))]
    return kept + pad
