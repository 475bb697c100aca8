"""JSONL task datasets with inline, word-aligned SRL frames.

One JSON object per line::

    {"id": "...", "words_a": [...], "words_b": [...],      # words_b optional
     "srl_a": [{"pred": 2, "tags": [...]}], "srl_b": [...],
     "label": 1}                                            # class id or real
     "answers": [[start, end], ...]                         # span tasks; [] = no answer

Span answers are inclusive word indices into ``words_b`` (the passage).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import DatasetError, SemfuseError
from .srl import LabelVocab, SrlAnnotation, load_annotation

log = logging.getLogger(__name__)


@dataclass
class TaskExample:
    id: str
    words_a: list[str]
    srl_a: SrlAnnotation
    target: object
    words_b: list[str] | None = None
    srl_b: SrlAnnotation | None = None

    def answer_texts(self) -> list[str]:
        """Gold answer strings for span tasks; empty for an unanswerable question."""
        return [" ".join(self.words_b[s : e + 1]) for s, e in self.target]


def _words(raw, key: str, required: bool) -> list[str] | None:
    words = raw.get(key)
    if words is None:
        if required:
            raise ValueError(f"missing {key!r}")
        return None
    if not isinstance(words, list) or not words or not all(isinstance(w, str) and w and not w.isspace() for w in words):
        raise ValueError(f"{key!r} must be a non-empty list of non-blank strings")
    return words


def parse_example(raw: dict, task_kind: str, labels: LabelVocab, num_classes: int | None = None) -> TaskExample:
    if not isinstance(raw, dict):
        raise ValueError("each line must be a JSON object")
    ex_id = str(raw.get("id", ""))
    words_a = _words(raw, "words_a", True)
    words_b = _words(raw, "words_b", task_kind == "span")
    srl_a = load_annotation(raw.get("srl_a", []), len(words_a), labels)
    srl_b = load_annotation(raw.get("srl_b", []), len(words_b), labels) if words_b is not None else None
    if task_kind == "classification":
        target = raw.get("label")
        if not isinstance(target, int) or isinstance(target, bool) or target < 0:
            raise ValueError(f"classification label must be a non-negative integer, got {target!r}")
        if num_classes is not None and target >= num_classes:
            raise ValueError(f"label {target} outside [0, {num_classes})")
    elif task_kind == "regression":
        target = raw.get("label")
        if not isinstance(target, (int, float)) or isinstance(target, bool):
            raise ValueError(f"regression label must be a number, got {target!r}")
        target = float(target)
    else:
        answers = raw.get("answers")
        if not isinstance(answers, list):
            raise ValueError("span examples need an 'answers' list")
        target = []
        for ans in answers:
            if not (isinstance(ans, list) and len(ans) == 2 and all(isinstance(v, int) for v in ans)):
                raise ValueError(f"answer {ans!r} is not a [start, end] pair")
            s, e = ans
            if not 0 <= s <= e < len(words_b):
                raise ValueError(f"answer span {ans} outside passage of {len(words_b)} words")
            target.append((s, e))
    return TaskExample(ex_id, words_a, srl_a, target, words_b, srl_b)


def load_dataset(path, task_kind: str, labels: LabelVocab, num_classes: int | None = None) -> list[TaskExample]:
    """Parse and validate a whole file; on any bad line, report all of them and load nothing."""
    path = Path(path)
    examples, problems = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append((lineno, f"malformed JSON: {exc.msg} (column {exc.colno})"))
                continue
            try:
                examples.append(parse_example(raw, task_kind, labels, num_classes))
            except (ValueError, SemfuseError) as exc:
                problems.append((lineno, str(exc)))
    if problems:
        raise DatasetError(path, problems)
    if not examples:
        log.warning("%s contains no examples", path)
    return examples


def example_to_record(ex: TaskExample, labels: LabelVocab) -> dict:
    rec = {"id": ex.id, "words_a": ex.words_a, "srl_a": ex.srl_a.to_record(labels)}
    if ex.words_b is not None:
        rec["words_b"] = ex.words_b
        rec["srl_b"] = ex.srl_b.to_record(labels)
    if isinstance(ex.target, list):
        rec["answers"] = [list(a) for a in ex.target]
    else:
        rec["label"] = ex.target
    return rec


def parse_records(records, task_kind: str, labels: LabelVocab, num_classes: int | None = None) -> list[TaskExample]:
    return [parse_example(r, task_kind, labels, num_classes) for r in records]
