"""Deterministic generators for the bundled fixtures and synthetic test sets.

Every sentence is built from a closed word list whose wordpiece
segmentation is covered by :func:`fixture_vocab_entries`, and its SRL frames
are produced alongside the words, so no external labeler is needed.
"""
from __future__ import annotations

import string

import numpy as np

from .numcore import make_rng

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
DORM_PIECES = ["rec", "##ons", "##tructing", "dorm", "##itor", "##ies", "will", "not", "be",
               "approved", "by", "ca", "##vana", "##ugh"]  # fmt: skip
DORM_WORDS = "reconstructing dormitories will not be approved by cavanaugh".split()
DORM_FRAMES = [
    {"pred": 5, "tags": ["B-ARG1", "I-ARG1", "B-ARGM-MOD", "B-ARGM-NEG", "O", "V", "B-ARG0", "I-ARG0"]},
    {"pred": 0, "tags": ["V", "B-ARG1", "O", "O", "O", "O", "O", "O"]},
]

NOUNS = ["cat", "dog", "bird", "teacher", "student", "farmer", "doctor", "child", "horse", "baker",
         "sailor", "painter", "king", "queen", "fox", "owl"]  # fmt: skip
OBJECTS = ["ball", "book", "letter", "house", "garden", "song", "story", "apple", "boat", "cake",
           "door", "window", "key", "map", "lamp", "coat"]  # fmt: skip
VERBS = ["chased", "saw", "found", "painted", "helped", "visited", "wrote", "built", "carried",
         "opened", "watched", "kicked", "liked", "took", "moved", "cleaned"]  # fmt: skip
TIMES = ["today", "yesterday", "quickly", "slowly"]
PLACES = ["park", "city", "market", "school"]
FILLER = ["the", "a", "and", "in", "near", "at", "with", "who", "what", "did", "where", "when", "was"]

_SPLIT = {
    "teacher": ["teach", "##er"], "farmer": ["farm", "##er"], "painter": ["paint", "##er"],
    "baker": ["bake", "##r"], "sailor": ["sail", "##or"], "painted": ["paint", "##ed"],
    "helped": ["help", "##ed"], "visited": ["visit", "##ed"], "watched": ["watch", "##ed"],
    "opened": ["open", "##ed"], "kicked": ["kick", "##ed"], "cleaned": ["clean", "##ed"],
    "quickly": ["quick", "##ly"], "slowly": ["slow", "##ly"], "yesterday": ["yester", "##day"],
}  # fmt: skip


def fixture_vocab_entries() -> list[str]:
    entries = list(SPECIALS) + list(DORM_PIECES)
    for word in NOUNS + OBJECTS + VERBS + TIMES + PLACES + FILLER:
        entries += _SPLIT.get(word, [word])
    entries += list(string.ascii_lowercase) + ["##" + c for c in string.ascii_lowercase]
    entries += list(string.digits) + list(".,?!'")
    seen, out = set(), []
    for e in entries:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return out


def _span(tags: list[str], start: int, length: int, role: str) -> None:
    tags[start] = f"B-{role}"
    for i in range(start + 1, start + length):
        tags[i] = f"I-{role}"


def _clause(rng, agent=None, theme=None, verb=None):
    agent = agent or str(rng.choice(NOUNS))
    theme = theme or str(rng.choice(OBJECTS))
    verb = verb or str(rng.choice(VERBS))
    return agent, verb, theme


def _clause_frame(offset: int, total: int, tmp_at: int | None = None) -> dict:
    tags = ["O"] * total
    _span(tags, offset, 2, "ARG0")
    tags[offset + 2] = "V"
    _span(tags, offset + 3, 2, "ARG1")
    if tmp_at is not None:
        _span(tags, tmp_at, 1, "ARGM-TMP")
    return {"pred": offset + 2, "tags": tags}


def nli_examples(n: int, seed: int) -> list[dict]:
    """Premise/hypothesis pairs labeled 0=entailment, 1=neutral, 2=contradiction.

    Contradictions swap agent and theme, so only role structure separates
    them from entailments.
    """
    rng = make_rng(seed)
    out = []
    for idx in range(n):
        label = idx % 3
        agent, verb, theme = _clause(rng, theme=str(rng.choice(NOUNS)))
        while theme == agent:
            theme = str(rng.choice(NOUNS))
        time = str(rng.choice(TIMES))
        premise = ["the", agent, verb, "the", theme, time]
        srl_p = [_clause_frame(0, 6, tmp_at=5)]
        if rng.random() < 0.5:
            a2, v2, t2 = _clause(rng)
            premise += ["and", "the", a2, v2, "the", t2]
            srl_p = [_clause_frame(0, 12, tmp_at=5), _clause_frame(7, 12)]
        if label == 0:
            hyp = ["the", agent, verb, "the", theme]
        elif label == 1:
            other = str(rng.choice([x for x in NOUNS if x not in (agent, theme)]))
            hyp = ["the", agent, verb, "the", other]
        else:
            hyp = ["the", theme, verb, "the", agent]
        out.append(
            {"id": f"nli-{seed}-{idx}", "words_a": premise, "words_b": hyp,
             "srl_a": srl_p, "srl_b": [_clause_frame(0, 5)], "label": label}  # fmt: skip
        )
    return out


def _random_frame(rng: np.random.Generator, n: int, role: str) -> dict:
    """A frame with one verb and one ``role`` argument placed at random."""
    tags = ["O"] * n
    pred = int(rng.integers(n))
    tags[pred] = "V"
    free = [i for i in range(n) if i != pred]
    start = int(rng.choice(free))
    length = 1
    if start + 1 < n and start + 1 != pred and rng.random() < 0.5:
        length = 2
    _span(tags, start, length, role)
    extra = [i for i in range(n) if tags[i] == "O"]
    if extra and rng.random() < 0.5:
        _span(tags, int(rng.choice(extra)), 1, str(rng.choice(["ARGM-TMP", "ARGM-LOC"])))
    return {"pred": pred, "tags": tags}


def role_signal_examples(n_texts: int, seed: int, prefix: str = "sig") -> list[dict]:
    """Single sentences whose class depends only on their SRL frames.

    Each random word sequence appears twice: once with an ``ARG0`` argument
    (class 0) and once with an ``ARG1`` argument (class 1). A model blind to
    the frames sees identical inputs for both classes.
    """
    rng = make_rng(seed)
    pool = NOUNS + OBJECTS + VERBS + TIMES + PLACES
    out = []
    for t in range(n_texts):
        n = int(rng.integers(4, 8))
        words = [str(w) for w in rng.choice(pool, size=n)]
        for label, role in ((0, "ARG0"), (1, "ARG1")):
            frames = [_random_frame(rng, n, role)]
            out.append({"id": f"{prefix}-{seed}-{t}-{label}", "words_a": words, "srl_a": frames, "label": label})
    return out


def span_examples(n: int, seed: int) -> list[dict]:
    """Question/passage pairs; answers are word spans of the passage, a third unanswerable."""
    rng = make_rng(seed)
    out = []
    for idx in range(n):
        agent, verb, theme = _clause(rng)
        place = str(rng.choice(PLACES))
        passage = ["the", agent, verb, "the", theme, "in", "the", place]
        p_tags = ["O"] * 8
        _span(p_tags, 0, 2, "ARG0")
        p_tags[2] = "V"
        _span(p_tags, 3, 2, "ARG1")
        _span(p_tags, 5, 3, "ARGM-LOC")
        kind = idx % 3
        if kind == 0:
            question = ["who", verb, "the", theme]
            q_tags = ["B-ARG0", "V", "B-ARG1", "I-ARG1"]
            answers = [[0, 1]]
        elif kind == 1:
            question = ["where", "did", "the", agent, verb]
            q_tags = ["B-ARGM-LOC", "O", "B-ARG0", "I-ARG0", "V"]
            answers = [[5, 7]]
        else:
            other = str(rng.choice([v for v in VERBS if v != verb]))
            question = ["who", other, "the", theme]
            q_tags = ["B-ARG0", "V", "B-ARG1", "I-ARG1"]
            answers = []
        out.append(
            {"id": f"span-{seed}-{idx}", "words_a": question, "words_b": passage,
             "srl_a": [{"pred": q_tags.index("V"), "tags": q_tags}],
             "srl_b": [{"pred": 2, "tags": p_tags}], "answers": answers}  # fmt: skip
        )
    return out


def regression_examples(n: int, seed: int) -> list[dict]:
    """Sentence pairs scored 0..5 by how many clause slots they share."""
    rng = make_rng(seed)
    out = []
    for idx in range(n):
        a = _clause(rng)
        b = tuple(a[i] if rng.random() < 0.5 else _clause(rng)[i] for i in range(3))
        shared = sum(x == y for x, y in zip(a, b))
        words_a = ["the", a[0], a[1], "the", a[2]]
        words_b = ["the", b[0], b[1], "the", b[2]]
        out.append(
            {"id": f"sts-{seed}-{idx}", "words_a": words_a, "words_b": words_b,
             "srl_a": [_clause_frame(0, 5)], "srl_b": [_clause_frame(0, 5)], "label": 5.0 * shared / 3}  # fmt: skip
        )
    return out
