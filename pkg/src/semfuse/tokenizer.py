"""Greedy longest-match-first wordpiece tokenization with word spans."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import EmptySentenceError, VocabError

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
CONTINUATION = "##"
MAX_PIECES_PER_WORD = 32


class Vocab:
    """Dense token inventory; line number in the vocab file is the id."""

    def __init__(self, entries: Sequence[str]):
        entries = list(entries)
        if not entries or entries[0] != PAD:
            raise VocabError(f"vocab entry 0 must be {PAD}")
        index: dict[str, int] = {}
        for i, tok in enumerate(entries):
            if tok in index:
                raise VocabError(f"duplicate vocab entry {tok!r} at lines {index[tok]} and {i}")
            index[tok] = i
        for special in (UNK, CLS, SEP):
            if special not in index:
                raise VocabError(f"vocab lacks reserved token {special}")
        self.entries = entries
        self.index = index

    @classmethod
    def from_file(cls, path) -> "Vocab":
        text = Path(path).read_text(encoding="utf-8")
        return cls([line.rstrip("\r") for line in text.split("\n") if line.rstrip("\r")])

    def to_file(self, path) -> None:
        Path(path).write_text("\n".join(self.entries) + "\n", encoding="utf-8")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index[token]

    def token(self, idx: int) -> str:
        return self.entries[idx]

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]


@dataclass
class TokenizedSentence:
    """A sentence as words, subword ids and per-word ``(start, length)`` spans.

    ``subwords`` includes the leading [CLS] and trailing [SEP]; spans index
    into it and never cover those positions.
    """

    words: list[str]
    subwords: list[int]
    spans: list[tuple[int, int]]
    special_positions: list[int] = field(default_factory=list)

    @property
    def n_words(self) -> int:
        return len(self.words)

    def word_pieces(self, vocab: Vocab, i: int) -> list[str]:
        start, length = self.spans[i]
        return [vocab.token(t) for t in self.subwords[start : start + length]]


def wordpiece(word: str, vocab: Vocab) -> list[int]:
    """Segment one word; returns ``[UNK]`` alone when no full segmentation exists."""
    pieces: list[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end] if start == 0 else CONTINUATION + word[start:end]
            if piece in vocab.index:
                match = vocab.index[piece]
                break
            end -= 1
        if match is None or len(pieces) == MAX_PIECES_PER_WORD:
            return [vocab.unk_id]
        pieces.append(match)
        start = end
    return pieces


def _words(text: str | Sequence[str], lowercase: bool) -> list[str]:
    words = text.split() if isinstance(text, str) else list(text)
    return [w.lower() for w in words] if lowercase else words


def tokenize(text: str | Sequence[str], vocab: Vocab, lowercase: bool = True) -> TokenizedSentence:
    """Tokenize whitespace-separated words into ``[CLS] pieces... [SEP]``."""
    words = _words(text, lowercase)
    if not words:
        raise EmptySentenceError("cannot tokenize an empty sentence")
    subwords = [vocab.cls_id]
    spans = []
    for word in words:
        pieces = wordpiece(word, vocab)
        spans.append((len(subwords), len(pieces)))
        subwords.extend(pieces)
    subwords.append(vocab.sep_id)
    return TokenizedSentence(words, subwords, spans, [0, len(subwords) - 1])


def detokenize_word(pieces: Sequence[str]) -> str:
    return "".join(p[len(CONTINUATION) :] if p.startswith(CONTINUATION) else p for p in pieces)


@dataclass
class EncodedInput:
    """Model-ready ids for one (possibly paired) input.

    ``spans_a``/``spans_b`` locate the words that survived truncation inside
    ``ids``; a word cut by truncation keeps its surviving pieces.
    """

    ids: list[int]
    segment_ids: list[int]
    attention_mask: list[int]
    spans_a: list[tuple[int, int]]
    spans_b: list[tuple[int, int]] | None
    sep_positions: list[int]

    @property
    def length(self) -> int:
        return sum(self.attention_mask)


def _body(sent: TokenizedSentence) -> list[int]:
    return sent.subwords[1:-1]


def _truncate_spans(spans: list[tuple[int, int]], keep: int) -> list[tuple[int, int]]:
    """Shift spans to start at 0 and clip them to the first ``keep`` body pieces."""
    out = []
    for start, length in spans:
        start -= 1
        if start >= keep:
            break
        out.append((start, min(length, keep - start)))
    return out


def encode_pair(
    a: TokenizedSentence, b: TokenizedSentence | None, max_len: int, vocab: Vocab
) -> EncodedInput:
    """Build ``[CLS] a [SEP] (b [SEP])`` padded to ``max_len``.

    Overflow is removed one piece at a time from the end of whichever
    segment is currently longer (the first segment on ties).
    """
    if max_len < 3 + (b is not None):
        raise ValueError(f"max_len {max_len} too small for the special tokens")
    body_a = _body(a)
    body_b = _body(b) if b is not None else []
    budget = max_len - (3 if b is not None else 2)
    keep_a, keep_b = len(body_a), len(body_b)
    while keep_a + keep_b > budget:
        if keep_a >= keep_b:
            keep_a -= 1
        else:
            keep_b -= 1

    ids = [vocab.cls_id] + body_a[:keep_a] + [vocab.sep_id]
    spans_a = [(s + 1, n) for s, n in _truncate_spans(a.spans, keep_a)]
    segments = [0] * len(ids)
    sep_positions = [len(ids) - 1]
    spans_b = None
    if b is not None:
        offset = len(ids)
        spans_b = [(s + offset, n) for s, n in _truncate_spans(b.spans, keep_b)]
        ids += body_b[:keep_b] + [vocab.sep_id]
        segments += [1] * (keep_b + 1)
        sep_positions.append(len(ids) - 1)
    real = len(ids)
    pad = max_len - real
    return EncodedInput(
        ids + [vocab.pad_id] * pad,
        segments + [0] * pad,
        [1] * real + [0] * pad,
        spans_a,
        spans_b,
        sep_positions,
    )
