import pytest
from hypothesis import given
from hypothesis import strategies as st

from semfuse.errors import EmptySentenceError, VocabError
from semfuse.model import load_vocabs
from semfuse.config import RunConfig
from semfuse.tokenizer import (
    MAX_PIECES_PER_WORD,
    Vocab,
    detokenize_word,
    encode_pair,
    tokenize,
    wordpiece,
)

DORM = "reconstructing dormitories will not be approved by cavanaugh"
DORM_PIECES = ["rec", "##ons", "##tructing", "dorm", "##itor", "##ies", "will", "not", "be", "approved", "by", "ca", "##vana", "##ugh"]


@pytest.fixture(scope="module")
def vocab():
    return load_vocabs(RunConfig())[0]


def small_vocab(*extra):
    return Vocab(["[PAD]", "[UNK]", "[CLS]", "[SEP]", *extra])


def test_dorm_sentence_subwords(vocab):
    sent = tokenize(DORM, vocab)
    pieces = [vocab.token(t) for t in sent.subwords]
    assert pieces == ["[CLS]"] + DORM_PIECES + ["[SEP]"]
    assert sent.spans == [(1, 3), (4, 3), (7, 1), (8, 1), (9, 1), (10, 1), (11, 1), (12, 3)]
    assert sent.special_positions == [0, 15]


def test_dorm_sentence_is_lowercased(vocab):
    assert tokenize(DORM.title(), vocab).subwords == tokenize(DORM, vocab).subwords


def test_whole_word_in_vocab_is_single_piece():
    v = small_vocab("cat", "c", "##at")
    sent = tokenize("cat", v)
    assert sent.spans == [(1, 1)]
    assert sent.word_pieces(v, 0) == ["cat"]


def test_unsegmentable_word_is_unk():
    v = small_vocab("ab", "##c")
    sent = tokenize("xyz abd", v)
    assert sent.word_pieces(v, 0) == ["[UNK]"]
    # a partial match is not a segmentation either
    assert sent.word_pieces(v, 1) == ["[UNK]"]


def test_greedy_longest_match():
    v = small_vocab("un", "una", "##ble", "##able")
    assert [v.token(t) for t in wordpiece("unable", v)] == ["una", "##ble"]


def test_piece_cap():
    v = small_vocab("a", "##a")
    assert len(wordpiece("a" * MAX_PIECES_PER_WORD, v)) == MAX_PIECES_PER_WORD
    assert wordpiece("a" * (MAX_PIECES_PER_WORD + 1), v) == [v.unk_id]


def test_empty_text():
    with pytest.raises(EmptySentenceError):
        tokenize("   ", small_vocab())


def test_vocab_requires_pad_first_and_reserved():
    with pytest.raises(VocabError):
        Vocab(["[UNK]", "[PAD]", "[CLS]", "[SEP]"])
    with pytest.raises(VocabError):
        Vocab(["[PAD]", "[UNK]", "[CLS]"])


def test_vocab_file_round_trip(tmp_path, vocab):
    path = tmp_path / "v.txt"
    vocab.to_file(path)
    assert Vocab.from_file(path).entries == vocab.entries


words = st.lists(st.text("abcdeilmnorstuvy", min_size=1, max_size=12), min_size=1, max_size=8)


@given(words)
def test_spans_partition_and_detokenize(vocab_words):
    vocab = load_vocabs(RunConfig())[0]
    sent = tokenize(vocab_words, vocab)
    covered = []
    for start, length in sent.spans:
        assert length >= 1
        covered += range(start, start + length)
    assert covered == list(range(1, len(sent.subwords) - 1))
    for i, w in enumerate(sent.words):
        pieces = sent.word_pieces(vocab, i)
        if "[UNK]" not in pieces:
            assert detokenize_word(pieces) == w
    assert tokenize(vocab_words, vocab) == sent


# encode_pair ---------------------------------------------------------------


def test_encode_single_padding():
    v = small_vocab("a", "b", "c")
    enc = encode_pair(tokenize("a b c", v), None, 8, v)
    assert enc.ids == [2, 4, 5, 6, 3, 0, 0, 0]
    assert enc.attention_mask == [1] * 5 + [0] * 3
    assert enc.segment_ids == [0] * 8
    assert enc.length == 5


def test_encode_exact_fit_no_padding():
    v = small_vocab("a", "b")
    enc = encode_pair(tokenize("a", v), tokenize("b", v), 5, v)
    assert enc.attention_mask == [1] * 5
    assert enc.segment_ids == [0, 0, 0, 1, 1]
    assert enc.sep_positions == [2, 4]
    assert enc.spans_b == [(3, 1)]


def test_encode_truncates_longer_segment_first():
    v = small_vocab("a", "b")
    a = tokenize("a a", v)
    b = tokenize("b b b b b", v)
    enc = encode_pair(a, b, 7, v)
    # 4 body slots: the 5-piece b is cut to 2 before a (2 pieces) is touched
    assert enc.ids == [2, 4, 4, 3, 5, 5, 3]
    assert enc.spans_a == [(1, 1), (2, 1)]
    assert enc.spans_b == [(4, 1), (5, 1)]


def test_encode_truncation_alternates_on_ties():
    v = small_vocab("a", "b")
    enc = encode_pair(tokenize("a a a", v), tokenize("b b b", v), 7, v)
    assert enc.ids == [2, 4, 4, 3, 5, 5, 3]
