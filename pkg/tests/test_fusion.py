import numpy as np
import pytest

from semfuse.errors import AlignmentError, ShapeError
from semfuse.fusion import (
    FusionParams,
    fuse,
    fuse_subword_ablation,
    init_fusion,
    subword_label_ids,
    subwords_to_words,
    subwords_to_words_reference,
)
from semfuse.numcore import Tensor, grad_check, make_rng, uniform_embedding


def T(x, grad=True):
    return Tensor(np.asarray(x, dtype=float), requires_grad=grad)


def test_single_pieces_identity_kernel_is_relu():
    enc = make_rng(0).normal(size=(4, 3))
    params = FusionParams(T(np.eye(3)), T(np.zeros(3)), 1)
    out = subwords_to_words(T(enc), [(0, 1), (1, 1), (2, 1), (3, 1)], params)
    np.testing.assert_array_equal(out.data, np.maximum(enc, 0))


def test_full_window_single_position():
    rng = make_rng(1)
    enc = rng.normal(size=(3, 2))
    params = init_fusion(rng, 2, 4, k=3)
    out = subwords_to_words(T(enc), [(0, 3)], params)
    expected = np.maximum(enc.reshape(-1) @ params.W.data + params.b.data, 0)
    np.testing.assert_allclose(out.data[0], expected)


def test_padded_window_hand_value():
    # word of 2 pieces, k=3, d_enc=d_w=1: one window [x1, x2, 0]
    enc = T([[9.0], [2.0], [-1.0], [9.0]])
    params = FusionParams(T([[0.5], [3.0], [7.0]]), T([0.25]), 3)
    out = subwords_to_words(enc, [(1, 2)], params)
    # 0.5*2 + 3*(-1) + 7*0 + 0.25 = -1.75 -> relu 0
    assert out.data.tolist() == [[0.0]]
    params.b.data[...] = 3.0
    # -2.0 + 3 = 1.0
    assert subwords_to_words(enc, [(1, 2)], params).data.tolist() == [[1.0]]


def test_locality():
    rng = make_rng(2)
    enc = rng.normal(size=(9, 4))
    spans = [(0, 1), (1, 3), (4, 2), (6, 3)]
    params = init_fusion(rng, 4, 5)
    base = subwords_to_words(T(enc), spans, params).data
    enc2 = enc.copy()
    enc2[4:6] += rng.normal(size=(2, 4))
    out = subwords_to_words(T(enc2), spans, params).data
    np.testing.assert_array_equal(out[[0, 1, 3]], base[[0, 1, 3]])
    assert not np.allclose(out[2], base[2])


def test_fast_path_equals_reference():
    rng = make_rng(3)
    enc = T(rng.normal(size=(12, 4)))
    spans = [(1, 1), (2, 4), (6, 2), (8, 3), (11, 1)]
    params = init_fusion(rng, 4, 6, k=3)
    np.testing.assert_allclose(
        subwords_to_words(enc, spans, params).data, subwords_to_words_reference(enc, spans, params).data, atol=1e-15
    )


def test_span_outside_encoder_rows():
    params = init_fusion(make_rng(0), 2, 2)
    with pytest.raises(AlignmentError):
        subwords_to_words(T(np.zeros((3, 2))), [(2, 2)], params)


def test_alignment_grad_check():
    rng = make_rng(4)
    enc = T(rng.normal(size=(8, 3)))
    params = init_fusion(rng, 3, 4, k=2)
    spans = [(0, 1), (1, 3), (4, 4)]
    w = Tensor(rng.normal(size=(3, 4)))
    rep = grad_check(lambda: (subwords_to_words(enc, spans, params) * w).sum(), [enc, params.W, params.b], samples_per_param=12)
    assert rep.max_rel_error < 1e-4


# fuse ------------------------------------------------------------------------


def test_fuse_concat_values():
    e_w = T([[1, 2], [3, 4]])
    e_t = T([[5], [6]])
    assert fuse(e_w, e_t).data.tolist() == [[1, 2, 5], [3, 4, 6]]


def test_fuse_zero_semantics_columns():
    e_w = T(make_rng(0).normal(size=(3, 4)))
    h = fuse(e_w, T(np.zeros((3, 2))))
    np.testing.assert_array_equal(h.data[:, :4], e_w.data)
    assert not h.data[:, 4:].any()


def test_fuse_disabled_semantics():
    e_w = T(np.ones((3, 4)))
    assert fuse(e_w, T(np.zeros((3, 0)))) is e_w
    assert fuse(e_w, None) is e_w


def test_fuse_row_mismatch():
    with pytest.raises(ShapeError):
        fuse(T(np.ones((3, 4))), T(np.ones((2, 1))))


def test_fuse_split_recovers_parts():
    rng = make_rng(5)
    e_w, e_t = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
    h = fuse(T(e_w), T(e_t)).data
    np.testing.assert_array_equal(h[:, :3], e_w)
    np.testing.assert_array_equal(h[:, 3:], e_t)


# subword-level ablation ------------------------------------------------------------


def test_ablation_copies_labels_to_pieces():
    rng = make_rng(6)
    table = uniform_embedding(rng, (6, 2))
    enc = T(rng.normal(size=(7, 3)))
    spans = [(1, 3), (4, 1), (5, 1)]
    frames = np.array([[2, 3, 4], [5, 0, 1]])
    out = fuse_subword_ablation(enc, frames, spans, table, outside_id=0)
    assert out.shape == (7, 3 + 2 * 2)
    suffix = out.data[:, 3:]
    np.testing.assert_array_equal(suffix[1], suffix[2])
    np.testing.assert_array_equal(suffix[1], suffix[3])
    np.testing.assert_array_equal(suffix[1], np.concatenate([table.data[2], table.data[5]]))
    # [CLS] and [SEP] rows get O embeddings
    np.testing.assert_array_equal(suffix[0], np.concatenate([table.data[0], table.data[0]]))
    np.testing.assert_array_equal(out.data[:, :3], enc.data)


def test_ablation_all_o_suffix_constant():
    rng = make_rng(7)
    table = uniform_embedding(rng, (6, 4))
    out = fuse_subword_ablation(T(rng.normal(size=(6, 2))), np.zeros((3, 2), int), [(1, 2), (3, 2)], table, 0)
    assert out.shape == (6, 2 + 12)
    assert np.all(out.data[:, 2:] == out.data[0, 2:])


def test_subword_label_ids_alignment_error():
    with pytest.raises(AlignmentError):
        subword_label_ids(np.zeros((2, 3), int), [(0, 1), (1, 1)], 4, 0)
