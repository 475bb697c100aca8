import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import BWD, FWD, gru_from_scalars, scalar_gru
from semfuse.errors import LabelIndexError, PreconditionError, ShapeError
from semfuse.numcore import (
    Adam,
    BiGRUParams,
    Tensor,
    _make,
    bigru_forward,
    conv1d_valid,
    cross_entropy,
    embedding_lookup,
    gelu,
    grad_check,
    gru_scan,
    init_bigru,
    layer_norm,
    linear,
    make_rng,
    masked_softmax,
    mse_loss,
    relu_maxpool,
    warmup_linear,
    xavier_uniform,
    uniform_embedding,
)


def T(x, grad=True):
    return Tensor(np.asarray(x, dtype=float), requires_grad=grad)


finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


# linear ------------------------------------------------------------------


def test_linear_identity():
    out = linear(T([[1, 2]]), T([[1, 0], [0, 1]]), T([0, 0]))
    assert out.data.tolist() == [[1, 2]]


def test_linear_zero_input_passes_bias():
    out = linear(T([[0, 0]]), T([[7, -1], [2, 9]]), T([3, 4]))
    assert out.data.tolist() == [[3, 4]]


def test_linear_hand_matmul():
    out = linear(T([[1, 1]]), T([[2, 3], [4, 5]]), T([1, 1]))
    assert out.data.tolist() == [[7, 9]]


def test_linear_shape_error_names_shapes():
    with pytest.raises(ShapeError, match=r"\(1, 3\).*\(2, 2\)"):
        linear(T([[1, 2, 3]]), T(np.eye(2)), T([0, 0]))


def test_linear_grad_check():
    rng = make_rng(3)
    x = T(rng.normal(size=(4, 3)))
    W, b = T(rng.normal(size=(3, 2))), T(rng.normal(size=2))
    rep = grad_check(lambda: (linear(x, W, b) * linear(x, W, b)).sum(), [x, W, b], samples_per_param=20)
    assert rep.max_rel_error < 1e-6


# conv1d ------------------------------------------------------------------


def test_conv_k1_identity():
    seq = make_rng(0).normal(size=(4, 3))
    out = conv1d_valid(T(seq), T(np.eye(3)), T(np.zeros(3)), 1)
    np.testing.assert_array_equal(out.data, seq)


def test_conv_full_window_single_row():
    out = conv1d_valid(T(np.ones((3, 2))), T(np.ones((6, 4))), T(np.zeros(4)), 3)
    assert out.shape == (1, 4)


def test_conv_sliding_sum():
    out = conv1d_valid(T([[1], [2], [3]]), T([[1], [1]]), T([0]), 2)
    assert out.data.tolist() == [[3], [5]]


def test_conv_short_sequence_is_caller_error():
    with pytest.raises(PreconditionError):
        conv1d_valid(T([[1.0]]), T([[1], [1]]), T([0]), 2)


# relu_maxpool ------------------------------------------------------------


@pytest.mark.parametrize(
    "seq, expected",
    [([[-1, -2]], [0, 0]), ([[1, 2]], [1, 2]), ([[1, 5], [3, 2]], [3, 5])],
)
def test_relu_maxpool_values(seq, expected):
    assert relu_maxpool(T(seq)).data.tolist() == expected


def test_relu_maxpool_tie_routes_to_first():
    x = T([[2.0], [2.0], [1.0]])
    relu_maxpool(x).sum().backward()
    assert x.grad.ravel().tolist() == [1.0, 0.0, 0.0]


def test_relu_maxpool_empty():
    with pytest.raises(PreconditionError):
        relu_maxpool(T(np.zeros((0, 3))))


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=finite), st.randoms())
def test_relu_maxpool_permutation_invariant(seq, rnd):
    perm = list(range(seq.shape[0]))
    rnd.shuffle(perm)
    np.testing.assert_array_equal(relu_maxpool(T(seq)).data, relu_maxpool(T(seq[perm])).data)


# embedding ---------------------------------------------------------------


def test_embedding_rows():
    table = T([[1.0], [2.0]])
    assert embedding_lookup(table, [0]).data.tolist() == [[1.0]]
    assert embedding_lookup(table, [1, 0]).data.tolist() == [[2.0], [1.0]]


def test_embedding_repeated_index_accumulates():
    table = T(np.arange(6.0).reshape(3, 2))
    out = embedding_lookup(table, [2, 2])
    (out * T([[1.0, 2.0], [10.0, 20.0]], grad=False)).sum().backward()
    assert table.grad.tolist() == [[0, 0], [0, 0], [11, 22]]


def test_embedding_out_of_range_names_id():
    with pytest.raises(LabelIndexError, match="5.*3"):
        embedding_lookup(T(np.zeros((3, 2))), [5])


# GRU ---------------------------------------------------------------------


def test_gru_matches_scalar_oracle():
    xs = [0.7, -1.2]
    out = gru_scan(T([[x] for x in xs]), gru_from_scalars(FWD))
    np.testing.assert_allclose(out.data.ravel(), scalar_gru(xs, FWD), rtol=0, atol=1e-15)


def test_bigru_matches_scalar_oracle():
    xs = [0.7, -1.2, 0.25]
    out = bigru_forward(T([[x] for x in xs]), BiGRUParams(gru_from_scalars(FWD), gru_from_scalars(BWD)))
    assert out.shape == (3, 2)
    np.testing.assert_allclose(out.data[:, 0], scalar_gru(xs, FWD), atol=1e-15)
    np.testing.assert_allclose(out.data[:, 1], scalar_gru(xs, BWD, reverse=True), atol=1e-15)


def test_bigru_length_one_both_directions_see_input():
    p = init_bigru(make_rng(1), 3, 4)
    x = make_rng(2).normal(size=(1, 3))
    out = bigru_forward(T(x), p)
    assert out.shape == (1, 8)
    np.testing.assert_allclose(out.data[0, :4], gru_scan(T(x), p.forward).data[0])
    np.testing.assert_allclose(out.data[0, 4:], gru_scan(T(x), p.backward).data[0])


def test_bigru_zero_params_zero_output():
    p = init_bigru(make_rng(1), 3, 4)
    for t in p.tensors():
        t.data[...] = 0.0
    out = bigru_forward(T(make_rng(0).normal(size=(5, 3))), p)
    assert not out.data.any()


def test_bigru_grad_check():
    p = init_bigru(make_rng(4), 3, 2)
    x = T(make_rng(5).normal(size=(4, 3)))
    rep = grad_check(lambda: (bigru_forward(x, p) ** 2).sum(), [x] + p.tensors(), samples_per_param=10)
    assert rep.max_rel_error < 1e-6


# losses ------------------------------------------------------------------


def test_cross_entropy_uniform():
    assert cross_entropy(T([[0.0, 0.0]]), [0]).item() == pytest.approx(math.log(2), abs=1e-15)


def test_cross_entropy_closed_form():
    expected = math.log(math.e + math.e**2 + math.e**3) - 3
    assert cross_entropy(T([[1.0, 2.0, 3.0]]), [2]).item() == pytest.approx(expected, abs=1e-14)


def test_cross_entropy_stable_for_large_logits():
    assert cross_entropy(T([[1000.0, 0.0]]), [0]).item() == pytest.approx(0.0, abs=1e-300)


def test_cross_entropy_bad_target():
    with pytest.raises(LabelIndexError):
        cross_entropy(T([[0.0, 1.0]]), [2])


def test_mse_zero_at_target():
    assert mse_loss(T([1.5, -2.0]), [1.5, -2.0]).item() == 0.0


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 5)), elements=finite), st.data())
def test_cross_entropy_nonnegative(logits, data):
    targets = [data.draw(st.integers(0, logits.shape[1] - 1)) for _ in range(logits.shape[0])]
    assert cross_entropy(T(logits), targets).item() >= 0.0


tenths = st.integers(-50, 50).map(lambda v: v / 10)


@given(arrays(np.float64, st.integers(1, 6), elements=tenths), arrays(np.float64, st.integers(1, 6), elements=tenths))
def test_mse_nonnegative_zero_iff_equal(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    value = mse_loss(T(a), b).item()
    assert value >= 0.0
    assert (value == 0.0) == bool(np.all(a == b))


def test_loss_grad_checks():
    rng = make_rng(8)
    logits = T(rng.normal(size=(3, 4)))
    mask = np.array([True, False, True, True])
    rep = grad_check(lambda: cross_entropy(logits, [0, 2, 3], mask), [logits], samples_per_param=12)
    assert rep.max_rel_error < 1e-7
    pred = T(rng.normal(size=5))
    target = np.linspace(-1, 1, 5)
    rep = grad_check(lambda: mse_loss(pred, target), [pred])
    assert rep.max_rel_error < 1e-7


# other primitives ---------------------------------------------------------


def test_gelu_layer_norm_softmax_grad_check():
    rng = make_rng(9)
    x = T(rng.normal(size=(3, 6)))
    g, b = T(rng.normal(size=6)), T(rng.normal(size=6))
    mask = np.array([[1, 1, 0, 1, 1, 0]], dtype=bool)
    w = T(rng.normal(size=(3, 6)), grad=False)
    f = lambda: (masked_softmax(layer_norm(gelu(x), g, b), mask) * w).sum()
    assert grad_check(f, [x, g, b], samples_per_param=18).max_rel_error < 1e-6


def test_masked_softmax_zero_on_masked():
    out = masked_softmax(T([[1.0, 2.0, 3.0]]), np.array([[True, False, True]]))
    assert out.data[0, 1] == 0.0
    assert out.data.sum() == pytest.approx(1.0, abs=1e-15)


# grad_check itself ---------------------------------------------------------


def test_grad_check_square():
    theta = T([3.0])
    rep = grad_check(lambda: (theta * theta).sum(), [theta])
    assert rep.max_rel_error < 1e-8


def test_grad_check_rejects_non_scalar():
    theta = T([3.0, 1.0])
    with pytest.raises(PreconditionError):
        grad_check(lambda: theta * theta, [theta])


def test_grad_check_skips_relu_kink():
    x = T([[0.0, 1.0]])
    rep = grad_check(lambda: relu_maxpool(x).sum(), [x])
    assert rep.skipped == 1
    assert rep.checked == 1


def test_grad_check_detects_wrong_gradient():
    x = T([1.0, 2.0])

    def bad():
        # claims a derivative of 1 where the true value is 3
        return _make(np.asarray((x.data * 3.0).sum()), (x,), lambda g: (np.full_like(x.data, g),))

    assert grad_check(bad, [x]).max_rel_error > 0.4


# init / optimizer -------------------------------------------------------------


def test_rng_reproducible():
    assert make_rng(42).random(5).tolist() == make_rng(42).random(5).tolist()


def test_xavier_bounds_and_embedding_bounds():
    w = xavier_uniform(make_rng(0), (20, 30))
    assert np.abs(w.data).max() <= math.sqrt(6 / 50)
    e = uniform_embedding(make_rng(0), (50, 4))
    assert np.abs(e.data).max() <= 0.05


def test_warmup_linear_schedule():
    assert warmup_linear(0, 100, 0.1) == pytest.approx(0.1)
    assert warmup_linear(9, 100, 0.1) == pytest.approx(1.0)
    assert warmup_linear(55, 100, 0.1) == pytest.approx(0.5)
    assert warmup_linear(100, 100, 0.1) == 0.0


def test_adam_minimizes_quadratic():
    x = T([5.0, -3.0])
    opt = Adam([x], lr=0.1)
    for _ in range(500):
        opt.zero_grad()
        ((x - 1.0) ** 2).sum().backward()
        opt.step()
    np.testing.assert_allclose(x.data, [1.0, 1.0], atol=1e-3)


def test_backward_values_finite_and_grad_shapes_match():
    rng = make_rng(1)
    W = T(rng.normal(size=(4, 3)))
    x = T(rng.normal(size=(2, 4)))
    out = cross_entropy(linear(x, W, T(np.zeros(3))), [0, 1])
    out.backward()
    assert W.grad.shape == W.shape and np.isfinite(W.grad).all()
    assert x.grad.shape == x.shape
