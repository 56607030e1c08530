import math

import numpy as np
import pytest

from oracles import finite_difference, grad_close, lstm_ref, mlp_ref
from routeseq.errors import InvalidInputError, NumericError, SchemaError
from routeseq.kernel import (
    LstmState,
    MlpLayer,
    MlpParams,
    Tape,
    adam_init,
    adam_step,
    cross_entropy,
    deserialize_checkpoint,
    init_lstm,
    init_mlp,
    load_checkpoint,
    lstm_cell,
    map_tensors,
    mlp_forward,
    named_tensors,
    save_checkpoint,
    serialize_checkpoint,
    softmax,
    zero_state,
)


def _zero_lstm(input_dim, hidden):
    p = init_lstm(input_dim, hidden, np.random.default_rng(0))
    return map_tensors(p, lambda t: np.zeros_like(t))


# --- lstm_cell ---------------------------------------------------------------

def test_lstm_zero_everything():
    p = _zero_lstm(3, 4)
    state, e = lstm_cell(np.zeros(3), zero_state(4), p)
    assert np.all(e == 0.0)
    assert np.all(state.c == 0.0)


def test_lstm_saturation_matches_reference():
    # large weights force the gates to saturate; compare against the formulas
    rng = np.random.default_rng(5)
    p = init_lstm(2, 3, rng)
    p.w_f += 100.0
    p.b_i -= 50.0
    x = rng.normal(size=2)
    h0, c0 = rng.normal(size=3), rng.normal(size=3) + 5.0
    state, e = lstm_cell(x, LstmState(h0.copy(), c0.copy()), p)
    h_ref, c_ref = lstm_ref(x, h0, c0, p)
    assert np.allclose(e, h_ref, atol=1e-14)
    assert np.allclose(state.c, c_ref, atol=1e-14)


def test_lstm_output_bounded(rng):
    p = init_lstm(4, 6, rng)
    state = LstmState(rng.normal(size=6), rng.normal(size=6) * 10)
    _, e = lstm_cell(rng.normal(size=4), state, p)
    assert np.all(np.abs(e) <= 1.0)


def test_lstm_rejects_non_finite():
    p = _zero_lstm(2, 2)
    with pytest.raises(NumericError):
        lstm_cell(np.array([np.nan, 0.0]), zero_state(2), p)


def test_lstm_gradients_every_parameter(rng):
    # d ||h'||^2 / d theta for every single component
    p = init_lstm(3, 4, rng)
    x = rng.normal(size=3)
    h0, c0 = rng.normal(size=4), rng.normal(size=4)

    def loss_fn():
        state, e = lstm_cell(x, LstmState(h0, c0), p)
        return float(np.sum(np.asarray(e) ** 2))

    tape = Tape()
    wrapped = map_tensors(p, tape.leaf)
    state, e = lstm_cell(x, LstmState(h0, c0), wrapped)
    from routeseq.kernel import matmul
    loss = matmul(e, e)
    tape.backward(loss)
    grads = {n: t.grad for n, t in named_tensors(wrapped, "p").items()}
    for name, arr in named_tensors(p, "p").items():
        g = grads[name]
        for idx in range(arr.size):
            fd = finite_difference(loss_fn, arr, idx)
            assert grad_close(fd, g.ravel()[idx]), f"{name}[{idx}]: fd={fd} an={g.ravel()[idx]}"


# --- mlp ---------------------------------------------------------------------

def test_mlp_zero_weights_returns_bias():
    p = MlpParams([MlpLayer(np.zeros((3, 2)), np.array([1.0, 2.0, 3.0]))])
    assert np.allclose(mlp_forward(np.array([5.0, 6.0]), p), [1.0, 2.0, 3.0])


def test_mlp_identity_layer():
    p = MlpParams([MlpLayer(np.eye(4), np.zeros(4))])
    x = np.array([1.0, -2.0, 3.0, -4.0])
    assert np.allclose(mlp_forward(x, p), x)


def test_mlp_matches_reference(rng):
    p = init_mlp((2, 128, 128, 1), rng)
    x = rng.normal(size=2)
    got = mlp_forward(x, p)
    ref = mlp_ref(x, [(l.w, l.b) for l in p.layers])
    assert np.allclose(got, ref, atol=1e-12)


def test_mlp_batched_matches_vector(rng):
    p = init_mlp((5, 7, 1), rng)
    xs = rng.normal(size=(4, 5))
    batched = mlp_forward(xs, p)
    rows = np.stack([mlp_forward(x, p) for x in xs])
    assert np.allclose(batched, rows, atol=1e-14)


def test_mlp_width_mismatch():
    p = init_mlp((3, 2), np.random.default_rng(0))
    with pytest.raises(InvalidInputError):
        mlp_forward(np.zeros(4), p)


# --- softmax / cross entropy ---------------------------------------------------

def test_softmax_symmetric_pair():
    assert np.allclose(softmax(np.zeros(2)), [0.5, 0.5])


def test_softmax_closed_form():
    p = softmax(np.log(np.array([1.0, 3.0])))
    assert p[0] == pytest.approx(0.25, abs=1e-15)
    assert p[1] == pytest.approx(0.75, abs=1e-15)


def test_softmax_shift_invariance(rng):
    u = rng.normal(size=7)
    assert np.allclose(softmax(u), softmax(u + 123.45), atol=1e-12)


def test_softmax_sums_to_one_positive(rng):
    for _ in range(20):
        u = rng.normal(size=int(rng.integers(1, 12))) * 50
        p = softmax(u)
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.all(p > 0)


def test_softmax_rejects_empty():
    with pytest.raises(InvalidInputError):
        softmax(np.zeros(0))


def test_cross_entropy_uniform():
    p = np.full(5, 0.2)
    assert cross_entropy(p, 3) == pytest.approx(math.log(5), abs=1e-12)


def test_cross_entropy_certain():
    p = np.zeros(4)
    p[1] = 1.0
    assert cross_entropy(p, 1) == 0.0


def test_cross_entropy_clamp():
    p = np.array([1.0 - 1e-15, 1e-15])
    assert cross_entropy(p, 1) == pytest.approx(-math.log(1e-12), rel=1e-12)


def test_cross_entropy_validation():
    with pytest.raises(InvalidInputError):
        cross_entropy(np.array([0.9, 0.2]), 0)  # does not sum to 1
    with pytest.raises(InvalidInputError):
        cross_entropy(np.array([0.5, 0.5]), 2)  # target out of range


def test_softmax_cross_entropy_gradient(rng):
    u = rng.normal(size=6)

    def loss_fn():
        return float(cross_entropy(softmax(u), 2))

    tape = Tape()
    un = tape.leaf(u)
    loss = cross_entropy(softmax(un), 2)
    tape.backward(loss)
    for idx in range(6):
        fd = finite_difference(loss_fn, u, idx)
        assert grad_close(fd, un.grad[idx])


# --- adam ----------------------------------------------------------------------

def test_adam_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.0, -2.0])}
    state = adam_init(params)
    before = params["w"].copy()
    adam_step(params, {"w": np.zeros(2)}, state)
    assert np.all(params["w"] == before)


def test_adam_single_step_hand_value():
    # one step with g = 1: bias-corrected ratio is 1, so the move is -lr
    params = {"w": np.array([0.5])}
    state = adam_init(params, lr=0.001)
    adam_step(params, {"w": np.array([1.0])}, state)
    delta = params["w"][0] - 0.5
    assert delta == pytest.approx(-0.001, rel=1e-6)


def test_adam_monotone_shrink():
    params = {"w": np.array([1.0])}
    state = adam_init(params, lr=0.01)
    v0 = params["w"][0]
    adam_step(params, {"w": np.array([1.0])}, state)
    v1 = params["w"][0]
    adam_step(params, {"w": np.array([1.0])}, state)
    v2 = params["w"][0]
    assert v2 < v1 < v0


def test_adam_rejects_nan_without_touching():
    params = {"w": np.array([1.0]), "b": np.array([2.0])}
    state = adam_init(params)
    with pytest.raises(NumericError):
        adam_step(params, {"w": np.array([np.nan]), "b": np.array([0.0])}, state)
    assert params["w"][0] == 1.0 and params["b"][0] == 2.0
    assert state.step == 0


# --- checkpoints -----------------------------------------------------------------

def test_checkpoint_roundtrip_bit_exact(tmp_path, rng):
    tensors = {
        "a.w": rng.normal(size=(3, 4)),
        "a.b": rng.normal(size=4) * 1e-300,  # denormal-scale values survive too
        "c": np.array(math.pi),
    }
    meta = {"variant": "pairwise", "note": 7}
    path = tmp_path / "ck.json"
    save_checkpoint(path, tensors, meta)
    loaded, meta2 = load_checkpoint(path)
    assert meta2 == meta
    for name, arr in tensors.items():
        assert loaded[name].shape == np.asarray(arr).shape
        assert np.array_equal(loaded[name], arr)
        assert loaded[name].dtype == np.float64


def test_checkpoint_serialization_deterministic(rng):
    tensors = {"w": rng.normal(size=(2, 2))}
    assert serialize_checkpoint(tensors, {"x": 1}) == serialize_checkpoint(tensors, {"x": 1})


def test_checkpoint_rejects_garbage():
    with pytest.raises(SchemaError):
        deserialize_checkpoint(b"not json")
    with pytest.raises(SchemaError):
        deserialize_checkpoint(b'{"format": "other"}')
