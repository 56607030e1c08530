"""LSTM cell, multilayer perceptron, and parameter initializers.

Everything here works on either plain ndarrays or autodiff ``Node`` inputs,
so the same forward code serves inference and gradient-based training.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import InvalidInputError, NumericError
from .autodiff import Node, add, matmul, mul, relu, sigmoid, tanh, transpose


@dataclass(eq=False)
class LstmState:
    """Hidden and cell state of one LSTM; equal lengths."""

    h: object
    c: object


@dataclass(eq=False)
class LstmCellParams:
    """Gate weights of a single-layer, one-directional LSTM cell.

    ``w_*`` map the input (hidden x input), ``u_*`` the previous hidden state
    (hidden x hidden), ``b_*`` are gate biases (hidden,).
    """

    w_f: object
    w_i: object
    w_o: object
    w_c: object
    u_f: object
    u_i: object
    u_o: object
    u_c: object
    b_f: object
    b_i: object
    b_o: object
    b_c: object


@dataclass(eq=False)
class MlpLayer:
    w: object  # (out, in)
    b: object  # (out,)


@dataclass(eq=False)
class MlpParams:
    """Affine layers with rectified-linear hidden activations, identity output."""

    layers: list


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_lstm(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmCellParams:
    """Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)); zero biases."""
    def w():
        return uniform_init(rng, (hidden_dim, input_dim), input_dim)

    def u():
        return uniform_init(rng, (hidden_dim, hidden_dim), hidden_dim)

    def b():
        return np.zeros(hidden_dim)

    return LstmCellParams(w(), w(), w(), w(), u(), u(), u(), u(), b(), b(), b(), b())


def init_mlp(dims, rng: np.random.Generator) -> MlpParams:
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        layers.append(MlpLayer(uniform_init(rng, (d_out, d_in), d_in), np.zeros(d_out)))
    return MlpParams(layers)


def zero_state(hidden_dim: int) -> LstmState:
    return LstmState(np.zeros(hidden_dim), np.zeros(hidden_dim))


def lstm_cell(x, state: LstmState, params: LstmCellParams):
    """One LSTM step: returns (new state, output vector).

    Gates f, i, o are logistic; the candidate cell value is tanh; the output
    equals the new hidden state (single layer, one direction).
    """
    xv = x.value if isinstance(x, Node) else np.asarray(x)
    if not np.all(np.isfinite(xv)):
        raise NumericError("lstm_cell received a non-finite input vector")
    p = params
    h, c = state.h, state.c
    f = sigmoid(add(add(matmul(p.w_f, x), matmul(p.u_f, h)), p.b_f))
    i = sigmoid(add(add(matmul(p.w_i, x), matmul(p.u_i, h)), p.b_i))
    o = sigmoid(add(add(matmul(p.w_o, x), matmul(p.u_o, h)), p.b_o))
    c_tilde = tanh(add(add(matmul(p.w_c, x), matmul(p.u_c, h)), p.b_c))
    c_new = add(mul(f, c), mul(i, c_tilde))
    h_new = mul(o, tanh(c_new))
    return LstmState(h_new, c_new), h_new


def mlp_forward(x, params: MlpParams):
    """Apply the MLP to a vector (d,) or a batch of rows (m, d)."""
    xv = x.value if isinstance(x, Node) else np.asarray(x)
    first_w = params.layers[0].w
    in_dim = (first_w.value if isinstance(first_w, Node) else first_w).shape[1]
    if xv.shape[-1] != in_dim:
        raise InvalidInputError(
            f"mlp_forward input width {xv.shape[-1]} does not match first layer ({in_dim})"
        )
    out = x
    last = len(params.layers) - 1
    for k, layer in enumerate(params.layers):
        if xv.ndim == 1:
            out = add(matmul(layer.w, out), layer.b)
        else:
            out = add(matmul(out, transpose(layer.w)), layer.b)
        if k != last:
            out = relu(out)
    return out


def _leaves(obj, prefix, out):
    if isinstance(obj, (np.ndarray, Node)):
        out[prefix] = obj
    elif isinstance(obj, MlpParams):
        for k, layer in enumerate(obj.layers):
            _leaves(layer.w, f"{prefix}.{k}.w", out)
            _leaves(layer.b, f"{prefix}.{k}.b", out)
    elif hasattr(obj, "__dataclass_fields__"):
        for f in fields(obj):
            _leaves(getattr(obj, f.name), f"{prefix}.{f.name}", out)
    elif obj is None:
        pass
    else:  # pragma: no cover - guards against silent omissions
        raise TypeError(f"cannot collect tensors from {type(obj)} at {prefix}")


def named_tensors(obj, prefix: str) -> dict:
    """Flatten a parameter container into {name: tensor} for the optimizer,
    checkpointing, and finite-difference checks."""
    out: dict = {}
    _leaves(obj, prefix, out)
    return out


def map_tensors(obj, fn):
    """Rebuild a parameter container with ``fn`` applied to each leaf tensor."""
    if isinstance(obj, (np.ndarray, Node)):
        return fn(obj)
    if isinstance(obj, MlpParams):
        return MlpParams([MlpLayer(fn(l.w), fn(l.b)) for l in obj.layers])
    if obj is None:
        return None
    if hasattr(obj, "__dataclass_fields__"):
        return type(obj)(*(map_tensors(getattr(obj, f.name), fn) for f in fields(obj)))
    raise TypeError(f"cannot map over {type(obj)}")
