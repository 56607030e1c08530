"""Minimal differentiable numerical kernel: autodiff tape, LSTM cell, MLP,
softmax/cross-entropy, Adam, and bit-exact checkpoints."""

from .autodiff import (
    Node,
    Tape,
    add,
    concat,
    cross_entropy,
    hstack,
    matmul,
    mul,
    nsum,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    stack_rows,
    sub,
    tanh,
    tile_rows,
    transpose,
)
from .checkpoint import (
    CHECKPOINT_FORMAT,
    checkpoint_id,
    deserialize_checkpoint,
    load_checkpoint,
    save_checkpoint,
    serialize_checkpoint,
)
from .layers import (
    LstmCellParams,
    LstmState,
    MlpLayer,
    MlpParams,
    init_lstm,
    init_mlp,
    lstm_cell,
    map_tensors,
    mlp_forward,
    named_tensors,
    uniform_init,
    zero_state,
)
from .optim import AdamState, adam_init, adam_step, clip_gradients

__all__ = [
    "Node", "Tape", "add", "concat", "cross_entropy", "hstack", "matmul", "mul",
    "nsum", "relu", "reshape", "scale", "sigmoid", "softmax", "stack_rows", "sub",
    "tanh", "tile_rows", "transpose",
    "CHECKPOINT_FORMAT", "checkpoint_id", "deserialize_checkpoint",
    "load_checkpoint", "save_checkpoint", "serialize_checkpoint",
    "LstmCellParams", "LstmState", "MlpLayer", "MlpParams", "init_lstm",
    "init_mlp", "lstm_cell", "map_tensors", "mlp_forward", "named_tensors",
    "uniform_init", "zero_state",
    "AdamState", "adam_init", "adam_step", "clip_gradients",
]
