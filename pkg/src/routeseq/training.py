"""Dataset splitting and the per-route stochastic training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, TrainingDivergedError
from .kernel import (
    Tape,
    adam_init,
    adam_step,
    checkpoint_id,
    clip_gradients,
    serialize_checkpoint,
)
from .predictor import (
    ModelConfig,
    ModelParams,
    checkpoint_tensors,
    fit_scaler,
    forward_logprob,
    gradients,
    init_model,
    model_meta,
    model_tensors,
    prepare_route,
    scale_route,
    wrap_params,
)


@dataclass
class TrainConfig:
    variant: str = "pairwise"
    epochs: int = 30
    lr: float = 0.001
    seed: int = 0
    input_order: str = "tsp"        # encoder reading order: tsp | random
    fractions: tuple = (0.8, 0.2)
    hidden: int = 32
    asnn_hidden: tuple = (128, 128)
    att_dim: int = 32
    grad_clip: float | None = None  # joint L2 norm cap; None disables
    checkpoint_path: str | None = None


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)  # mean per-route NLL
    wall_time_s: float = 0.0
    checkpoint_id: str = ""
    n_routes: int = 0
    variant: str = ""

    def to_dict(self):
        return {
            "epoch_losses": self.epoch_losses,
            "wall_time_s": self.wall_time_s,
            "checkpoint_id": self.checkpoint_id,
            "n_routes": self.n_routes,
            "variant": self.variant,
        }


def split_dataset(routes, fractions=(0.8, 0.2), seed: int = 0):
    """Seed-deterministic disjoint exhaustive shuffle split."""
    n = len(routes)
    if n < 2:
        raise InvalidInputError("need at least 2 routes to split")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidInputError("split fractions must sum to 1")
    n_train = int(round(fractions[0] * n))
    if n_train <= 0 or n_train >= n:
        raise InvalidInputError(f"fractions {fractions} produce an empty split for {n} routes")
    perm = np.random.default_rng(seed).permutation(n)
    train = [routes[i] for i in perm[:n_train]]
    test = [routes[i] for i in perm[n_train:]]
    return train, test


def train(routes, config: TrainConfig):
    """Train one model variant; returns (ModelParams, TrainReport).

    One Adam step per route, routes reshuffled every epoch, all randomness
    drawn from the config seed, so identical configs produce bit-identical
    checkpoints.
    """
    if config.epochs < 1:
        raise InvalidInputError("epochs must be >= 1")
    if not routes:
        raise InvalidInputError("training set is empty")
    t0 = time.perf_counter()
    preps = [prepare_route(r) for r in routes]
    model_cfg = ModelConfig(
        variant=config.variant,
        n_features=preps[0].x.shape[1],
        pair_dim=preps[0].pair.shape[2],
        hidden=config.hidden,
        asnn_hidden=tuple(config.asnn_hidden),
        att_dim=config.att_dim,
        kz=max(p.n_zones for p in preps) if config.variant == "lstm_ed" else None,
        input_order_mode=config.input_order,
        order_seed=config.seed,
    )
    rng = np.random.default_rng(config.seed)
    params = init_model(model_cfg, rng)
    params.scaler = fit_scaler(preps)
    scaled = [scale_route(p, params.scaler, config.input_order, config.seed) for p in preps]

    named = model_tensors(params)
    opt = adam_init(named, lr=config.lr)
    epoch_losses = []
    for epoch in range(config.epochs):
        total = 0.0
        for idx in rng.permutation(len(scaled)):
            sc = scaled[idx]
            tape = Tape()
            wrapped = wrap_params(params, tape)
            loss, _ = forward_logprob(wrapped, sc)
            value = float(loss.value)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1} on route "
                    f"{sc.prep.route.route_id!r}"
                )
            tape.backward(loss)
            grads = gradients(params, wrapped)
            if config.grad_clip is not None:
                grads = clip_gradients(grads, config.grad_clip)
            adam_step(named, grads, opt)
            total += value
        epoch_losses.append(total / len(scaled))

    raw = serialize_checkpoint(checkpoint_tensors(params), model_meta(params))
    cid = checkpoint_id(raw)
    if config.checkpoint_path:
        with open(config.checkpoint_path, "wb") as fh:
            fh.write(raw)
    report = TrainReport(
        epoch_losses=epoch_losses,
        wall_time_s=time.perf_counter() - t0,
        checkpoint_id=cid,
        n_routes=len(routes),
        variant=config.variant,
    )
    return params, report
