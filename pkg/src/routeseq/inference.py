"""Sequence generation from a trained model.

``greedy_decode`` picks the most probable unvisited zone at every step
(probability ties resolve to the smallest zone index).  ``generate_best_first``
re-runs greedy decoding once per forced first zone and keeps the rollout with
the lowest operational cost; by default the plain greedy rollout is included
as an extra candidate so the iterated result can never lose to it
(``strict_alg1`` drops that extra candidate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .kernel import LstmState, matmul, mlp_forward, softmax, stack_rows, transpose
from .predictor import (
    DecoderStepTrace,
    ModelParams,
    PreparedRoute,
    ScaledRoute,
    _asnn_pair_probs,
    _probs_by_zone,
    asnn_attention,
    decode_step,
    encode,
    pointer_attention,
    scale_route,
)
from .tsp import route_cost

GREEDY = "greedy"
BEST_FIRST = "best_first"


@dataclass(eq=False)
class PredictedSequence:
    zone_order: list                 # zone indices, visit order
    traces: list                     # DecoderStepTrace per step
    operational_cost: float          # depot -> zones -> depot, zone-level seconds
    mode: str                        # "greedy" | "best_first"


def operational_cost(zone_order, instance) -> float:
    nodes = [0] + [z + 1 for z in zone_order]
    return route_cost(nodes, instance.zone_travel_time, close_tour=True)


def _masked_argmax(scores, visited) -> int:
    best, best_z = None, -1
    for z in range(len(scores)):
        if z in visited:
            continue
        v = scores[z]
        if best is None or v > best:
            best, best_z = v, z
    return best_z


def _greedy_scaled(params: ModelParams, scaled: ScaledRoute,
                   forced_first: int | None, mode: str) -> PredictedSequence:
    cfg = params.config
    prep = scaled.prep
    n = prep.n_zones
    if forced_first is not None and not 0 <= forced_first < n:
        raise InvalidInputError(f"forced first zone {forced_first} not in this route")
    order: list[int] = []
    traces: list[DecoderStepTrace] = []
    visited: set[int] = set()
    prev: int | None = None

    if cfg.variant == "asnn":
        for i in range(n):
            p_zone = _asnn_pair_probs(params, scaled, prev)
            chosen = forced_first if (i == 0 and forced_first is not None) \
                else _masked_argmax(p_zone, visited)
            traces.append(DecoderStepTrace(i, p_zone.copy(), chosen, None, None))
            order.append(chosen)
            visited.add(chosen)
            prev = chosen
    else:
        enc = encode(params, scaled)
        enc_matrix = stack_rows(enc.outputs)
        state = LstmState(enc.h_final, enc.c_final)
        w_prev = np.zeros(cfg.hidden)
        for i in range(n):
            x_last = scaled.depot_s if prev is None else scaled.x_s[prev]
            state, d = decode_step(params, x_last, w_prev, state)
            if cfg.variant == "pairwise":
                probs = asnn_attention(params, scaled, prev, d, enc_matrix)
            elif cfg.variant == "pointer":
                probs = pointer_attention(params, scaled, prev, d, enc_matrix)
            else:
                probs = softmax(mlp_forward(d, params.fc))
            p_zone = _probs_by_zone(scaled, probs, cfg.kz)
            chosen = forced_first if (i == 0 and forced_first is not None) \
                else _masked_argmax(p_zone, visited)
            w_ctx = None
            if cfg.variant in ("pairwise", "pointer"):
                # Context keeps the full (unmasked) attention weights.
                w_prev = matmul(transpose(enc_matrix), probs)
                w_ctx = np.array(w_prev)
            traces.append(DecoderStepTrace(i, p_zone, chosen, w_ctx, np.array(d)))
            order.append(chosen)
            visited.add(chosen)
            prev = chosen
    return PredictedSequence(order, traces, operational_cost(order, prep.zinst), mode)


def greedy_decode(params: ModelParams, prep: PreparedRoute,
                  forced_first: int | None = None) -> PredictedSequence:
    """Greedy rollout; ``forced_first`` overrides the first pick and decoding
    resumes from it."""
    scaled = scale_route(prep, params.scaler, params.config.input_order_mode,
                         params.config.order_seed)
    return _greedy_scaled(params, scaled, forced_first, GREEDY)


def generate_best_first(params: ModelParams, prep: PreparedRoute,
                        strict_alg1: bool = False) -> PredictedSequence:
    """Iterate greedy rollouts over every first zone and keep the cheapest.

    Cost ties resolve to the smallest first-zone index.  Unless
    ``strict_alg1`` is set, the unforced greedy rollout competes too.
    """
    scaled = scale_route(prep, params.scaler, params.config.input_order_mode,
                         params.config.order_seed)
    candidates: list[PredictedSequence] = []
    if not strict_alg1:
        candidates.append(_greedy_scaled(params, scaled, None, BEST_FIRST))
    for z in range(prep.n_zones):
        candidates.append(_greedy_scaled(params, scaled, z, BEST_FIRST))
    best = min(candidates, key=lambda c: (c.operational_cost, c.zone_order[0]))
    return best
