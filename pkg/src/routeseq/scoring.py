"""Disparity scoring of predicted against executed sequences.

Stop sequences are compared with the combined score

    R = SD * ERP_norm / ERP_e        (0 when ERP_e = 0, i.e. exact match)

where SD is the adjacency-based sequence deviation, ERP_norm the Edited
Distance with Real Penalty under row-normalized travel times, and ERP_e the
number of costly edit operations along one optimal alignment.  The depot is
the ERP gap element.  Stop sequences are travel-time matrix indices
(1..n, depot = 0).  Zone-level first-k accuracy is positional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import completion, inference
from .domain import RouteInstance
from .errors import InvalidInputError
from .predictor import ModelParams, prepare_route

_MATCH, _DELETE, _INSERT = 0, 1, 2  # ERP tie-break preference order


def _check_permutation_pair(actual, predicted):
    if len(actual) != len(predicted) or len(set(actual)) != len(actual) \
            or set(actual) != set(predicted):
        raise InvalidInputError("predicted sequence must be a permutation of the actual one")


def sequence_deviation(actual, predicted) -> float:
    """SD(A, B) = 2/(n(n-1)) * sum_i (|pos_A(B_i) - pos_A(B_{i-1})| - 1).

    Zero iff consecutive predicted stops are consecutive in the actual
    order; a single-element sequence scores 0 by convention.
    """
    _check_permutation_pair(actual, predicted)
    n = len(actual)
    if n < 2:
        return 0.0
    pos = {stop: i for i, stop in enumerate(actual)}
    total = 0
    for a, b in zip(predicted[:-1], predicted[1:]):
        total += abs(pos[b] - pos[a]) - 1
    return (2 * total) / (n * (n - 1))


def _time_norm(travel_time: np.ndarray, stops) -> "callable":
    cols = list(stops)
    sums = {}

    def tn(a: int, b: int) -> float:
        if a not in sums:
            sums[a] = float(np.sum(travel_time[a, cols]))
        denom = sums[a]
        if denom <= 0.0:
            return 0.0  # all-zero row: guard the division
        return float(travel_time[a, b]) / denom

    return tn


def erp(actual, predicted, travel_time) -> tuple:
    """(ERP_norm, ERP_e) between two stop sequences.

    Three-branch dynamic program over match / delete / insert with the depot
    (matrix index 0) as the gap element; substitution costs Time_norm(a, b),
    a deleted actual stop costs Time_norm(a, depot), an inserted predicted
    stop costs Time_norm(depot, b).  Row normalization is over the route's
    stop set.  ERP_e counts the operations with nonzero cost along one
    optimal alignment, ties resolved match > delete > insert.
    """
    a = list(actual)
    b = list(predicted)
    tt = np.asarray(travel_time, dtype=float)
    tn = _time_norm(tt, sorted(set(a) | set(b)))
    la, lb = len(a), len(b)
    del_cost = [tn(a[i], 0) for i in range(la)]
    ins_cost = [tn(0, b[j]) for j in range(lb)]
    cost = np.zeros((la + 1, lb + 1))
    op = np.full((la + 1, lb + 1), -1, dtype=int)
    for i in range(la - 1, -1, -1):
        cost[i, lb] = cost[i + 1, lb] + del_cost[i]
        op[i, lb] = _DELETE
    for j in range(lb - 1, -1, -1):
        cost[la, j] = cost[la, j + 1] + ins_cost[j]
        op[la, j] = _INSERT
    for i in range(la - 1, -1, -1):
        for j in range(lb - 1, -1, -1):
            options = (
                (cost[i + 1, j + 1] + tn(a[i], b[j]), _MATCH),
                (cost[i + 1, j] + del_cost[i], _DELETE),
                (cost[i, j + 1] + ins_cost[j], _INSERT),
            )
            best, which = options[0]
            for c, o in options[1:]:
                if c < best:
                    best, which = c, o
            cost[i, j] = best
            op[i, j] = which
    edits = 0
    i = j = 0
    while i < la or j < lb:
        which = op[i, j]
        if which == _MATCH:
            if tn(a[i], b[j]) > 0.0:
                edits += 1
            i += 1
            j += 1
        elif which == _DELETE:
            if del_cost[i] > 0.0:
                edits += 1
            i += 1
        else:
            if ins_cost[j] > 0.0:
                edits += 1
            j += 1
    return float(cost[0, 0]), edits


def disparity(actual, predicted, travel_time) -> float:
    """R = SD * ERP_norm / ERP_e; zero when no costly edit exists."""
    sd = sequence_deviation(actual, predicted)
    erp_norm, erp_e = erp(actual, predicted, travel_time)
    if erp_e == 0:
        return 0.0
    return sd * erp_norm / erp_e


def first_k_accuracy(actual, predicted, k: int = 4) -> tuple:
    """Positional hit flags for the first k elements."""
    if k > len(actual) or k > len(predicted):
        raise InvalidInputError(f"k={k} exceeds the sequence length")
    return tuple(1 if actual[i] == predicted[i] else 0 for i in range(k))


@dataclass
class RouteScore:
    route_id: str
    r: float
    sd: float
    erp_norm: float
    erp_e: int
    first_k: tuple
    n_zones: int
    n_stops: int

    def to_dict(self):
        return {
            "route_id": self.route_id,
            "disparity": self.r,
            "sd": self.sd,
            "erp_norm": self.erp_norm,
            "erp_e": self.erp_e,
            "first_k_hits": list(self.first_k),
            "n_zones": self.n_zones,
            "n_stops": self.n_stops,
        }


@dataclass(eq=False)
class DisparityReport:
    rows: list
    mean_r: float
    std_r: float
    median_r: float
    accuracy: tuple      # mean positional accuracy for k = 1..4
    failures: list       # (route_id, error message), excluded from aggregates

    def to_dict(self):
        return {
            "mean_disparity": self.mean_r,
            "std_disparity": self.std_r,
            "median_disparity": self.median_r,
            "first_k_accuracy": list(self.accuracy),
            "n_routes": len(self.rows),
            "n_failures": len(self.failures),
            "failures": [{"route_id": rid, "error": msg} for rid, msg in self.failures],
            "routes": [row.to_dict() for row in self.rows],
        }


def aggregate(rows, failures, k: int = 4) -> DisparityReport:
    if not rows:
        raise InvalidInputError("no routes were scored")
    rs = np.array([row.r for row in rows])
    acc = []
    for i in range(k):
        hits = [row.first_k[i] for row in rows if len(row.first_k) > i]
        acc.append(float(np.mean(hits)) if hits else 0.0)
    return DisparityReport(rows, float(rs.mean()), float(rs.std()),
                           float(np.median(rs)), tuple(acc), failures)


def _zone_order_of_stops(prep, stop_indices):
    zone_of_stop = {}
    for zi, zone in enumerate(prep.zinst.zones):
        for s in zone.member_stops:
            zone_of_stop[s] = zi
    seen, order = set(), []
    for s in stop_indices:
        z = zone_of_stop[s]
        if z not in seen:
            seen.add(z)
            order.append(z)
    return order


def score_route(route: RouteInstance, prep, zone_order=None, stop_indices=None,
                k: int = 4) -> RouteScore:
    """Score one route given a predicted zone order, a full stop order, or
    both.  Zone orders are expanded to stops before stop-level scoring."""
    if stop_indices is None:
        if zone_order is None:
            raise InvalidInputError("need a zone order or a stop sequence to score")
        stop_indices = completion.complete_sequence(zone_order, prep.zinst, route)
    if zone_order is None:
        zone_order = _zone_order_of_stops(prep, stop_indices)
    actual = [s + 1 for s in route.actual_stop_sequence]
    predicted = [s + 1 for s in stop_indices]
    sd = sequence_deviation(actual, predicted)
    erp_norm, erp_e = erp(actual, predicted, route.travel_time)
    r = 0.0 if erp_e == 0 else sd * erp_norm / erp_e
    k_eff = min(k, len(prep.targets), len(zone_order))
    hits = first_k_accuracy(list(prep.targets), list(zone_order), k_eff)
    return RouteScore(route.route_id, r, sd, erp_norm, erp_e, hits,
                      prep.n_zones, route.n_stops)


def evaluate_testset(routes, params: ModelParams | None = None, sequences: dict | None = None,
                     mode: str = inference.BEST_FIRST, strict_alg1: bool = False,
                     k: int = 4) -> DisparityReport:
    """Predict (or take given sequences), expand to stops, score, aggregate.

    ``sequences`` maps route_id to {"zone_sequence": [zone ids]} and/or
    {"stop_sequence": [stop ids]}.  Routes that fail to predict or score are
    excluded and surfaced in the report's ``failures``.
    """
    if not routes:
        raise InvalidInputError("routes must be non-empty")
    if params is None and sequences is None:
        raise InvalidInputError("need a model or fixed sequences")
    rows, failures = [], []
    for route in routes:
        try:
            prep = prepare_route(route)
            zone_order = stop_indices = None
            if sequences is not None:
                entry = sequences.get(route.route_id)
                if entry is None:
                    raise InvalidInputError("no prediction for this route")
                if entry.get("stop_sequence") is not None:
                    by_id = {s.stop_id: i for i, s in enumerate(route.stops)}
                    stop_indices = [by_id[sid] for sid in entry["stop_sequence"]]
                if entry.get("zone_sequence") is not None:
                    zone_order = [prep.zinst.zone_index(zid) for zid in entry["zone_sequence"]]
            else:
                if mode == inference.GREEDY:
                    pred = inference.greedy_decode(params, prep)
                elif mode == inference.BEST_FIRST:
                    pred = inference.generate_best_first(params, prep, strict_alg1)
                else:
                    raise InvalidInputError(f"unknown generation mode {mode!r}")
                zone_order = pred.zone_order
            rows.append(score_route(route, prep, zone_order, stop_indices, k))
        except Exception as exc:  # noqa: BLE001 - per-route isolation by design
            failures.append((route.route_id, f"{type(exc).__name__}: {exc}"))
    return aggregate(rows, failures, k)
