"""Synthetic route generation with planted driver behavior, and the
canonical JSON dataset format.

Geometry: stops live in a square city of ``extent_km`` per side, grouped
into spatially coherent zones that in turn cluster into a few higher-level
blocks; zone ids follow ``<area>-<major>.<minor><letter>`` so id
relationships track geography.  The depot sits outside the city on a random
side.  Travel time between two points is Euclidean distance over speed,
multiplied by independent lognormal noise per direction (hence asymmetric).

Planted behaviors set the executed zone order:

- ``tsp``: the cost-minimal tour (the planned route; drivers comply).
- ``nearest_zone``: greedy nearest unvisited zone from the current one.
- ``cluster_biased``: transitions prefer the nearest unvisited zone of the
  current major cluster, falling back to the nearest unvisited zone; the
  route starts at whichever first zone gives that rule the lowest total
  operational cost (drivers habitually finish blocks, and pick the start
  that makes the day cheapest overall).

Within zones, drivers take the cheapest path as produced by the completion
procedure, so zone order is the only learnable signal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .completion import complete_sequence
from .domain import RouteInstance, StopRecord, build_zone_instance, parse_zone_id, validate_route
from .errors import InvalidInputError, MalformedRouteError, SchemaError
from .tsp import solve_tour

SCHEMA_VERSION = "routeseq/1"
BEHAVIORS = ("tsp", "nearest_zone", "cluster_biased")

_BASE_LAT = 47.0
_BASE_LNG = -122.0
_KM_PER_DEG_LAT = 111.0


@dataclass
class SynthConfig:
    n_routes: int = 100
    zones_per_route: tuple = (5, 15)
    stops_per_zone: tuple = (3, 10)
    extent_km: float = 6.0
    speed_kmph: float = 30.0
    noise_sigma: float = 0.1
    behavior: str = "cluster_biased"
    seed: int = 0


def _validate_config(config: SynthConfig):
    if config.n_routes < 1:
        raise InvalidInputError("n_routes must be >= 1")
    for name, (lo, hi) in (("zones_per_route", config.zones_per_route),
                           ("stops_per_zone", config.stops_per_zone)):
        if lo < 1 or hi < lo:
            raise InvalidInputError(f"{name} range {lo}..{hi} is impossible")
    if config.extent_km <= 0 or config.speed_kmph <= 0:
        raise InvalidInputError("extent_km and speed_kmph must be positive")
    if config.noise_sigma < 0:
        raise InvalidInputError("noise_sigma must be >= 0")
    if config.behavior not in BEHAVIORS:
        raise InvalidInputError(f"behavior must be one of {BEHAVIORS}")


def _to_latlng(xy: np.ndarray) -> tuple:
    lat = _BASE_LAT + xy[1] / _KM_PER_DEG_LAT
    lng = _BASE_LNG + xy[0] / (_KM_PER_DEG_LAT * math.cos(math.radians(_BASE_LAT)))
    return float(lat), float(lng)


def _nearest_zone_order(ztt: np.ndarray) -> list:
    n = ztt.shape[0] - 1
    order, visited = [], set()
    cur = 0
    for _ in range(n):
        best, best_z = None, -1
        for z in range(n):
            if z in visited:
                continue
            c = ztt[cur, z + 1]
            if best is None or c < best:
                best, best_z = c, z
        order.append(best_z)
        visited.add(best_z)
        cur = best_z + 1
    return order


def _cluster_rollout(ztt: np.ndarray, majors: list, first: int) -> list:
    n = ztt.shape[0] - 1
    order, visited = [first], {first}
    cur, cur_major = first, majors[first]
    while len(order) < n:
        pool = [z for z in range(n) if z not in visited and majors[z] == cur_major]
        if not pool:
            pool = [z for z in range(n) if z not in visited]
        best, best_z = None, -1
        for z in pool:
            c = ztt[cur + 1, z + 1]
            if best is None or c < best:
                best, best_z = c, z
        order.append(best_z)
        visited.add(best_z)
        cur = best_z
        cur_major = majors[best_z]
    return order


def _tour_cost(ztt: np.ndarray, order: list) -> float:
    nodes = [0] + [z + 1 for z in order]
    total = sum(ztt[a, b] for a, b in zip(nodes, nodes[1:]))
    return float(total + ztt[nodes[-1], 0])


def _cluster_biased_order(ztt: np.ndarray, majors: list) -> list:
    n = ztt.shape[0] - 1
    best_order, best_cost = None, None
    for first in range(n):
        order = _cluster_rollout(ztt, majors, first)
        cost = _tour_cost(ztt, order)
        if best_cost is None or cost < best_cost:
            best_order, best_cost = order, cost
    return best_order


def _gen_route(rng: np.random.Generator, config: SynthConfig, route_id: str) -> RouteInstance:
    extent = config.extent_km
    zlo, zhi = config.zones_per_route
    slo, shi = config.stops_per_zone
    n_zones = int(rng.integers(zlo, zhi + 1))
    n_major = max(1, math.ceil(n_zones / 4))
    area = "ABCDEG"[int(rng.integers(0, 6))]
    centers = rng.uniform(0.15 * extent, 0.85 * extent, size=(n_major, 2))
    cluster_of = rng.integers(0, n_major, size=n_zones)

    minor_counter = [0] * n_major
    stops: list[StopRecord] = []
    xy: list[np.ndarray] = []
    for z in range(n_zones):
        c = int(cluster_of[z])
        minor_counter[c] += 1
        letter = "ABCD"[int(rng.integers(0, 4))]
        zone_id = f"{area}-{c + 1}.{minor_counter[c]}{letter}"
        # Wide scatter makes clusters overlap spatially, so the id-driven
        # block habit genuinely deviates from the pure travel-time tour.
        centroid = centers[c] + rng.normal(0.0, 0.16 * extent, size=2)
        for _ in range(int(rng.integers(slo, shi + 1))):
            p = centroid + rng.normal(0.0, 0.025 * extent, size=2)
            lat, lng = _to_latlng(p)
            stops.append(StopRecord(
                stop_id=f"S{len(stops):04d}",
                zone_id=zone_id,
                lat=lat,
                lng=lng,
                n_packages=int(rng.integers(1, 6)),
                service_time=float(rng.uniform(60.0, 300.0)),
                package_volume=float(rng.uniform(1000.0, 30000.0)),
            ))
            xy.append(p)

    side = int(rng.integers(0, 4))
    along = float(rng.uniform(0.3, 0.7)) * extent
    off = 0.35 * extent
    depot_xy = np.array([
        (along, -off), (-off, along), (along, extent + off), (extent + off, along),
    ][side])
    depot_lat, depot_lng = _to_latlng(depot_xy)
    depot = StopRecord("depot", "", depot_lat, depot_lng)

    points = np.vstack([depot_xy[None, :], np.stack(xy)])
    diff = points[:, None, :] - points[None, :, :]
    dist_km = np.sqrt((diff ** 2).sum(axis=2))
    base_s = dist_km / config.speed_kmph * 3600.0
    noise = np.exp(rng.normal(0.0, config.noise_sigma, size=base_s.shape))
    tt = base_s * noise
    np.fill_diagonal(tt, 0.0)

    route = RouteInstance(route_id, depot, stops, tt, list(range(len(stops))), {})
    zinst = build_zone_instance(route)
    if config.behavior == "tsp":
        tour = solve_tour(zinst.zone_travel_time, origin=0)
        zone_order = [v - 1 for v in tour.order[1:]]
    elif config.behavior == "nearest_zone":
        zone_order = _nearest_zone_order(zinst.zone_travel_time)
    else:
        majors = [parse_zone_id(z.zone_id)[1] for z in zinst.zones]
        zone_order = _cluster_biased_order(zinst.zone_travel_time, majors)
    route.actual_stop_sequence = complete_sequence(zone_order, zinst, route)

    hour = int(rng.integers(6, 11))
    route.metadata = {
        "station": f"DS-{area}{1 + int(rng.integers(0, 3))}",
        "departure_time": f"2022-07-{1 + int(rng.integers(0, 28)):02d}T{hour:02d}:00:00",
        "vehicle_capacity": float(rng.choice([3.0, 4.0, 5.0])),
        "quality_label": str(rng.choice(["high", "medium", "low"])),
    }
    return route


def generate(config: SynthConfig) -> list:
    """Seed-deterministic synthetic dataset with the planted behavior."""
    _validate_config(config)
    children = np.random.SeedSequence(config.seed).spawn(config.n_routes)
    routes = []
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        routes.append(_gen_route(rng, config, f"R{k:05d}"))
    return routes


# --- JSON wire format --------------------------------------------------------

def route_to_dict(route: RouteInstance) -> dict:
    return {
        "route_id": route.route_id,
        "depot": {"lat": route.depot.lat, "lng": route.depot.lng},
        "stops": [
            {
                "id": s.stop_id,
                "zone_id": s.zone_id,
                "lat": s.lat,
                "lng": s.lng,
                "n_packages": s.n_packages,
                "service_time_s": s.service_time,
                "volume_cm3": s.package_volume,
            }
            for s in route.stops
        ],
        "travel_time_s": [float(v) for v in route.travel_time.ravel()],
        "actual_sequence": [route.stops[i].stop_id for i in route.actual_stop_sequence],
        "metadata": route.metadata,
    }


def routes_to_json(routes) -> str:
    payload = {"version": SCHEMA_VERSION, "routes": [route_to_dict(r) for r in routes]}
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def save_routes(routes, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(routes_to_json(routes))


def _require(mapping, key, path, kind=None):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SchemaError(f"{path}.{key}", "missing required field")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"{path}.{key}", f"expected {kind}, got {type(value).__name__}")
    return value


def route_from_dict(rd: dict, path: str) -> RouteInstance:
    route_id = _require(rd, "route_id", path, str)
    depot_d = _require(rd, "depot", path, dict)
    depot = StopRecord("depot", "", float(_require(depot_d, "lat", f"{path}.depot", (int, float))),
                       float(_require(depot_d, "lng", f"{path}.depot", (int, float))))
    stops_raw = _require(rd, "stops", path, list)
    if not stops_raw:
        raise SchemaError(f"{path}.stops", f"route {route_id!r} has no stops")
    stops = []
    for k, sd in enumerate(stops_raw):
        spath = f"{path}.stops[{k}]"
        stops.append(StopRecord(
            stop_id=_require(sd, "id", spath, str),
            zone_id=_require(sd, "zone_id", spath, str),
            lat=float(_require(sd, "lat", spath, (int, float))),
            lng=float(_require(sd, "lng", spath, (int, float))),
            n_packages=int(sd.get("n_packages", 0)),
            service_time=float(sd.get("service_time_s", 0.0)),
            package_volume=float(sd.get("volume_cm3", 0.0)),
        ))
    n = len(stops)
    flat = _require(rd, "travel_time_s", path, list)
    if len(flat) != (n + 1) ** 2:
        raise SchemaError(
            f"{path}.travel_time_s",
            f"route {route_id!r}: expected {(n + 1) ** 2} entries for {n} stops, got {len(flat)}",
        )
    tt = np.array(flat, dtype=float).reshape(n + 1, n + 1)
    seq_ids = _require(rd, "actual_sequence", path, list)
    by_id = {s.stop_id: i for i, s in enumerate(stops)}
    if sorted(seq_ids) != sorted(by_id):
        raise SchemaError(
            f"{path}.actual_sequence",
            f"route {route_id!r}: not a permutation of the stop ids",
        )
    seq = [by_id[sid] for sid in seq_ids]
    metadata = rd.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SchemaError(f"{path}.metadata", "expected an object")
    route = RouteInstance(route_id, depot, stops, tt, seq, metadata)
    try:
        validate_route(route)
    except MalformedRouteError as exc:
        raise SchemaError(path, str(exc)) from exc
    return route


def load_routes(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError("$", "expected a top-level object")
    version = payload.get("version")
    if version != SCHEMA_VERSION:
        raise SchemaError("version", f"expected {SCHEMA_VERSION!r}, got {version!r}")
    routes_raw = _require(payload, "routes", "$", list)
    return [route_from_dict(rd, f"routes[{i}]") for i, rd in enumerate(routes_raw)]


def routes_equal(a: RouteInstance, b: RouteInstance) -> bool:
    """Structural equality including exact travel-time values."""
    return (
        a.route_id == b.route_id
        and a.depot == b.depot
        and a.stops == b.stops
        and a.travel_time.shape == b.travel_time.shape
        and bool(np.all(a.travel_time == b.travel_time))
        and a.actual_stop_sequence == b.actual_stop_sequence
        and a.metadata == b.metadata
    )
