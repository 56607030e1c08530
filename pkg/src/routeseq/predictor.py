"""Sequence models over zone instances.

Four variants share one parameter container and one teacher-forced
log-likelihood:

- ``pairwise``: LSTM encoder/decoder with pair-wise attention scored by a
  shared MLP applied per candidate to [pair features; decoder output;
  encoder output].  The main model.
- ``pointer``: classic additive pointer attention W1'tanh(W2 e_j + W3 d)
  augmented with a linear local term W4 [pair features].
- ``lstm_ed``: plain LSTM encoder-decoder; a fully-connected head over
  input-sequence positions (width = the largest route size seen in
  training), masked to the route's unvisited positions when decoding.
- ``asnn``: no recurrence; the pair MLP alone scores (previous zone ->
  candidate) transitions from pair features plus both zones' features.

Attention candidates for the recurrent variants are indexed by *input
position* (the encoder reading order); zone index <-> position mapping
lives in ScaledRoute.  Training uses the unmasked softmax over all
positions; masking to unvisited zones happens only at decode time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from . import domain
from .domain import N_PAIR_FEATURES, ZoneInstance, build_zone_instance, zone_features
from .errors import ConfigError, InvalidInputError, SchemaError
from .kernel import (
    LstmCellParams,
    LstmState,
    MlpParams,
    Node,
    Tape,
    add,
    concat,
    cross_entropy,
    hstack,
    init_lstm,
    init_mlp,
    lstm_cell,
    map_tensors,
    matmul,
    mlp_forward,
    named_tensors,
    nsum,
    reshape,
    softmax,
    stack_rows,
    tanh,
    tile_rows,
    transpose,
    uniform_init,
)
from .tsp import solve_tour

VARIANTS = ("pairwise", "pointer", "lstm_ed", "asnn")
INPUT_ORDER_MODES = ("tsp", "random")


@dataclass
class ModelConfig:
    variant: str
    n_features: int
    pair_dim: int = N_PAIR_FEATURES  # includes the phi hook's width
    hidden: int = 32
    asnn_hidden: tuple = (128, 128)
    att_dim: int = 32
    kz: int | None = None            # lstm_ed head width
    input_order_mode: str = "tsp"
    order_seed: int = 0


@dataclass(eq=False)
class PointerParams:
    w1: object  # (att_dim,)
    w2: object  # (att_dim, hidden)
    w3: object  # (att_dim, hidden)
    w4: object  # (pair_dim,)


@dataclass(eq=False)
class FeatureScaler:
    """Per-dimension standardization fitted on the training split."""

    x_mean: np.ndarray
    x_std: np.ndarray
    z_mean: np.ndarray
    z_std: np.ndarray

    def transform_x(self, x):
        return (x - self.x_mean) / self.x_std

    def transform_z(self, z):
        return (z - self.z_mean) / self.z_std


@dataclass(eq=False)
class ModelParams:
    """All learnable tensors of one variant plus its dimension config."""

    config: ModelConfig
    scaler: FeatureScaler
    encoder: LstmCellParams | None = None
    decoder: LstmCellParams | None = None
    asnn: MlpParams | None = None
    pointer: PointerParams | None = None
    fc: MlpParams | None = None


@dataclass(eq=False)
class EncoderOutputs:
    outputs: list      # encoder output vector per input position
    h_final: object
    c_final: object


@dataclass(eq=False)
class DecoderStepTrace:
    step: int
    attention: np.ndarray   # probability per zone (zone-index order)
    chosen: int             # zone index
    context: np.ndarray | None
    decoder_output: np.ndarray | None


@dataclass(eq=False)
class PreparedRoute:
    """Route plus everything the models read: raw feature tensors, the
    planned (TSP) reading order, and the actual zone sequence."""

    route: object
    zinst: ZoneInstance
    x: np.ndarray         # (n, K) raw zone features, zone-index order
    depot_x: np.ndarray   # (K,)
    pair: np.ndarray      # (n+1, n, pair_dim); source 0 = depot, 1+k = zone k
    tsp_order: tuple
    targets: tuple        # actual zone sequence (zone indices)

    @property
    def n_zones(self) -> int:
        return len(self.zinst.zones)


@dataclass(eq=False)
class ScaledRoute:
    prep: PreparedRoute
    order: tuple              # encoder reading order (zone indices)
    pos_of_zone: np.ndarray   # inverse of ``order``
    x_s: np.ndarray
    depot_s: np.ndarray
    pair_s: np.ndarray


def prepare_route(route) -> PreparedRoute:
    zinst = build_zone_instance(route)
    n = zinst.n_zones
    x = np.stack([zone_features(z, zinst, route) for z in zinst.zones])
    phi_probe = domain.phi_features(zinst.depot_features, x[0])
    phi_dim = phi_probe.shape[0]
    pair = np.zeros((n + 1, n, N_PAIR_FEATURES + phi_dim))
    for j in range(n):
        base = domain.depot_pair_features(j, zinst)
        pair[0, j] = np.concatenate([base, domain.phi_features(zinst.depot_features, x[j])])
    for i in range(n):
        for j in range(n):
            if i == j:
                # A zone's relationship with itself: zero time, all flags set.
                base = np.array([0.0, 1.0, 1.0, 1.0, 0.0, 0.0])
            else:
                base = domain.pair_features(i, j, zinst)
            pair[i + 1, j] = np.concatenate([base, domain.phi_features(x[i], x[j])])
    tour = solve_tour(zinst.zone_travel_time, origin=0)
    tsp_order = tuple(v - 1 for v in tour.order[1:])
    return PreparedRoute(route, zinst, x, zinst.depot_features, pair,
                         tsp_order, tuple(zinst.actual_zone_sequence))


def identity_scaler(n_features: int, pair_dim: int) -> FeatureScaler:
    return FeatureScaler(np.zeros(n_features), np.ones(n_features),
                         np.zeros(pair_dim), np.ones(pair_dim))


def fit_scaler(prepared: list) -> FeatureScaler:
    """Means/stds over all zone (and depot) feature rows and all directed
    pair rows of the given routes.  Constant dimensions get unit scale."""
    x_rows = [p.depot_x for p in prepared] + [p.x[k] for p in prepared for k in range(p.n_zones)]
    z_rows = []
    for p in prepared:
        n = p.n_zones
        for src in range(n + 1):
            for j in range(n):
                if src == j + 1:
                    continue  # synthetic self-pair rows stay out of the stats
                z_rows.append(p.pair[src, j])
    xs = np.stack(x_rows)
    zs = np.stack(z_rows)

    def _std(a):
        s = a.std(axis=0)
        return np.where(s < 1e-9, 1.0, s)

    return FeatureScaler(xs.mean(axis=0), _std(xs), zs.mean(axis=0), _std(zs))


def random_input_order(route_id: str, n: int, seed: int) -> tuple:
    """Seed-stable per-route permutation (independent of dataset order)."""
    digest = hashlib.sha256(f"{seed}:{route_id}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return tuple(int(v) for v in rng.permutation(n))


def resolve_input_order(prep: PreparedRoute, mode: str, seed: int) -> tuple:
    if mode == "tsp":
        return prep.tsp_order
    if mode == "random":
        return random_input_order(prep.route.route_id, prep.n_zones, seed)
    raise ConfigError(f"unknown input order mode {mode!r}")


def scale_route(prep: PreparedRoute, scaler: FeatureScaler,
                mode: str = "tsp", order_seed: int = 0) -> ScaledRoute:
    order = resolve_input_order(prep, mode, order_seed)
    pos = np.empty(prep.n_zones, dtype=int)
    for k, z in enumerate(order):
        pos[z] = k
    return ScaledRoute(
        prep=prep,
        order=order,
        pos_of_zone=pos,
        x_s=scaler.transform_x(prep.x),
        depot_s=scaler.transform_x(prep.depot_x),
        pair_s=scaler.transform_z(prep.pair),
    )


def init_model(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Fresh parameters: uniform(+-1/sqrt(fan_in)) weights, zero biases."""
    if config.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {config.variant!r}")
    if config.input_order_mode not in INPUT_ORDER_MODES:
        raise ConfigError(f"unknown input order mode {config.input_order_mode!r}")
    k, h = config.n_features, config.hidden
    params = ModelParams(config=config, scaler=identity_scaler(k, config.pair_dim))
    if config.variant in ("pairwise", "pointer", "lstm_ed"):
        params.encoder = init_lstm(k, h, rng)
        dec_in = k if config.variant == "lstm_ed" else k + h
        params.decoder = init_lstm(dec_in, h, rng)
    if config.variant == "pairwise":
        dims = (config.pair_dim + 2 * h, *config.asnn_hidden, 1)
        params.asnn = init_mlp(dims, rng)
    elif config.variant == "pointer":
        a = config.att_dim
        params.pointer = PointerParams(
            w1=uniform_init(rng, (a,), a),
            w2=uniform_init(rng, (a, h), h),
            w3=uniform_init(rng, (a, h), h),
            w4=uniform_init(rng, (config.pair_dim,), config.pair_dim),
        )
    elif config.variant == "lstm_ed":
        if not config.kz or config.kz < 1:
            raise ConfigError("lstm_ed requires kz (the largest route size in training)")
        params.fc = init_mlp((h, config.kz), rng)
    elif config.variant == "asnn":
        dims = (config.pair_dim + 2 * k, *config.asnn_hidden, 1)
        params.asnn = init_mlp(dims, rng)
    return params


def model_tensors(params: ModelParams) -> dict:
    """Flat {name: tensor} view of every learnable tensor."""
    out: dict = {}
    for name in ("encoder", "decoder", "asnn", "pointer", "fc"):
        component = getattr(params, name)
        if component is not None:
            out.update(named_tensors(component, name))
    return out


def wrap_params(params: ModelParams, tape: Tape) -> ModelParams:
    """Same structure with every tensor wrapped as a tape leaf."""
    wrapped = replace(params)
    for name in ("encoder", "decoder", "asnn", "pointer", "fc"):
        component = getattr(params, name)
        if component is not None:
            setattr(wrapped, name, map_tensors(component, tape.leaf))
    return wrapped


def gradients(params: ModelParams, wrapped: ModelParams) -> dict:
    """Collect leaf gradients after backward; untouched leaves give zeros."""
    grads = {}
    flat = model_tensors(wrapped)
    for name, base in model_tensors(params).items():
        node = flat[name]
        grads[name] = node.grad if node.grad is not None else np.zeros_like(base)
    return grads


def encode(params: ModelParams, scaled: ScaledRoute) -> EncoderOutputs:
    """Run the encoder over the scaled features in reading order, from a
    zero initial state."""
    n = scaled.prep.n_zones
    if n == 0:
        raise InvalidInputError("cannot encode an empty zone set")
    h = params.config.hidden
    state = LstmState(np.zeros(h), np.zeros(h))
    outputs = []
    for z in scaled.order:
        state, e = lstm_cell(scaled.x_s[z], state, params.encoder)
        outputs.append(e)
    return EncoderOutputs(outputs, state.h, state.c)


def _pair_rows(scaled: ScaledRoute, prev_zone: int | None, by_position: bool) -> np.ndarray:
    src = 0 if prev_zone is None else prev_zone + 1
    rows = scaled.pair_s[src]
    if by_position:
        return rows[list(scaled.order)]
    return rows


def asnn_attention(params: ModelParams, scaled: ScaledRoute, prev_zone: int | None,
                   d, enc_matrix):
    """Pair-wise attention over input positions: the shared MLP scores
    [pair features; decoder output; encoder output] per candidate and a
    softmax over all positions normalizes the scores."""
    n = scaled.prep.n_zones
    z_rows = _pair_rows(scaled, prev_zone, by_position=True)
    dv = d.value if isinstance(d, Node) else d
    if dv.shape[0] != params.config.hidden:
        raise InvalidInputError("decoder output width does not match the model config")
    v = hstack([z_rows, tile_rows(d, n), enc_matrix])
    u = reshape(mlp_forward(v, params.asnn), (n,))
    return softmax(u)


def pointer_attention(params: ModelParams, scaled: ScaledRoute, prev_zone: int | None,
                      d, enc_matrix):
    """Additive pointer attention plus the linear local term."""
    if params.pointer is None:
        raise ConfigError("pointer attention requires pointer parameters (W1..W4)")
    n = scaled.prep.n_zones
    p = params.pointer
    z_rows = _pair_rows(scaled, prev_zone, by_position=True)
    t = tanh(add(matmul(enc_matrix, transpose(p.w2)), matmul(p.w3, d)))
    u = add(matmul(t, p.w1), matmul(z_rows, p.w4))
    return softmax(u)


def decode_step(params: ModelParams, x_last, w_prev, state: LstmState):
    """One decoder LSTM step on [features of the last stop; context]
    (the lstm_ed variant feeds the features alone)."""
    if params.config.variant == "lstm_ed":
        inp = x_last
    else:
        inp = concat([x_last, w_prev])
    return lstm_cell(inp, state, params.decoder)


def _probs_by_zone(scaled: ScaledRoute, pvals: np.ndarray, kz: int | None) -> np.ndarray:
    """Re-index position-space probabilities to zone-index order."""
    n = scaled.prep.n_zones
    out = np.zeros(n)
    limit = n if kz is None else min(n, kz)
    for k in range(limit):
        out[scaled.order[k]] = pvals[k]
    return out


def forward_logprob(params: ModelParams, scaled: ScaledRoute):
    """Teacher-forced total negative log-likelihood of the actual zone
    sequence, with per-step traces.

    The softmax is never masked here: each step normalizes over every
    candidate, and the final (forced) step still contributes a loss term.
    Pass tape-wrapped ``params`` (see ``wrap_params``) to record gradients.
    """
    cfg = params.config
    prep = scaled.prep
    n = prep.n_zones
    targets = prep.targets
    if sorted(targets) != list(range(n)):
        raise InvalidInputError("target sequence must be a permutation of the zones")
    traces: list[DecoderStepTrace] = []
    loss_terms = []

    if cfg.variant == "asnn":
        prev = None
        for i in range(n):
            probs = _asnn_pair_probs(params, scaled, prev)
            loss_terms.append(cross_entropy(probs, targets[i]))
            pv = probs.value if isinstance(probs, Node) else probs
            traces.append(DecoderStepTrace(i, pv.copy(), targets[i], None, None))
            prev = targets[i]
        return nsum(loss_terms), traces

    enc = encode(params, scaled)
    enc_matrix = stack_rows(enc.outputs)
    state = LstmState(enc.h_final, enc.c_final)
    w_prev = np.zeros(cfg.hidden)
    prev = None
    for i in range(n):
        x_last = scaled.depot_s if prev is None else scaled.x_s[prev]
        state, d = decode_step(params, x_last, w_prev, state)
        if cfg.variant == "pairwise":
            probs = asnn_attention(params, scaled, prev, d, enc_matrix)
        elif cfg.variant == "pointer":
            probs = pointer_attention(params, scaled, prev, d, enc_matrix)
        else:
            probs = softmax(mlp_forward(d, params.fc))
        tpos = int(scaled.pos_of_zone[targets[i]])
        loss_terms.append(cross_entropy(probs, tpos))
        pv = probs.value if isinstance(probs, Node) else probs
        dv = d.value if isinstance(d, Node) else d
        wv = None
        if cfg.variant in ("pairwise", "pointer"):
            w_prev = matmul(transpose(enc_matrix), probs)
            wv = w_prev.value if isinstance(w_prev, Node) else w_prev
        traces.append(DecoderStepTrace(
            i, _probs_by_zone(scaled, pv, cfg.kz), targets[i],
            None if wv is None else wv.copy(), dv.copy(),
        ))
        prev = targets[i]
    return nsum(loss_terms), traces


def _asnn_pair_probs(params: ModelParams, scaled: ScaledRoute, prev_zone: int | None):
    """ASNN-only transition scores from ``prev_zone`` over all zones."""
    n = scaled.prep.n_zones
    z_rows = _pair_rows(scaled, prev_zone, by_position=False)
    x_prev = scaled.depot_s if prev_zone is None else scaled.x_s[prev_zone]
    v = np.hstack([z_rows, np.tile(x_prev, (n, 1)), scaled.x_s])
    u = reshape(mlp_forward(v, params.asnn), (n,))
    return softmax(u)


# --- checkpoint round trip ---------------------------------------------------

def model_meta(params: ModelParams) -> dict:
    cfg = params.config
    return {
        "variant": cfg.variant,
        "n_features": cfg.n_features,
        "pair_dim": cfg.pair_dim,
        "hidden": cfg.hidden,
        "asnn_hidden": list(cfg.asnn_hidden),
        "att_dim": cfg.att_dim,
        "kz": cfg.kz,
        "input_order_mode": cfg.input_order_mode,
        "order_seed": cfg.order_seed,
        "zone_feature_names": list(domain.ZONE_FEATURE_NAMES),
    }


def checkpoint_tensors(params: ModelParams) -> dict:
    out = model_tensors(params)
    out["scaler.x_mean"] = params.scaler.x_mean
    out["scaler.x_std"] = params.scaler.x_std
    out["scaler.z_mean"] = params.scaler.z_mean
    out["scaler.z_std"] = params.scaler.z_std
    return out


def _lstm_from(tensors: dict, prefix: str) -> LstmCellParams:
    names = ("w_f", "w_i", "w_o", "w_c", "u_f", "u_i", "u_o", "u_c", "b_f", "b_i", "b_o", "b_c")
    try:
        return LstmCellParams(*(tensors[f"{prefix}.{g}"] for g in names))
    except KeyError as exc:
        raise SchemaError(f"tensors.{prefix}", f"missing gate tensor {exc}") from exc


def _mlp_from(tensors: dict, prefix: str) -> MlpParams:
    from .kernel import MlpLayer

    layers = []
    k = 0
    while f"{prefix}.{k}.w" in tensors:
        layers.append(MlpLayer(tensors[f"{prefix}.{k}.w"], tensors[f"{prefix}.{k}.b"]))
        k += 1
    if not layers:
        raise SchemaError(f"tensors.{prefix}", "no layers found")
    return MlpParams(layers)


def params_from_checkpoint(tensors: dict, meta: dict) -> ModelParams:
    try:
        config = ModelConfig(
            variant=meta["variant"],
            n_features=int(meta["n_features"]),
            pair_dim=int(meta["pair_dim"]),
            hidden=int(meta["hidden"]),
            asnn_hidden=tuple(meta["asnn_hidden"]),
            att_dim=int(meta["att_dim"]),
            kz=None if meta.get("kz") is None else int(meta["kz"]),
            input_order_mode=meta.get("input_order_mode", "tsp"),
            order_seed=int(meta.get("order_seed", 0)),
        )
    except KeyError as exc:
        raise SchemaError("meta", f"missing field {exc}") from exc
    if config.variant not in VARIANTS:
        raise SchemaError("meta.variant", f"unknown variant {config.variant!r}")
    scaler = FeatureScaler(
        tensors["scaler.x_mean"], tensors["scaler.x_std"],
        tensors["scaler.z_mean"], tensors["scaler.z_std"],
    )
    params = ModelParams(config=config, scaler=scaler)
    if config.variant in ("pairwise", "pointer", "lstm_ed"):
        params.encoder = _lstm_from(tensors, "encoder")
        params.decoder = _lstm_from(tensors, "decoder")
    if config.variant in ("pairwise", "asnn"):
        params.asnn = _mlp_from(tensors, "asnn")
    if config.variant == "pointer":
        try:
            params.pointer = PointerParams(
                tensors["pointer.w1"], tensors["pointer.w2"],
                tensors["pointer.w3"], tensors["pointer.w4"],
            )
        except KeyError as exc:
            raise SchemaError("tensors.pointer", f"missing tensor {exc}") from exc
    if config.variant == "lstm_ed":
        params.fc = _mlp_from(tensors, "fc")
    return params


def save_model(params: ModelParams, path) -> str:
    from .kernel import save_checkpoint

    return save_checkpoint(path, checkpoint_tensors(params), model_meta(params))


def load_model(path) -> ModelParams:
    from .kernel import load_checkpoint

    tensors, meta = load_checkpoint(path)
    return params_from_checkpoint(tensors, meta)
