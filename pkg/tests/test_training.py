import numpy as np
import pytest

from conftest import make_route
from routeseq import datagen, training
from routeseq.errors import InvalidInputError, TrainingDivergedError
from routeseq.kernel import Tape, deserialize_checkpoint
from routeseq.predictor import forward_logprob, params_from_checkpoint, scale_route
from routeseq.training import TrainConfig, split_dataset, train


def _routes(n=8, seed=0, behavior="cluster_biased"):
    return datagen.generate(datagen.SynthConfig(
        n_routes=n, zones_per_route=(3, 4), stops_per_zone=(2, 3),
        behavior=behavior, seed=seed))


def test_split_8_2():
    train_set, test_set = split_dataset(list(range(10)), (0.8, 0.2), seed=1)
    assert len(train_set) == 8 and len(test_set) == 2
    assert sorted(train_set + test_set) == list(range(10))


def test_split_deterministic():
    a = split_dataset(list(range(30)), seed=5)
    b = split_dataset(list(range(30)), seed=5)
    assert a == b


def test_split_seed_changes_split():
    a = split_dataset(list(range(100)), seed=1)
    b = split_dataset(list(range(100)), seed=2)
    assert a != b


def test_split_validation():
    with pytest.raises(InvalidInputError):
        split_dataset([1], (0.8, 0.2))
    with pytest.raises(InvalidInputError):
        split_dataset(list(range(10)), (0.7, 0.2))
    with pytest.raises(InvalidInputError):
        split_dataset(list(range(3)), (0.99, 0.01))


def test_epochs_must_be_positive():
    with pytest.raises(InvalidInputError):
        train(_routes(2), TrainConfig(epochs=0))


def test_empty_training_set_rejected():
    with pytest.raises(InvalidInputError):
        train([], TrainConfig(epochs=1))


def test_overfits_single_route():
    # a single 3-zone route, 200 epochs: the loss collapses
    route = make_route(["A-1.1A", "A-2.1B", "B-1.1A"])
    config = TrainConfig(variant="pairwise", epochs=200, lr=0.01, seed=0,
                         hidden=8, asnn_hidden=(16, 16))
    params, report = train([route], config)
    assert report.epoch_losses[-1] < 0.05 * report.epoch_losses[0]


def test_loss_trend_on_small_set():
    routes = _routes(n=50, seed=4)
    config = TrainConfig(variant="pairwise", epochs=5, seed=1,
                         hidden=8, asnn_hidden=(16, 16))
    _, report = train(routes, config)
    losses = report.epoch_losses
    upticks = sum(1 for a, b in zip(losses, losses[1:]) if b > a * 1.05)
    assert upticks <= 1
    assert losses[-1] < losses[0]


def test_bitwise_identical_checkpoints():
    routes = _routes(n=5, seed=2)
    config = TrainConfig(variant="pointer", epochs=2, seed=7, hidden=8, asnn_hidden=(16, 16))
    from routeseq.kernel import serialize_checkpoint
    from routeseq.predictor import checkpoint_tensors, model_meta

    p1, r1 = train(routes, config)
    p2, r2 = train(routes, config)
    raw1 = serialize_checkpoint(checkpoint_tensors(p1), model_meta(p1))
    raw2 = serialize_checkpoint(checkpoint_tensors(p2), model_meta(p2))
    assert raw1 == raw2
    assert r1.checkpoint_id == r2.checkpoint_id
    assert r1.epoch_losses == r2.epoch_losses


def test_nan_loss_aborts_with_route_and_epoch(monkeypatch):
    routes = _routes(n=2, seed=3)

    def bad_forward(params, scaled):
        tape = Tape()
        return tape.leaf(np.asarray(np.nan)), []

    monkeypatch.setattr(training, "forward_logprob", bad_forward)
    with pytest.raises(TrainingDivergedError) as err:
        train(routes, TrainConfig(epochs=1, hidden=8, asnn_hidden=(16, 16)))
    assert "epoch 1" in str(err.value)
    assert "R0000" in str(err.value)


def test_checkpoint_file_written_and_loadable(tmp_path):
    routes = _routes(n=4, seed=9)
    path = tmp_path / "model.ckpt"
    config = TrainConfig(variant="lstm_ed", epochs=1, seed=3, hidden=8,
                         checkpoint_path=str(path))
    params, report = train(routes, config)
    tensors, meta = deserialize_checkpoint(path.read_bytes())
    loaded = params_from_checkpoint(tensors, meta)
    assert loaded.config.variant == "lstm_ed"
    assert loaded.config.kz == params.config.kz
    from routeseq.predictor import prepare_route
    prep = prepare_route(routes[0])
    sc = scale_route(prep, loaded.scaler)
    l1, _ = forward_logprob(loaded, sc)
    l2, _ = forward_logprob(params, scale_route(prep, params.scaler))
    assert float(l1) == float(l2)


def test_grad_clip_trains():
    routes = _routes(n=3, seed=1)
    config = TrainConfig(epochs=2, grad_clip=10.0, hidden=8, asnn_hidden=(16, 16))
    _, report = train(routes, config)
    assert all(np.isfinite(v) for v in report.epoch_losses)


def test_random_input_order_trains():
    routes = _routes(n=3, seed=1)
    config = TrainConfig(epochs=2, input_order="random", hidden=8, asnn_hidden=(16, 16))
    params, report = train(routes, config)
    assert params.config.input_order_mode == "random"
    assert all(np.isfinite(v) for v in report.epoch_losses)


def test_all_variants_train():
    routes = _routes(n=3, seed=6)
    for variant in ("pairwise", "pointer", "lstm_ed", "asnn"):
        config = TrainConfig(variant=variant, epochs=1, hidden=8, asnn_hidden=(16, 16))
        params, report = train(routes, config)
        assert params.config.variant == variant
        assert len(report.epoch_losses) == 1
