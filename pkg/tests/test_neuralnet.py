import numpy as np
import pytest

from kickcast.neuralnet import (Activation, DenseLayer, DenseNetwork, DimensionError, Loss,
                                MagicError, ModelFormatError, NonFiniteLossError, ParseError,
                                SchemaMismatchError, Task, TrainConfig, VersionError, dumps, forward,
                                gradients, init_network, load_text, loads, loss_value, predict,
                                predict_batch, save_text, train)

import oracles

CLS = Task("classification", 3)
REG = Task("regression", 2)


def random_net(rng, widths, task, scale=0.5, standardize=False):
    net = init_network(widths, task, rng)
    for layer in net.layers:
        layer.biases = rng.normal(0, scale, layer.biases.shape)
    if standardize:
        net.mean = rng.normal(0, 1, widths[0])
        net.std = rng.uniform(0.5, 2.0, widths[0])
    return net


def max_rel_error(analytic, numeric):
    return max(float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n)))) for a, n in zip(analytic, numeric))


def check_gradients(rng, widths, task, batch=5):
    net = random_net(rng, widths, task)
    x = rng.normal(0, 1, (batch, widths[0]))
    y = rng.integers(0, task.n, batch) if task.is_classification else rng.normal(0, 1, (batch, task.n))
    g = gradients(net, x, y, task.loss)
    nw, nb = oracles.numeric_gradients(net, x, y, task.loss, h=1e-5)
    return max(max_rel_error(g.weights, nw), max_rel_error(g.biases, nb))


# --- construction and forward ---

def test_invalid_networks():
    with pytest.raises(ValueError):
        DenseNetwork([DenseLayer(np.zeros((3, 2)), np.zeros(3), Activation.SOFTMAX),
                      DenseLayer(np.zeros((3, 3)), np.zeros(3), Activation.SOFTMAX)], CLS)
    with pytest.raises(ValueError):
        DenseNetwork([DenseLayer(np.zeros((3, 2)), np.zeros(3), Activation.RELU),
                      DenseLayer(np.zeros((3, 4)), np.zeros(3), Activation.SOFTMAX)], CLS)
    with pytest.raises(ValueError):
        DenseLayer(np.array([[np.nan]]), np.zeros(1), Activation.LINEAR)


def test_identity_and_relu():
    net = DenseNetwork([DenseLayer(np.eye(4), np.zeros(4), Activation.LINEAR)], Task("regression", 4))
    x = np.array([1.5, -2.0, 0.0, 3.25])
    assert np.array_equal(forward(net, x), x)
    relu = DenseNetwork([DenseLayer(np.eye(3), np.full(3, -10.0), Activation.RELU)], Task("regression", 3))
    assert np.array_equal(forward(relu, np.ones(3)), np.zeros(3))


def test_forward_matches_loop_oracle(rng):
    for task in (CLS, REG):
        net = random_net(rng, (6, 5, 4, task.n), task)
        for _ in range(10):
            x = rng.normal(0, 2, 6)
            assert np.max(np.abs(forward(net, x) - oracles.plain_forward(net, x))) < 1e-9


def test_softmax_sums_to_one(rng):
    net = random_net(rng, (5, 8, 3), CLS, scale=20)
    out = forward(net, rng.normal(0, 50, (200, 5)))
    assert np.all(np.abs(out.sum(axis=1) - 1) < 1e-6)


def test_width_mismatch_names_both(rng):
    net = random_net(rng, (5, 3), CLS)
    with pytest.raises(SchemaMismatchError, match="5.*4"):
        forward(net, np.zeros(4))
    with pytest.raises(SchemaMismatchError):
        predict(net, np.zeros(6))


# --- gradients ---

def test_zero_net_zero_gradients():
    net = DenseNetwork([DenseLayer(np.zeros((2, 3)), np.zeros(2), Activation.LINEAR)], REG)
    g = gradients(net, np.zeros((4, 3)), np.zeros((4, 2)), Loss.SQUARED_ERROR)
    assert all(not np.any(w) for w in g.weights + g.biases)


@pytest.mark.parametrize("task", [CLS, REG], ids=["cross_entropy", "squared_error"])
def test_gradient_check(rng, task):
    for widths in [(4, 5, task.n), (3, 6, 4, task.n), (5, task.n)]:
        assert check_gradients(rng, widths, task) < 1e-4


def test_cross_entropy_output_gradient_closed_form(rng):
    net = random_net(rng, (4, 6, 3), CLS)
    x = rng.normal(0, 1, (7, 4))
    y = rng.integers(0, 3, 7)
    g = gradients(net, x, y, Loss.CROSS_ENTROPY)
    h = np.maximum(x @ net.layers[0].weights.T + net.layers[0].biases, 0)
    p = forward(net, x)
    delta = (p - np.eye(3)[y]) / len(x)
    assert np.allclose(g.biases[-1], delta.sum(axis=0), atol=1e-12)
    assert np.allclose(g.weights[-1], delta.T @ h, atol=1e-12)


def test_loss_pairing_enforced(rng):
    net = random_net(rng, (3, 3), CLS)
    with pytest.raises(ValueError):
        gradients(net, np.zeros((2, 3)), [0, 1], Loss.SQUARED_ERROR)


def test_non_finite_loss_names_sample():
    net = DenseNetwork([DenseLayer(np.full((1, 2), 1e200), np.zeros(1), Activation.LINEAR)], Task("regression", 1))
    x = np.array([[0.0, 0.0], [1e200, 1e200]])
    with pytest.raises(NonFiniteLossError) as info:
        gradients(net, x, np.zeros(2), Loss.SQUARED_ERROR)
    assert info.value.sample_index == 1


# --- training ---

XOR_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
XOR_Y = np.array([0, 1, 1, 0], dtype=float)


def test_xor_is_learned():
    cfg = TrainConfig(hidden_sizes=(8,), learning_rate=0.05, momentum=0.9, batch_size=4, epochs=5000,
                      seed=0, standardize_features=False, standardize_targets=False)
    net, rep = train(XOR_X, XOR_Y, Task("regression", 1), cfg)
    assert rep.epoch_losses[-1] < 0.1
    assert rep.epoch_losses[-1] < rep.initial_loss


def test_training_is_deterministic(rng):
    x = rng.normal(0, 1, (120, 6))
    y = (x[:, 0] > 0).astype(int) + (x[:, 1] > 1).astype(int)
    cfg = TrainConfig(hidden_sizes=(8, 8), epochs=5, seed=3)
    a, ra = train(x, y, CLS, cfg)
    b, rb = train(x, y, CLS, cfg)
    assert dumps(a) == dumps(b) and ra.epoch_losses == rb.epoch_losses
    c, _ = train(x, y, CLS, TrainConfig(hidden_sizes=(8, 8), epochs=5, seed=4))
    assert dumps(a) != dumps(c)


def test_zero_learning_rate_keeps_initial_weights(rng):
    x = rng.normal(0, 1, (50, 4))
    y = rng.integers(0, 3, 50)
    cfg = TrainConfig(hidden_sizes=(5,), learning_rate=0.0, epochs=3, seed=11)
    net, rep = train(x, y, CLS, cfg)
    init = init_network((4, 5, 3), CLS, np.random.default_rng(11))
    for a, b in zip(net.layers, init.layers):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.biases, b.biases)
    assert rep.epoch_losses == [rep.initial_loss] * 3


def test_training_input_checks(rng):
    x = rng.normal(0, 1, (10, 3))
    with pytest.raises(ValueError, match="two classes"):
        train(x, np.zeros(10, dtype=int), CLS, TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train(x, np.full(10, 5), CLS, TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        TrainConfig(hidden_sizes=(0,))


def test_regression_target_scaling_is_folded(rng):
    x = rng.normal(0, 1, (400, 3))
    y = np.column_stack([100 + 40 * x[:, 0], -5 + 0.01 * x[:, 1]])
    net, _ = train(x, y, REG, TrainConfig(hidden_sizes=(16,), epochs=60, seed=0))
    pred = predict_batch(net, x)
    assert np.mean(np.abs(pred[:, 0] - y[:, 0])) < 4.0
    assert abs(np.mean(pred[:, 1]) - (-5)) < 0.01


def test_constant_column_standardization(rng):
    x = rng.normal(0, 1, (40, 3))
    x[:, 1] = 7.0
    net, _ = train(x, (x[:, 0] > 0).astype(int), Task("classification", 2), TrainConfig(hidden_sizes=(4,), epochs=2))
    assert net.std[1] == 1.0 and np.all(np.isfinite(predict_batch(net, x)))


# --- prediction ---

def test_predict_composition(rng):
    net = random_net(rng, (6, 7, 3), CLS, standardize=True)
    x = rng.normal(0, 1, 6)
    p = predict(net, x)
    assert np.array_equal(p.outputs, forward(net, (x - net.mean) / net.std))
    assert p.label == int(np.argmax(p.outputs))
    assert abs(p.outputs.sum() - 1) < 1e-6


def test_predict_tie_picks_lowest_class():
    net = DenseNetwork([DenseLayer(np.zeros((3, 2)), np.zeros(3), Activation.SOFTMAX)], CLS)
    assert predict(net, np.ones(2)).label == 0


def test_identity_regression_echoes_standardized_input():
    net = DenseNetwork([DenseLayer(np.eye(2), np.zeros(2), Activation.LINEAR)], REG,
                       mean=np.array([1.0, 2.0]), std=np.array([2.0, 4.0]))
    assert np.array_equal(predict(net, np.array([3.0, 10.0])).outputs, np.array([1.0, 2.0]))
    assert predict(net, np.array([3.0, 10.0])).label is None


# --- text format ---

def test_round_trip_large_net(rng, tmp_path):
    net = random_net(rng, (794, 128, 128, 3), CLS, standardize=True)
    net.provenance = {"note": "rt"}
    path = tmp_path / "m.txt"
    save_text(net, path)
    back = load_text(path)
    x = rng.normal(0, 1, (100, 794))
    assert np.max(np.abs(predict_batch(net, x) - predict_batch(back, x))) < 1e-6
    for a, b in zip(net.layers, back.layers):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.biases, b.biases)
    assert np.array_equal(net.mean, back.mean) and back.provenance == {"note": "rt"}
    assert dumps(back) == dumps(net)


def test_format_layout(rng):
    net = random_net(rng, (3, 2, 2), REG, standardize=True)
    lines = dumps(net).splitlines()
    assert lines[0] == "KICKCAST-DNN v1" and lines[1] == "task regression 2"
    assert lines[2] == "standardize 3" and len(lines[3].split()) == 3
    assert lines[5] == "layer 3 2 relu" and len(lines[6].split()) == 3
    assert lines[9] == "layer 2 2 linear"
    plain = random_net(rng, (3, 2), REG)
    assert dumps(plain).splitlines()[2] == "layer 3 2 linear"
    assert loads(dumps(plain)).mean is None


def test_truncated_file_reports_line(rng):
    text = dumps(random_net(rng, (4, 3, 3), CLS, standardize=True))
    lines = text.splitlines()
    with pytest.raises(ParseError) as info:
        loads("\n".join(lines[:8]) + "\n")
    assert info.value.line == 9


def test_version_and_magic_errors(rng):
    text = dumps(random_net(rng, (2, 3), CLS))
    with pytest.raises(VersionError) as info:
        loads(text.replace("KICKCAST-DNN v1", "KICKCAST-DNN v2", 1))
    assert info.value.line == 1
    with pytest.raises(MagicError):
        loads(text.replace("KICKCAST-DNN", "OTHER", 1))


def test_dimension_and_number_errors(rng):
    text = dumps(random_net(rng, (2, 3), CLS))
    lines = text.splitlines()
    bad = list(lines)
    bad[3] = bad[3] + " 0.5"
    with pytest.raises(DimensionError) as info:
        loads("\n".join(bad))
    assert info.value.line == 4
    bad = list(lines)
    bad[3] = "0.1 abc"
    with pytest.raises(ParseError) as info:
        loads("\n".join(bad))
    assert info.value.line == 4
    assert issubclass(DimensionError, ModelFormatError) and issubclass(VersionError, ModelFormatError)
