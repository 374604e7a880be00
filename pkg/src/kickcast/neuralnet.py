"""Dense feedforward networks: training from scratch and a portable text weight format.

Arithmetic is float64 throughout. A network file carries its own input
standardization so it can be evaluated without the training data.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MAGIC = "KICKCAST-DNN"
FORMAT_VERSION = "v1"


class Activation(Enum):
    RELU = "relu"
    LINEAR = "linear"
    SOFTMAX = "softmax"


class Loss(Enum):
    CROSS_ENTROPY = "cross_entropy"
    SQUARED_ERROR = "squared_error"


@dataclass(frozen=True)
class Task:
    kind: str  # "classification" or "regression"
    n: int

    def __post_init__(self):
        if self.kind not in ("classification", "regression"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("task needs at least one output")

    @property
    def is_classification(self) -> bool:
        return self.kind == "classification"

    @property
    def loss(self) -> Loss:
        return Loss.CROSS_ENTROPY if self.is_classification else Loss.SQUARED_ERROR


class NonFiniteLossError(ArithmeticError):
    def __init__(self, message: str, sample_index: int | None = None,
                 epoch: int | None = None, batch: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index
        self.epoch = epoch
        self.batch = batch


class SchemaMismatchError(ValueError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"input width mismatch: network expects {expected}, got {got}")
        self.expected = expected
        self.got = got


class ModelFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MagicError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


class DimensionError(ModelFormatError):
    pass


class ParseError(ModelFormatError):
    pass


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: Activation

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValueError(f"layer shapes {self.weights.shape} / {self.biases.shape} do not chain")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ValueError("layer parameters must be finite")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseNetwork:
    layers: list[DenseLayer]
    task: Task
    mean: Optional[np.ndarray] = None
    std: Optional[np.ndarray] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")
        for layer in self.layers[:-1]:
            if layer.activation is Activation.SOFTMAX:
                raise ValueError("softmax is only allowed on the final layer")
        if self.layers[-1].n_out != self.task.n:
            raise ValueError(f"final layer width {self.layers[-1].n_out} != task outputs {self.task.n}")
        if (self.mean is None) != (self.std is None):
            raise ValueError("mean and std must be given together")
        if self.mean is not None:
            self.mean = np.asarray(self.mean, dtype=np.float64)
            self.std = np.asarray(self.std, dtype=np.float64)
            if self.mean.shape != (self.input_width,) or self.std.shape != (self.input_width,):
                raise ValueError("standardization vectors must match the input width")
            if np.any(self.std <= 0):
                raise ValueError("standardization std must be positive")

    @property
    def input_width(self) -> int:
        return self.layers[0].n_in

    def standardize(self, x: np.ndarray) -> np.ndarray:
        if self.mean is None:
            return x
        return (x - self.mean) / self.std


def _activate(z: np.ndarray, act: Activation) -> np.ndarray:
    if act is Activation.RELU:
        return np.maximum(z, 0.0)
    if act is Activation.SOFTMAX:
        e = np.exp(z - z.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    return z


def _as_batch(net: DenseNetwork, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_width:
        raise SchemaMismatchError(net.input_width, x.shape[-1])
    return x, single


def forward(net: DenseNetwork, x) -> np.ndarray:
    """Raw network output for one input vector or a batch (rows); no standardization."""
    a, single = _as_batch(net, x)
    for layer in net.layers:
        a = _activate(a @ layer.weights.T + layer.biases, layer.activation)
    return a[0] if single else a


def _one_hot(y: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((len(y), n))
    out[np.arange(len(y)), y] = 1.0
    return out


def _targets(net: DenseNetwork, y, n_rows: int) -> np.ndarray:
    y = np.asarray(y)
    if net.layers[-1].activation is Activation.SOFTMAX and y.ndim == 1:
        return _one_hot(y.astype(np.int64), net.task.n)
    y = y.astype(np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != (n_rows, net.layers[-1].n_out):
        raise ValueError(f"target shape {y.shape} does not match output ({n_rows}, {net.layers[-1].n_out})")
    return y


def sample_losses(net: DenseNetwork, x, y, loss: Loss) -> np.ndarray:
    x, _ = _as_batch(net, x)
    t = _targets(net, y, len(x))
    out = forward(net, x)
    if loss is Loss.CROSS_ENTROPY:
        z = _pre_softmax(net, x)
        logp = z - z.max(axis=1, keepdims=True)
        logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
        return -(t * logp).sum(axis=1)
    return 0.5 * ((out - t) ** 2).sum(axis=1)


def _pre_softmax(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    a = x
    for layer in net.layers[:-1]:
        a = _activate(a @ layer.weights.T + layer.biases, layer.activation)
    return a @ net.layers[-1].weights.T + net.layers[-1].biases


def loss_value(net: DenseNetwork, x, y, loss: Loss) -> float:
    """Mean batch loss: cross-entropy, or half the squared error summed over outputs."""
    return float(np.mean(sample_losses(net, x, y, loss)))


@dataclass
class Gradients:
    loss: float
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def _output_delta(loss: Loss, final: Activation, out: np.ndarray, z: np.ndarray,
                  t: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample losses and the gradient of the mean loss w.r.t. the final pre-activation."""
    delta = (out - t) / n
    if loss is Loss.CROSS_ENTROPY:
        logp = z - z.max(axis=1, keepdims=True)
        logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
        return -(t * logp).sum(axis=1), delta
    if final is Activation.RELU:
        delta = delta * (z > 0)
    return 0.5 * ((out - t) ** 2).sum(axis=1), delta


def gradients(net: DenseNetwork, x, y, loss: Loss) -> Gradients:
    """Backpropagated gradients of the mean batch loss.

    Cross-entropy needs a softmax output layer; squared error needs a relu or
    linear one.
    """
    x, _ = _as_batch(net, x)
    if len(x) == 0:
        raise ValueError("empty batch")
    final = net.layers[-1].activation
    if (loss is Loss.CROSS_ENTROPY) != (final is Activation.SOFTMAX):
        raise ValueError(f"loss {loss.value} is not paired with a {final.value} output layer")
    t = _targets(net, y, len(x))

    acts = [x]
    pres = []
    # overflow shows up as a non-finite sample loss below, which is reported
    with np.errstate(over="ignore", invalid="ignore"):
        for layer in net.layers:
            z = acts[-1] @ layer.weights.T + layer.biases
            pres.append(z)
            acts.append(_activate(z, layer.activation))

    out = acts[-1]
    n = len(x)
    with np.errstate(over="ignore", invalid="ignore"):
        per_sample, delta = _output_delta(loss, final, out, pres[-1], t, n)
    bad = np.flatnonzero(~np.isfinite(per_sample))
    if bad.size:
        raise NonFiniteLossError(f"non-finite loss at sample {int(bad[0])}", sample_index=int(bad[0]))

    gw: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = delta @ net.layers[i].weights
            if net.layers[i - 1].activation is Activation.RELU:
                delta = delta * (pres[i - 1] > 0)
    return Gradients(float(per_sample.mean()), gw, gb)


@dataclass
class TrainConfig:
    hidden_sizes: tuple[int, ...] = (128, 128)
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    standardize_features: bool = True
    # regression targets are scaled to unit variance while training, then the
    # scaling is folded back into the final linear layer
    standardize_targets: bool = True

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if any(h <= 0 for h in self.hidden_sizes) or self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("sizes and epochs must be positive")
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ValueError("learning_rate must be >= 0 and momentum in [0, 1)")


@dataclass
class TrainReport:
    initial_loss: float
    epoch_losses: list[float]
    config: dict

    def to_dict(self) -> dict:
        return {"initial_loss": self.initial_loss, "epoch_losses": self.epoch_losses,
                "config": self.config}


def init_network(widths: Sequence[int], task: Task, rng: np.random.Generator) -> DenseNetwork:
    """He-initialized network with relu hidden layers."""
    layers = []
    for i, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
        last = i == len(widths) - 2
        act = (Activation.SOFTMAX if task.is_classification else Activation.LINEAR) if last else Activation.RELU
        layers.append(DenseLayer(rng.standard_normal((n_out, n_in)) * math.sqrt(2.0 / n_in),
                                 np.zeros(n_out), act))
    return DenseNetwork(layers, task)


def train(x: np.ndarray, y: np.ndarray, task: Task, cfg: TrainConfig) -> tuple[DenseNetwork, TrainReport]:
    """Mini-batch SGD with momentum; deterministic for a given cfg.seed.

    `y` holds class indices for classification and an (n, task.n) or (n,)
    array for regression. Reported losses are full-set losses in training
    units (standardized targets for regression).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("training inputs must be a non-empty 2-D array")
    n, width = x.shape
    rng = np.random.default_rng(cfg.seed)

    if task.is_classification:
        y = np.asarray(y).astype(np.int64)
        if y.shape != (n,):
            raise ValueError("classification targets must be a vector of class indices")
        if y.min() < 0 or y.max() >= task.n:
            raise ValueError(f"class index outside 0..{task.n - 1}")
        if len(np.unique(y)) < 2:
            raise ValueError("classification needs at least two classes present")
        t = y
    else:
        t = np.asarray(y, dtype=np.float64).reshape(n, -1)
        if t.shape[1] != task.n:
            raise ValueError(f"regression target width {t.shape[1]} != {task.n}")

    if cfg.standardize_features:
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std == 0] = 1.0
    else:
        mean = std = None
    if not task.is_classification and cfg.standardize_targets:
        t_mean = t.mean(axis=0)
        t_std = t.std(axis=0)
        t_std[t_std == 0] = 1.0
        t = (t - t_mean) / t_std
    else:
        t_mean = t_std = None

    net = init_network((width, *cfg.hidden_sizes, task.n), task, rng)
    xs = x if mean is None else (x - mean) / std
    loss = task.loss

    vel_w = [np.zeros_like(layer.weights) for layer in net.layers]
    vel_b = [np.zeros_like(layer.biases) for layer in net.layers]
    initial = loss_value(net, xs, t, loss)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            try:
                g = gradients(net, xs[idx], t[idx], loss)
            except NonFiniteLossError as exc:
                raise NonFiniteLossError(f"non-finite loss in epoch {epoch}, batch {b}",
                                         sample_index=int(idx[exc.sample_index]),
                                         epoch=epoch, batch=b) from None
            for i, layer in enumerate(net.layers):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * g.weights[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * g.biases[i]
                layer.weights += vel_w[i]
                layer.biases += vel_b[i]
        with np.errstate(over="ignore", invalid="ignore"):
            epoch_loss = loss_value(net, xs, t, loss)
        if not math.isfinite(epoch_loss):
            raise NonFiniteLossError(f"non-finite loss after epoch {epoch}", epoch=epoch)
        history.append(epoch_loss)

    if t_mean is not None:
        last = net.layers[-1]
        last.weights = last.weights * t_std[:, None]
        last.biases = last.biases * t_std + t_mean
    net.mean, net.std = mean, std
    cfg_dict = asdict(cfg)
    cfg_dict["hidden_sizes"] = list(cfg.hidden_sizes)
    net.provenance = {"train": cfg_dict, "rows": n}
    return net, TrainReport(initial, history, cfg_dict)


@dataclass
class Prediction:
    outputs: np.ndarray
    label: Optional[int] = None


def predict_batch(net: DenseNetwork, x) -> np.ndarray:
    xb, _ = _as_batch(net, x)
    return forward(net, net.standardize(xb))


def predict(net: DenseNetwork, row) -> Prediction:
    values = getattr(row, "values", row)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] != net.input_width:
        raise SchemaMismatchError(net.input_width, values.shape[-1])
    out = forward(net, net.standardize(values))
    if net.task.is_classification:
        return Prediction(out, int(np.argmax(out)))
    return Prediction(out)


# --- text format ----------------------------------------------------------------

def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps(net: DenseNetwork) -> str:
    lines = [f"{MAGIC} {FORMAT_VERSION}", f"task {net.task.kind} {net.task.n}"]
    if net.mean is not None:
        lines += [f"standardize {net.input_width}", _fmt(net.mean), _fmt(net.std)]
    for layer in net.layers:
        lines.append(f"layer {layer.n_in} {layer.n_out} {layer.activation.value}")
        lines.extend(_fmt(row) for row in layer.weights.tolist())
        lines.append(_fmt(layer.biases.tolist()))
    if net.provenance:
        lines.append("# provenance " + json.dumps(net.provenance, sort_keys=True))
    return "\n".join(lines) + "\n"


def save_text(net: DenseNetwork, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(net))


class _Lines:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0

    def next(self, what: str) -> tuple[int, str]:
        if self.pos >= len(self.lines):
            raise ParseError(f"unexpected end of file, expected {what}", self.pos + 1)
        self.pos += 1
        return self.pos, self.lines[self.pos - 1]

    def peek(self) -> Optional[str]:
        return self.lines[self.pos] if self.pos < len(self.lines) else None


def _numbers(lineno: int, text: str, count: int) -> list[float]:
    toks = text.split()
    if len(toks) != count:
        raise DimensionError(f"expected {count} values, found {len(toks)}", lineno)
    out = []
    for tok in toks:
        try:
            v = float(tok)
        except ValueError:
            raise ParseError(f"unparseable number {tok!r}", lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"non-finite value {tok!r}", lineno)
        out.append(v)
    return out


def _int(lineno: int, tok: str) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", lineno) from None
    if v <= 0:
        raise DimensionError(f"dimension must be positive, got {v}", lineno)
    return v


def loads(text: str) -> DenseNetwork:
    src = _Lines(text)
    no, line = src.next("header")
    head = line.split()
    if len(head) != 2 or head[0] != MAGIC:
        raise MagicError(f"not a {MAGIC} file (header {line!r})", no)
    if head[1] != FORMAT_VERSION:
        raise VersionError(f"file version {head[1]} but this loader reads {FORMAT_VERSION}", no)

    no, line = src.next("task line")
    toks = line.split()
    if len(toks) != 3 or toks[0] != "task" or toks[1] not in ("classification", "regression"):
        raise ParseError(f"malformed task line {line!r}", no)
    task = Task(toks[1], _int(no, toks[2]))

    mean = std = None
    if (src.peek() or "").startswith("standardize"):
        no, line = src.next("standardize line")
        toks = line.split()
        if len(toks) != 2:
            raise ParseError(f"malformed standardize line {line!r}", no)
        width = _int(no, toks[1])
        no, line = src.next("standardization means")
        mean = np.array(_numbers(no, line, width))
        no, line = src.next("standardization stds")
        std = np.array(_numbers(no, line, width))
        if np.any(std <= 0):
            raise ParseError("standardization std must be positive", no)

    layers: list[DenseLayer] = []
    provenance: dict = {}
    while src.peek() is not None:
        no, line = src.next("layer header")
        if line.startswith("#"):
            if line.startswith("# provenance "):
                try:
                    provenance = json.loads(line[len("# provenance "):])
                except json.JSONDecodeError:
                    raise ParseError("malformed provenance comment", no) from None
            continue
        if layers and src.lines[no - 2].startswith("#"):
            raise ParseError("layer after trailing comment", no)
        toks = line.split()
        if len(toks) != 4 or toks[0] != "layer":
            raise ParseError(f"malformed layer header {line!r}", no)
        n_in, n_out = _int(no, toks[1]), _int(no, toks[2])
        try:
            act = Activation(toks[3])
        except ValueError:
            raise ParseError(f"unknown activation {toks[3]!r}", no) from None
        expected_in = layers[-1].n_out if layers else (len(mean) if mean is not None else n_in)
        if n_in != expected_in:
            raise DimensionError(f"layer input {n_in} does not match preceding width {expected_in}", no)
        w = np.empty((n_out, n_in))
        for r in range(n_out):
            wno, wline = src.next(f"weight row {r}")
            w[r] = _numbers(wno, wline, n_in)
        bno, bline = src.next("bias row")
        b = np.array(_numbers(bno, bline, n_out))
        layers.append(DenseLayer(w, b, act))

    if not layers:
        raise ParseError("no layers", src.pos + 1)
    if layers[-1].n_out != task.n:
        raise DimensionError(f"final layer width {layers[-1].n_out} != task outputs {task.n}", src.pos)
    for i, layer in enumerate(layers[:-1]):
        if layer.activation is Activation.SOFTMAX:
            raise ParseError(f"softmax on hidden layer {i}", src.pos)
    return DenseNetwork(layers, task, mean, std, provenance)


def load_text(path: str | Path) -> DenseNetwork:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
