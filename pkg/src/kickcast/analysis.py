"""Evaluation: accuracy/error metrics, match statistics, permutation importance,
the ordering ablation grid and the observation-target rule."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset, build_datasets, split
from .labels import Category
from .neuralnet import (Activation, DenseNetwork, SchemaMismatchError, Task, TrainConfig,
                        predict_batch, train)
from .ordering import OrderingMethod
from .state_model import Flavor, TEAM_SIZE, WorldState
from .synthgen import KickEvent


# --- prediction targets ----------------------------------------------------------

@dataclass(frozen=True)
class Target:
    name: str
    columns: tuple[str, ...]
    kind: str  # "classification" or "regression"
    n: int  # classes or regression outputs
    model: str  # name of the trained target this one is evaluated with
    passes_only: bool = False

    @property
    def task(self) -> Task:
        return Task(self.kind, self.n)

    def encode(self, ds: Dataset) -> np.ndarray:
        if self.kind == "classification":
            y = ds.label(self.columns[0]).astype(np.int64)
            # unums 1..11 map to classes 0..10
            return y - 1 if self.columns[0] == "target_unum" else y
        return np.column_stack([ds.label(c) for c in self.columns])


TARGETS = {t.name: t for t in (
    Target("category", ("category",), "classification", 3, "category"),
    Target("unum", ("target_unum",), "classification", TEAM_SIZE, "unum"),
    Target("unum_in_passes", ("target_unum",), "classification", TEAM_SIZE, "unum", passes_only=True),
    Target("index", ("target_index",), "classification", TEAM_SIZE, "index"),
    Target("index_in_passes", ("target_index",), "classification", TEAM_SIZE, "index", passes_only=True),
    Target("description", ("description",), "classification", 6, "description"),
    Target("target_position", ("target_x", "target_y"), "regression", 2, "target_position"),
    Target("kick_angle", ("first_kick_angle",), "regression", 1, "kick_angle"),
    Target("kick_speed", ("first_kick_speed",), "regression", 1, "kick_speed"),
)}
TRAINABLE_TARGETS = tuple(name for name, t in TARGETS.items() if t.model == name)


def target(name: str) -> Target:
    try:
        return TARGETS[name]
    except KeyError:
        raise ValueError(f"unknown target {name!r}; valid: {', '.join(TARGETS)}") from None


# --- metrics --------------------------------------------------------------------

def classification_accuracy(predictions, labels) -> float:
    """Percent of rows whose predicted class matches; 2-D predictions are argmaxed."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.ndim == 2:
        p = p.argmax(axis=1)
    if len(p) != len(y):
        raise ValueError(f"length mismatch: {len(p)} predictions, {len(y)} labels")
    if len(p) == 0:
        raise ValueError("no rows to score")
    return 100.0 * float(np.count_nonzero(p == y)) / len(y)


def regression_error(predictions, labels) -> tuple[float, float]:
    """(MAE, RMSE); for multi-column targets the per-row error is the Euclidean distance."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions, {y.shape[0]} labels")
    if p.shape[0] == 0:
        raise ValueError("no rows to score")
    p, y = p.reshape(len(p), -1), y.reshape(len(y), -1)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape}, labels {y.shape}")
    diff = p - y
    err = np.sqrt((diff ** 2).sum(axis=1))
    return float(err.mean()), float(math.sqrt((err ** 2).mean()))


@dataclass(frozen=True)
class MatchRecord:
    our_goals: int
    their_goals: int

    def __post_init__(self):
        if self.our_goals < 0 or self.their_goals < 0:
            raise ValueError("goal counts must be non-negative")


def match_metrics(records: Sequence[MatchRecord]) -> dict[str, float]:
    """Win rate, expected win rate (a draw counts half a win) and average goals."""
    if not records:
        raise ValueError("no match records")
    n = len(records)
    wins = sum(r.our_goals > r.their_goals for r in records)
    draws = sum(r.our_goals == r.their_goals for r in records)
    return {
        "win_rate": 100.0 * wins / n,
        "expected_win_rate": 100.0 * (wins + 0.5 * draws) / n,
        "avg_goals_for": sum(r.our_goals for r in records) / n,
        "avg_goals_against": sum(r.their_goals for r in records) / n,
    }


# --- permutation importance -----------------------------------------------------

@dataclass
class ImportanceReport:
    columns: list[str]
    baseline: float
    mean_drop: list[float]
    std_drop: list[float]
    rank: list[int]
    metric: str

    def to_dict(self) -> dict:
        return asdict(self)

    def top(self, k: int = 20) -> list[tuple[str, float]]:
        order = np.argsort(self.rank)[:k]
        return [(self.columns[i], self.mean_drop[i]) for i in order]


def _score(net: DenseNetwork, out: np.ndarray, y: np.ndarray) -> float:
    if net.task.is_classification:
        return classification_accuracy(out, y)
    return -regression_error(out, y)[0]


def _head(net: DenseNetwork, h1: np.ndarray) -> np.ndarray:
    a = h1
    first = net.layers[0]
    if first.activation is Activation.RELU:
        a = np.maximum(a, 0.0)
    elif first.activation is Activation.SOFTMAX:
        e = np.exp(a - a.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    for layer in net.layers[1:]:
        a = a @ layer.weights.T + layer.biases
        if layer.activation is Activation.RELU:
            a = np.maximum(a, 0.0)
        elif layer.activation is Activation.SOFTMAX:
            e = np.exp(a - a.max(axis=1, keepdims=True))
            a = e / e.sum(axis=1, keepdims=True)
    return a


def permutation_importance(net: DenseNetwork, features: np.ndarray, y: np.ndarray,
                           repeats: int = 5, seed: int = 0,
                           columns: Optional[Sequence[str]] = None) -> ImportanceReport:
    """Drop in score when one input column is shuffled across rows.

    Classification scores are accuracy in percent; regression scores are the
    negated MAE, so a positive drop always means the column mattered. Only the
    first layer sees the shuffled column, so its pre-activation is updated by a
    rank-one correction instead of re-running the whole input product.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_width:
        raise SchemaMismatchError(net.input_width, x.shape[-1])
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    y = np.asarray(y)
    xs = net.standardize(x)
    first = net.layers[0]
    h1 = xs @ first.weights.T + first.biases
    baseline = _score(net, _head(net, h1), y)

    rng = np.random.default_rng(seed)
    width = x.shape[1]
    drops = np.zeros((width, repeats))
    for r in range(repeats):
        perms = [rng.permutation(len(x)) for _ in range(width)]
        for j in range(width):
            w = first.weights[:, j]
            if not np.any(w):
                continue
            delta = xs[perms[j], j] - xs[:, j]
            drops[j, r] = baseline - _score(net, _head(net, h1 + np.outer(delta, w)), y)
    mean = drops.mean(axis=1)
    std = drops.std(axis=1)
    order = sorted(range(width), key=lambda j: (-mean[j], j))
    rank = [0] * width
    for pos, j in enumerate(order, start=1):
        rank[j] = pos
    names = list(columns) if columns is not None else [f"col{j}" for j in range(width)]
    return ImportanceReport(names, baseline, mean.tolist(), std.tolist(), rank,
                            "accuracy" if net.task.is_classification else "neg_mae")


# --- ablation -------------------------------------------------------------------

@dataclass(frozen=True)
class AblationConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    train_fraction: float = 0.8
    split_seed: int = 0
    feature_flavor: Flavor = Flavor.NOISY


@dataclass
class Cell:
    kind: str  # "accuracy" or "mae"
    value: float
    rmse: Optional[float] = None
    n: int = 0


@dataclass
class AblationReport:
    targets: list[str]
    methods: list[str]
    cells: dict[tuple[str, str], Cell] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return all((t, m) in self.cells for t in self.targets for m in self.methods)

    def to_dict(self) -> dict:
        return {
            "targets": self.targets,
            "methods": self.methods,
            "cells": {t: {m: asdict(self.cells[(t, m)]) for m in self.methods if (t, m) in self.cells}
                      for t in self.targets},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_text(self) -> str:
        rows = [["target", "metric", *self.methods]]
        for t in self.targets:
            cells = [self.cells.get((t, m)) for m in self.methods]
            kind = next((c.kind for c in cells if c is not None), "")
            rows.append([t, kind] + ["-" if c is None else
                                     (f"{c.value:.2f}" if c.kind == "accuracy" else f"{c.value:.3f}")
                                     for c in cells])
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        return "\n".join("  ".join(cell.rjust(w) if i > 1 else cell.ljust(w)
                                   for i, (cell, w) in enumerate(zip(r, widths)))
                         for r in rows) + "\n"


def evaluate(net: DenseNetwork, ds: Dataset, tgt: Target) -> Cell:
    rows = np.arange(len(ds))
    if tgt.passes_only:
        rows = np.flatnonzero(ds.label("category") == int(Category.PASS))
        if rows.size == 0:
            return Cell("accuracy", float("nan"), n=0)
    x = ds.features[rows]
    y = tgt.encode(ds)[rows]
    out = predict_batch(net, x)
    if tgt.kind == "classification":
        return Cell("accuracy", classification_accuracy(out, y), n=len(rows))
    mae, rmse = regression_error(out, y)
    return Cell("mae", mae, rmse, n=len(rows))


def train_target(ds: Dataset, tgt: Target, cfg: TrainConfig):
    return train(ds.features, tgt.encode(ds), tgt.task, cfg)


def run_ablation(events: Sequence[KickEvent], targets: Sequence[str],
                 methods: Sequence[OrderingMethod], cfg: AblationConfig = AblationConfig()) -> AblationReport:
    """Train one model per (trained target, method) and score every requested cell."""
    tgts = [target(t) for t in targets]
    report = AblationReport([t.name for t in tgts], [m.value for m in methods])
    datasets = build_datasets(events, methods, cfg.feature_flavor)
    for m in methods:
        models: dict[str, DenseNetwork] = {}
        for tgt in tgts:
            try:
                train_ds, test_ds = split(datasets[m], cfg.train_fraction, cfg.split_seed)
                if tgt.model not in models:
                    models[tgt.model], _ = train_target(train_ds, TARGETS[tgt.model], cfg.train)
                report.cells[(tgt.name, m.value)] = evaluate(models[tgt.model], test_ds, tgt)
            except Exception as exc:
                raise RuntimeError(f"ablation cell ({tgt.name}, {m.value}) failed: {exc}") from exc
    return report


# --- view control ---------------------------------------------------------------

def choose_observation_target(probabilities, ws: WorldState, staleness_threshold: int = 0) -> Optional[int]:
    """Unum of the likely receiver if our information about it is stale, else None.

    `probabilities[i]` is the predicted probability that teammate unum i+1
    receives the ball.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    if p.shape != (TEAM_SIZE,):
        raise ValueError(f"expected {TEAM_SIZE} probabilities, got shape {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and non-negative")
    unum = int(np.argmax(p)) + 1
    try:
        mate = ws.teammate(unum)
    except KeyError:
        return None
    return unum if mate.pos_count > staleness_threshold else None
