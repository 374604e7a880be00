"""Feature/label datasets, their CSV + sidecar format, and seeded splits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .features import SCHEMA_VERSION, FeatureSchema, StateFeatures, feature_schema, team_orderings
from .labels import LABEL_NAMES, Category, Description, generate_labels
from .ordering import OrderingMethod
from .state_model import Flavor
from .synthgen import KickEvent

LABEL_LEGEND = {
    "category": {c.name: int(c) for c in Category},
    "description": {d.name: int(d) for d in Description},
}
_INT_LABELS = frozenset({"category", "target_unum", "target_index", "description"})


class DatasetError(ValueError):
    pass


class WidthMismatchError(DatasetError):
    pass


class NumberFormatError(DatasetError):
    pass


class MissingSidecarError(DatasetError):
    pass


class SchemaVersionError(DatasetError):
    pass


@dataclass
class Dataset:
    schema: FeatureSchema
    method: OrderingMethod
    features: np.ndarray  # (n, schema.width)
    labels: np.ndarray  # (n, len(LABEL_NAMES))
    event_ids: list[str]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, self.schema.width)
        self.labels = np.asarray(self.labels, dtype=np.float64).reshape(-1, len(LABEL_NAMES))
        if not len(self.features) == len(self.labels) == len(self.event_ids):
            raise DatasetError("features, labels and event ids differ in length")

    def __len__(self) -> int:
        return len(self.features)

    def label(self, name: str) -> np.ndarray:
        return self.labels[:, LABEL_NAMES.index(name)]

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.schema, self.method, self.features[idx], self.labels[idx],
                       [self.event_ids[i] for i in idx], dict(self.provenance))

    @property
    def column_names(self) -> tuple[str, ...]:
        return ("event_id",) + self.schema.column_names + LABEL_NAMES


def event_rows(ev: KickEvent, flavor: Flavor, methods: Iterable[OrderingMethod]):
    """Yield (method, feature vector, label vector) for one event under each method."""
    state = ev.fws if flavor is Flavor.FULL else ev.ws
    sf = StateFeatures(state)
    for method in methods:
        tm_order, _ = team_orderings(state, method)
        lab = generate_labels(ev.action, tm_order, ev.fws)
        yield method, sf.layout(method), lab.values()


def build_datasets(events: Sequence[KickEvent], methods: Sequence[OrderingMethod],
                   feature_flavor: Flavor, provenance: dict | None = None) -> dict[OrderingMethod, Dataset]:
    """One dataset per method; per-player blocks are computed once per event."""
    if not events:
        raise DatasetError("no events")
    methods = list(methods)
    feats = {m: [] for m in methods}
    labs = {m: [] for m in methods}
    for ev in events:
        for m, f, lab in event_rows(ev, feature_flavor, methods):
            feats[m].append(f)
            labs[m].append(lab)
    ids = [ev.event_id for ev in events]
    prov = {"flavor": feature_flavor.value, **(provenance or {})}
    return {m: Dataset(feature_schema(), m, np.vstack(feats[m]), np.array(labs[m]), ids, dict(prov))
            for m in methods}


def build_dataset(events: Sequence[KickEvent], method: OrderingMethod, feature_flavor: Flavor,
                  provenance: dict | None = None) -> Dataset:
    return build_datasets(events, [method], feature_flavor, provenance)[method]


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(ds)
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} rows at {train_fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _cell(name: str, v: float) -> str:
    if name in _INT_LABELS:
        return str(int(v))
    return repr(float(v))


def write_csv(ds: Dataset, path: str | Path, extra_meta: dict | None = None) -> None:
    if len(ds) == 0:
        raise DatasetError("refusing to write an empty dataset")
    path = Path(path)
    names = ds.column_names
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for eid, f, lab in zip(ds.event_ids, ds.features.tolist(), ds.labels.tolist()):
            cells = [eid] + [repr(v) for v in f] + [_cell(n, v) for n, v in zip(LABEL_NAMES, lab)]
            fh.write(",".join(cells) + "\n")
    meta = {
        "schema_version": ds.schema.version,
        "method": ds.method.value,
        "rows": len(ds),
        "feature_width": ds.schema.width,
        "label_columns": list(LABEL_NAMES),
        "label_legend": LABEL_LEGEND,
        "provenance": ds.provenance,
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(sidecar_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv(path: str | Path) -> Dataset:
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise MissingSidecarError(f"missing sidecar {side}")
    with open(side, encoding="utf-8") as fh:
        meta = json.load(fh)
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: schema version {version}, reader supports {SCHEMA_VERSION}")
    schema = feature_schema(version)
    method = OrderingMethod.parse(meta["method"])
    expected = ("event_id",) + schema.column_names + LABEL_NAMES

    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if len(header) != len(expected):
            raise WidthMismatchError(f"{path}: header has {len(header)} columns, expected {len(expected)}")
        if tuple(header) != expected:
            bad = next(i for i, (a, b) in enumerate(zip(header, expected)) if a != b)
            raise WidthMismatchError(f"{path}: column {bad} is {header[bad]!r}, expected {expected[bad]!r}")
        ids, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(expected):
                raise WidthMismatchError(f"{path}:{lineno}: {len(cells)} cells, expected {len(expected)}")
            try:
                rows.append([float(c) for c in cells[1:]])
            except ValueError as exc:
                raise NumberFormatError(f"{path}:{lineno}: {exc}") from None
            ids.append(cells[0])
    if not rows:
        raise DatasetError(f"{path}: no rows")
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumberFormatError(f"{path}: non-finite value")
    w = schema.width
    return Dataset(schema, method, arr[:, :w], arr[:, w:], ids, meta.get("provenance", {}))
