"""kickcast command line: generate -> extract -> train -> eval/importance, plus ablate and metrics.

Exit codes: 0 success, 2 usage, 3 I/O or file format, 4 numeric failure,
5 schema mismatch between a model and a dataset.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (TARGETS, TRAINABLE_TARGETS, AblationConfig, MatchRecord, evaluate,
                       match_metrics, permutation_importance, run_ablation, target, train_target)
from .dataset import DatasetError, build_datasets, read_csv, split, write_csv
from .neuralnet import (ModelFormatError, NonFiniteLossError, SchemaMismatchError, TrainConfig,
                        load_text, save_text)
from .ordering import ALL_METHODS, OrderingMethod
from .state_model import Flavor, NoiseConfig
from .synthgen import EpisodeConfig, EventFormatError, generate_events, read_event_meta, read_events, write_events

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_SCHEMA = 5


class UsageError(Exception):
    pass


def _method_list(text: str) -> list[OrderingMethod]:
    if text.strip().lower() == "all":
        return list(ALL_METHODS)
    try:
        return [OrderingMethod.parse(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _target_list(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    for n in names:
        if n not in TARGETS:
            raise argparse.ArgumentTypeError(f"unknown target {n!r}; valid: {', '.join(TARGETS)}")
    return names


def _hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--hidden expects comma-separated integers, got {text!r}") from None
    if not sizes or min(sizes) <= 0:
        raise argparse.ArgumentTypeError("--hidden sizes must be positive")
    return sizes


def _load_noise(path: str | None, seed: int) -> NoiseConfig:
    if path is None:
        return NoiseConfig(seed=seed)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--noise {path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise UsageError(f"--noise {path}: cannot read ({exc.strerror})") from None
    if not isinstance(raw, dict):
        raise UsageError(f"--noise {path}: expected a JSON object")
    raw.setdefault("seed", seed)
    try:
        return NoiseConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--noise {path}: {exc}") from None


def _write_json(path: str | Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _info(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _train_config(args) -> TrainConfig:
    return TrainConfig(hidden_sizes=args.hidden, learning_rate=args.lr, momentum=args.momentum,
                       batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)


def cmd_generate(args) -> int:
    noise = _load_noise(args.noise, args.seed)
    cfg = EpisodeConfig(n_events=args.events, seed=args.seed, noise=noise)
    events = generate_events(cfg)
    meta = {"config": {"episode": asdict(cfg), "command": "generate"}}
    path = write_events(args.out, events, meta)
    _info(args, f"wrote {len(events)} events to {path}")
    return 0


def cmd_extract(args) -> int:
    events = read_events(args.inp)
    try:
        source = read_event_meta(args.inp)
    except OSError:
        source = {}
    flavor = Flavor(args.flavor)
    seed = source.get("config", {}).get("episode", {}).get("seed")
    prov = {"source": str(args.inp), "seed": seed}
    datasets = build_datasets(events, args.sort, flavor, prov)
    out = Path(args.out)
    many = len(args.sort) > 1
    resolved = {"command": "extract", "in": str(args.inp), "flavor": flavor.value,
                "sort": [m.value for m in args.sort]}
    for m, ds in datasets.items():
        path = out.with_name(f"{out.stem}_{m.value}{out.suffix or '.csv'}") if many else out
        write_csv(ds, path, {"config": resolved})
        _info(args, f"wrote {len(ds)} rows ({m.value}) to {path}")
    return 0


def cmd_split(args) -> int:
    ds = read_csv(args.data)
    tr, te = split(ds, args.fraction, args.seed)
    stem = Path(args.data)
    for part, name in ((tr, "train"), (te, "test")):
        path = stem.with_name(f"{stem.stem}_{name}{stem.suffix}")
        write_csv(part, path, {"config": {"command": "split", "fraction": args.fraction,
                                          "seed": args.seed, "part": name}})
        _info(args, f"wrote {len(part)} rows to {path}")
    return 0


def cmd_train(args) -> int:
    ds = read_csv(args.data)
    tgt = target(args.target)
    cfg = _train_config(args)
    net, report = train_target(ds, tgt, cfg)
    net.provenance.update({"target": tgt.name, "method": ds.method.value})
    save_text(net, args.out)
    rep = {"target": tgt.name, "task": {"kind": tgt.kind, "n": tgt.n}, "data": str(args.data),
           "rows": len(ds), "method": ds.method.value, **report.to_dict()}
    out = Path(args.out)
    _write_json(out.with_name(out.stem + ".report.json"), rep)
    _info(args, f"trained {tgt.name} on {len(ds)} rows; final loss {report.epoch_losses[-1] if report.epoch_losses else report.initial_loss:.6g}")
    return 0


def _check_pair(net, ds, tgt) -> None:
    if net.input_width != ds.schema.width:
        raise SchemaMismatchError(net.input_width, ds.schema.width)
    if net.task != tgt.task:
        raise UsageError(f"model task {net.task.kind} {net.task.n} does not fit target {tgt.name}")


def cmd_eval(args) -> int:
    net = load_text(args.model)
    ds = read_csv(args.data)
    tgt = target(args.target)
    _check_pair(net, ds, tgt)
    cell = evaluate(net, ds, tgt)
    result = {"target": tgt.name, "model": str(args.model), "data": str(args.data),
              "metric": cell.kind, "value": cell.value, "rmse": cell.rmse, "rows": cell.n}
    if args.out:
        _write_json(args.out, result)
    _info(args, f"{tgt.name} {cell.kind} {cell.value:.4f}" + (f" rmse {cell.rmse:.4f}" if cell.rmse is not None else ""))
    return 0


def cmd_importance(args) -> int:
    net = load_text(args.model)
    ds = read_csv(args.data)
    tgt = target(args.target)
    _check_pair(net, ds, tgt)
    rep = permutation_importance(net, ds.features, tgt.encode(ds), args.repeats, args.seed,
                                 ds.schema.column_names)
    out = {"target": tgt.name, "repeats": args.repeats, "seed": args.seed, **rep.to_dict()}
    if args.out:
        _write_json(args.out, out)
    for name, drop in rep.top(args.top):
        _info(args, f"{name:40s} {drop:8.3f}")
    return 0


def cmd_ablate(args) -> int:
    events = read_events(args.events)
    cfg = AblationConfig(train=_train_config(args), train_fraction=args.train_fraction,
                         split_seed=args.seed, feature_flavor=Flavor(args.flavor))
    report = run_ablation(events, args.targets, args.methods, cfg)
    text = report.to_text()
    if args.out:
        out = Path(args.out)
        doc = report.to_dict()
        doc["config"] = {"events": str(args.events), "train": asdict(cfg.train),
                         "train_fraction": cfg.train_fraction, "split_seed": cfg.split_seed,
                         "flavor": cfg.feature_flavor.value}
        doc["config"]["train"]["hidden_sizes"] = list(cfg.train.hidden_sizes)
        _write_json(out, doc)
        with open(out.with_suffix(".txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    _info(args, text.rstrip("\n"))
    return 0


def _read_scores(path: str) -> list[MatchRecord]:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}:{lineno}: expected two columns, got {len(row)}")
            try:
                records.append(MatchRecord(int(row[0]), int(row[1])))
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DatasetError(f"{path}:{lineno}: goal counts must be non-negative integers") from None
    return records


def cmd_metrics(args) -> int:
    records = _read_scores(args.scores)
    if not records:
        raise UsageError(f"{args.scores}: no match records")
    m = match_metrics(records)
    if args.out:
        _write_json(args.out, {"matches": len(records), **m})
    print(f"win_rate {m['win_rate']:g}")
    print(f"expected_win_rate {m['expected_win_rate']:g}")
    print(f"avg_goals_for {m['avg_goals_for']:g}")
    print(f"avg_goals_against {m['avg_goals_against']:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--hidden", type=_hidden, default=(128, 128), help="hidden sizes, e.g. 128,128")
    training.add_argument("--epochs", type=int, default=30)
    training.add_argument("--lr", type=float, default=0.01)
    training.add_argument("--momentum", type=float, default=0.9)
    training.add_argument("--batch-size", type=int, default=64)

    methods = ", ".join(m.value for m in ALL_METHODS)
    p = argparse.ArgumentParser(prog="kickcast", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kickcast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate synthetic kick events")
    g.add_argument("--events", type=int, required=True)
    g.add_argument("--noise", help="JSON file with NoiseConfig fields")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("extract", parents=[common], help="build dataset CSVs from an event directory")
    e.add_argument("--in", dest="inp", required=True, help="event directory")
    e.add_argument("--sort", type=_method_list, required=True, help=f"one of {methods}, or all")
    e.add_argument("--flavor", choices=("full", "noisy"), default="noisy")
    e.add_argument("--out", required=True, help="output CSV (suffixed per method with --sort all)")
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("split", parents=[common], help="seeded train/test split of a dataset CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--fraction", type=float, default=0.8)
    s.set_defaults(func=cmd_split)

    t = sub.add_parser("train", parents=[common, training], help="train one predictor")
    t.add_argument("--data", required=True)
    t.add_argument("--target", required=True, choices=TRAINABLE_TARGETS)
    t.add_argument("--out", required=True, help="model file")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("eval", parents=[common], help="score a model on a dataset")
    v.add_argument("--model", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--target", required=True, choices=tuple(TARGETS))
    v.add_argument("--out")
    v.set_defaults(func=cmd_eval)

    i = sub.add_parser("importance", parents=[common], help="permutation feature importance")
    i.add_argument("--model", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--target", required=True, choices=tuple(TARGETS))
    i.add_argument("--repeats", type=int, default=5)
    i.add_argument("--top", type=int, default=20)
    i.add_argument("--out")
    i.set_defaults(func=cmd_importance)

    a = sub.add_parser("ablate", parents=[common, training], help="ordering x target accuracy grid")
    a.add_argument("--events", required=True, help="event directory")
    a.add_argument("--methods", type=_method_list, default=list(ALL_METHODS))
    a.add_argument("--targets", type=_target_list, default=["category", "unum", "index"])
    a.add_argument("--flavor", choices=("full", "noisy"), default="noisy")
    a.add_argument("--train-fraction", type=float, default=0.8)
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablate)

    m = sub.add_parser("metrics", parents=[common], help="match statistics from a score CSV")
    m.add_argument("--scores", required=True, help="CSV of 'our_goals,their_goals' rows")
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"kickcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaMismatchError as exc:
        print(f"kickcast: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NonFiniteLossError as exc:
        print(f"kickcast: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, DatasetError, ModelFormatError, EventFormatError) as exc:
        print(f"kickcast: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"kickcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
