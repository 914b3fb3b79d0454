"""Operator-facing command line.

Subcommands: ``gen`` (synthetic corpus), ``train``, ``eval`` (model
comparison), ``scan`` (bulk KPI export classification) and ``predict``
(one series from the command line).

Exit codes: 0 ok, 2 usage error, 3 I/O failure, 4 malformed input data,
5 checkpoint error.

An optional config file (``key = value`` lines, ``#`` comments) can override
generator/model/training fields; explicit command-line flags win over the
file.  Unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (
    BadCheckpoint,
    BadSpec,
    KpiScanError,
    MalformedInput,
    TooFewPerClass,
    TooShort,
    UnsupportedVersion,
)
from .labels import LABEL_NAMES
from .metrics import compare, evaluate, write_class_csv
from .model import Model, ModelConfig, TrainConfig, train
from .scan import scan_file, write_report_csv
from .series import normalize_series, resample_to_length
from .synth import GeneratorSpec, generate_corpus, read_jsonl, split, write_jsonl

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_CHECKPOINT = 5

TEST_FRACTION = 0.2


class UsageError(Exception):
    """Bad flag/config values detected after argparse."""


# -- config file ------------------------------------------------------------

def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip()] = value.strip()
    return out


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_conv_blocks(raw: str) -> tuple[tuple[int, int, int], ...]:
    """Format: 'filters x kernel x pool' blocks joined by commas, e.g. 16x5x2,32x5x2."""
    blocks = []
    for part in raw.split(","):
        dims = part.strip().split("x")
        if len(dims) != 3:
            raise ValueError(f"conv block must be FxKxP, got {part!r}")
        blocks.append(tuple(int(d) for d in dims))
    return tuple(blocks)


def _parse_frac_range(raw: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise ValueError(f"range must be 'lo:hi', got {raw!r}")
    return float(parts[0]), float(parts[1])


_SPECIAL_PARSERS = {
    "conv_blocks": _parse_conv_blocks,
    "changepoint_frac_range": _parse_frac_range,
}


def coerce_overrides(cls, values: dict[str, str]) -> dict:
    """Convert raw config strings to the dataclass field types of ``cls``."""
    by_name = {f.name: f for f in dataclasses.fields(cls)}
    out = {}
    for key, raw in values.items():
        f = by_name[key]
        try:
            if key in _SPECIAL_PARSERS:
                out[key] = _SPECIAL_PARSERS[key](raw)
            elif f.type in ("int", int):
                out[key] = int(raw)
            elif f.type in ("float", float):
                out[key] = float(raw)
            elif f.type in ("bool", bool):
                out[key] = _parse_bool(raw)
            else:
                out[key] = raw
        except ValueError as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
    return out


def _partition_keys(values: dict[str, str], *classes) -> list[dict[str, str]]:
    """Split config keys among dataclasses; unknown keys are rejected."""
    field_sets = [{f.name for f in dataclasses.fields(c)} for c in classes]
    buckets: list[dict[str, str]] = [{} for _ in classes]
    for key, raw in values.items():
        for bucket, names in zip(buckets, field_sets):
            if key in names:
                bucket[key] = raw
                break
        else:
            known = sorted(set().union(*field_sets))
            raise UsageError(f"unknown config key {key!r} (known: {', '.join(known)})")
    return buckets


# -- subcommands --------------------------------------------------------------

def cmd_gen(args) -> int:
    overrides = read_config_file(args.config) if args.config else {}
    (spec_raw,) = _partition_keys(overrides, GeneratorSpec)
    kwargs = coerce_overrides(GeneratorSpec, spec_raw)
    if args.seed is not None:
        kwargs["seed"] = args.seed
    else:
        kwargs.setdefault("seed", 0)
    try:
        spec = GeneratorSpec(**kwargs)
        dataset = generate_corpus(args.per_class, spec, args.len)
    except BadSpec as exc:
        raise UsageError(str(exc)) from exc
    write_jsonl(dataset, args.out)
    print(f"wrote {len(dataset)} examples to {args.out}")
    for name, count in zip(LABEL_NAMES, dataset.class_counts):
        print(f"  {name}: {count}")
    return EXIT_OK


def _train_configs(args) -> tuple[dict, dict]:
    overrides = read_config_file(args.config) if args.config else {}
    model_raw, train_raw = _partition_keys(overrides, ModelConfig, TrainConfig)
    model_kwargs = coerce_overrides(ModelConfig, model_raw)
    train_kwargs = coerce_overrides(TrainConfig, train_raw)
    if args.arch is not None:
        model_kwargs["arch"] = args.arch
    for flag, key in (("epochs", "epochs"), ("lr", "lr"), ("batch", "batch_size"),
                      ("seed", "seed")):
        value = getattr(args, flag)
        if value is not None:
            train_kwargs[key] = value
    return model_kwargs, train_kwargs


def cmd_train(args) -> int:
    model_kwargs, train_kwargs = _train_configs(args)
    dataset = read_jsonl(args.data)
    if len(dataset) == 0:
        raise MalformedInput(f"dataset {args.data} is empty")
    feature_len = dataset.examples[0].features.size
    if model_kwargs.get("input_length", feature_len) != feature_len:
        raise UsageError(
            f"config input_length {model_kwargs['input_length']} does not match "
            f"the dataset feature length {feature_len}"
        )
    model_kwargs["input_length"] = feature_len
    try:
        config = ModelConfig(**model_kwargs)
        tc = TrainConfig(**train_kwargs)
    except (KpiScanError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    train_set, test_set = split(dataset, TEST_FRACTION, tc.seed)
    model = Model(config, seed=tc.seed)
    model, history = train(model, train_set, test_set, tc)
    save_checkpoint(model, args.out)
    if args.history:
        history.write_csv(args.history)
    last = history.records[-1]
    print(f"trained {config.arch} for {tc.epochs} epochs on {len(train_set)} examples")
    print(f"final train loss {last.train_loss:.4f} acc {last.train_acc:.4f}")
    print(f"final test  loss {last.test_loss:.4f} acc {last.test_acc:.4f}")
    print(f"checkpoint written to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    models: list[tuple[str, Model]] = []
    seen: dict[str, int] = {}
    for path in args.model:
        model = load_checkpoint(path)
        name = Path(path).stem
        seen[name] = seen.get(name, 0) + 1
        if seen[name] > 1:
            name = f"{name}#{seen[name]}"
        models.append((name, model))
    lengths = {m.config.input_length for _, m in models}
    if len(lengths) > 1:
        raise BadCheckpoint(f"checkpoints disagree on input length: {sorted(lengths)}")
    dataset = read_jsonl(args.data)
    if len(dataset) == 0:
        raise MalformedInput(f"dataset {args.data} is empty")
    reports = {name: evaluate(model, dataset) for name, model in models}
    table = compare(reports)
    print(table.render())
    if args.report:
        import json

        report_path = Path(args.report)
        doc = {
            "comparison": table.to_dict(),
            "models": {name: rep.to_dict() for name, rep in reports.items()},
        }
        with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, allow_nan=False)
            fh.write("\n")
        for name, rep in reports.items():
            write_class_csv(rep, report_path.with_name(f"{report_path.stem}_{name}.csv"))
        print(f"report written to {args.report}")
    return EXIT_OK


def cmd_scan(args) -> int:
    model = load_checkpoint(args.model)
    report = scan_file(model, args.input, min_len=args.min_len, threads=args.threads)
    write_report_csv(report, args.out)
    for line in report.summary_lines():
        print(line)
    return EXIT_OK


def cmd_predict(args) -> int:
    tokens = [tok for tok in args.series.split(",") if tok.strip()]
    try:
        values = np.array([float(tok) for tok in tokens])
    except ValueError as exc:
        raise UsageError(f"series must be comma-separated numbers: {exc}") from exc
    if values.size < 4:
        raise UsageError(f"need at least 4 values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise UsageError("series contains non-finite values")
    model = load_checkpoint(args.model)
    features = normalize_series(resample_to_length(values, model.config.input_length))
    label, probs = model.predict(features)
    print(label.name)
    for name, p in zip(LABEL_NAMES, probs):
        print(f"  {name}: {float(p):.6f}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kpiscan",
        description="Classify cellular-cell KPI time series into 8 traffic-behavior classes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled synthetic corpus (JSON-lines)")
    p.add_argument("--per-class", type=int, default=250, dest="per_class",
                   help="examples per class (default 250, i.e. 2000 total)")
    p.add_argument("--len", type=int, default=96, help="feature vector length (default 96)")
    p.add_argument("--seed", type=int, default=None, help="corpus seed (default 0)")
    p.add_argument("--out", required=True, help="output dataset path (JSON-lines)")
    p.add_argument("--config", default=None, help="config file with GeneratorSpec overrides")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a classifier on a dataset file")
    p.add_argument("--data", required=True, help="JSON-lines dataset path")
    p.add_argument("--arch", choices=("rcnn", "cnn"), default=None,
                   help="architecture (default rcnn)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--history", default=None, help="per-epoch history CSV path")
    p.add_argument("--config", default=None,
                   help="config file with ModelConfig/TrainConfig overrides")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one or more checkpoints on a dataset")
    p.add_argument("--model", action="append", required=True,
                   help="checkpoint path (repeatable)")
    p.add_argument("--data", required=True, help="JSON-lines dataset path")
    p.add_argument("--report", default=None, help="comparison report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("scan", help="classify every cell of a KPI export CSV")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--input", required=True, help="KPI CSV (header cell_id,t,value)")
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--min-len", type=int, default=4, dest="min_len",
                   help="cells shorter than this are skipped (default 4)")
    p.add_argument("--threads", type=int, default=1, help="prediction worker threads")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("predict", help="classify one series given on the command line")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--series", required=True, help="comma-separated values, at least 4")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help (0) and usage errors (2)
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TooShort, BadSpec) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MalformedInput, TooFewPerClass) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BadCheckpoint, UnsupportedVersion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KpiScanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
