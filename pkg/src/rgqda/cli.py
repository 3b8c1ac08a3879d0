"""Command-line entry point: fit, predict, simulate, real-bench, summarize.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
failure.  Stochastic subcommands require an explicit --seed; there is no
wall-clock default anywhere.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import classifier, data_io, simulate
from .errors import (
    ClassTooSmall,
    ConfigError,
    DegenerateData,
    EmptyDataset,
    MissingColumn,
    NotPositiveDefinite,
    ParseError,
    RgqdaError,
    TooFewObservations,
    UnsupportedDesign,
)

USAGE_ERROR = 2
DATA_ERROR = 3
NUMERIC_ERROR = 4

_DATA_ERRORS = (ParseError, MissingColumn, ClassTooSmall, EmptyDataset, FileNotFoundError)
_NUMERIC_ERRORS = (DegenerateData, NotPositiveDefinite, TooFewObservations)


def preset_names() -> list[str]:
    files = resources.files("rgqda").joinpath("presets")
    return sorted(f.name[: -len(".json")] for f in files.iterdir() if f.name.endswith(".json"))


def load_preset(name: str) -> simulate.ExperimentConfig:
    path = resources.files("rgqda").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; available: {preset_names()}")
    return simulate.config_from_json(path.read_text(), name=name)


def _parse_columns(text: str | None):
    if text is None:
        return None
    cols = []
    for item in text.split(","):
        item = item.strip()
        cols.append(int(item) if item.lstrip("-").isdigit() else item)
    return cols


def _parse_estimators(text: str | None):
    if text is None:
        return None
    return tuple(simulate.parse_estimator(item.strip()) for item in text.split(","))


def _load_dataset(args) -> data_io.LabeledDataset:
    return data_io.load_csv(
        args.data,
        label_column=args.label_column,
        feature_columns=_parse_columns(args.feature_columns),
        drop_constant_columns=args.drop_constant_columns,
    )


def cmd_fit(args) -> int:
    data = _load_dataset(args)
    spec = simulate.parse_estimator(args.estimator, "estimator")
    rng = np.random.default_rng(args.seed)
    model = classifier.fit_gqda(data.features, list(data.labels), spec, rng)
    resub = classifier.misclassification_error(model, data.features, list(data.labels))
    Path(args.out).write_text(classifier.model_to_json(model, spec) + "\n")
    print(f"c_star={model.c_star!r} resubstitution_error={resub!r}")
    return 0


def cmd_predict(args) -> int:
    model = classifier.model_from_json(Path(args.model).read_text())
    data = data_io.load_csv(
        args.data,
        label_column=args.label_column if args.label_column is not None else 0,
        feature_columns=_parse_columns(args.feature_columns),
        drop_constant_columns=args.drop_constant_columns,
    ) if args.label_column is not None else None
    if data is None:
        # No label column: every column is a feature.
        import csv as _csv

        with open(args.data, newline="") as fh:
            reader = _csv.reader(fh)
            header = next(reader)
            rows = []
            for row_num, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ParseError(row_num, "<row>", str(exc)) from None
        features = np.array(rows, dtype=float)
        labels = None
    else:
        features = data.features
        labels = list(data.labels)
    if features.shape[1] != model.dim:
        raise DegenerateData(
            f"model expects {model.dim} features, data has {features.shape[1]}"
        )
    idx = classifier.predict_indices(model, features)
    marg = classifier.margins(model, features)
    with open(args.out, "w") as fh:
        cols = ["row", "predicted"] + [f"margin_{c}" for c in model.classes]
        fh.write(",".join(cols) + "\n")
        for i in range(features.shape[0]):
            vals = [str(i + 1), str(model.classes[idx[i]])]
            vals += [repr(float(v)) for v in marg[i]]
            fh.write(",".join(vals) + "\n")
    if labels is not None:
        me = classifier.misclassification_error(model, features, labels)
        print(f"me_percent={100.0 * me!r}")
    return 0


def cmd_simulate(args) -> int:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("", "exactly one of --config or --preset is required")
    if args.preset is not None:
        config = load_preset(args.preset)
    else:
        config = simulate.config_from_json(Path(args.config).read_text(), name=Path(args.config).stem)
    config = simulate.with_overrides(
        config,
        seed=args.seed,
        replications=args.replications,
        estimators=_parse_estimators(args.estimators),
        compute_c_test=True if args.table1 else None,
    )
    if config.seed is None:
        raise ConfigError("seed", "--seed is required (configs may also set it)")
    report = simulate.run_experiment(config, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    simulate.write_report_csv(report, out / "report.csv")
    if config.compute_c_test:
        simulate.write_report_csv(report, out / "table1.csv", include_c_test=True)
    simulate.write_summary_json(
        report, out / "summary.json", extra={"name": config.name, "seed": config.seed}
    )
    for label, entry in report.summary().items():
        mean = entry["mean_me_percent"]
        shown = "n/a" if mean is None else f"{mean:.3f}"
        print(f"{label}: mean ME% {shown} ({entry['failures']} failures)")
    return 0


def cmd_real_bench(args) -> int:
    data = _load_dataset(args)
    estimators = _parse_estimators(args.estimators) or tuple(
        simulate.parse_estimator(k) for k in simulate.KINDS
    )
    report = data_io.run_real_experiment(
        data,
        estimators,
        replications=args.replications,
        train_fraction=args.train_fraction,
        flip_fraction=args.flip_fraction,
        seed=args.seed,
        jobs=args.jobs,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    simulate.write_report_csv(report, out / "report.csv")
    simulate.write_summary_json(report, out / "summary.json", extra={"seed": args.seed})
    for label, entry in report.summary().items():
        mean = entry["mean_me_percent"]
        shown = "n/a" if mean is None else f"{mean:.3f}"
        print(f"{label}: mean ME% {shown} ({entry['failures']} failures)")
    return 0


def cmd_summarize(args) -> int:
    report = simulate.report_from_csv(args.report)
    lines = ["| estimator | mean ME% (SD) | failures |", "| --- | --- | --- |"]
    for label in report.estimator_labels:
        me = report.values(label)
        if me.size:
            sd = me.std(ddof=1) if me.size > 1 else 0.0
            cell = f"{me.mean():.3f} ({sd:.3f})"
        else:
            cell = "n/a"
        lines.append(f"| {label} | {cell} | {report.failures(label)} |")
    text = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgqda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p, label_required=True):
        p.add_argument("--data", required=True, help="input CSV with a header row")
        p.add_argument("--label-column", required=label_required, default=None)
        p.add_argument("--feature-columns", default=None, help="comma list of names or indices")
        p.add_argument("--drop-constant-columns", action="store_true")

    p = sub.add_parser("fit", help="fit a model on a labeled CSV")
    add_data_flags(p)
    p.add_argument("--estimator", default="classical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON output path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict labels with a saved model")
    p.add_argument("--model", required=True)
    add_data_flags(p, label_required=False)
    p.add_argument("--out", required=True, help="predictions CSV output path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="run a replicated simulation study")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--preset", default=None, help=f"one of {preset_names()}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--estimators", default=None, help="comma list, e.g. classical,mcd")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--table1", action="store_true",
                   help="also select the threshold on the test set (diagnostic)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("real-bench", help="replicated benchmark on a real CSV")
    add_data_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replications", type=int, default=500)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--flip-fraction", type=float, default=0.1)
    p.add_argument("--estimators", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_real_bench)

    p = sub.add_parser("summarize", help="mean (SD) table from a report CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except _DATA_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DATA_ERROR
    except _NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except (UnsupportedDesign, RgqdaError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
