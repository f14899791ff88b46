"""Command-line front end: ``relkit fit | assess | evaluate | simulate``.

Exit codes: 0 success, 2 configuration error, 3 schema mismatch,
4 acceptance check failed (``simulate --check``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import load_bundle, save_bundle
from .config import load_run_config, reliability_from_dict
from .data import Schema, load_csv, read_header, write_csv
from .errors import ConfigError, ReliabilityError, SchemaError
from .harness import SimSpec, default_experiment_config, run_experiment
from .metrics import METRIC_NAMES
from .pipeline import assess, evaluate, fit_reliability

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCHEMA = 3
EXIT_CHECK = 4

OOD_RATE_MIN = 0.70


def _require_columns(path, header, wanted):
    for field, col in wanted:
        if col and col not in header:
            raise ConfigError(f"{field}: column {col!r} not found in {path}")


def cmd_fit(args):
    cfg = load_run_config(args.config, seed_override=args.seed)
    dc = cfg.data
    header = read_header(dc.train)
    _require_columns(dc.train, header, [("data.label", dc.label), ("data.prediction", dc.prediction)])
    roles = {dc.label, dc.prediction, dc.score}
    features = dc.features if dc.features is not None else tuple(c for c in header if c not in roles)
    _require_columns(dc.train, header, [("data.features", c) for c in features])
    schema = Schema(features, dc.categorical, dc.label, dc.prediction, dc.score)

    train, schema = load_csv(dc.train, schema)
    validation = None
    if dc.validation is not None:
        vschema = replace(schema, label=None, prediction=None, score=None)
        _require_columns(dc.validation, read_header(dc.validation), [("data.features", c) for c in features])
        validation, _ = load_csv(dc.validation, vschema)
    out = Path(args.out) if args.out else cfg.output
    if out is None:
        raise ConfigError("no bundle output path: pass --out or set 'output' in the config")

    bundle = fit_reliability(train, cfg.reliability, validation=validation,
                             schema=replace(schema, label=None, prediction=None, score=None))
    save_bundle(bundle, out)
    lf = bundle.localfit
    print(f"bundle written: {out}")
    print(f"training rows: {train.n_rows} (dropped {train.dropped_count} with missing values)")
    print(f"mse_threshold: {bundle.density.mse_threshold!r}")
    print(f"synthetic points: {lf.n_synthetic}")
    print(f"proxy training accuracy: {lf.proxy_train_accuracy!r}")
    return EXIT_OK


def _schema_diff(expected, found):
    missing = [c for c in expected if c not in found]
    extra = [c for c in found if c not in expected]
    lines = [f"expected columns: {list(expected)}", f"found columns:    {list(found)}"]
    if missing:
        lines.append(f"missing: {missing}")
    if extra:
        lines.append(f"extra: {extra}")
    if not missing and not extra:
        lines.append("columns are reordered")
    return "\n".join(lines)


def _passthrough(path, columns, source_rows):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {c: [rows[i][c] for i in source_rows] for c in columns}


def assess_csv(bundle, input_path, output_path, role_columns=("label", "prediction", "score"), keep=()):
    """Assess every row of a CSV and write per-row verdicts.

    Columns other than the bundle's raw feature columns are refused unless
    they are one of ``role_columns`` or named in ``keep``; those are copied
    through unchanged.
    """
    schema = bundle.schema
    header = read_header(input_path)
    found = [c for c in header if c not in role_columns and c not in keep]
    if found != list(schema.features):
        raise SchemaError(f"{input_path}: input columns do not match the bundle schema\n"
                          + _schema_diff(schema.features, found))
    present = [c for c in role_columns if c in header]
    roles = dict(zip(("label", "prediction", "score"), role_columns))
    load_schema = Schema(schema.features, schema.categorical, categories=schema.categories,
                         label=roles["label"] if roles["label"] in present else None,
                         prediction=roles["prediction"] if roles["prediction"] in present else None,
                         score=roles["score"] if roles["score"] in present else None)
    matrix, _ = load_csv(input_path, load_schema)
    report = assess(bundle, matrix)
    extra = _passthrough(input_path, [c for c in keep if c in header], matrix.source_rows)
    extra |= {
        "mse": report.mse,
        "density_reliable": report.density_reliable.astype(np.int64),
        "localfit_score": report.localfit_score,
        "localfit_reliable": report.localfit_reliable.astype(np.int64),
        "reliable": report.reliable.astype(np.int64),
    }
    write_csv(matrix, output_path, label=roles["label"], prediction=roles["prediction"], score=roles["score"],
              extra=extra)
    return matrix, report


def cmd_assess(args):
    bundle = load_bundle(args.bundle)
    roles = (args.label_col, args.prediction_col, args.score_col)
    matrix, report = assess_csv(bundle, args.input, args.output, roles, tuple(args.keep))
    c = report.counts()
    print(f"assessed rows: {c['n']} (dropped {matrix.dropped_count} with missing values)")
    print(f"reliable: {c['reliable']}  unreliable: {c['unreliable']}")
    print(f"density unreliable: {c['density_unreliable']}  local-fit unreliable: {c['localfit_unreliable']}")
    print(f"verdicts written: {args.output}")
    return EXIT_OK


def _read_columns(path, names):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [n for n in names if n not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        rows = list(reader)
    out = {}
    for n in names:
        try:
            out[n] = np.array([float(r[n]) for r in rows], dtype=np.float64)
        except ValueError as exc:
            raise ConfigError(f"{path}: column {n!r}: {exc}") from None
    return out


def _fmt_metric(v):
    return "undefined" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4f}"


def _json_metric(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def evaluation_to_dict(ev):
    def rep(r):
        return {
            "support": r.support,
            "metrics": {k: _json_metric(v) for k, v in r.as_dict().items()},
            "undefined": sorted(r.undefined),
        }

    return {
        "whole": rep(ev.whole),
        "reliable": rep(ev.reliable),
        "unreliable": rep(ev.unreliable),
        "delta": {
            "metrics": {k: _json_metric(v) for k, v in ev.deltas.values.items()},
            "undefined": sorted(ev.deltas.undefined),
        },
    }


def format_evaluation(ev):
    lines = [f"{'metric':<18}{'whole':>11}{'reliable':>11}{'unreliable':>11}{'delta':>11}"]
    lines.append(f"{'support':<18}{ev.whole.support:>11}{ev.reliable.support:>11}{ev.unreliable.support:>11}{'':>11}")
    for name in METRIC_NAMES:
        vals = [getattr(ev.whole, name), getattr(ev.reliable, name), getattr(ev.unreliable, name),
                ev.deltas.values[name]]
        lines.append(f"{name:<18}" + "".join(f"{_fmt_metric(v):>11}" for v in vals))
    return "\n".join(lines)


def evaluate_csv(path, label="label", prediction="prediction", score="score", flag="reliable"):
    cols = _read_columns(path, [label, prediction, score, flag])
    return evaluate(cols[label], cols[prediction], cols[score], cols[flag].astype(bool))


def cmd_evaluate(args):
    ev = evaluate_csv(args.input, args.label_col, args.prediction_col, args.score_col, args.flag_col)
    print(format_evaluation(ev))
    if args.output:
        Path(args.output).write_text(json.dumps(evaluation_to_dict(ev), indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return EXIT_OK


def _sim_spec(args):
    changes = {"seed": args.seed}
    for attr in ("n_train", "n_val", "n_test_in"):
        v = getattr(args, attr)
        if v is not None:
            changes[attr] = v
    if args.ood_count is not None:
        changes["n_test_ood"] = args.ood_count
    if args.overlap_offset is not None:
        changes["overlap_offset"] = args.overlap_offset
    if args.ood_mean is not None:
        changes["ood_mean"] = tuple(args.ood_mean)
    try:
        return SimSpec(**changes)
    except ReliabilityError as exc:
        raise ConfigError(f"simulation spec: {exc}") from None


def _write_table(path, table):
    names = list(table)
    n = len(next(iter(table.values()))) if table else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([_cell(table[c][i]) for c in names])


def _cell(v):
    if isinstance(v, (np.integer, int, np.bool_, bool)):
        return str(int(v))
    return repr(float(v))


def simulation_checks(report):
    """``{name: (passed, detail)}`` for the ``--check`` gate."""
    rate = report.summary["ood_density_detection_rate"]
    ba = report.evaluation.deltas.values["balanced_accuracy"]
    return {
        "ood_density_detection": (rate is not None and rate >= OOD_RATE_MIN,
                                  f"rate={rate} (need >= {OOD_RATE_MIN})"),
        "balanced_accuracy_delta": (not math.isnan(ba) and ba > 0, f"delta={ba} (need > 0)"),
    }


def cmd_simulate(args):
    spec = _sim_spec(args)
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        config = reliability_from_dict(raw)
    else:
        config = default_experiment_config()
    report = run_experiment(spec, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    data = report.data
    train = data.train.with_columns(predictions=report.train_pred)
    write_csv(train, out / "train.csv")
    val = data.validation.with_columns(predictions=report.validation_pred)
    write_csv(val, out / "validation.csv")
    test = data.test.with_columns(predictions=report.test_pred, scores=report.test_score)
    write_csv(test, out / "test.csv", extra={"ood": data.test_ood.astype(np.int64)})
    _write_table(out / "points.csv", report.point_table())
    save_bundle(report.bundle, out / "bundle.json")

    checks = simulation_checks(report)
    doc = {
        "spec": {k: (list(map(list, v)) if isinstance(v, tuple) and v and isinstance(v[0], tuple)
                     else list(v) if isinstance(v, tuple) else v)
                 for k, v in spec.__dict__.items()},
        "summary": report.summary,
        "validation_accuracy": report.validation_accuracy,
        "classifier_train_accuracy": report.train_accuracy,
        "evaluation": evaluation_to_dict(report.evaluation),
        "checks": {k: {"passed": bool(p), "detail": d} for k, (p, d) in checks.items()},
    }
    (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    s = report.summary
    print(f"rows: train {s['n_train']}, validation {s['n_val']}, test {s['n_test']} ({s['n_test_ood']} OOD)")
    print(f"classifier validation accuracy: {report.validation_accuracy:.4f}")
    print(f"mse_threshold: {s['mse_threshold']!r}")
    print(f"proxy training accuracy: {s['proxy_train_accuracy']:.4f} on {s['n_synthetic']} synthetic points")
    if s["ood_density_detection_rate"] is None:
        print("OOD density detection: undefined (no OOD rows)")
    else:
        print(f"OOD density detection: {s['ood_density_unreliable']}/{s['n_test_ood']} "
              f"({s['ood_density_detection_rate']:.3f}); combined {s['ood_combined_detection_rate']:.3f}")
    print(f"reliable: {s['reliable']}  unreliable: {s['unreliable']}")
    print(format_evaluation(report.evaluation))
    print(f"outputs written to {out}")
    if args.check:
        failed = False
        for name, (passed, detail) in checks.items():
            print(f"check {name}: {'PASS' if passed else 'FAIL'} {detail}")
            failed |= not passed
        if failed:
            return EXIT_CHECK
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="relkit", description="Pointwise reliability of classifier predictions.")
    p.add_argument("--version", action="version", version=f"relkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit density and local-fit models, write a bundle")
    f.add_argument("--config", required=True, help="run configuration (JSON)")
    f.add_argument("--out", help="bundle path (overrides 'output' in the config)")
    f.add_argument("--seed", type=int, help="override every seed in the config")
    f.set_defaults(func=cmd_fit)

    a = sub.add_parser("assess", help="score rows of a CSV with a bundle")
    a.add_argument("--bundle", required=True)
    a.add_argument("--input", required=True)
    a.add_argument("--output", required=True)
    a.add_argument("--label-col", default="label")
    a.add_argument("--prediction-col", default="prediction")
    a.add_argument("--score-col", default="score")
    a.add_argument("--keep", action="append", default=[], metavar="COL",
                   help="extra input column to copy to the output (repeatable)")
    a.set_defaults(func=cmd_assess)

    e = sub.add_parser("evaluate", help="classifier metrics on reliable vs unreliable rows")
    e.add_argument("--input", required=True, help="assessment CSV")
    e.add_argument("--output", help="write the report as JSON")
    e.add_argument("--label-col", default="label")
    e.add_argument("--prediction-col", default="prediction")
    e.add_argument("--score-col", default="score")
    e.add_argument("--flag-col", default="reliable")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", help="run the simulated 2-D experiment")
    s.add_argument("--out-dir", default="sim_out")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ood-count", type=int)
    s.add_argument("--n-train", type=int)
    s.add_argument("--n-val", type=int)
    s.add_argument("--n-test-in", type=int)
    s.add_argument("--overlap-offset", type=float)
    s.add_argument("--ood-mean", type=float, nargs=2, metavar=("X1", "X2"))
    s.add_argument("--config", help="JSON with density/localfit/seeds sections")
    s.add_argument("--check", action="store_true", help="exit 4 unless the acceptance checks pass")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ReliabilityError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
