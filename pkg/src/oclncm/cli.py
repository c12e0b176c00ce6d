"""Command-line entry point: dataset generation, experiment runs, sweeps over
a config axis, and embedding-file validation.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from oclncm import harness, store

USAGE_ERROR = 2
RUNTIME_ERROR = 1

SWEEP_AXES = ("step_size", "exemplar_budget", "method")


class UsageError(ValueError):
    """Bad flags, malformed JSON, or an invalid config: exit code 2."""


def _build_parser():
    parser = argparse.ArgumentParser(prog="oclncm")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic Gaussian-cluster dataset")
    gen.add_argument("--classes", type=int, required=True)
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--per-class-train", type=int, required=True)
    gen.add_argument("--per-class-test", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--spread", type=float, default=0.1)
    gen.add_argument("--mean-scale", type=float, default=1.0)
    gen.add_argument("--name", default="synthetic")
    gen.add_argument("--out", default=".")

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep", help="run a sweep spec: a base config plus one axis")
    sweep.add_argument("--spec", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--jobs", type=int, default=1)

    check = sub.add_parser("export-check", help="validate an embedding file or manifest")
    check.add_argument("path")
    return parser


def _load_json(path):
    if not os.path.exists(path):
        raise UsageError(f"{path}: no such file")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _fail(code, message):
    print(f"oclncm: error: {message}", file=sys.stderr)
    return code


def _config_from_file(path):
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    try:
        cfg = harness.RunConfig.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    if not os.path.isabs(cfg.manifest):
        cfg.manifest = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(path)), cfg.manifest))
    return cfg


def _write_run_outputs(out_dir, metrics, run_manifest):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        fh.write(metrics.to_json())
        fh.write("\n")
    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(metrics.to_csv())
    with open(os.path.join(out_dir, "run_manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(run_manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_gen(args):
    manifest, manifest_path = store.generate_synthetic_tasks(
        num_classes=args.classes,
        dim=args.dim,
        per_class_train=args.per_class_train,
        per_class_test=args.per_class_test,
        cluster_spread=args.spread,
        mean_scale=args.mean_scale,
        seed=args.seed,
        out_dir=args.out,
        name=args.name,
    )
    print(manifest_path)
    return 0


def cmd_run(args):
    config = _config_from_file(args.config)
    metrics, run_manifest = harness.run_experiment(config)
    _write_run_outputs(args.out, metrics, run_manifest)
    print(f"avg={metrics.avg:.6f} last={metrics.last:.6f} -> {args.out}")
    return 0


def _sweep_points(spec, spec_path):
    if not isinstance(spec, dict) or "base" not in spec or "axis" not in spec:
        raise UsageError("sweep spec must be a JSON object with 'base' and 'axis'")
    axis = spec["axis"]
    if not isinstance(axis, dict) or len(axis) != 1:
        raise UsageError(f"axis must name exactly one of {SWEEP_AXES}")
    (axis_name, values), = axis.items()
    if axis_name not in SWEEP_AXES:
        raise UsageError(f"unknown sweep axis {axis_name!r}; expected one of {SWEEP_AXES}")
    if not isinstance(values, list) or not values:
        raise UsageError("empty axis")
    points = []
    for value in values:
        raw = dict(spec["base"])
        raw[axis_name] = value
        try:
            cfg = harness.RunConfig.from_dict(raw)
        except (ValueError, TypeError) as exc:
            raise UsageError(f"{axis_name}={value}: {exc}") from exc
        if not os.path.isabs(cfg.manifest):
            cfg.manifest = os.path.normpath(
                os.path.join(os.path.dirname(os.path.abspath(spec_path)), cfg.manifest)
            )
        points.append((axis_name, value, cfg))
    return points


def _run_point(point):
    axis_name, value, cfg = point
    metrics, run_manifest = harness.run_experiment(cfg)
    return axis_name, value, cfg, metrics, run_manifest


def cmd_sweep(args):
    spec = _load_json(args.spec)
    points = _sweep_points(spec, args.spec)
    os.makedirs(args.out, exist_ok=True)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_point, points))
    else:
        results = [_run_point(p) for p in points]
    rows = ["method,step_size,exemplar_budget,avg,last"]
    for i, (axis_name, value, cfg, metrics, run_manifest) in enumerate(results):
        point_dir = os.path.join(args.out, f"point_{i:03d}_{axis_name}={value}")
        _write_run_outputs(point_dir, metrics, run_manifest)
        rows.append(
            f"{cfg.method},{cfg.step_size},{cfg.exemplar_budget},{metrics.avg!r},{metrics.last!r}"
        )
    summary_path = os.path.join(args.out, "summary.csv")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    print(summary_path)
    return 0


def cmd_export_check(args):
    path = args.path
    if not os.path.exists(path):
        return _fail(USAGE_ERROR, f"{path}: no such file")
    if path.endswith(".json"):
        manifest = store.load_manifest(path)
        summary = store.validate_manifest(manifest)
        print(
            f"OK: {summary['records']} records, dim {summary['dim']}, "
            f"{summary['classes_present']}/{summary['num_classes']} classes, "
            f"{summary['train_records']} train / {summary['test_records']} test"
        )
        return 0
    dim, count = store.read_embedding_header(path)
    seen = 0
    for _ in store.read_embedding_stream(path):
        seen += 1
    print(f"OK: {seen} records, dim {dim}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen": cmd_gen,
        "run": cmd_run,
        "sweep": cmd_sweep,
        "export-check": cmd_export_check,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        return _fail(USAGE_ERROR, str(exc))
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        return _fail(RUNTIME_ERROR, str(exc))


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
