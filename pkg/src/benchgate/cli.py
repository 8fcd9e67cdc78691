"""benchgate command line.

Exit codes: 0 clean, 1 definite regression found (``analyze``), 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from importlib import resources
from pathlib import Path
from typing import Sequence

from .callgraph import CallGraph, GraphError, load_callgraph
from .config import ConfigError, ProjectConfig, load_project_config, load_scenario
from .detection import DETECTION_FIELDS, Analysis, analyze_series
from .measurements import MeasurementError, load_manifest, write_manifest
from .optimizer import optimize, reference_impact
from .scheduler import make_duet_plan, make_rmit_plan
from .simulator import aggregate, evaluate_detector, generate_history
from .stats import REPORT_FIELDS

EXIT_OK, EXIT_REGRESSION, EXIT_ERROR = 0, 1, 2
DEMO_SCENARIO = "demo"


class UsageError(Exception):
    pass


# --- output helpers --------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[_fmt(v) for v in row] for row in rows])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _out_dir(cfg: ProjectConfig, args) -> Path:
    out = Path(args.out) if args.out else cfg.path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- graphs ----------------------------------------------------------------

def _graph_files(cfg: ProjectConfig, entries: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for entry in entries:
        p = cfg.path(entry)
        if p.is_dir():
            files.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in (".json", ".csv")))
        else:
            files.append(p)
    return files


def _load_graphs(cfg: ProjectConfig) -> tuple[CallGraph, list[CallGraph]]:
    if not cfg.app_graph:
        raise UsageError("no application call graph configured (app_graph / --app)")
    app = load_callgraph(cfg.path(cfg.app_graph), cfg.graph_format)
    micros = [load_callgraph(p, cfg.graph_format) for p in _graph_files(cfg, cfg.micro_graphs)]
    if not micros:
        raise UsageError("no microbenchmark call graphs configured (micro_graphs / --micro)")
    return app, micros


# --- commands --------------------------------------------------------------

def cmd_optimize(cfg: ProjectConfig, args) -> int:
    if args.app:
        cfg.app_graph = args.app
    if args.micro:
        cfg.micro_graphs = args.micro
    if args.min_gain is not None:
        cfg.optimizer.min_gain = args.min_gain
    if args.top_k is not None:
        cfg.optimizer.top_k = args.top_k
    app, micros = _load_graphs(cfg)
    suite = optimize(app, micros, cfg.optimizer.build())
    out = _out_dir(cfg, args)
    _write_json(out / "optimized_suite.json", suite.to_dict())
    table = suite.table()
    (out / "optimized_suite.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return EXIT_OK


def _reference_impacts(cfg: ProjectConfig) -> dict[str, float]:
    if not (cfg.app_graph and cfg.micro_graphs):
        return {}
    app, micros = _load_graphs(cfg)
    return {m.graph_id: reference_impact(app, m) for m in micros}


def _write_analysis(out: Path, analysis: Analysis) -> None:
    reports = [r for rows in analysis.reports.values() for r in rows]
    order = {c: k for k, c in enumerate(analysis.commits)}
    reports.sort(key=lambda r: (order[r.commit], r.metric))
    _write_json(out / "change_reports.json", [r.to_dict() for r in reports])
    _write_csv(out / "change_reports.csv", REPORT_FIELDS,
               [[r.to_dict()[k] for k in REPORT_FIELDS] for r in reports])

    header = DETECTION_FIELDS + ["reference_impact_s"]
    _write_json(out / "detections.json", [
        {k: d.to_dict()[k] for k in header} for d in analysis.detections
    ])
    _write_csv(out / "detections.csv", header,
               [[d.to_dict()[k] for k in header] for d in analysis.detections])

    marks = {(d.commit, d.metric): d for d in analysis.detections}
    rows = []
    for r in reports:
        d = marks.get((r.commit, r.metric))
        rows.append([order[r.commit], r.commit, r.metric, r.median_change_pct, r.ci_low_pct,
                     r.ci_high_pct, d.kind if d else "", d.direction if d else "",
                     d.intensity if d else ""])
    _write_csv(out / "plot_data.csv",
               ["x", "commit", "metric", "median_change_pct", "ci_low_pct", "ci_high_pct",
                "marker", "direction", "intensity"], rows)


def cmd_analyze(cfg: ProjectConfig, args) -> int:
    if args.manifest:
        cfg.measurements = args.manifest
    if not cfg.measurements:
        raise UsageError("no measurement manifest configured (measurements / --manifest)")
    if args.instability_window is not None:
        cfg.detector.instability_window = args.instability_window
    series = load_manifest(cfg.path(cfg.measurements))
    impacts = _reference_impacts(cfg)
    analysis = analyze_series(series, cfg.detector.build(), cfg.bootstrap.build(args.seed),
                              cfg.trim.head_frac, cfg.trim.tail_frac, impacts)
    out = _out_dir(cfg, args)
    _write_analysis(out, analysis)
    summary = render_report([r.to_dict() for rows in analysis.reports.values() for r in rows],
                            [d.to_dict() for d in analysis.detections])
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    print(summary, end="")
    regressions = analysis.definite_regressions
    if regressions:
        print(f"FAIL: {len(regressions)} definite regression(s) detected", file=sys.stderr)
        return EXIT_REGRESSION
    return EXIT_OK


def render_report(reports: list[dict], detections: list[dict]) -> str:
    """Detections ranked by reference impact (largest first), then commit order."""
    metrics = sorted({r["metric"] for r in reports})
    commits = list(dict.fromkeys(r["commit"] for r in reports))
    lines = [f"{len(commits)} commit(s), {len(metrics)} metric(s), {len(detections)} detection(s)"]
    order = {c: k for k, c in enumerate(commits)}
    ranked = sorted(detections, key=lambda d: (
        -(d.get("reference_impact_s") or 0.0), order.get(d["commit"], 0), d["metric"], d["kind"]))
    if ranked:
        lines.append(f"{'commit':<12} {'metric':<32} {'kind':<6} {'dir':<5} {'intensity':<10} "
                     f"{'change%':>8} {'thr%':>6} {'impact_s':>10}")
    for d in ranked:
        impact = d.get("reference_impact_s")
        lines.append(
            f"{d['commit']:<12} {d['metric']:<32} {d['kind']:<6} {d['direction']:<5} "
            f"{d['intensity']:<10} {d['magnitude_pct']:>+8.2f} {d['threshold_pct']:>6.2f} "
            f"{'' if impact is None else format(impact, '.1f'):>10}"
        )
    return "\n".join(lines) + "\n"


def cmd_report(cfg: ProjectConfig, args) -> int:
    src = Path(args.input) if args.input else (Path(args.out) if args.out else cfg.path(cfg.output_dir))
    try:
        reports = json.loads((src / "change_reports.json").read_text(encoding="utf-8"))
        detections = json.loads((src / "detections.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise UsageError(f"no analysis results in {src} ({exc.filename}); run 'analyze' first") from exc
    text = render_report(reports, detections)
    out = _out_dir(cfg, args)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def _suite_from(cfg: ProjectConfig, args) -> list[str]:
    if args.suite:
        return [s for s in args.suite.split(",") if s]
    if args.suite_file:
        path = Path(args.suite_file)
        if not path.is_file():
            raise UsageError(f"suite file not found: {path}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        return [s["benchmark"] for s in doc["steps"]]
    return list(cfg.plan.suite)


def cmd_plan(cfg: ProjectConfig, args) -> int:
    out = _out_dir(cfg, args)
    p = cfg.plan
    if args.kind == "rmit":
        suite = _suite_from(cfg, args)
        if not suite:
            raise UsageError("no benchmarks to plan (--suite, --suite-file or plan.suite)")
        plan = make_rmit_plan(suite, p.seed if args.seed is None else args.seed, p.instance_runs,
                              p.suite_runs, p.iterations, p.iteration_duration_s)
        target = out / "plan_rmit.json"
    else:
        base = args.base or p.base
        variation = args.variation or p.variation
        if not base or not variation:
            raise UsageError("duet plans need --base and --variation")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            plan = make_duet_plan(base, variation, args.workload or p.workload, p.repetitions)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        target = out / "plan_duet.json"
    _write_json(target, plan.to_dict())
    print(target)
    return EXIT_OK


def _scenario_path(arg: str):
    if arg == DEMO_SCENARIO and not Path(arg).exists():
        return resources.files("benchgate") / "data" / "demo_scenario.json"
    return Path(arg)


def cmd_simulate(cfg: ProjectConfig, args) -> int:
    sc = load_scenario(_scenario_path(args.scenario))
    out = _out_dir(cfg, args)
    seed0 = sc.seed if args.seed is None else args.seed
    det = sc.detector.build()
    boot = sc.bootstrap.build()
    cells = [(None, None)]
    if sc.matrix:
        cells = [(m, n) for m in sc.matrix.magnitudes_pct for n in sc.matrix.iteration_noise]

    rows, cell_docs = [], []
    for magnitude, noise_level in cells:
        noise = sc.noise.build()
        if noise_level is not None:
            noise = type(noise)(noise.instance, noise.suite, noise_level)
        injections = [
            i.build(None if magnitude is None else (magnitude if i.magnitude_pct >= 0 else -magnitude))
            for i in sc.injections
        ]
        evals = []
        for r in range(sc.runs):
            series = generate_history(sc.n_commits, sc.base_latency_s, noise, injections,
                                      tuple(sc.shape), seed0 + r, sc.metrics)
            if r == 0 and magnitude is None:
                write_manifest(series, out / "series")
            evals.append(evaluate_detector(series, injections, det, boot))
        agg = aggregate(evals)
        tp = sum(c["tp"] for c in agg.confusion.values())
        fp = sum(c["fp"] for c in agg.confusion.values())
        fn = sum(c["fn"] for c in agg.confusion.values())
        mag = magnitude if magnitude is not None else (
            sc.injections[0].magnitude_pct if sc.injections else 0.0)
        rows.append([mag, noise.iteration, sc.runs, agg.precision, agg.recall, tp, fp, fn])
        cell_docs.append({"magnitude_pct": mag, "iteration_noise": noise.iteration, "runs": sc.runs,
                          **agg.to_dict()})

    _write_json(out / "labels.json", [i.model_dump() for i in sc.injections])
    doc = {"precision": cell_docs[0]["precision"], "recall": cell_docs[0]["recall"],
           "cells": cell_docs} if len(cell_docs) == 1 else {"cells": cell_docs}
    _write_json(out / "evaluation.json", doc)
    _write_csv(out / "evaluation.csv",
               ["magnitude_pct", "iteration_noise", "runs", "precision", "recall", "tp", "fp", "fn"],
               rows)
    for row in rows:
        print(f"magnitude={row[0]:g}% noise={row[1]:g} runs={row[2]} "
              f"precision={row[3]:.3f} recall={row[4]:.3f}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="project config JSON")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--out", help="output directory (overrides output_dir)")

    ap = argparse.ArgumentParser(prog="benchgate", parents=[common],
                                 description="Microbenchmark suite minimization and performance change detection.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", parents=[common], help="build an optimized microbenchmark suite")
    p.add_argument("--app", help="application call graph")
    p.add_argument("--micro", nargs="+", help="microbenchmark call graphs or directories")
    p.add_argument("--min-gain", type=int)
    p.add_argument("--top-k", type=int)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("analyze", parents=[common], help="detect performance changes across commits")
    p.add_argument("--manifest", help="measurement manifest JSON")
    p.add_argument("--instability-window", type=int,
                   help="commits averaged for the dynamic threshold (3 for every-5th-commit series)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plan", help="emit an execution plan")
    plan_sub = p.add_subparsers(dest="kind", required=True)
    r = plan_sub.add_parser("rmit", parents=[common], help="randomized interleaved microbenchmark plan")
    r.add_argument("--suite", help="comma-separated benchmark ids")
    r.add_argument("--suite-file", help="optimized_suite.json from 'optimize'")
    r.set_defaults(func=cmd_plan)
    d = plan_sub.add_parser("duet", parents=[common], help="co-located application benchmark plan")
    d.add_argument("--base")
    d.add_argument("--variation")
    d.add_argument("--workload", help="workload preset (victoriametrics, influxdb)")
    d.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", parents=[common], help="generate a labeled synthetic series and score the detector")
    p.add_argument("scenario", help=f"scenario JSON, or {DEMO_SCENARIO!r} for the bundled example")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="render analysis results ranked by reference impact")
    p.add_argument("--input", help="directory holding change_reports.json and detections.json")
    p.set_defaults(func=cmd_report)
    return ap


def _merge_common(argv: Sequence[str] | None, args) -> None:
    # argparse lets a subparser default of None shadow a value given before the subcommand
    top = argparse.ArgumentParser(add_help=False)
    top.add_argument("--config")
    top.add_argument("--seed", type=int)
    top.add_argument("--out")
    pre, _ = top.parse_known_args(argv)
    for name in ("config", "seed", "out"):
        if getattr(args, name, None) is None:
            setattr(args, name, getattr(pre, name))


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    _merge_common(argv, args)
    try:
        cfg = load_project_config(args.config)
        return args.func(cfg, args)
    except (UsageError, ConfigError, GraphError, MeasurementError, ValueError, TypeError, KeyError,
            OSError, json.JSONDecodeError) as exc:
        print(f"benchgate: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
