"""Command-line interface.

Subcommands: ``check`` (saturate a .karb program), ``analyze`` (survey-data
summaries), ``fit`` (weight fitting), ``bench`` (four-method comparison)
and ``synth`` (synthetic survey data).  Machine-readable results go to
files, a short human summary to stdout.  Everything is deterministic for a
given seed.  Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench as bench_mod
from . import engine, fitting, survey
from .bundles import bundled_path
from .dsl import parse_program
from .terms import render

_DOMAIN_ERRORS = (
    engine.GroundingError,
    engine.BudgetError,
    engine.NotDerivedError,
    fitting.DataError,
    fitting.FitConfigError,
    fitting.UndefinedObjectiveError,
    survey.ConfigError,
    survey.DataFormatError,
    survey.MeasureError,
    survey.SizeError,
    bench_mod.BenchConfigError,
    OSError,
)


def _load_program(path: str):
    source = Path(path).read_text(encoding="utf-8")
    result = parse_program(source, filename=path)
    for diag in result.diagnostics:
        print(diag.format(path), file=sys.stderr)
    if not result.ok:
        raise SystemExit(1)
    return result.program


def _cmd_check(args) -> int:
    program = _load_program(args.program)
    config = engine.EngineConfig(mode=args.mode, max_passes=args.max_passes)
    result = engine.saturate(program, config)
    verdict = result.verdict
    if verdict.kind is engine.VerdictKind.CONTRADICTION:
        t, u = verdict.witness
        print(f"CONTRADICTION after {verdict.passes_used} pass(es)")
        print(f"  witness: {render(t)}")
        print(f"  against: {render(u)}")
    elif verdict.kind is engine.VerdictKind.SATURATED:
        print(f"SATURATED after {verdict.passes_used} pass(es), {len(result.wm)} term(s)")
    else:
        print(f"BUDGET-EXHAUSTED after {verdict.passes_used} pass(es), {len(result.wm)} term(s)")
    if args.emit_json:
        Path(args.emit_json).write_text(engine.result_to_json(result), encoding="utf-8")
        print(f"wrote {args.emit_json}")
    if args.emit_dot:
        graph = result.lattice
        if verdict.kind is engine.VerdictKind.CONTRADICTION and args.explain_witness:
            graph = engine.explain(result.lattice, verdict.witness[1])
        Path(args.emit_dot).write_text(engine.to_dot(graph, title=Path(args.program).stem), encoding="utf-8")
        print(f"wrote {args.emit_dot}")
    return 0


def _cmd_analyze(args) -> int:
    loaded = survey.load_records(args.data)
    for diag in loaded.diagnostics:
        print(diag.format(args.data), file=sys.stderr)
    records = loaded.records
    if not records:
        print("no valid records", file=sys.stderr)
        return 1
    out_prefix = args.out or "analysis"
    wrote = []

    points = survey.correlation_points(records, args.measure_x, args.measure_y, args.window)
    lines = ["community_id,app_id,window_start,mean_x,mean_y"]
    for p in points.points:
        lines.append(
            f"{p.community_id},{p.app_id},{p.window_start},"
            f"{p.means[args.measure_x]!r},{p.means[args.measure_y]!r}"
        )
    path = f"{out_prefix}_points.csv"
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    wrote.append(path)

    series = survey.segmented_running_average(records, [args.measure_x, args.measure_y], args.window)
    lines = ["community_id,app_id,window_start,measure,mean"]
    for p in series:
        for measure in (args.measure_x, args.measure_y):
            lines.append(f"{p.community_id},{p.app_id},{p.window_start},{measure},{p.means[measure]!r}")
    path = f"{out_prefix}_series.csv"
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    wrote.append(path)

    if args.histogram:
        app_id, _, measure = args.histogram.partition(":")
        if not measure:
            raise survey.MeasureError("histogram wants APP_ID:MEASURE")
        counts = survey.histogram(records, app_id, measure)
        lines = ["level,count"] + [f"{level},{count}" for level, count in zip(range(1, 6), counts)]
        path = f"{out_prefix}_histogram.csv"
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        wrote.append(path)
        print(f"histogram {app_id}/{measure}: {counts}")

    print(f"{len(records)} records, {len(points.points)} segment points (window {args.window})")
    for path in wrote:
        print(f"wrote {path}")
    return 0


def _default_features(rules_path: str | None) -> tuple[str, ...]:
    path = rules_path or str(bundled_path("quality_rules.karb"))
    program = _load_program(path)
    return tuple(fitting.scoring_features(program))


def _load_space(space_path: str | None):
    path = space_path or str(bundled_path("space.cfg"))
    return fitting.parse_space(Path(path).read_text(encoding="utf-8"))


def _cmd_fit(args) -> int:
    loaded = survey.load_records(args.data)
    records = loaded.records
    if args.app != "all":
        records = [r for r in records if r.app_id == args.app]
    if not records:
        print(f"no records for app {args.app}", file=sys.stderr)
        return 1
    space, polarity = _load_space(args.space)
    features = _default_features(args.rules)
    objective_fn = fitting.AppObjective(records, features, polarity)

    if args.method == "hill":
        init = {f: 0.0 for f in features}
        init["bias"] = 3.0
        result = fitting.hill_climb(objective_fn, space, init, max_iters=args.budget, seed=args.seed)
    elif args.method == "state-space":
        result = fitting.state_space_search(objective_fn, space, args.budget, args.seed)
    elif args.method == "exhaustive":
        result = fitting.exhaustive(objective_fn, space)
    else:
        result = fitting.random_baseline(objective_fn, space, args.budget, args.seed)

    print(f"method={args.method} app={args.app} error={result.best_error!r} evaluations={result.evaluations}")
    for coord in sorted(result.best):
        print(f"  {coord} = {result.best[coord]!r}")
    if args.emit_trace:
        lines = ["state_index,error"] + [f"{idx},{err!r}" for idx, err in result.trace]
        Path(args.emit_trace).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.emit_trace}")
    return 0


def _cmd_bench(args) -> int:
    loaded = survey.load_records(args.data)
    for diag in loaded.diagnostics:
        print(diag.format(args.data), file=sys.stderr)
    records = loaded.records
    if not records:
        print("no valid records", file=sys.stderr)
        return 1
    if args.methods == "all":
        methods = bench_mod.MethodKind.order()
    else:
        methods = [bench_mod.MethodKind.parse(m) for m in args.methods.split(",")]
    space, polarity = _load_space(args.space)
    features = _default_features(args.rules)
    experts_path = args.experts or str(bundled_path("experts.cfg"))
    experts = bench_mod.parse_experts(Path(experts_path).read_text(encoding="utf-8"))
    config = bench_mod.BenchConfig(
        space=space,
        features=features,
        polarity=polarity,
        expert_scores=experts,
        seed=args.seed,
        sss_budget=args.budget,
    )
    report = bench_mod.compare(records, methods, config)
    print(report.format_table(), end="")
    for (method, app), message in sorted(report.failures.items()):
        print(f"cell {method}/{app} failed: {message}", file=sys.stderr)
    prefix = args.out
    Path(f"{prefix}.csv").write_text(report.to_csv(), encoding="utf-8")
    Path(f"{prefix}_curve.csv").write_text(report.curve_csv(), encoding="utf-8")
    Path(f"{prefix}.json").write_text(report.to_json(), encoding="utf-8")
    print(f"wrote {prefix}.csv, {prefix}_curve.csv, {prefix}.json")
    return 0


def _cmd_synth(args) -> int:
    import math

    community_size = max(1, math.ceil(args.records / args.communities))
    config = survey.default_generator_config(
        apps=args.apps, records_per_app=args.records, community_size=community_size
    )
    records = survey.generate_synthetic(config, args.seed)
    survey.write_records(records, args.out)
    print(f"wrote {args.out}: {len(records)} records, {args.apps} app(s), checksum {survey.dataset_checksum(records)[:12]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulebench", description=__doc__.splitlines()[0] if __doc__ else "")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and saturate a .karb program")
    p.add_argument("program")
    p.add_argument("--emit-dot", metavar="PATH")
    p.add_argument("--emit-json", metavar="PATH")
    p.add_argument("--max-passes", type=int, default=100)
    p.add_argument("--mode", choices=("classical", "weighted"), default="classical")
    p.add_argument("--explain-witness", action="store_true", help="restrict DOT output to the contradiction's derivation")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("analyze", help="survey-data series/correlation/histogram summaries")
    p.add_argument("data")
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--measure-x", default="absolute_quality")
    p.add_argument("--measure-y", default="error_freeness")
    p.add_argument("--histogram", metavar="APP_ID:MEASURE")
    p.add_argument("--out", metavar="PREFIX")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("fit", help="fit scoring weights on one app's records")
    p.add_argument("data")
    p.add_argument("--app", default="all")
    p.add_argument("--method", choices=("hill", "state-space", "exhaustive", "random"), default="state-space")
    p.add_argument("--budget", type=int, default=600)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--space", metavar="FILE")
    p.add_argument("--rules", metavar="FILE", help="scoring rule file (default: bundled)")
    p.add_argument("--emit-trace", metavar="PATH")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("bench", help="compare benchmark methods on a dataset")
    p.add_argument("data")
    p.add_argument("--methods", default="all")
    p.add_argument("--experts", metavar="FILE")
    p.add_argument("--space", metavar="FILE")
    p.add_argument("--rules", metavar="FILE")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--budget", type=int, default=600)
    p.add_argument("--out", default="report")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic survey dataset")
    p.add_argument("--records", type=int, default=1000, help="records per app")
    p.add_argument("--communities", type=int, default=50, help="communities per app")
    p.add_argument("--apps", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="synthetic.csv")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
