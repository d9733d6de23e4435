"""Command-line entry point: file-in/file-out workflows over the whole
workbench. Every output file embeds the configuration and seed that
produced it; trial failures are recorded data, not process failures."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from . import analysis, hardness, llm
from .curriculum import (
    build_e1,
    generate_group,
    load_curriculum,
    load_e2,
    save_curriculum,
    validate_group,
    validate_sequential,
)
from .explorer import WalkConfig, random_walk, write_summary
from .grids import Grid, grid_from_json
from .programs import program_from_json, program_to_json
from .runner import RunSpec, run_curriculum, save_run_record
from .synthesis import SynthesisBudget, solve, trace_of

STOCHASTIC_MODELS = ("pl", "oracle")


def _budget(args) -> SynthesisBudget:
    return SynthesisBudget(
        max_candidates=args.budget,
        max_size=getattr(args, "max_size", None),
    )


def _load_curriculum_arg(path: str):
    if path == "e1":
        return build_e1()
    if path == "e2":
        return load_e2()
    return load_curriculum(path)


def cmd_run(args) -> int:
    cur = _load_curriculum_arg(args.curriculum)
    if args.model in ("llm", "llm-h"):
        mode = "memoryless" if args.model == "llm" else "with_history"
        if args.backend == "mock":
            if not args.mock_script:
                print("error: --mock-script is required with --backend mock", file=sys.stderr)
                return 2
            with open(args.mock_script, "r", encoding="utf-8") as fh:
                responses = json.load(fh)
            backend = llm.MockBackend(responses)
        else:
            backend = llm.HttpBackend()
        record = llm.run_llm_curriculum(cur, backend, mode)
        llm.save_llm_record(record, args.out)
        print(f"{args.model}: solved {record.solved_count}/{len(cur)} trials -> {args.out}")
        return 0
    if args.model in STOCHASTIC_MODELS and args.seed is None:
        print(f"error: --seed is required for the {args.model} model", file=sys.stderr)
        return 2
    spec = RunSpec(
        model=args.model,
        budget=_budget(args),
        k=args.k,
        q=args.q,
        seed=args.seed if args.seed is not None else 0,
        trace_mode=args.trace_mode,
    )
    record = run_curriculum(cur, spec)
    save_run_record(record, args.out)
    print(f"{args.model}: solved {record.solved_count}/{len(cur)} trials -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    with open(args.target, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    target = grid_from_json(data) if isinstance(data, list) else Grid.from_key(data["key"])
    lib = None
    if args.library:
        from .programs import library_from_json

        with open(args.library, "r", encoding="utf-8") as fh:
            lib = library_from_json(json.load(fh))
    result = solve(target, lib, _budget(args))
    out = {
        "config": {"budget": args.budget, "max_size": args.max_size},
        "solved": result.solved,
        "candidates_explored": result.candidates_explored,
        "classes_retained": result.classes_retained,
        "wall_time_ms": round(result.wall_time_ms, 3),
        "program": program_to_json(result.program) if result.solved else None,
        "trace": [program_to_json(p) for p in trace_of(result, args.trace_mode)]
        if result.solved
        else None,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")
    print(("solved" if result.solved else "failed") + f" -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    if args.seed is None:
        print("error: --seed is required (top-k tie-breaking)", file=sys.stderr)
        return 2
    cur = _load_curriculum_arg(args.curriculum)
    logs = []
    if args.jobs > 1 and len(args.logs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            logs = list(pool.map(analysis.load_session_log, args.logs))
    else:
        logs = [analysis.load_session_log(path) for path in args.logs]
    reports = [analysis.replay(log) for log in logs]
    bad = [
        (log.participant_id, issue)
        for log, report in zip(logs, reports)
        if not report.passed
        for issue in report.issues[:3]
    ]
    if bad:
        print(f"warning: {len(bad)} replay issues; offending logs excluded", file=sys.stderr)
        logs = [log for log, report in zip(logs, reports) if report.passed]
    rows = analysis.metrics_table(
        cur,
        logs=logs,
        k=args.k if args.k == "auto" else int(args.k),
        seed=args.seed,
        budget=_budget(args),
    )
    analysis.write_metrics_csv(rows, args.out_csv)
    sidecar = {
        "curriculum": args.curriculum,
        "k": args.k,
        "seed": args.seed,
        "budget": args.budget,
        "logs": list(args.logs),
        "replay_passed": all(r.passed for r in reports),
    }
    with open(args.out_json, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")
    print(f"{len(rows)} rows -> {args.out_csv}")
    return 0


def cmd_replay(args) -> int:
    log = analysis.load_session_log(args.log)
    report = analysis.replay(log)
    for issue in report.issues:
        print(f"trial {issue.trial_index}: {issue.message}")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def cmd_explore(args) -> int:
    if args.seed is None:
        print("error: --seed is required for explore", file=sys.stderr)
        return 2
    cfg = WalkConfig(
        steps=args.steps,
        pool_size=args.pool_size,
        seed=args.seed,
        axes=tuple(args.axes.split(",")) if args.axes else WalkConfig(steps=1).axes,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        result = random_walk(cfg, log_sink=fh)
    if args.summary_out:
        write_summary(result, args.summary_out)
    print(f"{result.total_discovered} discoveries -> {args.out}")
    return 0


def cmd_hardness(args) -> int:
    if args.hardness_cmd == "demo":
        fc = hardness.worked_example()
        best, utility = hardness.best_single_helper_bruteforce(fc)
        print(json.dumps(fc.to_json(), indent=1))
        print(f"best position set: {list(best)} with utility {utility}")
        g, big_m = hardness.demo_reduction_graph()
        reduced, omega = hardness.biclique_reduction(g, k=2)
        print(f"reduction of the worked graph (M={big_m}, omega={omega}):")
        for row in reduced.programs:
            print("  ", list(row))
        return 0
    if args.hardness_cmd == "random":
        if args.seed is None:
            print("error: --seed is required", file=sys.stderr)
            return 2
        g = hardness.random_bipartite(args.n, args.m, args.p, args.seed)
        best = hardness.max_edge_biclique_bruteforce(g)
        fc, _ = hardness.biclique_reduction(g, k=1)
        checks = []
        for k in range(1, args.n * args.m + 1):
            omega = (args.n + 1) * k
            checks.append(
                {
                    "k": k,
                    "reduction_answer": hardness.decide_best_single_helper(fc, omega),
                    "biclique_answer": best >= k,
                }
            )
        agree = all(c["reduction_answer"] == c["biclique_answer"] for c in checks)
        out = {
            "config": {"n": args.n, "m": args.m, "p": args.p, "seed": args.seed},
            "graph": g.to_json(),
            "max_edge_biclique": best,
            "checks": checks,
            "agree": agree,
        }
        print(json.dumps(out, indent=1))
        return 0
    if args.hardness_cmd == "reduce":
        with open(args.graph, "r", encoding="utf-8") as fh:
            g = hardness.BipartiteGraph.from_json(json.load(fh))
        fc, omega = hardness.biclique_reduction(g, args.k)
        out = {"instance": fc.to_json(), "omega": omega, "k": args.k}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=1)
            fh.write("\n")
        print(f"instance with {len(fc.programs)} tuples -> {args.out}")
        return 0
    raise AssertionError(args.hardness_cmd)


def _validate_pair_worker(payload):
    gid, h_json, x, budget_candidates = payload
    group = generate_group(program_from_json(h_json), x)
    report = validate_group(group, SynthesisBudget(max_candidates=budget_candidates))
    return gid, report


def cmd_curriculum(args) -> int:
    if args.curriculum_cmd == "build-e1":
        save_curriculum(build_e1(), args.out)
        print(f"14 trials -> {args.out}")
        return 0
    if args.curriculum_cmd == "generate-group":
        with open(args.helper, "r", encoding="utf-8") as fh:
            h = program_from_json(json.load(fh))
        group = generate_group(h, args.x)
        out = {
            "helper": program_to_json(group.helper),
            "x": group.x,
            "targets": [t.rows() for t in group.targets],
            "prescribed": [program_to_json(p) for p in group.prescribed],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=1)
            fh.write("\n")
        print(f"group -> {args.out}")
        return 0
    if args.curriculum_cmd == "validate":
        cur = _load_curriculum_arg(args.curriculum)
        checks = validate_sequential(cur)
        for check in checks:
            line = f"trial {check.index:>2} [{check.kind}] {check.status}"
            if check.detail:
                line += f" ({check.detail})"
            print(line)
        ok = all(c.status == "PASS" for c in checks)
        groups = {}
        for trial in cur.trials:
            if trial.meta.kind == "group":
                groups.setdefault(trial.meta.h_id, trial.meta.x)
        if groups:
            payloads = [
                (gid, program_to_json(cur.latents[gid]), x, args.budget)
                for gid, x in groups.items()
            ]
            if args.jobs > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    results = list(pool.map(_validate_pair_worker, payloads))
            else:
                results = [_validate_pair_worker(p) for p in payloads]
            results.sort(key=lambda r: r[0])
            for gid, report in results:
                status = "PASS" if report.passed else "FAIL"
                print(f"group {gid}: {status}")
                for issue in report.issues:
                    print(f"  issue: {issue}")
                for pair in report.pairs:
                    if pair.status != "PASS":
                        print(
                            f"  pair {pair.a}->{pair.b}: {pair.status}"
                            + (
                                f" found {pair.found_size} < prescribed {pair.prescribed_size}"
                                if pair.found_size is not None
                                else ""
                            )
                        )
                ok = ok and report.passed
        print("PASS" if ok else "FAIL")
        return 0 if ok else 1
    raise AssertionError(args.curriculum_cmd)


def cmd_export_ui(args) -> int:
    cur = _load_curriculum_arg(args.curriculum)
    save_curriculum(cur, args.out)
    print(f"curriculum -> {args.out}")
    if args.golden_out:
        import random as _random

        from .grids import apply_binary, apply_unary, BINARY_OPS, UNARY_OPS

        rng = _random.Random(args.seed or 0)
        cases = []
        for _ in range(args.golden_count):
            a = Grid(rng.getrandbits(100))
            b = Grid(rng.getrandbits(100))
            op = rng.choice(BINARY_OPS + UNARY_OPS)
            if op in BINARY_OPS:
                result = apply_binary(op, a, b)
                cases.append({"op": op, "a": a.key, "b": b.key, "result": result.key})
            else:
                result = apply_unary(op, a)
                cases.append({"op": op, "a": a.key, "result": result.key})
        payload = {"config": {"count": args.golden_count, "seed": args.seed or 0}, "cases": cases}
        with open(args.golden_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        print(f"{len(cases)} golden cases -> {args.golden_out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patternbuilder",
        description="Grid-pattern synthesis workbench",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run a model over a curriculum")
    run.add_argument("--model", required=True,
                     choices=["nolib", "rc", "gl", "pl", "oracle", "llm", "llm-h"])
    run.add_argument("--curriculum", required=True, help="path, or the names e1 / e2")
    run.add_argument("--budget", type=int, default=SynthesisBudget().max_candidates)
    run.add_argument("--max-size", type=int, default=None)
    run.add_argument("--k", type=int, default=1)
    run.add_argument("--q", type=float, default=0.3)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--trace-mode", default="solution_subtrees",
                     choices=["solution_subtrees", "all_retained"])
    run.add_argument("--backend", default="mock", choices=["mock", "http"])
    run.add_argument("--mock-script", default=None,
                     help="JSON array of scripted completions (mock backend)")
    run.add_argument("--out", required=True)
    run.set_defaults(fn=cmd_run)

    synth = sub.add_parser("synth", help="synthesize a single target")
    synth.add_argument("--target", required=True, help="grid JSON (rows) or {\"key\": ...}")
    synth.add_argument("--library", default=None)
    synth.add_argument("--budget", type=int, default=SynthesisBudget().max_candidates)
    synth.add_argument("--max-size", type=int, default=None)
    synth.add_argument("--trace-mode", default="solution_subtrees",
                       choices=["solution_subtrees", "all_retained"])
    synth.add_argument("--out", required=True)
    synth.set_defaults(fn=cmd_synth)

    an = sub.add_parser("analyze", help="metrics table from session logs")
    an.add_argument("--curriculum", required=True)
    an.add_argument("--logs", nargs="*", default=[])
    an.add_argument("--k", default="auto")
    an.add_argument("--seed", type=int, default=None)
    an.add_argument("--budget", type=int, default=200_000)
    an.add_argument("--jobs", type=int, default=1)
    an.add_argument("--out-csv", required=True)
    an.add_argument("--out-json", required=True)
    an.set_defaults(fn=cmd_analyze)

    rp = sub.add_parser("replay", help="verify one session log")
    rp.add_argument("--log", required=True)
    rp.set_defaults(fn=cmd_replay)

    ex = sub.add_parser("explore", help="symmetry-biased random walk")
    ex.add_argument("--steps", type=int, default=100_000)
    ex.add_argument("--pool-size", type=int, default=256)
    ex.add_argument("--seed", type=int, default=None)
    ex.add_argument("--axes", default=None,
                    help="comma-separated subset of horizontal,vertical,main_diagonal,anti_diagonal")
    ex.add_argument("--out", required=True, help="line-delimited JSON discovery log")
    ex.add_argument("--summary-out", default=None)
    ex.set_defaults(fn=cmd_explore)

    hard = sub.add_parser("hardness", help="flat-tuple helper selection kit")
    hard_sub = hard.add_subparsers(dest="hardness_cmd", required=True)
    hard_sub.add_parser("demo", help="worked example and its reduction")
    rand = hard_sub.add_parser("random", help="random graph: reduction vs brute force")
    rand.add_argument("--n", type=int, default=4)
    rand.add_argument("--m", type=int, default=4)
    rand.add_argument("--p", type=float, default=0.5)
    rand.add_argument("--seed", type=int, default=None)
    red = hard_sub.add_parser("reduce", help="emit the reduction of a graph")
    red.add_argument("--graph", required=True)
    red.add_argument("--k", type=int, required=True)
    red.add_argument("--out", required=True)
    hard.set_defaults(fn=cmd_hardness)

    cur = sub.add_parser("curriculum", help="build, generate, validate curricula")
    cur_sub = cur.add_subparsers(dest="curriculum_cmd", required=True)
    be1 = cur_sub.add_parser("build-e1")
    be1.add_argument("--out", required=True)
    gg = cur_sub.add_parser("generate-group")
    gg.add_argument("--helper", required=True, help="program JSON file")
    gg.add_argument("--x", required=True)
    gg.add_argument("--out", required=True)
    val = cur_sub.add_parser("validate")
    val.add_argument("--curriculum", required=True)
    val.add_argument("--budget", type=int, default=120_000_000)
    val.add_argument("--jobs", type=int, default=1)
    cur.set_defaults(fn=cmd_curriculum)

    ui = sub.add_parser("export-ui", help="emit curriculum JSON for the builder app")
    ui.add_argument("--curriculum", required=True)
    ui.add_argument("--out", required=True)
    ui.add_argument("--golden-out", default=None,
                    help="also write golden operator cases for the app's evaluator")
    ui.add_argument("--golden-count", type=int, default=1000)
    ui.add_argument("--seed", type=int, default=0)
    ui.set_defaults(fn=cmd_export_ui)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
