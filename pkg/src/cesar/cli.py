"""Command-line front end: synth / check / qe / reduce / bench.

Exit codes: 0 success, 1 usage or input error, 2 no solution (synth) or
failed rows (bench), 3 failed obligations (check).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import arith, checker, parser as P, qe, synthesis, syntax as S
from .parser import ProblemSketch, SyntaxError_, TemplateViolation
from .qe import Context, SmtBackend
from .reduce import LoopInInput, reduce
from .synthesis import NoSolution, Solution


def _context_from_args(args) -> Context:
    backend = None
    spec = os.environ.get("CESAR_SMT") or getattr(args, "backend", "internal")
    if spec and spec != "internal":
        cmd = spec[4:] if spec.startswith("smt:") else spec
        backend = SmtBackend(cmd)
    return Context(simplify_full=not getattr(args, "no_simplify", False),
                   qe_timeout=getattr(args, "timeout", 30.0),
                   backend=backend)


def solution_to_json(s: Solution) -> dict:
    return {
        "problem": s.problem,
        "invariant": P.print_formula(s.invariant),
        "guards": {name: P.print_formula(g) for name, g in s.guards.items()},
        "guarantee": s.guarantee,
        "exact": {"invariant": s.exact_invariant, "guards": s.exact_guards},
        "stats": {"unroll": s.stats.unroll, "qe_calls": s.stats.qe_calls,
                  "wall_ms": s.stats.wall_ms},
    }


def solution_from_json(p: ProblemSketch, data: dict) -> Solution:
    guards = {}
    sketch_vars = _sketch_vars(p)
    for name, _ in p.actions:
        if name not in data.get("guards", {}):
            raise ValueError(f"solution is missing a guard for action {name}")
    for name, text in data["guards"].items():
        if name not in dict(p.actions):
            raise ValueError(f"solution guards unknown action {name}")
        guards[name] = P.parse_formula(text)
    invariant = P.parse_formula(data["invariant"])
    for label, f in [("invariant", invariant)] + [(f"guard {n}", g) for n, g in guards.items()]:
        extra = S.free_vars(f) - sketch_vars
        if extra:
            raise ValueError(f"{label} mentions variables absent from the sketch: {sorted(extra)}")
    exact = data.get("exact", {})
    stats_d = data.get("stats", {})
    return Solution(data.get("problem", p.name), invariant, guards,
                    data.get("guarantee", "sound"),
                    bool(exact.get("invariant", False)), bool(exact.get("guards", False)),
                    synthesis.Stats(stats_d.get("unroll", 0), stats_d.get("qe_calls", 0),
                                    stats_d.get("wall_ms", 0)))


def _sketch_vars(p: ProblemSketch) -> frozenset:
    out = set(S.free_vars(p.assum) | S.free_vars(p.safe) | S.free_vars(p.domain)
              | S.free_vars(p.cycle_bound))
    for v, rhs in p.plant_odes:
        out.add(v)
        out |= S.free_vars(rhs)
    for _, a in p.actions:
        out |= S.all_names(a)
    return frozenset(out)


def _print_solution(s: Solution, emit: str, out) -> None:
    if emit == "json":
        print(json.dumps(solution_to_json(s), indent=2), file=out)
        return
    print(f"problem   : {s.problem}", file=out)
    print(f"guarantee : {s.guarantee}", file=out)
    print(f"invariant : {P.print_formula(s.invariant)}", file=out)
    for name, g in s.guards.items():
        print(f"guard {name:<10}: {P.print_formula(g)}", file=out)
    print(f"exact     : invariant={s.exact_invariant} guards={s.exact_guards}", file=out)
    print(f"stats     : unroll={s.stats.unroll} qe_calls={s.stats.qe_calls} "
          f"wall_ms={s.stats.wall_ms}", file=out)
    print("", file=out)


def cmd_synth(args) -> int:
    try:
        sketch = P.parse_problem(Path(args.file).read_text())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SyntaxError_, TemplateViolation) as exc:
        print(f"error: {args.file}: {exc}", file=sys.stderr)
        return 1
    ctx = _context_from_args(args)
    count = 0
    try:
        for sol in synthesis.run(sketch, args.unroll, ctx,
                                 optimality=args.optimality == "on"):
            _print_solution(sol, args.emit, sys.stdout)
            count += 1
    except NoSolution as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if count else 2


def cmd_check(args) -> int:
    try:
        sketch = P.parse_problem(Path(args.file).read_text())
        data = json.loads(Path(args.solution).read_text())
        sol = solution_from_json(sketch, data)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SyntaxError_, TemplateViolation, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ctx = _context_from_args(args)
    report = checker.check_solution(sketch, sol, ctx)
    sim = checker.simulate_check(sketch, sol, trials=args.trials, seed=args.seed, ctx=ctx)
    ok = report.passed and sim.passed
    if args.emit == "json":
        payload = {
            "problem": sketch.name,
            "passed": ok,
            "obligations": [{"name": o.name, "status": o.status,
                             "description": o.description, "detail": o.detail}
                            for o in report.obligations],
            "simulation": {"trials": sim.trials, "completed": sim.completed,
                           "violations": sim.violations, "skipped": sim.skipped,
                           "reason": sim.reason},
        }
        print(json.dumps(payload, indent=2))
    else:
        for line in report.lines():
            print(line)
        if sim.skipped:
            print(f"[skipped] simulation: {sim.reason}")
        else:
            print(f"[{'   pass' if sim.passed else '   FAIL'}] simulation: "
                  f"{sim.completed} trials, {len(sim.violations)} violations")
            for v in sim.violations[:5]:
                print(f"    {v}")
    return 0 if ok else 3


def cmd_qe(args) -> int:
    ctx = _context_from_args(args)
    try:
        f = P.parse_formula(args.formula)
        res = qe.eliminate(f, ctx)
        out = ctx.simplify(res.formula, S.TRUE)
        print(P.print_formula(out))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_reduce(args) -> int:
    ctx = _context_from_args(args)
    try:
        f = P.parse_formula(args.formula)
        assum = P.parse_formula(args.assum) if args.assum else S.TRUE
        res = reduce(f, assum, ctx)
        print(P.print_formula(res.formula))
        print(f"exact: {res.exact}", file=sys.stderr)
    except LoopInInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _solution_size(s: Solution) -> int:
    total = len(P.print_formula(s.invariant))
    for g in s.guards.values():
        total += len(P.print_formula(g))
    return total


def _bench_one(path: Path, args) -> dict:
    row = {"name": path.stem, "error": ""}
    try:
        sketch = P.parse_problem(path.read_text())
        ctx = _context_from_args(args)
        t0 = time.monotonic()
        sols = list(synthesis.run(sketch, args.unroll, ctx,
                                  optimality=args.optimality == "on"))
        row["synth_s"] = round(time.monotonic() - t0, 2)
        final = sols[-1]
        row["guarantee"] = final.guarantee
        row["exact"] = f"I={final.exact_invariant} G={final.exact_guards}"
        row["size"] = _solution_size(final)
        t1 = time.monotonic()
        report = checker.check_solution(sketch, final, ctx)
        row["check_s"] = round(time.monotonic() - t1, 2)
        row["check"] = "pass" if report.passed else "FAIL"
        if args.compare_simplify:
            raw_ctx = _context_from_args(args)
            raw_ctx.simplify_full = False
            try:
                raw = list(synthesis.run(sketch, args.unroll, raw_ctx,
                                         optimality=False))
                raw_size = _solution_size(raw[-1])
                row["raw_size"] = raw_size
                row["reduction"] = f"{100 * (raw_size - row['size']) / raw_size:.0f}%" \
                    if raw_size else "-"
            except Exception as exc:
                row["raw_size"] = "-"
                row["reduction"] = f"(error: {type(exc).__name__})"
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_bench(args) -> int:
    directory = Path(args.dir)
    files = sorted(directory.glob("*.cesar"))
    rows = [_bench_one(path, args) for path in files]
    cols = ["name", "synth_s", "check_s", "guarantee", "exact", "check", "size"]
    if args.compare_simplify:
        cols += ["raw_size", "reduction"]
    cols.append("error")
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows)) if rows else len(c)
              for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for r in rows:
        print("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in cols))
    return 2 if any(r["error"] for r in rows) else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cesar",
                                 description="control-envelope synthesis for hybrid systems")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--timeout", type=float, default=30.0,
                        help="wall-clock budget per QE call (seconds)")
        sp.add_argument("--backend", default="internal",
                        help="'internal' or 'smt:CMD' for an SMT-LIB 2 solver")
        sp.add_argument("--no-simplify", action="store_true",
                        help="disable eager simplification")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--emit", choices=("json", "text"), default="json")

    sp = sub.add_parser("synth", help="synthesize invariant and guards")
    sp.add_argument("file")
    sp.add_argument("--unroll", type=int, default=2)
    sp.add_argument("--optimality", choices=("on", "off"), default="on")
    common(sp)
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("check", help="check a solution file against a sketch")
    sp.add_argument("file")
    sp.add_argument("solution")
    sp.add_argument("--trials", type=int, default=1000)
    common(sp)
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("qe", help="eliminate quantifiers from a formula")
    sp.add_argument("formula")
    common(sp)
    sp.set_defaults(fn=cmd_qe)

    sp = sub.add_parser("reduce", help="reduce a loop-free game formula")
    sp.add_argument("formula")
    sp.add_argument("assum", nargs="?", default="")
    common(sp)
    sp.set_defaults(fn=cmd_reduce)

    sp = sub.add_parser("bench", help="run a benchmark directory")
    sp.add_argument("dir")
    sp.add_argument("--unroll", type=int, default=2)
    sp.add_argument("--optimality", choices=("on", "off"), default="on")
    sp.add_argument("--compare-simplify", action="store_true",
                    help="add a no-simplification size comparison column")
    common(sp)
    sp.set_defaults(fn=cmd_bench)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
