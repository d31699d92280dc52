"""Command-line interface: analyze, simulate, tail, bench, export-lp.

The analyze pipeline: parse -> validate -> infer contexts -> derive the
constraint system -> solve one LP per moment order and side -> soundness
checks -> central moments and tail bounds -> JSON report.  Reports are
byte-identical across runs for identical inputs, except for the timing
block.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import lp
from .analysis import AnalysisError, Derivation, analyze_program
from .contexts import LogicalContext, cond_facts, infer_contexts
from .interp import DEFAULT_STEP_LIMIT, estimate_moments
from .lang import CTrue, ParseError, Program, Tick, parse_program, program_stmts, validate
from .poly import Monomial, Polynomial
from .postproc import MomentBounds, TailCurve, central_upper, tail_curve
from .soundness import check_soundness


class PipelineError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _poly_json(p: Optional[Polynomial]) -> Optional[dict]:
    if p is None:
        return None
    return {str(mono): float(c) for mono, c in sorted(p.coeffs.items(), key=lambda kv: kv[0].sort_key())}


def _frac_json(x: Optional[Fraction]) -> Optional[dict]:
    if x is None:
        return None
    return {"value": float(x), "exact": str(x)}


@dataclass
class AnalysisReport:
    program_id: str
    m: int
    d: int
    valuation: dict[str, float]
    bounds: MomentBounds
    central: dict[int, Optional[Fraction]]
    central_polys: dict[int, Optional[Polynomial]]
    soundness: dict
    lp_stats: dict
    notes: list[str] = field(default_factory=list)
    simulation: Optional[dict] = None
    timing: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        moments = []
        for k in range(1, self.m + 1):
            moments.append({
                "k": k,
                "lower": _frac_json(self.bounds.lo.get(k)),
                "upper": _frac_json(self.bounds.hi.get(k)),
                "lower_poly": _poly_json(self.bounds.lo_polys.get(k)),
                "upper_poly": _poly_json(self.bounds.hi_polys.get(k)),
            })
        central = []
        for k in range(2, self.m + 1):
            central.append({
                "k": k,
                "upper": _frac_json(self.central.get(k)),
                "upper_poly": _poly_json(self.central_polys.get(k)),
            })
        return {
            "program": self.program_id,
            "moment": self.m,
            "degree": self.d,
            "eval": self.valuation,
            "moments": moments,
            "central": central,
            "soundness": self.soundness,
            "lp": self.lp_stats,
            "notes": self.notes,
            "simulation": self.simulation,
            "timing": self.timing,
        }


def find_eval_point(program: Program) -> dict[str, Fraction]:
    """A concrete valuation satisfying the precondition, found by LP
    feasibility (facts tightened by one to clear strict inequalities)."""
    from .interp import eval_cond

    facts = cond_facts(program.pre, True)
    if facts is None:
        raise PipelineError("eval", "precondition is unsatisfiable")
    for margin in (Fraction(1), Fraction(0)):
        rows = [lp.Constraint(dict(f.coeffs), "ge", -f.const + margin, "pre") for f in facts]
        pre = lp.Presolved(list(program.vars), set(), rows)
        sol = pre.solve({}, "min", exact=True)
        if sol.status != "optimal":
            continue
        point = {v: sol.assignment.get(v, Fraction(0)) for v in program.vars}
        if eval_cond(program.pre, point):
            return point
    raise PipelineError("eval", "could not find a point satisfying the precondition; pass --eval")


def _program_ticks_nonnegative(program: Program) -> bool:
    return all(s.cost >= 0 for s in program_stmts(program) if isinstance(s, Tick))


def run_analyze(
    program: Program,
    program_id: str,
    m: int,
    d: int,
    valuation: Optional[dict[str, Fraction]] = None,
    solver: str = "builtin",
    exact: bool = False,
    simulate_trials: int = 0,
    seed: int = 0,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> AnalysisReport:
    timing: dict[str, float] = {}
    t0 = time.perf_counter()
    diagnostics = validate(program)
    if diagnostics:
        raise PipelineError("validate", "; ".join(str(d) for d in diagnostics))

    t = time.perf_counter()
    contexts = infer_contexts(program)
    timing["contexts"] = time.perf_counter() - t

    if valuation is None:
        valuation = find_eval_point(program)
    else:
        valuation = {v: Fraction(x) for v, x in valuation.items()}

    t = time.perf_counter()
    try:
        der = analyze_program(program, m=m, d=d, contexts=contexts)
    except AnalysisError as exc:
        raise PipelineError("derive", str(exc)) from exc
    timing["derive"] = time.perf_counter() - t

    t = time.perf_counter()
    presolved = der.presolved()
    timing["presolve"] = time.perf_counter() - t

    notes: list[str] = []
    bounds = MomentBounds(
        m=m,
        valuation={v: Fraction(x) for v, x in valuation.items()},
        lo_polys={}, hi_polys={},
        nonnegative_cost=_program_ticks_nonnegative(program),
    )
    solve_time = 0.0
    pivots = 0
    full_val = {v: Fraction(0) for v in program.vars}
    full_val.update(bounds.valuation)
    for k in range(1, m + 1):
        for side in ("lower", "upper"):
            try:
                obj = der.build_objective(valuation, k, side)
            except AnalysisError as exc:
                raise PipelineError("objective", str(exc)) from exc
            sense = "max" if side == "lower" else "min"
            sol = presolved.solve(obj.terms, sense, obj.const, exact=exact)
            solve_time += sol.solve_time
            pivots += sol.pivots
            if sol.status != "optimal":
                notes.append(f"{side} bound on moment {k}: no bound at this template degree (LP {sol.status})")
                if side == "lower":
                    bounds.lo[k] = None
                    bounds.lo_polys[k] = None
                else:
                    bounds.hi[k] = None
                    bounds.hi_polys[k] = None
                continue
            comp = der.root.components[k]
            poly = (comp.lo if side == "lower" else comp.hi).resolve(sol.assignment)
            if side == "lower":
                bounds.lo[k] = sol.objective_value
                bounds.lo_polys[k] = poly
            else:
                bounds.hi[k] = sol.objective_value
                bounds.hi_polys[k] = poly
    timing["solve"] = solve_time

    central: dict[int, Optional[Fraction]] = {}
    central_polys: dict[int, Optional[Polynomial]] = {}
    for k in range(2, m + 1):
        numeric, poly = central_upper(bounds, k)
        central[k] = numeric
        central_polys[k] = poly

    t = time.perf_counter()
    verdict = check_soundness(program, m, d, contexts=contexts, valuation=valuation)
    timing["soundness"] = time.perf_counter() - t

    simulation = None
    if simulate_trials > 0:
        t = time.perf_counter()
        est = estimate_moments(program, m, simulate_trials, seed, step_limit, init=valuation)
        timing["simulate"] = time.perf_counter() - t
        agreement = {}
        for k in range(1, m + 1):
            lo, hi = bounds.lo.get(k), bounds.hi.get(k)
            se = est.stderr[k]
            ok = True
            if lo is not None and est.raw[k] < float(lo) - 4 * se:
                ok = False
            if hi is not None and est.raw[k] > float(hi) + 4 * se:
                ok = False
            agreement[str(k)] = ok
        simulation = {
            "trials": est.trials,
            "seed": seed,
            "moments": [
                {"k": k, "raw": est.raw[k],
                 "central": est.central.get(k),
                 "stderr": est.stderr[k]}
                for k in range(1, m + 1)
            ],
            "nonterminated": est.nonterminated,
            "within_bounds": agreement,
        }

    timing["total"] = time.perf_counter() - t0
    return AnalysisReport(
        program_id=program_id,
        m=m, d=d,
        valuation={v: float(x) for v, x in bounds.valuation.items()},
        bounds=bounds,
        central=central,
        central_polys=central_polys,
        soundness=verdict.to_json(),
        lp_stats={**der.cset.stats(), "pivots": pivots,
                  "residual_rows": len(presolved.rows), "mode": "exact" if exact else "float"},
        notes=notes,
        simulation=simulation,
        timing=timing,
    )


def report_tail_curve(report: AnalysisReport, a_range: tuple[float, float, float]) -> TailCurve:
    return tail_curve(report.bounds, report.central, a_range)


def build_export(program: Program, m: int, d: int, valuation, k: int, side: str) -> str:
    contexts = infer_contexts(program)
    der = analyze_program(program, m=m, d=d, contexts=contexts)
    obj = der.build_objective(valuation, k, side)
    problem = lp.LPProblem(
        variables=list(der.cset.variables),
        nonneg=set(der.cset.nonneg),
        constraints=list(der.cset.rows),
        objective=dict(obj.terms),
        objective_const=obj.const,
        sense="min" if side == "upper" else "max",
    )
    return lp.export_lp(problem)


# argument handling


def _parse_eval(text: Optional[str]) -> Optional[dict[str, Fraction]]:
    if not text:
        return None
    out = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not _:
            raise argparse.ArgumentTypeError(f"bad --eval entry {part!r}")
        out[name.strip()] = Fraction(value.strip())
    return out


def _load_program(path: str) -> Program:
    try:
        return parse_program(Path(path).read_text())
    except ParseError as exc:
        raise PipelineError("parse", str(exc)) from exc


def _emit(data: dict, json_path: Optional[str]):
    text = json.dumps(data, indent=2, sort_keys=True)
    if json_path:
        Path(json_path).write_text(text + "\n")
    else:
        print(text)


def cmd_analyze(args) -> int:
    program = _load_program(args.file)
    report = run_analyze(
        program, Path(args.file).stem, args.moment, args.degree,
        valuation=_parse_eval(args.eval), solver=args.solver,
        exact=args.exact, simulate_trials=args.trials, seed=args.seed,
        step_limit=args.step_limit,
    )
    if args.solver == "export":
        val = _parse_eval(args.eval) or find_eval_point(program)
        text = build_export(program, args.moment, args.degree, val, args.moment, "upper")
        out = args.out or (Path(args.file).stem + ".lp")
        Path(out).write_text(text)
        print(f"wrote {out}")
        return 0
    _emit(report.to_json(), args.json)
    return 0


def cmd_simulate(args) -> int:
    program = _load_program(args.file)
    est = estimate_moments(
        program, args.moment, args.trials, args.seed, args.step_limit,
        init=_parse_eval(args.eval),
    )
    data = {
        "trials": est.trials,
        "moments": [
            {"k": k, "raw": est.raw[k], "central": est.central.get(k), "stderr": est.stderr[k]}
            for k in range(1, args.moment + 1)
        ],
        "nonterminated": est.nonterminated,
    }
    _emit(data, args.json)
    return 0


def cmd_tail(args) -> int:
    program = _load_program(args.file)
    report = run_analyze(
        program, Path(args.file).stem, args.moment, args.degree,
        valuation=_parse_eval(args.eval), exact=args.exact,
    )
    try:
        start, stop, step = (float(x) for x in args.range.split(":"))
    except ValueError:
        raise PipelineError("tail", f"bad --range {args.range!r}; expected start:stop:step")
    curve = report_tail_curve(report, (start, stop, step))
    text = curve.to_csv()
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_export_lp(args) -> int:
    program = _load_program(args.file)
    k, _, side = (args.objective or f"{args.moment}:upper").partition(":")
    val = _parse_eval(args.eval) or find_eval_point(program)
    text = build_export(program, args.moment, args.degree, val, int(k), side or "upper")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def run_bench(corpus_dir: str, json_path: Optional[str] = None, trials_override: Optional[int] = None) -> dict:
    """Per-program pass/fail against the expected-value sidecar files."""
    rows = []
    for appl in sorted(Path(corpus_dir).glob("*.appl")):
        sidecar = appl.with_suffix(".expect.json")
        if not sidecar.exists():
            rows.append({"program": appl.stem, "status": "skipped", "reason": "missing sidecar"})
            continue
        spec = json.loads(sidecar.read_text())
        program = _load_program(str(appl))
        valuation = {k: Fraction(str(v)) for k, v in spec.get("eval", {}).items()} or None
        trials = trials_override if trials_override is not None else spec.get("trials", 0)
        t0 = time.perf_counter()
        try:
            report = run_analyze(
                program, appl.stem, spec["moment"], spec["degree"],
                valuation=valuation, simulate_trials=trials, seed=spec.get("seed", 0),
            )
        except PipelineError as exc:
            rows.append({"program": appl.stem, "status": "error", "reason": str(exc)})
            continue
        tol = float(spec.get("tolerance", 1e-6))
        failures = []
        checks = spec.get("checks", {})
        for k_str, expected in checks.get("hi", {}).items():
            got = report.bounds.hi.get(int(k_str))
            if got is None or float(got) > expected + tol:
                failures.append(f"hi{k_str}={None if got is None else float(got)}>{expected}")
        for k_str, expected in checks.get("lo", {}).items():
            got = report.bounds.lo.get(int(k_str))
            if got is None or float(got) < expected - tol:
                failures.append(f"lo{k_str}={None if got is None else float(got)}<{expected}")
        for k_str, expected in checks.get("central", {}).items():
            got = report.central.get(int(k_str))
            if got is None or float(got) > expected + tol:
                failures.append(f"central{k_str}={None if got is None else float(got)}>{expected}")
        if spec.get("soundness", "pass") == "pass" and report.soundness["overall"] != "pass":
            failures.append("soundness=fail")
        if report.simulation is not None:
            bad = [k for k, ok in report.simulation["within_bounds"].items() if not ok]
            if bad:
                failures.append(f"simulation outside bounds for k in {bad}")
        rows.append({
            "program": appl.stem,
            "status": "pass" if not failures else "fail",
            "failures": failures,
            "soundness": report.soundness["overall"],
            "seconds": round(time.perf_counter() - t0, 3),
        })
    summary = {"rows": rows, "passed": sum(r["status"] == "pass" for r in rows),
               "failed": sum(r["status"] == "fail" for r in rows),
               "skipped": sum(r["status"] == "skipped" for r in rows)}
    if json_path:
        Path(json_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_bench(args) -> int:
    summary = run_bench(args.dir, json_path=args.json, trials_override=args.trials if args.trials else None)
    for row in summary["rows"]:
        status = row["status"].upper()
        extra = "; ".join(row.get("failures", [])) or row.get("reason", "")
        print(f"{row['program']:<16} {status:<8} {extra}")
    print(f"passed={summary['passed']} failed={summary['failed']} skipped={summary['skipped']}")
    return 0 if summary["failed"] == 0 else 1


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="momentbound",
                                     description="Moment-interval analysis of cost accumulators")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_degree=True):
        p.add_argument("file")
        p.add_argument("--moment", type=int, default=2, help="highest moment order m")
        if with_degree:
            p.add_argument("--degree", type=int, default=1, help="template degree per moment order")
        p.add_argument("--eval", default=None, help="objective valuation, e.g. d=10,x=0")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--step-limit", type=int, default=DEFAULT_STEP_LIMIT)

    p = sub.add_parser("analyze", help="infer moment bounds and emit a JSON report")
    common(p)
    p.add_argument("--trials", type=int, default=0, help="optional simulation comparison")
    p.add_argument("--solver", choices=("builtin", "export"), default="builtin")
    p.add_argument("--exact", action="store_true", help="all-rational simplex")
    p.add_argument("--json", default=None)
    p.add_argument("--out", default=None, help="output path for --solver export")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte-Carlo moment estimation")
    common(p, with_degree=False)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--json", default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("tail", help="emit tail-probability bound curves as CSV")
    common(p)
    p.add_argument("--range", default="1:100:1", help="thresholds start:stop:step")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--csv", default=None)
    p.set_defaults(fn=cmd_tail)

    p = sub.add_parser("bench", help="run a corpus directory against sidecar expectations")
    p.add_argument("dir")
    p.add_argument("--trials", type=int, default=0, help="override sidecar simulation trials")
    p.add_argument("--json", default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("export-lp", help="write the constraint system in LP format")
    common(p)
    p.add_argument("--objective", default=None, help="k:side, e.g. 2:upper")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_export_lp)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
