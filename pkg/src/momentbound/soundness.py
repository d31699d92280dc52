"""Side conditions that make the inferred moment bounds trustworthy:
finiteness of the stopping-time moment E[T^(m*d)], and the bounded-update
property of all assignments and samplings.

A program failing either check still gets bounds in its report, but the
report's soundness verdict marks them as unverified.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .analysis import AnalysisError, analyze_program
from .contexts import ContextInfo, LogicalContext, infer_contexts
from .lang import Add, Assign, Expr, Mul, Program, Sample, Var, expr_to_poly, program_stmts
from .poly import Polynomial, dist_support_bounds
from .semiring import NEG_INF, POS_INF, Interval, interval_add, interval_mul


@dataclass
class TerminationVerdict:
    passed: bool
    degree: int
    bound_value: Optional[Fraction] = None      # bound on E[T^degree] at the eval point
    bound_poly: Optional[dict] = None           # monomial-string -> float
    reason: str = ""


@dataclass
class BoundedUpdateVerdict:
    passed: bool
    witness: str = ""


@dataclass
class SoundnessVerdict:
    termination: TerminationVerdict
    bounded_update: BoundedUpdateVerdict
    required_degree: int

    @property
    def passed(self) -> bool:
        return self.termination.passed and self.bounded_update.passed

    def to_json(self) -> dict:
        return {
            "overall": "pass" if self.passed else "fail",
            "required_degree": self.required_degree,
            "termination": {
                "status": "pass" if self.termination.passed else "fail",
                "degree": self.termination.degree,
                "bound": None if self.termination.bound_value is None else float(self.termination.bound_value),
                "bound_poly": self.termination.bound_poly,
                "reason": self.termination.reason,
            },
            "bounded_update": {
                "status": "pass" if self.bounded_update.passed else "fail",
                "witness": self.bounded_update.witness,
            },
        }


def check_termination_moment(
    program: Program,
    k: int,
    d: int,
    contexts: Optional[ContextInfo] = None,
    valuation: Optional[dict] = None,
) -> TerminationVerdict:
    """Upper-bound E[T^k] by rerunning the derivation over the nonnegative
    upper-bound carrier with a unit charge per evaluation step; pass iff the
    LP is feasible."""
    if contexts is None:
        contexts = infer_contexts(program)
    try:
        der = analyze_program(program, m=k, d=d, mode="upper", contexts=contexts)
    except AnalysisError as exc:
        return TerminationVerdict(False, k, reason=f"derivation failed: {exc}")
    pre = der.presolved()
    try:
        obj = der.build_objective(valuation or {}, k, "upper")
    except AnalysisError as exc:
        return TerminationVerdict(False, k, reason=str(exc))
    sol = pre.solve(obj.terms, "min", obj.const)
    if sol.status != "optimal":
        return TerminationVerdict(False, k, reason=f"LP {sol.status}")
    poly = der.root.components[k].resolve(sol.assignment)
    return TerminationVerdict(
        True, k,
        bound_value=sol.objective_value,
        bound_poly={str(mono): float(c) for mono, c in poly.coeffs.items()},
    )


def _interval_of_poly(p, bounds: dict[str, Interval]) -> Interval:
    """Interval range of a polynomial over a variable box."""
    total = Interval.point(0)
    for mono, coeff in p.coeffs.items():
        term = Interval.point(Fraction(coeff))
        for v, e in mono.powers:
            iv = bounds.get(v, Interval(NEG_INF, POS_INF))
            for _ in range(e):
                term = interval_mul(term, iv)
        total = interval_add(total, term)
    return total


def _var_box(ctx: LogicalContext, variables) -> dict[str, Interval]:
    out = {}
    for v in variables:
        lo = ctx.var_lower(v)
        hi = ctx.var_upper(v)
        out[v] = Interval(NEG_INF if lo is None else lo, POS_INF if hi is None else hi)
    return out


def check_bounded_update(program: Program, contexts: Optional[ContextInfo] = None) -> BoundedUpdateVerdict:
    """Every assignment must change its variable by an amount bounded under
    the location's context; every sampled distribution has bounded support.

    Variables that are never assigned or sampled hold their initial value
    throughout, so they count as bounded (by a constant depending only on
    the initial state)."""
    if contexts is None:
        contexts = infer_contexts(program)
    mutable = {
        s.var for s in program_stmts(program) if isinstance(s, (Assign, Sample))
    }
    inputs = set(program.vars) - mutable
    for s in program_stmts(program):
        if isinstance(s, Assign):
            ctx = contexts.at(s)
            if ctx.is_bottom():
                continue  # unreachable assignment
            # bounded change keeps |x| growing at most linearly per step; a
            # bounded new value does too (the variable is reset below a
            # constant), so either suffices
            change = expr_to_poly(s.expr) - Polynomial.var(s.var)
            box = _var_box(ctx, sorted(change.variables() | {s.var} | expr_to_poly(s.expr).variables()))
            for v in inputs:
                # any finite stand-in works: only finiteness propagates
                box[v] = Interval(Fraction(-1), Fraction(1))
            change_iv = _interval_of_poly(change, box)
            if change_iv.lo != NEG_INF and change_iv.hi != POS_INF:
                continue
            value_iv = _interval_of_poly(expr_to_poly(s.expr), box)
            if value_iv.lo != NEG_INF and value_iv.hi != POS_INF:
                continue
            return BoundedUpdateVerdict(
                False,
                witness=(f"stmt#{s.loc}: change {s.var}' - {s.var} = {change} has range "
                         f"{change_iv} and the assigned value has range {value_iv}"),
            )
        if isinstance(s, Sample):
            # admitted distributions always have bounded support; this raises
            # on anything else
            dist_support_bounds(s.dist)
    return BoundedUpdateVerdict(True)


def _expr_vars(e: Expr):
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, (Add, Mul)):
        yield from _expr_vars(e.left)
        yield from _expr_vars(e.right)


def check_soundness(
    program: Program,
    m: int,
    d: int,
    contexts: Optional[ContextInfo] = None,
    valuation: Optional[dict] = None,
) -> SoundnessVerdict:
    """Both side conditions at the degree k = m*d required for moment order m
    with template degree d."""
    if contexts is None:
        contexts = infer_contexts(program)
    k = max(m * d, 1)
    term = check_termination_moment(program, k, d, contexts=contexts, valuation=valuation)
    upd = check_bounded_update(program, contexts=contexts)
    return SoundnessVerdict(termination=term, bounded_update=upd, required_degree=k)
