"""Logical contexts: conjunctions of linear facts over program variables,
inferred by a forward abstract interpretation.

A fact is an inequality sum(coeffs * var) + const >= 0.  Strict guards are
over-approximated by their non-strict closures, which is sound for both
reachability and for the nonnegativity certificates built from the facts.
Entailment is decided by exact LP feasibility; joins keep candidate facts
(both sides' facts, their one-variable projections, and threshold bounds)
that are entailed by both sides.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from . import lp
from .lang import (
    And, Assign, Call, Cond, Const, CTrue, Expr, If, Le, Not, Prob, Program,
    Sample, Seq, Skip, Stmt, Tick, Var, While, expr_to_poly,
)
from .poly import Monomial, Polynomial, dist_support_bounds

MAX_FACTS = 24
JOIN_ROUNDS = 3
MAX_ROUNDS = 6

_ENTAILS_CACHE: dict = {}


@dataclass(frozen=True)
class Fact:
    """sum(coeffs[v] * v) + const >= 0, coefficients normalized."""

    coeffs: tuple[tuple[str, Fraction], ...]
    const: Fraction

    @staticmethod
    def make(coeffs: Mapping[str, Fraction], const) -> "Fact":
        items = {v: Fraction(c) for v, c in coeffs.items() if c != 0}
        const = Fraction(const)
        if items:
            scale = None
            for c in items.values():
                mag = abs(c)
                scale = mag if scale is None else min(scale, mag)
            if scale and scale != 1:
                items = {v: c / scale for v, c in items.items()}
                const = const / scale
        return Fact(tuple(sorted(items.items())), const)

    def variables(self) -> set[str]:
        return {v for v, _ in self.coeffs}

    def coeff(self, var: str) -> Fraction:
        for v, c in self.coeffs:
            if v == var:
                return c
        return Fraction(0)

    def to_poly(self) -> Polynomial:
        coeffs = {Monomial.var(v): c for v, c in self.coeffs}
        if self.const:
            coeffs[Monomial.unit()] = self.const
        return Polynomial(coeffs)

    def drop(self, var: str) -> "Fact":
        return Fact.make({v: c for v, c in self.coeffs if v != var}, self.const)

    def __str__(self):
        parts = [f"{c}*{v}" for v, c in self.coeffs]
        parts.append(str(self.const))
        return " + ".join(parts) + " >= 0"


class LogicalContext:
    """Conjunction of facts, or the distinguished unreachable context."""

    __slots__ = ("facts", "bottom", "_presolved", "_unsat")

    def __init__(self, facts: Iterable[Fact] = (), bottom: bool = False):
        seen = []
        for f in facts:
            if not f.coeffs:
                if f.const < 0:
                    bottom = True
                continue
            if f not in seen:
                seen.append(f)
        self.facts: tuple[Fact, ...] = tuple(seen[:MAX_FACTS]) if not bottom else ()
        self.bottom = bottom
        self._presolved: Optional[lp.Presolved] = None
        self._unsat: Optional[bool] = None

    @staticmethod
    def top() -> "LogicalContext":
        return LogicalContext(())

    @staticmethod
    def bot() -> "LogicalContext":
        return LogicalContext((), bottom=True)

    def is_bottom(self) -> bool:
        return self.bottom or self.unsat()

    def unsat(self) -> bool:
        if self.bottom:
            return True
        if self._unsat is None:
            pre = self._solver()
            if pre.infeasible_reason is not None:
                self._unsat = True
            else:
                sol = pre.solve({}, "min", exact=True)
                self._unsat = sol.status == "infeasible"
        return self._unsat

    def _solver(self) -> lp.Presolved:
        if self._presolved is None:
            constraints = [
                lp.Constraint(dict(f.coeffs), "ge", -f.const, tag=f"fact{idx}")
                for idx, f in enumerate(self.facts)
            ]
            variables = sorted({v for f in self.facts for v in f.variables()})
            self._presolved = lp.Presolved(variables, set(), constraints)
        return self._presolved

    def with_facts(self, extra: Iterable[Fact]) -> "LogicalContext":
        if self.bottom:
            return self
        return LogicalContext(self.facts + tuple(extra))

    def entails(self, fact: Fact) -> bool:
        """Does every state satisfying the context satisfy the fact?"""
        if self.is_bottom():
            return True
        if fact in self.facts:
            return True
        if not fact.coeffs:
            return fact.const >= 0
        key = (self, fact)
        cached = _ENTAILS_CACHE.get(key)
        if cached is not None:
            return cached
        result = self._entails_lp(fact)
        if len(_ENTAILS_CACHE) > 200_000:
            _ENTAILS_CACHE.clear()
        _ENTAILS_CACHE[key] = result
        return result

    def _entails_lp(self, fact: Fact) -> bool:
        free = fact.variables() - {v for f in self.facts for v in f.variables()}
        if free:
            return False
        objective = dict(fact.coeffs)
        sol = self._solver().solve(objective, "min", exact=True)
        if sol.status == "unbounded":
            return False
        if sol.status == "infeasible":
            return True
        if sol.status != "optimal":
            return False
        return sol.objective_value is not None and sol.objective_value >= -fact.const

    def var_lower(self, var: str) -> Optional[Fraction]:
        """Greatest known constant lower bound for var, None if unbounded."""
        if self.is_bottom():
            return Fraction(0)
        if all(var not in f.variables() for f in self.facts):
            return None
        sol = self._solver().solve({var: Fraction(1)}, "min", exact=True)
        if sol.status == "optimal":
            return sol.objective_value
        if sol.status == "infeasible":
            return Fraction(0)
        return None

    def var_upper(self, var: str) -> Optional[Fraction]:
        if self.is_bottom():
            return Fraction(0)
        if all(var not in f.variables() for f in self.facts):
            return None
        sol = self._solver().solve({var: Fraction(1)}, "max", exact=True)
        if sol.status == "optimal":
            return sol.objective_value
        if sol.status == "infeasible":
            return Fraction(0)
        return None

    def nonneg_vars(self) -> set[str]:
        out = set()
        for v in {w for f in self.facts for w in f.variables()}:
            lo = self.var_lower(v)
            if lo is not None and lo >= 0:
                out.add(v)
        return out

    def __eq__(self, other):
        if not isinstance(other, LogicalContext):
            return NotImplemented
        return self.bottom == other.bottom and set(self.facts) == set(other.facts)

    def __hash__(self):
        return hash((self.bottom, frozenset(self.facts)))

    def __str__(self):
        if self.bottom:
            return "false"
        if not self.facts:
            return "true"
        return " /\\ ".join(str(f) for f in self.facts)


def _linear_parts(e: Expr) -> Optional[tuple[dict[str, Fraction], Fraction]]:
    """Decompose a linear expression as (coeffs, const); None if nonlinear."""
    p = expr_to_poly(e)
    coeffs: dict[str, Fraction] = {}
    const = Fraction(0)
    for m, c in p.coeffs.items():
        if m.degree == 0:
            const = Fraction(c)
        elif m.degree == 1:
            (v, _), = m.powers
            coeffs[v] = Fraction(c)
        else:
            return None
    return coeffs, const


def cond_facts(cond: Cond, polarity: bool) -> Optional[list[Fact]]:
    """Linear facts implied by the (possibly negated) condition.

    Returns None when the branch is unreachable (condition constant-false).
    Disjunctive or nonlinear structure contributes no facts.
    """
    if isinstance(cond, CTrue):
        return [] if polarity else None
    if isinstance(cond, Not):
        return cond_facts(cond.inner, not polarity)
    if isinstance(cond, And):
        if polarity:
            left = cond_facts(cond.left, True)
            right = cond_facts(cond.right, True)
            if left is None or right is None:
                return None
            return left + right
        return []  # negated conjunction is a disjunction: no single fact
    if isinstance(cond, Le):
        left = _linear_parts(cond.left)
        right = _linear_parts(cond.right)
        if left is None or right is None:
            return []
        lc, lk = left
        rc, rk = right
        if polarity:
            coeffs = {v: rc.get(v, Fraction(0)) - lc.get(v, Fraction(0)) for v in set(lc) | set(rc)}
            return [Fact.make(coeffs, rk - lk)]
        coeffs = {v: lc.get(v, Fraction(0)) - rc.get(v, Fraction(0)) for v in set(lc) | set(rc)}
        return [Fact.make(coeffs, lk - rk)]
    raise TypeError(f"unknown condition {cond!r}")


def refine(ctx: LogicalContext, cond: Cond, polarity: bool) -> LogicalContext:
    if ctx.bottom:
        return ctx
    facts = cond_facts(cond, polarity)
    if facts is None:
        return LogicalContext.bot()
    return ctx.with_facts(facts)


def transfer_assign(ctx: LogicalContext, var: str, expr: Expr) -> LogicalContext:
    if ctx.bottom:
        return ctx
    parts = _linear_parts(expr)
    if parts is None:
        return LogicalContext([f for f in ctx.facts if var not in f.variables()])
    coeffs, const = parts
    # x := e  <=>  exists x0. facts[x -> x0] and x = e[x -> x0]
    old = "__old__"
    renamed = []
    for f in ctx.facts:
        c = f.coeff(var)
        if c == 0:
            renamed.append(f)
        else:
            items = {v: k for v, k in f.coeffs if v != var}
            items[old] = c
            renamed.append(Fact.make(items, f.const))
    self_coeff = coeffs.get(var, Fraction(0))
    eq_items = dict(coeffs)
    eq_items.pop(var, None)
    eq_items[old] = self_coeff
    eq_items[var] = eq_items.get(var, Fraction(0)) - 1
    # var = e[x->x0]:  e[x->x0] - var = 0, as two inequalities
    eq1 = Fact.make(eq_items, const)
    eq2 = Fact.make({v: -c for v, c in eq_items.items()}, -const)
    combined = renamed + [eq1, eq2]
    return LogicalContext(_eliminate(combined, old))


def transfer_sample(ctx: LogicalContext, var: str, dist) -> LogicalContext:
    if ctx.bottom:
        return ctx
    kept = [f for f in ctx.facts if var not in f.variables()]
    lo, hi = dist_support_bounds(dist)
    kept.append(Fact.make({var: Fraction(1)}, -lo))   # var >= lo
    kept.append(Fact.make({var: Fraction(-1)}, hi))   # var <= hi
    return LogicalContext(kept)


def _eliminate(facts: Sequence[Fact], var: str) -> list[Fact]:
    """Fourier-Motzkin elimination of var."""
    keep = [f for f in facts if f.coeff(var) == 0]
    pos = [f for f in facts if f.coeff(var) > 0]
    neg = [f for f in facts if f.coeff(var) < 0]
    out = list(keep)
    for fp, fn in itertools.product(pos, neg):
        cp, cn = fp.coeff(var), -fn.coeff(var)
        items: dict[str, Fraction] = {}
        for v, c in fp.coeffs:
            if v != var:
                items[v] = items.get(v, Fraction(0)) + c * cn
        for v, c in fn.coeffs:
            if v != var:
                items[v] = items.get(v, Fraction(0)) + c * cp
        const = fp.const * cn + fn.const * cp
        f = Fact.make(items, const)
        if f.coeffs or f.const < 0:
            out.append(f)
    return out[: 2 * MAX_FACTS]


def prune(ctx: LogicalContext) -> LogicalContext:
    """Drop facts entailed by the remaining ones."""
    if ctx.is_bottom() or len(ctx.facts) <= 1:
        return ctx
    kept = list(ctx.facts)
    changed = True
    while changed:
        changed = False
        for f in list(kept):
            rest = [g for g in kept if g != f]
            if LogicalContext(rest).entails(f):
                kept = rest
                changed = True
                break
    return LogicalContext(kept)


def join(a: LogicalContext, b: LogicalContext, thresholds: Sequence[Fact] = ()) -> LogicalContext:
    if a.is_bottom():
        return b
    if b.is_bottom():
        return a
    candidates: list[Fact] = list(a.facts) + list(b.facts)
    for ctx in (a, b):
        variables = {v for f in ctx.facts for v in f.variables()}
        for v in variables:
            candidates.extend(_eliminate(list(ctx.facts), v))
    candidates.extend(thresholds)
    out = []
    for f in candidates:
        if f in out:
            continue
        if a.entails(f) and b.entails(f):
            out.append(f)
        if len(out) >= MAX_FACTS:
            break
    return prune(LogicalContext(out))


def widen(old: LogicalContext, new: LogicalContext, thresholds: Sequence[Fact] = ()) -> LogicalContext:
    """Keep the facts of old that still hold in new, plus any threshold facts
    new entails (so a sliding bound can settle on a stable threshold instead
    of being widened away entirely)."""
    if old.is_bottom():
        return new
    if new.is_bottom():
        return old
    kept = [f for f in old.facts if new.entails(f)]
    for t in thresholds:
        if t not in kept and new.entails(t):
            kept.append(t)
    return LogicalContext(kept[:MAX_FACTS])


def _threshold_facts(program: Program) -> list[Fact]:
    """Candidate facts retained across widening: variable-vs-constant bounds
    built from the constants appearing in guards and the precondition."""
    constants: set[Fraction] = {Fraction(0)}

    def scan_cond(c: Cond):
        if isinstance(c, Not):
            scan_cond(c.inner)
        elif isinstance(c, And):
            scan_cond(c.left)
            scan_cond(c.right)
        elif isinstance(c, Le):
            for side in (c.left, c.right):
                parts = _linear_parts(side)
                if parts is not None:
                    constants.add(parts[1])
                    constants.add(-parts[1])

    def scan(s: Stmt):
        if isinstance(s, (While, If)):
            scan_cond(s.cond)
        for child in _stmt_children(s):
            scan(child)

    scan_cond(program.pre)
    for body in program.decls.values():
        scan(body)
    scan(program.main)
    out = []
    for v in program.vars:
        for c in sorted(constants):
            out.append(Fact.make({v: Fraction(1)}, -c))   # v >= c
            out.append(Fact.make({v: Fraction(-1)}, c))   # v <= c
    return out


def _stmt_children(s: Stmt):
    if isinstance(s, While):
        yield s.body
    elif isinstance(s, Prob):
        yield s.left
        yield s.right
    elif isinstance(s, If):
        yield s.then
        yield s.els
    elif isinstance(s, Seq):
        yield s.first
        yield s.second


@dataclass
class ContextInfo:
    stmt_pre: dict[int, LogicalContext]      # loc -> context before the statement
    fun_entry: dict[str, LogicalContext]
    fun_exit: dict[str, LogicalContext]
    thresholds: list[Fact]

    def at(self, stmt: Stmt) -> LogicalContext:
        return self.stmt_pre.get(stmt.loc, LogicalContext.top())


def _entailed_by(ctx: LogicalContext, facts: Iterable[Fact]) -> bool:
    return all(ctx.entails(f) for f in facts)


def infer_contexts(program: Program) -> ContextInfo:
    """Forward interprocedural analysis seeded by the precondition.

    Loop heads and function entries are joined round by round; if a head has
    not stabilized after JOIN_ROUNDS rounds its facts are widened away (and
    in the limit forced to top, which is trivially inductive).  Every head
    that survives is re-checked to be inductive, so the recorded contexts
    over-approximate reachability.
    """
    thresholds = _threshold_facts(program)
    pre_facts = cond_facts(program.pre, True)
    entry_main = LogicalContext.bot() if pre_facts is None else LogicalContext(pre_facts)

    info = ContextInfo({}, {}, {}, thresholds)
    site_ctxs: dict[str, dict[int, LogicalContext]] = {}

    def walk(s: Stmt, ctx: LogicalContext) -> LogicalContext:
        info.stmt_pre[s.loc] = ctx
        if isinstance(s, (Skip, Tick)):
            return ctx
        if isinstance(s, Assign):
            return transfer_assign(ctx, s.var, s.expr)
        if isinstance(s, Sample):
            return transfer_sample(ctx, s.var, s.dist)
        if isinstance(s, Call):
            site_ctxs.setdefault(s.fun, {})[s.loc] = ctx
            return info.fun_exit.get(s.fun, LogicalContext.bot())
        if isinstance(s, Prob):
            left = walk(s.left, ctx)
            right = walk(s.right, ctx)
            return join(left, right, thresholds)
        if isinstance(s, If):
            then_ctx = walk(s.then, refine(ctx, s.cond, True))
            else_ctx = walk(s.els, refine(ctx, s.cond, False))
            return join(then_ctx, else_ctx, thresholds)
        if isinstance(s, While):
            head = ctx
            for it in range(2 * MAX_ROUNDS):
                after = walk(s.body, refine(head, s.cond, True))
                if _entailed_by(ctx, head.facts) and _entailed_by(after, head.facts):
                    break  # head is inductive
                candidate = join(ctx, after, thresholds)
                head = candidate if it < JOIN_ROUNDS else widen(head, candidate, thresholds)
            else:
                head = LogicalContext.top()
            info.stmt_pre[s.loc] = head
            walk(s.body, refine(head, s.cond, True))
            return refine(head, s.cond, False)
        if isinstance(s, Seq):
            mid = walk(s.first, ctx)
            return walk(s.second, mid)
        raise TypeError(f"unknown statement {s!r}")

    def round_pass() -> tuple[dict, dict]:
        """One full walk; returns freshly recomputed entries and exits."""
        site_ctxs.clear()
        walk(program.main, entry_main)
        exits: dict[str, LogicalContext] = {}
        for name, body in program.decls.items():
            entry = info.fun_entry.get(name, LogicalContext.bot())
            if entry.is_bottom() and name not in site_ctxs:
                continue
            exits[name] = walk(body, entry)
        entries: dict[str, LogicalContext] = {}
        for name, sites in site_ctxs.items():
            acc = LogicalContext.bot()
            for _, ctx in sorted(sites.items()):
                acc = join(acc, ctx, thresholds)
            entries[name] = acc
        return entries, exits

    # Kleene iteration with widening: entries and exits are recomputed from
    # scratch each round, so stale facts cannot accumulate.
    converged = False
    for rnd in range(2 + JOIN_ROUNDS + MAX_ROUNDS):
        entries, exits = round_pass()
        new_entry = {}
        new_exit = {}
        for name in set(entries) | set(info.fun_entry):
            fresh = entries.get(name, LogicalContext.bot())
            if rnd > JOIN_ROUNDS:
                fresh = widen(info.fun_entry.get(name, LogicalContext.bot()), fresh, thresholds)
            new_entry[name] = fresh
        for name in set(exits) | set(info.fun_exit):
            fresh = exits.get(name, LogicalContext.bot())
            if rnd > JOIN_ROUNDS:
                fresh = widen(info.fun_exit.get(name, LogicalContext.bot()), fresh, thresholds)
            new_exit[name] = prune(fresh)
        if new_entry == info.fun_entry and new_exit == info.fun_exit:
            converged = True
            break
        info.fun_entry = new_entry
        info.fun_exit = new_exit
    if not converged:
        # sound fallback: no interprocedural facts at all
        info.fun_entry = {name: LogicalContext.top() for name in info.fun_entry}
        info.fun_exit = {name: LogicalContext.top() for name in info.fun_exit}
    # one final pass so stmt_pre reflects the fixpoint contexts
    round_pass()
    return info
