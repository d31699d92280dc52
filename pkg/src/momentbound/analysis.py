"""Backward derivation engine: walks statements against a post-annotation,
composing moment vectors and emitting linear constraints over template
coefficients.

Two modes share the walker.  In `interval` mode annotations are vectors of
symbolic intervals and tick costs compose by their power vectors; in `upper`
mode (the stopping-time analysis) annotations are single polynomial upper
bounds, every rule composes an all-ones vector to count one evaluation step,
and tick costs are ignored.

Recursion is moment-polymorphic: a call at restriction level h < m uses the
callee's level-h specification combined with a level-(h+1) frame instance,
and each instance's body is analyzed exactly once.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import lp
from .contexts import ContextInfo, Fact, LogicalContext, infer_contexts, refine
from .lang import (
    Assign, Call, If, Prob, Program, Sample, Seq, Skip, Stmt, Tick, While,
    expr_to_poly,
)
from .poly import (
    AffineForm, DegreeOverflow, Monomial, Polynomial, SymInterval,
    SYM_INTERVALS, UPPER_POLYS, annotation_is_restricted, dist_raw_moments,
    fresh_annotation, monomials_up_to, poly_eval, poly_expect, poly_subst,
)
from .semiring import MomentVector, mv_combine, mv_compose, mv_one

MAX_GENERATORS = 48


class AnalysisError(Exception):
    pass


@dataclass
class SpecInstance:
    fun: str
    level: int
    site: int
    pre: MomentVector
    post: MomentVector


class ConstraintSet:
    """Linear constraints over LP unknowns, tagged with their origin."""

    def __init__(self):
        self.rows: list[lp.Constraint] = []
        self.variables: list[str] = []
        self.nonneg: set[str] = set()
        self._names: set[str] = set()

    def alloc(self, name: str, nonneg: bool = False) -> str:
        base = name
        k = 1
        while name in self._names:
            k += 1
            name = f"{base}.{k}"
        self._names.add(name)
        self.variables.append(name)
        if nonneg:
            self.nonneg.add(name)
        return name

    def add_affine_eq(self, form: AffineForm, tag: str):
        """Emit form = 0."""
        self.rows.append(lp.Constraint(dict(form.terms), "eq", -form.const, tag))

    def add_poly_zero(self, p: Polynomial, tag: str):
        """Emit every coefficient of p equal to zero."""
        for mono in p.monomials():
            c = p.coeffs[mono]
            if isinstance(c, AffineForm):
                self.add_affine_eq(c, f"{tag}[{mono}]")
            elif c != 0:
                # a nonzero constant equated to zero: plainly infeasible row
                self.rows.append(lp.Constraint({}, "eq", Fraction(c), f"{tag}[{mono}]"))

    def stats(self) -> dict:
        return {"variables": len(self.variables), "constraints": len(self.rows)}


def _scalar_vec(c: Fraction, m: int, mode: str) -> MomentVector:
    comps = []
    power = Fraction(1)
    for k in range(m + 1):
        if mode == "interval":
            comps.append(SymInterval.of_constant(power))
        else:
            comps.append(Polynomial.constant(power))
        power *= c
    return MomentVector(tuple(comps), SYM_INTERVALS if mode == "interval" else UPPER_POLYS)


def _ones_vec(m: int, mode: str) -> MomentVector:
    comps = []
    for _ in range(m + 1):
        if mode == "interval":
            comps.append(SymInterval.of_constant(1))
        else:
            comps.append(Polynomial.constant(1))
    return MomentVector(tuple(comps), SYM_INTERVALS if mode == "interval" else UPPER_POLYS)


def _prob_vec(p: Fraction, m: int, mode: str) -> MomentVector:
    comps = []
    for k in range(m + 1):
        value = p if k == 0 else Fraction(0)
        if mode == "interval":
            comps.append(SymInterval.of_constant(value))
        else:
            comps.append(Polynomial.constant(value))
    return MomentVector(tuple(comps), SYM_INTERVALS if mode == "interval" else UPPER_POLYS)


class Derivation:
    """One analysis run: constraint generation for a program at moment order
    m with per-order template degree d."""

    def __init__(
        self,
        program: Program,
        m: int,
        d: int,
        mode: str = "interval",
        contexts: Optional[ContextInfo] = None,
    ):
        if mode not in ("interval", "upper"):
            raise ValueError(f"unknown mode {mode!r}")
        self.program = program
        self.m = m
        self.d = d
        self.mode = mode
        self.contexts = contexts if contexts is not None else infer_contexts(program)
        self.cset = ConstraintSet()
        self.specs: dict[tuple[str, int, int], SpecInstance] = {}
        self.pending: deque[SpecInstance] = deque()
        self._gen_cache: dict[tuple[LogicalContext, int], list[Polynomial]] = {}
        self.root: Optional[MomentVector] = None

    # annotation helpers

    def _semiring(self):
        return SYM_INTERVALS if self.mode == "interval" else UPPER_POLYS

    def _one(self) -> MomentVector:
        return mv_one(self.m, self._semiring())

    def _charge(self, ann: MomentVector) -> MomentVector:
        if self.mode == "upper":
            return mv_compose(_ones_vec(self.m, self.mode), ann)
        return ann

    def _fresh(self, h: int, name: str, gamma: Optional[LogicalContext] = None) -> MomentVector:
        ann = fresh_annotation(
            self.m, self.d, self.program.vars, h,
            lambda n: self.cset.alloc(f"q_{n}"), name, mode=self.mode,
        )
        if self.mode == "upper" and gamma is not None and not gamma.is_bottom():
            # the stopping-time carrier is [0, inf]: certify template
            # components nonnegative under their governing context
            for k in range(max(h, 1), self.m + 1):
                gens = self.generators(gamma, k * self.d)
                self._emit_dominance(ann.components[k], Polynomial.zero(), gens,
                                     f"nonneg.{name}.k{k}")
        return ann

    def _map_endpoints(self, ann: MomentVector, f) -> MomentVector:
        comps = []
        for k, comp in enumerate(ann.components):
            cap = k * self.d
            if self.mode == "interval":
                comps.append(SymInterval(f(comp.lo, cap), f(comp.hi, cap)))
            else:
                comps.append(f(comp, cap))
        return MomentVector(tuple(comps), ann.semiring)

    # the inference rules

    def transfer_backward(self, s: Stmt, post: MomentVector, h: int) -> MomentVector:
        gamma = self.contexts.at(s)
        if isinstance(s, Skip):
            return self._charge(post) if self.mode == "upper" else post
        if isinstance(s, Tick):
            if self.mode == "interval":
                return mv_compose(_scalar_vec(s.cost, self.m, self.mode), post)
            return self._charge(post)
        if isinstance(s, Assign):
            e = expr_to_poly(s.expr)

            def subst(p: Polynomial, cap: int) -> Polynomial:
                try:
                    return poly_subst(p, s.var, e, max_degree=cap)
                except DegreeOverflow as exc:
                    raise AnalysisError(
                        f"assignment at stmt#{s.loc} overflows the degree cap: {exc}"
                    ) from exc

            return self._charge(self._map_endpoints(post, subst))
        if isinstance(s, Sample):
            max_pow = 0
            for comp in post.components:
                polys = (comp.lo, comp.hi) if self.mode == "interval" else (comp,)
                for p in polys:
                    for mono in p.coeffs:
                        max_pow = max(max_pow, mono.exponent(s.var))
            moments = dist_raw_moments(s.dist, max_pow)

            def expect(p: Polynomial, cap: int) -> Polynomial:
                return poly_expect(p, s.var, moments)

            return self._charge(self._map_endpoints(post, expect))
        if isinstance(s, Seq):
            mid = self.transfer_backward(s.second, post, h)
            if self.mode == "upper":
                mid = self._charge(mid)
            return self._charge(self.transfer_backward(s.first, mid, h))
        if isinstance(s, Prob):
            left = self.transfer_backward(s.left, post, h)
            right = self.transfer_backward(s.right, post, h)
            mixed = mv_combine(
                mv_compose(_prob_vec(s.p, self.m, self.mode), left),
                mv_compose(_prob_vec(1 - s.p, self.m, self.mode), right),
            )
            return self._charge(mixed)
        if isinstance(s, If):
            then_pre = self.transfer_backward(s.then, post, h)
            else_pre = self.transfer_backward(s.els, post, h)
            joined = self._fresh(h, f"join{s.loc}", gamma)
            self.weaken(refine(gamma, s.cond, True), joined, then_pre, h, f"cond{s.loc}.then")
            self.weaken(refine(gamma, s.cond, False), joined, else_pre, h, f"cond{s.loc}.else")
            return self._charge(joined)
        if isinstance(s, While):
            return self.analyze_loop(s, post, h)
        if isinstance(s, Call):
            return self.analyze_call(s, post, h)
        raise TypeError(f"unknown statement {s!r}")

    def analyze_loop(self, s: While, post: MomentVector, h: int) -> MomentVector:
        head = self.contexts.at(s)
        invariant = self._fresh(h, f"inv{s.loc}", head)
        body_pre = self.transfer_backward(s.body, invariant, h)
        if self.mode == "upper":
            body_pre = self._charge(body_pre)  # the guard-evaluation step
        self.weaken(refine(head, s.cond, True), invariant, body_pre, h, f"loop{s.loc}.head")
        exit_post = self._charge(post) if self.mode == "upper" else post
        self.weaken(refine(head, s.cond, False), invariant, exit_post, h, f"loop{s.loc}.exit")
        return self._charge(invariant)

    def analyze_call(self, s: Call, post: MomentVector, h: int) -> MomentVector:
        if s.fun not in self.program.decls:
            raise AnalysisError(f"call to unknown function {s.fun!r}")
        exit_ctx = self.contexts.fun_exit.get(s.fun, LogicalContext.top())
        inst = self._get_spec(s.fun, h, s.loc)
        if h == self.m:
            self.weaken(exit_ctx, inst.post, post, h, f"call{s.loc}.mono")
            return self._charge(inst.pre)
        frame = self._get_spec(s.fun, h + 1, s.loc)
        combined_post = mv_combine(inst.post, frame.post)
        self.weaken(exit_ctx, combined_post, post, h, f"call{s.loc}.poly")
        return self._charge(mv_combine(inst.pre, frame.pre))

    def _get_spec(self, fun: str, level: int, site: int) -> SpecInstance:
        key = (fun, level, site)
        if key in self.specs:
            return self.specs[key]
        name = f"{fun}_h{level}_s{site}"
        entry_ctx = self.contexts.fun_entry.get(fun, LogicalContext.top())
        exit_ctx = self.contexts.fun_exit.get(fun, LogicalContext.top())
        inst = SpecInstance(
            fun=fun,
            level=level,
            site=site,
            pre=self._fresh(level, f"{name}_pre", entry_ctx),
            post=self._fresh(level, f"{name}_post", exit_ctx),
        )
        self.specs[key] = inst
        self.pending.append(inst)
        return inst

    def _analyze_spec_body(self, inst: SpecInstance):
        body = self.program.decls[inst.fun]
        entry_ctx = self.contexts.fun_entry.get(inst.fun, LogicalContext.top())
        derived = self.transfer_backward(body, inst.post, inst.level)
        self.weaken(entry_ctx, inst.pre, derived, inst.level,
                    f"spec.{inst.fun}.h{inst.level}.s{inst.site}")

    def run(self) -> MomentVector:
        """Analyze main against the unit post-annotation and close all
        function-specification obligations."""
        root_post = self._one()
        self.root = self.transfer_backward(self.program.main, root_post, 0)
        while self.pending:
            inst = self.pending.popleft()
            self._analyze_spec_body(inst)
        return self.root

    # weakening: from contains to under gamma, certified by conical slack

    def weaken(
        self,
        gamma: LogicalContext,
        frm: MomentVector,
        to: MomentVector,
        h: int,
        tag: str,
    ):
        if gamma.is_bottom():
            return
        if self.mode == "interval":
            f0, t0 = frm.components[0], to.components[0]
            if not (f0.lo == t0.lo and f0.hi == t0.hi):
                raise AnalysisError("termination-probability components disagree")
        for k in range(max(h, 1), self.m + 1):
            cap = k * self.d
            gens = self.generators(gamma, cap)
            if self.mode == "interval":
                f_comp, t_comp = frm.components[k], to.components[k]
                self._emit_dominance(t_comp.lo, f_comp.lo, gens, f"{tag}.k{k}.lo")
                self._emit_dominance(f_comp.hi, t_comp.hi, gens, f"{tag}.k{k}.hi")
            else:
                self._emit_dominance(frm.components[k], to.components[k], gens, f"{tag}.k{k}")

    def _emit_dominance(self, big: Polynomial, small: Polynomial, gens: Sequence[Polynomial], tag: str):
        """Emit big - small = sum(lambda_i * g_i) with fresh lambda_i >= 0."""
        diff = big - small
        if diff.is_zero():
            return
        slack = Polynomial.zero()
        for i, g in enumerate(gens):
            lam = self.cset.alloc(f"t_{tag}_g{i}", nonneg=True)
            slack = slack + g.scale(AffineForm.var(lam))
        self.cset.add_poly_zero(diff - slack, tag)

    def generators(self, gamma: LogicalContext, cap: int) -> list[Polynomial]:
        """Polynomials nonnegative under gamma, up to the degree cap: the
        constant 1, the context facts, their pairwise products, and paddings
        by monomials that are themselves nonnegative under gamma."""
        key = (gamma, cap)
        if key in self._gen_cache:
            return self._gen_cache[key]
        one = Polynomial.constant(1)
        out = [one]
        seen = {repr(one)}

        def push(p: Polynomial):
            if p.is_zero() or p.degree() > cap:
                return
            r = repr(p)
            if r not in seen and len(out) < MAX_GENERATORS:
                seen.add(r)
                out.append(p)

        fact_polys = [f.to_poly() for f in gamma.facts]
        for p in fact_polys:
            push(p)
        for p, q in itertools.combinations_with_replacement(fact_polys, 2):
            push(p * q)
        nonneg = gamma.nonneg_vars()
        pads = _nonneg_monomials(sorted(self.program.vars), nonneg, cap)
        for mono in pads:
            push(Polynomial({mono: Fraction(1)}))
        for p in fact_polys:
            for mono in pads:
                if p.degree() + mono.degree <= cap:
                    push(p * Polynomial({mono: Fraction(1)}))
        self._gen_cache[key] = out
        return out

    # LP interface

    def presolved(self) -> lp.Presolved:
        return lp.Presolved(self.cset.variables, self.cset.nonneg, self.cset.rows)

    def build_objective(self, valuation: dict, k: int, side: str) -> AffineForm:
        """Evaluate the root's k-th endpoint at a concrete valuation."""
        if self.root is None:
            raise AnalysisError("run() has not been called")
        if not _satisfies_pre(self.program, valuation):
            raise AnalysisError(f"valuation {valuation} violates the precondition")
        comp = self.root.components[k]
        if self.mode == "interval":
            poly = comp.hi if side == "upper" else comp.lo
        else:
            poly = comp
        full = {v: Fraction(0) for v in self.program.vars}
        full.update({v: Fraction(x) for v, x in valuation.items()})
        value = poly_eval(poly, full)
        if not isinstance(value, AffineForm):
            value = AffineForm(value)
        return value

    def pin_annotation(self, ann: MomentVector, concrete: Sequence[SymInterval], tag: str):
        """Equality-pin a template annotation to concrete interval values."""
        for k, conc in enumerate(concrete):
            comp = ann.components[k]
            self.cset.add_poly_zero(comp.lo - conc.lo, f"{tag}.k{k}.lo")
            self.cset.add_poly_zero(comp.hi - conc.hi, f"{tag}.k{k}.hi")


def _nonneg_monomials(variables: Sequence[str], nonneg_vars: set[str], cap: int) -> list[Monomial]:
    out = []
    for mono in monomials_up_to(variables, cap):
        if mono.degree == 0:
            continue
        ok = True
        for v, e in mono.powers:
            if e % 2 == 1 and v not in nonneg_vars:
                ok = False
                break
        if ok:
            out.append(mono)
    return out


def _satisfies_pre(program: Program, valuation: dict) -> bool:
    from .interp import eval_cond

    full = {v: Fraction(0) for v in program.vars}
    full.update({v: Fraction(x) for v, x in valuation.items()})
    return eval_cond(program.pre, full)


def analyze_program(
    program: Program,
    m: int,
    d: int,
    mode: str = "interval",
    contexts: Optional[ContextInfo] = None,
) -> Derivation:
    """Allocate specification templates, derive the whole program, and return
    the closed constraint system with the root pre-annotation."""
    derivation = Derivation(program, m, d, mode=mode, contexts=contexts)
    derivation.run()
    return derivation
