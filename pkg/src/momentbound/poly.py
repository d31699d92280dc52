"""Multivariate polynomials over program variables.

Coefficients are either exact rationals or affine forms in LP unknowns, so
the same representation serves concrete values, templates with unknown
coefficients, and the constraint rows equating them.  Monomials follow a
global graded-lex order for deterministic iteration and LP-variable naming.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .semiring import MomentVector


class DegreeOverflow(Exception):
    """A polynomial operation exceeded the declared degree cap."""

    def __init__(self, monomial: "Monomial", cap: int):
        self.monomial = monomial
        self.cap = cap
        super().__init__(f"monomial {monomial} exceeds degree cap {cap}")


@dataclass(frozen=True)
class Monomial:
    """Product of variables with positive integer exponents."""

    powers: tuple[tuple[str, int], ...]  # sorted by variable name, no zeros

    @staticmethod
    def of(mapping: Mapping[str, int] | Iterable[tuple[str, int]]) -> "Monomial":
        items = dict(mapping)
        cleaned = tuple(sorted((v, e) for v, e in items.items() if e > 0))
        for _, e in cleaned:
            if e < 0:
                raise ValueError("negative exponent")
        return Monomial(cleaned)

    @staticmethod
    def unit() -> "Monomial":
        return Monomial(())

    @staticmethod
    def var(name: str, exp: int = 1) -> "Monomial":
        return Monomial.of({name: exp})

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.powers)

    def exponent(self, var: str) -> int:
        for v, e in self.powers:
            if v == var:
                return e
        return 0

    def without(self, var: str) -> "Monomial":
        return Monomial(tuple((v, e) for v, e in self.powers if v != var))

    def mul(self, other: "Monomial") -> "Monomial":
        acc = dict(self.powers)
        for v, e in other.powers:
            acc[v] = acc.get(v, 0) + e
        return Monomial.of(acc)

    def sort_key(self):
        # graded-lex: total degree first, then lexicographic with higher
        # powers of earlier variables first
        return (self.degree, tuple((v, -e) for v, e in self.powers))

    def __str__(self) -> str:
        if not self.powers:
            return "1"
        parts = []
        for v, e in self.powers:
            parts.append(v if e == 1 else f"{v}^{e}")
        return "*".join(parts)


class AffineForm:
    """constant + sum of coeff * lp_var; coefficients are exact rationals."""

    __slots__ = ("const", "terms")

    def __init__(self, const=0, terms: Mapping[str, Fraction] | None = None):
        self.const = Fraction(const)
        self.terms: dict[str, Fraction] = {}
        if terms:
            for v, c in terms.items():
                c = Fraction(c)
                if c != 0:
                    self.terms[v] = c

    @staticmethod
    def var(name: str) -> "AffineForm":
        return AffineForm(0, {name: Fraction(1)})

    def is_zero(self) -> bool:
        return self.const == 0 and not self.terms

    def is_constant(self) -> bool:
        return not self.terms

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = AffineForm(other)
        if not isinstance(other, AffineForm):
            return NotImplemented
        terms = dict(self.terms)
        for v, c in other.terms.items():
            s = terms.get(v, Fraction(0)) + c
            if s == 0:
                terms.pop(v, None)
            else:
                terms[v] = s
        return AffineForm(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return AffineForm(-self.const, {v: -c for v, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = AffineForm(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        if isinstance(k, AffineForm):
            if k.is_constant():
                k = k.const
            elif self.is_constant():
                return k * self.const
            else:
                raise TypeError("product of two non-constant affine forms")
        k = Fraction(k)
        if k == 0:
            return AffineForm(0)
        return AffineForm(self.const * k, {v: c * k for v, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.is_constant() and self.const == other
        if not isinstance(other, AffineForm):
            return NotImplemented
        return self.const == other.const and self.terms == other.terms

    def __hash__(self):
        return hash((self.const, tuple(sorted(self.terms.items()))))

    def substitute(self, assignment: Mapping[str, Fraction]) -> Fraction:
        total = self.const
        for v, c in self.terms.items():
            total += c * assignment[v]
        return total

    def __repr__(self):
        parts = [] if self.const == 0 else [str(self.const)]
        for v in sorted(self.terms):
            parts.append(f"{self.terms[v]}*{v}")
        return " + ".join(parts) if parts else "0"


Coeff = Fraction | AffineForm


def _coeff_is_zero(c: Coeff) -> bool:
    if isinstance(c, AffineForm):
        return c.is_zero()
    return c == 0


class Polynomial:
    """Map monomial -> coefficient; zero coefficients are never stored."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[Monomial, Coeff] | None = None):
        self.coeffs: dict[Monomial, Coeff] = {}
        if coeffs:
            for m, c in coeffs.items():
                if not _coeff_is_zero(c):
                    self.coeffs[m] = c if isinstance(c, AffineForm) else Fraction(c)

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    @staticmethod
    def constant(c) -> "Polynomial":
        return Polynomial({Monomial.unit(): c})

    @staticmethod
    def var(name: str) -> "Polynomial":
        return Polynomial({Monomial.var(name): Fraction(1)})

    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self) -> int:
        return max((m.degree for m in self.coeffs), default=0)

    def variables(self) -> set[str]:
        out: set[str] = set()
        for m in self.coeffs:
            out.update(v for v, _ in m.powers)
        return out

    def has_lp_unknowns(self) -> bool:
        return any(isinstance(c, AffineForm) and not c.is_constant() for c in self.coeffs.values())

    def monomials(self) -> list[Monomial]:
        return sorted(self.coeffs, key=Monomial.sort_key)

    def coefficient(self, m: Monomial) -> Coeff:
        return self.coeffs.get(m, Fraction(0))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        acc = dict(self.coeffs)
        for m, c in other.coeffs.items():
            s = acc.get(m, Fraction(0)) + c
            if _coeff_is_zero(s):
                acc.pop(m, None)
            else:
                acc[m] = s
        out = Polynomial()
        out.coeffs = acc
        return out

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scale(self, k) -> "Polynomial":
        if _coeff_is_zero(Fraction(k) if not isinstance(k, AffineForm) else k):
            return Polynomial()
        return Polynomial({m: c * k for m, c in self.coeffs.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        acc: dict[Monomial, Coeff] = {}
        for m1, c1 in self.coeffs.items():
            for m2, c2 in other.coeffs.items():
                m = m1.mul(m2)
                c = c1 * c2
                s = acc.get(m, Fraction(0)) + c
                if _coeff_is_zero(s):
                    acc.pop(m, None)
                else:
                    acc[m] = s
        out = Polynomial()
        out.coeffs = acc
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return _normalized(self.coeffs) == _normalized(other.coeffs)

    def __hash__(self):
        return hash(tuple(sorted(((m, _norm_coeff(c)) for m, c in self.coeffs.items()),
                                 key=lambda it: it[0].sort_key())))

    def map_coeffs(self, f: Callable[[Coeff], Coeff]) -> "Polynomial":
        return Polynomial({m: f(c) for m, c in self.coeffs.items()})

    def resolve(self, assignment: Mapping[str, Fraction]) -> "Polynomial":
        """Substitute LP-variable values into affine coefficients."""

        def fix(c: Coeff) -> Fraction:
            if isinstance(c, AffineForm):
                return c.substitute(assignment)
            return c

        return Polynomial({m: fix(c) for m, c in self.coeffs.items()})

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for m in self.monomials():
            parts.append(f"({self.coeffs[m]})*{m}")
        return " + ".join(parts)


def _norm_coeff(c: Coeff):
    if isinstance(c, AffineForm) and c.is_constant():
        return c.const
    return c


def _normalized(coeffs: dict):
    return {m: _norm_coeff(c) for m, c in coeffs.items()}


def poly_eval(p: Polynomial, valuation: Mapping[str, Fraction]):
    """Exact evaluation; with affine coefficients the result is an AffineForm."""
    total: Coeff = Fraction(0)
    for m, c in p.coeffs.items():
        v = Fraction(1)
        for var, e in m.powers:
            if var not in valuation:
                raise KeyError(f"valuation is missing variable {var!r}")
            v *= Fraction(valuation[var]) ** e
        total = total + c * v
    return total


def poly_subst(p: Polynomial, x: str, e: Polynomial, max_degree: int | None = None) -> Polynomial:
    """Substitute the polynomial e for the variable x in p."""
    if e.has_lp_unknowns():
        raise TypeError("substituted expression must have rational coefficients")
    powers: dict[int, Polynomial] = {0: Polynomial.constant(1), 1: e}

    def e_pow(k: int) -> Polynomial:
        while k not in powers:
            j = max(powers)
            powers[j + 1] = powers[j] * e
        return powers[k]

    out = Polynomial()
    for m, c in p.coeffs.items():
        k = m.exponent(x)
        if k == 0:
            out = out + Polynomial({m: c})
        else:
            rest = m.without(x)
            term = e_pow(k).scale(c) * Polynomial({rest: Fraction(1)})
            out = out + term
    if max_degree is not None:
        for m in out.coeffs:
            if m.degree > max_degree:
                raise DegreeOverflow(m, max_degree)
    return out


def poly_expect(p: Polynomial, x: str, moments: Sequence[Fraction]) -> Polynomial:
    """Replace x^i by moments[i]; linear over the remaining variables."""
    out = Polynomial()
    for m, c in p.coeffs.items():
        k = m.exponent(x)
        if k >= len(moments):
            raise ValueError(f"need moment of order {k} for variable {x!r}")
        rest = m.without(x)
        coeff = c * moments[k]
        out = out + Polynomial({rest: coeff})
    return out


def monomials_up_to(variables: Sequence[str], degree: int) -> list[Monomial]:
    """All monomials over the given variables with total degree <= degree,
    in graded-lex order."""
    vs = sorted(variables)
    out = [Monomial.unit()]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(vs, d):
            powers: dict[str, int] = {}
            for v in combo:
                powers[v] = powers.get(v, 0) + 1
            out.append(Monomial.of(powers))
    return sorted(set(out), key=Monomial.sort_key)


# Distribution moments


def dist_raw_moments(dist, up_to: int) -> list[Fraction]:
    """E[x^i] for i = 0..up_to, exactly.

    Uniform(a,b): (b^{i+1} - a^{i+1}) / ((i+1)(b-a)).
    Discrete:     sum p_j v_j^i.
    """
    from .lang import Uniform, Discrete

    if up_to < 0:
        raise ValueError("up_to must be >= 0")
    if isinstance(dist, Uniform):
        a, b = Fraction(dist.a), Fraction(dist.b)
        return [
            (b ** (i + 1) - a ** (i + 1)) / ((i + 1) * (b - a))
            for i in range(0, up_to + 1)
        ]
    if isinstance(dist, Discrete):
        out = []
        for i in range(up_to + 1):
            out.append(sum((Fraction(p) * Fraction(v) ** i for v, p in dist.support), Fraction(0)))
        return out
    raise TypeError(f"unknown distribution {dist!r}")


def dist_support_bounds(dist) -> tuple[Fraction, Fraction]:
    from .lang import Uniform, Discrete

    if isinstance(dist, Uniform):
        return Fraction(dist.a), Fraction(dist.b)
    if isinstance(dist, Discrete):
        values = [Fraction(v) for v, _ in dist.support]
        return min(values), max(values)
    raise TypeError(f"unknown distribution {dist!r}")


# Symbolic intervals and potential-annotation templates


@dataclass(frozen=True, eq=True)
class SymInterval:
    """Interval whose endpoints are polynomials; lo <= hi is a proof
    obligation discharged by the generated constraints, not a stored fact."""

    lo: Polynomial
    hi: Polynomial

    @staticmethod
    def point(p: Polynomial) -> "SymInterval":
        return SymInterval(p, p)

    @staticmethod
    def of_constant(c) -> "SymInterval":
        p = Polynomial.constant(c)
        return SymInterval(p, p)

    def is_numeric_point(self) -> bool:
        lo, hi = self.lo, self.hi
        if lo.has_lp_unknowns() or hi.has_lp_unknowns():
            return False
        if lo.degree() > 0 or hi.degree() > 0:
            return False
        return lo == hi

    def numeric_value(self) -> Fraction:
        c = self.lo.coefficient(Monomial.unit())
        if isinstance(c, AffineForm):
            c = c.const
        return c

    def __repr__(self):
        return f"[{self.lo}, {self.hi}]"


class SymIntervalSemiring:
    """Moment-semiring carrier for the derivation: symbolic intervals.

    Multiplication is only defined when one operand is a numeric point
    interval; the inference rules never need more than scalar-by-symbolic
    composition.
    """

    zero = SymInterval.of_constant(0)
    one = SymInterval.of_constant(1)

    @staticmethod
    def add(a: SymInterval, b: SymInterval) -> SymInterval:
        return SymInterval(a.lo + b.lo, a.hi + b.hi)

    @staticmethod
    def mul(a: SymInterval, b: SymInterval) -> SymInterval:
        if a.is_numeric_point():
            c, sym = a.numeric_value(), b
        elif b.is_numeric_point():
            c, sym = b.numeric_value(), a
        else:
            raise TypeError("symbolic-by-symbolic interval product is not supported")
        if c == 0:
            return SymIntervalSemiring.zero
        if c > 0:
            return SymInterval(sym.lo.scale(c), sym.hi.scale(c))
        return SymInterval(sym.hi.scale(c), sym.lo.scale(c))

    @staticmethod
    def le(a: SymInterval, b: SymInterval) -> bool:
        raise NotImplementedError("order on symbolic intervals is an LP obligation")

    @staticmethod
    def from_int(n: int) -> SymInterval:
        return SymInterval.of_constant(n)


SYM_INTERVALS = SymIntervalSemiring()


class UpperPolySemiring:
    """Carrier for the stopping-time analysis: a single polynomial upper
    bound, implicitly nonnegative under its logical context."""

    zero = Polynomial.zero()
    one = Polynomial.constant(1)

    @staticmethod
    def add(a: Polynomial, b: Polynomial) -> Polynomial:
        return a + b

    @staticmethod
    def mul(a: Polynomial, b: Polynomial) -> Polynomial:
        for first, second in ((a, b), (b, a)):
            if not first.has_lp_unknowns() and first.degree() == 0:
                c = first.coefficient(Monomial.unit())
                if isinstance(c, AffineForm):
                    c = c.const
                if c < 0:
                    raise TypeError("negative scalar in the nonnegative-upper carrier")
                return second.scale(c)
        raise TypeError("symbolic-by-symbolic product is not supported")

    @staticmethod
    def le(a: Polynomial, b: Polynomial) -> bool:
        raise NotImplementedError("order on symbolic uppers is an LP obligation")

    @staticmethod
    def from_int(n: int) -> Polynomial:
        return Polynomial.constant(n)


UPPER_POLYS = UpperPolySemiring()


def fresh_annotation(
    m: int,
    d: int,
    variables: Sequence[str],
    h: int,
    allocate: Callable[[str], str],
    name: str,
    mode: str = "interval",
) -> MomentVector:
    """Template potential annotation: component k carries polynomials of
    degree <= k*d with fresh LP-unknown coefficients.

    Components with index < h are pinned to zero; component 0, when
    unrestricted, is pinned to one (termination probability of the
    continuation).
    """
    if h > m + 1:
        raise ValueError("restriction level exceeds m+1")
    comps = []
    for k in range(m + 1):
        if k < h or (k == 0 and h == 0):
            if k < h:
                comps.append(_zero_component(mode))
            else:
                comps.append(_one_component(mode))
            continue
        cap = k * d
        monos = monomials_up_to(variables, cap)
        if mode == "interval":
            lo = _template_poly(monos, allocate, f"{name}_k{k}_lo")
            hi = _template_poly(monos, allocate, f"{name}_k{k}_hi")
            comps.append(SymInterval(lo, hi))
        elif mode == "upper":
            comps.append(_template_poly(monos, allocate, f"{name}_k{k}"))
        else:
            raise ValueError(f"unknown template mode {mode!r}")
    sr = SYM_INTERVALS if mode == "interval" else UPPER_POLYS
    return MomentVector(tuple(comps), sr)


def _zero_component(mode: str):
    return SymIntervalSemiring.zero if mode == "interval" else UpperPolySemiring.zero


def _one_component(mode: str):
    return SymIntervalSemiring.one if mode == "interval" else UpperPolySemiring.one


def _template_poly(monos: Sequence[Monomial], allocate: Callable[[str], str], prefix: str) -> Polynomial:
    coeffs = {}
    for mono in monos:
        lp_var = allocate(f"{prefix}_{mono}")
        coeffs[mono] = AffineForm.var(lp_var)
    return Polynomial(coeffs)


def annotation_is_restricted(ann: MomentVector, h: int) -> bool:
    """True iff components of index < h are the zero element."""
    for k in range(min(h, ann.order + 1)):
        comp = ann.components[k]
        if isinstance(comp, SymInterval):
            if not (comp.lo.is_zero() and comp.hi.is_zero()):
                return False
        elif isinstance(comp, Polynomial):
            if not comp.is_zero():
                return False
    return True
