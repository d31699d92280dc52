"""Partially ordered semirings and moment vectors.

The carriers used by the analyzer are exact: rationals, rational intervals
with infinite endpoints, and the nonnegative upper-bound domain used by the
stopping-time analysis.  Moment vectors of length m+1 combine componentwise
and compose by binomial convolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

# Extended rationals: exact Fractions plus infinity sentinels.

POS_INF = float("inf")
NEG_INF = float("-inf")

ExtRat = Any  # Fraction | POS_INF | NEG_INF


def is_inf(x: ExtRat) -> bool:
    return x == POS_INF or x == NEG_INF


def ext_add(a: ExtRat, b: ExtRat) -> ExtRat:
    if is_inf(a) or is_inf(b):
        if (a == POS_INF and b == NEG_INF) or (a == NEG_INF and b == POS_INF):
            raise ArithmeticError("indeterminate sum inf + (-inf)")
        return a if is_inf(a) else b
    return a + b


def ext_mul(a: ExtRat, b: ExtRat) -> ExtRat:
    # 0 * inf = 0 by convention (needed for interval products with [0,0]).
    if a == 0 or b == 0:
        return Fraction(0)
    if is_inf(a) or is_inf(b):
        positive = (a > 0) == (b > 0)
        return POS_INF if positive else NEG_INF
    return a * b


def as_ext(x) -> ExtRat:
    if is_inf(x):
        return x
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


class RationalSemiring:
    """Exact rationals with the usual order."""

    zero = Fraction(0)
    one = Fraction(1)

    @staticmethod
    def add(a: Fraction, b: Fraction) -> Fraction:
        return a + b

    @staticmethod
    def mul(a: Fraction, b: Fraction) -> Fraction:
        return a * b

    @staticmethod
    def le(a: Fraction, b: Fraction) -> bool:
        return a <= b

    @staticmethod
    def from_int(n: int) -> Fraction:
        return Fraction(n)


RATIONALS = RationalSemiring()


@dataclass(frozen=True)
class Interval:
    """A rational interval [lo, hi]; endpoints may be +-inf."""

    lo: ExtRat
    hi: ExtRat

    def __post_init__(self):
        if not (is_inf(self.lo) or isinstance(self.lo, Fraction)):
            object.__setattr__(self, "lo", Fraction(self.lo))
        if not (is_inf(self.hi) or isinstance(self.hi, Fraction)):
            object.__setattr__(self, "hi", Fraction(self.hi))
        if not ext_le_scalar(self.lo, self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @staticmethod
    def point(c) -> "Interval":
        c = as_ext(c)
        return Interval(c, c)

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def ext_le_scalar(a: ExtRat, b: ExtRat) -> bool:
    if a == NEG_INF or b == POS_INF:
        return True
    if a == POS_INF:
        return b == POS_INF
    if b == NEG_INF:
        return a == NEG_INF
    return a <= b


def interval_add(a: Interval, b: Interval) -> Interval:
    return Interval(ext_add(a.lo, b.lo), ext_add(a.hi, b.hi))


def interval_mul(a: Interval, b: Interval) -> Interval:
    """[min S, max S] over the four endpoint products."""
    products = [
        ext_mul(a.lo, b.lo),
        ext_mul(a.lo, b.hi),
        ext_mul(a.hi, b.lo),
        ext_mul(a.hi, b.hi),
    ]
    lo = min(products, key=_ext_key)
    hi = max(products, key=_ext_key)
    return Interval(lo, hi)


def _ext_key(x: ExtRat):
    if x == POS_INF:
        return (1, 0)
    if x == NEG_INF:
        return (-1, 0)
    return (0, x)


def interval_le(a: Interval, b: Interval) -> bool:
    """Containment order: a <= b iff a is included in b."""
    return ext_le_scalar(b.lo, a.lo) and ext_le_scalar(a.hi, b.hi)


class IntervalSemiring:
    """The interval semiring: addition and product lifted to intervals,
    ordered by containment."""

    zero = Interval.point(0)
    one = Interval.point(1)

    @staticmethod
    def add(a: Interval, b: Interval) -> Interval:
        return interval_add(a, b)

    @staticmethod
    def mul(a: Interval, b: Interval) -> Interval:
        return interval_mul(a, b)

    @staticmethod
    def le(a: Interval, b: Interval) -> bool:
        return interval_le(a, b)

    @staticmethod
    def from_int(n: int) -> Interval:
        return Interval.point(n)


INTERVALS = IntervalSemiring()


@dataclass(frozen=True)
class NonnegUpper:
    """Element of ([0, inf], <=, +, *): an upper bound on a nonnegative
    quantity.  Used only by the stopping-time analysis."""

    value: ExtRat

    def __post_init__(self):
        if not is_inf(self.value) and not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))
        if self.value != POS_INF and self.value < 0:
            raise ValueError("NonnegUpper carrier is [0, inf]")

    def __repr__(self) -> str:
        return f"{self.value}"


class NonnegUpperSemiring:
    zero = NonnegUpper(Fraction(0))
    one = NonnegUpper(Fraction(1))

    @staticmethod
    def add(a: NonnegUpper, b: NonnegUpper) -> NonnegUpper:
        return NonnegUpper(ext_add(a.value, b.value))

    @staticmethod
    def mul(a: NonnegUpper, b: NonnegUpper) -> NonnegUpper:
        return NonnegUpper(ext_mul(a.value, b.value))

    @staticmethod
    def le(a: NonnegUpper, b: NonnegUpper) -> bool:
        return ext_le_scalar(a.value, b.value)

    @staticmethod
    def from_int(n: int) -> NonnegUpper:
        return NonnegUpper(Fraction(n))


NONNEG_UPPER = NonnegUpperSemiring()


def binomial(k: int, i: int) -> int:
    return math.comb(k, i)


@dataclass(frozen=True)
class MomentVector:
    """Element of the m-th order moment semiring over a carrier semiring.

    components[k] bounds the k-th moment; length is m+1.
    """

    components: tuple
    semiring: Any

    @property
    def order(self) -> int:
        return len(self.components) - 1

    def __getitem__(self, k: int):
        return self.components[k]

    def __repr__(self) -> str:
        inner = ", ".join(repr(c) for c in self.components)
        return f"<{inner}>"


def mv_zero(m: int, semiring) -> MomentVector:
    return MomentVector(tuple(semiring.zero for _ in range(m + 1)), semiring)


def mv_one(m: int, semiring) -> MomentVector:
    comps = [semiring.one] + [semiring.zero] * m
    return MomentVector(tuple(comps), semiring)


def mv_of_scalar(c, m: int, semiring=RATIONALS) -> MomentVector:
    """The vector of powers <c^0, c^1, ..., c^m>."""
    comps = [semiring.one]
    for _ in range(m):
        comps.append(semiring.mul(comps[-1], c))
    return MomentVector(tuple(comps), semiring)


def mv_combine(a: MomentVector, b: MomentVector) -> MomentVector:
    """Componentwise addition (the combination operator)."""
    if a.order != b.order:
        raise ValueError(f"moment-vector length mismatch: {a.order} vs {b.order}")
    sr = a.semiring
    comps = tuple(sr.add(x, y) for x, y in zip(a.components, b.components))
    return MomentVector(comps, sr)


def mv_compose(a: MomentVector, b: MomentVector) -> MomentVector:
    """Binomial convolution: result_k = sum_i C(k,i) * (a_i * b_{k-i})."""
    if a.order != b.order:
        raise ValueError(f"moment-vector length mismatch: {a.order} vs {b.order}")
    sr = a.semiring
    out = []
    for k in range(a.order + 1):
        acc = sr.zero
        for i in range(k + 1):
            term = sr.mul(a.components[i], b.components[k - i])
            n = binomial(k, i)
            if n != 1:
                term = sr.mul(sr.from_int(n), term)
            acc = sr.add(acc, term)
        out.append(acc)
    return MomentVector(tuple(out), sr)


def mv_le(a: MomentVector, b: MomentVector) -> bool:
    if a.order != b.order:
        raise ValueError("moment-vector length mismatch")
    sr = a.semiring
    return all(sr.le(x, y) for x, y in zip(a.components, b.components))


def mv_from(values: Sequence, semiring) -> MomentVector:
    return MomentVector(tuple(values), semiring)
