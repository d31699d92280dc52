"""Central-moment upper bounds from raw-moment intervals, and tail bounds
via the Markov, Cantelli, and Chebyshev inequalities.

Central moments expand to polynomials in the raw moments; with interval
enclosures for each raw moment, interval arithmetic over the expansion gives
a sound upper bound (exact when the enclosures are points, as for the
degenerate-cost and LP-exact cases).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .poly import Monomial, Polynomial
from .semiring import Interval, NEG_INF, POS_INF, interval_add, interval_mul


@dataclass
class MomentBounds:
    """Per-order interval enclosures of the raw moments E[X^k]."""

    m: int
    valuation: dict[str, Fraction]
    lo_polys: dict[int, Optional[Polynomial]]
    hi_polys: dict[int, Optional[Polynomial]]
    lo: dict[int, Optional[Fraction]] = field(default_factory=dict)  # numeric at valuation
    hi: dict[int, Optional[Fraction]] = field(default_factory=dict)
    nonnegative_cost: bool = True  # all tick constants >= 0

    def interval(self, k: int) -> Optional[Interval]:
        if k == 0:
            return Interval.point(1)
        lo = self.lo.get(k)
        hi = self.hi.get(k)
        if lo is None and hi is None:
            return None
        return Interval(NEG_INF if lo is None else lo, POS_INF if hi is None else hi)


def _interval_pow(iv: Interval, n: int) -> Interval:
    out = Interval.point(1)
    for _ in range(n):
        out = interval_mul(out, iv)
    return out


def _interval_scale(iv: Interval, c: Fraction) -> Interval:
    return interval_mul(Interval.point(c), iv)


def central_upper(bounds: MomentBounds, k: int) -> tuple[Optional[Fraction], Optional[Polynomial]]:
    """Upper bound on E[(X - E[X])^k] by interval arithmetic over the
    binomial expansion; also the symbolic polynomial U_k - L_1^k form for
    k = 2 when the sign condition L_1 >= 0 holds coefficientwise.

    Returns (numeric upper bound at the valuation, optional polynomial).
    """
    if k < 2 or k > bounds.m:
        raise ValueError(f"central moment order {k} outside 2..{bounds.m}")
    mean = bounds.interval(1)
    if mean is None:
        return None, None
    # E[(X - mu)^k] = sum_{j=2..k} C(k,j) (-1)^{k-j} E[X^j] mu^{k-j}
    #                 + (-1)^{k-1} (k-1) mu^k
    # (the j = 0 and j = 1 terms merge, since E[X^1] is mu itself; keeping
    # them merged is what makes the k = 2 case exactly U2 - L1^2)
    total = _interval_scale(_interval_pow(mean, k), Fraction((-1) ** (k - 1) * (k - 1)))
    for j in range(2, k + 1):
        raw = bounds.interval(j)
        if raw is None:
            return None, None
        coeff = Fraction(math.comb(k, j) * (-1) ** (k - j))
        term = _interval_scale(interval_mul(raw, _interval_pow(mean, k - j)), coeff)
        total = interval_add(total, term)
    numeric = total.hi if total.hi != POS_INF else None

    poly = None
    if k == 2:
        lo1 = bounds.lo_polys.get(1)
        hi2 = bounds.hi_polys.get(2)
        if lo1 is not None and hi2 is not None and _coeffs_nonneg(lo1):
            poly = hi2 - (lo1 * lo1)
    return numeric, poly


def _coeffs_nonneg(p: Polynomial) -> bool:
    for c in p.coeffs.values():
        value = c if isinstance(c, Fraction) else getattr(c, "const", None)
        if value is None or value < 0:
            return False
    return True


def tail_markov(u_k, a, k: int) -> Optional[float]:
    """P[X >= a] <= E[X^k] / a^k for nonnegative X; None when inapplicable."""
    if a <= 0 or u_k is None:
        return None
    value = float(u_k) / float(a) ** k
    return max(0.0, min(1.0, value))


def tail_cantelli(l1, u1, v_upper, a_raw) -> Optional[float]:
    """P[X >= a_raw] via P[X - E[X] >= a] <= V/(V + a^2) with a = a_raw - U1.

    The shift uses the upper end of the mean enclosure (the worst admissible
    mean, hence sound); inapplicable unless a_raw > U1.
    """
    if u1 is None or v_upper is None:
        return None
    a = float(a_raw) - float(u1)
    if a <= 0:
        return None
    v = max(float(v_upper), 0.0)
    return max(0.0, min(1.0, v / (v + a * a)))


def tail_chebyshev(c_even, a, order: int) -> Optional[float]:
    """P[|X - E[X]| >= a] <= E[(X-E[X])^order] / a^order for even order;
    the deviation a must be positive."""
    if order % 2 != 0:
        raise ValueError("Chebyshev tail needs an even central-moment order")
    if c_even is None or a <= 0:
        return None
    return max(0.0, min(1.0, float(c_even) / float(a) ** order))


@dataclass
class TailCurve:
    thresholds: list[float]
    columns: dict[str, list[Optional[float]]]

    def headers(self) -> list[str]:
        return ["a"] + list(self.columns)

    def rows(self):
        for i, a in enumerate(self.thresholds):
            yield [a] + [self.columns[c][i] for c in self.columns]

    def to_csv(self) -> str:
        lines = [",".join(self.headers())]
        for row in self.rows():
            lines.append(",".join("" if v is None else f"{v:.6g}" for v in row))
        return "\n".join(lines) + "\n"


def tail_curve(
    bounds: MomentBounds,
    central: dict[int, Optional[Fraction]],
    a_range: tuple[float, float, float],
) -> TailCurve:
    """One row per threshold: Markov per available raw order, Cantelli from
    the variance, Chebyshev from the 4th central moment, and their minimum."""
    start, stop, step = a_range
    if not (stop > start > 0) or step <= 0:
        raise ValueError("thresholds must satisfy stop > start > 0, step > 0")
    thresholds = []
    a = start
    while a <= stop + 1e-12:
        thresholds.append(round(a, 12))
        a += step

    columns: dict[str, list[Optional[float]]] = {}
    markov_orders = [k for k in range(1, bounds.m + 1) if bounds.hi.get(k) is not None]
    for k in markov_orders:
        columns[f"markov{k}"] = []
    columns["cantelli"] = []
    if central.get(4) is not None:
        columns["chebyshev4"] = []
    columns["min"] = []

    l1 = bounds.lo.get(1)
    u1 = bounds.hi.get(1)
    variance = central.get(2)
    c4 = central.get(4)
    for a in thresholds:
        row_vals = []
        for k in markov_orders:
            value = tail_markov(bounds.hi[k], a, k) if bounds.nonnegative_cost else None
            columns[f"markov{k}"].append(value)
            row_vals.append(value)
        cant = tail_cantelli(l1, u1, variance, a)
        columns["cantelli"].append(cant)
        row_vals.append(cant)
        if "chebyshev4" in columns:
            cheb = None
            if u1 is not None and a > float(u1):
                cheb = tail_chebyshev(c4, a - float(u1), 4)
            columns["chebyshev4"].append(cheb)
            row_vals.append(cheb)
        applicable = [v for v in row_vals if v is not None]
        columns["min"].append(min(applicable) if applicable else None)
    return TailCurve(thresholds, columns)
