import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from momentbound.lang import Discrete, Uniform
from momentbound.poly import (
    AffineForm, DegreeOverflow, Monomial, Polynomial, SymInterval,
    annotation_is_restricted, dist_raw_moments, fresh_annotation,
    monomials_up_to, poly_eval, poly_expect, poly_subst,
)

F = Fraction


def P(terms: dict) -> Polynomial:
    """{'d': 2, '': 4, 'x*y': 1} -> polynomial."""
    coeffs = {}
    for key, c in terms.items():
        if not key:
            coeffs[Monomial.unit()] = F(c)
        else:
            powers: dict[str, int] = {}
            for part in key.split("*"):
                name, _, exp = part.partition("^")
                powers[name] = powers.get(name, 0) + (int(exp) if exp else 1)
            coeffs[Monomial.of(powers)] = F(c)
    return Polynomial(coeffs)


def test_eval_running_example():
    # 2(d - x) + 4 at d=10, x=0
    p = P({"d": 2, "x": -2, "": 4})
    assert poly_eval(p, {"d": F(10), "x": F(0)}) == 24
    assert poly_eval(Polynomial.zero(), {}) == 0
    q = P({"d^2": 4, "d": 22, "": 28})
    assert poly_eval(q, {"d": F(2)}) == 88


def test_eval_missing_variable():
    with pytest.raises(KeyError):
        poly_eval(P({"x": 1}), {})


def test_subst_examples():
    p = P({"d": 2, "x": -2, "": 5})        # 2(d-x)+5
    shifted = poly_subst(p, "x", P({"x": 1, "t": 1}))
    assert shifted == P({"d": 2, "x": -2, "t": -2, "": 5})

    q = P({"y": 3})
    assert poly_subst(q, "x", P({"": 7})) == q

    sq = poly_subst(P({"x^2": 1}), "x", P({"x": 1, "": 1}))
    assert sq == P({"x^2": 1, "x": 2, "": 1})


def test_subst_degree_cap():
    with pytest.raises(DegreeOverflow):
        poly_subst(P({"x^2": 1}), "x", P({"x^2": 1}), max_degree=3)


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=-5, max_value=5, max_denominator=6),
       st.fractions(min_value=-5, max_value=5, max_denominator=6),
       st.fractions(min_value=-5, max_value=5, max_denominator=6))
def test_subst_eval_commute(a, b, g):
    p = P({"x^2": 1}).scale(a) + P({"x": 1, "y": 2}).scale(b)
    e = P({"y": 1, "": 3})
    lhs = poly_eval(poly_subst(p, "x", e), {"x": g, "y": g})
    rhs = poly_eval(p, {"x": poly_eval(e, {"y": g}), "y": g})
    assert lhs == rhs


def test_dist_raw_moments_uniform_paper_table():
    assert dist_raw_moments(Uniform(F(-1), F(2)), 3) == [1, F(1, 2), 1, F(5, 4)]
    assert dist_raw_moments(Uniform(F(0), F(1)), 4) == [1, F(1, 2), F(1, 3), F(1, 4), F(1, 5)]


def test_dist_raw_moments_discrete():
    assert dist_raw_moments(Discrete(((F(0), F(1)),)), 2) == [1, 0, 0]
    d = Discrete(((F(-1), F(3, 4)), (F(1), F(1, 4))))
    assert dist_raw_moments(d, 4) == [1, F(-1, 2), 1, F(-1, 2), 1]


def test_expect_paper_example():
    # E_{x~U(-1,2)} over <[1 + x^2, x y^2 + x^3 y]> gives <[2, y^2/2 + 5y/4]>
    moments = dist_raw_moments(Uniform(F(-1), F(2)), 3)
    lo = P({"": 1, "x^2": 1})
    hi = P({"x*y^2": 1, "x^3*y": 1})
    assert poly_expect(lo, "x", moments) == P({"": 2})
    assert poly_expect(hi, "x", moments) == P({"y^2": F(1, 2), "y": F(5, 4)})


def test_expect_second_moment_chain():
    # 4(d-x-t)^2 + 26(d-x-t) + 37 over t ~ U(-1,2) -> 4(d-x)^2 + 22(d-x) + 28
    u = P({"d": 1, "x": -1, "t": -1})
    p = (u * u).scale(F(4)) + u.scale(F(26)) + P({"": 37})
    moments = dist_raw_moments(Uniform(F(-1), F(2)), 2)
    got = poly_expect(p, "t", moments)
    w = P({"d": 1, "x": -1})
    assert got == (w * w).scale(F(4)) + w.scale(F(22)) + P({"": 28})


def test_expect_is_linear():
    moments = dist_raw_moments(Uniform(F(0), F(1)), 4)
    p = P({"x^2": 3, "y": 1})
    q = P({"x": -2, "": 5})
    lhs = poly_expect(p + q, "x", moments)
    rhs = poly_expect(p, "x", moments) + poly_expect(q, "x", moments)
    assert lhs == rhs


def test_expect_no_occurrence():
    p = P({"y": 2, "": 1})
    assert poly_expect(p, "x", [F(1)]) == p


def test_expect_vs_quadrature():
    # random cubic against numeric quadrature, 1e-6 relative
    quad = pytest.importorskip("scipy.integrate").quad
    rng = random.Random(4)
    for _ in range(25):
        coeffs = {f"x^{i}": F(rng.randint(-8, 8)) for i in range(4)}
        coeffs["x^2*y"] = F(rng.randint(-8, 8))
        p = P(coeffs)
        a, b = sorted(rng.sample(range(-4, 5), 2))
        if a == b:
            continue
        y0 = F(rng.randint(-3, 3))
        moments = dist_raw_moments(Uniform(F(a), F(b)), 3)
        symbolic = float(poly_eval(poly_expect(p, "x", moments), {"y": y0}))
        integrand = lambda x: float(poly_eval(p, {"x": F(x).limit_denominator(10**9), "y": y0}))
        numeric, _err = quad(integrand, a, b)
        numeric /= (b - a)
        assert abs(symbolic - numeric) <= 1e-6 * max(1.0, abs(numeric))


def test_monomial_order_graded_lex():
    monos = monomials_up_to(["x", "y"], 2)
    assert [str(m) for m in monos] == ["1", "x", "y", "x^2", "x*y", "y^2"]


def test_affine_form_arithmetic():
    a = AffineForm.var("q1") * F(2) + F(3)
    b = a - AffineForm.var("q1")
    assert b == AffineForm(3, {"q1": F(1)})
    assert (a - a).is_zero()
    got = a.substitute({"q1": F(5)})
    assert got == 13


def test_fresh_annotation_shapes():
    names = []
    ann = fresh_annotation(2, 1, ("x", "d"), 0, lambda n: names.append(n) or n, "t")
    assert len(ann.components) == 3
    comp0 = ann.components[0]
    assert comp0.lo == Polynomial.constant(1) and comp0.hi == Polynomial.constant(1)
    comp1 = ann.components[1]
    assert len(comp1.lo.coeffs) == 3 and len(comp1.hi.coeffs) == 3  # 1, x, d
    assert comp1.lo.degree() <= 1 and ann.components[2].lo.degree() <= 2

    restricted = fresh_annotation(2, 1, ("x",), 2, lambda n: n, "r")
    assert annotation_is_restricted(restricted, 2)
    assert isinstance(restricted.components[0], SymInterval)
    assert restricted.components[0].lo.is_zero()
    assert restricted.components[1].hi.is_zero()

    const = fresh_annotation(1, 0, ("x",), 0, lambda n: n, "c")
    assert const.components[1].lo.degree() == 0
