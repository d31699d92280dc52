from fractions import Fraction

from hypothesis import given, settings, strategies as st

from momentbound.semiring import (
    Interval, INTERVALS, NEG_INF, POS_INF, RATIONALS,
    interval_le, interval_mul,
    mv_combine, mv_compose, mv_from, mv_le, mv_of_scalar, mv_one, mv_zero,
)

fractions = st.fractions(min_value=-20, max_value=20, max_denominator=8)


def interval_strategy():
    return st.tuples(fractions, fractions).map(
        lambda ab: Interval(min(ab), max(ab))
    )


def vec(semiring, elems):
    return mv_from(tuple(elems), semiring)


# paper-worked examples for the operators


def test_combine_is_pointwise_addition():
    a = vec(RATIONALS, [Fraction(1), Fraction(0), Fraction(0)])
    b = vec(RATIONALS, [Fraction(0), Fraction(1), Fraction(1)])
    assert mv_combine(a, b).components == (1, 1, 1)
    c = vec(RATIONALS, [Fraction(0), Fraction(1), Fraction(1)])
    d = vec(RATIONALS, [Fraction(0), Fraction(0), Fraction(2)])
    assert mv_combine(c, d).components == (0, 1, 3)


def test_combine_identity():
    a = vec(RATIONALS, [Fraction(2), Fraction(3), Fraction(5)])
    assert mv_combine(a, mv_zero(2, RATIONALS)) == a


def test_compose_power_vectors():
    # composing the power vectors of 2 and 3 gives the power vector of 5
    u = mv_of_scalar(Fraction(2), 3)
    v = mv_of_scalar(Fraction(3), 3)
    assert mv_compose(u, v).components == (1, 5, 25, 125)


def test_compose_identity():
    a = vec(RATIONALS, [Fraction(1), Fraction(7), Fraction(11)])
    one = mv_one(2, RATIONALS)
    assert mv_compose(a, one) == a
    assert mv_compose(one, a) == a


def test_compose_second_moment_formula():
    # <p1 p2, p2 r1 + p1 r2, p2 s1 + 2 r1 r2 + p1 s2>
    p1, r1, s1 = Fraction(1), Fraction(2), Fraction(5)
    p2, r2, s2 = Fraction(1), Fraction(3), Fraction(4)
    a = vec(RATIONALS, [p1, r1, s1])
    b = vec(RATIONALS, [p2, r2, s2])
    got = mv_compose(a, b)
    assert got.components == (p1 * p2, p2 * r1 + p1 * r2, p2 * s1 + 2 * r1 * r2 + p1 * s2)


def test_mv_of_scalar_examples():
    assert mv_of_scalar(Fraction(1), 2).components == (1, 1, 1)
    assert mv_of_scalar(Fraction(0), 3).components == (1, 0, 0, 0)
    got = mv_of_scalar(Interval.point(-1), 2, INTERVALS)
    assert got.components == (Interval.point(1), Interval.point(-1), Interval.point(1))


def test_interval_mul_examples():
    assert interval_mul(Interval(1, 2), Interval(-3, 4)) == Interval(-6, 8)
    assert interval_mul(Interval.point(1), Interval(-7, 9)) == Interval(-7, 9)
    assert interval_mul(Interval(-2, 2), Interval(5, 5)) == Interval(-10, 10)


def test_interval_mul_infinities():
    assert interval_mul(Interval.point(0), Interval(NEG_INF, POS_INF)) == Interval.point(0)
    assert interval_mul(Interval(1, POS_INF), Interval(2, 3)) == Interval(2, POS_INF)


# semiring laws on randomized instances


@settings(max_examples=1000, deadline=None)
@given(st.lists(fractions, min_size=4, max_size=4),
       st.lists(fractions, min_size=4, max_size=4),
       st.lists(fractions, min_size=4, max_size=4))
def test_rational_moment_semiring_laws(xs, ys, zs):
    a, b, c = (vec(RATIONALS, v) for v in (xs, ys, zs))
    zero = mv_zero(3, RATIONALS)
    one = mv_one(3, RATIONALS)
    assert mv_combine(a, b) == mv_combine(b, a)
    assert mv_combine(mv_combine(a, b), c) == mv_combine(a, mv_combine(b, c))
    assert mv_combine(a, zero) == a
    assert mv_compose(mv_compose(a, b), c) == mv_compose(a, mv_compose(b, c))
    assert mv_compose(a, one) == a and mv_compose(one, a) == a
    assert mv_compose(a, zero) == zero and mv_compose(zero, a) == zero
    left = mv_compose(a, mv_combine(b, c))
    right = mv_combine(mv_compose(a, b), mv_compose(a, c))
    assert left == right
    left = mv_compose(mv_combine(a, b), c)
    right = mv_combine(mv_compose(a, c), mv_compose(b, c))
    assert left == right


@settings(max_examples=1000, deadline=None)
@given(st.lists(interval_strategy(), min_size=3, max_size=3),
       st.lists(interval_strategy(), min_size=3, max_size=3),
       st.lists(interval_strategy(), min_size=3, max_size=3))
def test_interval_moment_semiring_laws(xs, ys, zs):
    a, b, c = (vec(INTERVALS, v) for v in (xs, ys, zs))
    zero = mv_zero(2, INTERVALS)
    one = mv_one(2, INTERVALS)
    assert mv_combine(a, b) == mv_combine(b, a)
    assert mv_combine(mv_combine(a, b), c) == mv_combine(a, mv_combine(b, c))
    assert mv_compose(mv_compose(a, b), c) == mv_compose(a, mv_compose(b, c))
    assert mv_compose(a, one) == a and mv_compose(one, a) == a
    assert mv_compose(a, zero) == zero


@settings(max_examples=1000, deadline=None)
@given(fractions, fractions, st.integers(min_value=0, max_value=6))
def test_power_vector_composition(u, v, m):
    # <(u+v)^k>_k = <u^k>_k (x) <v^k>_k, exactly
    lhs = mv_of_scalar(u + v, m)
    rhs = mv_compose(mv_of_scalar(u, m), mv_of_scalar(v, m))
    assert lhs == rhs


@settings(max_examples=1000, deadline=None)
@given(st.lists(interval_strategy(), min_size=3, max_size=3),
       st.lists(interval_strategy(), min_size=3, max_size=3),
       st.lists(fractions, min_size=3, max_size=3))
def test_moment_operations_monotone(xs, ys, points):
    # widen each component of a; compose/combine must stay contained
    a = vec(INTERVALS, xs)
    wider = vec(INTERVALS, [Interval(iv.lo - 1, iv.hi + 1) for iv in xs])
    b = vec(INTERVALS, ys)
    assert mv_le(a, wider)
    assert mv_le(mv_compose(a, b), mv_compose(wider, b))
    assert mv_le(mv_compose(b, a), mv_compose(b, wider))
    assert mv_le(mv_combine(a, b), mv_combine(wider, b))


@settings(max_examples=1000, deadline=None)
@given(interval_strategy(), interval_strategy())
def test_interval_mul_monotone(a, b):
    wider = Interval(a.lo - 2, a.hi + 3)
    assert interval_le(a, wider)
    assert interval_le(interval_mul(a, b), interval_mul(wider, b))
    assert interval_le(interval_mul(b, a), interval_mul(b, wider))


@settings(max_examples=300, deadline=None)
@given(interval_strategy(), interval_strategy(), interval_strategy())
def test_interval_semiring_distributes(a, b, c):
    lhs = interval_mul(a, Interval(b.lo + c.lo, b.hi + c.hi))
    rhs_l = interval_mul(a, b)
    rhs_r = interval_mul(a, c)
    rhs = Interval(rhs_l.lo + rhs_r.lo, rhs_l.hi + rhs_r.hi)
    # over intervals, multiplication sub-distributes: lhs contained in rhs
    assert interval_le(lhs, rhs)
