from fractions import Fraction

import pytest

from momentbound.lang import (
    Add, And, Assign, Call, Const, CTrue, Discrete, If, Le, Mul, Not,
    ParseError, Prob, Sample, Seq, Skip, Tick, Uniform, Var, While,
    parse_program, pretty_print, validate,
)
from tests.conftest import load_corpus


def test_parse_rdwalk_shape():
    p = load_corpus("rdwalk")
    assert set(p.decls) == {"rdwalk"}
    assert p.vars == ("d", "x", "t")
    assert isinstance(p.main, Seq)
    assert isinstance(p.main.first, Assign)
    assert isinstance(p.main.second, Call) and p.main.second.fun == "rdwalk"
    body = p.decls["rdwalk"]
    assert isinstance(body, If)
    # x < d desugars to not (d <= x)
    assert body.cond == Not(Le(Var("d"), Var("x")))
    assert isinstance(body.els, Skip)


def test_parse_smallest_program():
    p = parse_program("func main() begin skip end")
    assert isinstance(p.main, Skip)
    assert p.decls == {}
    assert p.pre == CTrue()


def test_parse_sugar_and_literals():
    p = parse_program("""
@pre(x >= 0 and y > 1)
func main() begin
  x := x - 3/2;
  y := -2 * x + 0.5
end
""")
    assert p.pre == And(Le(Const(Fraction(0)), Var("x")),
                        Not(Le(Var("y"), Const(Fraction(1)))))
    first = p.main.first
    assert first.expr == Add(Var("x"), Mul(Const(Fraction(-1)), Const(Fraction(3, 2))))
    second = p.main.second
    assert second.expr == Add(Mul(Const(Fraction(-2)), Var("x")), Const(Fraction(1, 2)))


def test_parse_distributions():
    p = parse_program("""
func main() begin
  t ~ uniform(-1, 2);
  s ~ discrete(-1: 3/4, 1: 1/4)
end
""")
    assert p.main.first.dist == Uniform(Fraction(-1), Fraction(2))
    assert p.main.second.dist == Discrete(((Fraction(-1), Fraction(3, 4)),
                                           (Fraction(1), Fraction(1, 4))))


def test_parse_errors():
    with pytest.raises(ParseError, match="uniform requires a < b"):
        parse_program("func main() begin t ~ uniform(2, 1) end")
    with pytest.raises(ParseError, match="sum to 1"):
        parse_program("func main() begin t ~ discrete(0: 1/2, 1: 1/4) end")
    with pytest.raises(ParseError, match="undeclared function"):
        parse_program("func main() begin call nowhere end")
    with pytest.raises(ParseError, match="probability"):
        parse_program("func main() begin if prob(3/2) then skip fi end")
    with pytest.raises(ParseError):
        parse_program("func main() begin x := end")


def test_comments_and_prob_else():
    p = parse_program("""
# leading comment
func main() begin
  if prob(1/3) then tick(1) else tick(2) fi  # trailing comment
end
""")
    assert isinstance(p.main, Prob)
    assert p.main.p == Fraction(1, 3)
    assert p.main.left == Tick(Fraction(1))
    assert p.main.right == Tick(Fraction(2))


def test_validate_ok_on_corpus():
    for name in ("rdwalk", "geo", "coupon2", "rdwalk_int", "compare", "skip"):
        assert validate(load_corpus(name)) == []


def test_validate_diagnostics():
    from momentbound.lang import Program
    bad_call = Program(decls={}, main=Call("ghost"), vars=(), pre=CTrue())
    codes = [d.code for d in validate(bad_call)]
    assert "UndefinedFunction" in codes

    bad_prob = Program(decls={}, main=Prob(Fraction(3, 2), Skip(), Skip()), vars=(), pre=CTrue())
    codes = [d.code for d in validate(bad_prob)]
    assert "ProbabilityOutOfRange" in codes

    bad_uniform = Program(decls={}, main=Sample("x", Uniform(Fraction(2), Fraction(1))),
                          vars=("x",), pre=CTrue())
    codes = [d.code for d in validate(bad_uniform)]
    assert "InvalidUniform" in codes

    missing_var = Program(decls={}, main=Assign("x", Var("y")), vars=("x",), pre=CTrue())
    codes = [d.code for d in validate(missing_var)]
    assert "UnknownVariable" in codes


def test_roundtrip_corpus():
    for name in ("rdwalk", "geo", "coupon2", "rdwalk_int", "compare",
                 "loopcount", "nonmono", "skip"):
        p = load_corpus(name)
        q = parse_program(pretty_print(p))
        assert q.main == p.main
        assert q.decls == p.decls
        assert q.pre == p.pre
        assert q.vars == p.vars


def test_roundtrip_tricky_constructs():
    src = """
@pre(n > 0 and not m <= 2)
func f() begin
  while not x <= n and true do
    x := (x + 1) * (y + -3);
    if prob(2/7) then skip else call f fi
  od
end
func main() begin
  tick(-1/2);
  call f
end
"""
    p = parse_program(src)
    q = parse_program(pretty_print(p))
    assert q.main == p.main and q.decls == p.decls and q.pre == p.pre


def test_desugaring_soundness():
    # eval(a - b) = eval(a) - eval(b) under the interpreter
    from momentbound.interp import eval_expr
    from momentbound.lang import sub
    a = Add(Var("x"), Const(Fraction(3)))
    b = Mul(Var("y"), Const(Fraction(2)))
    env = {"x": Fraction(5), "y": Fraction(7, 2)}
    assert eval_expr(sub(a, b), env) == eval_expr(a, env) - eval_expr(b, env)
