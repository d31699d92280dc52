"""Executable small-step semantics with continuations, and a Monte-Carlo
estimator of accumulated-cost moments.

Two runners share one semantics: `step`/`run_trace` implement the evaluation
rules literally (one rule application per step, exact rational state), and a
compiled tracer replays the same rule sequence as generated Python code for
the million-trial estimates.  Costs stay exact in both: tick constants are
accumulated as integer numerators over a fixed common denominator.
"""
from __future__ import annotations

import hashlib
import math
import random
import sys
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .lang import (
    Add, And, Assign, Call, Cond, Const, CTrue, Discrete, Dist, Expr, If, Le,
    Mul, Not, Prob, Program, Sample, Seq, Skip, Stmt, Tick, Uniform, Var, While,
)

DEFAULT_STEP_LIMIT = 10**7


# Continuations


@dataclass(frozen=True)
class Continuation:
    pass


@dataclass(frozen=True)
class Kstop(Continuation):
    pass


@dataclass(frozen=True)
class Kloop(Continuation):
    cond: Cond
    body: Stmt
    rest: Continuation


@dataclass(frozen=True)
class Kseq(Continuation):
    stmt: Stmt
    rest: Continuation


KSTOP = Kstop()


@dataclass(frozen=True)
class Config:
    valuation: Mapping[str, Fraction]
    stmt: Stmt
    cont: Continuation
    cost: Fraction

    def is_terminal(self) -> bool:
        return isinstance(self.stmt, Skip) and isinstance(self.cont, Kstop)


@dataclass(frozen=True)
class TraceResult:
    cost: Fraction
    steps: int
    terminated: bool


class RandomSource:
    """Thin wrapper over a PRNG; one uniform draw feeds one probabilistic rule."""

    def __init__(self, seed):
        self._rng = random.Random(seed)

    def random(self) -> float:
        return self._rng.random()


def derive_child_seed(seed: int, index: int) -> int:
    """Counter-style derivation: trials are reproducible and order-independent."""
    digest = hashlib.sha256(f"{seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def eval_expr(e: Expr, valuation: Mapping[str, Fraction]) -> Fraction:
    if isinstance(e, Var):
        return valuation[e.name]
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Add):
        return eval_expr(e.left, valuation) + eval_expr(e.right, valuation)
    if isinstance(e, Mul):
        return eval_expr(e.left, valuation) * eval_expr(e.right, valuation)
    raise TypeError(f"unknown expression {e!r}")


def eval_cond(c: Cond, valuation: Mapping[str, Fraction]) -> bool:
    if isinstance(c, CTrue):
        return True
    if isinstance(c, Not):
        return not eval_cond(c.inner, valuation)
    if isinstance(c, And):
        return eval_cond(c.left, valuation) and eval_cond(c.right, valuation)
    if isinstance(c, Le):
        return eval_expr(c.left, valuation) <= eval_expr(c.right, valuation)
    raise TypeError(f"unknown condition {c!r}")


def draw(dist: Dist, rng: RandomSource) -> Fraction:
    u = rng.random()
    if isinstance(dist, Uniform):
        # 64-bit float draw, converted exactly to a rational
        return dist.a + Fraction(u) * (dist.b - dist.a)
    if isinstance(dist, Discrete):
        uq = Fraction(u)
        acc = Fraction(0)
        for value, prob in dist.support:
            acc += prob
            if uq < acc:
                return value
        return dist.support[-1][0]
    raise TypeError(f"unknown distribution {dist!r}")


def step(config: Config, rng: RandomSource, program: Program) -> Config:
    """Apply exactly one evaluation rule.

    Call statements resolve their targets in `program`, so the stepper needs
    the declaration map alongside the configuration.
    """
    return Stepper(program).step(config, rng)


class Stepper:
    def __init__(self, program: Program):
        self.program = program

    def initial(self, init: Optional[Mapping[str, Fraction]] = None) -> Config:
        g = {v: Fraction(0) for v in self.program.vars}
        if init:
            for name, value in init.items():
                if name not in g:
                    raise KeyError(f"unknown variable {name!r}")
                g[name] = Fraction(value)
        return Config(g, self.program.main, KSTOP, Fraction(0))

    def step(self, config: Config, rng: RandomSource) -> Config:
        g, s, k, a = config.valuation, config.stmt, config.cont, config.cost
        if isinstance(s, Skip):
            if isinstance(k, Kstop):
                return config
            if isinstance(k, Kloop):
                if eval_cond(k.cond, g):
                    return Config(g, k.body, k, a)
                return Config(g, Skip(), k.rest, a)
            if isinstance(k, Kseq):
                return Config(g, k.stmt, k.rest, a)
        if isinstance(s, Tick):
            return Config(g, Skip(), k, a + s.cost)
        if isinstance(s, Assign):
            g2 = dict(g)
            g2[s.var] = eval_expr(s.expr, g)
            return Config(g2, Skip(), k, a)
        if isinstance(s, Sample):
            g2 = dict(g)
            g2[s.var] = draw(s.dist, rng)
            return Config(g2, Skip(), k, a)
        if isinstance(s, Call):
            return Config(g, self.program.decls[s.fun], k, a)
        if isinstance(s, Prob):
            u = rng.random()
            return Config(g, s.left if u < s.p else s.right, k, a)
        if isinstance(s, If):
            return Config(g, s.then if eval_cond(s.cond, g) else s.els, k, a)
        if isinstance(s, While):
            return Config(g, Skip(), Kloop(s.cond, s.body, k), a)
        if isinstance(s, Seq):
            return Config(g, s.first, Kseq(s.second, k), a)
        raise TypeError(f"cannot step {s!r}")


def run_trace(
    program: Program,
    rng: RandomSource,
    step_limit: int = DEFAULT_STEP_LIMIT,
    init: Optional[Mapping[str, Fraction]] = None,
) -> TraceResult:
    """Iterate the small-step rules from the initial configuration."""
    if step_limit < 1:
        raise ValueError("step_limit must be >= 1")
    stepper = Stepper(program)
    config = stepper.initial(init)
    steps = 0
    while steps < step_limit:
        if config.is_terminal():
            return TraceResult(config.cost, steps, True)
        config = stepper.step(config, rng)
        steps += 1
    return TraceResult(config.cost, steps, config.is_terminal())


# Compiled tracer


class _Budget(Exception):
    pass


def _tick_denominator(program: Program) -> int:
    denom = 1
    from .lang import program_stmts

    for s in program_stmts(program):
        if isinstance(s, Tick):
            denom = denom * s.cost.denominator // math.gcd(denom, s.cost.denominator)
    return denom


class CompiledTracer:
    """The program compiled to straight-line Python that replays the small-step
    rule sequence: identical step counts and identical draw order, with the
    cost kept as an integer numerator over a fixed denominator."""

    def __init__(self, program: Program):
        self.program = program
        self.denominator = _tick_denominator(program)
        self.var_index = {v: i for i, v in enumerate(program.vars)}
        self._source = self._generate()
        namespace: dict = {"_Budget": _Budget}
        exec(self._source, namespace)
        self._run = namespace["_trace"]

    def _generate(self) -> str:
        lines = ["def _trace(u, limit, g):", "    n = 0", "    a = 0"]
        for name in self.program.decls:
            lines.append(f"    def _f_{name}():")
            lines.append("        nonlocal n, a")
            lines.append("        if n > limit: raise _Budget()")
            body = self._stmt(self.program.decls[name], 2)
            lines.extend(body or ["        pass"])
        lines.append("    try:")
        main = self._stmt(self.program.main, 2)
        lines.extend(main or ["        pass"])
        lines.append("    except _Budget:")
        lines.append("        return (a, n, False)")
        lines.append("    return (a, n, True)")
        return "\n".join(lines) + "\n"

    def _stmt(self, s: Stmt, depth: int) -> list[str]:
        pad = "    " * depth
        if isinstance(s, Skip):
            return []
        if isinstance(s, Tick):
            num = int(s.cost * self.denominator)
            return [pad + f"n += 1; a += {num}"]
        if isinstance(s, Assign):
            i = self.var_index[s.var]
            return [pad + f"n += 1; g[{i}] = {self._expr(s.expr)}"]
        if isinstance(s, Sample):
            i = self.var_index[s.var]
            return [pad + f"n += 1; g[{i}] = {self._draw(s.dist)}"]
        if isinstance(s, Call):
            return [pad + f"n += 1; _f_{s.fun}()"]
        if isinstance(s, While):
            out = [pad + "n += 1", pad + "while True:"]
            inner = "    " * (depth + 1)
            out.append(inner + "n += 1")
            out.append(inner + "if n > limit: raise _Budget()")
            out.append(inner + f"if not ({self._cond(s.cond)}): break")
            out.extend(self._stmt(s.body, depth + 1) or [inner + "pass"])
            return out
        if isinstance(s, Prob):
            out = [pad + f"n += 1"]
            out.append(pad + f"if u() < {float(s.p)!r}:")
            out.extend(self._stmt(s.left, depth + 1) or ["    " * (depth + 1) + "pass"])
            out.append(pad + "else:")
            out.extend(self._stmt(s.right, depth + 1) or ["    " * (depth + 1) + "pass"])
            return out
        if isinstance(s, If):
            out = [pad + "n += 1", pad + f"if {self._cond(s.cond)}:"]
            out.extend(self._stmt(s.then, depth + 1) or ["    " * (depth + 1) + "pass"])
            out.append(pad + "else:")
            out.extend(self._stmt(s.els, depth + 1) or ["    " * (depth + 1) + "pass"])
            return out
        if isinstance(s, Seq):
            first = [("    " * depth) + "n += 1"] + (self._stmt(s.first, depth) or [])
            second = [("    " * depth) + "n += 1"] + (self._stmt(s.second, depth) or [])
            return first + second
        raise TypeError(f"unknown statement {s!r}")

    def _expr(self, e: Expr) -> str:
        if isinstance(e, Var):
            return f"g[{self.var_index[e.name]}]"
        if isinstance(e, Const):
            return repr(float(e.value))
        if isinstance(e, Add):
            return f"({self._expr(e.left)} + {self._expr(e.right)})"
        if isinstance(e, Mul):
            return f"({self._expr(e.left)} * {self._expr(e.right)})"
        raise TypeError(f"unknown expression {e!r}")

    def _cond(self, c: Cond) -> str:
        if isinstance(c, CTrue):
            return "True"
        if isinstance(c, Not):
            return f"(not {self._cond(c.inner)})"
        if isinstance(c, And):
            return f"({self._cond(c.left)} and {self._cond(c.right)})"
        if isinstance(c, Le):
            return f"({self._expr(c.left)} <= {self._expr(c.right)})"
        raise TypeError(f"unknown condition {c!r}")

    def _draw(self, d: Dist) -> str:
        if isinstance(d, Uniform):
            a, w = float(d.a), float(d.b - d.a)
            return f"({a!r} + u() * {w!r})"
        if isinstance(d, Discrete):
            acc = Fraction(0)
            parts = []
            for value, prob in d.support[:-1]:
                acc += prob
                parts.append((float(value), float(acc)))
            expr = repr(float(d.support[-1][0]))
            for value, cum in reversed(parts):
                expr = f"({value!r} if _r < {cum!r} else {expr})"
            return f"(lambda _r: {expr})(u())"
        raise TypeError(f"unknown distribution {d!r}")

    def run(self, rng: RandomSource, step_limit: int, init_values: Sequence[float]) -> tuple[int, int, bool]:
        g = list(init_values)
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, 20000))
        try:
            return self._run(rng.random, step_limit, g)
        except RecursionError:
            return (0, step_limit, False)
        finally:
            sys.setrecursionlimit(old_limit)


@dataclass
class EmpiricalMoments:
    trials: int
    raw: dict[int, float]            # k -> empirical E[cost^k], k = 1..m
    central: dict[int, float]        # k -> empirical E[(cost - mean)^k], k = 2..m
    stderr: dict[int, float]         # k -> standard error of raw moment k
    central_stderr: dict[int, float]
    nonterminated: int
    biased: bool
    tail_freqs: dict[float, tuple[float, float]]  # threshold -> (freq, stderr)


def estimate_moments(
    program: Program,
    m: int,
    trials: int,
    seed: int,
    step_limit: int = DEFAULT_STEP_LIMIT,
    init: Optional[Mapping[str, Fraction]] = None,
    thresholds: Sequence[float] = (),
    batches: int = 50,
) -> EmpiricalMoments:
    """Empirical raw and central moments of the accumulated cost.

    Per-trial randomness is derived from (seed, trial index), so results do
    not depend on scheduling order.  Sums of cost powers are accumulated
    exactly over a common denominator.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tracer = CompiledTracer(program)
    denom = tracer.denominator
    init_values = [0.0] * len(program.vars)
    if init:
        for name, value in init.items():
            init_values[tracer.var_index[name]] = float(value)

    kmax = max(2 * m, 1)
    batches = max(1, min(batches, trials))
    batch_sums = [[0] * (kmax + 1) for _ in range(batches)]
    batch_counts = [0] * batches
    tail_counts = {t: 0 for t in thresholds}
    nonterminated = 0

    for i in range(trials):
        rng = RandomSource(derive_child_seed(seed, i))
        num, _steps, terminated = tracer.run(rng, step_limit, init_values)
        if not terminated:
            nonterminated += 1
        b = i % batches
        batch_counts[b] += 1
        power = 1
        sums = batch_sums[b]
        sums[0] += 1
        for k in range(1, kmax + 1):
            power *= num
            sums[k] += power
        for t in tail_counts:
            if num >= t * denom:
                tail_counts[t] += 1

    totals = [sum(batch_sums[b][k] for b in range(batches)) for k in range(kmax + 1)]
    raw_exact = {k: Fraction(totals[k], trials * denom**k) for k in range(1, kmax + 1)}
    raw = {k: float(raw_exact[k]) for k in range(1, m + 1)}
    stderr = {}
    for k in range(1, m + 1):
        var_k = raw_exact[2 * k] - raw_exact[k] ** 2
        stderr[k] = math.sqrt(max(float(var_k), 0.0) / trials)

    central = {k: float(_central_from_raw(raw_exact, k)) for k in range(2, m + 1)}

    central_stderr: dict[int, float] = {}
    if batches > 1:
        for k in range(2, m + 1):
            values = []
            for b in range(batches):
                cnt = batch_counts[b]
                if cnt == 0:
                    continue
                br = {j: Fraction(batch_sums[b][j], cnt * denom**j) for j in range(1, kmax + 1)}
                values.append(float(_central_from_raw(br, k)))
            mean = sum(values) / len(values)
            var = sum((v - mean) ** 2 for v in values) / max(len(values) - 1, 1)
            central_stderr[k] = math.sqrt(var / len(values))

    tail_freqs = {}
    for t, count in tail_counts.items():
        f = count / trials
        tail_freqs[t] = (f, math.sqrt(f * (1 - f) / trials))

    if nonterminated:
        warnings.warn(
            f"{nonterminated} of {trials} traces hit the step limit; estimates are biased",
            RuntimeWarning,
        )
    return EmpiricalMoments(
        trials=trials,
        raw=raw,
        central=central,
        stderr=stderr,
        central_stderr=central_stderr,
        nonterminated=nonterminated,
        biased=nonterminated > 0,
        tail_freqs=tail_freqs,
    )


def _central_from_raw(raw: Mapping[int, Fraction], k: int) -> Fraction:
    """E[(X-mu)^k] expanded over raw moments, exactly."""
    mu = raw[1]
    total = Fraction(0)
    for j in range(0, k + 1):
        term = Fraction(math.comb(k, j)) * (-1) ** (k - j) * mu ** (k - j)
        total += term * (raw[j] if j >= 1 else Fraction(1))
    return total
