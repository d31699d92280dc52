"""LP data model, a built-in primal simplex with Bland's rule, and export in
the standard human-readable LP text format.

The solver runs in two modes: a float kernel on a numpy tableau (default),
whose result is re-checked exactly in rational arithmetic against the
original constraints, and an all-rational kernel for small systems where
zero-tolerance feasibility matters.  A presolve pass eliminates variables
defined by equalities, which shrinks the template-generated systems by an
order of magnitude before any pivoting happens.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

import numpy as np

RECHECK_TOL = Fraction(1, 10**7)
PIVOT_TOL = 1e-9
MAX_PIVOTS = 30_000
FIRST_ATTEMPT_PIVOTS = 2_500
PERTURB_SEEDS = (20210517, 777, 424242)


@dataclass
class Constraint:
    coeffs: dict[str, Fraction]
    sense: str  # 'eq' | 'ge' | 'le'
    rhs: Fraction
    tag: str = ""

    def normalized(self) -> "Constraint":
        coeffs = {v: Fraction(c) for v, c in self.coeffs.items() if c != 0}
        return Constraint(coeffs, self.sense, Fraction(self.rhs), self.tag)


@dataclass
class LPProblem:
    variables: list[str]
    nonneg: set[str]
    constraints: list[Constraint]
    objective: dict[str, Fraction] = field(default_factory=dict)
    objective_const: Fraction = Fraction(0)
    sense: str = "min"  # 'min' | 'max'

    def validate(self):
        declared = set(self.variables)
        for c in self.constraints:
            unknown = set(c.coeffs) - declared
            if unknown:
                raise ValueError(f"constraint {c.tag!r} references undeclared {unknown}")
        unknown = set(self.objective) - declared
        if unknown:
            raise ValueError(f"objective references undeclared {unknown}")


@dataclass
class LPSolution:
    status: str  # 'optimal' | 'infeasible' | 'unbounded' | 'numerical_failure'
    assignment: dict[str, Fraction]
    objective_value: Optional[Fraction]
    pivots: int = 0
    solve_time: float = 0.0
    mode: str = "float"


class _Infeasible(Exception):
    pass


def _row_sub(row: dict, var: str, expr: dict, const: Fraction):
    """row := row with var replaced by (expr + const)."""
    c = row.pop(var, Fraction(0))
    if c == 0:
        return Fraction(0)
    for v, k in expr.items():
        s = row.get(v, Fraction(0)) + c * k
        if s == 0:
            row.pop(v, None)
        else:
            row[v] = s
    return c * const


class Presolved:
    """Constraint system after exact elimination of equality-defined
    variables; solvable repeatedly under different objectives."""

    def __init__(self, variables: Iterable[str], nonneg: set[str], constraints: list[Constraint]):
        self.original = [c.normalized() for c in constraints]
        self.all_vars = list(variables)
        self.nonneg = set(nonneg)
        # chronological substitution log: v = expr + const (a fix is an
        # entry with an empty expr); order matters for replay
        self.log: list[tuple[str, dict[str, Fraction], Fraction]] = []
        self.infeasible_reason: Optional[str] = None
        self.rows: list[tuple[dict[str, Fraction], str, Fraction]] = []
        self._prefer_perturbed = False
        try:
            self._presolve()
        except _Infeasible as exc:
            self.infeasible_reason = str(exc)

    def _presolve(self):
        rows = []
        for c in self.original:
            coeffs = dict(c.coeffs)
            rhs = c.rhs
            sense = c.sense
            if sense == "le":
                coeffs = {v: -k for v, k in coeffs.items()}
                rhs = -rhs
                sense = "ge"
            rows.append((coeffs, sense, rhs))

        occurrences: dict[str, set[int]] = {}
        for i, (coeffs, _, _) in enumerate(rows):
            for v in coeffs:
                occurrences.setdefault(v, set()).add(i)
        alive = [True] * len(rows)

        def retire(i):
            alive[i] = False
            for v in rows[i][0]:
                occurrences.get(v, set()).discard(i)

        def substitute(var, expr, const):
            for i in list(occurrences.get(var, ())):
                if not alive[i]:
                    continue
                coeffs, sense, rhs = rows[i]
                occurrences[var].discard(i)
                before = set(coeffs)
                delta = _row_sub(coeffs, var, expr, const)
                rows[i] = (coeffs, sense, rhs - delta)
                for v in set(coeffs) - before:
                    occurrences.setdefault(v, set()).add(i)
                for v in before - set(coeffs):
                    if v != var:
                        occurrences.get(v, set()).discard(i)
            occurrences.pop(var, None)

        changed = True
        while changed:
            changed = False
            for i, live in enumerate(alive):
                if not live:
                    continue
                coeffs, sense, rhs = rows[i]
                if not coeffs:
                    if sense == "eq" and rhs != 0:
                        raise _Infeasible(f"0 = {rhs}")
                    if sense == "ge" and rhs > 0:
                        raise _Infeasible(f"0 >= {rhs}")
                    retire(i)
                    changed = True
                    continue
                if sense == "eq" and len(coeffs) == 1:
                    (v, c), = coeffs.items()
                    value = rhs / c
                    if v in self.nonneg and value < 0:
                        raise _Infeasible(f"{v} = {value} < 0")
                    retire(i)
                    self.log.append((v, {}, value))
                    substitute(v, {}, value)
                    changed = True
                    continue
                if sense == "eq":
                    target = None
                    for v, c in coeffs.items():
                        occ = len(occurrences.get(v, ()))
                        if v not in self.nonneg and occ <= 12:
                            if target is None or occ < target[2]:
                                target = (v, c, occ)
                    if target is None:
                        for v, c in coeffs.items():
                            if v in self.nonneg and len(occurrences.get(v, ())) == 1:
                                target = (v, c, 1)
                                break
                    if target is not None:
                        v, c, _ = target
                        expr = {w: -k / c for w, k in coeffs.items() if w != v}
                        const = rhs / c
                        retire(i)
                        self.log.append((v, expr, const))
                        substitute(v, expr, const)
                        if v in self.nonneg:
                            rows.append((dict(expr), "ge", -const))
                            alive.append(True)
                            j = len(rows) - 1
                            for w in expr:
                                occurrences.setdefault(w, set()).add(j)
                            self.nonneg.discard(v)
                        changed = True
                        continue

        self.rows = [rows[i] for i, live in enumerate(alive) if live]

    def solve(
        self,
        objective: Mapping[str, Fraction],
        sense: str = "min",
        objective_const: Fraction = Fraction(0),
        exact: bool = False,
        _perturb_seed: Optional[int] = None,
    ) -> LPSolution:
        t0 = time.perf_counter()
        if self.infeasible_reason is not None:
            return LPSolution("infeasible", {}, None, solve_time=time.perf_counter() - t0)

        obj = {v: Fraction(c) for v, c in objective.items() if c != 0}
        obj_const = Fraction(objective_const)
        for v, expr, const in self.log:  # chronological replay
            c = obj.pop(v, Fraction(0))
            if c != 0:
                for w, k in expr.items():
                    s = obj.get(w, Fraction(0)) + c * k
                    if s == 0:
                        obj.pop(w, None)
                    else:
                        obj[w] = s
                obj_const += c * const

        def original_value(assignment: dict[str, Fraction]) -> Fraction:
            return Fraction(objective_const) + sum(
                (Fraction(c) * assignment[v] for v, c in objective.items()), Fraction(0)
            )

        core_vars = sorted({v for coeffs, _, _ in self.rows for v in coeffs} | set(obj))
        if not core_vars:
            assignment = self._reconstruct({})
            return LPSolution("optimal", assignment, original_value(assignment),
                              solve_time=time.perf_counter() - t0, mode="trivial")

        if exact:
            status, core_assign, pivots = _simplex_exact(core_vars, self.nonneg, self.rows, obj, sense)
            if status != "optimal":
                return LPSolution(status, {}, None, pivots=pivots,
                                  solve_time=time.perf_counter() - t0, mode="exact")
            assignment = self._reconstruct(core_assign)
            return LPSolution("optimal", assignment, original_value(assignment), pivots=pivots,
                              solve_time=time.perf_counter() - t0, mode="exact")

        # float path: a budgeted clean attempt, then degeneracy-breaking
        # perturbed retries; either way the result must pass the exact
        # re-check.  Infeasible/unbounded verdicts are only trusted from the
        # clean attempt (perturbed runs retry with another seed).  Once the
        # clean attempt has exhausted its budget on this system, later solves
        # go straight to the perturbed form.
        if _perturb_seed is not None:
            attempts = [(_perturb_seed, MAX_PIVOTS)]
        elif self._prefer_perturbed:
            attempts = [(seed, MAX_PIVOTS) for seed in PERTURB_SEEDS]
        else:
            attempts = [(None, FIRST_ATTEMPT_PIVOTS)] + [(seed, MAX_PIVOTS) for seed in PERTURB_SEEDS]
        pivots = 0
        last_status = "numerical_failure"
        for idx, (seed, budget) in enumerate(attempts):
            status, core_assign, piv = _simplex_float(
                core_vars, self.nonneg, self.rows, obj, sense,
                perturb_seed=seed, pivot_budget=budget,
            )
            pivots += piv
            if status == "budget" and seed is None:
                self._prefer_perturbed = True
            if status in ("infeasible", "unbounded"):
                trusted = seed is None or idx == len(attempts) - 1
                if trusted:
                    return LPSolution(status, {}, None, pivots=pivots,
                                      solve_time=time.perf_counter() - t0, mode="float")
                last_status = status
                continue
            if status == "optimal":
                assignment = self._reconstruct(core_assign)
                if self.check(assignment):
                    return LPSolution("optimal", assignment, original_value(assignment),
                                      pivots=pivots, solve_time=time.perf_counter() - t0,
                                      mode="float")
                last_status = "numerical_failure"
            else:
                last_status = status
        return LPSolution(last_status if last_status != "budget" else "numerical_failure",
                          {}, None, pivots=pivots,
                          solve_time=time.perf_counter() - t0, mode="float")

    def _reconstruct(self, core_assign: dict[str, Fraction]) -> dict[str, Fraction]:
        assignment: dict[str, Fraction] = dict(core_assign)
        for v, expr, const in reversed(self.log):
            total = const
            for w, k in expr.items():
                total += k * assignment.get(w, Fraction(0))
            assignment[v] = total
        for v in self.all_vars:
            assignment.setdefault(v, Fraction(0))
        return assignment

    def check(self, assignment: Mapping[str, Fraction], tol: Fraction = RECHECK_TOL) -> bool:
        """Exact re-substitution of the original constraints."""
        for c in self.original:
            total = sum(k * assignment[v] for v, k in c.coeffs.items()) if c.coeffs else Fraction(0)
            if c.sense == "eq" and abs(total - c.rhs) > tol:
                return False
            if c.sense == "ge" and total < c.rhs - tol:
                return False
            if c.sense == "le" and total > c.rhs + tol:
                return False
        return True


def _standard_form(core_vars, nonneg, rows, obj, sense):
    """Split free variables, add surplus columns, normalize rhs signs.

    Returns (columns, A-rows as dicts over column index, b, objective vector,
    column names for reconstruction)."""
    col_of: dict[str, int] = {}
    col_names: list[tuple[str, int]] = []  # (var, +1/-1)

    def ensure(v: str):
        if v in col_of:
            return
        col_of[v] = len(col_names)
        col_names.append((v, +1))
        if v not in nonneg:
            col_names.append((v, -1))

    for v in core_vars:
        ensure(v)

    a_rows = []
    b = []
    senses = []
    for coeffs, s, rhs in rows:
        row: dict[int, Fraction] = {}
        for v, c in coeffs.items():
            ensure(v)
            j = col_of[v]
            row[j] = row.get(j, Fraction(0)) + c
            if j + 1 < len(col_names) and col_names[j + 1] == (v, -1):
                row[j + 1] = row.get(j + 1, Fraction(0)) - c
        a_rows.append(row)
        b.append(rhs)
        senses.append(s)

    ncols = len(col_names)
    # surplus columns for 'ge' rows
    for i, s in enumerate(senses):
        if s == "ge":
            a_rows[i][ncols] = Fraction(-1)
            ncols += 1

    cvec: dict[int, Fraction] = {}
    sign = Fraction(1) if sense == "min" else Fraction(-1)
    for v, c in obj.items():
        j = col_of[v]
        cvec[j] = cvec.get(j, Fraction(0)) + sign * c
        if j + 1 < len(col_names) and col_names[j + 1] == (v, -1):
            cvec[j + 1] = cvec.get(j + 1, Fraction(0)) - sign * c

    # rhs >= 0
    for i in range(len(a_rows)):
        if b[i] < 0:
            a_rows[i] = {j: -c for j, c in a_rows[i].items()}
            b[i] = -b[i]
    return col_names, ncols, a_rows, b, cvec


def _simplex_float(core_vars, nonneg, rows, obj, sense, perturb_seed=None, pivot_budget=MAX_PIVOTS):
    """Primal simplex on a dense numpy tableau.

    Free variables are pivoted into the basis up front and never leave
    (their rows are excluded from ratio tests), which avoids the massive
    degeneracy that plain variable-splitting causes on template systems.
    A free variable that cannot be pivoted in gets a negated twin column so
    it can move in both directions.  Pricing is Devex until the objective
    stalls, then Bland's rule, which guarantees termination; the reduced
    costs are re-priced periodically to cap numerical drift.
    """
    variables = list(core_vars)
    col_of = {v: j for j, v in enumerate(variables)}
    nstruct = len(variables)
    m = len(rows)
    nge = sum(1 for _, s, _ in rows if s == "ge")
    nfree = sum(1 for v in variables if v not in nonneg)
    total = nstruct + nfree + nge + m  # structural, twins, surplus, artificial
    rhs_col = total

    T = np.zeros((m, total + 1))
    surplus_of = {}
    si = nstruct + nfree
    for i, (coeffs, s, rhs) in enumerate(rows):
        for v, c in coeffs.items():
            T[i, col_of[v]] = float(c)
        if s == "ge":
            T[i, si] = -1.0
            surplus_of[i] = si
            si += 1
        T[i, rhs_col] = float(rhs)
    if perturb_seed is not None:
        rng = random.Random(perturb_seed)
        for i in range(m):
            T[i, rhs_col] += rng.uniform(-1e-9, 1e-9)

    art0 = nstruct + nfree + nge
    basis = [-1] * m
    locked = [False] * m
    pivots = 0
    z = np.zeros(total + 1)
    cost: dict[int, float] = {}

    def apply_pivot(i, j):
        nonlocal pivots
        pivots += 1
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        nz = np.nonzero(col)[0]
        if len(nz):
            T[nz] -= np.outer(col[nz], T[i])
        if z[j] != 0.0:
            z[:] -= z[j] * T[i]
        basis[i] = j

    # phase 0: free structural columns into the basis; leftovers get twins
    twin_of = {}
    ti = nstruct
    for v in variables:
        if v in nonneg:
            continue
        j = col_of[v]
        column = np.where(locked, 0.0, T[:, j])
        i = int(np.argmax(np.abs(column)))
        if abs(column[i]) > 1e-9:
            apply_pivot(i, j)
            locked[i] = True
        else:
            T[:, ti] = -T[:, j]
            twin_of[j] = ti
            ti += 1

    # initial basis for the unlocked rows: surplus when the updated rhs
    # allows it, artificial otherwise
    art_rows = []
    for i in range(m):
        if locked[i]:
            continue
        s = surplus_of.get(i)
        if s is not None and T[i, rhs_col] <= 0:
            T[i] = -T[i]
            apply_pivot(i, s)
            continue
        if T[i, rhs_col] < 0:
            T[i] = -T[i]
        T[i, art0 + i] = 1.0
        basis[i] = art0 + i
        art_rows.append(i)

    def price(cost_of_col):
        nonlocal cost
        cost = dict(cost_of_col)
        z[:] = 0.0
        for j, c in cost.items():
            z[j] = c
        for i in range(m):
            if basis[i] >= 0 and z[basis[i]] != 0.0:
                z[:] -= z[basis[i]] * T[i]

    def reprice():
        z[:] = 0.0
        for j, c in cost.items():
            z[j] = c
        for i in range(m):
            if basis[i] >= 0 and z[basis[i]] != 0.0:
                z[:] -= z[basis[i]] * T[i]

    def run(allowed_cols):
        nonlocal pivots
        bland = False
        stall = 0
        last_obj = np.inf
        unlocked = ~np.array(locked, dtype=bool)
        weights = np.ones(allowed_cols)
        deadline = time.perf_counter() + 10.0
        since_reprice = 0
        while pivots < pivot_budget:
            if since_reprice >= 512:
                reprice()
                since_reprice = 0
                if time.perf_counter() > deadline:
                    return "budget"
            zz = z[:allowed_cols]
            if bland:
                candidates = np.nonzero(zz < -PIVOT_TOL)[0]
                if len(candidates) == 0:
                    return "optimal"
                j = int(candidates[0])
            else:
                neg = zz < -PIVOT_TOL
                if not neg.any():
                    return "optimal"
                scores = np.where(neg, zz * zz / weights, -1.0)
                j = int(np.argmax(scores))
            colv = T[:, j]
            mask = (colv > PIVOT_TOL) & unlocked
            if not mask.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[mask] = T[mask, rhs_col] / colv[mask]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12)[0]
            i = int(min(ties, key=lambda r: basis[r]))
            wq = min(max(weights[j] if j < allowed_cols else 1.0, 1.0), 1e10)
            apply_pivot(i, j)
            since_reprice += 1
            row = T[i, :allowed_cols]
            with np.errstate(over="ignore", invalid="ignore"):
                cand = np.nan_to_num((row * row) * wq, nan=1e12, posinf=1e12)
            weights = np.minimum(np.maximum(weights, cand), 1e12)
            if j < len(weights):
                weights[j] = wq
            obj_now = z[rhs_col]
            if obj_now < last_obj - 1e-12:
                stall = 0
                last_obj = obj_now
            else:
                stall += 1
                if stall > 400:
                    bland = True
        return "budget"

    if art_rows:
        price({art0 + i: 1.0 for i in art_rows})
        status = run(art0)
        if status != "optimal":
            return status, {}, pivots
        if -z[rhs_col] > 1e-7:
            return "infeasible", {}, pivots
        for i in art_rows:
            if basis[i] >= art0:
                row = T[i, :art0]
                nz = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
                if len(nz):
                    apply_pivot(i, int(nz[0]))

    sign = 1.0 if sense == "min" else -1.0
    phase2_cost = {}
    for v, c in obj.items():
        j = col_of[v]
        phase2_cost[j] = phase2_cost.get(j, 0.0) + sign * float(c)
        if j in twin_of:
            phase2_cost[twin_of[j]] = -phase2_cost[j]
    price(phase2_cost)
    status = run(art0)
    if status != "optimal":
        return status, {}, pivots

    values = np.zeros(total)
    for i in range(m):
        if 0 <= basis[i] < total:
            values[basis[i]] = T[i, rhs_col]
    assignment = {}
    for v in variables:
        j = col_of[v]
        x = values[j]
        if j in twin_of:
            x -= values[twin_of[j]]
        assignment[v] = Fraction(float(x)).limit_denominator(10**12)
    return "optimal", assignment, pivots


def _simplex_exact(core_vars, nonneg, rows, obj, sense):
    col_names, ncols, a_rows, b, cvec = _standard_form(core_vars, nonneg, rows, obj, sense)
    m = len(a_rows)
    total = ncols + m
    zero = Fraction(0)
    T = [[zero] * (total + 1) for _ in range(m)]
    for i, row in enumerate(a_rows):
        for j, c in row.items():
            T[i][j] = c
        T[i][ncols + i] = Fraction(1)
        T[i][total] = b[i]
    basis = list(range(ncols, ncols + m))

    z = [zero] * (total + 1)
    for i in range(m):
        for j in range(total + 1):
            z[j] -= T[i][j]
    for i in range(m):
        z[ncols + i] += Fraction(1)
    pivots = 0

    def pivot(i, j):
        nonlocal pivots
        pivots += 1
        piv = T[i][j]
        T[i] = [x / piv for x in T[i]]
        for r in range(m):
            if r != i and T[r][j] != 0:
                f = T[r][j]
                T[r] = [x - f * y for x, y in zip(T[r], T[i])]
        if z[j] != 0:
            f = z[j]
            for jj in range(total + 1):
                z[jj] -= f * T[i][jj]
        basis[i] = j

    def run(allowed_cols, forbidden=frozenset()):
        nonlocal pivots
        bland = False
        stall = 0
        last_obj = None
        while pivots < MAX_PIVOTS:
            j = None
            if bland:
                for jj in range(allowed_cols):
                    if jj not in forbidden and z[jj] < 0:
                        j = jj
                        break
            else:
                most = zero
                for jj in range(allowed_cols):
                    if jj not in forbidden and z[jj] < most:
                        most = z[jj]
                        j = jj
            if j is None:
                return "optimal"
            best = None
            for i in range(m):
                if T[i][j] > 0:
                    ratio = T[i][total] / T[i][j]
                    key = (ratio, basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            pivot(best[1], j)
            obj = z[total]
            if last_obj is None or obj < last_obj:
                stall = 0
                last_obj = obj
            else:
                stall += 1
                if stall > 150:
                    bland = True
        return "numerical_failure"

    status = run(total)
    if status != "optimal":
        return status, {}, pivots
    if -z[total] > 0:
        return "infeasible", {}, pivots
    for i in range(m):
        if basis[i] >= ncols:
            for j in range(ncols):
                if T[i][j] != 0:
                    pivot(i, j)
                    break

    z = [zero] * (total + 1)
    for j, c in cvec.items():
        z[j] = c
    for i in range(m):
        if z[basis[i]] != 0:
            f = z[basis[i]]
            for jj in range(total + 1):
                z[jj] -= f * T[i][jj]
    status = run(ncols, forbidden=frozenset())
    if status != "optimal":
        return status, {}, pivots

    values = [zero] * total
    for i in range(m):
        if basis[i] < total:
            values[basis[i]] = T[i][total]
    assignment: dict[str, Fraction] = {}
    for j, (v, sgn) in enumerate(col_names):
        assignment[v] = assignment.get(v, Fraction(0)) + (values[j] if sgn > 0 else -values[j])
    return "optimal", assignment, pivots


def solve(problem: LPProblem, exact: bool = False) -> LPSolution:
    """Presolve then solve; float results are re-checked exactly against the
    original constraints, with a perturbed retry before a numerical-failure
    verdict (both handled inside Presolved.solve)."""
    problem.validate()
    pre = Presolved(problem.variables, set(problem.nonneg), problem.constraints)
    return pre.solve(problem.objective, problem.sense, problem.objective_const, exact=exact)


def export_lp(problem: LPProblem) -> str:
    """Industry-standard LP text format; deterministic ordering."""
    lines = []
    lines.append("Minimize" if problem.sense == "min" else "Maximize")
    terms = []
    for v in problem.variables:
        c = problem.objective.get(v)
        if c:
            terms.append(_lp_term(c, v, first=not terms))
    if problem.objective_const:
        terms.append(_lp_term(problem.objective_const, "", first=not terms))
    lines.append(" obj: " + (" ".join(terms) if terms else "0"))
    lines.append("Subject To")
    for idx, c in enumerate(problem.constraints):
        terms = []
        for v in problem.variables:
            k = c.coeffs.get(v)
            if k:
                terms.append(_lp_term(k, v, first=not terms))
        op = {"eq": "=", "ge": ">=", "le": "<="}[c.sense]
        name = c.tag or f"c{idx}"
        name = name.replace(" ", "_")
        lines.append(f" {name}: {' '.join(terms) if terms else '0'} {op} {_lp_num(c.rhs)}")
    lines.append("Bounds")
    for v in problem.variables:
        if v not in problem.nonneg:
            lines.append(f" {v} free")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _lp_num(x: Fraction) -> str:
    f = float(x)
    if f == int(f):
        return str(int(f))
    return repr(f)


def _lp_term(c: Fraction, v: str, first: bool) -> str:
    mag = abs(c)
    base = _lp_num(mag)
    body = f"{base} {v}".strip() if mag != 1 or not v else v
    if first:
        return body if c > 0 else f"- {body}"
    return f"+ {body}" if c > 0 else f"- {body}"
