"""Exact rational linear and 0/1 integer programming, plus the program builders
for the hiding problems.

The simplex works on a sparse tableau of Fractions.  Pivots use the largest
improvement of the reduced cost (Dantzig) and switch to Bland's smallest
index rule after a run of degenerate pivots, which rules out cycling.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .model import Budget, BudgetExceeded, CostModel, WorkflowDef, as_fraction
from .requirements import CARDINALITY, SET, Requirements

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE, GE, EQ = "<=", ">=", "=="
ZERO = Fraction(0)
ONE = Fraction(1)
DEGENERATE_RUN = 50


@dataclass
class Constraint:
    coeffs: dict[str, Fraction]
    sense: str
    rhs: Fraction
    name: str = ""


@dataclass
class LinearProgram:
    """Minimize a linear objective over nonnegative, optionally bounded variables."""

    variables: list[str] = field(default_factory=list)
    upper: dict[str, Fraction | None] = field(default_factory=dict)
    integer: set[str] = field(default_factory=set)
    objective: dict[str, Fraction] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)

    def add_variable(self, name: str, upper=1, integer: bool = True, cost=0) -> str:
        if name in self.upper:
            raise ValueError(f"variable {name} declared twice")
        self.variables.append(name)
        self.upper[name] = None if upper is None else as_fraction(upper)
        if integer:
            self.integer.add(name)
        if cost:
            self.objective[name] = as_fraction(cost)
        return name

    def add_constraint(self, coeffs: Mapping[str, object], sense: str, rhs=0, name: str = "") -> None:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"unknown sense {sense!r}")
        clean = {}
        for v, a in coeffs.items():
            if v not in self.upper:
                raise KeyError(f"constraint {name or len(self.constraints)} uses undeclared {v}")
            a = as_fraction(a)
            if a:
                clean[v] = clean.get(v, ZERO) + a
        self.constraints.append(Constraint(clean, sense, as_fraction(rhs), name))

    def set_cost(self, name: str, cost) -> None:
        if name not in self.upper:
            raise KeyError(name)
        self.objective[name] = as_fraction(cost)

    def evaluate(self, values: Mapping[str, Fraction]) -> Fraction:
        return sum((c * values.get(v, ZERO) for v, c in self.objective.items()), ZERO)

    def violations(self, values: Mapping[str, Fraction]) -> list[str]:
        """Names of violated constraints and bounds under ``values``."""
        bad = []
        for v in self.variables:
            x = values.get(v, ZERO)
            u = self.upper[v]
            if x < 0 or (u is not None and x > u):
                bad.append(f"bound {v}")
        for k, c in enumerate(self.constraints):
            lhs = sum((a * values.get(v, ZERO) for v, a in c.coeffs.items()), ZERO)
            ok = lhs <= c.rhs if c.sense == LE else lhs >= c.rhs if c.sense == GE else lhs == c.rhs
            if not ok:
                bad.append(c.name or f"row {k}")
        return bad

    def to_text(self) -> str:
        """Human-readable LP-format export."""

        def term(a, v, first):
            sign = "-" if a < 0 else ("" if first else "+")
            mag = abs(a)
            body = v if mag == 1 else f"{mag} {v}"
            return f"{sign} {body}".strip() if first else f"{sign} {body}"

        def expr(coeffs):
            items = [(coeffs[v], v) for v in self.variables if coeffs.get(v)]
            if not items:
                return "0"
            return " ".join(term(a, v, k == 0) for k, (a, v) in enumerate(items))

        lines = ["Minimize", f" obj: {expr(self.objective)}", "Subject To"]
        for k, c in enumerate(self.constraints):
            lines.append(f" {c.name or f'c{k}'}: {expr(c.coeffs)} {'=' if c.sense == EQ else c.sense} {c.rhs}")
        lines.append("Bounds")
        for v in self.variables:
            u = self.upper[v]
            lines.append(f" 0 <= {v} <= {u}" if u is not None else f" {v} >= 0")
        binaries = [v for v in self.variables if v in self.integer]
        if binaries:
            lines += ["General", " " + " ".join(binaries)]
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LpSolution:
    status: str
    values: dict[str, Fraction]
    objective: Fraction | None
    nodes: int = 0


# -- simplex -----------------------------------------------------------------

class _Tableau:
    def __init__(self, rows, rhs, basis, ncols):
        self.rows: list[dict[int, Fraction]] = rows
        self.rhs: list[Fraction] = rhs
        self.basis: list[int] = basis
        self.ncols = ncols

    def pivot(self, r: int, c: int, objective: dict[int, Fraction], value: list[Fraction]) -> None:
        row = self.rows[r]
        p = row[c]
        if p != 1:
            inv = 1 / p
            for k in row:
                row[k] *= inv
            self.rhs[r] *= inv
        prow = list(row.items())
        prhs = self.rhs[r]
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other.get(c)
            if f is None:
                continue
            for k, v in prow:
                nv = other.get(k, ZERO) - f * v
                if nv:
                    other[k] = nv
                else:
                    other.pop(k, None)
            self.rhs[i] -= f * prhs
        f = objective.get(c)
        if f is not None:
            for k, v in prow:
                nv = objective.get(k, ZERO) - f * v
                if nv:
                    objective[k] = nv
                else:
                    objective.pop(k, None)
            value[0] -= f * prhs
        self.basis[r] = c

    def optimize(self, objective: dict[int, Fraction], value: list[Fraction], allowed) -> str:
        """Minimize; ``objective`` holds reduced costs, ``value[0]`` minus the objective."""
        degenerate = 0
        while True:
            bland = degenerate >= DEGENERATE_RUN
            entering = None
            best = ZERO
            for j in sorted(objective) if bland else objective:
                d = objective[j]
                if d < 0 and allowed(j):
                    if bland:
                        entering = j
                        break
                    if d < best or (d == best and entering is not None and j < entering):
                        best, entering = d, j
            if entering is None:
                return OPTIMAL
            leave, ratio = None, None
            for i, row in enumerate(self.rows):
                a = row.get(entering)
                if a is not None and a > 0:
                    t = self.rhs[i] / a
                    if ratio is None or t < ratio or (t == ratio and self.basis[i] < self.basis[leave]):
                        leave, ratio = i, t
            if leave is None:
                return UNBOUNDED
            degenerate = degenerate + 1 if ratio == 0 else 0
            self.pivot(leave, entering, objective, value)


def solve_lp(p: LinearProgram) -> LpSolution:
    """Exact optimum of the continuous relaxation (integrality ignored)."""
    names = p.variables
    n = len(names)
    index = {v: j for j, v in enumerate(names)}
    rows: list[dict[int, Fraction]] = []
    rhs: list[Fraction] = []
    basis: list[int] = []
    col = n
    artificial_start = None
    pending = []  # (coeffs, sense, rhs)
    for c in p.constraints:
        pending.append(({index[v]: a for v, a in c.coeffs.items()}, c.sense, c.rhs))
    for v in names:
        u = p.upper[v]
        if u is not None:
            pending.append(({index[v]: ONE}, LE, u))
    needs_art = []
    for coeffs, sense, b in pending:
        row = dict(coeffs)
        if b < 0:
            row = {k: -a for k, a in row.items()}
            b = -b
            sense = {LE: GE, GE: LE, EQ: EQ}[sense]
        if sense == LE:
            row[col] = ONE
            basis.append(col)
            col += 1
        else:
            if sense == GE:
                row[col] = -ONE
                col += 1
            basis.append(-1)
            needs_art.append(len(rows))
        rows.append(row)
        rhs.append(b)
    artificial_start = col
    for i in needs_art:
        rows[i][col] = ONE
        basis[i] = col
        col += 1
    tab = _Tableau(rows, rhs, basis, col)

    # phase one: minimize the sum of artificials
    if needs_art:
        objective: dict[int, Fraction] = {}
        value = [ZERO]
        for i in needs_art:
            for k, a in rows[i].items():
                if k < artificial_start:
                    objective[k] = objective.get(k, ZERO) - a
            value[0] -= rhs[i]
        for k in [k for k, a in objective.items() if not a]:
            del objective[k]
        tab.optimize(objective, value, lambda j: True)
        if value[0] != 0:
            return LpSolution(INFEASIBLE, {}, None)
        # drive remaining artificials out of the basis
        drop = []
        for i, b in enumerate(tab.basis):
            if b >= artificial_start:
                cands = sorted(k for k in tab.rows[i] if k < artificial_start)
                if cands:
                    tab.pivot(i, cands[0], {}, [ZERO])
                else:
                    drop.append(i)
        for i in reversed(drop):
            del tab.rows[i], tab.rhs[i], tab.basis[i]
        for row in tab.rows:
            for k in [k for k in row if k >= artificial_start]:
                del row[k]

    # phase two
    cost = {index[v]: c for v, c in p.objective.items() if c}
    objective = dict(cost)
    value = [ZERO]
    for i, b in enumerate(tab.basis):
        cb = cost.get(b)
        if cb:
            for k, a in tab.rows[i].items():
                nv = objective.get(k, ZERO) - cb * a
                if nv:
                    objective[k] = nv
                else:
                    objective.pop(k, None)
            value[0] -= cb * tab.rhs[i]
    status = tab.optimize(objective, value, lambda j: j < artificial_start)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, {}, None)
    values = {v: ZERO for v in names}
    for i, b in enumerate(tab.basis):
        if b < n:
            values[names[b]] = tab.rhs[i]
    return LpSolution(OPTIMAL, values, -value[0])


# -- branch and bound --------------------------------------------------------

def _fix(p: LinearProgram, fixed: Mapping[str, int]) -> tuple[LinearProgram, Fraction]:
    """Substitute fixed 0/1 values; returns the reduced program and the constant."""
    q = LinearProgram()
    for v in p.variables:
        if v not in fixed:
            q.variables.append(v)
            q.upper[v] = p.upper[v]
            if v in p.integer:
                q.integer.add(v)
            if v in p.objective:
                q.objective[v] = p.objective[v]
    const = sum((p.objective.get(v, ZERO) * val for v, val in fixed.items()), ZERO)
    for c in p.constraints:
        shift = sum((a * fixed[v] for v, a in c.coeffs.items() if v in fixed), ZERO)
        coeffs = {v: a for v, a in c.coeffs.items() if v not in fixed}
        q.constraints.append(Constraint(coeffs, c.sense, c.rhs - shift, c.name))
    return q, const


def _trivially_infeasible(p: LinearProgram) -> bool:
    for c in p.constraints:
        if c.coeffs:
            continue
        if (c.sense == LE and c.rhs < 0) or (c.sense == GE and c.rhs > 0) or (c.sense == EQ and c.rhs != 0):
            return True
    return False


def _granularity(p: LinearProgram) -> Fraction | None:
    """Step g with every integral objective value a multiple of g, if any."""
    coeffs = [c for v, c in p.objective.items() if c]
    if any(v not in p.integer for v, c in p.objective.items() if c):
        return None
    if not coeffs:
        return None
    den = math.lcm(*(c.denominator for c in coeffs))
    g = math.gcd(*(int(c * den) for c in coeffs))
    return Fraction(g, den)


def solve_ip_exact(p: LinearProgram, budget: Budget | None = None) -> LpSolution:
    """Optimal solution with every integer-flagged variable in {0, 1}.

    Depth-first branch-and-bound on the LP relaxation: branch on the
    lowest-index fractional variable, down-branch first.  A node is pruned
    when its bound, rounded up to the objective lattice, cannot beat the
    incumbent.
    """
    budget = budget or Budget()
    for v in p.integer:
        u = p.upper[v]
        if u is None or u > 1:
            raise ValueError(f"integer variable {v} must be binary")
    step = _granularity(p)
    best: list = [None, None]  # objective, values
    nodes = 0
    order = [v for v in p.variables if v in p.integer]

    def bound_of(x: Fraction) -> Fraction:
        if step is None:
            return x
        return math.ceil(x / step) * step

    stack: list[dict[str, int]] = [{}]
    while stack:
        fixed = stack.pop()
        nodes += 1
        if nodes > budget.nodes:
            raise BudgetExceeded(f"branch-and-bound exceeded {budget.nodes} nodes")
        q, const = _fix(p, fixed)
        if _trivially_infeasible(q):
            continue
        sol = solve_lp(q)
        if sol.status == INFEASIBLE:
            continue
        if sol.status == UNBOUNDED:
            if best[0] is None and not fixed:
                return LpSolution(UNBOUNDED, {}, None, nodes)
            continue
        value = sol.objective + const
        if best[0] is not None and bound_of(value) >= best[0]:
            continue
        frac = next((v for v in order if v not in fixed and sol.values[v].denominator != 1), None)
        if frac is None:
            values = {v: Fraction(fixed[v]) if v in fixed else sol.values[v] for v in p.variables}
            best = [value, values]
            continue
        # push up-branch first so the down-branch is explored first
        stack.append({**fixed, frac: 1})
        stack.append({**fixed, frac: 0})
    if best[0] is None:
        return LpSolution(INFEASIBLE, {}, None, nodes)
    return LpSolution(OPTIMAL, best[1], best[0], nodes)


# -- program builders --------------------------------------------------------

def _check_reqs(w: WorkflowDef, reqs: Requirements, form: str) -> None:
    if reqs.form != form:
        raise ValueError(f"expected {form} requirements, got {reqs.form}")
    reqs.validate(w)
    for name, options in reqs.lists.items():
        if not options:
            raise ValueError(f"module {name} has an empty requirement list")


def _attribute_variables(p: LinearProgram, w: WorkflowDef, cost: CostModel) -> None:
    for a in w.names:
        p.add_variable(f"x:{a}", cost=cost.attribute_costs[a])


def build_cardinality_ip(w: WorkflowDef, reqs: Requirements, cost: CostModel) -> LinearProgram:
    """Hiding program with per-module (inputs, outputs) count requirements.

    r:<mod>:<j> selects option j; y/z:<attr>:<mod>:<j> count a hidden input
    or output towards that option; every counted attribute is paid for once
    per module through x:<attr>.  Count variables are only created for an
    option that asks for at least one attribute of that side.
    """
    _check_reqs(w, reqs, CARDINALITY)
    p = LinearProgram()
    _attribute_variables(p, w, cost)
    sides = {}
    for name, options in reqs.lists.items():
        m = w.module(name)
        for j, (alpha, beta) in enumerate(options):
            p.add_variable(f"r:{name}:{j}")
            sides[name, j] = (("y", m.inputs, alpha), ("z", m.outputs, beta))
            for kind, attrs, need in sides[name, j]:
                if need:
                    for b in attrs:
                        p.add_variable(f"{kind}:{b}:{name}:{j}")
    for name, options in reqs.lists.items():
        m = w.module(name)
        p.add_constraint({f"r:{name}:{j}": 1 for j in range(len(options))}, GE, 1, f"choose:{name}")
        for j in range(len(options)):
            r = f"r:{name}:{j}"
            for kind, attrs, need in sides[name, j]:
                if need:
                    label = "inputs" if kind == "y" else "outputs"
                    p.add_constraint({**{f"{kind}:{b}:{name}:{j}": 1 for b in attrs}, r: -need}, GE, 0,
                                     f"{label}:{name}:{j}")
        for kind, attrs in (("y", m.inputs), ("z", m.outputs)):
            for b in attrs:
                used = [j for j in range(len(options)) if f"{kind}:{b}:{name}:{j}" in p.upper]
                if not used:
                    continue
                p.add_constraint({**{f"{kind}:{b}:{name}:{j}": 1 for j in used}, f"x:{b}": -1}, LE, 0,
                                 f"pay:{b}:{name}")
                for j in used:
                    p.add_constraint({f"{kind}:{b}:{name}:{j}": 1, f"r:{name}:{j}": -1}, LE, 0,
                                     f"link:{b}:{name}:{j}")
    return p


def build_set_ip(w: WorkflowDef, reqs: Requirements, cost: CostModel) -> LinearProgram:
    """Hiding program where each option names the exact attributes to hide."""
    _check_reqs(w, reqs, SET)
    p = LinearProgram()
    _attribute_variables(p, w, cost)
    for name, options in reqs.lists.items():
        for j, _ in enumerate(options):
            p.add_variable(f"r:{name}:{j}")
    for name, options in reqs.lists.items():
        p.add_constraint({f"r:{name}:{j}": 1 for j in range(len(options))}, GE, 1, f"choose:{name}")
        for j, opt in enumerate(options):
            for b in opt.inputs + opt.outputs:
                p.add_constraint({f"x:{b}": 1, f"r:{name}:{j}": -1}, GE, 0, f"cover:{b}:{name}:{j}")
    return p


def add_privatization(p: LinearProgram, w: WorkflowDef, cost: CostModel) -> LinearProgram:
    """Charge each public module once any of its attributes is hidden."""
    for m in w.public_modules:
        p.add_variable(f"w:{m.name}", cost=cost.privatization_costs[m.name])
        for b in m.attributes:
            p.add_constraint({f"w:{m.name}": 1, f"x:{b}": -1}, GE, 0, f"privatize:{m.name}:{b}")
    return p


def build_general_set_ip(w: WorkflowDef, reqs: Requirements, cost: CostModel) -> LinearProgram:
    """Set-requirement program for workflows that include public modules."""
    return add_privatization(build_set_ip(w, reqs, cost), w, cost)


def hidden_from(values: Mapping[str, Fraction], names: Iterable[str], threshold=ONE) -> list[str]:
    """Attributes whose x-variable reaches ``threshold``."""
    return [a for a in names if values.get(f"x:{a}", ZERO) >= threshold]
