"""Algorithms choosing which attributes (and public modules) to hide."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .lp import (
    INFEASIBLE,
    OPTIMAL,
    add_privatization,
    build_cardinality_ip,
    build_general_set_ip,
    build_set_ip,
    solve_ip_exact,
    solve_lp,
)
from .model import Budget, CostModel, Infeasible, WorkflowDef
from .requirements import CARDINALITY, SET, Requirements, SetOption
from .standalone import SafeSubsetReport

EXACT = "exact"
CARD_ROUND = "card-round"
SET_ROUND = "set-round"
GREEDY = "greedy"
GENERAL_SET = "general-set"
UNION = "union"
METHODS = (EXACT, CARD_ROUND, SET_ROUND, GREEDY, GENERAL_SET)

_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Solution:
    hidden_attributes: tuple[str, ...]
    hidden_public_modules: tuple[str, ...]
    cost: Fraction
    method: str
    feasible: bool
    seed: int | None = None
    satisfied_option: dict[str, int] = field(default_factory=dict)
    lp_objective: Fraction | None = None


class SplitMix64:
    """Small seeded generator producing uniform doubles in [0, 1)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53


def _ordered(w: WorkflowDef, names: Iterable[str]) -> tuple[str, ...]:
    names = set(names)
    return tuple(n for n in w.names if n in names)


def _modules_in_order(w: WorkflowDef, reqs: Requirements) -> list[str]:
    return [m.name for m in w.modules if m.name in reqs.lists]


def option_satisfied(w: WorkflowDef, form: str, module: str, option, hidden: frozenset[str]) -> bool:
    m = w.module(module)
    if form == CARDINALITY:
        alpha, beta = option
        return sum(a in hidden for a in m.inputs) >= alpha and sum(a in hidden for a in m.outputs) >= beta
    return option.attributes <= hidden


def adjacent_public(w: WorkflowDef, hidden: Iterable[str]) -> tuple[str, ...]:
    """Public modules touching a hidden attribute; they must be privatized."""
    hidden = set(hidden)
    return tuple(m.name for m in w.public_modules if hidden & set(m.attributes))


def verify_solution(w: WorkflowDef, reqs: Requirements, sol: Solution,
                    cost: CostModel | None = None) -> tuple[bool, dict[str, int]]:
    """Check every requirement list; returns the lowest satisfied option per module.

    Public modules adjacent to a hidden attribute must be listed as hidden.
    When a cost model is given, the recorded cost must also match.
    """
    hidden = frozenset(sol.hidden_attributes)
    ok = hidden <= set(w.names)
    satisfied = {}
    for name in _modules_in_order(w, reqs):
        j = next((j for j, opt in enumerate(reqs.lists[name])
                  if option_satisfied(w, reqs.form, name, opt, hidden)), None)
        if j is None:
            ok = False
        else:
            satisfied[name] = j
    if not set(adjacent_public(w, hidden)) <= set(sol.hidden_public_modules):
        ok = False
    if cost is not None and cost.total(hidden, sol.hidden_public_modules) != sol.cost:
        ok = False
    return ok, satisfied


def _finish(w, reqs, cost, hidden, method, seed=None, lp_objective=None, hidden_public=None) -> Solution:
    hidden = _ordered(w, hidden)
    if hidden_public is None:
        hidden_public = adjacent_public(w, hidden)
    sol = Solution(hidden, tuple(hidden_public), cost.total(hidden, hidden_public), method, True, seed,
                   {}, lp_objective)
    ok, satisfied = verify_solution(w, reqs, sol)
    return Solution(sol.hidden_attributes, sol.hidden_public_modules, sol.cost, method, ok, seed,
                    satisfied, lp_objective)


def _program(w: WorkflowDef, reqs: Requirements, cost: CostModel):
    if reqs.form == CARDINALITY:
        p = build_cardinality_ip(w, reqs, cost)
        return add_privatization(p, w, cost) if w.public_modules else p
    if w.public_modules:
        return build_general_set_ip(w, reqs, cost)
    return build_set_ip(w, reqs, cost)


def _empty(reqs: Requirements) -> bool:
    return not reqs.lists


def solve_exact(w: WorkflowDef, reqs: Requirements, cost: CostModel, budget: Budget | None = None) -> Solution:
    """Optimum by branch-and-bound on the matching integer program."""
    cost.check(w)
    if _empty(reqs):
        return _finish(w, reqs, cost, (), EXACT)
    sol = solve_ip_exact(_program(w, reqs, cost), budget)
    if sol.status == INFEASIBLE:
        raise Infeasible("no hiding choice satisfies the requirements")
    hidden = [a for a in w.names if sol.values[f"x:{a}"] == 1]
    result = _finish(w, reqs, cost, hidden, EXACT)
    if result.cost != sol.objective:
        raise AssertionError(f"objective {sol.objective} differs from solution cost {result.cost}")
    return result


def _relaxation(p):
    sol = solve_lp(p)
    if sol.status != OPTIMAL:
        raise Infeasible(f"relaxation is {sol.status}")
    return sol


def _cheapest(names: Iterable[str], count: int, cost: CostModel) -> list[str]:
    return sorted(names, key=lambda a: (Fraction(cost.attribute_costs[a]), a))[:count]


def cheapest_option(w: WorkflowDef, reqs: Requirements, module: str, cost: CostModel) -> tuple[int, frozenset[str]]:
    """Lowest-cost way to satisfy one module on its own; ties go to the lowest index."""
    m = w.module(module)
    best = None
    for j, opt in enumerate(reqs.lists[module]):
        if reqs.form == CARDINALITY:
            alpha, beta = opt
            chosen = frozenset(_cheapest(m.inputs, alpha, cost) + _cheapest(m.outputs, beta, cost))
        else:
            chosen = opt.attributes
        price = cost.attrs(chosen)
        if best is None or price < best[0]:
            best = (price, j, chosen)
    if best is None:
        raise Infeasible(f"module {module} has an empty requirement list")
    return best[1], best[2]


def rounding_probability(x: Fraction, n: int) -> float:
    """Inclusion probability min{1, 16 x ln n} for an attribute with LP value x."""
    if x <= 0 or n <= 1:
        return 0.0
    return min(1.0, 16.0 * float(x) * math.log(n))


def solve_cardinality_rounding(w: WorkflowDef, reqs: Requirements, cost: CostModel, seed: int) -> Solution:
    """Randomized rounding of the cardinality relaxation, then patching.

    Each attribute is drawn once, in attribute order, from a generator
    seeded with ``seed``.  Modules left unsatisfied, visited in workflow
    order, receive their cheapest option.
    """
    if reqs.form != CARDINALITY:
        raise ValueError("cardinality rounding needs cardinality requirements")
    cost.check(w)
    if _empty(reqs):
        return _finish(w, reqs, cost, (), CARD_ROUND, seed, Fraction(0))
    lp = _relaxation(_program(w, reqs, cost))
    n = len(reqs.lists)
    rng = SplitMix64(seed)
    hidden = set()
    for a in w.names:
        if rng.random() < rounding_probability(lp.values[f"x:{a}"], n):
            hidden.add(a)
    for name in _modules_in_order(w, reqs):
        if not any(option_satisfied(w, CARDINALITY, name, o, frozenset(hidden)) for o in reqs.lists[name]):
            hidden |= cheapest_option(w, reqs, name, cost)[1]
    return _finish(w, reqs, cost, hidden, CARD_ROUND, seed, lp.objective)


def _threshold(w: WorkflowDef, reqs: Requirements, cost: CostModel, method: str) -> Solution:
    lp = _relaxation(_program(w, reqs, cost))
    cut = Fraction(1, reqs.ell_max)
    hidden = [a for a in w.names if lp.values[f"x:{a}"] >= cut]
    return _finish(w, reqs, cost, hidden, method, None, lp.objective)


def solve_set_rounding(w: WorkflowDef, reqs: Requirements, cost: CostModel) -> Solution:
    """Hide every attribute whose relaxed value is at least 1/ell_max."""
    if reqs.form != SET:
        raise ValueError("set rounding needs set requirements")
    if w.public_modules:
        raise ValueError("set rounding handles all-private workflows; use the general variant")
    cost.check(w)
    if _empty(reqs):
        return _finish(w, reqs, cost, (), SET_ROUND, None, Fraction(0))
    return _threshold(w, reqs, cost, SET_ROUND)


def solve_general_set(w: WorkflowDef, reqs: Requirements, cost: CostModel) -> Solution:
    """Threshold rounding with public modules privatized when touched."""
    if reqs.form != SET:
        raise ValueError("the general variant needs set requirements")
    cost.check(w)
    if _empty(reqs):
        return _finish(w, reqs, cost, (), GENERAL_SET, None, Fraction(0))
    return _threshold(w, reqs, cost, GENERAL_SET)


def solve_greedy_bounded(w: WorkflowDef, reqs: Requirements, cost: CostModel) -> Solution:
    """Union over modules of each module's cheapest option."""
    cost.check(w)
    hidden = set()
    for name in _modules_in_order(w, reqs):
        hidden |= cheapest_option(w, reqs, name, cost)[1]
    return _finish(w, reqs, cost, hidden, GREEDY)


def union_of_standalone(w: WorkflowDef, reports: Mapping[str, SafeSubsetReport], cost: CostModel,
                        reqs: Requirements | None = None) -> Solution:
    """Hide the union of every private module's cheapest standalone-safe set."""
    cost.check(w)
    hidden = set()
    for m in w.private_modules:
        if m.name not in reports:
            raise Infeasible(f"no standalone report for module {m.name}")
        hidden |= reports[m.name].min_cost_hidden
    reqs = reqs or Requirements(SET, {
        name: (SetOption(tuple(a for a in rep.inputs if a in rep.min_cost_hidden),
                         tuple(a for a in rep.outputs if a in rep.min_cost_hidden)),)
        for name, rep in reports.items()
    })
    return _finish(w, reqs, cost, hidden, UNION)


def solve(method: str, w: WorkflowDef, reqs: Requirements, cost: CostModel, seed: int | None = None,
          budget: Budget | None = None) -> Solution:
    if method == EXACT:
        return solve_exact(w, reqs, cost, budget)
    if method == CARD_ROUND:
        return solve_cardinality_rounding(w, reqs, cost, 0 if seed is None else seed)
    if method == SET_ROUND:
        return solve_set_rounding(w, reqs, cost)
    if method == GREEDY:
        return solve_greedy_bounded(w, reqs, cost)
    if method == GENERAL_SET:
        return solve_general_set(w, reqs, cost)
    raise ValueError(f"unknown method {method!r}")
