"""Minimum-cost safe hiding for a single module, and requirement extraction."""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

from .model import CostModel, Infeasible, ModuleDef, Relation
from .privacy import View, is_standalone_safe
from .requirements import CARDINALITY, SET, SetOption, normalize_cardinality

MAX_ATTRIBUTES = 20


@dataclass(frozen=True)
class SafeSubsetReport:
    module: str
    gamma: int
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    safe_hidden_sets: tuple[frozenset[str], ...]
    min_cost_hidden: frozenset[str]
    min_cost: Fraction


def _view(m: ModuleDef, hidden) -> View:
    hidden = frozenset(hidden)
    return View(frozenset(m.attributes) - hidden, hidden)


def _check_size(m: ModuleDef, bound: int) -> None:
    if len(m.attributes) > bound:
        raise ValueError(f"module {m.name} has {len(m.attributes)} attributes, bound is {bound}")


def min_cost_safe_subset(m: ModuleDef, r: Relation, cost: CostModel, gamma: int,
                         bound: int = MAX_ATTRIBUTES) -> tuple[View, Fraction]:
    """Cheapest hidden set that makes ``m`` standalone-safe.

    Candidates are scanned by increasing size and, within a size, in
    attribute order; a candidate replaces the incumbent only when strictly
    cheaper, which yields the tie-break (cost, size, lexicographic).  The
    scan stops once the cheapest sets of the next size cannot beat it.
    """
    _check_size(m, bound)
    attrs = m.attributes
    prices = [Fraction(cost.attribute_costs[a]) for a in attrs]
    ascending = sorted(prices)
    best: tuple[Fraction, tuple[int, ...]] | None = None
    for size in range(len(attrs) + 1):
        if best is not None and sum(ascending[:size], Fraction(0)) >= best[0]:
            break
        for combo in itertools.combinations(range(len(attrs)), size):
            price = sum((prices[i] for i in combo), Fraction(0))
            if best is not None and price >= best[0]:
                continue
            if is_standalone_safe(m, r, _view(m, (attrs[i] for i in combo)), gamma):
                best = (price, combo)
    if best is None:
        raise Infeasible(f"module {m.name} cannot reach gamma={gamma} even with everything hidden")
    return _view(m, (attrs[i] for i in best[1])), best[0]


def enumerate_safe_hidden_sets(m: ModuleDef, r: Relation, gamma: int,
                               bound: int = MAX_ATTRIBUTES) -> tuple[frozenset[str], ...]:
    """All minimal safe hidden sets, by increasing size then attribute order.

    Supersets of a set already found are safe by monotonicity and never
    minimal, so they are skipped without a check.
    """
    _check_size(m, bound)
    attrs = m.attributes
    found: list[frozenset[str]] = []
    for size in range(len(attrs) + 1):
        for combo in itertools.combinations(attrs, size):
            s = frozenset(combo)
            if any(f <= s for f in found):
                continue
            if is_standalone_safe(m, r, _view(m, s), gamma):
                found.append(s)
    if not found:
        raise Infeasible(f"module {m.name} cannot reach gamma={gamma} even with everything hidden")
    return tuple(found)


def standalone_report(m: ModuleDef, r: Relation, cost: CostModel, gamma: int,
                      bound: int = MAX_ATTRIBUTES, antichain: bool = True) -> SafeSubsetReport:
    """Minimal safe sets and the cheapest one; ``antichain=False`` skips the
    former for wide modules where only the cheapest set is needed."""
    sets = enumerate_safe_hidden_sets(m, r, gamma, bound) if antichain else ()
    view, price = min_cost_safe_subset(m, r, cost, gamma, bound)
    return SafeSubsetReport(m.name, gamma, m.inputs, m.outputs, sets, view.hidden, price)


def _safe(sets: Sequence[frozenset[str]], candidate: frozenset[str]) -> bool:
    return any(s <= candidate for s in sets)


def closed_shapes(report: SafeSubsetReport) -> tuple[tuple[int, int], ...]:
    """Minimal (inputs, outputs) counts for which every set of that shape is safe."""
    closed = []
    for a in range(len(report.inputs) + 1):
        for b in range(len(report.outputs) + 1):
            if any(p <= a and q <= b for p, q in closed):
                continue
            if all(
                _safe(report.safe_hidden_sets, frozenset(ins) | frozenset(outs))
                for ins in itertools.combinations(report.inputs, a)
                for outs in itertools.combinations(report.outputs, b)
            ):
                closed.append((a, b))
    return normalize_cardinality(closed)


def to_requirements(report: SafeSubsetReport, form: str, strict: bool = False) -> tuple:
    """Requirement list for one module.

    Set form lists each minimal safe set split into inputs and outputs.
    Cardinality form lists the minimal shapes whose every instance is safe.
    With ``strict`` the cardinality form is refused unless each minimal safe
    set has such a shape, that is, unless nothing is lost by counting.
    """
    if not report.safe_hidden_sets:
        raise ValueError(f"report for {report.module} carries no minimal safe sets")
    if form == SET:
        return tuple(
            SetOption(tuple(a for a in report.inputs if a in s), tuple(a for a in report.outputs if a in s))
            for s in report.safe_hidden_sets
        )
    if form != CARDINALITY:
        raise ValueError(f"unknown requirement form {form!r}")
    shapes = closed_shapes(report)
    if not shapes:
        raise Infeasible(f"module {report.module} has no safe cardinality shape")
    if strict:
        for s in report.safe_hidden_sets:
            shape = (len(s & set(report.inputs)), len(s & set(report.outputs)))
            if shape not in shapes:
                raise ValueError(
                    f"module {report.module}: safe set {sorted(s)} is not captured by counts alone"
                )
    return shapes
