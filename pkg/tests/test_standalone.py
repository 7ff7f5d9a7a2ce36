import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from secureview.harness import gen_fig1, gen_majority, gen_oneone, gen_random_instance
from secureview.model import CostModel, Infeasible, WorkflowDef, module_table
from secureview.privacy import View, is_standalone_safe
from secureview.requirements import CARDINALITY, SET, SetOption
from secureview.standalone import (
    closed_shapes,
    enumerate_safe_hidden_sets,
    min_cost_safe_subset,
    standalone_report,
    to_requirements,
)

# Frozen from oracles.brute_safe_hidden_sets on the three-module example.
M1_ANTICHAIN = [{"a1", "a3"}, {"a1", "a4"}, {"a1", "a5"}, {"a2", "a3"}, {"a2", "a4"},
                {"a2", "a5"}, {"a3", "a4"}, {"a3", "a5"}, {"a4", "a5"}]
M2_ANTICHAIN = [{"a3"}, {"a4"}, {"a6"}]
M3_ANTICHAIN = [{"a7"}, {"a4", "a5"}]


def module_and_table(inst, name):
    w = inst.workflow
    return w.module(name), module_table(w, name)


@pytest.mark.parametrize("name, gamma, expected", [
    ("m1", 4, M1_ANTICHAIN), ("m2", 2, M2_ANTICHAIN), ("m3", 2, M3_ANTICHAIN),
])
def test_fig1_antichains(name, gamma, expected):
    inst = gen_fig1()
    m, r = module_and_table(inst, name)
    got = enumerate_safe_hidden_sets(m, r, gamma)
    assert [set(s) for s in got] == expected
    alone = WorkflowDef.single(m, inst.workflow.attributes)
    assert set(got) == oracles.brute_safe_hidden_sets(alone, name, r, gamma)


def test_input_pair_of_m1_is_not_enough():
    m, r = module_and_table(gen_fig1(), "m1")
    assert frozenset({"a1", "a2"}) not in enumerate_safe_hidden_sets(m, r, 4)


def test_m1_minimum_cost_and_tiebreak():
    inst = gen_fig1()
    m, r = module_and_table(inst, "m1")
    view, cost = min_cost_safe_subset(m, r, inst.costs, 4)
    assert cost == 2 and view.hidden == {"a1", "a3"}
    pricey = CostModel({**inst.costs.attribute_costs, "a1": Fraction(5)})
    view, cost = min_cost_safe_subset(m, r, pricey, 4)
    assert cost == 2 and view.hidden == {"a2", "a3"}


def test_infeasible_gamma():
    m, r = module_and_table(gen_fig1(), "m2")
    with pytest.raises(Infeasible):
        min_cost_safe_subset(m, r, gen_fig1().costs, 4)
    with pytest.raises(Infeasible):
        enumerate_safe_hidden_sets(m, r, 4)


def test_attribute_bound():
    m, r = module_and_table(gen_fig1(), "m1")
    with pytest.raises(ValueError):
        enumerate_safe_hidden_sets(m, r, 4, bound=3)


def test_identity_shapes():
    inst = gen_oneone(2)
    m, r = module_and_table(inst, "m")
    report = standalone_report(m, r, inst.costs, 4)
    assert to_requirements(report, CARDINALITY) == ((0, 2), (2, 0))
    # {x1, y2} is safe but {x1, y1} is not, so counts alone lose information
    assert frozenset({"x1", "y2"}) in report.safe_hidden_sets
    with pytest.raises(ValueError):
        to_requirements(report, CARDINALITY, strict=True)
    sets = to_requirements(report, SET)
    assert SetOption(("x1", "x2"), ()) in sets and SetOption((), ("y1", "y2")) in sets


def test_majority_shapes():
    for k in (1, 2):
        inst = gen_majority(k)
        m, r = module_and_table(inst, "maj")
        report = standalone_report(m, r, inst.costs, 2)
        assert closed_shapes(report) == ((0, 1), (k + 1, 0))


def test_strict_cardinality_when_counts_suffice():
    inst = gen_fig1()
    m, r = module_and_table(inst, "m3")
    report = standalone_report(m, r, inst.costs, 2)
    assert to_requirements(report, CARDINALITY, strict=True) == ((0, 1), (2, 0))


def test_report_without_antichain_cannot_give_lists():
    inst = gen_fig1()
    m, r = module_and_table(inst, "m1")
    report = standalone_report(m, r, inst.costs, 4, antichain=False)
    assert report.min_cost == 2
    with pytest.raises(ValueError):
        to_requirements(report, SET)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_random_modules_match_oracle(seed, gamma):
    inst = gen_random_instance(seed, n=1, max_inputs=2, max_outputs=2)
    m, r = module_and_table(inst, "m1")
    w = WorkflowDef.single(m, inst.workflow.attributes)
    brute = oracles.brute_safe_hidden_sets(w, "m1", r, gamma)
    if not brute:
        with pytest.raises(Infeasible):
            enumerate_safe_hidden_sets(m, r, gamma)
        return
    assert set(enumerate_safe_hidden_sets(m, r, gamma)) == brute
    view, cost = min_cost_safe_subset(m, r, inst.costs, gamma)
    assert cost == min(inst.costs.total(s) for s in brute)
    assert is_standalone_safe(m, r, view, gamma)
    # every superset of a safe set stays safe
    everything = View(frozenset(), frozenset(m.attributes))
    assert is_standalone_safe(m, r, everything, gamma)
    for shape in closed_shapes(standalone_report(m, r, inst.costs, gamma)):
        assert shape[0] <= len(m.inputs) and shape[1] <= len(m.outputs)


def test_gamma_one_hides_nothing():
    inst = gen_fig1()
    m, r = module_and_table(inst, "m1")
    view, cost = min_cost_safe_subset(m, r, inst.costs, 1)
    assert cost == 0 and view.hidden == frozenset()


@pytest.mark.parametrize("k", [1, 2, 3])
def test_one_one_module_needs_k_attributes(k):
    inst = gen_oneone(k, seed=k)
    m, r = module_and_table(inst, "m")
    view, cost = min_cost_safe_subset(m, r, inst.costs, 2 ** k)
    assert cost == k
    assert view.hidden == set(m.inputs)
    ident = gen_oneone(k)
    m, r = module_and_table(ident, "m")
    assert closed_shapes(standalone_report(m, r, ident.costs, 2 ** k)) == ((0, k), (k, 0))


def test_majority_antichain_contents():
    k = 2
    inst = gen_majority(k)
    m, r = module_and_table(inst, "maj")
    sets = set(enumerate_safe_hidden_sets(m, r, 2))
    assert frozenset({"out"}) in sets
    assert {s for s in sets if len(s) == k + 1} == {frozenset(c) for c in itertools.combinations(m.inputs, k + 1)}


def test_constant_module():
    from secureview.model import AttributeDef, Behavior, ModuleDef

    m = ModuleDef("c", ("x",), ("y",), Behavior.named("constant", value=["1"]))
    w = WorkflowDef((AttributeDef("x"), AttributeDef("y")), (m,))
    r = module_table(w, "c")
    # a hidden output ranges over its whole domain, so only hiding y helps
    assert enumerate_safe_hidden_sets(m, r, 2) == (frozenset({"y"}),)
    with pytest.raises(Infeasible):
        enumerate_safe_hidden_sets(m, r, 3)


def test_m1_set_form_options():
    inst = gen_fig1()
    m, r = module_and_table(inst, "m1")
    options = to_requirements(standalone_report(m, r, inst.costs, 4), SET)
    for expected in (SetOption((), ("a4", "a5")), SetOption((), ("a3", "a4")), SetOption((), ("a3", "a5")),
                     SetOption(("a2",), ("a4",))):
        assert expected in options
    assert SetOption(("a1", "a2"), ()) not in options


def test_min_cost_equals_cheapest_antichain_member():
    inst = gen_fig1()
    costs = CostModel({a: Fraction(i + 1) for i, a in enumerate(inst.workflow.names)})
    for name, gamma in (("m1", 4), ("m2", 2), ("m3", 2)):
        m, r = module_and_table(inst, name)
        report = standalone_report(m, r, costs, gamma)
        assert report.min_cost == min(costs.total(s) for s in report.safe_hidden_sets)
        assert is_standalone_safe(m, r, View(frozenset(m.attributes) - report.min_cost_hidden,
                                             report.min_cost_hidden), gamma)
