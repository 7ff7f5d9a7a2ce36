"""End-to-end acceptance checks, one test per criterion.

Each test appends a PASS/FAIL line (with timing and the headline numbers)
that the terminal summary prints at the end of the run.
"""

import contextlib
import itertools
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

import oracles
from secureview.harness import (
    gen_example41,
    gen_fig1,
    gen_oneone_chain,
    gen_public_counterexample,
    gen_random_instance,
    public_hidden_inputs,
    standalone_reports,
)
from secureview.lp import build_cardinality_ip, build_set_ip, solve_lp
from secureview.model import (
    AttributeDef,
    Behavior,
    Budget,
    ModuleDef,
    Relation,
    WorkflowDef,
    data_sharing_degree,
    execute_workflow,
    module_table,
)
from secureview.privacy import (
    SAFE,
    SAFE_BY_THEOREM,
    UNSAFE,
    View,
    count_worlds,
    flip_world,
    is_possible_world,
    is_standalone_safe,
    is_workflow_safe,
    standalone_out_set,
    standalone_out_set_by_worlds,
    standalone_out_sizes,
    workflow_out_set_exact,
    workflow_out_sets,
    world_in_enumeration,
)
from secureview.requirements import CARDINALITY, SET, Requirements
from secureview.solvers import (
    solve_cardinality_rounding,
    solve_exact,
    solve_general_set,
    solve_greedy_bounded,
    solve_set_rounding,
    union_of_standalone,
    verify_solution,
)
from secureview.standalone import enumerate_safe_hidden_sets

F = Fraction


@contextlib.contextmanager
def criterion(log, number, title, limit):
    """Time the block and record one PASS/FAIL line; failures still raise."""
    notes: list[str] = []
    start = time.perf_counter()
    try:
        yield notes
        elapsed = time.perf_counter() - start
        assert elapsed < limit, f"took {elapsed:.1f}s, limit {limit}s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        line = f"criterion {number:2d} FAIL {title} ({elapsed:.2f}s): {exc}"
        log.append(line)
        print(line)
        raise
    line = f"criterion {number:2d} PASS {title} ({elapsed:.2f}s)" + (f": {'; '.join(notes)}" if notes else "")
    log.append(line)
    print(line)


def m1_standalone():
    w = gen_fig1().workflow
    m = w.module("m1")
    return m, WorkflowDef.single(m, w.attributes), module_table(w, "m1")


def test_criterion_01_fig1_verdicts(acceptance_log):
    with criterion(acceptance_log, 1, "three-module example verdicts", 1.0) as notes:
        m, w, r = m1_standalone()
        verdicts = {}
        for visible in (("a1", "a3", "a5"), ("a1", "a2", "a3"), ("a3", "a4", "a5")):
            view = View.from_visible(w, visible)
            verdicts[visible] = (is_standalone_safe(m, r, view, 4), min(standalone_out_sizes(m, r, view).values()))
        assert verdicts[("a1", "a3", "a5")][0] is True
        assert verdicts[("a1", "a2", "a3")][0] is True
        assert verdicts[("a3", "a4", "a5")] == (False, 3)
        out = standalone_out_set(m, r, View.from_visible(w, ("a1", "a3", "a5")), ("0", "0"))
        assert out.outputs == {("0", "0", "1"), ("0", "1", "1"), ("1", "0", "0"), ("1", "1", "0")}
        notes.append("V={a3,a4,a5} unsafe with |Out|=3; Out(0,0) matches")


def test_criterion_02_world_counts(acceptance_log):
    with criterion(acceptance_log, 2, "possible-world counts", 5.0) as notes:
        m, w, r = m1_standalone()
        standalone_m1 = count_worlds(m, r, View.from_visible(w, ("a1", "a3", "a5")))
        assert standalone_m1 == 64

        k, gamma = 2, 2
        chain = gen_oneone_chain(k).workflow
        first = chain.modules[0]
        alone = WorkflowDef.single(first, chain.attributes)
        hidden = {first.outputs[0]}
        standalone = count_worlds(first, module_table(chain, first.name), View.from_hidden(alone, hidden))
        workflow = count_worlds(chain, execute_workflow(chain), View.from_hidden(chain, hidden))
        assert standalone == gamma ** (2 ** k) == 16
        assert workflow == math.factorial(gamma) ** (2 ** k // gamma) == 4
        notes.append(f"m1={standalone_m1}, chain standalone={standalone}, chain workflow={workflow}")


def random_module(rng: random.Random) -> tuple[ModuleDef, WorkflowDef, Relation]:
    size = rng.randint(2, 4)
    n_in = rng.randint(1, size - 1)
    names = [f"v{i}" for i in range(1, size + 1)]
    ins, outs = tuple(names[:n_in]), tuple(names[n_in:])
    table = [(x, tuple(rng.choice("01") for _ in outs)) for x in itertools.product("01", repeat=n_in)]
    m = ModuleDef("m", ins, outs, Behavior.of_table(table))
    w = WorkflowDef(tuple(AttributeDef(n) for n in names), (m,))
    rows = [x + y for x, y in table]
    if rng.random() < 0.5:
        rows = rng.sample(rows, rng.randint(1, len(rows)))
    return m, w, Relation(w.attributes, tuple(rows))


def test_criterion_03_standalone_oracle_equivalence(acceptance_log):
    with criterion(acceptance_log, 3, "standalone Out equals world enumeration", 120.0) as notes:
        rng = random.Random(20240603)
        modules = checks = 0
        for _ in range(220):
            m, w, r = random_module(rng)
            modules += 1
            for mask in range(1 << len(m.attributes)):
                hidden = {a for i, a in enumerate(m.attributes) if mask >> i & 1}
                view = View.from_hidden(w, hidden)
                by_worlds = standalone_out_set_by_worlds(m, r, view, Budget(cells=32))
                for x in r.distinct(m.inputs):
                    assert standalone_out_set(m, r, view, x).outputs == by_worlds[x], (m, hidden, x)
                    checks += 1
                if len(hidden) * len(r) <= 12:
                    assert by_worlds == oracles.brute_standalone_out(w, "m", r, hidden)
        assert modules >= 200
        notes.append(f"{modules} modules, {checks} (view, input) pairs")


def composed_instance(seed: int):
    """Random all-private workflow plus a union of standalone-safe hidden sets."""
    rng = random.Random(seed)
    inst = gen_random_instance(seed, n=rng.choice((1, 2, 3, 3)), max_inputs=2, max_outputs=2)
    w = inst.workflow
    r = execute_workflow(w)
    gamma, hidden = {}, set()
    for m in w.modules:
        gamma[m.name] = rng.randint(2, 2 ** len(m.outputs))
        options = enumerate_safe_hidden_sets(m, module_table(w, m.name), gamma[m.name])
        hidden |= rng.choice(options)
    return w, r, gamma, frozenset(hidden)


def test_criterion_04_union_of_standalone_sets_is_workflow_safe(acceptance_log):
    with criterion(acceptance_log, 4, "union of standalone-safe sets is workflow-safe", 300.0) as notes:
        tested = flips = worlds = 0
        seed = 0
        while tested < 100:
            seed += 1
            w, r, gamma, hidden = composed_instance(seed)
            if len(hidden) * len(r) > 24:
                continue
            tested += 1
            view = View.from_hidden(w, hidden)
            sets, examined = workflow_out_sets(w, r, view)
            worlds += examined
            for (name, x), out in sets.items():
                assert len(out) >= gamma[name], (seed, name, x, len(out))
            cert = is_workflow_safe(w, r, view, gamma, mode="compositional")
            assert cert["verdict"] == SAFE_BY_THEOREM
            for m in w.modules:
                table = module_table(w, m.name)
                local = view.restrict(m.attributes)
                for x in r.distinct(m.inputs):
                    for y in standalone_out_set(m, table, local, x).outputs:
                        flip = flip_world(w, r, view, m.name, x, y)
                        assert is_possible_world(w, r, view, flip.world)
                        assert world_in_enumeration(w, r, view, flip.world), (seed, m.name, x, y)
                        assert y in sets[(m.name, x)].outputs or not flip.realized
                        flips += 1
        notes.append(f"{tested} workflows, {flips} flip certificates, {worlds} worlds examined")


def test_criterion_05_example41_gap(acceptance_log):
    with criterion(acceptance_log, 5, "exact versus union-of-standalone gap", 30.0) as notes:
        eps = F(1, 4)
        for n in (2, 4, 8, 16):
            inst = gen_example41(n, eps)
            w, reqs, costs = inst.workflow, inst.requirements, inst.costs
            exact = solve_exact(w, reqs, costs)
            union = union_of_standalone(w, standalone_reports(inst), costs)
            assert exact.feasible and verify_solution(w, reqs, union, costs)[0]
            assert exact.cost == 2 + eps
            assert union.cost == n + 1
            assert union.cost / exact.cost == F(n + 1) / (2 + eps)
            if n == 8:
                assert (exact.cost, union.cost, union.cost / exact.cost) == (F(9, 4), 9, 4)
            notes.append(f"n={n} ratio {union.cost / exact.cost}")


def test_criterion_06_cardinality_rounding(acceptance_log):
    with criterion(acceptance_log, 6, "cardinality rounding feasibility and ratio", 300.0) as notes:
        worst, worst_at = F(0), None
        runs = 0
        for seed in range(100):
            n = 1 + seed % 12
            inst = gen_random_instance(1000 + seed, n=n, form=CARDINALITY, max_inputs=3, max_outputs=2)
            w, reqs, costs = inst.workflow, inst.requirements, inst.costs
            lp = solve_lp(build_cardinality_ip(w, reqs, costs)).objective
            opt = solve_exact(w, reqs, costs).cost
            bound = 16 * math.log(len(reqs.lists)) + 1
            for rng_seed in range(10):
                sol = solve_cardinality_rounding(w, reqs, costs, rng_seed)
                runs += 1
                assert sol.feasible and verify_solution(w, reqs, sol, costs)[0]
                assert sol.lp_objective == lp <= sol.cost
                ratio = sol.cost / opt
                assert float(ratio) <= bound
                if ratio > worst:
                    worst, worst_at = ratio, (seed, n)
        notes.append(f"{runs} runs, max ratio {float(worst):.3f} (instance {worst_at[0]}, n={worst_at[1]})")


def test_criterion_07_set_rounding_bound(acceptance_log):
    with criterion(acceptance_log, 7, "set rounding within ell_max of the relaxation", 180.0) as notes:
        single = 0
        by_ell = {1: 0, 2: 0, 3: 0}
        for seed in range(100):
            cap = 1 + seed % 3
            inst = gen_random_instance(2000 + seed, n=2 + seed % 9, form=SET, ell_max=cap)
            w, reqs, costs = inst.workflow, inst.requirements, inst.costs
            sol = solve_set_rounding(w, reqs, costs)
            lp = solve_lp(build_set_ip(w, reqs, costs)).objective
            assert sol.feasible and sol.lp_objective == lp
            assert sol.cost <= reqs.ell_max * lp
            by_ell[reqs.ell_max] += 1
            if reqs.ell_max == 1:
                single += 1
                assert sol.cost == solve_exact(w, reqs, costs).cost
        assert single > 0
        notes.append(f"instances by ell_max {by_ell}; {single} single-option instances match exact")


def test_criterion_08_greedy_bound(acceptance_log):
    with criterion(acceptance_log, 8, "greedy within gamma+1 of optimum", 180.0) as notes:
        worst = {1: F(0), 2: F(0), 3: F(0)}
        for seed in range(100):
            gamma = 1 + seed % 3
            form = CARDINALITY if seed % 2 else SET
            inst = gen_random_instance(3000 + seed, n=2 + seed % 9, gamma_bound=gamma, form=form)
            w, reqs, costs = inst.workflow, inst.requirements, inst.costs
            assert data_sharing_degree(w) <= gamma
            greedy = solve_greedy_bounded(w, reqs, costs)
            opt = solve_exact(w, reqs, costs).cost
            assert greedy.feasible
            assert greedy.cost <= (gamma + 1) * opt
            worst[gamma] = max(worst[gamma], greedy.cost / opt)
        notes.append("max ratio by gamma " + ", ".join(f"{g}: {float(v):.3f}" for g, v in worst.items()))


def test_criterion_09_public_module_semantics(acceptance_log):
    with criterion(acceptance_log, 9, "visible public modules break composition", 30.0) as notes:
        inst = gen_public_counterexample(3, 2)
        w = inst.workflow
        r = execute_workflow(w)
        hidden = public_hidden_inputs(inst)
        m = w.module("m")
        x = r.distinct(m.inputs)[0]

        exposed = View.from_hidden(w, hidden)
        cert = is_workflow_safe(w, r, exposed, inst.gamma)
        assert cert["verdict"] == UNSAFE and cert["per_module"][0]["min_out_size"] == 1
        assert len(workflow_out_set_exact(w, r, exposed, "m", x)) == 1
        # standalone the same hiding is enough
        assert is_standalone_safe(m, module_table(w, "m"), exposed.restrict(m.attributes), 2)

        privatized = View.from_hidden(w, hidden, hidden_public={"mc"})
        assert is_workflow_safe(w, r, privatized, inst.gamma)["verdict"] == SAFE

        sol = solve_general_set(w, inst.requirements, inst.costs)
        assert sol.feasible and verify_solution(w, inst.requirements, sol, inst.costs)[0]
        chosen = View.from_hidden(w, sol.hidden_attributes, sol.hidden_public_modules)
        assert is_workflow_safe(w, r, chosen, inst.gamma, mode="compositional")["verdict"] == SAFE_BY_THEOREM
        assert is_workflow_safe(w, r, chosen, inst.gamma)["verdict"] == SAFE

        # only input options left: the solver must pay to privatize mc
        inputs_only = Requirements(SET, {"m": tuple(o for o in inst.requirements.lists["m"] if o.inputs)})
        forced = solve_general_set(w, inputs_only, inst.costs)
        assert forced.feasible and forced.hidden_public_modules == ("mc",)
        forced_view = View.from_hidden(w, forced.hidden_attributes, forced.hidden_public_modules)
        assert is_workflow_safe(w, r, forced_view, inst.gamma, mode="compositional")["verdict"] == SAFE_BY_THEOREM
        assert is_workflow_safe(w, r, forced_view, inst.gamma)["verdict"] == SAFE
        notes.append(f"|Out|=1 with mc visible; general-set hides {list(sol.hidden_attributes)} at cost "
                     f"{sol.cost}, or {list(forced.hidden_attributes)} + mc at cost {forced.cost} from inputs only")


def cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "secureview.cli", *args], cwd=cwd, capture_output=True,
                          check=True)


def test_criterion_10_cli_determinism(acceptance_log, tmp_path):
    with criterion(acceptance_log, 10, "byte-identical CLI solutions", 10.0) as notes:
        cli("gen", "--family", "random_dag", "--params", "seed=7,n=8", "--out-dir", "card", cwd=tmp_path)
        cli("gen", "--family", "random_dag", "--params", "seed=7,n=8,form=set", "--out-dir", "set", cwd=tmp_path)
        runs = [("card", "card-round", "11"), ("card", "exact", None), ("card", "greedy", None),
                ("set", "set-round", None)]
        compared = 0
        for d, method, seed in runs:
            outputs = []
            for attempt in (1, 2):
                out = f"{d}-{method}-{attempt}.json"
                args = ["solve", "--method", method, "--workflow", f"{d}/workflow.json", "--reqs", f"{d}/reqs.json",
                        "--costs", f"{d}/costs.json", "--out", out]
                if seed is not None:
                    args += ["--seed", seed]
                cli(*args, cwd=tmp_path)
                outputs.append((tmp_path / out).read_bytes())
            assert outputs[0] == outputs[1], method
            compared += 1
        notes.append(f"{compared} solution files compared")
