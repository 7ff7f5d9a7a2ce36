"""Instance generators and the approximation-ratio benchmark."""

from __future__ import annotations

import csv
import io
import itertools
import random
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .model import (
    PUBLIC,
    AttributeDef,
    Behavior,
    CostModel,
    ModuleDef,
    WorkflowDef,
    as_fraction,
    data_sharing_degree,
    module_table,
)
from .requirements import CARDINALITY, SET, Requirements, SetOption, normalize_cardinality
from .solvers import (
    CARD_ROUND,
    EXACT,
    GENERAL_SET,
    GREEDY,
    SET_ROUND,
    UNION,
    solve,
    union_of_standalone,
    verify_solution,
)
from .standalone import standalone_report, to_requirements

FAMILIES = ("example41", "fig1", "oneone_chain", "majority", "public_constant", "public_invertible",
            "random_dag", "setcover_shape")


@dataclass(frozen=True)
class Instance:
    name: str
    workflow: WorkflowDef
    requirements: Requirements | None
    costs: CostModel
    gamma: dict[str, int] = field(default_factory=dict)


def _bits(prefix: str, k: int, cost=1) -> list[AttributeDef]:
    return [AttributeDef(f"{prefix}{i}", cost=cost) for i in range(1, k + 1)]


def _names(attrs: Sequence[AttributeDef]) -> tuple[str, ...]:
    return tuple(a.name for a in attrs)


def gen_example41(n: int, eps=Fraction(1, 4)) -> Instance:
    """Chain a1 -> a2 fanning out to b_1..b_n, all joined by one XOR module.

    Hiding a2 plus one b_i costs 2+eps, while the union of each module's
    cheapest standalone choice hides a1 and every b_i, costing n+1.
    """
    eps = as_fraction(eps)
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    a1, a2 = AttributeDef("a1", cost=1), AttributeDef("a2", cost=1 + eps)
    bs = _bits("b", n)
    c = AttributeDef("c", cost=1)
    modules = [ModuleDef("m", ("a1",), ("a2",), Behavior.named("identity"))]
    modules += [ModuleDef(f"m{i}", ("a2",), (b.name,), Behavior.named("identity")) for i, b in enumerate(bs, 1)]
    modules.append(ModuleDef("mx", _names(bs), ("c",),
                             Behavior.named("gates", outputs={"c": " ^ ".join(_names(bs))})))
    w = WorkflowDef((a1, a2, *bs, c), tuple(modules))
    pair = normalize_cardinality([(1, 0), (0, 1)])
    lists = {m.name: pair for m in modules[:-1]}
    lists["mx"] = ((1, 0),)
    gamma = {m.name: 2 for m in modules}
    return Instance(f"example41-n{n}", w, Requirements(CARDINALITY, lists), CostModel.from_workflow(w), gamma)


def gen_fig1() -> Instance:
    """Three boolean modules over a1..a7; a4 feeds both downstream modules."""
    attrs = _bits("a", 7)
    m1 = ModuleDef("m1", ("a1", "a2"), ("a3", "a4", "a5"), Behavior.named(
        "gates", outputs={"a3": "a1 | a2", "a4": "~(a1 & a2)", "a5": "~(a1 ^ a2)"}))
    m2 = ModuleDef("m2", ("a3", "a4"), ("a6",), Behavior.named("gates", outputs={"a6": "a3 ^ a4"}))
    m3 = ModuleDef("m3", ("a4", "a5"), ("a7",), Behavior.named("gates", outputs={"a7": "~(a4 & a5)"}))
    w = WorkflowDef(tuple(attrs), (m1, m2, m3))
    return Instance("fig1", w, None, CostModel.from_workflow(w), {"m1": 4, "m2": 2, "m3": 2})


def gen_oneone_chain(k: int = 2) -> Instance:
    """Identity on k bits followed by bit reversal."""
    a, b, c = _bits("a", k), _bits("b", k), _bits("c", k)
    m1 = ModuleDef("m1", _names(a), _names(b), Behavior.named("identity"))
    m2 = ModuleDef("m2", _names(b), _names(c), Behavior.named("reverse"))
    w = WorkflowDef(tuple(a + b + c), (m1, m2))
    return Instance(f"oneone-k{k}", w, None, CostModel.from_workflow(w), {"m1": 2, "m2": 2})


def gen_majority(k: int) -> Instance:
    """Single module: output 1 iff at least k of its 2k inputs are 1."""
    xs = _bits("x", 2 * k)
    m = ModuleDef("maj", _names(xs), ("out",), Behavior.named("majority"))
    w = WorkflowDef(tuple(xs) + (AttributeDef("out"),), (m,))
    return Instance(f"majority-k{k}", w, None, CostModel.from_workflow(w), {"maj": 2})


def gen_oneone(k: int, seed: int | None = None) -> Instance:
    """Single k-bit one-one module: identity, or a seeded permutation."""
    xs, ys = _bits("x", k), _bits("y", k)
    behavior = Behavior.named("identity") if seed is None else Behavior.named("permutation", seed=seed)
    m = ModuleDef("m", _names(xs), _names(ys), behavior)
    w = WorkflowDef(tuple(xs + ys), (m,))
    return Instance(f"oneone1-k{k}", w, None, CostModel.from_workflow(w), {"m": 2**k})


def gen_public_counterexample(k: int, gamma: int, variant: str = "constant", pvt=2) -> Instance:
    """A public module next to a private one-one module m.

    ``constant``: a public constant module produces every input of m, so
    with the public module visible the hidden inputs of m are pinned down.
    ``invertible``: m feeds a public identity, which reveals hidden outputs
    of m when visible.  The requirement list of m comes from its standalone
    safe sets at ``gamma``.
    """
    h = gamma.bit_length() - 1
    if gamma < 1 or 1 << h != gamma or h > k:
        raise ValueError("gamma must be a power of two at most 2**k")
    a, y = _bits("a", k), _bits("y", k)
    m = ModuleDef("m", _names(a), _names(y), Behavior.named("identity"))
    if variant == "constant":
        c = _bits("c", k)
        pub = ModuleDef("mc", _names(c), _names(a), Behavior.named("constant", value=["0"] * k),
                        kind=PUBLIC, privatization_cost=pvt)
        w = WorkflowDef(tuple(c + a + y), (pub, m))
    elif variant == "invertible":
        z = _bits("z", k)
        pub = ModuleDef("mi", _names(y), _names(z), Behavior.named("identity"),
                        kind=PUBLIC, privatization_cost=pvt)
        w = WorkflowDef(tuple(a + y + z), (m, pub))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    costs = CostModel.from_workflow(w)
    report = standalone_report(m, module_table(w, "m"), costs, gamma)
    reqs = Requirements(SET, {"m": to_requirements(report, SET)})
    return Instance(f"public-{variant}-k{k}-g{gamma}", w, reqs, costs, {"m": gamma})


def public_hidden_inputs(inst: Instance) -> list[str]:
    """The log2(gamma) leading inputs of m, the hiding used in the examples."""
    h = inst.gamma["m"].bit_length() - 1
    return list(inst.workflow.module("m").inputs[:h])


def public_hidden_outputs(inst: Instance) -> list[str]:
    h = inst.gamma["m"].bit_length() - 1
    return list(inst.workflow.module("m").outputs[:h])


def _random_table(rng: random.Random, ins: Sequence[str], outs: Sequence[str]) -> Behavior:
    pairs = []
    for x in itertools.product("01", repeat=len(ins)):
        pairs.append((x, tuple(rng.choice("01") for _ in outs)))
    return Behavior.of_table(pairs)


def gen_random_instance(seed: int, n: int = 6, max_inputs: int = 2, max_outputs: int = 2,
                        gamma_bound: int = 2, ell_max: int = 2, form: str = CARDINALITY,
                        max_cost: int = 5) -> Instance:
    """Random all-private DAG with random truth tables and requirement lists.

    Each module reads up to ``max_inputs`` attributes, preferring existing
    ones while no attribute feeds more than ``gamma_bound`` modules.
    """
    if n < 1 or max_inputs < 1 or max_outputs < 1 or gamma_bound < 1 or ell_max < 1:
        raise ValueError("all size parameters must be positive")
    if form not in (SET, CARDINALITY):
        raise ValueError(f"unknown form {form!r}")
    rng = random.Random(seed)
    attrs: list[AttributeDef] = []
    uses: dict[str, int] = {}
    modules = []

    def fresh(prefix):
        name = f"{prefix}{len(attrs) + 1}"
        attrs.append(AttributeDef(name, cost=rng.randint(1, max_cost)))
        uses[name] = 0
        return name

    for i in range(1, n + 1):
        k_in = rng.randint(1, max_inputs)
        ins = []
        for _ in range(k_in):
            pool = [a for a in uses if uses[a] < gamma_bound and a not in ins]
            if pool and rng.random() < 0.7:
                ins.append(rng.choice(pool))
            else:
                ins.append(fresh("a"))
        for a in ins:
            uses[a] += 1
        outs = [fresh("a") for _ in range(rng.randint(1, max_outputs))]
        modules.append(ModuleDef(f"m{i}", tuple(ins), tuple(outs), _random_table(rng, ins, outs)))
    w = WorkflowDef(tuple(attrs), tuple(modules))

    lists = {}
    for m in modules:
        length = rng.randint(1, ell_max)
        if form == CARDINALITY:
            pairs = set()
            for _ in range(length * 4):
                if len(normalize_cardinality(pairs)) >= length:
                    break
                a, b = rng.randint(0, len(m.inputs)), rng.randint(0, len(m.outputs))
                if (a, b) != (0, 0):
                    pairs.add((a, b))
            if not pairs:
                pairs.add((1, 0))
            lists[m.name] = normalize_cardinality(pairs)[:length]
        else:
            options: list[frozenset[str]] = []
            for _ in range(length * 3):
                if len(options) == length:
                    break
                chosen = frozenset(a for a in m.attributes if rng.random() < 0.4) or frozenset(
                    [rng.choice(m.attributes)])
                if any(o <= chosen or chosen <= o for o in options):
                    continue
                options.append(chosen)
            lists[m.name] = tuple(
                SetOption(tuple(a for a in m.inputs if a in o), tuple(a for a in m.outputs if a in o))
                for o in options
            )
    reqs = Requirements(form, lists)
    return Instance(f"random-{form}-s{seed}", w, reqs, CostModel.from_workflow(w))


def gen_setcover_shape(seed: int, elements: int = 6, sets: int = 4, per_set: float = 0.5) -> Instance:
    """Each module is an element; it may hide any one of the shared attributes
    standing for the sets that contain it."""
    rng = random.Random(seed)
    set_attrs = [AttributeDef(f"s{j}", cost=rng.randint(1, 5)) for j in range(1, sets + 1)]
    members = []
    for _ in range(elements):
        chosen = [s.name for s in set_attrs if rng.random() < per_set] or [rng.choice(set_attrs).name]
        members.append(chosen)
    modules, outs = [], []
    for i, ins in enumerate(members, 1):
        out = AttributeDef(f"e{i}", cost=100)
        outs.append(out)
        modules.append(ModuleDef(f"m{i}", tuple(ins), (out.name,), _random_table(rng, ins, [out.name])))
    used = {a for ins in members for a in ins}
    w = WorkflowDef(tuple(s for s in set_attrs if s.name in used) + tuple(outs), tuple(modules))
    reqs = Requirements(SET, {m.name: tuple(SetOption((a,), ()) for a in m.inputs) for m in modules})
    return Instance(f"setcover-s{seed}", w, reqs, CostModel.from_workflow(w))


def generate(family: str, **params) -> Instance:
    gens: dict[str, Callable[..., Instance]] = {
        "example41": gen_example41,
        "fig1": gen_fig1,
        "oneone_chain": gen_oneone_chain,
        "majority": gen_majority,
        "public_constant": lambda **p: gen_public_counterexample(variant="constant", **p),
        "public_invertible": lambda **p: gen_public_counterexample(variant="invertible", **p),
        "random_dag": gen_random_instance,
        "setcover_shape": gen_setcover_shape,
    }
    if family not in gens:
        raise ValueError(f"unknown family {family!r}")
    return gens[family](**params)


def standalone_reports(inst: Instance, antichain: bool = False):
    """Standalone safety report for each private module at its gamma."""
    w = inst.workflow
    return {m.name: standalone_report(m, module_table(w, m.name), inst.costs, inst.gamma[m.name],
                                      antichain=antichain)
            for m in w.private_modules}


# -- comparison --------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    instance: str
    method: str
    seed: int | None
    cost: Fraction | None
    ratio: Fraction | None
    feasible: bool
    millis: float
    error: str = ""


def run_comparison(instances: Iterable[Instance], methods: Sequence[str], seeds: Sequence[int] = (0,),
                   budget=None) -> list[ReportRow]:
    """Run each method on each instance; ratios are against the exact optimum.

    Failures are recorded in the row and the run continues.
    """
    rows = []
    for inst in instances:
        w, reqs, costs = inst.workflow, inst.requirements, inst.costs
        try:
            opt = solve(EXACT, w, reqs, costs, budget=budget).cost
        except Exception as exc:  # recorded, not fatal
            opt = None
            opt_error = f"{type(exc).__name__}: {exc}"
        else:
            opt_error = ""
        for method in methods:
            runs = seeds if method == CARD_ROUND else (None,)
            for seed in runs:
                start = time.perf_counter()
                try:
                    if method == UNION:
                        sol = union_of_standalone(w, standalone_reports(inst), costs)
                        feasible = verify_solution(w, reqs, sol)[0] if reqs else sol.feasible
                    elif method == EXACT:
                        if opt is None:
                            raise RuntimeError(opt_error)
                        sol = solve(EXACT, w, reqs, costs, budget=budget)
                        feasible = sol.feasible
                    else:
                        sol = solve(method, w, reqs, costs, seed=seed, budget=budget)
                        feasible = sol.feasible
                except Exception as exc:  # recorded, not fatal
                    rows.append(ReportRow(inst.name, method, seed, None, None, False,
                                          (time.perf_counter() - start) * 1000, f"{type(exc).__name__}: {exc}"))
                    continue
                millis = (time.perf_counter() - start) * 1000
                ratio = None
                if opt is not None:
                    ratio = Fraction(1) if opt == 0 and sol.cost == 0 else (sol.cost / opt if opt else None)
                rows.append(ReportRow(inst.name, method, seed, sol.cost, ratio, feasible, millis))
    return rows


def report_csv(rows: Sequence[ReportRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["instance", "method", "seed", "cost_num", "cost_den", "ratio", "feasible", "millis", "error"])
    for r in rows:
        writer.writerow([
            r.instance, r.method, "" if r.seed is None else r.seed,
            "" if r.cost is None else r.cost.numerator, "" if r.cost is None else r.cost.denominator,
            "" if r.ratio is None else f"{float(r.ratio):.6f}", int(r.feasible), f"{r.millis:.1f}", r.error,
        ])
    return out.getvalue()


def summarize(rows: Sequence[ReportRow]) -> dict[str, dict]:
    """Per-method max and mean ratio, run count and infeasible count."""
    out: dict[str, dict] = {}
    for r in rows:
        s = out.setdefault(r.method, {"runs": 0, "failures": 0, "ratios": []})
        s["runs"] += 1
        if not r.feasible or r.error:
            s["failures"] += 1
        if r.ratio is not None:
            s["ratios"].append(r.ratio)
    for s in out.values():
        ratios = s.pop("ratios")
        s["max_ratio"] = max(ratios) if ratios else None
        s["mean_ratio"] = sum(ratios, Fraction(0)) / len(ratios) if ratios else None
    return out


def summary_text(rows: Sequence[ReportRow]) -> str:
    lines = []
    for method, s in summarize(rows).items():
        mx = "n/a" if s["max_ratio"] is None else f"{float(s['max_ratio']):.4f}"
        mean = "n/a" if s["mean_ratio"] is None else f"{float(s['mean_ratio']):.4f}"
        lines.append(f"{method:12s} runs={s['runs']:4d} failures={s['failures']:3d} max_ratio={mx} mean_ratio={mean}")
    return "\n".join(lines) + "\n"


def sharing_degree(inst: Instance) -> int:
    return data_sharing_degree(inst.workflow)


__all__ = [
    "FAMILIES", "Instance", "gen_example41", "gen_fig1", "gen_oneone_chain", "gen_majority", "gen_oneone",
    "gen_public_counterexample", "gen_random_instance", "gen_setcover_shape", "generate", "run_comparison",
    "report_csv", "summarize", "summary_text", "standalone_reports", "GREEDY", "SET_ROUND", "GENERAL_SET",
]
