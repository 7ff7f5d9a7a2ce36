"""Command-line front end.

JSON goes to stdout, diagnostics to stderr.  Exit status: 0 success,
1 unsafe/infeasible/not-applicable verdict, 2 usage or input error,
3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import formats
from .harness import generate, report_csv, run_comparison, summary_text
from .model import Budget, BudgetExceeded, CostModel, Infeasible, WorkflowDef, module_table, validate_workflow
from .model import execute_workflow, full_input_relation
from .privacy import (
    NOT_APPLICABLE,
    SAFE,
    SAFE_BY_THEOREM,
    UNSAFE,
    enumerate_worlds_exact,
    is_workflow_safe,
    standalone_out_sizes,
)
from .requirements import CARDINALITY, SET, Requirements
from .solvers import METHODS, solve, verify_solution
from .standalone import enumerate_safe_hidden_sets, min_cost_safe_subset, standalone_report, to_requirements

OK, VERDICT, USAGE, BUDGET = 0, 1, 2, 3
BUDGET_ENV = "SECUREVIEW_BUDGET"


class UsageError(Exception):
    pass


def _load(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _workflow(path: str) -> WorkflowDef:
    w = formats.workflow_from_json(_load(path))
    result = validate_workflow(w)
    if not result.ok:
        raise UsageError("invalid workflow: " + "; ".join(v.message for v in result.violations))
    return w


def _costs(args, w: WorkflowDef) -> CostModel:
    cost = formats.costs_from_json(_load(args.costs)) if getattr(args, "costs", None) else CostModel.from_workflow(w)
    cost.check(w)
    return cost


def _budget(args) -> Budget:
    text = getattr(args, "budget", None) or os.environ.get(BUDGET_ENV)
    return Budget.parse(text) if text else Budget()


def _emit(obj) -> None:
    sys.stdout.write(formats.dumps(obj))


def _relation(args, w):
    if getattr(args, "relation", None):
        return formats.relation_from_json(_load(args.relation), w)
    return execute_workflow(w)


# -- subcommands -------------------------------------------------------------

def cmd_validate(args) -> int:
    w = formats.workflow_from_json(_load(args.workflow))
    result = validate_workflow(w)
    _emit({
        "valid": result.ok,
        "order": list(result.order) if result.order else None,
        "violations": [{"kind": v.kind, "names": list(v.names), "message": v.message} for v in result.violations],
    })
    return OK if result.ok else VERDICT


def cmd_execute(args) -> int:
    w = _workflow(args.workflow)
    inputs = formats.relation_from_json(_load(args.inputs), w) if args.inputs else full_input_relation(w)
    _emit(formats.relation_to_json(execute_workflow(w, inputs)))
    return OK


def cmd_check_safe(args) -> int:
    w = _workflow(args.workflow)
    view = formats.view_from_json(_load(args.view), w)
    gamma = formats.gamma_from_text(args.gamma)
    if args.module:
        m = w.module(args.module)
        g = gamma if isinstance(gamma, int) else gamma[m.name]
        sizes = standalone_out_sizes(m, module_table(w, m.name), view.restrict(m.attributes))
        x, size = min(sizes.items(), key=lambda kv: (kv[1], kv[0]))
        cert = {"verdict": SAFE if size >= g else UNSAFE, "mode": "standalone",
                "per_module": [{"module": m.name, "min_out_size": size, "witness_input": list(x)}],
                "worlds_examined": 0}
    else:
        cert = is_workflow_safe(w, _relation(args, w), view, gamma, args.mode, _budget(args))
    _emit(cert)
    return OK if cert["verdict"] in (SAFE, SAFE_BY_THEOREM) else VERDICT


def cmd_standalone(args) -> int:
    w = _workflow(args.workflow)
    m = w.module(args.module)
    cost = _costs(args, w)
    table = module_table(w, m.name)
    view, price = min_cost_safe_subset(m, table, cost, int(args.gamma))
    out = {"module": m.name, "gamma": int(args.gamma),
           "hidden": [a for a in m.attributes if a in view.hidden], "cost": formats.rational_to_json(price)}
    if args.all:
        out["safe_hidden_sets"] = [[a for a in m.attributes if a in s]
                                   for s in enumerate_safe_hidden_sets(m, table, int(args.gamma))]
    _emit(out)
    return OK


def cmd_requirements(args) -> int:
    w = _workflow(args.workflow)
    gamma = formats.gamma_from_text(args.gamma)
    cost = _costs(args, w)
    names = args.module or [m.name for m in w.private_modules]
    lists = {}
    for name in names:
        m = w.module(name)
        g = gamma if isinstance(gamma, int) else gamma[name]
        report = standalone_report(m, module_table(w, name), cost, g)
        lists[name] = to_requirements(report, args.form, strict=args.strict)
    _emit(formats.requirements_to_json(Requirements(args.form, lists)))
    return OK


def cmd_solve(args) -> int:
    w = _workflow(args.workflow)
    reqs = formats.requirements_from_json(_load(args.reqs))
    reqs.validate(w)
    sol = solve(args.method, w, reqs, _costs(args, w), seed=args.seed, budget=_budget(args))
    text = formats.dumps(formats.solution_to_json(sol))
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return OK if sol.feasible else VERDICT


def cmd_verify(args) -> int:
    w = _workflow(args.workflow)
    reqs = formats.requirements_from_json(_load(args.reqs))
    reqs.validate(w)
    sol = formats.solution_from_json(_load(args.solution))
    cost = _costs(args, w) if args.costs else None
    ok, satisfied = verify_solution(w, reqs, sol, cost)
    _emit({"feasible": ok, "satisfied_option": satisfied})
    return OK if ok else VERDICT


def cmd_worlds(args) -> int:
    w = _workflow(args.workflow)
    view = formats.view_from_json(_load(args.view), w)
    worlds = enumerate_worlds_exact(w, _relation(args, w), view, _budget(args))
    if args.list:
        _emit({"worlds": [formats.relation_to_json(r) for r in worlds]})
    else:
        _emit({"count": sum(1 for _ in worlds)})
    return OK


def _params(text: str | None) -> dict:
    if not text:
        return {}
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--params: {exc}") from None
    out = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"--params: expected key=value, got {part!r}")
        value = value.strip()
        out[key.strip()] = int(value) if value.lstrip("-").isdigit() else value
    return out


def _bundle(family: str, params: dict) -> dict:
    inst = generate(family, **params)
    bundle = {"name": inst.name, "workflow": formats.workflow_to_json(inst.workflow),
              "costs": formats.costs_to_json(inst.costs), "gamma": dict(inst.gamma)}
    if inst.requirements is not None:
        bundle["requirements"] = formats.requirements_to_json(inst.requirements)
    return bundle


def cmd_gen(args) -> int:
    try:
        bundle = _bundle(args.family, _params(args.params))
    except TypeError as exc:
        raise UsageError(f"bad parameters for {args.family}: {exc}") from None
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "workflow.json").write_text(formats.dumps(bundle["workflow"]))
        (out / "costs.json").write_text(formats.dumps(bundle["costs"]))
        if "requirements" in bundle:
            (out / "reqs.json").write_text(formats.dumps(bundle["requirements"]))
    _emit(bundle)
    return OK


def cmd_bench(args) -> int:
    suite = _load(args.suite)
    if not isinstance(suite, dict) or "instances" not in suite:
        raise UsageError("suite: expected an object with an 'instances' list")
    instances = [generate(spec["family"], **spec.get("params", {})) for spec in suite["instances"]]
    methods = suite.get("methods", list(METHODS))
    seeds = suite.get("seeds", [0])
    rows = run_comparison(instances, methods, seeds, _budget(args))
    text = report_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(summary_text(rows))
    return OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secureview", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a workflow definition")
    p.add_argument("--workflow", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("execute", help="run a workflow over its initial inputs")
    p.add_argument("--workflow", required=True)
    p.add_argument("--inputs", help="relation over the initial inputs (default: all combinations)")
    p.set_defaults(func=cmd_execute)

    p = sub.add_parser("check-safe", help="privacy verdict for a view")
    p.add_argument("--workflow", required=True)
    p.add_argument("--view", required=True)
    p.add_argument("--gamma", required=True, help="G, or per module: m1=4,m2=2")
    p.add_argument("--mode", choices=("exact", "compositional"), default="exact")
    p.add_argument("--module", help="check one module standalone on its full function table")
    p.add_argument("--relation", help="observed executions (default: all)")
    p.add_argument("--budget")
    p.set_defaults(func=cmd_check_safe)

    p = sub.add_parser("standalone", help="cheapest safe hidden set of one module")
    p.add_argument("--workflow", required=True)
    p.add_argument("--module", required=True)
    p.add_argument("--gamma", required=True, type=int)
    p.add_argument("--costs")
    p.add_argument("--all", action="store_true", help="also list every minimal safe hidden set")
    p.set_defaults(func=cmd_standalone)

    p = sub.add_parser("requirements", help="requirement lists from standalone analysis")
    p.add_argument("--workflow", required=True)
    p.add_argument("--gamma", required=True)
    p.add_argument("--form", choices=(SET, CARDINALITY), default=SET)
    p.add_argument("--module", action="append")
    p.add_argument("--costs")
    p.add_argument("--strict", action="store_true", help="refuse counts that lose safe sets")
    p.set_defaults(func=cmd_requirements)

    p = sub.add_parser("solve", help="choose attributes to hide")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--workflow", required=True)
    p.add_argument("--reqs", required=True)
    p.add_argument("--costs")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="also write the solution to this file")
    p.add_argument("--budget")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a solution against requirements")
    p.add_argument("--solution", required=True)
    p.add_argument("--workflow", required=True)
    p.add_argument("--reqs", required=True)
    p.add_argument("--costs")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("worlds", help="count or list possible worlds")
    p.add_argument("--workflow", required=True)
    p.add_argument("--view", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--count", action="store_true")
    group.add_argument("--list", action="store_true")
    p.add_argument("--relation")
    p.add_argument("--budget", help="cells, or cells=..,worlds=..,nodes=..")
    p.set_defaults(func=cmd_worlds)

    p = sub.add_parser("gen", help="generate an instance family")
    p.add_argument("--family", required=True)
    p.add_argument("--params", help="k=v,k=v or a JSON object")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="compare methods over a suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--csv")
    p.add_argument("--budget")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return BUDGET
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        _emit({"verdict": "infeasible", "reason": str(exc)})
        return VERDICT
    except (UsageError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
