"""JSON encodings of workflows, views, requirements, costs, solutions and
relations.  Rationals are written as ``{"num": n, "den": d}``."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from fractions import Fraction
from typing import Any

from .model import (
    PRIVATE,
    AttributeDef,
    Behavior,
    CostModel,
    ModuleDef,
    Relation,
    WorkflowDef,
    as_fraction,
)
from .privacy import View
from .requirements import CARDINALITY, SET, Requirements, SetOption
from .solvers import Solution


class FormatError(ValueError):
    """A document does not match the expected structure."""


def _keys(obj: Any, where: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object")
    required, optional = set(required), set(optional)
    unknown = set(obj) - required - optional
    if unknown:
        raise FormatError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise FormatError(f"{where}: missing keys {sorted(missing)}")
    return obj


def _strings(obj: Any, where: str) -> list[str]:
    if not isinstance(obj, list) or not all(isinstance(v, str) for v in obj):
        raise FormatError(f"{where}: expected a list of strings")
    return list(obj)


def rational_to_json(x) -> dict[str, int]:
    x = as_fraction(x)
    return {"num": x.numerator, "den": x.denominator}


def rational_from_json(obj: Any, where: str = "rational") -> Fraction:
    if isinstance(obj, dict):
        _keys(obj, where, ("num", "den"))
        if not isinstance(obj["num"], int) or not isinstance(obj["den"], int) or obj["den"] == 0:
            raise FormatError(f"{where}: num and den must be integers, den nonzero")
        return Fraction(obj["num"], obj["den"])
    if isinstance(obj, int) and not isinstance(obj, bool):
        return Fraction(obj)
    if isinstance(obj, str):
        try:
            return Fraction(obj)
        except ValueError:
            pass
    raise FormatError(f"{where}: expected a rational")


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- workflow ----------------------------------------------------------------

def workflow_to_json(w: WorkflowDef) -> dict:
    attrs = [{"name": a.name, "domain": list(a.domain), "cost": rational_to_json(a.cost)} for a in w.attributes]
    modules = []
    for m in w.modules:
        b = m.behavior
        if b.table is not None:
            behavior = {"table": [[list(x), list(y)] for x, y in b.table.items()]}
        else:
            behavior = {"builtin": b.builtin, "params": dict(b.params)}
        entry = {"name": m.name, "kind": m.kind, "inputs": list(m.inputs), "outputs": list(m.outputs),
                 "behavior": behavior}
        if m.privatization_cost is not None:
            entry["privatization_cost"] = rational_to_json(m.privatization_cost)
        modules.append(entry)
    return {"attributes": attrs, "modules": modules}


def workflow_from_json(obj: Any) -> WorkflowDef:
    _keys(obj, "workflow", ("attributes", "modules"))
    attrs = []
    for k, a in enumerate(obj["attributes"]):
        where = f"attributes[{k}]"
        _keys(a, where, ("name",), ("domain", "cost"))
        try:
            attrs.append(AttributeDef(a["name"], tuple(_strings(a.get("domain", ["0", "1"]), where)),
                                      rational_from_json(a.get("cost", 1), where + ".cost")))
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{where}: {exc}") from None
    modules = []
    for k, m in enumerate(obj["modules"]):
        where = f"modules[{k}]"
        _keys(m, where, ("name", "inputs", "outputs", "behavior"), ("kind", "privatization_cost"))
        b = m["behavior"]
        if isinstance(b, dict) and "table" in b:
            _keys(b, where + ".behavior", ("table",))
            try:
                behavior = Behavior.of_table((tuple(x), tuple(y)) for x, y in b["table"])
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{where}.behavior: {exc}") from None
        else:
            _keys(b, where + ".behavior", ("builtin",), ("params",))
            behavior = Behavior.named(b["builtin"], **b.get("params", {}))
        pvt = m.get("privatization_cost")
        try:
            modules.append(ModuleDef(
                m["name"], tuple(_strings(m["inputs"], where)), tuple(_strings(m["outputs"], where)), behavior,
                m.get("kind", PRIVATE), None if pvt is None else rational_from_json(pvt, where),
            ))
        except ValueError as exc:
            raise FormatError(f"{where}: {exc}") from None
    return WorkflowDef(tuple(attrs), tuple(modules))


# -- views, costs ------------------------------------------------------------

def view_to_json(view: View) -> dict:
    return {"hidden": sorted(view.hidden), "hidden_public": sorted(view.hidden_public)}


def view_from_json(obj: Any, w: WorkflowDef) -> View:
    _keys(obj, "view", ("hidden",), ("hidden_public",))
    try:
        return View.from_hidden(w, _strings(obj["hidden"], "view.hidden"),
                                _strings(obj.get("hidden_public", []), "view.hidden_public"))
    except KeyError as exc:
        raise FormatError(f"view: {exc.args[0]}") from None


def costs_to_json(cost: CostModel) -> dict:
    return {"attributes": {a: rational_to_json(c) for a, c in cost.attribute_costs.items()},
            "privatization": {m: rational_to_json(c) for m, c in cost.privatization_costs.items()}}


def costs_from_json(obj: Any) -> CostModel:
    _keys(obj, "costs", ("attributes",), ("privatization",))
    attrs = {a: rational_from_json(c, f"costs.attributes.{a}") for a, c in obj["attributes"].items()}
    pvt = {m: rational_from_json(c, f"costs.privatization.{m}") for m, c in obj.get("privatization", {}).items()}
    return CostModel(attrs, pvt)


# -- requirements ------------------------------------------------------------

def requirements_to_json(reqs: Requirements) -> list:
    out = []
    for name, options in reqs.lists.items():
        if reqs.form == CARDINALITY:
            out.append({"module": name, "cardinality": [list(p) for p in options]})
        else:
            out.append({"module": name, "sets": [{"inputs": list(o.inputs), "outputs": list(o.outputs)}
                                                 for o in options]})
    return out


def requirements_from_json(obj: Any) -> Requirements:
    if not isinstance(obj, list):
        raise FormatError("requirements: expected a list")
    forms, lists = set(), {}
    for k, entry in enumerate(obj):
        where = f"requirements[{k}]"
        if isinstance(entry, dict) and entry.get("module") in lists:
            raise FormatError(f"{where}: module {entry['module']} listed twice")
        if isinstance(entry, dict) and "cardinality" in entry:
            _keys(entry, where, ("module", "cardinality"))
            forms.add(CARDINALITY)
            try:
                lists[entry["module"]] = tuple((int(a), int(b)) for a, b in entry["cardinality"])
            except (TypeError, ValueError):
                raise FormatError(f"{where}: cardinality pairs must be [inputs, outputs]") from None
        else:
            _keys(entry, where, ("module", "sets"))
            forms.add(SET)
            options = []
            for j, o in enumerate(entry["sets"]):
                _keys(o, f"{where}.sets[{j}]", (), ("inputs", "outputs"))
                options.append(SetOption(tuple(_strings(o.get("inputs", []), where)),
                                         tuple(_strings(o.get("outputs", []), where))))
            lists[entry["module"]] = tuple(options)
    if len(forms) > 1:
        raise FormatError("requirements mix set and cardinality forms")
    return Requirements(forms.pop() if forms else SET, lists)


# -- solutions, relations ----------------------------------------------------

def solution_to_json(sol: Solution) -> dict:
    out: dict[str, Any] = {"method": sol.method}
    if sol.seed is not None:
        out["seed"] = sol.seed
    out.update({
        "hidden_attributes": list(sol.hidden_attributes),
        "hidden_modules": list(sol.hidden_public_modules),
        "cost": rational_to_json(sol.cost),
        "feasible": sol.feasible,
        "satisfied_option": dict(sol.satisfied_option),
    })
    return out


def solution_from_json(obj: Any) -> Solution:
    _keys(obj, "solution", ("method", "hidden_attributes", "hidden_modules", "cost", "feasible"),
          ("seed", "satisfied_option"))
    return Solution(
        tuple(_strings(obj["hidden_attributes"], "solution.hidden_attributes")),
        tuple(_strings(obj["hidden_modules"], "solution.hidden_modules")),
        rational_from_json(obj["cost"], "solution.cost"),
        obj["method"],
        bool(obj["feasible"]),
        obj.get("seed"),
        {k: int(v) for k, v in obj.get("satisfied_option", {}).items()},
    )


def relation_to_json(r: Relation) -> dict:
    return {"attributes": list(r.names), "rows": [list(t) for t in r.rows]}


def relation_from_json(obj: Any, w: WorkflowDef) -> Relation:
    _keys(obj, "relation", ("attributes", "rows"))
    names = _strings(obj["attributes"], "relation.attributes")
    try:
        schema = tuple(w.attribute(n) for n in names)
        rel = Relation(schema, tuple(tuple(str(v) for v in row) for row in obj["rows"]))
        rel.check_domains()
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"relation: {exc}") from None
    return rel


def gamma_from_text(text: str) -> int | dict[str, int]:
    """``"4"`` or ``"m1=4,m2=2"``."""
    text = text.strip()
    if text.isdigit():
        return int(text)
    out = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep or not value.strip().isdigit():
            raise FormatError(f"bad gamma component {part!r}")
        out[name.strip()] = int(value)
    return out


def gamma_to_json(gamma: Mapping[str, int]) -> dict:
    return dict(gamma)
