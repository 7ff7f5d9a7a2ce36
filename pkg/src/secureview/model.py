"""Attributes, modules, workflows and their execution relations.

A module is a total function from the product of its input domains to the
product of its output domains.  A workflow is a DAG of modules whose edges
are implied by shared attribute names; executing it over a set of initial
inputs yields the provenance relation, one row per execution.

Domain values are opaque string tokens.  Booleans are ``"0"`` and ``"1"``.
"""

from __future__ import annotations

import ast
import itertools
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

PRIVATE = "private"
PUBLIC = "public"
BOOL = ("0", "1")

BUILTINS = ("identity", "reverse", "constant", "gates", "majority", "permutation")

Row = tuple[str, ...]


class WorkflowError(ValueError):
    """Raised when a workflow definition violates a structural invariant."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


def as_fraction(value: Any) -> Fraction:
    """Coerce ints, strings like ``"5/4"``, Fractions or ``{num, den}`` dicts."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not costs")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, Mapping):
        return Fraction(int(value["num"]), int(value["den"]))
    raise TypeError(f"cannot read {value!r} as a rational")


@dataclass(frozen=True)
class AttributeDef:
    name: str
    domain: tuple[str, ...] = BOOL
    cost: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))
        object.__setattr__(self, "cost", as_fraction(self.cost))
        if not self.domain:
            raise ValueError(f"attribute {self.name}: empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise ValueError(f"attribute {self.name}: duplicate domain values")
        if self.cost < 0:
            raise ValueError(f"attribute {self.name}: negative cost")


@dataclass(frozen=True)
class Behavior:
    """Either an explicit function table or a named builtin with parameters."""

    builtin: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    table: Mapping[Row, Row] | None = None

    @classmethod
    def of_table(cls, pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> Behavior:
        table: dict[Row, Row] = {}
        for x, y in pairs:
            key = tuple(str(v) for v in x)
            if key in table:
                raise ValueError(f"table lists input {key} twice")
            table[key] = tuple(str(v) for v in y)
        return cls(table=table)

    @classmethod
    def named(cls, name: str, **params) -> Behavior:
        return cls(builtin=name, params=params)


@dataclass(frozen=True)
class ModuleDef:
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    behavior: Behavior
    kind: str = PRIVATE
    privatization_cost: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.privatization_cost is not None:
            object.__setattr__(self, "privatization_cost", as_fraction(self.privatization_cost))
        if self.kind not in (PRIVATE, PUBLIC):
            raise ValueError(f"module {self.name}: kind must be private or public")

    @property
    def attributes(self) -> tuple[str, ...]:
        return self.inputs + self.outputs

    @property
    def is_public(self) -> bool:
        return self.kind == PUBLIC


@dataclass(frozen=True)
class Violation:
    kind: str
    names: tuple[str, ...]
    message: str


@dataclass(frozen=True)
class ValidationResult:
    order: tuple[str, ...] | None
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class WorkflowDef:
    attributes: tuple[AttributeDef, ...]
    modules: tuple[ModuleDef, ...]
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "modules", tuple(self.modules))

    @classmethod
    def single(cls, module: ModuleDef, attributes: Iterable[AttributeDef]) -> WorkflowDef:
        """One-module workflow over the module's own attributes."""
        by_name = {a.name: a for a in attributes}
        return cls(tuple(by_name[n] for n in module.attributes), (module,))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def attribute(self, name: str) -> AttributeDef:
        try:
            return self._attr_index()[name]
        except KeyError:
            raise KeyError(f"unknown attribute {name!r}") from None

    def _attr_index(self) -> dict[str, AttributeDef]:
        idx = self._cache.get("attrs")
        if idx is None:
            idx = self._cache["attrs"] = {a.name: a for a in self.attributes}
        return idx

    def module(self, name: str) -> ModuleDef:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(f"unknown module {name!r}")

    def domain(self, name: str) -> tuple[str, ...]:
        return self.attribute(name).domain

    @property
    def private_modules(self) -> tuple[ModuleDef, ...]:
        return tuple(m for m in self.modules if not m.is_public)

    @property
    def public_modules(self) -> tuple[ModuleDef, ...]:
        return tuple(m for m in self.modules if m.is_public)

    @property
    def initial_inputs(self) -> tuple[str, ...]:
        """I_0: attributes consumed by some module but produced by none."""
        produced = {a for m in self.modules for a in m.outputs}
        consumed = {a for m in self.modules for a in m.inputs}
        return tuple(n for n in self.names if n in consumed and n not in produced)

    @property
    def order(self) -> tuple[str, ...]:
        """Topological module order; raises WorkflowError if invalid."""
        result = self._cache.get("validation")
        if result is None:
            result = self._cache["validation"] = validate_workflow(self)
        if not result.ok:
            raise WorkflowError(result.violations)
        return result.order

    def function(self, name: str) -> dict[Row, Row]:
        """Full function table of a module, compiled lazily and memoized."""
        key = ("fn", name)
        table = self._cache.get(key)
        if table is None:
            table = self._cache[key] = compile_behavior(self.module(name), self.domain)
        return table

    def producer(self, attr: str) -> ModuleDef | None:
        for m in self.modules:
            if attr in m.outputs:
                return m
        return None

    def consumers(self, attr: str) -> tuple[ModuleDef, ...]:
        return tuple(m for m in self.modules if attr in m.inputs)


@dataclass(frozen=True)
class CostModel:
    attribute_costs: Mapping[str, Fraction]
    privatization_costs: Mapping[str, Fraction] = field(default_factory=dict)

    @classmethod
    def from_workflow(cls, w: WorkflowDef) -> CostModel:
        return cls(
            {a.name: a.cost for a in w.attributes},
            {m.name: m.privatization_cost or Fraction(0) for m in w.public_modules},
        )

    @classmethod
    def uniform(cls, w: WorkflowDef, value=1) -> CostModel:
        v = as_fraction(value)
        return cls({n: v for n in w.names}, {m.name: v for m in w.public_modules})

    def check(self, w: WorkflowDef) -> None:
        missing = [n for n in w.names if n not in self.attribute_costs]
        missing += [m.name for m in w.public_modules if m.name not in self.privatization_costs]
        if missing:
            raise ValueError(f"cost model misses {missing}")
        if any(c < 0 for c in self.attribute_costs.values()) or any(
            c < 0 for c in self.privatization_costs.values()
        ):
            raise ValueError("costs must be nonnegative")

    def attrs(self, names: Iterable[str]) -> Fraction:
        return sum((as_fraction(self.attribute_costs[n]) for n in names), Fraction(0))

    def modules(self, names: Iterable[str]) -> Fraction:
        return sum((as_fraction(self.privatization_costs[n]) for n in names), Fraction(0))

    def total(self, hidden: Iterable[str], hidden_modules: Iterable[str] = ()) -> Fraction:
        return self.attrs(hidden) + self.modules(hidden_modules)


@dataclass(frozen=True)
class Relation:
    """A finite table whose columns carry their attribute definitions."""

    schema: tuple[AttributeDef, ...]
    rows: tuple[Row, ...]

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", tuple(tuple(str(v) for v in r) for r in self.rows))
        width = len(self.schema)
        for r in self.rows:
            if len(r) != width:
                raise ValueError(f"row {r} has {len(r)} values, schema has {width}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown attribute {name!r}") from None

    def indices(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.index(n) for n in names)

    def attribute(self, name: str) -> AttributeDef:
        return self.schema[self.index(name)]

    def values(self, row: Row, names: Sequence[str]) -> Row:
        return tuple(row[i] for i in self.indices(names))

    def distinct(self, names: Sequence[str]) -> list[Row]:
        """Distinct projections onto ``names`` in first-occurrence order."""
        idx = self.indices(names)
        return list(dict.fromkeys(tuple(r[i] for i in idx) for r in self.rows))

    def rowset(self) -> frozenset[Row]:
        return frozenset(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def check_domains(self) -> None:
        for r in self.rows:
            for a, v in zip(self.schema, r):
                if v not in a.domain:
                    raise ValueError(f"value {v!r} outside the domain of {a.name}")

    def satisfies_fd(self, lhs: Sequence[str], rhs: Sequence[str]) -> bool:
        li, ri = self.indices(lhs), self.indices(rhs)
        seen: dict[Row, Row] = {}
        for r in self.rows:
            k, v = tuple(r[i] for i in li), tuple(r[i] for i in ri)
            if seen.setdefault(k, v) != v:
                return False
        return True

    def satisfies_workflow_fds(self, w: WorkflowDef) -> bool:
        return all(self.satisfies_fd(m.inputs, m.outputs) for m in w.modules)


def project(r: Relation, attrs: Iterable[str]) -> Relation:
    """Restrict columns to ``attrs``; rows keep input order and multiplicity."""
    wanted = set(attrs)
    unknown = wanted - set(r.names)
    if unknown:
        raise KeyError(f"unknown attributes {sorted(unknown)}")
    idx = [i for i, n in enumerate(r.names) if n in wanted]
    return Relation(tuple(r.schema[i] for i in idx), tuple(tuple(row[i] for i in idx) for row in r.rows))


# -- behaviors ---------------------------------------------------------------

_GATE_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Name, ast.Load, ast.Constant,
    ast.BitOr, ast.BitAnd, ast.BitXor, ast.Invert, ast.Not, ast.And, ast.Or,
)


def _parse_gate(expr: str, inputs: Sequence[str]) -> ast.Expression:
    tree = ast.parse(expr.replace("!", "~"), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _GATE_NODES):
            raise ValueError(f"unsupported construct in gate {expr!r}")
        if isinstance(node, ast.Name) and node.id not in inputs:
            raise ValueError(f"gate {expr!r} reads {node.id!r}, not an input")
        if isinstance(node, ast.Constant) and node.value not in (0, 1):
            raise ValueError(f"gate {expr!r}: only 0/1 constants")
    return tree


def _eval_gate(node: ast.AST, env: Mapping[str, int]) -> int:
    if isinstance(node, ast.Expression):
        return _eval_gate(node.body, env)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.Constant):
        return int(node.value)
    if isinstance(node, ast.UnaryOp):
        return 1 - _eval_gate(node.operand, env)
    if isinstance(node, ast.BoolOp):
        vals = [_eval_gate(v, env) for v in node.values]
        return int(all(vals)) if isinstance(node.op, ast.And) else int(any(vals))
    left, right = _eval_gate(node.left, env), _eval_gate(node.right, env)
    if isinstance(node.op, ast.BitOr):
        return left | right
    if isinstance(node.op, ast.BitAnd):
        return left & right
    return left ^ right


def compile_behavior(m: ModuleDef, domain) -> dict[Row, Row]:
    """Materialize a module's behavior as a table over the full input product.

    ``domain`` maps an attribute name to its ordered domain.
    """
    in_domains = [domain(a) for a in m.inputs]
    out_domains = [domain(a) for a in m.outputs]
    inputs = list(itertools.product(*in_domains))
    b = m.behavior

    if b.table is not None:
        table = {tuple(k): tuple(v) for k, v in b.table.items()}
        missing = [x for x in inputs if x not in table]
        extra = [x for x in table if x not in set(inputs)]
        if missing or extra:
            raise ValueError(f"module {m.name}: table is not total over its input domain")
        for y in table.values():
            if len(y) != len(m.outputs) or any(v not in d for v, d in zip(y, out_domains)):
                raise ValueError(f"module {m.name}: table output {y} outside the range")
        return table

    name, params = b.builtin, dict(b.params)
    if name == "identity" or name == "reverse":
        if len(m.inputs) != len(m.outputs):
            raise ValueError(f"module {m.name}: {name} needs as many outputs as inputs")
        targets = out_domains if name == "identity" else out_domains[::-1]
        if [tuple(d) for d in in_domains] != [tuple(d) for d in targets]:
            raise ValueError(f"module {m.name}: {name} needs matching domains")
        if name == "identity":
            return {x: x for x in inputs}
        return {x: x[::-1] for x in inputs}
    if name == "constant":
        value = tuple(str(v) for v in params.get("value", [d[0] for d in out_domains]))
        if len(value) != len(m.outputs) or any(v not in d for v, d in zip(value, out_domains)):
            raise ValueError(f"module {m.name}: constant value outside the range")
        return {x: value for x in inputs}
    if name == "gates":
        exprs = params["outputs"]
        if set(exprs) != set(m.outputs):
            raise ValueError(f"module {m.name}: gates must define every output")
        if any(tuple(d) != BOOL for d in in_domains + out_domains):
            raise ValueError(f"module {m.name}: gates need boolean attributes")
        trees = [_parse_gate(exprs[o], m.inputs) for o in m.outputs]
        table = {}
        for x in inputs:
            env = {a: int(v) for a, v in zip(m.inputs, x)}
            table[x] = tuple(str(_eval_gate(t, env)) for t in trees)
        return table
    if name == "majority":
        if len(m.outputs) != 1 or len(m.inputs) % 2 or not m.inputs:
            raise ValueError(f"module {m.name}: majority needs 2k inputs and one output")
        if any(tuple(d) != BOOL for d in in_domains + out_domains):
            raise ValueError(f"module {m.name}: majority needs boolean attributes")
        k = len(m.inputs) // 2
        return {x: ("1" if x.count("1") >= k else "0",) for x in inputs}
    if name == "permutation":
        outputs = list(itertools.product(*out_domains))
        if len(outputs) != len(inputs):
            raise ValueError(f"module {m.name}: permutation needs |domain| = |range|")
        random.Random(params.get("seed", 0)).shuffle(outputs)
        return dict(zip(inputs, outputs))
    raise ValueError(f"module {m.name}: unknown builtin {name!r}")


# -- validation and execution ------------------------------------------------

def validate_workflow(w: WorkflowDef) -> ValidationResult:
    """Check structural invariants and compute a topological module order.

    Ties in the order follow declaration order, so the result is deterministic.
    """
    problems: list[Violation] = []

    def bad(kind, names, message):
        problems.append(Violation(kind, tuple(names), message))

    declared = {}
    for a in w.attributes:
        if a.name in declared:
            bad("duplicate-attribute", [a.name], f"attribute {a.name} declared twice")
        declared[a.name] = a
    seen_modules = set()
    producers: dict[str, list[str]] = {}
    for m in w.modules:
        if m.name in seen_modules:
            bad("duplicate-module", [m.name], f"module {m.name} declared twice")
        seen_modules.add(m.name)
        for a in m.attributes:
            if a not in declared:
                bad("undefined-attribute", [m.name, a], f"module {m.name} uses undefined attribute {a}")
        overlap = set(m.inputs) & set(m.outputs)
        if overlap:
            bad("input-output-overlap", [m.name, *sorted(overlap)],
                f"module {m.name} has {sorted(overlap)} as both input and output")
        if len(set(m.inputs)) != len(m.inputs) or len(set(m.outputs)) != len(m.outputs):
            bad("repeated-attribute", [m.name], f"module {m.name} lists an attribute twice")
        if m.is_public and m.privatization_cost is None:
            bad("missing-privatization-cost", [m.name], f"public module {m.name} has no privatization cost")
        for a in m.outputs:
            producers.setdefault(a, []).append(m.name)
    for a, who in producers.items():
        if len(who) > 1:
            bad("duplicate-producer", [a, *who], f"duplicate producer {a}: {', '.join(who)}")
    used = {a for m in w.modules for a in m.attributes}
    for a in w.attributes:
        if a.name not in used:
            bad("unused-attribute", [a.name], f"attribute {a.name} is not used by any module")

    if not problems:
        for m in w.modules:
            try:
                compile_behavior(m, w.domain)
            except (ValueError, KeyError) as exc:
                bad("bad-behavior", [m.name], str(exc))

    order = _toposort(w)
    if order is None:
        stuck = [m.name for m in w.modules]
        bad("cycle", stuck, "data-flow graph has a cycle")
    return ValidationResult(None if problems else order, tuple(problems))


def _toposort(w: WorkflowDef) -> tuple[str, ...] | None:
    producer = {a: m.name for m in w.modules for a in m.outputs}
    deps = {m.name: {producer[a] for a in m.inputs if a in producer} for m in w.modules}
    order: list[str] = []
    done: set[str] = set()
    while len(order) < len(w.modules):
        ready = [m.name for m in w.modules if m.name not in done and deps[m.name] <= done]
        if not ready:
            return None
        order.append(ready[0])
        done.add(ready[0])
    return tuple(order)


def full_input_relation(w: WorkflowDef) -> Relation:
    """All combinations of initial input values, in domain order."""
    schema = tuple(w.attribute(a) for a in w.initial_inputs)
    return Relation(schema, tuple(itertools.product(*(a.domain for a in schema))))


def execute_workflow(w: WorkflowDef, initial_inputs: Relation | None = None) -> Relation:
    """Run every initial input row through the modules in topological order."""
    order = w.order
    if initial_inputs is None:
        initial_inputs = full_input_relation(w)
    i0 = w.initial_inputs
    if set(initial_inputs.names) != set(i0):
        raise ValueError(f"initial inputs must cover exactly {list(i0)}")
    initial_inputs.check_domains()
    if len(set(initial_inputs.rows)) != len(initial_inputs.rows):
        raise ValueError("initial input rows must be distinct")
    tables = {name: w.function(name) for name in order}
    modules = {name: w.module(name) for name in order}
    rows = []
    for src in initial_inputs.rows:
        env = dict(zip(initial_inputs.names, src))
        for name in order:
            m = modules[name]
            env.update(zip(m.outputs, tables[name][tuple(env[a] for a in m.inputs)]))
        rows.append(tuple(env[n] for n in w.names))
    return Relation(w.attributes, tuple(rows))


def module_table(w: WorkflowDef, name: str) -> Relation:
    """The standalone relation of a module: every input with its output."""
    m = w.module(name)
    schema = tuple(w.attribute(a) for a in m.attributes)
    return Relation(schema, tuple(x + y for x, y in w.function(name).items()))


def data_sharing_degree(w: WorkflowDef) -> int:
    """Largest number of modules reading any single attribute."""
    counts = [sum(a in m.inputs for m in w.modules) for a in w.names]
    return max(counts, default=0)


# -- budgets -----------------------------------------------------------------

class Infeasible(ValueError):
    """No hiding choice can meet the requested privacy or requirement."""


class BudgetExceeded(RuntimeError):
    """An enumeration or search ran past its configured budget."""


@dataclass(frozen=True)
class Budget:
    """Limits for world enumeration and integer programming.

    ``cells`` bounds rows times hidden columns, ``worlds`` the number of
    enumerated worlds, ``nodes`` the search or branch-and-bound nodes.
    """

    cells: int = 24
    worlds: int = 1 << 20
    nodes: int = 1 << 22

    @classmethod
    def parse(cls, text: str) -> Budget:
        """Read ``"32"`` (cells only) or ``"cells=32,nodes=1000,worlds=5"``."""
        text = text.strip()
        if text.isdigit():
            return cls(cells=int(text))
        fields = {}
        for part in text.split(","):
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or key not in ("cells", "worlds", "nodes") or not value.strip().isdigit():
                raise ValueError(f"bad budget component {part!r}")
            fields[key] = int(value)
        return cls(**fields)
