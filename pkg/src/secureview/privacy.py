"""Possible worlds, Out sets and privacy checks.

Worlds are kept row-aligned with the observed relation: every row keeps its
visible cells and only hidden cells are re-valued.  A candidate world must
satisfy every module dependency, and every public module left visible must
still compute its original function on every row.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

from .model import (
    Budget,
    BudgetExceeded,
    ModuleDef,
    Relation,
    Row,
    WorkflowDef,
    execute_workflow,
    module_table,
)

SAFE = "safe"
UNSAFE = "unsafe"
SAFE_BY_THEOREM = "safe-by-theorem"
NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class View:
    """Visible/hidden split of attributes plus visible/hidden public modules."""

    visible: frozenset[str]
    hidden: frozenset[str]
    visible_public: frozenset[str] = frozenset()
    hidden_public: frozenset[str] = frozenset()

    @classmethod
    def from_hidden(cls, w: WorkflowDef, hidden: Iterable[str], hidden_public: Iterable[str] = ()) -> View:
        hidden = frozenset(hidden)
        hidden_public = frozenset(hidden_public)
        unknown = hidden - set(w.names)
        if unknown:
            raise KeyError(f"unknown attributes {sorted(unknown)}")
        public = {m.name for m in w.public_modules}
        if hidden_public - public:
            raise KeyError(f"not public modules: {sorted(hidden_public - public)}")
        return cls(frozenset(w.names) - hidden, hidden, frozenset(public - hidden_public), hidden_public)

    @classmethod
    def from_visible(cls, w: WorkflowDef, visible: Iterable[str], hidden_public: Iterable[str] = ()) -> View:
        visible = set(visible)
        unknown = visible - set(w.names)
        if unknown:
            raise KeyError(f"unknown attributes {sorted(unknown)}")
        return cls.from_hidden(w, [n for n in w.names if n not in visible], hidden_public)

    def restrict(self, names: Iterable[str]) -> View:
        names = set(names)
        return View(frozenset(self.visible & names), frozenset(self.hidden & names),
                    self.visible_public, self.hidden_public)


@dataclass(frozen=True)
class OutSet:
    module: str
    input: Row
    outputs: frozenset[Row]

    def __len__(self) -> int:
        return len(self.outputs)


@dataclass(frozen=True)
class FlipPair:
    """Two tuples over the same attributes, swapped value-by-value by a flip."""

    attributes: tuple[str, ...]
    p: Row
    q: Row


def _gamma_for(gamma: int | Mapping[str, int], module: str) -> int:
    g = gamma if isinstance(gamma, int) else gamma[module]
    if g < 1:
        raise ValueError("gamma must be at least 1")
    return g


def _range(w: WorkflowDef | Relation, names: Sequence[str]) -> Iterator[Row]:
    doms = [(w.attribute(n).domain) for n in names]
    return itertools.product(*doms)


# -- standalone Out sets -----------------------------------------------------

def _standalone_groups(m: ModuleDef, r: Relation, view: View):
    vis_in = [a for a in m.inputs if a in view.visible]
    vis_out = [a for a in m.outputs if a in view.visible]
    in_idx, out_idx = r.indices(m.inputs), r.indices(m.outputs)
    vi, vo = r.indices(vis_in), r.indices(vis_out)
    groups: dict[Row, set[Row]] = {}
    inputs = set()
    for row in r.rows:
        inputs.add(tuple(row[i] for i in in_idx))
        groups.setdefault(tuple(row[i] for i in vi), set()).add(tuple(row[i] for i in vo))
    pos_in = [m.inputs.index(a) for a in vis_in]
    return inputs, groups, pos_in, out_idx


def standalone_out_set(m: ModuleDef, r: Relation, view: View, x: Sequence[str]) -> OutSet:
    """Outputs indistinguishable from m(x) for a standalone module.

    An output y qualifies when some observed input agreeing with x on the
    visible inputs produces an output agreeing with y on the visible outputs.
    Hidden outputs range over their whole domains.
    """
    x = tuple(str(v) for v in x)
    inputs, groups, pos_in, _ = _standalone_groups(m, r, view)
    if x not in inputs:
        raise ValueError(f"input {x} does not occur in the relation")
    seen = groups[tuple(x[p] for p in pos_in)]
    vis_pos = [i for i, a in enumerate(m.outputs) if a in view.visible]
    outputs = frozenset(
        y for y in _range(r, m.outputs) if tuple(y[p] for p in vis_pos) in seen
    )
    return OutSet(m.name, x, outputs)


def standalone_out_sizes(m: ModuleDef, r: Relation, view: View) -> dict[Row, int]:
    """|Out| for every observed input, without materializing the sets."""
    inputs, groups, pos_in, _ = _standalone_groups(m, r, view)
    completions = 1
    for a in m.outputs:
        if a in view.hidden:
            completions *= len(r.attribute(a).domain)
    return {x: len(groups[tuple(x[p] for p in pos_in)]) * completions for x in inputs}


def is_standalone_safe(m: ModuleDef, r: Relation, view: View, gamma: int) -> bool:
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    return all(s >= gamma for s in standalone_out_sizes(m, r, view).values())


# -- world search ------------------------------------------------------------

class _WorldSearch:
    """Depth-first search over row-aligned possible worlds.

    Rows are processed one at a time: hidden initial inputs are chosen
    freely, then each module in topological order either reuses the output
    already fixed for its input key, is forced by a visible public function,
    or branches over the completions of its hidden outputs.
    """

    def __init__(self, w: WorkflowDef, r: Relation, view: View, budget: Budget | None = None):
        self.w, self.r, self.view = w, r, view
        self.budget = budget or Budget()
        if set(r.names) != set(w.names):
            raise ValueError("relation must range over every workflow attribute")
        self.names = r.names
        cells = len(r.rows) * len(view.hidden)
        if cells > self.budget.cells:
            raise BudgetExceeded(f"{cells} hidden cells exceed the budget of {self.budget.cells}")
        if not r.satisfies_workflow_fds(w):
            raise ValueError("relation violates a module dependency")
        idx = {n: i for i, n in enumerate(self.names)}
        self.modules = [w.module(n) for n in w.order]
        self.in_idx = [tuple(idx[a] for a in m.inputs) for m in self.modules]
        self.out_idx = [tuple(idx[a] for a in m.outputs) for m in self.modules]
        self.fixed = [m.is_public and m.name in view.visible_public for m in self.modules]
        self.tables = [w.function(m.name) for m in self.modules]
        self.hidden_init = [idx[a] for a in w.initial_inputs if a in view.hidden]
        self.domains = [r.schema[i].domain for i in range(len(self.names))]
        self.nodes = 0
        # per module: hidden output positions and their domain product
        self.hidden_out = []
        for oi in self.out_idx:
            pos = [k for k, i in enumerate(oi) if self.names[i] in view.hidden]
            self.hidden_out.append((pos, list(itertools.product(*(self.domains[oi[k]] for k in pos)))))

    def _candidates(self, j: int, row: list[str]) -> Iterator[Row]:
        oi = self.out_idx[j]
        pos, combos = self.hidden_out[j]
        base = [row[i] for i in oi]
        for combo in combos:
            out = list(base)
            for k, v in zip(pos, combo):
                out[k] = v
            yield tuple(out)

    def worlds(self, pins: Mapping[tuple[int, int], str] | None = None,
               require: Mapping[int, tuple[Row, Row]] | None = None,
               forbid: Mapping[int, Row] | None = None) -> Iterator[tuple[Row, ...]]:
        """Yield row-aligned worlds, possibly constrained.

        ``pins`` fixes cells by (row, column).  ``require[j] = (x, y)`` forces
        module j to map x to y wherever x occurs; ``forbid[j] = x`` rejects
        worlds in which module j ever sees input x.
        """
        self.nodes = 0
        pins = pins or {}
        require = require or {}
        forbid = forbid or {}
        for (k, i), v in pins.items():
            if self.names[i] not in self.view.hidden and self.r.rows[k][i] != v:
                return
        rows = [list(t) for t in self.r.rows]
        fds: list[dict[Row, list]] = [dict() for _ in self.modules]
        steps = []
        for k in range(len(rows)):
            steps += [(k, "free", i) for i in self.hidden_init]
            steps += [(k, "module", j) for j in range(len(self.modules))]
        nodes_cap = self.budget.nodes
        hidden = self.view.hidden
        names = self.names

        def out_ok(k, j, key, out):
            oi = self.out_idx[j]
            for p, i in enumerate(oi):
                pin = pins.get((k, i))
                if pin is not None and pin != out[p]:
                    return False
            if self.fixed[j] and self.tables[j][key] != out:
                return False
            req = require.get(j)
            if req is not None and req[0] == key and req[1] != out:
                return False
            return True

        def rec(s):
            self.nodes += 1
            if self.nodes > nodes_cap:
                raise BudgetExceeded(f"world search exceeded {nodes_cap} nodes")
            if s == len(steps):
                yield tuple(tuple(t) for t in rows)
                return
            k, kind, arg = steps[s]
            row = rows[k]
            if kind == "free":
                pin = pins.get((k, arg))
                for v in (self.domains[arg] if pin is None else (pin,)):
                    row[arg] = v
                    yield from rec(s + 1)
                row[arg] = self.r.rows[k][arg]
                return
            j = arg
            key = tuple(row[i] for i in self.in_idx[j])
            if forbid.get(j) == key:
                return
            oi = self.out_idx[j]
            entry = fds[j].get(key)
            if entry is not None:
                options = (entry[0],)
            elif self.fixed[j]:
                options = (self.tables[j][key],)
            elif j in require and require[j][0] == key:
                options = (require[j][1],)
            else:
                options = self._candidates(j, row)
            original = [row[i] for i in oi]
            for out in options:
                if any(names[i] not in hidden and row[i] != out[p] for p, i in enumerate(oi)):
                    continue
                if not out_ok(k, j, key, out):
                    continue
                for p, i in enumerate(oi):
                    row[i] = out[p]
                if entry is None:
                    fds[j][key] = [out, 1]
                else:
                    entry[1] += 1
                yield from rec(s + 1)
                if entry is None:
                    del fds[j][key]
                else:
                    entry[1] -= 1
            for p, i in enumerate(oi):
                row[i] = original[p]

        yield from rec(0)

    def first(self, **constraints) -> tuple[Row, ...] | None:
        return next(self.worlds(**constraints), None)


def _canonical(world: tuple[Row, ...]) -> tuple[Row, ...]:
    return tuple(sorted(world))


def enumerate_worlds_exact(w: WorkflowDef, r: Relation, view: View,
                           budget: Budget | None = None) -> Iterator[Relation]:
    """Every possible world of ``r`` under ``view``, each exactly once.

    Worlds that differ only by row order are the same relation and are
    reported once.  Raises BudgetExceeded past the cell or world budget.
    """
    search = _WorldSearch(w, r, view, budget)
    seen: set[tuple[Row, ...]] = set()
    for world in search.worlds():
        key = _canonical(world)
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > search.budget.worlds:
            raise BudgetExceeded(f"more than {search.budget.worlds} worlds")
        yield Relation(r.schema, world)


def count_worlds(w: WorkflowDef | ModuleDef, r: Relation, view: View, budget: Budget | None = None) -> int:
    """Number of possible worlds; a bare module is treated as its own workflow."""
    if isinstance(w, ModuleDef):
        w = WorkflowDef.single(w, r.schema)
    return sum(1 for _ in enumerate_worlds_exact(w, r, view, budget))


def is_possible_world(w: WorkflowDef, r: Relation, view: View, candidate: Relation) -> bool:
    """Direct check of the world conditions, row-aligned with ``r``."""
    if candidate.names != r.names or len(candidate) != len(r):
        return False
    try:
        candidate.check_domains()
    except ValueError:
        return False
    vis = [i for i, n in enumerate(r.names) if n in view.visible]
    for a, b in zip(r.rows, candidate.rows):
        if any(a[i] != b[i] for i in vis):
            return False
    if not candidate.satisfies_workflow_fds(w):
        return False
    for m in w.public_modules:
        if m.name in view.visible_public:
            table = w.function(m.name)
            for row in candidate.rows:
                if table[candidate.values(row, m.inputs)] != candidate.values(row, m.outputs):
                    return False
    return True


def world_in_enumeration(w: WorkflowDef, r: Relation, view: View, candidate: Relation,
                         budget: Budget | None = None) -> bool:
    """True iff the enumerator produces ``candidate`` (every cell pinned)."""
    if candidate.names != r.names or len(candidate) != len(r):
        return False
    search = _WorldSearch(w, r, view, budget)
    pins = {(k, i): v for k, row in enumerate(candidate.rows) for i, v in enumerate(row)}
    return search.first(pins=pins) is not None


def standalone_out_set_by_worlds(m: ModuleDef, r: Relation, view: View,
                                 budget: Budget | None = None) -> dict[Row, frozenset[Row]]:
    """Standalone Out sets for every observed input, by searching worlds.

    An output y belongs to Out(x) iff some world of the one-module workflow
    contains a row (x, y).  Each candidate pair is tested by pinning a row
    whose visible cells are compatible and searching for any completion;
    every world found also records all the pairs it contains.
    """
    w = WorkflowDef.single(m, r.schema)
    r = Relation(tuple(r.attribute(a) for a in m.attributes),
                 tuple(r.values(t, m.attributes) for t in r.rows))
    search = _WorldSearch(w, r, view, budget)
    n_in = len(m.inputs)
    inputs = r.distinct(m.inputs)
    found: dict[Row, set[Row]] = {x: set() for x in inputs}

    def harvest(world):
        for t in world:
            x, y = t[:n_in], t[n_in:]
            if x in found:
                found[x].add(y)

    harvest(search.first())
    for x in inputs:
        for y in _range(r, m.outputs):
            if y in found[x]:
                continue
            target = x + y
            for k, row in enumerate(r.rows):
                if any(n in view.visible and row[i] != target[i] for i, n in enumerate(r.names)):
                    continue
                world = search.first(pins={(k, i): v for i, v in enumerate(target)})
                if world is not None:
                    harvest(world)
                    break
    return {x: frozenset(ys) for x, ys in found.items()}


# -- workflow Out sets -------------------------------------------------------

class _OutCollector:
    """Out sets of several (module, input) pairs, sharing every world found.

    A world supports output y for input x of module j when every row with
    input x maps it to y.  A world without any row carrying x supports every
    output in the range.
    """

    def __init__(self, search: _WorldSearch, targets: Sequence[tuple[int, Row]]):
        self.search = search
        self.targets = list(targets)
        self.out: dict[tuple[int, Row], set[Row]] = {t: set() for t in self.targets}
        self.full: set[tuple[int, Row]] = set()
        self.worlds = 0

    def range_size(self, j):
        size = 1
        for i in self.search.out_idx[j]:
            size *= len(self.search.domains[i])
        return size

    def harvest(self, world):
        self.worlds += 1
        s = self.search
        seen: dict[tuple[int, Row], Row] = {}
        for t in world:
            for j in range(len(s.modules)):
                key = tuple(t[i] for i in s.in_idx[j])
                if (j, key) in self.out:
                    seen[(j, key)] = tuple(t[i] for i in s.out_idx[j])
        for target in self.targets:
            if target in seen:
                self.out[target].add(seen[target])
            else:
                self.full.add(target)

    def size(self, target) -> int:
        if target in self.full:
            return self.range_size(target[0])
        return len(self.out[target])

    def outputs(self, target) -> frozenset[Row]:
        j = target[0]
        if target in self.full:
            return frozenset(_range(self.search.r, self.search.modules[j].outputs))
        return frozenset(self.out[target])

    def resolve(self, target, stop_at: int | None = None) -> None:
        """Decide membership of every output of ``target`` (or stop at a size)."""
        j, x = target
        s = self.search
        if target in self.full or (stop_at is not None and self.size(target) >= stop_at):
            return
        world = s.first(forbid={j: x})
        if world is not None:
            self.harvest(world)
            return
        for y in _range(s.r, s.modules[j].outputs):
            if stop_at is not None and self.size(target) >= stop_at:
                return
            if y in self.out[target]:
                continue
            world = s.first(require={j: (x, y)})
            if world is not None:
                self.harvest(world)


def _module_index(search: _WorldSearch, name: str) -> int:
    for j, m in enumerate(search.modules):
        if m.name == name:
            return j
    raise KeyError(f"unknown module {name!r}")


def workflow_out_set_exact(w: WorkflowDef, r: Relation, view: View, module_name: str,
                           x: Sequence[str], budget: Budget | None = None) -> OutSet:
    """Out set of ``module_name`` at input ``x`` over all possible worlds."""
    search = _WorldSearch(w, r, view, budget)
    x = tuple(str(v) for v in x)
    target = (_module_index(search, module_name), x)
    collector = _OutCollector(search, [target])
    collector.resolve(target)
    return OutSet(module_name, x, collector.outputs(target))


def workflow_out_sets(w: WorkflowDef, r: Relation, view: View, modules: Iterable[str] | None = None,
                      stop_at: int | Mapping[str, int] | None = None,
                      budget: Budget | None = None) -> tuple[dict[tuple[str, Row], OutSet], int]:
    """Out sets for every observed input of each requested module.

    With ``stop_at`` the search for a pair ends once that many outputs are
    witnessed, so the reported set is then only a lower bound.  Also returns
    the number of worlds examined.
    """
    search = _WorldSearch(w, r, view, budget)
    names = list(modules) if modules is not None else [m.name for m in w.private_modules]
    targets = []
    for name in names:
        j = _module_index(search, name)
        targets += [(j, x) for x in r.distinct(w.module(name).inputs)]
    collector = _OutCollector(search, targets)
    first = search.first()
    if first is not None:
        collector.harvest(first)
    for target in targets:
        name = search.modules[target[0]].name
        cap = None if stop_at is None else (stop_at if isinstance(stop_at, int) else stop_at[name])
        collector.resolve(target, cap)
    result = {(search.modules[j].name, x): OutSet(search.modules[j].name, x, collector.outputs((j, x)))
              for j, x in targets}
    return result, collector.worlds


# -- safety verdicts ---------------------------------------------------------

def is_workflow_safe(w: WorkflowDef, r: Relation, view: View, gamma: int | Mapping[str, int],
                     mode: str = "exact", budget: Budget | None = None) -> dict:
    """Safety certificate for every private module of the workflow.

    ``exact`` searches possible worlds and answers safe or unsafe.  The
    ``compositional`` mode only proves safety: each private module must be
    standalone-safe on the hidden attributes it touches, and every visible
    public module must have all its attributes visible.  Otherwise it
    answers not-applicable.
    """
    private = [m for m in w.private_modules]
    if mode == "exact":
        caps = {m.name: _gamma_for(gamma, m.name) for m in private}
        sets, worlds = workflow_out_sets(w, r, view, [m.name for m in private], caps, budget)
        per_module, verdict = [], SAFE
        for m in private:
            entries = [(len(o), x) for (name, x), o in sets.items() if name == m.name]
            size, x = min(entries)
            if size < caps[m.name]:
                verdict = UNSAFE
            per_module.append({"module": m.name, "min_out_size": size, "witness_input": list(x)})
        return {"verdict": verdict, "mode": mode, "per_module": per_module, "worlds_examined": worlds}
    if mode != "compositional":
        raise ValueError(f"unknown mode {mode!r}")

    per_module, verdict, reasons = [], SAFE_BY_THEOREM, []
    for m in w.public_modules:
        if m.name in view.visible_public and any(a in view.hidden for a in m.attributes):
            verdict = NOT_APPLICABLE
            reasons.append(f"visible public module {m.name} has hidden attributes")
    for m in private:
        table = module_table(w, m.name)
        sizes = standalone_out_sizes(m, table, view.restrict(m.attributes))
        x, size = min(sizes.items(), key=lambda kv: (kv[1], kv[0]))
        if size < _gamma_for(gamma, m.name):
            verdict = NOT_APPLICABLE
            reasons.append(f"hidden attributes of {m.name} are not standalone-safe")
        per_module.append({"module": m.name, "min_out_size": size, "witness_input": list(x)})
    cert = {"verdict": verdict, "mode": mode, "per_module": per_module, "worlds_examined": 0}
    if reasons:
        cert["reasons"] = reasons
    return cert


# -- flips -------------------------------------------------------------------

def flip_tuple(pair: FlipPair, x: Sequence[str], names: Sequence[str] | None = None) -> Row:
    """Swap p-values and q-values attribute by attribute.

    ``names`` labels the positions of ``x`` and defaults to the pair's own
    attributes; attributes outside the pair are left alone.
    """
    if names is None:
        names = pair.attributes
    where = {a: k for k, a in enumerate(pair.attributes)}
    out = []
    for a, v in zip(names, x):
        k = where.get(a)
        if k is not None:
            if v == pair.p[k]:
                v = pair.q[k]
            elif v == pair.q[k]:
                v = pair.p[k]
        out.append(v)
    return tuple(out)


@dataclass(frozen=True)
class FlipCertificate:
    world: Relation
    pair: FlipPair
    redefined_public: tuple[str, ...]
    realized: bool = field(default=True)


def flip_world(w: WorkflowDef, r: Relation, view: View, module_name: str,
               x: Sequence[str], y: Sequence[str]) -> FlipCertificate:
    """Build a world in which ``module_name`` maps x to y.

    Picks an input x' whose visible inputs match x and whose output m(x')
    matches y on the visible outputs, preferring inputs that occur in ``r``,
    then flips (x, y) with (x', m(x')) in every row.  The result is an
    execution of the workflow in which each module m_j is replaced by
    flip . m_j . flip, on flipped initial inputs.  Wherever the new world
    feeds x to the module it outputs y; ``realized`` tells whether it does
    so at all.
    """
    m = w.module(module_name)
    x = tuple(str(v) for v in x)
    y = tuple(str(v) for v in y)
    fn = w.function(module_name)
    vis = [k for k, a in enumerate(m.attributes) if a in view.visible]
    target = x + y
    observed = r.distinct(m.inputs)
    candidates = observed + [u for u in fn if u not in set(observed)]
    chosen = None
    for xp in candidates:
        q = xp + fn[xp]
        if all(q[k] == target[k] for k in vis):
            chosen = q
            break
    if chosen is None:
        raise ValueError(f"({x}, {y}) is not indistinguishable from any execution under this view")
    pair = FlipPair(m.attributes, target, chosen)

    redefined = []
    for other in w.modules:
        table = w.function(other.name)
        changed = any(
            flip_tuple(pair, table[flip_tuple(pair, u, other.inputs)], other.outputs) != v
            for u, v in table.items()
        )
        if changed and other.is_public:
            if other.name in view.visible_public:
                raise ValueError(f"flip redefines visible public module {other.name}")
            redefined.append(other.name)
    rows = tuple(flip_tuple(pair, t, r.names) for t in r.rows)
    world = Relation(r.schema, rows)
    realized = any(world.values(t, m.attributes) == target for t in rows)
    return FlipCertificate(world, pair, tuple(redefined), realized)


def standalone_view_of(w: WorkflowDef, module_name: str, view: View) -> tuple[ModuleDef, Relation, View]:
    """Module, its full function table and the view restricted to it."""
    m = w.module(module_name)
    return m, module_table(w, module_name), view.restrict(m.attributes)


def relation_of(w: WorkflowDef, r: Relation | None = None) -> Relation:
    return execute_workflow(w) if r is None else r
