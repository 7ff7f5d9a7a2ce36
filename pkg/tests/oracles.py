"""Slow, obviously-correct reference computations used to check the package.

Nothing here shares code paths with the search or LP machinery: worlds are
generated by trying every assignment of hidden cells, and hiding problems
are solved by scanning every subset of attributes.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def _fds_hold(w, names, rows):
    idx = {n: i for i, n in enumerate(names)}
    for m in w.modules:
        seen = {}
        for t in rows:
            k = tuple(t[idx[a]] for a in m.inputs)
            v = tuple(t[idx[a]] for a in m.outputs)
            if seen.setdefault(k, v) != v:
                return False
    return True


def brute_worlds(w, r, hidden, visible_public=()):
    """Every row-aligned world, as a set of sorted row tuples."""
    names = r.names
    idx = {n: i for i, n in enumerate(names)}
    cells = [(k, idx[a]) for k in range(len(r.rows)) for a in names if a in hidden]
    domains = [r.schema[i].domain for _, i in cells]
    worlds = set()
    for values in itertools.product(*domains):
        rows = [list(t) for t in r.rows]
        for (k, i), v in zip(cells, values):
            rows[k][i] = v
        rows = [tuple(t) for t in rows]
        if not _fds_hold(w, names, rows):
            continue
        ok = True
        for name in visible_public:
            m = w.module(name)
            fn = w.function(name)
            for t in rows:
                if fn[tuple(t[idx[a]] for a in m.inputs)] != tuple(t[idx[a]] for a in m.outputs):
                    ok = False
        if ok:
            worlds.add(tuple(sorted(rows)))
    return worlds


def brute_standalone_out(w, module, r, hidden):
    """Out(x) for each observed input: outputs paired with x in some world."""
    m = w.module(module)
    idx = {n: i for i, n in enumerate(r.names)}
    out = {tuple(t[idx[a]] for a in m.inputs): set() for t in r.rows}
    for world in brute_worlds(w, r, hidden):
        for t in world:
            x = tuple(t[idx[a]] for a in m.inputs)
            if x in out:
                out[x].add(tuple(t[idx[a]] for a in m.outputs))
    return out


def brute_workflow_out(w, r, hidden, module, x, visible_public=()):
    """Outputs y such that some world maps every occurrence of x to y.

    A world in which x never occurs admits every output.
    """
    m = w.module(module)
    idx = {n: i for i, n in enumerate(r.names)}
    everything = set(itertools.product(*(w.attribute(a).domain for a in m.outputs)))
    out = set()
    for world in brute_worlds(w, r, hidden, visible_public):
        ys = {tuple(t[idx[a]] for a in m.outputs) for t in world if tuple(t[idx[a]] for a in m.inputs) == x}
        if not ys:
            return everything
        out |= ys
    return out


def brute_safe_hidden_sets(w, module, r, gamma):
    """Minimal hidden sets whose brute-force Out sets all reach gamma."""
    m = w.module(module)
    safe = []
    for size in range(len(m.attributes) + 1):
        for combo in itertools.combinations(m.attributes, size):
            outs = brute_standalone_out(w, module, r, set(combo))
            if all(len(v) >= gamma for v in outs.values()):
                safe.append(frozenset(combo))
    return {s for s in safe if not any(o < s for o in safe)}


def brute_secure_view(w, reqs, costs):
    """Cheapest hidden set meeting every requirement list, by full scan.

    Public modules touching a hidden attribute are charged their
    privatization cost.  Returns (cost, hidden set) or None.
    """
    names = list(w.names)
    best = None
    for mask in range(1 << len(names)):
        hidden = {names[i] for i in range(len(names)) if mask >> i & 1}
        if not _meets(w, reqs, hidden):
            continue
        price = sum((Fraction(costs.attribute_costs[a]) for a in hidden), Fraction(0))
        for m in w.public_modules:
            if hidden & set(m.attributes):
                price += Fraction(costs.privatization_costs[m.name])
        if best is None or price < best[0]:
            best = (price, frozenset(hidden))
    return best


def _meets(w, reqs, hidden):
    for name, options in reqs.lists.items():
        m = w.module(name)
        ok = False
        for opt in options:
            if reqs.form == "cardinality":
                a, b = opt
                ok = len(hidden & set(m.inputs)) >= a and len(hidden & set(m.outputs)) >= b
            else:
                ok = set(opt.inputs) | set(opt.outputs) <= hidden
            if ok:
                break
        if not ok:
            return False
    return True
