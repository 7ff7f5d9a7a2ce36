"""Per-module requirement lists: which hidden sets keep a module private."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .model import WorkflowDef

SET = "set"
CARDINALITY = "cardinality"


@dataclass(frozen=True, order=True)
class SetOption:
    """Hide every listed input and every listed output."""

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def attributes(self) -> frozenset[str]:
        return frozenset(self.inputs) | frozenset(self.outputs)


def normalize_cardinality(pairs: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    """Drop dominated pairs; sort by increasing inputs, decreasing outputs."""
    pairs = {(int(a), int(b)) for a, b in pairs}
    keep = [p for p in pairs
            if not any(q != p and q[0] <= p[0] and q[1] <= p[1] for q in pairs)]
    return tuple(sorted(keep, key=lambda p: (p[0], -p[1])))


@dataclass(frozen=True)
class Requirements:
    """Requirement lists for the private modules of one workflow.

    ``lists`` maps a module name to a tuple of (inputs, outputs) count
    pairs in cardinality form, or a tuple of SetOption in set form.
    """

    form: str
    lists: Mapping[str, tuple]

    def __post_init__(self):
        if self.form not in (SET, CARDINALITY):
            raise ValueError(f"unknown requirement form {self.form!r}")
        object.__setattr__(self, "lists", {k: tuple(v) for k, v in self.lists.items()})

    @property
    def modules(self) -> tuple[str, ...]:
        return tuple(self.lists)

    def ell(self, module: str) -> int:
        return len(self.lists[module])

    @property
    def ell_max(self) -> int:
        return max((len(v) for v in self.lists.values()), default=0)

    def validate(self, w: WorkflowDef) -> None:
        """Raise ValueError unless the lists fit the workflow's modules."""
        for name, options in self.lists.items():
            m = w.module(name)
            if m.is_public:
                raise ValueError(f"requirements given for public module {name}")
            if not options:
                raise ValueError(f"empty requirement list for {name}")
            for opt in options:
                if self.form == CARDINALITY:
                    a, b = opt
                    if not (0 <= a <= len(m.inputs) and 0 <= b <= len(m.outputs)):
                        raise ValueError(f"requirement {opt} exceeds the arity of {name}")
                else:
                    if not set(opt.inputs) <= set(m.inputs) or not set(opt.outputs) <= set(m.outputs):
                        raise ValueError(f"option {opt} of {name} names foreign attributes")
            if self.form == CARDINALITY and tuple(options) != normalize_cardinality(options):
                raise ValueError(f"cardinality list of {name} is redundant or unsorted")
