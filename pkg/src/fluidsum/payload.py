"""Payloads: what a summary remembers about the vertices it summarizes.

Three kinds are supported: a vertex count (cardinality estimation), the
set of source graph names (data-source search) and the set of vertex ids
(entity retrieval).  A single vertex always suffices to extract its
contribution, so extraction and merging never touch the rest of the GDB.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import IntegrityError, NotFoundError
from .graph import GraphDatabase

COUNT = "count"
SOURCE_SET = "source_set"
VERTEX_SET = "vertex_set"
KINDS = (COUNT, SOURCE_SET, VERTEX_SET)

# command-line spellings
CLI_NAMES = {"count": COUNT, "sources": SOURCE_SET, "vertices": VERTEX_SET}


def payload_kind(name: str) -> str:
    if name in KINDS:
        return name
    try:
        return CLI_NAMES[name]
    except KeyError:
        raise ValueError(f"unknown payload kind {name!r}") from None


@dataclass(frozen=True)
class PayloadElement:
    kind: str
    count: int = 0
    items: frozenset = frozenset()  # sources or vertex ids, depending on kind

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown payload kind {self.kind!r}")
        if self.count < 0:
            raise IntegrityError("payload count cannot be negative")
        object.__setattr__(self, "items", frozenset(self.items))

    @property
    def sources(self) -> frozenset:
        return self.items if self.kind == SOURCE_SET else frozenset()

    @property
    def vertex_ids(self) -> frozenset:
        return self.items if self.kind == VERTEX_SET else frozenset()

    def to_json(self):
        if self.kind == COUNT:
            return {"kind": self.kind, "count": self.count}
        return {"kind": self.kind, "items": sorted(self.items)}

    @classmethod
    def from_json(cls, obj) -> PayloadElement:
        return cls(obj["kind"], obj.get("count", 0), frozenset(obj.get("items", ())))


def empty(kind: str) -> PayloadElement:
    return PayloadElement(kind)


def extract_payload(gdb: GraphDatabase, v, kind: str) -> PayloadElement:
    if v not in gdb:
        raise NotFoundError(f"unknown vertex {v!r}")
    if kind == COUNT:
        return PayloadElement(COUNT, 1)
    if kind == SOURCE_SET:
        return PayloadElement(SOURCE_SET, items=frozenset(gdb.memberships(v)))
    if kind == VERTEX_SET:
        return PayloadElement(VERTEX_SET, items=frozenset((v,)))
    raise ValueError(f"unknown payload kind {kind!r}")


def _same_kind(a, b):
    if a.kind != b.kind:
        raise ValueError(f"cannot combine {a.kind} and {b.kind} payloads")


def merge(a: PayloadElement, b: PayloadElement) -> PayloadElement:
    _same_kind(a, b)
    if a.kind == COUNT:
        return PayloadElement(COUNT, a.count + b.count)
    return PayloadElement(a.kind, items=a.items | b.items)


def unmerge(a: PayloadElement, b: PayloadElement) -> PayloadElement:
    """Remove ``b`` from ``a``.  For sets this is plain difference, which is
    only exact when no other contributor shares an item; the summary graph
    uses :class:`PayloadAccumulator` for exact bookkeeping."""
    _same_kind(a, b)
    if a.kind == COUNT:
        if b.count > a.count:
            raise IntegrityError(f"payload count underflow ({a.count} - {b.count})")
        return PayloadElement(COUNT, a.count - b.count)
    return PayloadElement(a.kind, items=a.items - b.items)


class PayloadAccumulator:
    """Mutable payload with per-item multiplicities.

    A source stays in the set while at least one linked vertex contributes
    it, which makes removal exact even when contributions overlap.
    """

    __slots__ = ("kind", "count", "items")

    def __init__(self, kind: str):
        self.kind = kind
        self.count = 0
        self.items = Counter()

    def add(self, pe: PayloadElement) -> None:
        if pe.kind != self.kind:
            raise ValueError(f"cannot combine {self.kind} and {pe.kind} payloads")
        self.count += pe.count
        self.items.update(pe.items)

    def remove(self, pe: PayloadElement) -> None:
        if pe.kind != self.kind:
            raise ValueError(f"cannot combine {self.kind} and {pe.kind} payloads")
        if pe.count > self.count:
            raise IntegrityError(f"payload count underflow ({self.count} - {pe.count})")
        for x in pe.items:
            if self.items[x] <= 0:
                raise IntegrityError(f"payload item {x!r} removed more often than added")
        self.count -= pe.count
        for x in pe.items:
            self.items[x] -= 1
            if not self.items[x]:
                del self.items[x]

    def value(self) -> PayloadElement:
        return PayloadElement(self.kind, self.count, frozenset(self.items))

    def is_empty(self) -> bool:
        return self.count == 0 and not self.items

    def copy(self) -> PayloadAccumulator:
        c = PayloadAccumulator(self.kind)
        c.count = self.count
        c.items = Counter(self.items)
        return c
