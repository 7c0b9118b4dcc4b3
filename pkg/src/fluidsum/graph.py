"""Labeled property graph databases (GDBs) as immutable snapshots.

A GDB is a set of vertices, a set of directed edges, a multiset of named
graphs that share that vertex/edge space, and label/property maps on both
vertices and edges.  Evolution is modelled as a sequence of snapshots:
:func:`apply_changes` never mutates its input.

Vertex identifiers are plain strings interned with :func:`sys.intern`, so
dictionary lookups hash each id once and comparisons are mostly identity
checks.
"""

from __future__ import annotations

import sys
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import xxhash

from .errors import IntegrityError, NotFoundError

Edge = tuple  # (source, target)

OUT = "out"
IN = "in"
BOTH = "both"
DIRECTIONS = (OUT, IN, BOTH)

_EMPTY: frozenset = frozenset()


def _intern(v) -> str:
    if not isinstance(v, str):
        raise TypeError(f"vertex ids must be strings, got {type(v).__name__}")
    return sys.intern(v)


@dataclass(frozen=True)
class NamedGraph:
    """One member of the GDB's graph multiset; ``name`` is its source label."""

    name: str
    vertices: frozenset = _EMPTY
    edges: frozenset = _EMPTY

    def __post_init__(self):
        for x, y in self.edges:
            if x not in self.vertices or y not in self.vertices:
                raise IntegrityError(
                    f"graph {self.name!r} contains edge ({x!r}, {y!r}) without both endpoints"
                )


class GraphDatabase:
    """An immutable GDB snapshot.

    Args:
        vertices: vertex ids.
        edges: mapping ``(source, target) -> iterable of edge labels`` or an
            iterable of ``(source, target)`` pairs (unlabeled edges).
        vertex_labels: mapping ``vertex -> iterable of labels``.
        vertex_properties / edge_properties: mapping to iterables of
            ``(key, value)`` pairs.
        graphs: iterable of :class:`NamedGraph`; duplicates are kept.

    Raises:
        IntegrityError: an edge, label or property refers to a missing element.
    """

    __slots__ = (
        "_vertices", "_edges", "_vlabels", "_vprops", "_eprops", "_graphs",
        "_out", "_in", "_members", "_by_label", "_fingerprint",
    )

    def __init__(self, vertices=(), edges=None, vertex_labels=None,
                 vertex_properties=None, edge_properties=None, graphs=()):
        vs = frozenset(_intern(v) for v in vertices)
        if edges is None:
            edges = {}
        if not isinstance(edges, Mapping):
            edges = {e: () for e in edges}
        emap = {}
        for (x, y), labels in edges.items():
            x, y = _intern(x), _intern(y)
            if x not in vs or y not in vs:
                raise IntegrityError(f"dangling edge ({x!r}, {y!r})")
            emap[(x, y)] = frozenset(labels)
        vlabels = {}
        for v, labels in (vertex_labels or {}).items():
            if v not in vs:
                raise IntegrityError(f"label map refers to unknown vertex {v!r}")
            labels = frozenset(labels)
            if labels:
                vlabels[_intern(v)] = labels
        vprops = {}
        for v, props in (vertex_properties or {}).items():
            if v not in vs:
                raise IntegrityError(f"property map refers to unknown vertex {v!r}")
            props = frozenset(tuple(p) for p in props)
            if props:
                vprops[_intern(v)] = props
        eprops = {}
        for e, props in (edge_properties or {}).items():
            e = (e[0], e[1])
            if e not in emap:
                raise IntegrityError(f"property map refers to unknown edge {e!r}")
            props = frozenset(tuple(p) for p in props)
            if props:
                eprops[e] = props
        gs = []
        for g in graphs:
            if not g.vertices <= vs:
                raise IntegrityError(f"graph {g.name!r} has vertices outside the GDB")
            for e in g.edges:
                if e not in emap:
                    raise IntegrityError(f"graph {g.name!r} has edge {e!r} outside the GDB")
            gs.append(g)

        self._vertices = vs
        self._edges = emap
        self._vlabels = vlabels
        self._vprops = vprops
        self._eprops = eprops
        self._graphs = tuple(gs)
        self._fingerprint = None

        out = defaultdict(list)
        inc = defaultdict(list)
        for (x, y), labels in emap.items():
            out[x].append((y, labels))
            inc[y].append((x, labels))
        self._out = {v: tuple(sorted(a, key=lambda t: t[0])) for v, a in out.items()}
        self._in = {v: tuple(sorted(a, key=lambda t: t[0])) for v, a in inc.items()}
        members = defaultdict(list)
        for g in self._graphs:
            for v in g.vertices:
                members[v].append(g.name)
        self._members = {v: tuple(sorted(ns)) for v, ns in members.items()}
        self._by_label = None

    # ------------------------------------------------------------ accessors

    @property
    def vertices(self) -> frozenset:
        return self._vertices

    @property
    def edges(self):
        """A read-only view of the edge set."""
        return self._edges.keys()

    @property
    def graphs(self) -> tuple:
        return self._graphs

    def __contains__(self, v) -> bool:
        return v in self._vertices

    def __len__(self) -> int:
        return len(self._vertices)

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def has_edge(self, x, y) -> bool:
        return (x, y) in self._edges

    def vertex_labels(self, v) -> frozenset:
        self._check(v)
        return self._vlabels.get(v, _EMPTY)

    def edge_labels(self, x, y) -> frozenset:
        try:
            return self._edges[(x, y)]
        except KeyError:
            raise NotFoundError(f"unknown edge ({x!r}, {y!r})") from None

    def vertex_properties(self, v) -> frozenset:
        self._check(v)
        return self._vprops.get(v, _EMPTY)

    def edge_properties(self, x, y) -> frozenset:
        if (x, y) not in self._edges:
            raise NotFoundError(f"unknown edge ({x!r}, {y!r})")
        return self._eprops.get((x, y), _EMPTY)

    def out_edges(self, v) -> tuple:
        """``((target, labels), ...)`` sorted by target."""
        return self._out.get(v, ())

    def in_edges(self, v) -> tuple:
        return self._in.get(v, ())

    def memberships(self, v) -> tuple:
        """Names of all graphs containing ``v`` (one entry per multiset member)."""
        return self._members.get(v, ())

    def vertices_with_label(self, label) -> tuple:
        if self._by_label is None:
            idx = defaultdict(list)
            for v, labels in self._vlabels.items():
                for c in labels:
                    idx[c].append(v)
            self._by_label = {c: tuple(sorted(vs)) for c, vs in idx.items()}
        return self._by_label.get(label, ())

    def label_items(self):
        return self._vlabels.items()

    def edge_items(self):
        return self._edges.items()

    def vertex_property_items(self):
        return self._vprops.items()

    def edge_property_items(self):
        return self._eprops.items()

    def _check(self, v):
        if v not in self._vertices:
            raise NotFoundError(f"unknown vertex {v!r}")

    # ------------------------------------------------------------ identity

    def canonical_lines(self) -> Iterator[str]:
        """Deterministic textual dump; two GDBs are equal iff their dumps are."""
        for v in sorted(self._vertices):
            yield "V\t" + v + "\t" + "\x1f".join(sorted(self._vlabels.get(v, ()))) + "\t" + \
                "\x1f".join(sorted(f"{k}\x1e{val}" for k, val in self._vprops.get(v, ())))
        for (x, y) in sorted(self._edges):
            yield "E\t" + x + "\t" + y + "\t" + "\x1f".join(sorted(self._edges[(x, y)])) + "\t" + \
                "\x1f".join(sorted(f"{k}\x1e{val}" for k, val in self._eprops.get((x, y), ())))
        gl = []
        for g in self._graphs:
            gl.append("G\t" + g.name + "\t" + "\x1f".join(sorted(g.vertices)) + "\t" +
                      "\x1f".join(sorted(f"{x}\x1e{y}" for x, y in g.edges)))
        yield from sorted(gl)

    def fingerprint(self) -> str:
        if self._fingerprint is None:
            h = xxhash.xxh3_128()
            for line in self.canonical_lines():
                h.update(line.encode("utf-8"))
                h.update(b"\n")
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def __eq__(self, other):
        if not isinstance(other, GraphDatabase):
            return NotImplemented
        return self is other or list(self.canonical_lines()) == list(other.canonical_lines())

    def __hash__(self):
        return hash(self.fingerprint())

    def __repr__(self):
        return (f"GraphDatabase(|V|={len(self._vertices)}, |E|={len(self._edges)}, "
                f"graphs={len(self._graphs)})")


# ---------------------------------------------------------------- neighborhood


def neighbors(gdb: GraphDatabase, v, direction=BOTH) -> set:
    """Γ+(v), Γ−(v) or Γ(v) = Γ+(v) ∪ Γ−(v)."""
    gdb._check(v)
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    out = set()
    if direction in (OUT, BOTH):
        out.update(w for w, _ in gdb.out_edges(v))
    if direction in (IN, BOTH):
        out.update(u for u, _ in gdb.in_edges(v))
    return out


def degree(gdb: GraphDatabase, v, direction=BOTH) -> int:
    """Number of distinct edges incident to ``v`` in the given direction."""
    gdb._check(v)
    if direction == OUT:
        return len(gdb.out_edges(v))
    if direction == IN:
        return len(gdb.in_edges(v))
    if direction == BOTH:
        return _both_degree(gdb, v)
    raise ValueError(f"direction must be one of {DIRECTIONS}")


def _both_degree(gdb, v):
    # a self-loop is one edge even though it is both outgoing and incoming
    return len(gdb.out_edges(v)) + len(gdb.in_edges(v)) - gdb.has_edge(v, v)


def max_degree(gdb: GraphDatabase) -> int:
    """The ``d`` of the summary-size bound: max over vertices of degree(v, both)."""
    return max((_both_degree(gdb, v) for v in gdb.vertices), default=0)


# ---------------------------------------------------------------- evolution


@dataclass
class ChangeSet:
    """A batch of edits.  Additions are applied first, then removals, so the
    resulting vertex set is ``(V ∪ add_vertices) \\ remove_vertices``.

    Graph memberships are addressed by graph name; a name that matches
    several multiset members edits all of them, an unknown name in
    ``add_memberships`` creates a new graph.  Members are vertex ids or
    ``(source, target)`` edges.
    """

    add_vertices: set = field(default_factory=set)
    remove_vertices: set = field(default_factory=set)
    add_edges: dict = field(default_factory=dict)          # edge -> labels to add
    remove_edges: set = field(default_factory=set)
    add_vertex_labels: dict = field(default_factory=dict)
    remove_vertex_labels: dict = field(default_factory=dict)
    remove_edge_labels: dict = field(default_factory=dict)
    add_vertex_properties: dict = field(default_factory=dict)
    remove_vertex_properties: dict = field(default_factory=dict)
    add_edge_properties: dict = field(default_factory=dict)
    remove_edge_properties: dict = field(default_factory=dict)
    add_memberships: dict = field(default_factory=dict)    # graph name -> members
    remove_memberships: dict = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not any(getattr(self, f) for f in self.__dataclass_fields__)


def apply_changes(gdb: GraphDatabase, changes: ChangeSet) -> GraphDatabase:
    """Return a new snapshot with ``changes`` applied; ``gdb`` is untouched.

    Raises:
        IntegrityError: an added edge has an endpoint that is neither in the
            GDB nor added by this change set.
        NotFoundError: a removal names an element that does not exist.
    """
    if changes.is_empty():
        return gdb
    vertices = set(gdb.vertices)
    vertices.update(_intern(v) for v in changes.add_vertices)
    edges = {e: set(ls) for e, ls in gdb.edge_items()}
    vlabels = {v: set(ls) for v, ls in gdb.label_items()}
    vprops = {v: set(ps) for v, ps in gdb.vertex_property_items()}
    eprops = {e: set(ps) for e, ps in gdb.edge_property_items()}
    graphs = [[g.name, set(g.vertices), set(g.edges)] for g in gdb.graphs]

    for (x, y), labels in changes.add_edges.items():
        if x not in vertices or y not in vertices:
            raise IntegrityError(f"edge ({x!r}, {y!r}) references a missing vertex")
        edges.setdefault((_intern(x), _intern(y)), set()).update(labels)
    for v, labels in changes.add_vertex_labels.items():
        _need(v in vertices, v)
        vlabels.setdefault(v, set()).update(labels)
    for v, props in changes.add_vertex_properties.items():
        _need(v in vertices, v)
        vprops.setdefault(v, set()).update(tuple(p) for p in props)
    for e, props in changes.add_edge_properties.items():
        _need(e in edges, e)
        eprops.setdefault(e, set()).update(tuple(p) for p in props)
    for name, members in changes.add_memberships.items():
        targets = [g for g in graphs if g[0] == name]
        if not targets:
            targets = [[name, set(), set()]]
            graphs.extend(targets)
        for m in members:
            for g in targets:
                if isinstance(m, tuple):
                    _need(m in edges, m)
                    g[1].update(m)  # closure: endpoints join the graph
                    g[2].add(m)
                else:
                    _need(m in vertices, m)
                    g[1].add(m)

    for v, labels in changes.remove_vertex_labels.items():
        _need(v in vertices, v)
        cur = vlabels.get(v, set())
        for c in labels:
            _need(c in cur, (v, c))
        cur -= set(labels)
    for e, labels in changes.remove_edge_labels.items():
        _need(e in edges, e)
        for c in labels:
            _need(c in edges[e], (e, c))
        edges[e] -= set(labels)
    for v, props in changes.remove_vertex_properties.items():
        _need(v in vertices, v)
        vprops.get(v, set()).difference_update(tuple(p) for p in props)
    for e, props in changes.remove_edge_properties.items():
        _need(e in edges, e)
        eprops.get(e, set()).difference_update(tuple(p) for p in props)
    for name, members in changes.remove_memberships.items():
        targets = [g for g in graphs if g[0] == name]
        _need(targets, name)
        for m in members:
            for g in targets:
                if isinstance(m, tuple):
                    g[2].discard(m)
                else:
                    g[1].discard(m)
                    g[2] = {e for e in g[2] if m not in e}
    for e in changes.remove_edges:
        _need(e in edges, e)
        del edges[e]
        eprops.pop(e, None)
        for g in graphs:
            g[2].discard(e)
    for v in changes.remove_vertices:
        _need(v in vertices, v)
    if changes.remove_vertices:
        gone = set(changes.remove_vertices)
        vertices -= gone
        for e in [e for e in edges if e[0] in gone or e[1] in gone]:
            del edges[e]
            eprops.pop(e, None)
        for v in gone:
            vlabels.pop(v, None)
            vprops.pop(v, None)
        for g in graphs:
            g[1] -= gone
            g[2] = {e for e in g[2] if e[0] not in gone and e[1] not in gone}

    return GraphDatabase(
        vertices, edges, vlabels, vprops, eprops,
        [NamedGraph(n, frozenset(vs), frozenset(es)) for n, vs, es in graphs],
    )


def _need(ok, what):
    if not ok:
        raise NotFoundError(f"cannot remove or edit missing element {what!r}")


class GraphBuilder:
    """Mutable accumulator used by parsers and generators; ``build()`` freezes it."""

    def __init__(self):
        self.vertices = set()
        self.edges = {}
        self.vertex_labels = defaultdict(set)
        self.vertex_properties = defaultdict(set)
        self.edge_properties = defaultdict(set)
        self.graphs = {}

    def add_vertex(self, v, graph=None):
        v = _intern(v)
        self.vertices.add(v)
        if graph is not None:
            self._graph(graph)[0].add(v)
        return v

    def add_label(self, v, label, graph=None):
        v = self.add_vertex(v, graph)
        self.vertex_labels[v].add(label)

    def add_property(self, v, key, value, graph=None):
        v = self.add_vertex(v, graph)
        self.vertex_properties[v].add((key, value))

    def add_edge(self, x, y, label=None, graph=None):
        x = self.add_vertex(x, graph)
        y = self.add_vertex(y, graph)
        labels = self.edges.setdefault((x, y), set())
        if label is not None:
            labels.add(label)
        if graph is not None:
            self._graph(graph)[1].add((x, y))

    def _graph(self, name):
        g = self.graphs.get(name)
        if g is None:
            g = self.graphs[name] = (set(), set())
        return g

    def build(self) -> GraphDatabase:
        return GraphDatabase(
            self.vertices, self.edges, self.vertex_labels, self.vertex_properties,
            self.edge_properties,
            [NamedGraph(n, frozenset(vs), frozenset(es)) for n, (vs, es) in sorted(self.graphs.items())],
        )
