"""Schema elements, parameterizations and canonical vertex summaries.

Summaries are computed over the *RDF view* of a GDB: every (edge, label)
pair is one labeled edge, an edge without labels is a single edge with the
empty label ``""``, and every vertex label ``C`` of ``v`` is an outgoing
``rdf:type`` edge from ``v`` to a type node ``C``.  Under that view the
simple elements are exactly their complex encodings::

    OC  == CSE(T, T, id)     set of (direction, neighbor)
    PC  == CSE(T, id, T)     set of (direction, edge label)
    POC == CSE(T, id, id)    set of (direction, edge label, neighbor)

and the usual parameterizations are plain edge filters: the type cluster
``OC_type`` is OC restricted to ``rdf:type`` edges, ``PC_rel`` is PC with
``rdf:type`` excluded.

A :class:`VertexSummary` is a tree whose nodes carry a sorted local schema
and a sorted tuple of ``(edge class, child)`` pairs.  Each node hashes its
own bytes plus its children's digests, so equal trees have equal digests
and digest comparison replaces tree comparison in the find phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import xxhash

from .graph import DIRECTIONS, IN, OUT, GraphBuilder, GraphDatabase, NamedGraph
from .errors import NotFoundError

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

TOP = "T"
ID = "ID"
OC = "OC"
PC = "PC"
POC = "POC"
CSE = "CSE"
SIMPLE_KINDS = (TOP, ID, OC, PC, POC)

HASH_SEED = 0x464C554944  # fixed so digests are stable across runs and hosts

SummaryHash = bytes  # 16-byte digest


def _fs(x):
    return None if x is None else frozenset(x)


@dataclass(frozen=True)
class Params:
    """Parameterizations attached to one schema element.

    ``label_filter`` keeps only edges whose label is listed, ``label_exclude``
    drops the listed labels (``PC_rel`` needs "everything but rdf:type").
    ``set_filter`` drops vertex labels and edge labels not in the set.
    """

    chaining_k: int = 1
    label_filter: frozenset | None = None
    label_exclude: frozenset = frozenset()
    set_filter: frozenset | None = None
    direction: str = OUT
    instance_merge_labels: frozenset | None = None

    def __post_init__(self):
        if self.chaining_k < 1:
            raise ValueError("chaining_k must be >= 1")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        for name in ("label_filter", "set_filter", "instance_merge_labels"):
            val = getattr(self, name)
            if val is not None:
                val = frozenset(val)
                if not val:
                    raise ValueError(f"{name} must be non-empty when given")
                object.__setattr__(self, name, val)
        object.__setattr__(self, "label_exclude", frozenset(self.label_exclude))

    def admits(self, label) -> bool:
        if self.label_filter is not None and label not in self.label_filter:
            return False
        if label in self.label_exclude:
            return False
        return True


DEFAULT_PARAMS = Params()


@dataclass(frozen=True)
class SchemaElement:
    kind: str
    params: Params = DEFAULT_PARAMS
    subject: SchemaElement | None = None
    predicate: SchemaElement | None = None
    object: SchemaElement | None = None

    def __post_init__(self):
        if self.kind == CSE:
            if self.subject is None or self.predicate is None or self.object is None:
                raise ValueError("a CSE needs subject, predicate and object elements")
            if self.predicate.kind not in (TOP, ID):
                raise ValueError("only T or id may appear in predicate position")
        elif self.kind in SIMPLE_KINDS:
            if self.subject or self.predicate or self.object:
                raise ValueError(f"{self.kind} is a simple element and takes no sub-elements")
            if self.params.chaining_k != 1:
                raise ValueError("chaining applies to complex schema elements only")
        else:
            raise ValueError(f"unknown schema element kind {self.kind!r}")

    @property
    def depth(self) -> int:
        """Nesting depth of the object position after chaining expansion."""
        if self.kind != CSE:
            return 0
        return self.params.chaining_k + self.object.depth

    def __str__(self):
        if self.kind == CSE:
            k = f"_{self.params.chaining_k}" if self.params.chaining_k > 1 else ""
            return f"CSE{k}({self.subject}, {self.predicate}, {self.object})"
        return self.kind


def _p(**kw) -> Params:
    return Params(**kw) if kw else DEFAULT_PARAMS


def top() -> SchemaElement:
    return SchemaElement(TOP)


def identity(**params) -> SchemaElement:
    return SchemaElement(ID, _p(**params))


def object_cluster(**params) -> SchemaElement:
    return SchemaElement(OC, _p(**params))


def predicate_cluster(**params) -> SchemaElement:
    return SchemaElement(PC, _p(**params))


def predicate_object_cluster(**params) -> SchemaElement:
    return SchemaElement(POC, _p(**params))


def cse(subject, predicate, obj, **params) -> SchemaElement:
    return SchemaElement(CSE, _p(**params), subject, predicate, obj)


def type_cluster() -> SchemaElement:
    """OC_type: vertices with equal label sets."""
    return object_cluster(label_filter={RDF_TYPE})


def model_class_collection() -> SchemaElement:
    return type_cluster()


def model_attribute_collection() -> SchemaElement:
    """PC_rel: vertices with equal sets of outgoing edge labels."""
    return predicate_cluster(label_exclude={RDF_TYPE})


def model_schemex(chaining_k: int = 1) -> SchemaElement:
    return cse(type_cluster(), identity(label_exclude={RDF_TYPE}), type_cluster(),
               chaining_k=chaining_k)


MODELS = {
    "schemex": model_schemex,
    "attrcoll": model_attribute_collection,
    "classcoll": model_class_collection,
}


def model_by_name(name: str) -> SchemaElement:
    try:
        return MODELS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(MODELS)}") from None


# ---------------------------------------------------------------- config format

_PARAM_KEYS = ("chaining_k", "label_filter", "label_exclude", "set_filter", "direction",
               "instance_merge_labels")
_KIND_NAMES = {"t": TOP, "top": TOP, "id": ID, "identity": ID, "oc": OC, "pc": PC,
               "poc": POC, "cse": CSE}


def element_from_config(cfg) -> SchemaElement:
    """Build an element from a name (``"schemex"``) or a nested dict such as
    ``{"kind": "cse", "subject": {"kind": "oc", "label_filter": [...]}, ...}``."""
    if isinstance(cfg, str):
        if cfg.lower() in MODELS:
            return model_by_name(cfg)
        cfg = {"kind": cfg}
    if "model" in cfg:
        base = model_by_name(cfg["model"])
        overrides = {k: cfg[k] for k in _PARAM_KEYS if k in cfg}
        return replace(base, params=replace(base.params, **overrides)) if overrides else base
    unknown = set(cfg) - set(_PARAM_KEYS) - {"kind", "subject", "predicate", "object"}
    if unknown:
        raise ValueError(f"unknown keys in schema element config: {sorted(unknown)}")
    try:
        kind = _KIND_NAMES[str(cfg["kind"]).lower()]
    except KeyError:
        raise ValueError(f"unknown schema element kind {cfg.get('kind')!r}") from None
    params = Params(**{k: cfg[k] for k in _PARAM_KEYS if k in cfg})
    if kind == CSE:
        return SchemaElement(CSE, params, element_from_config(cfg["subject"]),
                             element_from_config(cfg["predicate"]),
                             element_from_config(cfg["object"]))
    return SchemaElement(kind, params)


def element_to_config(elem: SchemaElement) -> dict:
    out = {"kind": elem.kind.lower() if elem.kind != TOP else "t"}
    p = elem.params
    for k in _PARAM_KEYS:
        val = getattr(p, k)
        if val == getattr(DEFAULT_PARAMS, k):
            continue
        out[k] = sorted(val) if isinstance(val, frozenset) else val
    if elem.kind == CSE:
        out["subject"] = element_to_config(elem.subject)
        out["predicate"] = element_to_config(elem.predicate)
        out["object"] = element_to_config(elem.object)
    return out


# ---------------------------------------------------------------- normalization


def expand_chaining(elem: SchemaElement) -> SchemaElement:
    """Rewrite CSE_k as (s, p, CSE_{k-1}) down to k = 1."""
    if elem.kind != CSE:
        return elem
    s, p, o = expand_chaining(elem.subject), elem.predicate, expand_chaining(elem.object)
    k = elem.params.chaining_k
    flat = replace(elem.params, chaining_k=1)
    node = SchemaElement(CSE, flat, s, p, o)
    for _ in range(k - 1):
        node = SchemaElement(CSE, flat, s, p, node)
    return node


_SIMPLE_ENCODINGS = {(TOP, TOP, ID): OC, (TOP, ID, TOP): PC, (TOP, ID, ID): POC}


def normalize(elem: SchemaElement) -> SchemaElement:
    """Expand chaining and replace unparameterized (T,T,id), (T,id,T) and
    (T,id,id) triples by the equivalent simple element (faster, same classes)."""
    elem = expand_chaining(elem)
    return _rewrite(elem)


def _rewrite(elem):
    if elem.kind != CSE:
        return elem
    s, p, o = _rewrite(elem.subject), elem.predicate, _rewrite(elem.object)
    key = (s.kind, p.kind, o.kind)
    if key in _SIMPLE_ENCODINGS and all(x.params == DEFAULT_PARAMS for x in (s, p, o)):
        return SchemaElement(_SIMPLE_ENCODINGS[key], replace(elem.params, chaining_k=1))
    return SchemaElement(CSE, elem.params, s, p, o)


# ---------------------------------------------------------------- summaries


class VertexSummary:
    """One canonical summary tree node.

    ``local`` is a sorted tuple of string tuples (the node's own schema),
    ``children`` a tuple of ``(edge_class, child)`` pairs sorted by edge
    class and child digest.  Several pairs may point to the same child
    (parallel edges).
    """

    __slots__ = ("kind", "local", "children", "digest", "_size", "_edges")

    def __init__(self, kind: str, local: tuple = (), children: tuple = ()):
        self.kind = kind
        self.local = local
        self.children = children
        self.digest = xxhash.xxh3_128_digest(self.node_bytes(), seed=HASH_SEED)
        self._size = None
        self._edges = None

    def node_bytes(self) -> bytes:
        return json.dumps(
            [self.kind, self.local, [[beta, c.digest.hex()] for beta, c in self.children]],
            separators=(",", ":"), ensure_ascii=False,
        ).encode("utf-8")

    def canonical_bytes(self) -> bytes:
        """Full recursive serialization, used when digests alone are not trusted."""
        return json.dumps(self.to_json(), separators=(",", ":"), ensure_ascii=False,
                          sort_keys=True).encode("utf-8")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "local": [list(x) for x in self.local],
            "children": [[list(beta), c.to_json()] for beta, c in self.children],
        }

    @classmethod
    def from_json(cls, obj) -> VertexSummary:
        return cls(
            obj["kind"],
            tuple(tuple(x) for x in obj["local"]),
            tuple((tuple(beta), cls.from_json(c)) for beta, c in obj["children"]),
        )

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def distinct_children(self):
        """Child subtrees without parallel-edge repeats, in canonical order."""
        seen = {}
        for _, c in self.children:
            seen.setdefault(c.digest, c)
        return list(seen.values())

    def num_vertices(self) -> int:
        """Vertex count of the tree (a child shared by parallel edges counts once)."""
        if self._size is None:
            self._size = 1 + sum(c.num_vertices() for c in self.distinct_children())
        return self._size

    def num_edges(self) -> int:
        if self._edges is None:
            self._edges = len(self.children) + sum(c.num_edges() for c in self.distinct_children())
        return self._edges

    def height(self) -> int:
        return 0 if not self.children else 1 + max(c.height() for _, c in self.children)

    def __eq__(self, other):
        return isinstance(other, VertexSummary) and self.digest == other.digest

    def __hash__(self):
        return hash(self.digest)

    def __repr__(self):
        return f"VertexSummary({self.kind}, {self.local!r}, {len(self.children)} edges, {self.hex[:8]})"


def canonical_hash(vs: VertexSummary) -> SummaryHash:
    return xxhash.xxh3_128_digest(vs.node_bytes(), seed=HASH_SEED)


def _node_item(node):
    # type nodes are ("t", C); data vertices are plain ids
    return node if isinstance(node, tuple) else ("v", node)


class _EdgeFilter:
    __slots__ = ("admit_type", "admit", "set_filter")

    def __init__(self, *params: Params):
        sets = [p.set_filter for p in params if p.set_filter is not None]
        self.set_filter = frozenset.intersection(*sets) if sets else None
        self.admit_type = all(p.admits(RDF_TYPE) for p in params)
        ps = params
        sf = self.set_filter

        def admit(label):
            if sf is not None and label not in sf:
                return False
            for p in ps:
                if not p.admits(label):
                    return False
            return True

        self.admit = admit


def rdf_view_edges(gdb: GraphDatabase, node, direction: str, filt: _EdgeFilter) -> list:
    """``(dir, label, neighbor)`` triples of ``node`` in the RDF view.

    ``dir`` is ``"+"`` for outgoing and ``"-"`` for incoming edges; type
    nodes appear as ``("t", label)``.
    """
    out = []
    if isinstance(node, tuple):
        if direction != OUT and filt.admit_type and (
                filt.set_filter is None or node[1] in filt.set_filter):
            for u in gdb.vertices_with_label(node[1]):
                out.append(("-", RDF_TYPE, u))
        return out
    admit = filt.admit
    if direction != IN:
        if filt.admit_type:
            sf = filt.set_filter
            for c in gdb._vlabels.get(node, ()):
                if sf is None or c in sf:
                    out.append(("+", RDF_TYPE, ("t", c)))
        for w, labels in gdb.out_edges(node):
            for p in labels or ("",):
                if admit(p):
                    out.append(("+", p, w))
    if direction != OUT:
        for u, labels in gdb.in_edges(node):
            for p in labels or ("",):
                if admit(p):
                    out.append(("-", p, u))
    return out


def local_schema(gdb: GraphDatabase, node, elem: SchemaElement, filt=None) -> tuple:
    """Sorted local schema of a simple element evaluated at ``node``."""
    kind = elem.kind
    if kind == TOP:
        return ()
    if kind == ID:
        return (_node_item(node),)
    if filt is None:
        filt = _EdgeFilter(elem.params)
    edges = rdf_view_edges(gdb, node, elem.params.direction, filt)
    if kind == OC:
        items = {(d,) + _node_item(w) for d, _, w in edges}
    elif kind == PC:
        items = {(d, p) for d, p, _ in edges}
    elif kind == POC:
        items = {(d, p) + _node_item(w) for d, p, w in edges}
    else:
        raise ValueError(f"{kind} is not a simple element")
    return tuple(sorted(items))


class Summarizer:
    """Builds summaries for one GDB, memoizing per (element, node).

    Safe to share between threads: memo writes are idempotent.
    """

    def __init__(self, gdb: GraphDatabase):
        self.gdb = gdb
        self._memo: dict = {}
        self._filters: dict = {}

    def filter_for(self, elem: SchemaElement) -> _EdgeFilter:
        f = self._filters.get(elem)
        if f is None:
            if elem.kind == CSE:
                f = _EdgeFilter(elem.params, elem.predicate.params)
            else:
                f = _EdgeFilter(elem.params)
            self._filters[elem] = f
        return f

    def summary(self, node, elem: SchemaElement) -> VertexSummary:
        key = (elem, node)
        vs = self._memo.get(key)
        if vs is None:
            if elem.kind == CSE:
                vs = self.cse_node(node, elem, lambda w: self.summary(w, elem.object))
            else:
                vs = VertexSummary(elem.kind, local_schema(self.gdb, node, elem, self.filter_for(elem)))
            self._memo[key] = vs
        return vs

    def subject_part(self, node, elem: SchemaElement):
        s = elem.subject
        if s.kind == CSE:
            return "CSE/CSE", (("#", self.summary(node, s).hex),)
        return "CSE/" + s.kind, local_schema(self.gdb, node, s, self.filter_for(s))

    def cse_node(self, node, elem: SchemaElement, child_of) -> VertexSummary:
        """Primary vertex from the subject relation plus one edge per
        (edge class, object class) pair among the filtered neighbors.

        The representative of an object class is irrelevant: every member has
        the same child summary by construction, and pairs are keyed by digest.
        """
        kind, local = self.subject_part(node, elem)
        with_label = elem.predicate.kind == ID
        pairs = {}
        for d, p, w in rdf_view_edges(self.gdb, node, elem.params.direction, self.filter_for(elem)):
            child = child_of(w)
            beta = (d, p) if with_label else (d,)
            pairs[(beta, child.digest)] = (beta, child)
        children = tuple(pairs[k] for k in sorted(pairs))
        return VertexSummary(kind, local, children)


def _resolve(gdb, v):
    if v not in gdb.vertices:
        raise NotFoundError(f"unknown vertex {v!r}")


def extract_vertex_schema(gdb: GraphDatabase, v, elem: SchemaElement) -> VertexSummary:
    """Local fragment of ``v`` under a simple element."""
    _resolve(gdb, v)
    if elem.kind not in SIMPLE_KINDS:
        raise ValueError("extract_vertex_schema takes a simple schema element")
    return VertexSummary(elem.kind, local_schema(gdb, v, elem))


def build_vertex_summary(gdb: GraphDatabase, v, elem: SchemaElement,
                         summarizer: Summarizer | None = None) -> VertexSummary:
    """The summary tree of ``v`` built by structural recursion on ``elem``."""
    _resolve(gdb, v)
    if summarizer is None:
        summarizer = Summarizer(gdb)
    return summarizer.summary(v, normalize(elem))


# ---------------------------------------------------------------- instance merge


def instance_merge(gdb: GraphDatabase, labels) -> GraphDatabase:
    """Merge the endpoints of every edge carrying one of ``labels`` (e.g.
    ``owl:sameAs``), to a fixpoint.  The smallest id of each component
    becomes the merged vertex; merge labels on edges inside a component
    are dropped."""
    labels = frozenset(labels or ())
    if not labels:
        return gdb
    from networkx.utils import UnionFind

    uf = UnionFind()
    touched = False
    for (x, y), ls in gdb.edge_items():
        if ls & labels:
            uf.union(x, y)
            touched = True
    if not touched:
        return gdb
    rep = {}
    for comp in uf.to_sets():
        r = min(comp)
        for v in comp:
            rep[v] = r

    def m(v):
        return rep.get(v, v)

    b = GraphBuilder()
    for v in gdb.vertices:
        b.add_vertex(m(v))
    for v, ls in gdb.label_items():
        b.vertex_labels[m(v)].update(ls)
    for v, ps in gdb.vertex_property_items():
        b.vertex_properties[m(v)].update(ps)
    kept = {}
    for (x, y), ls in gdb.edge_items():
        mx, my = m(x), m(y)
        if mx == my and x != y and ls & labels:
            ls = ls - labels
            if not ls:
                continue
        kept[(x, y)] = (mx, my)
        b.edges.setdefault((mx, my), set()).update(ls)
    for (x, y), ps in gdb.edge_property_items():
        if (x, y) in kept:
            b.edge_properties[kept[(x, y)]].update(ps)
    graphs = []
    for g in gdb.graphs:
        vs = frozenset(m(v) for v in g.vertices)
        es = frozenset(kept[e] for e in g.edges if e in kept)
        graphs.append(NamedGraph(g.name, vs, es))
    return GraphDatabase(b.vertices, b.edges, b.vertex_labels, b.vertex_properties,
                         b.edge_properties, graphs)


def merge_labels_of(elem: SchemaElement):
    return elem.params.instance_merge_labels
