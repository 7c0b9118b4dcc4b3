"""Fixtures, random graph builders and brute-force oracles shared by the tests.

The oracles work on the labeled property graph directly and never call
into fluidsum.model, so they check the summaries independently.
"""

from __future__ import annotations

import random

from fluidsum.graph import ChangeSet, GraphBuilder, GraphDatabase, apply_changes

# ---------------------------------------------------------------- the two-source library example


def library_t() -> GraphDatabase:
    b = GraphBuilder()
    for v, c, g in [("v1", "Book", "X"), ("v2", "Subject", "X"), ("v3", "Person", "X"),
                    ("v7", "Book", "Y"), ("v8", "Subject", "Y"), ("v9", "Person", "Y")]:
        b.add_label(v, c, g)
    b.add_edge("v1", "v2", "topic", "X")
    b.add_edge("v1", "v3", "author", "X")
    b.add_edge("v7", "v8", "topic", "Y")
    b.add_edge("v7", "v9", "author", "Y")
    return b.build()


def library_changes() -> ChangeSet:
    """v9 and the author edge of v7 disappear; v7 gains a publisher v10."""
    return ChangeSet(
        add_vertices={"v10"},
        add_edges={("v7", "v10"): {"publisher"}},
        add_vertex_labels={"v10": {"Publisher"}},
        add_memberships={"Y": {"v10", ("v7", "v10")}},
        remove_vertices={"v9"},
    )


def library_t1() -> GraphDatabase:
    return apply_changes(library_t(), library_changes())


# ---------------------------------------------------------------- random graphs


def random_gdb(rng: random.Random, n: int, m: int, *, n_labels=3, n_preds=3, n_graphs=3,
               unlabeled=0.1, multi=0.2, max_out=None) -> GraphDatabase:
    """``n`` vertices, about ``m`` edges, small alphabets so equivalences occur."""
    b = GraphBuilder()
    vs = [f"v{i}" for i in range(n)]
    for v in vs:
        b.add_vertex(v, f"g{rng.randrange(n_graphs)}" if n_graphs else None)
        r = rng.random()
        if r < 0.7:
            b.add_label(v, f"C{rng.randrange(n_labels)}")
            if rng.random() < multi:
                b.add_label(v, f"C{rng.randrange(n_labels)}")
    if n:
        out = {v: 0 for v in vs}
        for _ in range(m):
            x, y = rng.choice(vs), rng.choice(vs)
            if max_out is not None and (out[x] >= max_out or out[y] >= max_out):
                continue
            new = (x, y) not in b.edges
            g = f"g{rng.randrange(n_graphs)}" if n_graphs and rng.random() < 0.5 else None
            if rng.random() < unlabeled:
                b.add_edge(x, y, None, g)
            else:
                b.add_edge(x, y, f"p{rng.randrange(n_preds)}", g)
                if rng.random() < multi:
                    b.add_edge(x, y, f"p{rng.randrange(n_preds)}", g)
            if new:
                out[x] += 1
                if x != y:
                    out[y] += 1
    return b.build()


def random_changes(rng: random.Random, gdb: GraphDatabase, rate=0.1, n_labels=3, n_preds=3,
                   n_graphs=3) -> ChangeSet:
    """Mixed churn: vertex adds and deletes, relabels, edge adds and deletes."""
    vs = sorted(gdb.vertices)
    cs = ChangeSet()
    k = max(1, int(rate * len(vs))) if vs else 0
    gone = set(rng.sample(vs, min(k, len(vs))))
    cs.remove_vertices = gone
    alive = [v for v in vs if v not in gone]
    base = len(vs)
    new = [f"n{base}_{i}_{rng.randrange(10**6)}" for i in range(k)]
    cs.add_vertices = set(new)
    for v in new:
        if rng.random() < 0.7:
            cs.add_vertex_labels[v] = {f"C{rng.randrange(n_labels)}"}
        if n_graphs:
            cs.add_memberships.setdefault(f"g{rng.randrange(n_graphs)}", set()).add(v)
    for v in rng.sample(alive, min(k, len(alive))):
        cur = gdb.vertex_labels(v)
        if cur and rng.random() < 0.5:
            cs.remove_vertex_labels[v] = set(cur)
        else:
            cs.add_vertex_labels[v] = {f"C{rng.randrange(n_labels)}"}
    pool = alive + new
    if pool:
        for _ in range(2 * k):
            x, y = rng.choice(pool), rng.choice(pool)
            cs.add_edges.setdefault((x, y), set()).add(f"p{rng.randrange(n_preds)}")
    old_edges = [e for e in sorted(gdb.edges) if e[0] not in gone and e[1] not in gone]
    for e in rng.sample(old_edges, min(k, len(old_edges))):
        if e not in cs.add_edges:
            cs.remove_edges.add(e)
    return cs


# ---------------------------------------------------------------- definitional oracles


def out_pairs(gdb, v):
    """(label, neighbor) pairs; an edge without labels counts with label ''."""
    res = set()
    for w, labels in gdb.out_edges(v):
        for p in labels or ("",):
            res.add((p, w))
    return res


def oc_equiv(gdb, a, b):
    return (gdb.vertex_labels(a) == gdb.vertex_labels(b)
            and {w for _, w in out_pairs(gdb, a)} == {w for _, w in out_pairs(gdb, b)})


def pc_equiv(gdb, a, b):
    return (bool(gdb.vertex_labels(a)) == bool(gdb.vertex_labels(b))
            and {p for p, _ in out_pairs(gdb, a)} == {p for p, _ in out_pairs(gdb, b)})


def poc_equiv(gdb, a, b):
    return gdb.vertex_labels(a) == gdb.vertex_labels(b) and out_pairs(gdb, a) == out_pairs(gdb, b)


def schemex_equiv(gdb, a, b, k=1, memo=None):
    """Pairwise check: equal label sets, and every (p, w) of one side is
    matched by some (p, w') of the other with w, w' equivalent one level
    down (equal label sets at the bottom level)."""
    if memo is None:
        memo = {}
    key = (a, b, k)
    if key in memo:
        return memo[key]
    if gdb.vertex_labels(a) != gdb.vertex_labels(b):
        memo[key] = False
        return False

    def sub(w1, w2):
        if k == 1:
            return gdb.vertex_labels(w1) == gdb.vertex_labels(w2)
        return schemex_equiv(gdb, w1, w2, k - 1, memo)

    pa, pb = out_pairs(gdb, a), out_pairs(gdb, b)
    ok = (all(any(p == q and sub(w, w2) for q, w2 in pb) for p, w in pa)
          and all(any(p == q and sub(w2, w) for q, w2 in pa) for p, w in pb))
    memo[key] = ok
    return ok


def pairwise_mismatches(vertices, key, same):
    """Pairs where ``key`` equality and the relation ``same`` disagree."""
    vs = sorted(vertices)
    keys = {v: key(v) for v in vs}
    bad = []
    for i, a in enumerate(vs):
        for b in vs[i + 1:]:
            if (keys[a] == keys[b]) != same(a, b):
                bad.append((a, b))
    return bad


def classes(vertices, key) -> list:
    groups = {}
    for v in vertices:
        groups.setdefault(key(v), []).append(v)
    return sorted(tuple(sorted(g)) for g in groups.values())


# ---------------------------------------------------------------- index shadow


def vhi_shadow_run(rng: random.Random, vhi, n_ops: int, n_vertices=500, n_hashes=60) -> int:
    """Random add/remove/set operations on ``vhi`` checked against two plain
    dicts after every step; returns the number of mismatches seen."""
    from fluidsum.errors import ConflictError, NotFoundError
    from fluidsum.payload import PayloadElement

    kind = vhi.payload_kind
    hashes = [rng.randbytes(16) for _ in range(n_hashes)]
    fwd, rev = {}, {}
    for v in vhi.get_all_summarized():
        e = vhi.get_entry(v)
        fwd[v] = (e.summary, e.contribution)
        rev.setdefault(e.summary, set()).add(v)
    bad = 0

    def contrib():
        if kind == "count":
            return PayloadElement(kind, 1)
        return PayloadElement(kind, items={f"s{rng.randrange(5)}"})

    for _ in range(n_ops):
        v = f"x{rng.randrange(n_vertices)}"
        r = rng.random()
        if r < 0.45:
            h, pe = rng.choice(hashes), contrib()
            try:
                vhi.add_link(v, h, pe)
                ok = v not in fwd
            except ConflictError:
                ok = v in fwd
            if ok and v not in fwd:
                fwd[v] = (h, pe)
                rev.setdefault(h, set()).add(v)
            bad += not ok
        elif r < 0.85:
            try:
                h, orphan = vhi.remove_link(v)
                ok = v in fwd and fwd[v][0] == h
                if ok:
                    rev[h].discard(v)
                    ok = orphan == (not rev[h])
                    if not rev[h]:
                        del rev[h]
                    del fwd[v]
            except NotFoundError:
                ok = v not in fwd
            bad += not ok
        else:
            pe = contrib()
            try:
                old = vhi.set_contribution(v, pe)
                ok = v in fwd and fwd[v][1] == old
                if ok:
                    fwd[v] = (fwd[v][0], pe)
            except NotFoundError:
                ok = v not in fwd
            bad += not ok
        h = fwd[v][0] if v in fwd else None
        if vhi.contains_link(v) != (v in fwd) or (h is not None and vhi.get_links(h) != rev[h]):
            bad += 1
    if {v: (e.summary, e.contribution) for v, e in vhi.l2.items()} != fwd:
        bad += 1
    if {h: set(s) for h, s in vhi.l1.items()} != rev:
        bad += 1
    return bad


# ---------------------------------------------------------------- run oracles


def expected_counters(sg1, vhi1, sg2, vhi2) -> dict:
    """Change counters derived only from two independent batch results."""
    c = dict.fromkeys(("add_schema", "add_instance", "mod_schema", "mod_instance",
                       "del_instance", "del_schema"), 0)
    before = set(sg1.elements)
    for v, e2 in vhi2.l2.items():
        e1 = vhi1.l2.get(v)
        if e1 is None:
            c["add_instance" if e2.summary in before else "add_schema"] += 1
        elif e1.summary != e2.summary:
            c["mod_schema"] += 1
        elif e1.contribution != e2.contribution:
            c["mod_instance"] += 1
    c["del_instance"] = len(vhi1.l2.keys() - vhi2.l2.keys())
    c["del_schema"] = len(before - set(sg2.elements))
    return c


def changed_between(g1, g2) -> set:
    """Vertices added, deleted, relabeled, moved between graphs, or with a
    changed incident edge."""
    out = set(g1.vertices ^ g2.vertices)
    for v in g1.vertices & g2.vertices:
        if (g1.vertex_labels(v) != g2.vertex_labels(v)
                or g1.memberships(v) != g2.memberships(v)):
            out.add(v)
    e1 = {e: frozenset(ls) for e, ls in g1.edge_items()}
    e2 = {e: frozenset(ls) for e, ls in g2.edge_items()}
    for e in e1.keys() | e2.keys():
        if e1.get(e) != e2.get(e):
            out.update(e)
    return out
