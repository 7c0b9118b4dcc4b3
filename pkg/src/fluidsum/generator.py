"""Seeded synthetic evolving graphs.

Two profiles:

``benchmark``
    Low schema variety.  Types come in sibling pairs sharing one property
    template; every template edge points into a fixed target group.  When
    a vertex is deleted its in-edges are rewired to another vertex of the
    same type, and relabeling swaps a vertex to its sibling type, so the
    set of distinct summaries stays small and stable.

``web``
    High variety: many types, untyped and multi-typed vertices, skewed
    random predicates, literals and random targets.

Each version is a list of N-Quads statements; the GDB of a version is
whatever those statements parse into, so files and in-memory graphs agree
by construction.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass

from .model import RDF_TYPE
from .rdf import Iri, Literal, RdfStatement, rdf_to_lpg, write_file

NS = "http://example.org/"
BENCHMARK = "benchmark"
WEB = "web"


@dataclass
class GeneratorConfig:
    seed: int = 0
    versions: int = 2
    vertices: int = 1000
    degree: float = 3.0
    add_rate: float = 0.0
    del_rate: float = 0.0
    relabel_rate: float = 0.0
    profile: str = BENCHMARK
    sources: int = 4

    def __post_init__(self):
        for name in ("add_rate", "del_rate", "relabel_rate"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.profile not in (BENCHMARK, WEB):
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.versions < 1 or self.vertices < 0 or self.sources < 1:
            raise ValueError("versions and sources must be positive, vertices non-negative")


@dataclass
class GroundTruth:
    label: str
    added: int = 0
    deleted: int = 0
    relabeled: int = 0

    @property
    def changed(self) -> int:
        return self.added + self.deleted + self.relabeled


class _State:
    def __init__(self, cfg: GeneratorConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.next_id = 0
        self.types = {}    # vertex -> tuple of type names
        self.source = {}   # vertex -> graph name
        self.group = {}    # vertex -> group index (benchmark)
        self.out = {}      # vertex -> {predicate: [targets]}
        self.literals = {}  # vertex -> [(predicate, text)]
        self.gone_types = {}  # deleted vertex -> its last types, for rewiring
        n = max(cfg.vertices, 1)
        if cfg.profile == BENCHMARK:
            self.n_groups = max(2, min(8, n // 50))
            m = max(1, round(cfg.degree))
            self.templates = [
                [(f"{NS}g{g}p{i}", self.rng.randrange(self.n_groups)) for i in range(m)]
                for g in range(self.n_groups)
            ]
            self.members = {}  # type name -> list of vertices, for rewiring
        else:
            self.type_names = [f"{NS}C{i}" for i in range(20 + n // 20)]
            self.preds = [f"{NS}p{i}" for i in range(10 + n // 10)]

    def new_vertex(self) -> str:
        v = f"{NS}v{self.next_id}"
        self.next_id += 1
        self.source[v] = f"{NS}src{self.rng.randrange(self.cfg.sources)}"
        self.out[v] = {}
        if self.cfg.profile == BENCHMARK:
            g = self.rng.randrange(self.n_groups)
            self.group[v] = g
            self.types[v] = (self._type_name(g, self.rng.randrange(2)),)
            self.members.setdefault(self.types[v][0], []).append(v)
        else:
            r = self.rng.random()
            if r < 0.3:
                self.types[v] = ()
            elif r < 0.4:
                self.types[v] = tuple(sorted(set(self.rng.sample(self.type_names, 2))))
            else:
                self.types[v] = (self._zipf(self.type_names),)
        return v

    def _type_name(self, g, sib):
        return f"{NS}T{g}{'ab'[sib]}"

    def _zipf(self, seq):
        # mild skew: low indexes are chosen more often
        return seq[min(int(self.rng.paretovariate(1.2)) - 1, len(seq) - 1)]

    def wire(self, v, pool):
        """Give ``v`` its outgoing edges, targets drawn from ``pool``."""
        rng = self.rng
        if self.cfg.profile == BENCHMARK:
            for p, tg in self.templates[self.group[v]]:
                w = self._pick_group(tg)
                if w is not None:
                    self.out[v][p] = [w]
            return
        k = min(int(rng.expovariate(1.0 / max(self.cfg.degree, 0.1)) + 0.5), 3 * int(self.cfg.degree) + 1)
        for _ in range(k):
            p = self._zipf(self.preds)
            if rng.random() < 0.1:
                self.literals.setdefault(v, []).append((p, f"text {rng.randrange(50)}"))
            elif pool:
                self.out[v].setdefault(p, []).append(rng.choice(pool))

    def _pick_group(self, g):
        a = self.members.get(self._type_name(g, 0), [])
        b = self.members.get(self._type_name(g, 1), [])
        n = len(a) + len(b)
        if not n:
            return None
        i = self.rng.randrange(n)
        return a[i] if i < len(a) else b[i - len(a)]

    def delete(self, v):
        for w in (self.types, self.source, self.group, self.out, self.literals):
            w.pop(v, None)
        if self.cfg.profile == BENCHMARK:
            for members in self.members.values():
                if v in members:
                    members.remove(v)

    def relabel(self, v):
        if self.cfg.profile == BENCHMARK:
            old = self.types[v][0]
            self.members[old].remove(v)
            g = self.group[v]
            new = self._type_name(g, 1) if old == self._type_name(g, 0) else self._type_name(g, 0)
            self.types[v] = (new,)
            self.members.setdefault(new, []).append(v)
        else:
            cur = self.types[v]
            choices = [t for t in self.type_names if (t,) != cur]
            self.types[v] = (self.rng.choice(choices),) if self.rng.random() < 0.8 or not cur else ()

    def repair(self, gone):
        """Drop or rewire edges into deleted vertices."""
        for v, preds in self.out.items():
            for p in list(preds):
                ts = preds[p]
                if not any(t in gone for t in ts):
                    continue
                new = []
                for t in ts:
                    if t not in gone:
                        new.append(t)
                    elif self.cfg.profile == BENCHMARK:
                        # a benchmark-like dataset stays consistent: rewire to a same-typed vertex
                        cands = self.members.get(self.gone_types[t][0], [])
                        if cands:
                            new.append(self.rng.choice(cands))
                if new:
                    preds[p] = sorted(set(new))
                else:
                    del preds[p]

    def statements(self):
        tp = Iri(RDF_TYPE)
        out = []
        for v in sorted(self.types, key=_vkey):
            g = Iri(self.source[v])
            s = Iri(v)
            for t in self.types[v]:
                out.append(RdfStatement(s, tp, Iri(t), g))
            for p in sorted(self.out[v]):
                for t in sorted(self.out[v][p]):
                    out.append(RdfStatement(s, Iri(p), Iri(t), g))
            for p, text in sorted(self.literals.get(v, ())):
                out.append(RdfStatement(s, Iri(p), Literal(text), g))
        return out


def _vkey(v):
    return int(v.rsplit("v", 1)[1])


def generate(cfg: GeneratorConfig):
    """Yield ``(label, statements, ground_truth)`` for every version.

    Ground truth counts vertices of the GDB that appeared, disappeared or
    changed their label set relative to the previous version.
    """
    st = _State(cfg)
    for _ in range(cfg.vertices):
        st.new_vertex()
    pool = sorted(st.types, key=_vkey)
    for v in pool:
        st.wire(v, pool)
    prev = None
    for i in range(cfg.versions):
        if i > 0:
            rng = st.rng
            alive = sorted(st.types, key=_vkey)
            n = len(alive)
            gone = set(rng.sample(alive, round(cfg.del_rate * n)))
            for v in gone:
                st.gone_types[v] = st.types[v]
            relabel_pool = [v for v in alive if v not in gone]
            for v in rng.sample(relabel_pool, min(len(relabel_pool), round(cfg.relabel_rate * n))):
                st.relabel(v)
            for v in sorted(gone, key=_vkey):
                st.delete(v)
            st.repair(gone)
            added = [st.new_vertex() for _ in range(round(cfg.add_rate * n))]
            pool = sorted(st.types, key=_vkey)
            for v in added:
                st.wire(v, pool)
        stmts = st.statements()
        gdb = rdf_to_lpg(stmts)
        label = f"v{i}"
        gt = GroundTruth(label)
        if prev is not None:
            gt.added = len(gdb.vertices - prev.vertices)
            gt.deleted = len(prev.vertices - gdb.vertices)
            gt.relabeled = sum(1 for v in gdb.vertices & prev.vertices
                               if gdb.vertex_labels(v) != prev.vertex_labels(v))
        prev = gdb
        yield label, stmts, gt


def generate_gdbs(cfg: GeneratorConfig) -> list:
    """In-memory variant: list of ``(GraphDatabase, GroundTruth)``."""
    return [(rdf_to_lpg(stmts), gt) for _, stmts, gt in generate(cfg)]


def cmd_generate(cfg: GeneratorConfig, out_dir) -> dict:
    """Write one gzipped N-Quads file per version, ``manifest.json`` and
    ``ground_truth.json`` into ``out_dir``; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    versions, truth = [], []
    for label, stmts, gt in generate(cfg):
        name = f"{label}.nq.gz"
        write_file(os.path.join(out_dir, name), stmts)
        versions.append({"label": label, "files": [name], "format": "nquads", "compression": "gzip"})
        truth.append({"label": label, "added": gt.added, "deleted": gt.deleted,
                      "relabeled": gt.relabeled, "changed": gt.changed})
    manifest = {"versions": versions, "generator": asdict(cfg)}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "ground_truth.json"), "w", encoding="utf-8") as f:
        json.dump(truth, f, indent=2)
    return manifest

