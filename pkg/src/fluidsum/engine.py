"""Batch and incremental summarization.

A run has three phases:

* partition: vertices are split by a stable hash of their id;
* make-set: every vertex gets its summary by ``k`` bulk-synchronous
  message rounds (round ``r`` builds depth-``r`` subtrees from the
  neighbors' depth-``r-1`` subtrees);
* find-and-merge: each vertex is linked to its summary in the VHI and its
  payload merged into the SG; vertices that disappeared are unlinked.

Summaries left without links are collected in a final sweep rather than
immediately, so the mutation count does not depend on the order in which
workers process vertices.  Change counters are classified against the SG
as it was at the start of the run, for the same reason.
"""

from __future__ import annotations

import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import xxhash

from .concurrency import StripedLock, retry
from .errors import IntegrityError
from .graph import IN, OUT, GraphDatabase
from .model import CSE, SchemaElement, Summarizer, VertexSummary, instance_merge, normalize
from .payload import COUNT, KINDS, PayloadElement, extract_payload
from .summary_graph import SummaryGraph
from .vhi import VertexUpdateHashIndex

log = logging.getLogger(__name__)

BATCH = "batch"
INCREMENTAL = "incremental"

COUNTERS = ("add_schema", "add_instance", "mod_schema", "mod_instance", "del_instance", "del_schema")


@dataclass
class RunConfig:
    model: SchemaElement
    payload_kind: str = COUNT
    mode: str = INCREMENTAL
    workers: int = 1
    partitions: int | None = None  # defaults to 4 per worker
    retry_delay_ms: tuple = (0, 10)
    max_retries: int = 32
    paranoid: bool = False
    changed_vertices: frozenset | None = None  # optional change log
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (BATCH, INCREMENTAL):
            raise ValueError(f"mode must be {BATCH} or {INCREMENTAL}")
        if self.payload_kind not in KINDS:
            raise ValueError(f"unknown payload kind {self.payload_kind!r}")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.partitions is not None and self.partitions < 1:
            raise ValueError("partitions must be positive")
        lo, hi = self.retry_delay_ms
        if lo < 0 or hi < lo:
            raise ValueError("retry_delay_ms must be a non-negative range")

    @property
    def num_partitions(self) -> int:
        return self.partitions or 4 * self.workers


@dataclass
class ChangeReport:
    counters: dict = field(default_factory=lambda: dict.fromkeys(COUNTERS, 0))
    sg_update_ops: int = 0
    payload_ops: int = 0
    gdb_changed_vertices: int = 0
    phase_timings: dict = field(default_factory=dict)
    num_vertices: int = 0
    sg_size: int = 0  # |V_vs| + |E_vs| after the run
    gdb_change_pct: float = 0.0
    sg_update_pct: float = 0.0

    @property
    def schema_changes(self) -> int:
        c = self.counters
        return c["add_schema"] + c["mod_schema"] + c["del_schema"]


def classify_changes(report: ChangeReport) -> ChangeReport:
    """Fill the derived totals: changed vertices and the two percentages."""
    c = report.counters
    report.gdb_changed_vertices = sum(c[k] for k in COUNTERS if k != "del_schema")
    report.gdb_change_pct = 100.0 * report.gdb_changed_vertices / report.num_vertices \
        if report.num_vertices else 0.0
    report.sg_update_pct = 100.0 * report.sg_update_ops / report.sg_size if report.sg_size else 0.0
    return report


# ---------------------------------------------------------------- phase 0/1


def partition_of(v, partitions: int) -> int:
    return xxhash.xxh64_intdigest(v) % partitions


def partition(vertices, partitions: int) -> list:
    parts = [[] for _ in range(partitions)]
    for v in sorted(vertices):
        parts[partition_of(v, partitions)].append(v)
    return parts


def _chain(elem: SchemaElement) -> list:
    """Levels of the object chain, outermost first; the last one is not a CSE."""
    out = [elem]
    while out[-1].kind == CSE:
        out.append(out[-1].object)
    return out


def message_rounds(gdb: GraphDatabase, model: SchemaElement, k: int | None = None, *,
                   workers: int = 1, partitions: int | None = None,
                   executor=None, vertices=None) -> dict:
    """Per-vertex summaries via ``k`` rounds of fragment propagation.

    Round 0 computes each vertex's innermost (simple) fragment.  In round
    ``r`` a vertex combines its own subject schema with the round ``r-1``
    fragments of its neighbors; after ``k`` rounds each vertex holds its
    full summary.  Each round ends with a barrier.
    """
    elem = normalize(model)
    levels = _chain(elem)
    depth = len(levels) - 1
    if k is not None and k != depth:
        raise ValueError(f"model has chaining depth {depth}, not {k}")
    s = Summarizer(gdb)
    todo = sorted(gdb.vertices if vertices is None else vertices)
    if vertices is not None:
        # a partial request (change log) is built directly; the rounds need every vertex
        return {v: s.summary(v, elem) for v in todo}
    parts = partition(todo, partitions or max(1, 4 * workers))
    own = executor is None and workers > 1
    if own:
        executor = ThreadPoolExecutor(workers)
    try:
        base = levels[-1]
        cur = _run_round(executor, parts, lambda v: s.summary(v, base))
        for lvl in reversed(levels[:-1]):
            prev = cur
            inner = lvl.object

            def child_of(w, prev=prev, inner=inner):
                got = prev.get(w) if not isinstance(w, tuple) else None
                return got if got is not None else s.summary(w, inner)

            cur = _run_round(executor, parts, lambda v, lvl=lvl, c=child_of: s.cse_node(v, lvl, c))
    finally:
        if own:
            executor.shutdown()
    return cur


def _run_round(executor, parts, fn) -> dict:
    def work(vs):
        return [(v, fn(v)) for v in vs]

    results = map(work, parts) if executor is None else executor.map(work, parts)
    out = {}
    canon = {}
    # barrier: all partitions finish before the next round reads ``out``
    for chunk in results:
        for v, vs in chunk:
            out[v] = canon.setdefault(vs.digest, vs)
    return out


def dirty_vertices(gdb: GraphDatabase, changed, model: SchemaElement) -> set:
    """Vertices whose summary may depend on a changed vertex: those that
    reach one within ``k`` hops in the model's direction."""
    elem = normalize(model)
    dirs = set()
    depth = 0
    e = elem
    while e.kind == CSE:
        dirs.add(e.params.direction)
        depth += 1
        e = e.object
    dirs.add(e.params.direction)
    if e.kind in ("OC", "PC", "POC"):
        depth += 1
    if depth >= 2 and dirs != {OUT}:
        # paths through shared type nodes are not followed here
        return set(gdb.vertices)
    frontier = {v for v in changed if v in gdb}
    seen = set(frontier)
    for _ in range(depth):
        nxt = set()
        for w in frontier:
            if OUT in dirs or "both" in dirs:
                nxt.update(u for u, _ in gdb.in_edges(w))
            if IN in dirs or "both" in dirs:
                nxt.update(x for x, _ in gdb.out_edges(w))
        frontier = nxt - seen
        seen |= frontier
    return seen


# ---------------------------------------------------------------- phase 2


class _Run:
    """Shared state of one find-and-merge phase."""

    def __init__(self, sg: SummaryGraph, vhi: VertexUpdateHashIndex, cfg: RunConfig):
        self.sg = sg
        self.vhi = vhi
        self.cfg = cfg
        self.before = frozenset(sg.elements)
        self.orphans = set()
        self.counters = dict.fromkeys(COUNTERS, 0)
        self.locks = StripedLock(256)
        self.rng = random.Random(cfg.seed)

    def bump(self, name):
        with self.locks.hold(("counter", name)):
            self.counters[name] += 1


def _link(run: _Run, v, vs: VertexSummary, pe: PayloadElement) -> None:
    sg = run.sg
    run.vhi.add_link(v, vs.digest, pe)
    if sg.contains_element(vs.digest):
        if run.cfg.paranoid:
            sg.verify(vs)
        sg.update_payload(vs.digest, pe, "merge")
    else:
        sg.add_element(vs, pe)


def incremental_find_and_merge(sg: SummaryGraph, vhi: VertexUpdateHashIndex, vs: VertexSummary,
                               pe: PayloadElement, v, run: _Run | None = None) -> str | None:
    """Bring ``v``'s link and payload in line with ``vs``/``pe``.

    Returns the change type, or ``None`` when nothing changed.  Without a
    ``run`` the call is standalone: an orphaned summary is removed at once.
    """
    standalone = run is None
    if standalone:
        run = _Run(sg, vhi, RunConfig(model=SchemaElement("T"), payload_kind=sg.payload_kind))
    h = vs.digest
    entry = vhi.l2.get(v)
    # only this call writes v's entry during a run, so the unchanged case needs no lock
    if entry is not None and entry.summary == h and entry.contribution == pe:
        return None
    keys =[("v", v), h] + ([entry.summary] if entry is not None else [])
    with run.locks.hold(*keys):
        entry = vhi.l2.get(v)
        if entry is not None:
            old_h, old_pe = entry
            if old_h == h:
                if old_pe == pe:
                    return None
                sg.update_payload(h, old_pe, "unmerge")
                sg.update_payload(h, pe, "merge")
                vhi.set_contribution(v, pe)
                kind = "mod_instance"
            else:
                _, orphaned = vhi.remove_link(v)
                sg.update_payload(old_h, old_pe, "unmerge")
                if orphaned:
                    run.orphans.add(old_h)
                _link(run, v, vs, pe)
                kind = "mod_schema"
        else:
            kind = "add_instance" if h in run.before else "add_schema"
            _link(run, v, vs, pe)
    run.bump(kind)
    if standalone:
        run.counters["del_schema"] += _sweep(run)
    return kind


def handle_deletions(sg: SummaryGraph, vhi: VertexUpdateHashIndex, current_vertices,
                     run: _Run | None = None) -> int:
    """Unlink every indexed vertex missing from ``current_vertices``."""
    standalone = run is None
    if standalone:
        run = _Run(sg, vhi, RunConfig(model=SchemaElement("T"), payload_kind=sg.payload_kind))
    gone = sorted(v for v in vhi.get_all_summarized() if v not in current_vertices)
    for v in gone:
        old_h, old_pe = vhi.get_entry(v)
        with run.locks.hold(("v", v), old_h):
            _, orphaned = vhi.remove_link(v)
            sg.update_payload(old_h, old_pe, "unmerge")
            if orphaned:
                run.orphans.add(old_h)
        run.bump("del_instance")
    if standalone:
        run.counters["del_schema"] += _sweep(run)
    return len(gone)


def _sweep(run: _Run) -> int:
    n = 0
    for h in sorted(run.orphans):
        if h not in run.vhi.l1 and run.sg.contains_element(h):
            run.sg.remove_element(h)
            n += 1
    run.orphans.clear()
    return n


def check_consistency(sg: SummaryGraph, vhi: VertexUpdateHashIndex, payload_kind: str) -> None:
    if sg.payload_kind != payload_kind or vhi.payload_kind != payload_kind:
        raise IntegrityError(
            f"payload kinds differ: run {payload_kind}, SG {sg.payload_kind}, VHI {vhi.payload_kind}")
    vhi.check()
    if set(vhi.l1) != set(sg.elements):
        raise IntegrityError("VHI links and SG elements do not refer to the same summaries")
    if payload_kind == COUNT:
        for h, vs in vhi.l1.items():
            if sg.elements[h].acc.count != len(vs):
                raise IntegrityError(f"payload count of {h.hex()} differs from its link count")


@contextmanager
def _timed(timings, phase):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[phase] = timings.get(phase, 0.0) + time.perf_counter() - t0


def summarize(gdb: GraphDatabase, sg_in: SummaryGraph | None, vhi_in: VertexUpdateHashIndex | None,
              cfg: RunConfig):
    """Run one summarization.  ``sg_in``/``vhi_in`` are updated in place
    (``None`` means empty) and returned with a :class:`ChangeReport`."""
    timings = {}
    t_start = time.perf_counter()
    sg = sg_in if sg_in is not None else SummaryGraph(cfg.payload_kind, cfg.paranoid)
    vhi = vhi_in if vhi_in is not None else VertexUpdateHashIndex(cfg.payload_kind)
    if cfg.mode == BATCH and (not sg.is_empty() or len(vhi)):
        raise IntegrityError("batch mode needs an empty SG and VHI")
    check_consistency(sg, vhi, cfg.payload_kind)
    sg.reset_counters()

    merge_labels = cfg.model.params.instance_merge_labels
    if merge_labels:
        with _timed(timings, "instance_merge"):
            gdb = instance_merge(gdb, merge_labels)

    executor = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        with _timed(timings, "partition"):
            todo = None
            if cfg.changed_vertices is not None and cfg.mode == INCREMENTAL:
                todo = dirty_vertices(gdb, cfg.changed_vertices, cfg.model)
                todo.update(v for v in gdb.vertices if v not in vhi.l2)
            parts = partition(gdb.vertices if todo is None else todo, cfg.num_partitions)
        with _timed(timings, "make_set"):
            summaries = message_rounds(gdb, cfg.model, workers=cfg.workers,
                                       partitions=cfg.num_partitions, executor=executor,
                                       vertices=todo)
        with _timed(timings, "find_merge"):
            run = _Run(sg, vhi, cfg)

            def work(vs_part):
                for v in vs_part:
                    pe = extract_payload(gdb, v, cfg.payload_kind)
                    retry(lambda: incremental_find_and_merge(sg, vhi, summaries[v], pe, v, run),
                          attempts=cfg.max_retries, delay_ms=cfg.retry_delay_ms, rng=run.rng)

            if executor is None:
                for p in parts:
                    work(p)
            else:
                list(executor.map(work, parts))
            handle_deletions(sg, vhi, gdb.vertices, run)
            run.counters["del_schema"] += _sweep(run)
    finally:
        if executor is not None:
            executor.shutdown()

    timings["total"] = time.perf_counter() - t_start
    st = sg.stats()
    report = ChangeReport(counters=run.counters, sg_update_ops=sg.update_ops,
                          payload_ops=sg.payload_ops, phase_timings=timings,
                          num_vertices=len(gdb), sg_size=st.num_primary + st.num_secondary + st.num_vs_edges)
    classify_changes(report)
    log.info("summarized %d vertices: %s, %d SG ops", len(gdb), report.counters, report.sg_update_ops)
    return sg, vhi, report


def batch(gdb: GraphDatabase, cfg: RunConfig):
    cfg = RunConfig(**{**cfg.__dict__, "mode": BATCH, "changed_vertices": None})
    return summarize(gdb, None, None, cfg)
