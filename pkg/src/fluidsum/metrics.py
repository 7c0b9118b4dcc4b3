"""Metrics rows and the memory cost model.

Byte figures are not measured; they follow one fixed cost model applied
to the structures each component actually holds, so that the VHI, the
graph and the summary graph are comparable and the numbers are stable
across Python versions:

* a hash-table slot costs ``ENTRY_BYTES``,
* a pointer or tuple field costs ``REF_BYTES``,
* a digest costs ``HASH_BYTES``,
* a string owned by a structure costs its UTF-8 length.
"""

from __future__ import annotations

import csv
import os

from .engine import ChangeReport, COUNTERS
from .graph import GraphDatabase
from .summary_graph import SummaryGraph
from .vhi import ENTRY_BYTES, HASH_BYTES, REF_BYTES, VertexUpdateHashIndex

METRICS_SCHEMA = 1

TIMING_PHASES = ("load", "instance_merge", "partition", "make_set", "find_merge", "total")

COLUMNS = (
    ["metrics_schema", "version", "mode", "model", "payload",
     "num_vertices", "num_edges", "num_primary", "num_secondary", "num_vs_edges",
     "ratio_per_class", "ratio_per_summary_vertex"]
    + list(COUNTERS)
    + ["gdb_changed_vertices", "gdb_change_pct", "sg_update_ops", "sg_update_pct", "payload_ops",
       "vhi_l1_entries", "vhi_l2_entries", "vhi_bytes", "graph_bytes", "summary_bytes"]
    + ["t_" + p for p in TIMING_PHASES]
)


def graph_bytes(gdb: GraphDatabase) -> int:
    """Vertex set, id strings, label and property maps, the edge map with
    label sets, both adjacency indexes and graph memberships."""
    n = 0
    for v in gdb.vertices:
        n += ENTRY_BYTES + len(v.encode("utf-8"))
    for v, labels in gdb.label_items():
        n += ENTRY_BYTES + ENTRY_BYTES * len(labels)
    for v, props in gdb.vertex_property_items():
        n += ENTRY_BYTES + sum(ENTRY_BYTES + 2 * REF_BYTES + len(str(val)) for _, val in props)
    for e, labels in gdb.edge_items():
        # edge map slot + key pair + label set, then one (neighbor, labels) pair per adjacency side
        n += ENTRY_BYTES + 2 * REF_BYTES + ENTRY_BYTES * len(labels) + 2 * 3 * REF_BYTES
    for e, props in gdb.edge_property_items():
        n += ENTRY_BYTES + sum(ENTRY_BYTES + 2 * REF_BYTES + len(str(val)) for _, val in props)
    for g in gdb.graphs:
        n += ENTRY_BYTES * (len(g.vertices) + len(g.edges)) + REF_BYTES * len(g.vertices)
    return n


def _node_bytes(node) -> int:
    return (ENTRY_BYTES + HASH_BYTES + REF_BYTES * len(node.local)
            + 2 * REF_BYTES * len(node.children))


def summary_bytes(sg: SummaryGraph) -> int:
    """Primary and secondary vertices (digest, local schema refs, two refs
    per summary edge) plus payload counters and items."""
    n = 0
    for e in sg.elements.values():
        n += _node_bytes(e.tree) + REF_BYTES + ENTRY_BYTES * len(e.acc.items)
    for node, _ in sg.secondary_pool.values():
        n += _node_bytes(node) + REF_BYTES
    return n


def _r(x: float) -> str:
    return f"{x:.6f}"


def metrics_row(version: str, mode: str, model: str, payload: str, gdb: GraphDatabase,
                sg: SummaryGraph, vhi: VertexUpdateHashIndex, report: ChangeReport,
                load_seconds: float = 0.0) -> dict:
    st = sg.stats()
    nv = len(gdb)
    mem = vhi.memory_stats()
    row = {
        "metrics_schema": METRICS_SCHEMA, "version": version, "mode": mode, "model": model,
        "payload": payload, "num_vertices": nv, "num_edges": gdb.num_edges,
        "num_primary": st.num_primary, "num_secondary": st.num_secondary,
        "num_vs_edges": st.num_vs_edges,
        "ratio_per_class": _r(nv / st.num_primary if st.num_primary else 0.0),
        "ratio_per_summary_vertex": _r(nv / (st.num_primary + st.num_secondary)
                                       if st.num_primary else 0.0),
    }
    row.update(report.counters)
    row.update({
        "gdb_changed_vertices": report.gdb_changed_vertices,
        "gdb_change_pct": _r(report.gdb_change_pct),
        "sg_update_ops": report.sg_update_ops, "sg_update_pct": _r(report.sg_update_pct),
        "payload_ops": report.payload_ops,
        "vhi_l1_entries": mem["l1_entries"], "vhi_l2_entries": mem["l2_entries"],
        "vhi_bytes": mem["approx_bytes"], "graph_bytes": graph_bytes(gdb),
        "summary_bytes": summary_bytes(sg),
    })
    timings = dict(report.phase_timings, load=load_seconds)
    for p in TIMING_PHASES:
        row["t_" + p] = _r(timings.get(p, 0.0))
    return row


def append_rows(path, rows) -> None:
    """Append to a metrics CSV, writing the header for a new file and
    refusing to mix header versions."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    if not new:
        with open(path, newline="", encoding="utf-8") as f:
            header = next(csv.reader(f), None)
        if header != COLUMNS:
            raise ValueError(f"{path} has a different metrics header; use a new file")
    with open(path, "a", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=COLUMNS)
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(r)


def read_rows(path) -> list:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def strip_timings(row: dict) -> dict:
    return {k: v for k, v in row.items() if not k.startswith("t_")}
