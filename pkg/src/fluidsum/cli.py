"""Command-line driver: ``summarize``, ``generate``, ``stats`` and ``diff``.

Exit codes: 0 success, 1 ``diff`` found differences, 2 usage, I/O,
parse or integrity errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

from .engine import BATCH, INCREMENTAL, RunConfig, summarize
from .errors import FluidError
from .generator import BENCHMARK, WEB, GeneratorConfig, cmd_generate as _generate
from .graph import GraphDatabase
from .metrics import append_rows, metrics_row
from .model import RDF_TYPE, MODELS, element_from_config
from .payload import CLI_NAMES, payload_kind
from .rdf import ParseStats, load_gdb
from .summary_graph import SummaryGraph, diff as sg_diff

log = logging.getLogger("fluidsum")


def load_manifest(path) -> list:
    with open(path, encoding="utf-8") as f:
        m = json.load(f)
    versions = m["versions"] if isinstance(m, dict) else m
    if not versions:
        raise FluidError("manifest has no versions")
    base = os.path.dirname(os.path.abspath(path))
    out = []
    for i, v in enumerate(versions):
        files = v.get("files") or ([v["file"]] if "file" in v else [])
        files = [f if os.path.isabs(f) else os.path.join(base, f) for f in files]
        for f in files:
            if not os.path.exists(f):
                raise FluidError(f"version {v.get('label', i)}: missing file {f}")
        out.append({"label": str(v.get("label", f"v{i}")), "files": files,
                    "format": v.get("format", "nquads")})
    return out


def resolve_model(spec: str):
    """A predefined model name or a JSON config file; returns (element, name)."""
    if spec.lower() in MODELS:
        return element_from_config(spec), spec.lower()
    with open(spec, encoding="utf-8") as f:
        return element_from_config(json.load(f)), os.path.splitext(os.path.basename(spec))[0]


def cmd_summarize(manifest, model, payload, mode, workers, out_dir, *, lenient=False,
                  type_iri=RDF_TYPE, partitions=None, paranoid=False, seed=0) -> int:
    versions = load_manifest(manifest)
    elem, model_name = resolve_model(model)
    kind = payload_kind(payload)
    os.makedirs(out_dir, exist_ok=True)
    cfg = RunConfig(elem, kind, mode, workers, partitions, paranoid=paranoid, seed=seed)
    sg = vhi = None
    rows = []
    for v in versions:
        t0 = time.perf_counter()
        stats = ParseStats()
        if v["files"]:
            gdb = load_gdb(v["files"], v["format"], lenient=lenient, type_iri=type_iri, stats=stats)
        else:
            gdb = GraphDatabase()
        if stats.errors:
            log.warning("%s: skipped %d malformed lines", v["label"], len(stats.errors))
        load_s = time.perf_counter() - t0
        if mode == BATCH:
            sg = vhi = None
        sg, vhi, report = summarize(gdb, sg, vhi, cfg)
        sg.check()
        vhi.check()
        vdir = os.path.join(out_dir, v["label"])
        os.makedirs(vdir, exist_ok=True)
        sg.write_json(os.path.join(vdir, "sg.json"))
        with open(os.path.join(vdir, "sg.bin"), "wb") as f:
            f.write(sg.to_binary())
        vhi.persist(os.path.join(vdir, "vhi.bin"))
        rows.append(metrics_row(v["label"], mode, model_name, kind, gdb, sg, vhi, report, load_s))
        log.info("%s: %s", v["label"], report.counters)
    append_rows(os.path.join(out_dir, "metrics.csv"), rows)
    return 0


def read_sg(path) -> SummaryGraph:
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == b"\x1f\x8b":
        return SummaryGraph.from_binary(data)
    return SummaryGraph.from_json(json.loads(data.decode("utf-8")))


def cmd_stats(path, out=None) -> int:
    out = out or sys.stdout
    sg = read_sg(path)
    st = sg.stats()
    rec = {"num_primary": st.num_primary, "num_secondary": st.num_secondary,
           "num_vs_edges": st.num_vs_edges, "num_payload_elements": st.num_payload_elements,
           "payload_kind": sg.payload_kind}
    if sg.payload_kind == "count":
        rec["summarized_vertices"] = sum(e.acc.count for e in sg.elements.values())
    json.dump(rec, out, indent=2, sort_keys=True)
    out.write("\n")
    return 0


def cmd_diff(path_a, path_b, out=None) -> int:
    out = out or sys.stdout
    d = sg_diff(read_sg(path_a), read_sg(path_b))
    if not d:
        out.write("equal\n")
        return 0
    for what, h, detail in d:
        out.write(f"{what}\t{h}\t{detail}\n".rstrip("\t\n") + "\n")
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fluidsum", description="Incremental structural graph summaries")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("summarize", help="summarize every version of a manifest")
    s.add_argument("manifest")
    s.add_argument("--model", default="schemex", help="schemex, attrcoll, classcoll or a JSON file")
    s.add_argument("--payload", default="count", choices=sorted(CLI_NAMES))
    s.add_argument("--mode", default=INCREMENTAL, choices=[BATCH, INCREMENTAL])
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--partitions", type=int, default=None)
    s.add_argument("--seed", type=int, default=0, help="seed for retry backoff")
    s.add_argument("--out", required=True)
    s.add_argument("--lenient", action="store_true", help="skip malformed lines instead of failing")
    s.add_argument("--type-iri", default=RDF_TYPE)
    s.add_argument("--paranoid", action="store_true", help="compare full trees on every hash hit")

    g = sub.add_parser("generate", help="write a synthetic evolving dataset")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--versions", type=int, default=5)
    g.add_argument("--vertices", type=int, default=1000)
    g.add_argument("--degree", type=float, default=3.0)
    g.add_argument("--add-rate", type=float, default=0.0)
    g.add_argument("--del-rate", type=float, default=0.0)
    g.add_argument("--relabel-rate", type=float, default=0.0)
    g.add_argument("--profile", default=BENCHMARK, choices=[BENCHMARK, WEB])
    g.add_argument("--sources", type=int, default=4)
    g.add_argument("--out", required=True)

    st = sub.add_parser("stats", help="print statistics of a stored summary graph")
    st.add_argument("sg")

    d = sub.add_parser("diff", help="compare two stored summary graphs")
    d.add_argument("sg_a")
    d.add_argument("sg_b")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("FLUID_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "summarize":
            return cmd_summarize(args.manifest, args.model, args.payload, args.mode, args.workers,
                                 args.out, lenient=args.lenient, type_iri=args.type_iri,
                                 partitions=args.partitions, paranoid=args.paranoid, seed=args.seed)
        if args.cmd == "generate":
            cfg = GeneratorConfig(args.seed, args.versions, args.vertices, args.degree, args.add_rate,
                                  args.del_rate, args.relabel_rate, args.profile, args.sources)
            _generate(cfg, args.out)
            return 0
        if args.cmd == "stats":
            return cmd_stats(args.sg)
        return cmd_diff(args.sg_a, args.sg_b)
    except (FluidError, OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"fluidsum: error: {e}", file=sys.stderr)
        return 2
