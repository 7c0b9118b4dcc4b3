"""Acceptance criteria 1-10, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line (also under
pytest's output capture).  Run the file directly to get just those lines:
``python tests/test_acceptance.py``.
"""

import functools
import os
import random
import statistics
import sys
import tempfile
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fluidsum.cli import main as cli_main  # noqa: E402
from fluidsum.engine import RunConfig, batch, summarize  # noqa: E402
from fluidsum.generator import WEB, GeneratorConfig, generate_gdbs  # noqa: E402
from fluidsum.graph import ChangeSet, apply_changes  # noqa: E402
from fluidsum.metrics import graph_bytes, read_rows, strip_timings, summary_bytes  # noqa: E402
from fluidsum.model import (Summarizer, build_vertex_summary, model_attribute_collection,  # noqa: E402
                            model_class_collection, model_schemex, normalize, object_cluster,
                            predicate_cluster, predicate_object_cluster)
from fluidsum.payload import COUNT, KINDS, SOURCE_SET, PayloadElement  # noqa: E402
from fluidsum.vhi import VertexUpdateHashIndex  # noqa: E402

from helpers import (library_t, library_t1, oc_equiv, pairwise_mismatches, pc_equiv,  # noqa: E402
                     poc_equiv, random_changes, random_gdb, schemex_equiv, vhi_shadow_run)

MODELS = {"schemex": model_schemex(), "attrcoll": model_attribute_collection(),
          "classcoll": model_class_collection()}


def report(n, ok, detail, capsys=None):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


def same_state(a, b):
    return a[0].export_bytes() == b[0].export_bytes() and a[1].to_bytes() == b[1].to_bytes()


# ---------------------------------------------------------------- 1


def check_1():
    t0 = time.perf_counter()
    bad, runs = [], 0
    for seed in range(100):
        rng = random.Random(seed)
        n = rng.randint(10, 500)
        g1 = random_gdb(rng, n, rng.randint(n, min(2500, 5 * n)), n_labels=6, n_preds=6)
        g2 = apply_changes(g1, random_changes(rng, g1, rate=rng.choice([0.01, 0.05, 0.1, 0.3]),
                                              n_labels=6, n_preds=6))
        for name, model in MODELS.items():
            for kind in KINDS:
                c = RunConfig(model, kind)
                sg, vhi, _ = batch(g1, c)
                inc = summarize(g2, sg, vhi, c)
                if not same_state(inc, batch(g2, c)):
                    bad.append((seed, name, kind))
                runs += 1
    secs = time.perf_counter() - t0
    ok = not bad and secs < 60
    return ok, f"{runs} incremental runs byte-equal to batch: {runs - len(bad)}/{runs}; {secs:.1f}s (< 60s)"


# ---------------------------------------------------------------- 2


def check_2():
    t0 = time.perf_counter()
    steps = bad = 0
    names = list(MODELS)
    for seed in range(20):
        rng = random.Random(1000 + seed)
        c = RunConfig(MODELS[names[seed % 3]], KINDS[(seed // 3) % 3])
        g = random_gdb(rng, rng.randint(20, 300), rng.randint(20, 1200))
        sg = vhi = None
        for _ in range(6):
            sg, vhi, _ = summarize(g, sg, vhi, c)
            steps += 1
            bad += not same_state((sg, vhi), batch(g, c))
            g = apply_changes(g, random_changes(rng, g, rate=rng.choice([0.02, 0.1, 0.25])))
    secs = time.perf_counter() - t0
    return bad == 0 and secs < 120, f"{steps - bad}/{steps} steps equal batch; {secs:.1f}s (< 120s)"


# ---------------------------------------------------------------- 3


def check_3():
    c = RunConfig(model_schemex(), SOURCE_SET)
    sg, vhi, _ = batch(library_t(), c)
    book = build_vertex_summary(library_t(), "v1", model_schemex()).digest
    st = sg.stats()
    at_t = (vhi.get_links(book) == {"v1", "v7"} and sg.payload(book).sources == {"X", "Y"}
            and (st.num_primary, st.num_secondary, st.num_vs_edges) == (3, 2, 2))
    sg, vhi, rep = summarize(library_t1(), sg, vhi, c)
    v7 = vhi.get_link("v7")
    at_t1 = (vhi.get_links(book) == {"v1"} and sg.payload(book).sources == {"X"}
             and vhi.get_links(v7) == {"v7"} and sg.payload(v7).sources == {"Y"}
             and rep.counters["mod_schema"] > 0 and rep.counters["del_instance"] > 0
             and same_state((sg, vhi), batch(library_t1(), c)))
    return at_t and at_t1, f"links {{v1, v7}}, sources {{X, Y}}; step counters {rep.counters}"


# ---------------------------------------------------------------- 4


def rdf_degree(g):
    """Degree counting every (neighbor, label) pair, as the summaries see edges."""
    deg = {v: 0 for v in g.vertices}
    for (x, y), labels in g.edge_items():
        n = len(labels) or 1
        deg[x] += n
        if x != y:
            deg[y] += n
    return max(deg.values(), default=0)


def check_4():
    t0 = time.perf_counter()
    rng = random.Random(4)
    checked = over = 0
    graphs = 0
    while graphs < 40:
        g = random_gdb(rng, rng.randint(5, 60), rng.randint(0, 150), max_out=4, multi=0.1)
        d = rdf_degree(g)
        if d > 6:
            continue
        graphs += 1
        for k in (1, 2, 3):
            bound = sum(d ** i for i in range(k + 1))
            for v in g.vertices:
                vs = build_vertex_summary(g, v, model_schemex(chaining_k=k))
                checked += 1
                over += vs.num_vertices() > bound or vs.height() > k
    secs = time.perf_counter() - t0
    return over == 0 and secs < 30, f"{checked} summaries on {graphs} graphs within bound; {secs:.1f}s"


# ---------------------------------------------------------------- 5


def check_5():
    t0 = time.perf_counter()
    bad = pairs = 0
    for seed in range(200):
        rng = random.Random(5000 + seed)
        g = random_gdb(rng, rng.randint(1, 30), rng.randint(0, 60))
        s = Summarizer(g)
        memo = {}
        checks = [(object_cluster(), lambda a, b: oc_equiv(g, a, b)),
                  (predicate_cluster(), lambda a, b: pc_equiv(g, a, b)),
                  (predicate_object_cluster(), lambda a, b: poc_equiv(g, a, b)),
                  (model_schemex(), lambda a, b: schemex_equiv(g, a, b, 1, memo)),
                  (model_schemex(chaining_k=2), lambda a, b: schemex_equiv(g, a, b, 2, memo))]
        for elem, rel in checks:
            n = normalize(elem)
            bad += len(pairwise_mismatches(g.vertices, lambda v: s.summary(v, n).digest, rel))
            pairs += len(g) * (len(g) - 1) // 2
    secs = time.perf_counter() - t0
    return bad == 0 and secs < 120, f"{pairs} vertex pairs, {bad} disagreements; {secs:.1f}s"


# ---------------------------------------------------------------- 6


def check_6():
    c = RunConfig(model_class_collection())
    inputs = [library_t(), library_t1()]
    rng = random.Random(6)
    inputs += [random_gdb(rng, rng.randint(1, 200), rng.randint(0, 600)) for _ in range(30)]
    for profile in ("benchmark", WEB):
        inputs += [g for g, _ in generate_gdbs(GeneratorConfig(seed=6, versions=3, vertices=500,
                                                               add_rate=0.05, del_rate=0.05,
                                                               relabel_rate=0.05, profile=profile))]
    edges = 0
    sg = vhi = None
    for g in inputs:
        edges += batch(g, c)[0].stats().num_vs_edges
        sg, vhi, _ = summarize(g, sg, vhi, c)
        edges += sg.stats().num_vs_edges
    return edges == 0, f"{len(inputs)} inputs, batch and incremental, total summary edges {edges}"


# ---------------------------------------------------------------- 7 and 10 share one run


@functools.lru_cache(maxsize=None)
def large_sequence():
    cfg = GeneratorConfig(seed=7, versions=3, vertices=14000, degree=3.5,
                          add_rate=0.02, del_rate=0.02, relabel_rate=0.01)
    return generate_gdbs(cfg)


@functools.lru_cache(maxsize=None)
def large_run(reps=3):
    gdbs = large_sequence()
    c = RunConfig(model_schemex(), COUNT, workers=4)
    inc_ops = bat_ops = 0
    t_inc, t_bat = [], []
    sizes = []
    for rep in range(reps):
        sg = vhi = None
        ti = tb = 0.0
        for i, (g, _) in enumerate(gdbs):
            t = time.perf_counter()
            sg, vhi, r = summarize(g, sg, vhi, c)
            dt = time.perf_counter() - t
            t = time.perf_counter()
            _, _, b = batch(g, c)
            db = time.perf_counter() - t
            if i:
                ti += dt
                tb += db
                if rep == 0:
                    inc_ops += r.sg_update_ops
                    bat_ops += b.sg_update_ops
            if rep == 0:
                sizes.append((g.num_edges, vhi.memory_stats()["approx_bytes"],
                              graph_bytes(g) + summary_bytes(sg)))
        t_inc.append(ti)
        t_bat.append(tb)
    churn = [gt.changed / len(g) for g, gt in gdbs[1:]]
    return dict(inc_ops=inc_ops, bat_ops=bat_ops, t_inc=statistics.median(t_inc),
                t_bat=statistics.median(t_bat), sizes=sizes, churn=churn)


def check_7():
    t0 = time.perf_counter()
    r = large_run()
    edges = min(e for e, _, _ in r["sizes"])
    ok = (edges >= 50000 and r["inc_ops"] <= 0.10 * r["bat_ops"] and r["t_inc"] < r["t_bat"])
    churn = ", ".join(f"{100 * c:.1f}%" for c in r["churn"])
    return ok, (f"{edges} edges, churn {churn}; SG mutations incremental {r['inc_ops']} vs batch "
                f"{r['bat_ops']}; median time incremental {r['t_inc']:.2f}s vs batch {r['t_bat']:.2f}s "
                f"(4 workers); {time.perf_counter() - t0:.0f}s")


# ---------------------------------------------------------------- 8


def check_8():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "data")
        cli_main(["generate", "--seed", "8", "--versions", "4", "--vertices", "1500",
                  "--add-rate", "0.05", "--del-rate", "0.05", "--relabel-rate", "0.02",
                  "--profile", WEB, "--out", data])
        manifest = os.path.join(data, "manifest.json")
        outs = {}
        for w in (1, 2, 4):
            out = os.path.join(tmp, f"w{w}")
            cli_main(["summarize", manifest, "--payload", "sources", "--workers", str(w),
                      "--out", out])
            files = {}
            for label in ("v0", "v1", "v2", "v3"):
                for name in ("sg.json", "sg.bin", "vhi.bin"):
                    with open(os.path.join(out, label, name), "rb") as f:
                        files[(label, name)] = f.read()
            rows = [strip_timings(r) for r in read_rows(os.path.join(out, "metrics.csv"))]
            outs[w] = (files, rows)
    ok = outs[1] == outs[2] == outs[4]
    return ok, "workers 1/2/4: SG exports, VHI files and metrics rows " + \
        ("identical" if ok else "differ")


# ---------------------------------------------------------------- 9


def check_9():
    rng = random.Random(9)
    vhi = VertexUpdateHashIndex(SOURCE_SET)
    hashes = [rng.randbytes(16) for _ in range(20000)]
    for i in range(100000):
        vhi.add_link(f"e{i}", rng.choice(hashes),
                     PayloadElement(SOURCE_SET, items={f"g{rng.randrange(8)}"}))
    data = vhi.to_bytes()
    back = VertexUpdateHashIndex.from_bytes(data)
    round_trip = back.canonical_equal(vhi) and back.to_bytes() == data and len(back) == 100000
    mismatches = vhi_shadow_run(rng, back, 10000, n_vertices=5000)
    back.check()
    ok = round_trip and mismatches == 0
    return ok, (f"100000-entry index round trip {'exact' if round_trip else 'differs'}; "
                f"10000 random operations, {mismatches} shadow mismatches")


# ---------------------------------------------------------------- 10


def check_10():
    r = large_run()
    worst = max(v / gs for _, v, gs in r["sizes"])
    # growth: edges that change no summary leave the index as it was
    g = large_sequence()[0][0]
    c = RunConfig(model_class_collection())
    sg, vhi, _ = batch(g, c)
    before = vhi.memory_stats()
    rng = random.Random(10)
    vs = sorted(g.vertices)
    extra = {}
    while len(extra) < 20000:
        e = (rng.choice(vs), rng.choice(vs))
        if not g.has_edge(*e):
            extra[e] = {"http://example.org/extra"}
    g2 = apply_changes(g, ChangeSet(add_edges=extra))
    sg, vhi, _ = summarize(g2, sg, vhi, c)
    edges_flat = vhi.memory_stats() == before
    new = {f"http://example.org/new{i}" for i in range(1000)}
    sg, vhi, _ = summarize(apply_changes(g2, ChangeSet(add_vertices=new)), sg, vhi, c)
    grows = vhi.memory_stats()["l2_entries"] == before["l2_entries"] + 1000
    ok = worst < 0.25 and edges_flat and grows
    return ok, (f"VHI bytes at most {100 * worst:.1f}% of graph+summary bytes (< 25%); "
                f"+{len(extra)} edges leave index size unchanged: {edges_flat}; "
                f"+1000 vertices add 1000 entries: {grows}")


# ---------------------------------------------------------------- pytest entry points


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9, check_10]


@pytest.mark.parametrize("n", range(1, 11), ids=[f"criterion_{i}" for i in range(1, 11)])
def test_criterion(n, capsys):
    ok, detail = CHECKS[n - 1]()
    assert report(n, ok, detail, capsys), detail


if __name__ == "__main__":
    results = [report(i, *chk()) for i, chk in enumerate(CHECKS, 1)]
    sys.exit(0 if all(results) else 1)
