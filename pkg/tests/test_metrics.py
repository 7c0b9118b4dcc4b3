import pytest

from fluidsum.engine import RunConfig, batch
from fluidsum.metrics import (COLUMNS, append_rows, graph_bytes, metrics_row, read_rows,
                              strip_timings, summary_bytes)
from fluidsum.model import model_schemex

from helpers import library_t


def row():
    g = library_t()
    sg, vhi, rep = batch(g, RunConfig(model_schemex()))
    return metrics_row("v0", "batch", "schemex", "count", g, sg, vhi, rep, 0.5)


def test_row_has_every_column():
    r = row()
    assert list(r) == list(COLUMNS)
    assert r["num_primary"] == 3 and r["num_vertices"] == 6
    assert r["ratio_per_class"] == "2.000000"
    assert r["t_load"] == "0.500000"


def test_append_and_read(tmp_path):
    p = tmp_path / "m.csv"
    append_rows(p, [row()])
    append_rows(p, [row()])
    rows = read_rows(p)
    assert len(rows) == 2
    assert strip_timings(rows[0]) == strip_timings(rows[1])
    assert not any(k.startswith("t_") for k in strip_timings(rows[0]))


def test_header_mismatch_rejected(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        append_rows(p, [row()])


def test_sizes_positive():
    g = library_t()
    sg, _, _ = batch(g, RunConfig(model_schemex()))
    assert graph_bytes(g) > 0 and summary_bytes(sg) > 0
