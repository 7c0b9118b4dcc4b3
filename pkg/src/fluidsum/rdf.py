"""N-Triples / N-Quads streaming I/O and the RDF <-> LPG transformations.

The parser is a line-at-a-time regex tokenizer, so memory use depends on
the number of distinct terms kept by the caller, not on file size.
"""

from __future__ import annotations

import gzip
import io
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import xxhash

from .errors import ParseError
from .graph import GraphBuilder, GraphDatabase
from .model import RDF_TYPE

log = logging.getLogger(__name__)

NTRIPLES = "ntriples"
NQUADS = "nquads"


@dataclass(frozen=True)
class Iri:
    value: str

    def nt(self) -> str:
        return "<" + _escape_iri(self.value) + ">"


@dataclass(frozen=True)
class Blank:
    label: str

    def nt(self) -> str:
        return "_:" + self.label


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str | None = None
    lang: str | None = None

    def nt(self) -> str:
        s = '"' + _escape_literal(self.lexical) + '"'
        if self.lang:
            return s + "@" + self.lang
        if self.datatype:
            return s + "^^<" + _escape_iri(self.datatype) + ">"
        return s


class RdfStatement(NamedTuple):
    subject: Iri | Blank
    predicate: Iri
    object: Iri | Blank | Literal
    graph: Iri | Blank | None = None

    def nt(self) -> str:
        parts = [self.subject.nt(), self.predicate.nt(), self.object.nt()]
        if self.graph is not None:
            parts.append(self.graph.nt())
        return " ".join(parts) + " ."


# ---------------------------------------------------------------- escaping

_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_UNESCAPE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))", re.S)


def _unescape(s: str, line: int | None) -> str:
    if "\\" not in s:
        return s

    def sub(m):
        if m.group(1) or m.group(2):
            return chr(int(m.group(1) or m.group(2), 16))
        c = _ECHAR.get(m.group(3))
        if c is None:
            raise ParseError(f"bad escape sequence \\{m.group(3)}", line)
        return c

    return _UNESCAPE.sub(sub, s)


def _escape_literal(s: str) -> str:
    return (s.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r"))


def _escape_iri(s: str) -> str:
    return "".join(c if c > " " and c not in '<>"{}|^`\\' else f"\\u{ord(c):04X}" for c in s)


# ---------------------------------------------------------------- parsing

_IRI = r'<([^<>"{}|^`\x00-\x20]*)>'
_BLANK = r"_:([A-Za-z0-9_](?:[A-Za-z0-9_\-.]*[A-Za-z0-9_\-])?)"
_LIT = r'"((?:[^"\\\n\r]|\\.)*)"(?:@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)|\^\^' + _IRI + r")?"
_TERM = re.compile(r"[ \t]*(?:" + _IRI + "|" + _BLANK + "|" + _LIT + ")")
_END = re.compile(r"[ \t]*\.[ \t]*(?:#.*)?$")
_SKIP = re.compile(r"[ \t]*(?:#.*)?$")


def _term(line: str, pos: int, lineno: int, scope: str | None):
    m = _TERM.match(line, pos)
    if not m:
        raise ParseError(f"expected a term at column {pos + 1}", lineno)
    iri, blank, lex, lang, dt = m.groups()
    if iri is not None:
        t = Iri(_unescape(iri, lineno))
    elif blank is not None:
        t = Blank(blank if scope is None else f"{scope}.{blank}")
    else:
        t = Literal(_unescape(lex, lineno), None if dt is None else _unescape(dt, lineno), lang)
    return t, m.end()


def parse_line(line: str, lineno: int = 0, fmt: str = NQUADS,
               blank_scope: str | None = None) -> RdfStatement | None:
    """Parse one line; ``None`` for blank and comment lines."""
    if _SKIP.match(line):
        return None
    s, pos = _term(line, 0, lineno, blank_scope)
    if isinstance(s, Literal):
        raise ParseError("a literal cannot be a subject", lineno)
    p, pos = _term(line, pos, lineno, blank_scope)
    if not isinstance(p, Iri):
        raise ParseError("the predicate must be an IRI", lineno)
    o, pos = _term(line, pos, lineno, blank_scope)
    g = None
    if not _END.match(line, pos):
        if fmt != NQUADS:
            raise ParseError("unexpected graph term in N-Triples input", lineno)
        g, pos = _term(line, pos, lineno, blank_scope)
        if isinstance(g, Literal):
            raise ParseError("a graph name cannot be a literal", lineno)
        if not _END.match(line, pos):
            raise ParseError("statement must end with '.'", lineno)
    return RdfStatement(s, p, o, g)


@dataclass
class ParseStats:
    lines: int = 0
    statements: int = 0
    errors: list = field(default_factory=list)  # (line number, message)


def _open_binary(source, compression):
    if isinstance(source, (bytes, bytearray)):
        if compression == "auto":
            compression = "gzip" if source[:2] == b"\x1f\x8b" else "none"
        raw = io.BytesIO(source)
    elif isinstance(source, (str, os.PathLike)):
        raw = open(source, "rb")
        if compression == "auto" and str(source).endswith(".gz"):
            compression = "gzip"
    else:
        raw = source
    if compression == "auto":
        # sniff the gzip magic without consuming the stream
        peek = raw.peek(2)[:2] if hasattr(raw, "peek") else b""
        compression = "gzip" if peek == b"\x1f\x8b" else "none"
    if compression == "gzip":
        return gzip.GzipFile(fileobj=raw, mode="rb"), raw
    if compression != "none":
        raise ValueError(f"unknown compression {compression!r}")
    return raw, raw


def parse(source, format: str = NQUADS, compression: str = "auto", *,
          lenient: bool = False, blank_scope: str | None = None,
          stats: ParseStats | None = None) -> Iterator[RdfStatement]:
    """Stream statements from a path, a bytes object or a binary file.

    With ``lenient=True`` malformed lines are skipped and recorded in
    ``stats.errors``; otherwise the first one raises :class:`ParseError`.
    """
    if format not in (NTRIPLES, NQUADS):
        raise ValueError(f"unknown format {format!r}")
    stats = stats if stats is not None else ParseStats()
    stream, raw = _open_binary(source, compression)
    owned = isinstance(source, (str, os.PathLike))
    try:
        text = io.TextIOWrapper(stream, encoding="utf-8", newline=None)
        for lineno, line in enumerate(text, 1):
            stats.lines = lineno
            try:
                st = parse_line(line.rstrip("\r\n"), lineno, format, blank_scope)
            except ParseError as e:
                if not lenient:
                    raise
                stats.errors.append((lineno, str(e)))
                log.debug("skipping %s", e)
                continue
            if st is not None:
                stats.statements += 1
                yield st
    except UnicodeDecodeError as e:
        raise ParseError(f"input is not valid UTF-8: {e.reason}", stats.lines + 1) from None
    finally:
        if owned:
            raw.close()


def serialize(statements: Iterable[RdfStatement], sink=None) -> str | None:
    """Write canonical one-statement-per-line text; returns it when no sink is given."""
    lines = (st.nt() + "\n" for st in statements)
    if sink is None:
        return "".join(lines)
    for ln in lines:
        sink.write(ln)
    return None


def write_file(path, statements: Iterable[RdfStatement]) -> None:
    """Write N-Quads to ``path``; a ``.gz`` suffix gzips it reproducibly."""
    path = str(path)
    if path.endswith(".gz"):
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz, \
                io.TextIOWrapper(gz, encoding="utf-8", newline="\n") as f:
            serialize(statements, f)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            serialize(statements, f)


# ---------------------------------------------------------------- RDF <-> LPG


def term_id(t) -> str:
    """Vertex id of a term: IRIs by value, blanks as ``_:label``, literals
    by their N-Triples form (so equal literals are one vertex)."""
    if isinstance(t, Iri):
        return t.value
    if isinstance(t, Blank):
        return "_:" + t.label
    return t.nt()


def id_term(v: str):
    if v.startswith("_:"):
        return Blank(v[2:])
    if v.startswith('"'):
        st = parse_line(f"<s> <p> {v} .", fmt=NTRIPLES)
        return st.object
    return Iri(v)


def rdf_to_lpg(statements: Iterable[RdfStatement], type_iri: str = RDF_TYPE,
               default_graph: str | None = None) -> GraphDatabase:
    """Types become vertex labels, other predicates edge labels, literals
    vertices with a ``("literal", lexical)`` property, quad graph names
    graph memberships."""
    b = GraphBuilder()
    for st in statements:
        g = term_id(st.graph) if st.graph is not None else default_graph
        s = term_id(st.subject)
        p = st.predicate.value
        if p == type_iri:
            b.add_label(s, term_id(st.object), g)
            continue
        o = term_id(st.object)
        if isinstance(st.object, Literal):
            b.add_property(o, "literal", st.object.lexical, g)
        b.add_edge(s, o, p, g)
    return b.build()


def lpg_to_rdf(gdb: GraphDatabase, type_iri: str = RDF_TYPE) -> Iterator[RdfStatement]:
    """Inverse direction.  Edges with key-value properties are reified
    through a blank vertex ``z``: ``(x, p, z)``, ``(z, p, y)`` plus one
    ``(z, key, "value")`` triple per property.  Graph memberships of
    vertices are not expressible per vertex in RDF and only the
    membership of edges and type statements is emitted."""
    tp = Iri(type_iri)
    graphs_of_edge = {}
    graphs_of_vertex = {}
    for g in gdb.graphs:
        for e in g.edges:
            graphs_of_edge.setdefault(e, []).append(g.name)
        for v in g.vertices:
            graphs_of_vertex.setdefault(v, []).append(g.name)

    def graph_terms(names):
        if not names:
            return [None]
        return [id_term(n) for n in sorted(set(names))]

    for v in sorted(gdb.vertices):
        if v.startswith('"'):
            continue
        subj = id_term(v)
        for c in sorted(gdb.vertex_labels(v)):
            for g in graph_terms(graphs_of_vertex.get(v)):
                yield RdfStatement(subj, tp, id_term(c), g)
        for k, val in sorted(gdb.vertex_properties(v)):
            yield RdfStatement(subj, Iri(k), Literal(val))
    for (x, y) in sorted(gdb.edges):
        labels = sorted(gdb.edge_labels(x, y))
        props = sorted(gdb.edge_properties(x, y))
        gs = graph_terms(graphs_of_edge.get((x, y)))
        sx, oy = id_term(x), id_term(y)
        if not props:
            for p in labels:
                for g in gs:
                    yield RdfStatement(sx, Iri(p), oy, g)
            continue
        z = Blank("z" + _digest(x, y))
        for p in labels:
            for g in gs:
                yield RdfStatement(sx, Iri(p), z, g)
                yield RdfStatement(z, Iri(p), oy, g)
        for k, val in props:
            yield RdfStatement(z, Iri(k), Literal(val))


def _digest(x, y) -> str:
    return xxhash.xxh64_hexdigest(x + "\x00" + y)


def load_gdb(paths, format: str = NQUADS, *, lenient: bool = False, type_iri: str = RDF_TYPE,
             default_graph: str | None = None, stats: ParseStats | None = None) -> GraphDatabase:
    """Parse one or more files into a single GDB.

    Blank nodes of the i-th file are scoped as ``f<i>.<label>`` so the same
    file position yields stable ids across versions.
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    paths = list(paths)

    def stream():
        for i, p in enumerate(paths):
            scope = f"f{i}" if len(paths) > 1 else None
            yield from parse(p, format, lenient=lenient, blank_scope=scope, stats=stats)

    return rdf_to_lpg(stream(), type_iri, default_graph)
