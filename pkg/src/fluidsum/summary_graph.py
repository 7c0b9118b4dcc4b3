"""The summary graph: deduplicated vertex summaries plus their payloads.

Primary vertices (one per stored summary) live in ``elements``.  Every
node below a primary is a secondary vertex kept once in a content-addressed
pool with a reference count equal to the number of distinct stored nodes
(primaries or other secondaries) pointing at it, so removing a summary
frees exactly the part of its tree nobody else uses.

Mutation counters distinguish structural updates (primary/secondary
vertices and summary edges) from payload updates.
"""

from __future__ import annotations

import gzip
import io
import json
import struct
import threading
from dataclasses import dataclass

from .concurrency import StripedLock
from .errors import ConflictError, IntegrityError, NotFoundError
from .model import VertexSummary
from .payload import COUNT, PayloadAccumulator, PayloadElement

SG_MAGIC = b"FLSG"
SG_VERSION = 1


@dataclass(frozen=True)
class SummaryStats:
    num_primary: int = 0
    num_secondary: int = 0
    num_vs_edges: int = 0
    num_payload_elements: int = 0


class StoredSummary:
    __slots__ = ("hash", "tree", "acc")

    def __init__(self, tree: VertexSummary, acc: PayloadAccumulator):
        self.hash = tree.digest
        self.tree = tree
        self.acc = acc

    @property
    def payload(self) -> PayloadElement:
        return self.acc.value()


class SummaryGraph:
    """In-process SG store.

    Calls on distinct hashes may run concurrently; calls on the same hash
    are serialized by a striped lock, and the shared secondary pool has
    its own lock.
    """

    def __init__(self, payload_kind: str = COUNT, paranoid: bool = False):
        self.payload_kind = payload_kind
        self.paranoid = paranoid
        self.elements: dict = {}
        self.secondary_pool: dict = {}  # digest -> [node, refcount]
        self.update_ops = 0
        self.payload_ops = 0
        self._keys = StripedLock()
        self._pool_lock = threading.Lock()

    # ------------------------------------------------------------ queries

    def contains_element(self, h: bytes) -> bool:
        return h in self.elements

    def __contains__(self, h) -> bool:
        return h in self.elements

    def __len__(self) -> int:
        return len(self.elements)

    def get(self, h: bytes) -> StoredSummary:
        try:
            return self.elements[h]
        except KeyError:
            raise NotFoundError(f"no summary with hash {h.hex()}") from None

    def payload(self, h: bytes) -> PayloadElement:
        return self.get(h).payload

    def refcount(self, h: bytes) -> int:
        e = self.secondary_pool.get(h)
        return 0 if e is None else e[1]

    def stats(self) -> SummaryStats:
        edges = sum(len(e.tree.children) for e in self.elements.values())
        edges += sum(len(n.children) for n, _ in self.secondary_pool.values())
        return SummaryStats(len(self.elements), len(self.secondary_pool), edges, len(self.elements))

    def is_empty(self) -> bool:
        return not self.elements and not self.secondary_pool

    # ------------------------------------------------------------ mutation

    def add_element(self, vs: VertexSummary, pe: PayloadElement) -> None:
        h = vs.digest
        if pe.kind != self.payload_kind:
            raise IntegrityError(f"payload kind {pe.kind} does not match SG kind {self.payload_kind}")
        with self._keys.hold(h):
            if h in self.elements:
                raise ConflictError(f"summary {h.hex()} already stored; use update_payload")
            acc = PayloadAccumulator(self.payload_kind)
            acc.add(pe)
            with self._pool_lock:
                ops = 1 + len(vs.children)
                for c in vs.distinct_children():
                    ops += self._incref(c)
                self.update_ops += ops
                self.payload_ops += 1
            self.elements[h] = StoredSummary(vs, acc)

    def remove_element(self, h: bytes) -> None:
        with self._keys.hold(h):
            e = self.elements.pop(h, None)
            if e is None:
                raise NotFoundError(f"no summary with hash {h.hex()}")
            with self._pool_lock:
                ops = 1 + len(e.tree.children)
                for c in e.tree.distinct_children():
                    ops += self._decref(c)
                self.update_ops += ops
                self.payload_ops += 1

    def update_payload(self, h: bytes, contribution: PayloadElement, mode: str = "merge") -> None:
        with self._keys.hold(h):
            e = self.elements.get(h)
            if e is None:
                raise NotFoundError(f"no summary with hash {h.hex()}")
            if mode == "merge":
                e.acc.add(contribution)
            elif mode == "unmerge":
                e.acc.remove(contribution)
            else:
                raise ValueError(f"mode must be merge or unmerge, not {mode!r}")
            with self._pool_lock:
                self.payload_ops += 1

    def verify(self, vs: VertexSummary) -> None:
        """Paranoid check that a stored summary with the same digest is the same tree."""
        e = self.elements.get(vs.digest)
        if e is not None and e.tree is not vs and e.tree.canonical_bytes() != vs.canonical_bytes():
            raise IntegrityError(f"hash collision on {vs.hex}: trees differ")

    def _incref(self, node: VertexSummary) -> int:
        # returns the number of structural additions (new vertices and edges)
        ent = self.secondary_pool.get(node.digest)
        if ent is not None:
            if self.paranoid and ent[0].canonical_bytes() != node.canonical_bytes():
                raise IntegrityError(f"hash collision on secondary {node.hex}")
            ent[1] += 1
            return 0
        self.secondary_pool[node.digest] = [node, 1]
        ops = 1 + len(node.children)
        for c in node.distinct_children():
            ops += self._incref(c)
        return ops

    def _decref(self, node: VertexSummary) -> int:
        ent = self.secondary_pool.get(node.digest)
        if ent is None:
            raise IntegrityError(f"secondary {node.hex} missing from pool")
        ent[1] -= 1
        if ent[1]:
            return 0
        del self.secondary_pool[node.digest]
        ops = 1 + len(node.children)
        for c in node.distinct_children():
            ops += self._decref(c)
        return ops

    def reset_counters(self) -> None:
        self.update_ops = 0
        self.payload_ops = 0

    # ------------------------------------------------------------ integrity

    def check(self) -> None:
        """Recount every reference by full traversal; raise on any mismatch."""
        expected = {}
        for h, e in self.elements.items():
            if e.tree.digest != h:
                raise IntegrityError(f"element stored under wrong hash {h.hex()}")
            if e.acc.kind != self.payload_kind:
                raise IntegrityError(f"element {h.hex()} has a {e.acc.kind} payload")
            for c in e.tree.distinct_children():
                expected[c.digest] = expected.get(c.digest, 0) + 1
        for d, (node, _) in self.secondary_pool.items():
            for c in node.distinct_children():
                if c.digest not in self.secondary_pool and c.digest not in self.elements:
                    raise IntegrityError(f"child {c.hex} of {node.hex} does not resolve")
                expected[c.digest] = expected.get(c.digest, 0) + 1
        actual = {d: rc for d, (_, rc) in self.secondary_pool.items()}
        if expected != actual:
            raise IntegrityError("secondary reference counts do not match a full recount")

    # ------------------------------------------------------------ export

    def to_json(self) -> dict:
        elements = []
        for h in sorted(self.elements):
            e = self.elements[h]
            rec = {"hash": h.hex(), "tree": e.tree.to_json(), "payload": e.payload.to_json()}
            if e.acc.kind != COUNT:
                rec["multiplicity"] = sorted([k, n] for k, n in e.acc.items.items())
            elements.append(rec)
        secondaries = [{"hash": d.hex(), "refcount": self.secondary_pool[d][1]}
                       for d in sorted(self.secondary_pool)]
        return {"format": "fluidsum-sg", "version": SG_VERSION, "payload_kind": self.payload_kind,
                "elements": elements, "secondaries": secondaries}

    def export_bytes(self) -> bytes:
        """Canonical JSON export; two SGs are equal iff these bytes are."""
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False).encode("utf-8")

    def canonical_equal(self, other: SummaryGraph) -> bool:
        return self.export_bytes() == other.export_bytes()

    @classmethod
    def from_json(cls, obj, paranoid: bool = False) -> SummaryGraph:
        if obj.get("format") != "fluidsum-sg" or obj.get("version") != SG_VERSION:
            raise IntegrityError("not a fluidsum summary graph export")
        sg = cls(obj["payload_kind"], paranoid)
        for rec in obj["elements"]:
            tree = VertexSummary.from_json(rec["tree"])
            if tree.hex != rec["hash"]:
                raise IntegrityError(f"element {rec['hash']} does not match its tree")
            pe = PayloadElement.from_json(rec["payload"])
            acc = PayloadAccumulator(sg.payload_kind)
            acc.count = pe.count
            for k, n in rec.get("multiplicity", ()):
                acc.items[k] = n
            if frozenset(acc.items) != pe.items:
                raise IntegrityError(f"element {rec['hash']} has inconsistent multiplicities")
            with sg._pool_lock:
                for c in tree.distinct_children():
                    sg._incref(c)
            sg.elements[tree.digest] = StoredSummary(tree, acc)
        pool = {rec["hash"]: rec["refcount"] for rec in obj.get("secondaries", ())}
        if pool != {d.hex(): rc for d, (_, rc) in sg.secondary_pool.items()}:
            raise IntegrityError("secondary pool in export does not match the stored trees")
        return sg

    def write_json(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.export_bytes())

    @classmethod
    def read_json(cls, path) -> SummaryGraph:
        with open(path, "rb") as f:
            try:
                obj = json.loads(f.read().decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise IntegrityError(f"unreadable summary graph export: {e}") from None
        return cls.from_json(obj)

    def to_binary(self) -> bytes:
        """Gzipped container: magic, u16 version, then u32-length-prefixed
        canonical records (one per element, sorted by hash)."""
        buf = io.BytesIO()
        buf.write(SG_MAGIC + struct.pack(">H", SG_VERSION))
        obj = self.to_json()
        head = json.dumps({"payload_kind": obj["payload_kind"], "secondaries": obj["secondaries"]},
                          sort_keys=True, separators=(",", ":")).encode("utf-8")
        buf.write(struct.pack(">I", len(head)) + head)
        for rec in obj["elements"]:
            b = json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
            buf.write(struct.pack(">I", len(b)) + b)
        return gzip.compress(buf.getvalue(), mtime=0)

    @classmethod
    def from_binary(cls, data: bytes) -> SummaryGraph:
        try:
            raw = gzip.decompress(data)
        except (OSError, EOFError) as e:
            raise IntegrityError(f"corrupt summary graph container: {e}", 0) from None
        if raw[:4] != SG_MAGIC:
            raise IntegrityError("bad magic in summary graph container", 0)
        if len(raw) < 6 or struct.unpack(">H", raw[4:6])[0] != SG_VERSION:
            raise IntegrityError("unsupported summary graph container version", 4)
        pos = 6
        records = []
        while pos < len(raw):
            if pos + 4 > len(raw):
                raise IntegrityError("truncated record length", pos)
            (n,) = struct.unpack(">I", raw[pos:pos + 4])
            if pos + 4 + n > len(raw):
                raise IntegrityError("truncated record", pos)
            try:
                records.append(json.loads(raw[pos + 4:pos + 4 + n].decode("utf-8")))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise IntegrityError("malformed record", pos) from None
            pos += 4 + n
        if not records:
            raise IntegrityError("missing header record", 6)
        head = records[0]
        return cls.from_json({"format": "fluidsum-sg", "version": SG_VERSION,
                              "payload_kind": head["payload_kind"],
                              "secondaries": head["secondaries"], "elements": records[1:]})


def diff(a: SummaryGraph, b: SummaryGraph) -> list:
    """Element-level differences as ``(what, hash hex, detail)`` tuples;
    empty iff the two graphs are canonically equal."""
    out = []
    if a.payload_kind != b.payload_kind:
        out.append(("payload_kind", "", f"{a.payload_kind} != {b.payload_kind}"))
    for h in sorted(a.elements.keys() - b.elements.keys()):
        out.append(("only_in_a", h.hex(), ""))
    for h in sorted(b.elements.keys() - a.elements.keys()):
        out.append(("only_in_b", h.hex(), ""))
    for h in sorted(a.elements.keys() & b.elements.keys()):
        pa, pb = a.elements[h], b.elements[h]
        if pa.payload != pb.payload or pa.acc.items != pb.acc.items:
            out.append(("payload", h.hex(), f"{pa.payload.to_json()} != {pb.payload.to_json()}"))
    if not out and a.export_bytes() != b.export_bytes():
        out.append(("secondaries", "", "secondary pools differ"))
    return out
