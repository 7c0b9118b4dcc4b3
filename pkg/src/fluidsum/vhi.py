"""VertexUpdateHashIndex: links between data vertices and stored summaries.

``l1`` maps a summary hash to the set of vertices it summarizes, ``l2``
maps a vertex to its :class:`L2Entry`.  The entry also holds the vertex's
payload contribution, so no separate third layer is needed.

Each layer has its own lock; a link mutation takes both (always l2 first,
then l1) so no reader can observe one layer updated without the other.
"""

from __future__ import annotations

import gzip
import io
import struct
import threading
from typing import Iterator, NamedTuple

from .errors import ConflictError, IntegrityError, NotFoundError
from .payload import COUNT, KINDS, PayloadElement

VHI_MAGIC = b"FVHI"
VHI_VERSION = 1

# fixed cost model for memory_stats (bytes)
REF_BYTES = 8      # one pointer / vertex reference
HASH_BYTES = 16    # one 128-bit summary digest
ENTRY_BYTES = 16   # per hash-table slot overhead


class L2Entry(NamedTuple):
    summary: bytes
    contribution: PayloadElement


class VertexUpdateHashIndex:
    def __init__(self, payload_kind: str = COUNT):
        if payload_kind not in KINDS:
            raise ValueError(f"unknown payload kind {payload_kind!r}")
        self.payload_kind = payload_kind
        self.l1: dict = {}
        self.l2: dict = {}
        self._l1_lock = threading.RLock()
        self._l2_lock = threading.RLock()

    # ------------------------------------------------------------ lookups

    def contains_link(self, v) -> bool:
        return v in self.l2

    def get_link(self, v) -> bytes:
        return self.get_entry(v).summary

    def get_entry(self, v) -> L2Entry:
        try:
            return self.l2[v]
        except KeyError:
            raise NotFoundError(f"vertex {v!r} is not linked") from None

    def get_links(self, h: bytes) -> set:
        with self._l1_lock:
            return set(self.l1.get(h, ()))

    def get_all_summarized(self) -> Iterator:
        with self._l2_lock:
            return iter(list(self.l2))

    def __len__(self) -> int:
        return len(self.l2)

    # ------------------------------------------------------------ mutation

    def add_link(self, v, h: bytes, contribution: PayloadElement) -> None:
        if contribution.kind != self.payload_kind:
            raise IntegrityError(f"contribution kind {contribution.kind} does not match {self.payload_kind}")
        with self._l2_lock, self._l1_lock:
            if v in self.l2:
                raise ConflictError(f"vertex {v!r} is already linked")
            self.l2[v] = L2Entry(h, contribution)
            s = self.l1.get(h)
            if s is None:
                self.l1[h] = {v}
            else:
                s.add(v)

    def remove_link(self, v) -> tuple:
        """Unlink ``v``; returns ``(old hash, True if nothing links to it any more)``."""
        with self._l2_lock, self._l1_lock:
            e = self.l2.pop(v, None)
            if e is None:
                raise NotFoundError(f"vertex {v!r} is not linked")
            s = self.l1[e.summary]
            s.discard(v)
            orphaned = not s
            if orphaned:
                del self.l1[e.summary]
            return e.summary, orphaned

    def set_contribution(self, v, contribution: PayloadElement) -> PayloadElement:
        """Replace the stored contribution of a linked vertex, returning the old one."""
        with self._l2_lock:
            e = self.get_entry(v)
            self.l2[v] = L2Entry(e.summary, contribution)
            return e.contribution

    # ------------------------------------------------------------ integrity

    def check(self) -> None:
        n = 0
        for h, vs in self.l1.items():
            if not vs:
                raise IntegrityError(f"empty link set for {h.hex()}")
            for v in vs:
                e = self.l2.get(v)
                if e is None or e.summary != h:
                    raise IntegrityError(f"l1 link {h.hex()} -> {v!r} has no matching l2 entry")
            n += len(vs)
        if n != len(self.l2):
            raise IntegrityError("l2 has entries without an l1 link")

    def canonical_equal(self, other: VertexUpdateHashIndex) -> bool:
        return self.payload_kind == other.payload_kind and self.l2 == other.l2

    def memory_stats(self) -> dict:
        """Entry counts plus a fixed cost estimate.

        l1: per hash an entry, the digest and a set slot per linked vertex.
        l2: per vertex an entry, a vertex reference, the digest, and the
        contribution (one reference per item, plus one for the count).
        """
        l1_bytes = sum(ENTRY_BYTES + HASH_BYTES + ENTRY_BYTES * len(vs) for vs in self.l1.values())
        l2_bytes = sum(ENTRY_BYTES + REF_BYTES + HASH_BYTES + REF_BYTES * (1 + len(e.contribution.items))
                       for e in self.l2.values())
        return {"l1_entries": len(self.l1), "l2_entries": len(self.l2),
                "approx_bytes": l1_bytes + l2_bytes}

    def debug_dump(self) -> dict:
        return {h.hex(): sorted(vs) for h, vs in sorted(self.l1.items())}

    # ------------------------------------------------------------ persistence

    def to_bytes(self) -> bytes:
        """``FVHI`` + u16 version + payload kind, then one record per vertex in
        sorted order: vertex id, digest, count, items.  Gzipped with a fixed
        mtime so equal indexes give equal bytes."""
        buf = io.BytesIO()
        buf.write(VHI_MAGIC + struct.pack(">H", VHI_VERSION))
        _put_str(buf, self.payload_kind)
        buf.write(struct.pack(">Q", len(self.l2)))
        for v in sorted(self.l2):
            e = self.l2[v]
            _put_str(buf, v)
            buf.write(e.summary)
            buf.write(struct.pack(">QI", e.contribution.count, len(e.contribution.items)))
            for x in sorted(e.contribution.items):
                _put_str(buf, x)
        return gzip.compress(buf.getvalue(), mtime=0)

    def persist(self, sink) -> None:
        data = self.to_bytes()
        if hasattr(sink, "write"):
            sink.write(data)
        else:
            with open(sink, "wb") as f:
                f.write(data)

    @classmethod
    def from_bytes(cls, data: bytes) -> VertexUpdateHashIndex:
        try:
            raw = gzip.decompress(data)
        except (OSError, EOFError) as e:
            raise IntegrityError(f"corrupt index file: {e}", 0) from None
        r = _Reader(raw)
        if r.take(4) != VHI_MAGIC:
            raise IntegrityError("bad magic, not an index file", 0)
        (version,) = r.unpack(">H")
        if version != VHI_VERSION:
            raise IntegrityError(f"unsupported index version {version}", 4)
        kind = r.string()
        if kind not in KINDS:
            raise IntegrityError(f"unknown payload kind {kind!r}", r.pos)
        vhi = cls(kind)
        (n,) = r.unpack(">Q")
        prev = None
        for _ in range(n):
            at = r.pos
            v = r.string()
            if prev is not None and v <= prev:
                raise IntegrityError("records out of order", at)
            prev = v
            h = r.take(16)
            count, m = r.unpack(">QI")
            items = frozenset(r.string() for _ in range(m))
            try:
                pe = PayloadElement(kind, count, items)
            except IntegrityError as e:
                raise IntegrityError(str(e), at) from None
            vhi.l2[v] = L2Entry(h, pe)
            vhi.l1.setdefault(h, set()).add(v)
        if r.pos != len(raw):
            raise IntegrityError("trailing bytes after last record", r.pos)
        return vhi

    @classmethod
    def load(cls, source) -> VertexUpdateHashIndex:
        if hasattr(source, "read"):
            return cls.from_bytes(source.read())
        with open(source, "rb") as f:
            return cls.from_bytes(f.read())


def _put_str(buf, s: str) -> None:
    b = s.encode("utf-8")
    buf.write(struct.pack(">I", len(b)) + b)


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise IntegrityError("unexpected end of index file", self.pos)
        b = self.raw[self.pos:self.pos + n]
        self.pos += n
        return b

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        at = self.pos
        (n,) = self.unpack(">I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise IntegrityError("invalid UTF-8 in record", at) from None
