"""Core domain types shared by every engine: keys, timestamps, versions,
transactions, batches and read results.

Timestamps are plain ints (logical log positions). INFINITY is the maximum
unsigned 64-bit value and is never assigned to a transaction, which keeps
visibility checks branch-free.
"""
from __future__ import annotations

import threading

INFINITY = 2**64 - 1

# Transaction execution states. The only legal transitions are
# UNPROCESSED -> EXECUTING -> {COMPLETE | UNPROCESSED}.
UNPROCESSED = 0
EXECUTING = 1
COMPLETE = 2

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 2**64 - 1


def fnv1a64(table: str, key: int) -> int:
    """FNV-1a 64-bit hash over the table name bytes followed by the
    fixed-width (8-byte little-endian) primary key."""
    h = _FNV_OFFSET
    for b in table.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    for b in key.to_bytes(8, "little"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


class RecordKey:
    """Identifies one record: (table, fixed-width primary key).

    The FNV-1a hash is computed once at construction; it doubles as the
    dict hash and as the partitioning hash, so workloads should intern
    their key objects instead of re-creating them per transaction.
    """

    __slots__ = ("table", "key", "_hash")

    def __init__(self, table: str, key: int):
        self.table = table
        self.key = key
        self._hash = fnv1a64(table, key)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self.key == other.key and self.table == other.table

    def __lt__(self, other) -> bool:
        # Total lexicographic order; the 2PL baseline relies on it.
        return (self.table, self.key) < (other.table, other.key)

    def __repr__(self) -> str:
        return f"RecordKey({self.table!r}, {self.key})"


class Version:
    """One record version (metadata plus payload slot).

    Created by a concurrency-control thread as a placeholder: timestamps and
    the prev link are fixed at creation, the payload stays unpublished until
    the producing transaction executes. `published` flips exactly once;
    after that the payload/tombstone fields are immutable and `producer`
    is cleared.
    """

    __slots__ = (
        "begin_ts",
        "end_ts",
        "producer",
        "payload",
        "tombstone",
        "published",
        "prev",
        "poisoned",
    )

    def __init__(self, begin_ts, end_ts, producer=None, prev=None):
        self.begin_ts = begin_ts
        self.end_ts = end_ts
        self.producer = producer
        self.payload = None
        self.tombstone = False
        self.published = False
        self.prev = prev
        self.poisoned = False

    def publish(self, payload, tombstone: bool = False) -> None:
        # Payload before the published flag; producer cleared last so a
        # reader that sees producer=None always sees published=True.
        self.payload = payload
        self.tombstone = tombstone
        self.published = True
        self.producer = None

    def chain(self):
        """Iterate this version and its predecessors (newest first)."""
        v = self
        while v is not None:
            yield v
            v = v.prev

    def __repr__(self) -> str:
        end = "INF" if self.end_ts == INFINITY else self.end_ts
        state = "pub" if self.published else "placeholder"
        return f"Version(begin={self.begin_ts}, end={end}, {state})"


def visible(version: Version, ts: int) -> bool:
    """Raw visibility predicate: begin_ts <= ts <= end_ts.

    At a boundary shared by adjacent versions (old.end_ts == new.begin_ts
    == ts) both match; resolve_read breaks the tie in favour of the old
    version so a transaction reads state as of the instant before its own
    writes.
    """
    return version.begin_ts <= ts <= version.end_ts


class Transaction:
    """A transaction: declared read/write key tuples plus a deterministic
    logic function.

    `logic` receives the resolved read payloads (bytes, or None for a
    missing/deleted record) in read_keys order and returns the new payloads
    in write_keys order, or None to signal a logical abort. All randomness
    lives in workload generation, so logic is a pure function of its reads.

    read_refs / write_refs are slots filled in by the cc layer: write_refs
    always (the installed placeholders), read_refs only when the read-set
    annotation optimization is on.
    """

    __slots__ = (
        "ts",
        "read_keys",
        "write_keys",
        "logic",
        "state",
        "run_lock",
        "read_refs",
        "write_refs",
        "read_digest",
        "n_ops",
        "tag",
    )

    def __init__(self, read_keys, write_keys, logic, n_ops=None, tag=""):
        self.ts = None
        self.read_keys = tuple(read_keys)
        self.write_keys = tuple(write_keys)
        self.logic = logic
        self.state = UNPROCESSED
        self.run_lock = threading.Lock()
        self.read_refs = None
        self.write_refs = [None] * len(self.write_keys)
        self.read_digest = None
        if n_ops is None:
            n_ops = len(set(self.read_keys) | set(self.write_keys))
        self.n_ops = n_ops
        self.tag = tag

    def __repr__(self) -> str:
        return f"Transaction(ts={self.ts}, tag={self.tag!r}, state={self.state})"


def try_acquire(txn: Transaction) -> bool:
    """Atomically move txn from UNPROCESSED to EXECUTING; single winner.

    The winner holds txn.run_lock until it either completes the transaction
    or resets it to UNPROCESSED (deferral), releasing the lock either way.
    """
    lock = txn.run_lock
    if not lock.acquire(blocking=False):
        return False
    if txn.state != UNPROCESSED:
        lock.release()
        return False
    txn.state = EXECUTING
    return True


class Batch:
    """A contiguous, timestamp-dense run of the log: txns[i].ts == base_ts + i.
    The unit of barrier coordination and garbage collection."""

    __slots__ = ("id", "base_ts", "txns")

    def __init__(self, batch_id: int, base_ts: int, txns):
        self.id = batch_id
        self.base_ts = base_ts
        self.txns = txns

    def __len__(self) -> int:
        return len(self.txns)

    def __repr__(self) -> str:
        return f"Batch(id={self.id}, base_ts={self.base_ts}, n={len(self.txns)})"


class ReadResult:
    """Outcome of a point read: a payload, or NotFound.

    NotFound is returned exactly when no version is visible at the read
    timestamp or the visible version is a tombstone.
    """

    __slots__ = ("payload", "found")

    def __init__(self, payload, found: bool):
        self.payload = payload
        self.found = found

    def __eq__(self, other) -> bool:
        return self.found == other.found and self.payload == other.payload

    def __repr__(self) -> str:
        return f"ReadResult({self.payload!r})" if self.found else "ReadResult(NotFound)"


NOT_FOUND = ReadResult(None, False)


class Instrumentation:
    """Debug-build counters and assertions; every hook is gated on `enabled`.

    - read_mutations: shared-structure mutations observed while the calling
      thread is inside read resolution (must stay 0).
    - key_writers: writer-thread constancy per record key (single-writer rule).
    - poisoned_reads: accesses to reclaimed versions (must stay 0).
    """

    def __init__(self, enabled: bool = False):
        self.enabled = enabled
        self.read_mutations = 0
        self.poisoned_reads = 0
        self.key_writers = {}
        self._tl = threading.local()

    def enter_read(self):
        self._tl.in_read = True

    def exit_read(self):
        self._tl.in_read = False

    def note_shared_mutation(self):
        if getattr(self._tl, "in_read", False):
            self.read_mutations += 1

    def check_key_writer(self, key):
        me = threading.get_ident()
        owner = self.key_writers.setdefault(key, me)
        if owner != me:
            raise AssertionError(
                f"single-writer violation on {key!r}: thread {me} vs owner {owner}"
            )

    def check_not_poisoned(self, version):
        if version is not None and version.poisoned:
            self.poisoned_reads += 1
            raise AssertionError(f"access to reclaimed version {version!r}")
