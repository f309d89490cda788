"""Table catalog and per-table hash indexes mapping keys to version-chain heads.

Indexes are backed by plain dicts: CPython dict reads and single-key stores
are GIL-consistent, which gives the multi-reader / single-writer-per-key
contract directly (each key's entry is only ever stored by its owning cc
thread). Readers never observe a torn head because a head swap is one
reference store.
"""
from __future__ import annotations

from .core import INFINITY, NOT_FOUND, ReadResult, Version
from .errors import DuplicateKey


class TableIndex:
    """Hash index: RecordKey -> head version of the record's chain."""

    def __init__(self, name: str, record_size: int = 0):
        self.name = name
        self.record_size = record_size
        self._heads = {}

    def get(self, key):
        """Current head version, or None for an absent key. No shared mutation."""
        return self._heads.get(key)

    def install(self, key, version, instr=None) -> None:
        """Point the bucket entry at `version`. Caller must be the key's
        owning cc thread; the prior head stays reachable via version.prev."""
        if instr is not None and instr.enabled:
            instr.note_shared_mutation()
            instr.check_key_writer(key)
        self._heads[key] = version

    def keys(self):
        return self._heads.keys()

    def items(self):
        return self._heads.items()

    def __len__(self) -> int:
        return len(self._heads)

    def read_at(self, key, ts: int) -> ReadResult:
        """Point-in-time read against published versions: the value visible
        at `ts` (reads exclude versions created at `ts` itself, matching the
        boundary tie-break), or NotFound for absent keys and tombstones.
        Raises if the visible version is still an unpublished placeholder."""
        v = self._heads.get(key)
        while v is not None and v.begin_ts >= ts:
            v = v.prev
        if v is None:
            return NOT_FOUND
        if not v.published:
            raise RuntimeError(f"version at ts={ts} for {key!r} is unpublished")
        if v.tombstone:
            return NOT_FOUND
        return ReadResult(v.payload, True)


class Catalog:
    """Named tables for one run. Load everything before starting an engine."""

    def __init__(self):
        self.tables: dict[str, TableIndex] = {}

    def create_table(self, name: str, record_size: int = 0) -> TableIndex:
        idx = TableIndex(name, record_size)
        self.tables[name] = idx
        return idx

    def load_table(self, name: str, keys, payloads, record_size: int = 0) -> None:
        """Bulk-load `keys` with `payloads` as published initial versions
        (begin_ts=0, end_ts=INFINITY, no producer). Run timestamps start at 1,
        so loaded data is visible to every transaction."""
        idx = self.tables.get(name)
        if idx is None:
            idx = self.create_table(name, record_size)
        heads = idx._heads
        for key, payload in zip(keys, payloads):
            if key in heads:
                raise DuplicateKey(f"{key!r} loaded twice into table {name!r}")
            v = Version(0, INFINITY)
            v.publish(payload)
            heads[key] = v

    def state_items(self):
        """Iterate (table, key, payload) for the latest visible state, in
        deterministic sorted order. Tombstoned records are omitted."""
        for name in sorted(self.tables):
            idx = self.tables[name]
            for key in sorted(idx.keys()):
                head = idx.get(key)
                if head is not None and head.published and not head.tombstone:
                    yield name, key.key, head.payload
