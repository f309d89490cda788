"""Serial-replay oracle.

Every engine must produce exactly the state (and per-transaction read
values) of executing its transaction log serially in its serialization
order: timestamp order for the multi-versioned engine, recorded commit order
for the baselines. Transaction logic is deterministic, so replaying over a
plain dict is an exact oracle, not an approximation.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass


class DictStore:
    """Flat key -> payload map implementing the bulk-load protocol; the
    replay substrate."""

    def __init__(self):
        self.state = {}

    def load_table(self, name, keys, payloads, record_size: int = 0) -> None:
        state = self.state
        for k, p in zip(keys, payloads):
            state[k] = p

    def state_items(self):
        for key in sorted(self.state, key=lambda k: (k.table, k.key)):
            p = self.state[key]
            if p is not None:
                yield key.table, key.key, p


def serial_replay(initial_state: dict, txns):
    """Run txns in the given order over a copy of initial_state.

    Returns (final_state, read_digests) where read_digests[i] matches the
    engine-recorded txn.read_digest for txns[i]. A logic() returning None
    (logical abort) writes nothing, which is exactly what copy-forward
    publication looks like to every later reader.
    """
    state = dict(initial_state)
    get = state.get
    digests = []
    for t in txns:
        vals = [get(k) for k in t.read_keys]
        digests.append(hash(tuple(vals)))
        outs = t.logic(vals)
        if outs is not None:
            for k, p in zip(t.write_keys, outs):
                state[k] = p
    return state, digests


def state_digest(items) -> str:
    """Stable digest over (table, key, payload) triples; the caller supplies
    them in deterministic sorted order. Identical across processes."""
    h = hashlib.blake2b(digest_size=16)
    for table, key, payload in items:
        h.update(table.encode("utf-8"))
        h.update(key.to_bytes(8, "little"))
        h.update(payload)
    return h.hexdigest()


def dict_state_items(state: dict):
    """Deterministic (table, key, payload) view of a replay dict; None
    payloads (deleted records) are omitted, matching tombstone semantics."""
    for key in sorted(state, key=lambda k: (k.table, k.key)):
        p = state[key]
        if p is not None:
            yield key.table, key.key, p


@dataclass
class VerifyResult:
    ok: bool
    engine_digest: str
    replay_digest: str
    txns_checked: int
    first_read_mismatch: int | None  # index into the serialization order

    def summary(self) -> str:
        if self.ok:
            return (
                f"verify OK: {self.txns_checked} txns, "
                f"state digest {self.engine_digest}"
            )
        parts = [f"verify FAILED over {self.txns_checked} txns"]
        if self.engine_digest != self.replay_digest:
            parts.append(
                f"state digest engine={self.engine_digest} replay={self.replay_digest}"
            )
        if self.first_read_mismatch is not None:
            parts.append(f"first read mismatch at position {self.first_read_mismatch}")
        return "; ".join(parts)


def verify(initial_state: dict, txns_in_order, engine_state_items) -> VerifyResult:
    """Replay txns serially and diff both the final state and every recorded
    read digest against the engine's results."""
    final, digests = serial_replay(initial_state, txns_in_order)
    replay_digest = state_digest(dict_state_items(final))
    engine_digest = state_digest(engine_state_items)
    mismatch = None
    for i, (t, d) in enumerate(zip(txns_in_order, digests)):
        if t.read_digest != d:
            mismatch = i
            break
    ok = engine_digest == replay_digest and mismatch is None
    return VerifyResult(ok, engine_digest, replay_digest, len(digests), mismatch)
