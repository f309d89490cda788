"""Single-versioned comparison engines behind the same submit/drain interface
as the multi-versioned engine: deadlock-free two-phase locking and Silo-style
optimistic concurrency control. Both update records in place and run k worker
threads pulling transactions from a shared queue.

Serialization orders for the replay oracle: 2PL records its commit order
while all locks are still held (conflicting transactions therefore appear in
dependency order); OCC records it at the validation point while the write
locks are held.
"""
from __future__ import annotations

import queue
import threading
import time

from .engine import pin_current_thread

_FREE, _SHARED, _EXCLUSIVE = 0, 1, 2


class LockEntry:
    """One record's lock: mode, holder count, FIFO waiter queue."""

    __slots__ = ("mode", "holders", "waiters")

    def __init__(self):
        self.mode = _FREE
        self.holders = 0
        self.waiters = []


class LockTable:
    """Hash table of per-record lock entries with per-bucket latches.

    Entries are created by prepare() before a transaction's first
    acquisition and are never deallocated, so no allocation happens while
    any lock is held. Locks must be acquired in lexicographic key order
    (the callers' job), which makes waiting deadlock-free; waiters are
    queued FIFO and granted cooperatively on release.
    """

    def __init__(self, stripes: int = 64):
        if stripes & (stripes - 1):
            raise ValueError("stripes must be a power of two")
        self._mask = stripes - 1
        self._latches = [threading.Lock() for _ in range(stripes)]
        self._entries: dict = {}
        self._entries_lock = threading.Lock()

    def _latch(self, key):
        return self._latches[key._hash & self._mask]

    def prepare(self, keys) -> None:
        """Pre-allocate lock entries for every key the transaction touches."""
        entries = self._entries
        missing = [k for k in keys if k not in entries]
        if missing:
            with self._entries_lock:
                for k in missing:
                    if k not in entries:
                        entries[k] = LockEntry()

    def acquire(self, key, exclusive: bool) -> None:
        latch = self._latch(key)
        with latch:
            e = self._entries[key]
            if exclusive:
                if e.mode == _FREE and not e.waiters:
                    e.mode = _EXCLUSIVE
                    e.holders = 1
                    return
            else:
                # FIFO fairness: readers do not overtake queued writers.
                if e.mode != _EXCLUSIVE and not e.waiters:
                    e.mode = _SHARED
                    e.holders += 1
                    return
            ev = threading.Event()
            e.waiters.append((ev, exclusive))
        ev.wait()

    def release(self, key, exclusive: bool) -> None:
        latch = self._latch(key)
        with latch:
            e = self._entries[key]
            e.holders -= 1
            if e.holders == 0:
                e.mode = _FREE
            # Cooperative handoff: grant the FIFO head (and, for readers,
            # the whole shared prefix).
            while e.waiters:
                ev, want_x = e.waiters[0]
                if want_x:
                    if e.mode != _FREE:
                        break
                    e.mode = _EXCLUSIVE
                    e.holders = 1
                    e.waiters.pop(0)
                    ev.set()
                    break
                if e.mode == _EXCLUSIVE:
                    break
                e.mode = _SHARED
                e.holders += 1
                e.waiters.pop(0)
                ev.set()

    def held_count(self) -> int:
        """Census of currently granted locks (0 at quiescence)."""
        return sum(e.holders for e in self._entries.values())


class SingleVersionStore:
    """In-place record slots for the 2PL engine."""

    def __init__(self):
        self.slots: dict = {}
        self.record_sizes: dict[str, int] = {}

    def load_table(self, name, keys, payloads, record_size: int = 0) -> None:
        self.record_sizes[name] = record_size
        slots = self.slots
        for k, p in zip(keys, payloads):
            slots[k] = p

    def state_items(self):
        for key in sorted(self.slots, key=lambda k: (k.table, k.key)):
            p = self.slots[key]
            if p is not None:
                yield key.table, key.key, p


class _BaselineEngine:
    """Shared worker-pool plumbing for the single-version engines."""

    name = "baseline"

    def __init__(self, workers: int = 1, record_order: bool = True, pin_threads: bool = True):
        if workers < 1:
            raise ValueError("need at least one worker")
        self.n_workers = workers
        self.record_order = record_order
        self.pin_threads = pin_threads
        self.queue = queue.Queue(maxsize=4096)
        self.commit_log: list = []
        self._order_lock = threading.Lock()
        self.committed_per_worker = [0] * workers
        self.ops_per_worker = [0] * workers
        self.retries_per_worker = [0] * workers
        self.logical_aborts = 0
        self._threads: list[threading.Thread] = []
        self._failures: list[BaseException] = []
        self._drained = False

    def _worker_main(self, widx: int):
        if self.pin_threads:
            pin_current_thread(widx)
        try:
            while True:
                txn = self.queue.get()
                if txn is None:
                    break
                self.execute_txn(txn, widx)
        except BaseException as exc:
            self._failures.append(exc)
            try:
                self.queue.put_nowait(None)
            except queue.Full:
                pass

    def execute_txn(self, txn, widx: int) -> None:
        raise NotImplementedError

    def start(self) -> None:
        for i in range(self.n_workers):
            t = threading.Thread(
                target=self._worker_main, args=(i,), name=f"{self.name}-worker-{i}"
            )
            t.start()
            self._threads.append(t)

    def submit(self, txn) -> None:
        self.queue.put(txn)

    def drain(self) -> None:
        if self._drained:
            return
        self._drained = True
        for _ in self._threads:
            self.queue.put(None)
        for t in self._threads:
            t.join()
        if self._failures:
            raise RuntimeError("worker failed") from self._failures[0]

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc, tb):
        try:
            self.drain()
        except Exception:
            if exc_type is None:
                raise
        return False

    @property
    def committed(self) -> int:
        return sum(self.committed_per_worker)

    @property
    def committed_ops(self) -> int:
        return sum(self.ops_per_worker)

    @property
    def retries(self) -> int:
        return sum(self.retries_per_worker)


class TwoPLEngine(_BaselineEngine):
    """Deadlock-free two-phase locking: shared locks for read-only keys,
    exclusive for write keys, all acquired in lexicographic order and held to
    commit. Never aborts for concurrency reasons."""

    name = "2pl"

    def __init__(self, workers: int = 1, record_order: bool = True, pin_threads: bool = True):
        super().__init__(workers, record_order, pin_threads)
        self.store = SingleVersionStore()
        self.locks = LockTable()

    def load(self, workload) -> None:
        workload.load(self.store)

    def execute_txn(self, txn, widx: int) -> None:
        write_set = frozenset(txn.write_keys)
        lock_keys = sorted(set(txn.read_keys) | write_set)
        locks = self.locks
        locks.prepare(lock_keys)
        for k in lock_keys:
            locks.acquire(k, k in write_set)
        try:
            slots = self.store.slots
            vals = [slots.get(k) for k in txn.read_keys]
            txn.read_digest = hash(tuple(vals))
            outs = txn.logic(vals)
            if outs is None:
                self.logical_aborts += 1
            else:
                for k, p in zip(txn.write_keys, outs):
                    slots[k] = p
            if self.record_order:
                # While every lock is still held: conflicting transactions
                # land in the log in dependency order.
                with self._order_lock:
                    self.commit_log.append(txn)
        finally:
            for k in lock_keys:
                locks.release(k, k in write_set)
        self.committed_per_worker[widx] += 1
        self.ops_per_worker[widx] += txn.n_ops


class OccSlot:
    """One record for the OCC engine: `current` is an immutable (tid,
    payload) pair swapped in a single store; `lock` is held only during
    validation/install of writers."""

    __slots__ = ("current", "lock")

    def __init__(self, payload):
        self.current = (0, payload)
        self.lock = threading.Lock()


class OccStore:
    def __init__(self):
        self.slots: dict = {}
        self.record_sizes: dict[str, int] = {}

    def load_table(self, name, keys, payloads, record_size: int = 0) -> None:
        self.record_sizes[name] = record_size
        slots = self.slots
        for k, p in zip(keys, payloads):
            slots[k] = OccSlot(p)

    def state_items(self):
        for key in sorted(self.slots, key=lambda k: (k.table, k.key)):
            p = self.slots[key].current[1]
            if p is not None:
                yield key.table, key.key, p


_TID_EPOCH_SHIFT = 40


class OccEngine(_BaselineEngine):
    """Silo-style OCC: buffered writes, per-record tid validation, commit ids
    from per-worker decentralized counters embedded in a coarse epoch (no
    global shared counter). Validation failures back off exponentially and
    retry until committed; reads of read-only records write no shared memory.
    """

    name = "occ"

    def __init__(
        self,
        workers: int = 1,
        record_order: bool = True,
        epoch_ms: int = 40,
        pin_threads: bool = True,
    ):
        super().__init__(workers, record_order, pin_threads)
        self.store = OccStore()
        self.epoch = 1
        self.epoch_ms = epoch_ms
        self._last_tid = [0] * workers
        self._epoch_stop = threading.Event()
        self._epoch_thread: threading.Thread | None = None

    def load(self, workload) -> None:
        workload.load(self.store)

    def _epoch_main(self):
        period = self.epoch_ms / 1000.0
        while not self._epoch_stop.wait(period):
            self.epoch += 1  # single writer; workers only read

    def start(self) -> None:
        self._epoch_thread = threading.Thread(target=self._epoch_main, name="occ-epoch")
        self._epoch_thread.start()
        super().start()

    def drain(self) -> None:
        if self._drained:
            return
        super().drain()
        self._epoch_stop.set()
        if self._epoch_thread is not None:
            self._epoch_thread.join()

    def execute_txn(self, txn, widx: int) -> None:
        slots = self.store.slots
        read_keys = txn.read_keys
        write_keys = txn.write_keys
        write_set = frozenset(write_keys)
        wslots = [slots[k] for k in sorted(write_set)]
        # In verify mode the order lock spans validation + log append, so the
        # recorded order is exactly the validation order (otherwise a writer
        # could slip between an unlocked read's validation and the append).
        # Commit-id generation stays per-worker either way.
        order_lock = self._order_lock if self.record_order else None
        attempt = 0
        while True:
            # Read phase: each (tid, payload) pair is one atomic reference read.
            seen = [slots[k].current for k in read_keys]
            vals = [c[1] for c in seen]
            outs = txn.logic(vals)
            # Validation: lock the write set in lexicographic order, then
            # confirm every read is still current and not locked by others.
            for s in wslots:
                s.lock.acquire()
            if order_lock is not None:
                order_lock.acquire()
            ok = True
            max_tid = self._last_tid[widx]
            for k, c in zip(read_keys, seen):
                s = slots[k]
                if s.current[0] != c[0] or (s.lock.locked() and k not in write_set):
                    ok = False
                    break
                if c[0] > max_tid:
                    max_tid = c[0]
            if ok:
                for s in wslots:
                    tid = s.current[0]
                    if tid > max_tid:
                        max_tid = tid
                epoch = self.epoch
                if (max_tid >> _TID_EPOCH_SHIFT) < epoch:
                    tid = (epoch << _TID_EPOCH_SHIFT) | 1
                else:
                    tid = max_tid + 1
                self._last_tid[widx] = tid
                txn.read_digest = hash(tuple(vals))
                if order_lock is not None:
                    self.commit_log.append(txn)
                    order_lock.release()
                if outs is None:
                    self.logical_aborts += 1
                else:
                    for k, p in zip(write_keys, outs):
                        slots[k].current = (tid, p)
                for s in wslots:
                    s.lock.release()
                self.committed_per_worker[widx] += 1
                self.ops_per_worker[widx] += txn.n_ops
                return
            if order_lock is not None:
                order_lock.release()
            for s in wslots:
                s.lock.release()
            self.retries_per_worker[widx] += 1
            attempt += 1
            time.sleep(min(0.0001 * (2 ** min(attempt, 7)), 0.01))
