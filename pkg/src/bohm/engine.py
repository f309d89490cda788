"""Engine wiring: the sequencer hand-off, cc and exec thread pools, bounded
batch queues, the per-batch barrier and run lifecycle.

Pipeline: the submitting thread acts as the sequencer (single-thread
discipline is asserted in debug mode). Sealed batches are broadcast to every
cc thread through bounded queues; after the per-batch barrier one cc thread
publishes the batch to every exec thread. cc threads may therefore run
batches ahead of execution, bounded by the queue depth.
"""
from __future__ import annotations

import os
import queue
import threading

from .cc import CcWorker, PartitionMap
from .core import Instrumentation
from .execution import ExecWorker, WatermarkState
from .sequencer import LogState

_NO_PIN_ENV = "BOHM_THREADS_NO_PIN"


def pin_current_thread(cpu: int) -> bool:
    """Best-effort: pin the calling thread to one cpu. Returns True when the
    pin took effect; disabled via BOHM_THREADS_NO_PIN=1 or on platforms
    without sched_setaffinity."""
    if os.environ.get(_NO_PIN_ENV) == "1":
        return False
    try:
        cpus = sorted(os.sched_getaffinity(0))
        os.sched_setaffinity(0, {cpus[cpu % len(cpus)]})
        return True
    except (AttributeError, OSError):
        return False


class BohmEngine:
    """The multi-versioned engine: one-shot per run (start, submit a stream,
    drain, read counters)."""

    def __init__(
        self,
        catalog,
        cc_threads: int = 1,
        exec_threads: int = 1,
        batch_size: int = 10_000,
        queue_depth: int = 4,
        annotate_reads: bool = True,
        gc_enabled: bool = True,
        max_recursion: int = 8,
        spin_budget: int = 100,
        record_reads: bool = True,
        debug: bool = False,
        partition_map: PartitionMap | None = None,
        pin_threads: bool = True,
    ):
        if cc_threads < 1 or exec_threads < 1:
            raise ValueError("cc_threads and exec_threads must be >= 1")
        self.catalog = catalog
        self.n_cc = cc_threads
        self.n_exec = exec_threads
        self.batch_size = batch_size
        self.annotate_reads = annotate_reads
        self.gc_enabled = gc_enabled
        self.max_recursion = max_recursion
        self.spin_budget = spin_budget
        self.record_reads = record_reads
        self.debug = debug
        self.pin_threads = pin_threads
        self.instr = Instrumentation(enabled=debug)
        self.partition_map = partition_map or PartitionMap(cc_threads)
        self.log = LogState(start_ts=1, debug=debug)
        self.watermark = WatermarkState(exec_threads)
        self.cc_queues = [queue.Queue(maxsize=queue_depth) for _ in range(cc_threads)]
        self.exec_queues = [queue.Queue(maxsize=queue_depth) for _ in range(exec_threads)]
        self.cc_barrier = threading.Barrier(cc_threads)
        self.cc_workers = [CcWorker(self, i) for i in range(cc_threads)]
        self.exec_workers = [ExecWorker(self, i) for i in range(exec_threads)]
        self._threads: list[threading.Thread] = []
        self._failures: list[BaseException] = []
        self._started = False
        self._drained = False

    # -- lifecycle -------------------------------------------------------------

    def _thread_main(self, worker, cpu: int):
        if self.pin_threads:
            pin_current_thread(cpu)
        try:
            worker.run()
        except BaseException as exc:  # propagate via drain()
            self._failures.append(exc)
            self.cc_barrier.abort()
            for q in self.cc_queues + self.exec_queues:
                try:
                    q.put_nowait(None)
                except queue.Full:
                    pass

    def start(self) -> None:
        if self._started:
            raise RuntimeError("engine already started")
        self._started = True
        for i, w in enumerate(self.cc_workers):
            t = threading.Thread(
                target=self._thread_main, args=(w, i), name=f"bohm-cc-{i}"
            )
            t.start()
            self._threads.append(t)
        for i, w in enumerate(self.exec_workers):
            t = threading.Thread(
                target=self._thread_main,
                args=(w, self.n_cc + i),
                name=f"bohm-exec-{i}",
            )
            t.start()
            self._threads.append(t)

    def submit(self, txn) -> None:
        """Sequencer entry point; call from one thread only. Seals and
        dispatches a batch whenever batch_size transactions are pending."""
        if not self._started:
            raise RuntimeError("engine not started")
        if self.annotate_reads and txn.read_refs is None:
            txn.read_refs = [None] * len(txn.read_keys)
        self.log.enqueue(txn)
        if len(self.log.pending) >= self.batch_size:
            self._dispatch(self.log.seal_batch(self.batch_size))

    def _dispatch(self, batch) -> None:
        for q in self.cc_queues:
            while True:
                try:
                    q.put(batch, timeout=1.0)
                    break
                except queue.Full:
                    if self._failures:
                        raise RuntimeError("engine worker failed") from self._failures[0]

    def drain(self) -> None:
        """Seal the remainder of the log, wait until every transaction has
        executed and stop all threads. Raises the first worker failure."""
        if self._drained:
            return
        self._drained = True
        self.log.draining = True
        while self.log.pending:
            self._dispatch(self.log.seal_batch(self.batch_size, flush=True))
        for q in self.cc_queues:
            q.put(None)
        for t in self._threads[: self.n_cc]:
            t.join()
        for q in self.exec_queues:
            q.put(None)
        for t in self._threads[self.n_cc :]:
            t.join()
        if self._failures:
            raise RuntimeError("engine worker failed") from self._failures[0]

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.drain()
        else:
            # Crash path: unblock and stop workers without raising again.
            self.log.draining = True
            try:
                self.drain()
            except Exception:
                pass
        return False

    # -- counters (per-thread, read by the metrics sampler) ---------------------

    @property
    def committed(self) -> int:
        return sum(w.committed for w in self.exec_workers)

    @property
    def committed_ops(self) -> int:
        return sum(w.ops for w in self.exec_workers)

    @property
    def deferred_count(self) -> int:
        return sum(w.deferred for w in self.exec_workers)

    @property
    def aborted_count(self) -> int:
        return sum(w.aborted for w in self.exec_workers)

    @property
    def gc_reclaimed(self) -> int:
        return sum(w.reclaimed for w in self.cc_workers)

    @property
    def sealed_txns(self) -> int:
        return self.log.sealed_txns

    @property
    def watermark_lag(self) -> int:
        return (self.log.next_batch_id - 1) - self.watermark.low_watermark
