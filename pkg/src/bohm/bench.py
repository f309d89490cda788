"""Benchmark harness: load tables, run a timed (or fixed-count) workload
against one engine configuration, sample per-second throughput and emit CSV.

CSV schema (stable):
    engine,cc_threads,exec_threads,workload,theta,txns_per_sec,ops_per_sec,retries,deferred,gc_reclaimed

run() writes one row per measured second plus a final summary row; sweep()
writes one summary row per configuration. For the single-version engines the
worker count is reported in the exec_threads column and cc_threads is empty.
"""
from __future__ import annotations

import csv
import os
import sys
import threading
import time
from dataclasses import dataclass, field

from .baselines import OccEngine, TwoPLEngine
from .engine import BohmEngine
from .errors import ConfigError
from .oracle import DictStore, VerifyResult, state_digest, verify
from .storage import Catalog
from .workloads import WORKLOAD_KINDS, WorkloadSpec, make_workload

CSV_HEADER = (
    "engine,cc_threads,exec_threads,workload,theta,"
    "txns_per_sec,ops_per_sec,retries,deferred,gc_reclaimed"
)

ENGINES = ("bohm", "2pl", "occ")


@dataclass
class RunConfig:
    """One benchmark run. Thread-count fields default per engine: bohm uses
    cc_threads/exec_threads (1 each), the baselines use workers (1)."""

    engine: str = "bohm"
    cc_threads: int | None = None
    exec_threads: int | None = None
    workers: int | None = None
    batch_size: int = 10_000
    queue_depth: int = 4
    max_recursion: int = 8
    spin_budget: int = 100
    workload: str = "micro10rmw"
    theta: float = 0.0
    db_size: int = 100_000
    record_size: int | None = None
    customers: int = 100_000
    spin_us: int = 50
    readonly_fraction: float = 0.01
    scan_size: int = 10_000
    duration: float = 30.0
    warmup: float = 5.0
    txn_count: int | None = None  # fixed-count mode overrides duration/warmup
    seed: int = 1
    gc: bool = True
    annotate_reads: bool = True
    verify: bool = False
    debug: bool = False
    writecheck_abort: bool = False
    smallbank_mix: tuple = (1, 1, 1, 1, 1)
    pin_threads: bool = True
    out: str | None = None

    def validate(self) -> None:
        if self.engine not in ENGINES:
            raise ConfigError(f"unsupported engine {self.engine!r}")
        if self.workload not in WORKLOAD_KINDS:
            raise ConfigError(f"unknown workload {self.workload!r}")
        if self.engine == "bohm":
            if self.workers is not None:
                raise ConfigError("engine=bohm takes cc_threads/exec_threads, not workers")
            if (self.cc_threads or 1) < 1 or (self.exec_threads or 1) < 1:
                raise ConfigError("cc_threads and exec_threads must be >= 1")
        else:
            if self.cc_threads is not None or self.exec_threads is not None:
                raise ConfigError(
                    f"engine={self.engine} takes workers, not cc_threads/exec_threads"
                )
            if (self.workers or 1) < 1:
                raise ConfigError("workers must be >= 1")
        if not 0.0 <= self.theta < 1.0:
            raise ConfigError("theta must be in [0, 1)")
        if self.db_size < 1 or self.customers < 1:
            raise ConfigError("db_size and customers must be >= 1")
        if self.txn_count is None and self.duration <= 0:
            raise ConfigError("duration must be positive")
        total = self.total_threads()
        cores = os.cpu_count() or 1
        if total > cores:
            print(
                f"warning: {total} engine threads on {cores} hardware threads",
                file=sys.stderr,
            )

    def total_threads(self) -> int:
        if self.engine == "bohm":
            return (self.cc_threads or 1) + (self.exec_threads or 1)
        return self.workers or 1

    def workload_spec(self) -> WorkloadSpec:
        return WorkloadSpec(
            kind=self.workload,
            theta=self.theta,
            db_size=self.db_size,
            record_size=self.record_size,
            seed=self.seed,
            readonly_fraction=self.readonly_fraction,
            scan_size=self.scan_size,
            customers=self.customers,
            spin_us=self.spin_us,
            writecheck_abort=self.writecheck_abort,
            smallbank_mix=self.smallbank_mix,
        )


@dataclass
class RunMetrics:
    engine: str
    workload: str
    theta: float
    cc_threads: int | None
    exec_threads: int | None
    workers: int | None
    duration: float
    committed: int
    ops: int
    retries: int = 0
    deferred: int = 0
    logical_aborts: int = 0
    gc_reclaimed: int = 0
    watermark_lag: int = 0
    series: list = field(default_factory=list)  # (second, txns_delta, ops_delta)
    verify_result: VerifyResult | None = None
    final_digest: str | None = None
    error: str | None = None
    # debug-mode instrumentation results (None when debug was off)
    read_mutations: int | None = None
    poisoned_reads: int | None = None

    @property
    def txns_per_sec(self) -> float:
        return self.committed / self.duration if self.duration > 0 else 0.0

    @property
    def ops_per_sec(self) -> float:
        return self.ops / self.duration if self.duration > 0 else 0.0

    def _threads_cols(self):
        if self.engine == "bohm":
            return self.cc_threads, self.exec_threads
        return "", self.workers

    def summary_row(self) -> list:
        cc, ex = self._threads_cols()
        if self.error is not None:
            return [self.engine, cc, ex, self.workload, self.theta, "", "", "", "", ""]
        return [
            self.engine,
            cc,
            ex,
            self.workload,
            self.theta,
            f"{self.txns_per_sec:.1f}",
            f"{self.ops_per_sec:.1f}",
            self.retries,
            self.deferred,
            self.gc_reclaimed,
        ]

    def second_rows(self) -> list[list]:
        cc, ex = self._threads_cols()
        rows = []
        for second, txns, ops in self.series:
            rows.append(
                [self.engine, cc, ex, self.workload, self.theta,
                 f"{txns:.1f}", f"{ops:.1f}", self.retries, self.deferred,
                 self.gc_reclaimed]
            )
        return rows


class _Sampler(threading.Thread):
    """Reads the engine's per-thread counters once per second; the hot path
    never touches a contended metric."""

    def __init__(self, engine):
        super().__init__(name="bench-sampler", daemon=True)
        self.engine = engine
        self.samples = []  # (elapsed, committed, ops)
        self._halt = threading.Event()
        self._t0 = None

    def run(self):
        self._t0 = time.perf_counter()
        while not self._halt.wait(1.0):
            e = self.engine
            self.samples.append((time.perf_counter() - self._t0, e.committed, e.committed_ops))

    def stop(self):
        self._halt.set()


def _build_engine(config: RunConfig, workload):
    if config.engine == "bohm":
        catalog = Catalog()
        workload.load(catalog)
        eng = BohmEngine(
            catalog,
            cc_threads=config.cc_threads or 1,
            exec_threads=config.exec_threads or 1,
            batch_size=config.batch_size,
            queue_depth=config.queue_depth,
            max_recursion=config.max_recursion,
            spin_budget=config.spin_budget,
            annotate_reads=config.annotate_reads,
            gc_enabled=config.gc,
            record_reads=config.verify or config.debug,
            debug=config.debug,
            pin_threads=config.pin_threads,
        )
        return eng
    cls = TwoPLEngine if config.engine == "2pl" else OccEngine
    eng = cls(
        workers=config.workers or 1,
        record_order=config.verify,
        pin_threads=config.pin_threads,
    )
    eng.load(workload)
    return eng


def _engine_counters(config: RunConfig, eng) -> dict:
    if config.engine == "bohm":
        return dict(
            retries=0,
            deferred=eng.deferred_count,
            logical_aborts=eng.aborted_count,
            gc_reclaimed=eng.gc_reclaimed,
            watermark_lag=eng.watermark_lag if eng.gc_enabled else 0,
        )
    return dict(
        retries=eng.retries,
        deferred=0,
        logical_aborts=eng.logical_aborts,
        gc_reclaimed=0,
        watermark_lag=0,
    )


def run(config: RunConfig) -> RunMetrics:
    """Load tables, run the configured workload, return metrics (and write
    the CSV when config.out is set)."""
    config.validate()
    spec = config.workload_spec()
    workload = make_workload(spec)
    eng = _build_engine(config, workload)

    initial_state = None
    recorded: list = []
    if config.verify:
        replay_store = DictStore()
        make_workload(spec).load(replay_store)  # fresh generator: same keys
        initial_state = replay_store.state

    sampler = _Sampler(eng)
    t0 = time.perf_counter()
    with eng:
        sampler.start()
        if config.txn_count is not None:
            for _ in range(config.txn_count):
                txn = workload.make_txn()
                if config.verify:
                    recorded.append(txn)
                eng.submit(txn)
        else:
            deadline = t0 + config.warmup + config.duration
            warmup_end = t0 + config.warmup
            warm_committed = warm_ops = 0
            warm_taken = config.warmup <= 0
            while True:
                now = time.perf_counter()
                if not warm_taken and now >= warmup_end:
                    warm_committed, warm_ops = eng.committed, eng.committed_ops
                    warm_taken = True
                if now >= deadline:
                    break
                txn = workload.make_txn()
                if config.verify:
                    recorded.append(txn)
                eng.submit(txn)
            if not warm_taken:
                warm_committed, warm_ops = 0, 0
            measured_committed = eng.committed - warm_committed
            measured_ops = eng.committed_ops - warm_ops
    elapsed = time.perf_counter() - t0
    sampler.stop()
    sampler.join()

    if config.txn_count is not None:
        committed, ops, window = eng.committed, eng.committed_ops, elapsed
    else:
        committed, ops, window = measured_committed, measured_ops, config.duration

    series = []
    prev_c = prev_o = 0
    for sec, (_, c, o) in enumerate(sampler.samples, start=1):
        series.append((sec, c - prev_c, o - prev_o))
        prev_c, prev_o = c, o

    counters = _engine_counters(config, eng)
    metrics = RunMetrics(
        engine=config.engine,
        workload=config.workload,
        theta=config.theta,
        cc_threads=config.cc_threads if config.engine == "bohm" else None,
        exec_threads=config.exec_threads if config.engine == "bohm" else None,
        workers=config.workers if config.engine != "bohm" else None,
        duration=window,
        committed=committed,
        ops=ops,
        series=series,
        **counters,
    )

    if config.engine == "bohm":
        metrics.final_digest = state_digest(eng.catalog.state_items())
        if config.debug:
            metrics.read_mutations = eng.instr.read_mutations
            metrics.poisoned_reads = eng.instr.poisoned_reads
        if config.verify:
            assert eng.committed == eng.sealed_txns
            order = sorted(recorded, key=lambda t: t.ts)
            metrics.verify_result = verify(initial_state, order, eng.catalog.state_items())
    else:
        metrics.final_digest = state_digest(eng.store.state_items())
        if config.verify:
            metrics.verify_result = verify(
                initial_state, eng.commit_log, eng.store.state_items()
            )

    if config.out:
        write_run_csv(config.out, metrics)
    return metrics


def sweep(configs: list[RunConfig], out: str | None = None) -> list[RunMetrics]:
    """Run each config sequentially; a failed run becomes a row with empty
    metric cells and the sweep continues."""
    if not configs:
        raise ConfigError("sweep needs at least one configuration")
    results = []
    for cfg in configs:
        try:
            results.append(run(cfg))
        except Exception as exc:  # noqa: BLE001 - failed rows are part of the contract
            results.append(
                RunMetrics(
                    engine=cfg.engine,
                    workload=cfg.workload,
                    theta=cfg.theta,
                    cc_threads=cfg.cc_threads,
                    exec_threads=cfg.exec_threads,
                    workers=cfg.workers,
                    duration=0.0,
                    committed=0,
                    ops=0,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    if out:
        write_sweep_csv(out, results)
    return results


def write_run_csv(path: str, metrics: RunMetrics) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER.split(","))
        for row in metrics.second_rows():
            w.writerow(row)
        w.writerow(metrics.summary_row())


def write_sweep_csv(path: str, results: list[RunMetrics]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER.split(","))
        for m in results:
            w.writerow(m.summary_row())
