import random

import pytest

from bohm.core import COMPLETE, Transaction
from bohm.engine import BohmEngine
from bohm.errors import RejectedAfterShutdown
from bohm.oracle import DictStore, state_digest, verify
from bohm.storage import Catalog
from bohm.workloads import WorkloadSpec, make_workload

from conftest import increment_logic, load_catalog, make_keys


def _generate(n_txns, db, seed, keys):
    rng = random.Random(seed)
    txns = []
    for _ in range(n_txns):
        ks = tuple(keys[i] for i in rng.sample(range(db), 4))
        txns.append(Transaction(ks, ks, increment_logic, n_ops=4))
    return txns


def _run_engine(txns, keys, **kw):
    catalog = load_catalog(keys)
    kw.setdefault("batch_size", 500)
    kw.setdefault("debug", True)
    eng = BohmEngine(catalog, **kw)
    with eng:
        for t in txns:
            eng.submit(t)
    return eng


@pytest.mark.parametrize("cc,ex", [(1, 1), (2, 2), (3, 2)])
@pytest.mark.parametrize("annotate", [True, False])
def test_serial_equivalence_small(cc, ex, annotate):
    keys = make_keys(100)
    txns = _generate(2000, 100, 11, keys)
    eng = _run_engine(
        txns, keys, cc_threads=cc, exec_threads=ex, annotate_reads=annotate
    )
    result = verify({k: bytes(16) for k in keys}, txns, eng.catalog.state_items())
    assert result.ok, result.summary()


def test_gc_on_off_states_identical_and_reclaims():
    keys = make_keys(50)
    digests = {}
    for gc in (True, False):
        txns = _generate(4000, 50, 23, keys)
        eng = _run_engine(txns, keys, cc_threads=2, exec_threads=2, gc_enabled=gc)
        digests[gc] = state_digest(eng.catalog.state_items())
        if gc:
            assert eng.gc_reclaimed > 0
            assert eng.instr.poisoned_reads == 0
        else:
            assert eng.gc_reclaimed == 0
    assert digests[True] == digests[False]


def test_reads_mutate_nothing_shared():
    keys = make_keys(80)
    txns = _generate(3000, 80, 5, keys)
    for annotate in (True, False):
        eng = _run_engine(txns if annotate else _generate(3000, 80, 5, keys),
                          keys, annotate_reads=annotate, cc_threads=2, exec_threads=2)
        assert eng.instr.read_mutations == 0


def test_annotation_and_traversal_agree():
    # Same seed with the optimization on and off: identical read values and
    # final state (the open question about same-batch annotation).
    keys = make_keys(60)
    results = {}
    for annotate in (True, False):
        txns = _generate(3000, 60, 37, keys)
        eng = _run_engine(txns, keys, annotate_reads=annotate,
                          cc_threads=2, exec_threads=2)
        results[annotate] = (
            state_digest(eng.catalog.state_items()),
            [t.read_digest for t in sorted(txns, key=lambda t: t.ts)],
        )
    assert results[True] == results[False]


def test_committed_equals_sealed_log_length():
    keys = make_keys(40)
    txns = _generate(1500, 40, 2, keys)
    eng = _run_engine(txns, keys, cc_threads=2, exec_threads=2)
    assert eng.committed == eng.sealed_txns == len(txns)
    assert all(t.state == COMPLETE for t in txns)


def test_submit_after_drain_rejected():
    keys = make_keys(10)
    eng = _run_engine(_generate(100, 10, 9, keys), keys)
    with pytest.raises(RejectedAfterShutdown):
        eng.submit(_generate(1, 10, 10, keys)[0])


def test_hot_key_progress():
    # Every transaction RMWs the same key: a maximal dependency chain still
    # completes (depth bound + defer-and-retry keep making progress).
    keys = make_keys(1)
    txns = [
        Transaction((keys[0],), (keys[0],), increment_logic) for _ in range(2000)
    ]
    eng = _run_engine(txns, keys, cc_threads=2, exec_threads=3, batch_size=250)
    head = eng.catalog.tables["t"].get(keys[0])
    assert int.from_bytes(head.payload[:8], "little") == 2000


def test_watermark_monotone_and_bounded():
    keys = make_keys(30)
    txns = _generate(3000, 30, 4, keys)
    eng = _run_engine(txns, keys, cc_threads=2, exec_threads=2, batch_size=300)
    wm = eng.watermark
    assert wm.low_watermark <= min(wm.batch_done)
    assert eng.watermark_lag >= 0


def test_gc_reclaims_subset_of_read_tracking_permission(monkeypatch):
    # Shadow oracle for the reclamation rule. The permissive rule would be:
    # reclaim a superseded version once every transaction that read it has
    # finished (exhaustive read tracking). The shipped rule reclaims once
    # every exec thread has finished the superseding batch. Spy on reads and
    # reclaims and check the shipped rule never out-runs the permissive one:
    # every recorded reader of a reclaimed version sits in a batch at or
    # below the watermark that justified the reclaim, i.e. had finished.
    from collections import defaultdict

    from bohm.cc import CcWorker
    from bohm.execution import ExecWorker

    batch_size = 200
    reads = defaultdict(list)  # id(version) -> reader timestamps
    reclaims = []  # (version, superseding batch id, watermark at reclaim)

    orig_resolve = ExecWorker.resolve_read

    def spy_resolve(self, txn, slot, key):
        v = orig_resolve(self, txn, slot, key)
        if v is not None:
            reads[id(v)].append(txn.ts)
        return v

    orig_reclaim = CcWorker.reclaim

    def spy_reclaim(self, low_watermark):
        pending = list(self.defer_list)
        n = orig_reclaim(self, low_watermark)
        for old, _sup, bid in pending[:n]:
            reclaims.append((old, bid, low_watermark))
        return n

    monkeypatch.setattr(ExecWorker, "resolve_read", spy_resolve)
    monkeypatch.setattr(CcWorker, "reclaim", spy_reclaim)

    keys = make_keys(20)  # hot keyspace: plenty of supersession
    txns = _generate(4000, 20, 31, keys)
    _run_engine(txns, keys, cc_threads=2, exec_threads=2, batch_size=batch_size)

    assert reclaims, "expected reclamation activity on a hot keyspace"
    def batch_of(ts):
        return (ts - 1) // batch_size  # dense timestamps from 1, fixed batches

    for version, superseding_bid, watermark in reclaims:
        assert superseding_bid <= watermark
        for reader_ts in reads.get(id(version), []):
            assert batch_of(reader_ts) <= watermark


def test_pinning_disabled_by_env(monkeypatch):
    from bohm.engine import pin_current_thread

    monkeypatch.setenv("BOHM_THREADS_NO_PIN", "1")
    assert pin_current_thread(0) is False
    monkeypatch.delenv("BOHM_THREADS_NO_PIN")
    # best-effort: either pins or reports a no-pin fallback, never raises
    assert pin_current_thread(0) in (True, False)


def test_workload_streams_through_real_engine():
    # End-to-end over the generator + engine + oracle for one workload.
    spec = WorkloadSpec(kind="smallbank", customers=50, spin_us=0, seed=3,
                        writecheck_abort=True)
    wl = make_workload(spec)
    catalog = Catalog()
    wl.load(catalog)
    replay_store = DictStore()
    make_workload(spec).load(replay_store)
    eng = BohmEngine(catalog, cc_threads=2, exec_threads=2, batch_size=200, debug=True)
    txns = []
    with eng:
        for _ in range(2000):
            t = wl.make_txn()
            txns.append(t)
            eng.submit(t)
    assert eng.aborted_count > 0  # WriteCheck overdrafts aborted
    result = verify(replay_store.state, sorted(txns, key=lambda t: t.ts),
                    catalog.state_items())
    assert result.ok, result.summary()
