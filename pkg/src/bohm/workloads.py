"""Deterministic, seeded benchmark workload generators.

Kinds:
  micro10rmw   -- 10 read-modify-writes over 8-byte counter records.
  ycsb10rmw    -- 10 RMWs over 1,000-byte records (increment the first
                  8 bytes, copy the rest).
  ycsb2rmw8r   -- 2 RMWs plus 8 plain reads, all distinct keys.
  readonlymix  -- with probability `readonly_fraction` a long read-only
                  transaction over `scan_size` uniform keys, otherwise a
                  10RMW transaction.
  smallbank    -- the five banking transactions (Balance, Deposit,
                  TransactSaving, Amalgamate, WriteCheck) over Savings and
                  Checking tables with one row per customer; balances are
                  signed 64-bit cents and each transaction may spin for
                  `spin_us` microseconds to simulate work.

(spec, seed) fully determines the transaction stream. All randomness happens
at generation time; transaction logic is a pure function of its reads, so a
serial replay of the generated stream is an exact oracle.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

import numpy as np

from .core import RecordKey, Transaction

_M64 = 2**64 - 1

WORKLOAD_KINDS = ("micro10rmw", "ycsb10rmw", "ycsb2rmw8r", "readonlymix", "smallbank")

# SmallBank constants: small initial balances make WriteCheck overdrafts
# (and therefore logical aborts in abort mode) common.
SMALLBANK_INITIAL_SAVINGS = 25
SMALLBANK_INITIAL_CHECKING = 25
SMALLBANK_TXN_TYPES = ("balance", "deposit", "transact_saving", "amalgamate", "write_check")


def _zeta(n: int, theta: float) -> float:
    return float((np.arange(1, n + 1, dtype=np.float64) ** -theta).sum())


_zeta_cache: dict = {}


class ZipfGen:
    """Zipfian key generator over [0, n) with skew parameter theta in [0, 1)
    (theta = 0 is the uniform distribution). Rejection-free analytic method;
    rank r is drawn with probability proportional to 1 / (r+1)^theta."""

    __slots__ = ("n", "theta", "rng", "_alpha", "_zetan", "_eta", "_cut1", "_cut2")

    def __init__(self, n: int, theta: float, seed: int | None = None, rng=None):
        if not 0.0 <= theta < 1.0:
            raise ValueError("theta must be in [0, 1)")
        if n < 1:
            raise ValueError("key space must be nonempty")
        self.n = n
        self.theta = theta
        self.rng = rng if rng is not None else random.Random(seed)
        zetan = _zeta_cache.get((n, theta))
        if zetan is None:
            zetan = _zeta_cache[(n, theta)] = _zeta(n, theta)
        self._zetan = zetan
        self._alpha = 1.0 / (1.0 - theta)
        zeta2 = 1.0 + 0.5**theta
        self._eta = (1.0 - (2.0 / n) ** (1.0 - theta)) / (1.0 - zeta2 / zetan)
        self._cut1 = 1.0 / zetan
        self._cut2 = (1.0 + 0.5**theta) / zetan

    def next(self) -> int:
        u = self.rng.random()
        if u < self._cut1:
            return 0
        if u < self._cut2:
            return 1
        r = int(self.n * (self._eta * u - self._eta + 1.0) ** self._alpha)
        return r if r < self.n else self.n - 1

    def sample(self, size: int, seed: int = 0) -> np.ndarray:
        """Vectorized bulk draw (independent numpy stream; used by
        distribution tests)."""
        u = np.random.default_rng(seed).random(size)
        r = (self.n * (self._eta * u - self._eta + 1.0) ** self._alpha).astype(np.int64)
        r = np.minimum(r, self.n - 1)
        r[u < self._cut2] = 1
        r[u < self._cut1] = 0
        return r


@dataclass
class WorkloadSpec:
    """Benchmark parameters; every field maps to a CLI flag."""

    kind: str = "micro10rmw"
    theta: float = 0.0
    db_size: int = 1_000_000
    record_size: int | None = None  # per-kind default when None
    seed: int = 1
    readonly_fraction: float = 0.01
    scan_size: int = 10_000
    customers: int = 100_000
    spin_us: int = 50
    writecheck_abort: bool = False  # logical-abort mode instead of 1-unit penalty
    smallbank_mix: tuple = field(default=(1, 1, 1, 1, 1))

    def __post_init__(self):
        if self.kind not in WORKLOAD_KINDS:
            raise ValueError(f"unknown workload kind {self.kind!r}")


def make_workload(spec: WorkloadSpec):
    if spec.kind == "smallbank":
        return SmallBankWorkload(spec)
    return YcsbWorkload(spec)


def _make_rmw_logic(n_write: int):
    """Increment the first 8 bytes (little-endian, wrapping) of each of the
    first n_write read values; remaining bytes are copied."""

    def logic(vals):
        out = []
        for i in range(n_write):
            p = vals[i]
            out.append(
                ((int.from_bytes(p[:8], "little") + 1) & _M64).to_bytes(8, "little")
                + p[8:]
            )
        return out

    return logic


def _read_only_logic(vals):
    return []


class YcsbWorkload:
    """YCSB-style single-table workloads (micro10rmw, ycsb10rmw, ycsb2rmw8r,
    readonlymix)."""

    def __init__(self, spec: WorkloadSpec):
        self.spec = spec
        self.table = "micro" if spec.kind == "micro10rmw" else "ycsb"
        if spec.record_size is not None:
            self.record_size = spec.record_size
        else:
            self.record_size = 8 if spec.kind == "micro10rmw" else 1000
        if self.record_size < 8:
            raise ValueError("records must hold at least the 8-byte counter")
        self.keys = [RecordKey(self.table, i) for i in range(spec.db_size)]
        self.rng = random.Random(spec.seed)
        self.zipf = ZipfGen(spec.db_size, spec.theta, rng=self.rng)
        self._rmw10 = _make_rmw_logic(10)
        self._rmw2 = _make_rmw_logic(2)
        self._scan_size = min(spec.scan_size, spec.db_size)

    @property
    def tables(self):
        return [self.table]

    def load(self, store) -> None:
        n = self.spec.db_size
        payload = bytes(self.record_size)
        store.load_table(self.table, self.keys, (payload for _ in range(n)), self.record_size)

    def _distinct_zipf_keys(self, k: int):
        drawn = []
        seen = set()
        nxt = self.zipf.next
        while len(drawn) < k:
            i = nxt()
            if i not in seen:
                seen.add(i)
                drawn.append(i)
        keys = self.keys
        return tuple(keys[i] for i in drawn)

    def _txn_10rmw(self) -> Transaction:
        ks = self._distinct_zipf_keys(10)
        return Transaction(ks, ks, self._rmw10, n_ops=10, tag="10rmw")

    def _txn_2rmw8r(self) -> Transaction:
        ks = self._distinct_zipf_keys(10)
        return Transaction(ks, ks[:2], self._rmw2, n_ops=10, tag="2rmw8r")

    def _txn_scan(self) -> Transaction:
        keys = self.keys
        ks = tuple(keys[i] for i in self.rng.sample(range(self.spec.db_size), self._scan_size))
        return Transaction(ks, (), _read_only_logic, n_ops=self._scan_size, tag="scan")

    def make_txn(self) -> Transaction:
        kind = self.spec.kind
        if kind == "ycsb2rmw8r":
            return self._txn_2rmw8r()
        if kind == "readonlymix" and self.rng.random() < self.spec.readonly_fraction:
            return self._txn_scan()
        return self._txn_10rmw()


def _enc(v: int) -> bytes:
    return v.to_bytes(8, "little", signed=True)


def _dec(b: bytes) -> int:
    return int.from_bytes(b, "little", signed=True)


def _spin(spin_ns: int) -> None:
    end = time.perf_counter_ns() + spin_ns
    while time.perf_counter_ns() < end:
        pass


class SmallBankWorkload:
    """Banking benchmark: Customer (name -> id, never written), Savings and
    Checking (id -> signed 64-bit balance in cents, 8 bytes each, one row per
    customer). Transaction type drawn from `smallbank_mix` (default uniform
    20% each); amounts drawn uniformly from [1, 100].

    WriteCheck overdraft rule: when savings+checking < amount, the default
    applies the amount plus a 1-unit penalty; with writecheck_abort=True the
    transaction logically aborts instead (exercising copy-forward publishes).
    """

    def __init__(self, spec: WorkloadSpec):
        self.spec = spec
        n = spec.customers
        self.sav_keys = [RecordKey("savings", i) for i in range(n)]
        self.chk_keys = [RecordKey("checking", i) for i in range(n)]
        self.cust_keys = [RecordKey("customer", i) for i in range(n)]
        self.rng = random.Random(spec.seed)
        self.spin_ns = spec.spin_us * 1000
        weights = spec.smallbank_mix
        if len(weights) != 5 or sum(weights) <= 0:
            raise ValueError("smallbank_mix needs 5 nonnegative weights")
        total = float(sum(weights))
        acc, cum = 0.0, []
        for w in weights:
            acc += w / total
            cum.append(acc)
        self._cum_mix = cum

    @property
    def tables(self):
        return ["checking", "customer", "savings"]

    def load(self, store) -> None:
        n = self.spec.customers
        store.load_table("customer", self.cust_keys, (_enc(i) for i in range(n)), 8)
        store.load_table(
            "savings", self.sav_keys, (_enc(SMALLBANK_INITIAL_SAVINGS) for _ in range(n)), 8
        )
        store.load_table(
            "checking", self.chk_keys, (_enc(SMALLBANK_INITIAL_CHECKING) for _ in range(n)), 8
        )

    def initial_total(self) -> int:
        return self.spec.customers * (SMALLBANK_INITIAL_SAVINGS + SMALLBANK_INITIAL_CHECKING)

    def _pick_type(self) -> int:
        u = self.rng.random()
        for i, c in enumerate(self._cum_mix):
            if u < c:
                return i
        return len(self._cum_mix) - 1

    def make_txn(self) -> Transaction:
        t = self._pick_type()
        rng = self.rng
        c = rng.randrange(self.spec.customers)
        spin_ns = self.spin_ns
        if t == 0:  # Balance: read-only on one customer's savings + checking
            def logic(vals, _spin_ns=spin_ns):
                if _spin_ns:
                    _spin(_spin_ns)
                return []

            return Transaction(
                (self.sav_keys[c], self.chk_keys[c]), (), logic, n_ops=2, tag="balance"
            )
        if t == 1:  # Deposit into checking
            amt = rng.randint(1, 100)

            def logic(vals, _amt=amt, _spin_ns=spin_ns):
                if _spin_ns:
                    _spin(_spin_ns)
                return [_enc(_dec(vals[0]) + _amt)]

            key = self.chk_keys[c]
            return Transaction((key,), (key,), logic, n_ops=1, tag="deposit")
        if t == 2:  # TransactSaving: deposit or withdrawal on savings
            amt = rng.randint(1, 100) * (1 if rng.random() < 0.5 else -1)

            def logic(vals, _amt=amt, _spin_ns=spin_ns):
                if _spin_ns:
                    _spin(_spin_ns)
                return [_enc(_dec(vals[0]) + _amt)]

            key = self.sav_keys[c]
            return Transaction((key,), (key,), logic, n_ops=1, tag="transact_saving")
        if t == 3:  # Amalgamate: move all of c's funds into c2's checking
            c2 = rng.randrange(self.spec.customers - 1)
            if c2 >= c:
                c2 += 1

            def logic(vals, _spin_ns=spin_ns):
                if _spin_ns:
                    _spin(_spin_ns)
                moved = _dec(vals[0]) + _dec(vals[1])
                return [_enc(0), _enc(0), _enc(_dec(vals[2]) + moved)]

            keys = (self.sav_keys[c], self.chk_keys[c], self.chk_keys[c2])
            return Transaction(keys, keys, logic, n_ops=3, tag="amalgamate")
        # WriteCheck: write a check against the total balance
        amt = rng.randint(1, 100)
        abort_mode = self.spec.writecheck_abort

        def logic(vals, _amt=amt, _abort=abort_mode, _spin_ns=spin_ns):
            if _spin_ns:
                _spin(_spin_ns)
            total = _dec(vals[0]) + _dec(vals[1])
            if total < _amt:
                if _abort:
                    return None
                return [_enc(_dec(vals[1]) - _amt - 1)]
            return [_enc(_dec(vals[1]) - _amt)]

        keys = (self.sav_keys[c], self.chk_keys[c])
        return Transaction(keys, (self.chk_keys[c],), logic, n_ops=2, tag="write_check")
