"""In-memory serializable multi-version transaction engine, single-version
baselines (two-phase locking and Silo-style OCC), benchmark workloads and a
measurement harness."""

from .core import (
    COMPLETE,
    EXECUTING,
    INFINITY,
    NOT_FOUND,
    UNPROCESSED,
    Batch,
    ReadResult,
    RecordKey,
    Transaction,
    Version,
    try_acquire,
    visible,
)
from .engine import BohmEngine
from .errors import (
    BohmError,
    ConfigError,
    DuplicateKey,
    EmptyLog,
    RejectedAfterShutdown,
)
from .storage import Catalog, TableIndex

__all__ = [
    "Batch",
    "BohmEngine",
    "BohmError",
    "Catalog",
    "COMPLETE",
    "ConfigError",
    "DuplicateKey",
    "EmptyLog",
    "EXECUTING",
    "INFINITY",
    "NOT_FOUND",
    "ReadResult",
    "RecordKey",
    "RejectedAfterShutdown",
    "TableIndex",
    "Transaction",
    "try_acquire",
    "UNPROCESSED",
    "Version",
    "visible",
]
