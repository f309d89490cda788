"""Exception types shared across modules."""


class BohmError(Exception):
    """Base class for engine errors."""


class RejectedAfterShutdown(BohmError):
    """Transaction submitted while the engine is draining."""


class EmptyLog(BohmError):
    """seal_batch called with no pending transactions and no drain flush."""


class DuplicateKey(BohmError):
    """bulk_load saw the same key twice."""


class ConfigError(BohmError):
    """Invalid benchmark configuration combination."""
