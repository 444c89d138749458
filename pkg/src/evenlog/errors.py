"""Exception types raised across the engine and analysis toolkit."""


class WalError(Exception):
    """Base class for all evenlog errors."""


# --- record codec ---

class RecordTooLarge(WalError):
    """Payload cannot be represented in a 32-bit record length field."""


class MalformedHeader(WalError):
    """Record header violates the format (length < 16 or not a multiple of 4)."""


class TruncatedRecord(WalError):
    """Stream ends before the declared record length."""


class CorruptRecord(WalError):
    """Record checksum does not match its payload."""


# --- segmentation ---

class InvalidSegmentSize(WalError):
    """Segment size must be a multiple of 16 and at least 32 bytes."""


# --- durability backends ---

class DurabilityError(WalError):
    """A backend failed to persist data; the write is not committed."""


class RecoveryCorruption(WalError):
    """Recovery hit a non-zero word that cannot be a record header."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (stream offset {offset})")
        self.offset = offset


# --- crypto ---

class KeyNotFound(WalError):
    """Key provider has no key for the requested key id."""


class IntegrityFailure(WalError):
    """Stored data failed its digest check on every available copy."""


# --- quorum simulation ---

class Unregistered(WalError):
    """Heartbeat from a replica that never registered."""


class InsufficientReplicas(WalError):
    """Not enough active replicas to form a single quorum group."""


class InsufficientQuorums(WalError):
    """Fewer candidate quorum groups than the write needs."""


class CommitTimeout(WalError):
    """A real segment could not gather a write quorum of acknowledgements."""


class SegmentNotFound(WalError):
    """Replica has no stored unit for the requested segment id."""


class UnrecoverableSegment(WalError):
    """No recorded replica for a committed segment is reachable."""


# --- leakage analysis ---

class InvalidPrior(WalError):
    """Prior distribution is empty, negative, or sums to zero."""


class InsufficientTrials(WalError):
    """Monte-Carlo run produced no conditioning events."""


class NoData(WalError):
    """Operation requires at least one data point."""


class UnknownSize(WalError):
    """WAL write size not present in the trained mapping."""


# --- workload ---

class InvalidSpec(WalError):
    """Workload specification fails validation."""
