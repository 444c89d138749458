"""On-disk journal backends.

``JournalBackend`` is the size-uniform engine: every slot flush is split
into fixed-size segments, each encrypted into a stored unit of exactly
S + 16 bytes, so the storage layer sees a single write size no matter
what the workload does. ``PlainJournalBackend`` is the unprotected
baseline that writes slot bytes as-is; it exists for byte accounting,
recovery-time comparison, and demonstrating the size leak the segmented
engine removes.

Journal files are named ``journal.<fid>`` (zero-padded decimal). The
checkpoint sidecar ``CHECKPOINT`` holds 20 bytes, little-endian:

    [ckpt_id u64][fid u32][offset u64]

A checkpoint appends a flagged record through the normal slot path,
creates the next journal file, then commits by atomically replacing the
sidecar (write-temp-then-rename). A crash anywhere before the rename
leaves the previous checkpoint in force.
"""

from __future__ import annotations

import os
import re
import struct
from pathlib import Path

from . import crypto
from .errors import DurabilityError
from .observe import StorageTrace
from .records import LogRecord, Lsn, scan_padded_stream
from .segmentation import check_segment_size, pad_to_segments

SIDECAR_NAME = "CHECKPOINT"
_SIDECAR = struct.Struct("<QIQ")
_FILE_RE = re.compile(r"journal\.(\d{10})$")


def journal_filename(fid: int) -> str:
    return f"journal.{fid:010d}"


def list_journal_fids(root: Path) -> list[int]:
    fids = []
    for entry in root.iterdir():
        m = _FILE_RE.match(entry.name)
        if m:
            fids.append(int(m.group(1)))
    return sorted(fids)


def read_sidecar(root: Path) -> tuple[int, int, int] | None:
    """Return (ckpt_id, fid, offset) or None when no checkpoint exists."""
    path = root / SIDECAR_NAME
    if not path.exists():
        return None
    data = path.read_bytes()
    if len(data) != _SIDECAR.size:
        raise DurabilityError(f"sidecar is {len(data)} bytes, expected {_SIDECAR.size}")
    return _SIDECAR.unpack(data)


def _fsync_dir(root: Path) -> None:
    fd = os.open(root, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


class CheckpointMarker:
    def __init__(self, ckpt_id: int, lsn: Lsn):
        self.ckpt_id = ckpt_id
        self.lsn = lsn

    def __repr__(self):
        return f"CheckpointMarker(ckpt_id={self.ckpt_id}, lsn={self.lsn})"


class JournalBackend:
    """Append-only journal of encrypted fixed-size stored units.

    A backend instance always appends to a fresh file (one past the
    newest on disk), so a torn tail left by a crash is never extended.
    """

    def __init__(
        self,
        root: str | Path,
        key: crypto.ReplicaKey,
        segment_size: int = 128,
        trace: StorageTrace | None = None,
        sync: bool = True,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.key = key
        self.segment_size = check_segment_size(segment_size)
        self.trace = trace if trace is not None else StorageTrace()
        self.sync = sync
        self.unit_size = segment_size + crypto.IV_SIZE

        existing = list_journal_fids(self.root)
        self._fid = (existing[-1] + 1) if existing else 0
        self._fh = None
        self._offset = 0
        sidecar = read_sidecar(self.root)
        self._ckpt_id = sidecar[0] if sidecar else 0
        self._open_file(self._fid)

    # -- file plumbing -------------------------------------------------

    def _open_file(self, fid: int) -> None:
        if self._fh is not None:
            self._fh.close()
        self._fid = fid
        path = self.root / journal_filename(fid)
        self._fh = open(path, "ab")
        self._offset = self._fh.tell()

    @property
    def current_file_id(self) -> int:
        return self._fid

    @property
    def append_offset(self) -> int:
        return self._offset

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _sync_file(self) -> None:
        self._fh.flush()
        if self.sync:
            os.fdatasync(self._fh.fileno())

    # -- appends -------------------------------------------------------

    def persist_slot(self, slot_bytes: bytes) -> Lsn:
        """Segment, encrypt and append one slot flush; synced on return."""
        padded = pad_to_segments(slot_bytes, self.segment_size)
        return self._append_units(crypto.encrypt_stream(self.key, padded, self.segment_size))

    def append_segments(self, segments: list[bytes]) -> Lsn:
        """Append pre-split segments (each exactly S bytes), in order."""
        for seg in segments:
            if len(seg) != self.segment_size:
                raise ValueError(f"segment of {len(seg)} bytes, expected {self.segment_size}")
        return self._append_units(crypto.encrypt_stream(self.key, b"".join(segments), self.segment_size))

    def _append_units(self, units: bytes) -> Lsn:
        lsn = Lsn(self._fid, self._offset)
        if not units:
            return lsn
        count = len(units) // self.unit_size
        write = self._fh.write
        view = memoryview(units)
        try:
            # one write per stored unit: this is the adversary-visible
            # sequence the fixed-size guarantee is about
            for off in range(0, len(units), self.unit_size):
                write(view[off : off + self.unit_size])
            self._sync_file()
        except OSError as exc:
            raise DurabilityError(str(exc)) from exc
        self.trace.record(StorageTrace.JOURNAL, self.unit_size, count)
        self._offset += len(units)
        return lsn

    # -- checkpoints and garbage collection ------------------------------

    @property
    def last_checkpoint_id(self) -> int:
        return self._ckpt_id

    def checkpoint_record_payload(self, ckpt_id: int) -> bytes:
        return struct.pack("<Q", ckpt_id)

    def commit_checkpoint(self, ckpt_id: int) -> CheckpointMarker:
        """Rotate to a fresh file and atomically commit the sidecar.

        The caller must already have flushed the checkpoint record (see
        ``WalEngine.checkpoint``). The next file is created before the
        sidecar rename so the sidecar never names a missing file.
        """
        next_fid = self._fid + 1
        self._create_file(next_fid)
        self._write_sidecar(ckpt_id, next_fid, 0)
        self._open_file(next_fid)
        self._ckpt_id = ckpt_id
        return CheckpointMarker(ckpt_id, Lsn(next_fid, 0))

    def _create_file(self, fid: int) -> None:
        (self.root / journal_filename(fid)).touch()
        if self.sync:
            _fsync_dir(self.root)

    def _write_sidecar(self, ckpt_id: int, fid: int, offset: int) -> None:
        tmp = self.root / (SIDECAR_NAME + ".tmp")
        with open(tmp, "wb") as f:
            f.write(_SIDECAR.pack(ckpt_id, fid, offset))
            f.flush()
            if self.sync:
                os.fsync(f.fileno())
        os.replace(tmp, self.root / SIDECAR_NAME)
        if self.sync:
            _fsync_dir(self.root)
        self.trace.record(StorageTrace.METADATA, _SIDECAR.size)

    def gc(self) -> int:
        """Delete journal files older than the checkpoint. Idempotent."""
        sidecar = read_sidecar(self.root)
        if sidecar is None:
            return 0
        _, ckpt_fid, _ = sidecar
        deleted = 0
        for fid in list_journal_fids(self.root):
            if fid < ckpt_fid and fid != self._fid:
                try:
                    (self.root / journal_filename(fid)).unlink()
                    deleted += 1
                except FileNotFoundError:
                    pass
        return deleted


def plaintext_stream(root: str | Path, key: crypto.ReplicaKey, segment_size: int) -> bytes:
    """Decrypt the journal from the last checkpoint into one byte stream.

    Files are read in fid order starting at the sidecar position (start
    of the stream when no checkpoint exists). A torn trailing partial
    unit is dropped; record-level tearing is handled by the scanner.
    """
    root = Path(root)
    check_segment_size(segment_size)
    unit = segment_size + crypto.IV_SIZE
    sidecar = read_sidecar(root)
    start_fid, start_off = (sidecar[1], sidecar[2]) if sidecar else (0, 0)
    parts = []
    for fid in list_journal_fids(root):
        if fid < start_fid:
            continue
        data = (root / journal_filename(fid)).read_bytes()
        if fid == start_fid:
            data = data[start_off:]
        data = data[: len(data) - len(data) % unit]
        parts.append(crypto.decrypt_stream(key, data, segment_size))
    return b"".join(parts)


def recover_journal(root: str | Path, key: crypto.ReplicaKey, segment_size: int) -> list[LogRecord]:
    """Replay the journal: decrypt from the last checkpoint, then scan
    records, skipping zero-word padding; stops cleanly at a torn tail."""
    return scan_padded_stream(plaintext_stream(root, key, segment_size))


class NaiveJournalBackend:
    """The rejected mitigation: pad every flush to the full slot size.

    Size-uniform like the segmented backend, but the write amplification
    is the slot capacity over the mean flush size — two orders of
    magnitude for small sequential writes.
    """

    def __init__(self, root: str | Path, slot_capacity: int = 128 * 1024,
                 trace: StorageTrace | None = None, sync: bool = True):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.slot_capacity = slot_capacity
        self.trace = trace if trace is not None else StorageTrace()
        self.sync = sync
        self._fh = open(self.root / journal_filename(0), "ab")

    @property
    def current_file_id(self) -> int:
        return 0

    def persist_slot(self, slot_bytes: bytes) -> Lsn:
        if len(slot_bytes) > self.slot_capacity:
            raise DurabilityError(f"flush of {len(slot_bytes)} bytes exceeds the slot size")
        lsn = Lsn(0, self._fh.tell())
        padded = slot_bytes + b"\x00" * (self.slot_capacity - len(slot_bytes))
        try:
            self._fh.write(padded)
            self._fh.flush()
            if self.sync:
                os.fdatasync(self._fh.fileno())
        except OSError as exc:
            raise DurabilityError(str(exc)) from exc
        self.trace.record(StorageTrace.JOURNAL, len(padded))
        return lsn

    def close(self) -> None:
        self._fh.close()

    def recover(self) -> list[LogRecord]:
        return scan_padded_stream((self.root / journal_filename(0)).read_bytes())


class PlainJournalBackend:
    """Unprotected baseline: slot flushes land on disk byte-for-byte.

    The storage trace shows one variable-sized write per flush, which is
    exactly the side channel the segmented backend closes.
    """

    def __init__(self, root: str | Path, trace: StorageTrace | None = None, sync: bool = True):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.trace = trace if trace is not None else StorageTrace()
        self.sync = sync
        self._path = self.root / journal_filename(0)
        self._fh = open(self._path, "ab")

    @property
    def current_file_id(self) -> int:
        return 0

    def persist_slot(self, slot_bytes: bytes) -> Lsn:
        lsn = Lsn(0, self._fh.tell())
        try:
            self._fh.write(slot_bytes)
            self._fh.flush()
            if self.sync:
                os.fdatasync(self._fh.fileno())
        except OSError as exc:
            raise DurabilityError(str(exc)) from exc
        self.trace.record(StorageTrace.JOURNAL, len(slot_bytes))
        return lsn

    def close(self) -> None:
        self._fh.close()

    def recover(self) -> list[LogRecord]:
        return scan_padded_stream(self._path.read_bytes())
