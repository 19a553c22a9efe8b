"""Append-only, hash-chained ledger with a private (delegator) and a public
(worker) channel.

Blocks hold one record each. A block's digest covers its header, the stored
payload hash and the raw payload, so editing any byte of a block breaks both
its own payload check and the next block's link.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import struct
import threading
from dataclasses import dataclass, fields
from functools import cached_property
from typing import Dict, List, NamedTuple, Tuple

ZERO_HASH = bytes(32)


class InvalidRecord(ValueError):
    pass


class NotConnected(RuntimeError):
    pass


class LedgerFormatError(ValueError):
    pass


class Channel(enum.IntEnum):
    DELEGATOR = 0
    WORKER = 1


@dataclass(frozen=True)
class TransactionRecord:
    iteration_id: int
    task_id: int
    worker_id: str
    jobs_executed: int
    speed_gain: float
    steal_chunk_size: int
    location: str
    lambda_: int
    task_complexity: float
    timestamp: int
    total_jobs: int
    count_mismatch: bool = False
    id_fabrication: bool = False
    incomplete_chunks: int = 0
    deadline_violations: int = 0

    def check(self):
        if self.lambda_ not in (1, -1):
            raise InvalidRecord(f"lambda must be +1 or -1, got {self.lambda_!r}")
        if not isinstance(self.worker_id, str) or not self.worker_id:
            raise InvalidRecord("worker_id must be a non-empty string")
        for name in ("jobs_executed", "total_jobs", "incomplete_chunks", "deadline_violations"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise InvalidRecord(f"{name} must be a non-negative integer")
        if not isinstance(self.steal_chunk_size, int) or self.steal_chunk_size < 1:
            raise InvalidRecord("steal_chunk_size must be ≥ 1")
        for name in ("speed_gain", "task_complexity"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidRecord(f"{name} must be a positive real")

    def to_bytes(self):
        out = [struct.pack(">qq", self.iteration_id, self.task_id), _pack_str(self.worker_id),
               struct.pack(">qdq", self.jobs_executed, float(self.speed_gain), self.steal_chunk_size),
               _pack_str(self.location),
               struct.pack(">qdqq??qq", self.lambda_, float(self.task_complexity), self.timestamp,
                           self.total_jobs, self.count_mismatch, self.id_fabrication,
                           self.incomplete_chunks, self.deadline_violations)]
        return b"".join(out)

    @classmethod
    def from_bytes(cls, buf, pos=0):
        iteration_id, task_id = struct.unpack_from(">qq", buf, pos)
        pos += 16
        worker_id, pos = _unpack_str(buf, pos)
        jobs, sg, chunk = struct.unpack_from(">qdq", buf, pos)
        pos += 24
        location, pos = _unpack_str(buf, pos)
        tail = struct.unpack_from(">qdqq??qq", buf, pos)
        pos += struct.calcsize(">qdqq??qq")
        lam, cx, ts, total, cm, fab, inc, dv = tail
        rec = cls(iteration_id, task_id, worker_id, jobs, sg, chunk, location, lam, cx, ts,
                  total, cm, fab, inc, dv)
        return rec, pos

    def to_json(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _pack_str(s):
    raw = s.encode("utf-8")
    return struct.pack(">I", len(raw)) + raw


def _unpack_str(buf, pos):
    (n,) = struct.unpack_from(">I", buf, pos)
    pos += 4
    if pos + n > len(buf):
        raise LedgerFormatError("string runs past end of payload")
    return bytes(buf[pos:pos + n]).decode("utf-8"), pos + n


def encode_records(records):
    return struct.pack(">I", len(records)) + b"".join(r.to_bytes() for r in records)


def decode_records(payload):
    (n,) = struct.unpack_from(">I", payload, 0)
    pos = 4
    out = []
    for _ in range(n):
        rec, pos = TransactionRecord.from_bytes(payload, pos)
        out.append(rec)
    if pos != len(payload):
        raise LedgerFormatError("trailing bytes in payload")
    return tuple(out)


@dataclass(frozen=True)
class Block:
    height: int
    channel: Channel
    prev_hash: bytes
    payload_hash: bytes
    payload: bytes

    @cached_property
    def records(self) -> Tuple[TransactionRecord, ...]:
        return decode_records(self.payload)

    def header(self):
        return struct.pack(">QB", self.height, int(self.channel)) + self.prev_hash + self.payload_hash

    def to_bytes(self):
        return self.header() + self.payload

    @property
    def digest(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()

    @classmethod
    def seal(cls, height, channel, prev_hash, records):
        payload = encode_records(records)
        return cls(height, Channel(channel), prev_hash, hashlib.sha256(payload).digest(), payload)

    @classmethod
    def from_bytes(cls, raw):
        if len(raw) < 73:
            raise LedgerFormatError("block shorter than its header")
        height, ch = struct.unpack_from(">QB", raw, 0)
        # channel kept raw so tampered values survive for verify_chain to flag
        return cls(height, ch, bytes(raw[9:41]), bytes(raw[41:73]), bytes(raw[73:]))


class Receipt(NamedTuple):
    status: str  # "committed" | "buffered"
    height: int = None


class Violation(NamedTuple):
    height: int
    reason: str


class LedgerStore:
    """Single-writer store. Mutations and reads are serialized by one lock."""

    def __init__(self, connected=True):
        self.chains: Dict[Channel, List[Block]] = {
            ch: [Block.seal(0, ch, ZERO_HASH, ())] for ch in Channel}
        self.offline_buffer: List[Tuple[Channel, TransactionRecord]] = []
        self.connected = connected
        self._lock = threading.RLock()

    def connect(self):
        self.connected = True

    def disconnect(self):
        self.connected = False

    def height(self, channel):
        return len(self.chains[Channel(channel)]) - 1

    def _commit(self, channel, record):
        chain = self.chains[channel]
        block = Block.seal(len(chain), channel, chain[-1].digest, (record,))
        chain.append(block)
        return block.height

    def append_transaction(self, channel, record: TransactionRecord) -> Receipt:
        channel = Channel(channel)
        record.check()
        with self._lock:
            if not self.connected:
                self.offline_buffer.append((channel, record))
                return Receipt("buffered")
            return Receipt("committed", self._commit(channel, record))

    def flush_offline_buffer(self) -> int:
        with self._lock:
            if not self.connected:
                raise NotConnected("cannot flush while disconnected")
            n = 0
            for channel, record in self.offline_buffer:
                self._commit(channel, record)
                n += 1
            self.offline_buffer.clear()
            return n

    def verify_chain(self, channel) -> List[Violation]:
        """Recompute every payload hash and link; an empty list means intact."""
        channel = Channel(channel)
        with self._lock:
            chain = list(self.chains[channel])
        problems = []
        prev = ZERO_HASH
        for i, block in enumerate(chain):
            if block.height != i:
                problems.append(Violation(i, "height"))
            if block.channel != channel:
                problems.append(Violation(i, "channel"))
            if block.prev_hash != prev:
                problems.append(Violation(i, "link"))
            if hashlib.sha256(block.payload).digest() != block.payload_hash:
                problems.append(Violation(i, "payload"))
            elif i > 0:
                try:
                    if not block.records:
                        problems.append(Violation(i, "empty"))
                except (LedgerFormatError, struct.error, UnicodeDecodeError):
                    problems.append(Violation(i, "undecodable"))
            prev = block.digest
        return problems

    def query_worker_history(self, channel, worker_id) -> List[TransactionRecord]:
        with self._lock:
            chain = list(self.chains[Channel(channel)])
        return [r for b in chain[1:] for r in b.records if r.worker_id == worker_id]

    def digests(self, channel):
        return [b.digest for b in self.chains[Channel(channel)]]

    # -- export / import ---------------------------------------------------

    def export(self, path):
        """Write every block of both channels as one JSON line each."""
        with self._lock, open(path, "w") as fh:
            for ch in Channel:
                for b in self.chains[ch]:
                    line = {
                        "channel": ch.name.lower(),
                        "height": b.height,
                        "prev_hash": b.prev_hash.hex(),
                        "payload_hash": b.payload_hash.hex(),
                        "payload": b.payload.hex(),
                        "records": [r.to_json() for r in b.records],
                        "digest": b.digest.hex(),
                    }
                    fh.write(json.dumps(line, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, strict=True):
        """Rebuild a store from :meth:`export` output.

        Blocks are restored byte-for-byte. With ``strict`` a line whose digest
        or readable ``records`` disagree with its payload raises
        :class:`LedgerFormatError`; otherwise mismatches are returned in
        ``store.import_problems`` for the caller to report.
        """
        store = cls(connected=True)
        store.import_problems = []
        chains = {ch: [] for ch in Channel}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    ch = Channel[d["channel"].upper()]
                    raw = (struct.pack(">QB", d["height"], int(ch)) + bytes.fromhex(d["prev_hash"])
                           + bytes.fromhex(d["payload_hash"]) + bytes.fromhex(d["payload"]))
                    block = Block.from_bytes(raw)
                    declared = bytes.fromhex(d["digest"])
                except (KeyError, ValueError, TypeError, struct.error) as exc:
                    raise LedgerFormatError(f"line {lineno}: {exc}") from exc
                problem = None
                if block.digest != declared:
                    problem = "digest"
                else:
                    try:
                        if [r.to_json() for r in block.records] != d.get("records", []):
                            problem = "records"
                    except (LedgerFormatError, struct.error, UnicodeDecodeError):
                        problem = "undecodable"
                if problem:
                    if strict:
                        raise LedgerFormatError(f"line {lineno}: {problem} mismatch")
                    store.import_problems.append((ch, block.height, problem))
                chains[ch].append(block)
        for ch in Channel:
            if chains[ch]:
                store.chains[ch] = chains[ch]
        return store


def _flip_bit(store: LedgerStore, channel, height: int, bit: int):
    """Test-only backdoor: flip one bit of a committed block's serialized form."""
    chain = store.chains[Channel(channel)]
    raw = bytearray(chain[height].to_bytes())
    raw[bit // 8] ^= 1 << (bit % 8)
    chain[height] = Block.from_bytes(bytes(raw))
