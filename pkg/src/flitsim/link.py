"""Endpoint transmit/receive state machines with go-back-N replay.

Two protocol modes share the same flit format:

``BASELINE``
    The header FSN carries either the flit's own sequence number
    (ReplayCmd 0) or a piggybacked AckNum (ReplayCmd 1). A piggybacked flit
    is accepted on CRC alone, so the receiver cannot tell whether an
    earlier flit went missing. It still advances its expected counter but
    keeps ``last_validated_seq`` at the last explicitly numbered flit.

``RXL``
    The FSN carries only an AckNum (or zero). The sender's sequence number
    is folded into the end-to-end CRC, so every accepted flit is
    sequence-checked.

NACK values:

* an integrity failure (CRC/ECRC mismatch, FEC-uncorrectable) NACKs
  ``eseq - 1``, the receiver's running position;
* an explicit sequence mismatch (ReplayCmd 0 with a newer FSN) NACKs
  ``last_validated_seq``, because any piggybacked flits accepted since
  then are suspect.

Retransmitted flits never piggyback, so in baseline they always carry
their own sequence number.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

from flitsim.crc import ECMA_182
from flitsim.flit import (
    HALF_WINDOW,
    SEQ_MOD,
    Flit,
    FlitHeader,
    ReplayCmd,
    encode_flit_baseline,
    encode_flit_isn,
    seq_add,
    seq_distance,
    seq_newer,
    verify_flit_baseline,
    verify_flit_isn,
)

WINDOW = HALF_WINDOW


class ProtocolMode(Enum):
    BASELINE = "baseline"
    RXL = "rxl"

    @classmethod
    def parse(cls, text: str) -> ProtocolMode:
        key = text.strip().lower()
        aliases = {"baseline": cls.BASELINE, "cxl": cls.BASELINE, "cxl_baseline": cls.BASELINE, "rxl": cls.RXL}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown protocol mode {text!r} (expected baseline or rxl)") from None


class WindowFull(Exception):
    """The replay buffer holds a full window; the caller must stall."""


class ProtocolError(AssertionError):
    """A NACK asked for a flit that is no longer in the replay buffer."""


@lru_cache(maxsize=4 * SEQ_MOD)
def _header(fsn: int, cmd: int) -> FlitHeader:
    return FlitHeader(fsn, cmd)


@dataclass(slots=True)
class ReplayEntry:
    seq: int
    payload: bytes
    data_id: int | None = None


# -- transmitter -----------------------------------------------------------


@dataclass
class Transmitter:
    mode: ProtocolMode
    poly: int = ECMA_182
    capacity: int = WINDOW
    next_seq: int = 0
    replay_buffer: deque = field(default_factory=deque)
    retry_queue: deque = field(default_factory=deque)
    # last_valid of a retry that has been scheduled but has not sent its
    # first retransmission yet; a repeat NACK for it is coalesced
    retry_pending: int | None = None

    def __post_init__(self):
        if not 1 <= self.capacity <= WINDOW:
            raise ValueError(f"replay capacity must be in 1..{WINDOW}")

    @property
    def outstanding(self) -> int:
        return len(self.replay_buffer)

    @property
    def window_full(self) -> bool:
        return len(self.replay_buffer) >= self.capacity

    @property
    def oldest_unacked(self) -> int | None:
        return self.replay_buffer[0].seq if self.replay_buffer else None

    def _encode(self, seq: int, payload: bytes, ack: int | None) -> Flit:
        if self.mode is ProtocolMode.BASELINE:
            header = _header(seq, ReplayCmd.SEQ) if ack is None else _header(ack, ReplayCmd.ACK)
            flit = encode_flit_baseline(header, payload, poly=self.poly)
            flit.true_seq = seq
        else:
            header = _header(0, ReplayCmd.SEQ) if ack is None else _header(ack, ReplayCmd.ACK)
            flit = encode_flit_isn(header, payload, seq, poly=self.poly)
        return flit

    def emit(
        self, payload: bytes, piggyback_ack: int | None = None, data_id: int | None = None, materialize: bool = True
    ) -> Flit | None:
        """Send a new flit and keep its payload for replay.

        With ``materialize=False`` only the bookkeeping happens and no flit
        is built; for callers that already know the flit arrives intact.
        """
        if self.window_full:
            raise WindowFull(f"{len(self.replay_buffer)} flits outstanding")
        seq = self.next_seq
        self.replay_buffer.append(ReplayEntry(seq, payload, data_id))
        self.next_seq = seq_add(seq)
        if not materialize:
            return None
        flit = self._encode(seq, payload, piggyback_ack)
        flit.data_id = data_id
        return flit

    def _release_through(self, acknum: int) -> int:
        buf = self.replay_buffer
        if not buf:
            return 0
        ahead = seq_distance(acknum, buf[0].seq)
        if ahead >= len(buf):
            return 0  # stale or outside the window
        for _ in range(ahead + 1):
            buf.popleft()
        return ahead + 1

    def on_ack(self, acknum: int) -> int:
        """Release every entry up to and including ``acknum``; returns the count."""
        released = self._release_through(acknum)
        if released and self.retry_queue:
            while self.retry_queue and not self._in_buffer(self.retry_queue[0].seq):
                self.retry_queue.popleft()
        return released

    def _in_buffer(self, seq: int) -> bool:
        buf = self.replay_buffer
        return bool(buf) and seq_distance(seq, buf[0].seq) < len(buf)

    def on_nack(self, last_valid: int) -> list[int]:
        """Schedule go-back-N from ``last_valid + 1``; returns the scheduled seqs.

        A NACK also acknowledges everything through ``last_valid``. A repeat
        of the pending retry's NACK is coalesced and returns ``[]``.
        """
        if self.retry_pending is not None and last_valid == self.retry_pending:
            return []
        self._release_through(last_valid)
        start = seq_add(last_valid)
        buf = self.replay_buffer
        if not buf:
            if start != self.next_seq:
                raise ProtocolError(f"NACK({last_valid}) but nothing is outstanding before {self.next_seq}")
            return []
        if buf[0].seq != start:
            raise ProtocolError(f"NACK({last_valid}) needs seq {start}, oldest buffered is {buf[0].seq}")
        self.retry_queue = deque(buf)
        self.retry_pending = last_valid
        return [e.seq for e in buf]

    def timeout(self) -> list[int]:
        """Replay timer expiry: go back to the oldest unacknowledged flit."""
        if not self.replay_buffer:
            return []
        self.retry_pending = None
        return self.on_nack((self.replay_buffer[0].seq - 1) % SEQ_MOD)

    @property
    def retransmitting(self) -> bool:
        return bool(self.retry_queue)

    def next_retransmission(self) -> Flit | None:
        if not self.retry_queue:
            return None
        entry = self.retry_queue.popleft()
        self.retry_pending = None
        flit = self._encode(entry.seq, entry.payload, None)
        flit.data_id = entry.data_id
        return flit


# -- receiver --------------------------------------------------------------


class RxKind(Enum):
    FORWARD = "forward"
    NACK = "nack"
    DISCARD_DUPLICATE = "discard_duplicate"


@dataclass(frozen=True, slots=True)
class RxAction:
    kind: RxKind
    flit: Flit | None = None
    nack: int | None = None
    validated: bool = False
    ack_for_reverse: int | None = None  # AckNum piggybacked by the peer
    sequence_error: bool = False  # NACK caused by an explicit FSN mismatch


@dataclass
class Receiver:
    mode: ProtocolMode
    poly: int = ECMA_182
    coalesce_k: int = 10
    eseq: int = 0
    last_validated_seq: int = SEQ_MOD - 1
    ack_coalesce_counter: int = 0

    def __post_init__(self):
        if self.coalesce_k < 1:
            raise ValueError("coalesce_k must be >= 1")

    def _forward(self, flit: Flit, validated: bool, ack: int | None) -> RxAction:
        if validated:
            self.last_validated_seq = self.eseq
        self.eseq = seq_add(self.eseq)
        self.ack_coalesce_counter += 1
        return RxAction(RxKind.FORWARD, flit, validated=validated, ack_for_reverse=ack)

    def _nack(self, value: int, sequence_error: bool = False) -> RxAction:
        self.last_validated_seq = value
        self.eseq = seq_add(value)
        return RxAction(RxKind.NACK, nack=value, sequence_error=sequence_error)

    def accept_intact(self, piggyback_ack: int | None = None) -> RxAction:
        """Receive a flit known to be intact and carrying sequence ``eseq``.

        Same result as :meth:`accept` on such a flit, without the CRC work.
        """
        validated = self.mode is ProtocolMode.RXL or piggyback_ack is None
        return self._forward(None, validated, piggyback_ack)

    def integrity_failure(self) -> RxAction:
        """FEC flagged the flit uncorrectable, or its header is malformed."""
        return self._nack((self.eseq - 1) % SEQ_MOD)

    def accept(self, flit: Flit) -> RxAction:
        """Process one FEC-decoded flit."""
        cmd = flit.header.replay_cmd
        ack = flit.header.fsn if cmd == ReplayCmd.ACK else None
        if self.mode is ProtocolMode.RXL:
            if verify_flit_isn(flit, self.eseq, poly=self.poly):
                return self._forward(flit, True, ack)
            return self.integrity_failure()

        if not verify_flit_baseline(flit, poly=self.poly):
            return self.integrity_failure()
        if cmd != ReplayCmd.SEQ:
            # no sequence number on the wire: data integrity only
            return self._forward(flit, False, ack)
        fsn = flit.header.fsn
        if fsn == self.eseq:
            return self._forward(flit, True, None)
        if seq_newer(fsn, self.eseq):
            return self._nack(self.last_validated_seq, sequence_error=True)
        lv = self.last_validated_seq
        if 0 < seq_distance(fsn, lv) < seq_distance(self.eseq, lv):
            # a resent flit we had accepted unvalidated: its FSN confirms it
            self.last_validated_seq = fsn
        return RxAction(RxKind.DISCARD_DUPLICATE, flit)

    def ack_due(self) -> int | None:
        """AckNum to send once ``coalesce_k`` flits have been forwarded.

        The ACK names the last sequence-validated flit: acknowledging a
        flit accepted on CRC alone could release a silently dropped
        predecessor from the sender's replay buffer.
        """
        if self.ack_coalesce_counter < self.coalesce_k:
            return None
        self.ack_coalesce_counter = 0
        return self.last_validated_seq

    def flush_ack(self) -> int | None:
        """ACK any forwarded flits early, e.g. when the link goes idle."""
        if self.ack_coalesce_counter == 0:
            return None
        self.ack_coalesce_counter = 0
        return self.last_validated_seq


class AckRoute(Enum):
    PIGGYBACK = "piggyback"
    STANDALONE = "standalone"


@dataclass(frozen=True, slots=True)
class AckDirective:
    acknum: int
    route: AckRoute


def ack_scheduler(rx: Receiver, reverse_flit_pending: bool, standalone_ack: bool = False) -> AckDirective | None:
    """Decide whether and how to send an ACK after a forwarded flit."""
    acknum = rx.ack_due()
    if acknum is None:
        return None
    if reverse_flit_pending and not standalone_ack:
        return AckDirective(acknum, AckRoute.PIGGYBACK)
    return AckDirective(acknum, AckRoute.STANDALONE)
