"""256-byte flit layout, header packing and CRC generation.

Wire image (256 bytes)::

    0..1     header   fsn (10 bits) | replay_cmd (2 bits) | reserved (4 bits)
    2..241   payload
    242..249 CRC-64 over header || payload (big-endian)
    250..255 FEC parity, see :mod:`flitsim.fec`

The header is a little-endian 16-bit word: bits 0-9 hold the FSN, bits
10-11 the ReplayCmd, bits 12-15 are reserved and always zero.

With implicit sequence numbers (ISN) the sender's 10-bit sequence number
is XORed into payload byte 0 (low 8 bits) and the two low bits of payload
byte 1 before the CRC is computed. Only the CRC input is folded; the
payload on the wire is the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

from flitsim.crc import ECMA_182, crc64, crc64_folded

FLIT_BYTES = 256
HEADER_BYTES = 2
PAYLOAD_BYTES = 240
CRC_BYTES = 8
FEC_BYTES = 6
CORE_BYTES = HEADER_BYTES + PAYLOAD_BYTES + CRC_BYTES  # 250, the FEC-protected span
CRC_INPUT_BYTES = HEADER_BYTES + PAYLOAD_BYTES  # 242

SEQ_BITS = 10
SEQ_MOD = 1 << SEQ_BITS
HALF_WINDOW = SEQ_MOD // 2


class ReplayCmd(IntEnum):
    SEQ = 0  # FSN is the flit's own sequence number
    ACK = 1  # FSN is a piggybacked AckNum
    NACK_GO_BACK_N = 2  # FSN is the last valid sequence number
    NACK_SINGLE = 3


# -- sequence arithmetic ---------------------------------------------------


def seq_add(seq: int, n: int = 1) -> int:
    return (seq + n) % SEQ_MOD


def seq_distance(newer: int, older: int) -> int:
    """Forward distance from ``older`` to ``newer`` modulo 1024."""
    return (newer - older) % SEQ_MOD


def seq_newer(a: int, b: int) -> bool:
    """True if ``a`` is strictly ahead of ``b`` within the half window."""
    return 0 < seq_distance(a, b) < HALF_WINDOW


# -- header ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FlitHeader:
    fsn: int = 0
    replay_cmd: int = ReplayCmd.SEQ
    reserved: int = 0

    def __post_init__(self):
        if not 0 <= self.fsn < SEQ_MOD:
            raise ValueError(f"fsn out of range: {self.fsn}")
        if not 0 <= self.replay_cmd <= 3:
            raise ValueError(f"replay_cmd out of range: {self.replay_cmd}")
        if self.reserved != 0:
            raise ValueError("reserved header bits must be zero")

    def pack(self) -> bytes:
        return pack_header(self.fsn, self.replay_cmd)


def pack_header(fsn: int, replay_cmd: int) -> bytes:
    if not 0 <= fsn < SEQ_MOD:
        raise ValueError(f"fsn out of range: {fsn}")
    if not 0 <= replay_cmd <= 3:
        raise ValueError(f"replay_cmd out of range: {replay_cmd}")
    return (fsn | (replay_cmd << SEQ_BITS)).to_bytes(2, "little")


def unpack_header(raw: bytes) -> FlitHeader:
    """Decode two header bytes. Nonzero reserved bits raise ``ValueError``."""
    if len(raw) != HEADER_BYTES:
        raise ValueError(f"header must be 2 bytes, got {len(raw)}")
    word = int.from_bytes(raw, "little")
    return FlitHeader(word & (SEQ_MOD - 1), (word >> SEQ_BITS) & 0x3, word >> 12)


# -- flit ------------------------------------------------------------------


@dataclass(slots=True)
class Flit:
    """One 256B flit.

    ``data_id`` and ``true_seq`` are simulator-only ground truth: the index
    of the carried payload in the sender's stream and the sequence number
    the sender assigned. They never reach the wire and are ignored by
    equality.
    """

    header: FlitHeader
    payload: bytes
    crc: bytes
    fec: bytes = b""
    data_id: int | None = field(default=None, compare=False, repr=False)
    true_seq: int | None = field(default=None, compare=False, repr=False)

    def core(self) -> bytes:
        """Header, payload and CRC: the 250 bytes covered by FEC."""
        return self.header.pack() + self.payload + self.crc

    def wire(self) -> bytes:
        if len(self.fec) != FEC_BYTES:
            raise ValueError("FEC parity not computed")
        return self.core() + self.fec

    @classmethod
    def from_core(cls, core: bytes, **shadow) -> Flit:
        """Rebuild from a 250-byte core.

        Raises ``ValueError`` if the reserved header bits are set, which a
        receiver treats like any other integrity failure.
        """
        if len(core) != CORE_BYTES:
            raise ValueError(f"core must be {CORE_BYTES} bytes, got {len(core)}")
        header = unpack_header(core[:HEADER_BYTES])
        return cls(header, bytes(core[HEADER_BYTES:CRC_INPUT_BYTES]), bytes(core[CRC_INPUT_BYTES:]), **shadow)


def _check_payload(payload: bytes) -> None:
    if len(payload) != PAYLOAD_BYTES:
        raise ValueError(f"payload must be {PAYLOAD_BYTES} bytes, got {len(payload)}")


def fold_seq(payload: bytes, seq: int) -> bytes:
    """Payload with ``seq`` XORed into its lowest 10 bits (CRC input only)."""
    if not 0 <= seq < SEQ_MOD:
        raise ValueError(f"sequence number out of range: {seq}")
    if seq == 0:
        return bytes(payload)
    folded = bytearray(payload)
    folded[0] ^= seq & 0xFF
    folded[1] ^= (seq >> 8) & 0x3
    return bytes(folded)


def encode_flit_baseline(header: FlitHeader, payload: bytes, *, poly: int = ECMA_182) -> Flit:
    _check_payload(payload)
    payload = bytes(payload)
    return Flit(header, payload, crc64_folded(header.pack(), payload, 0, poly))


def encode_flit_isn(header: FlitHeader, payload: bytes, seq: int, *, poly: int = ECMA_182) -> Flit:
    _check_payload(payload)
    if not 0 <= seq < SEQ_MOD:
        raise ValueError(f"sequence number out of range: {seq}")
    payload = bytes(payload)
    return Flit(header, payload, crc64_folded(header.pack(), payload, seq, poly), true_seq=seq)


def verify_flit_baseline(flit: Flit, *, poly: int = ECMA_182) -> bool:
    return crc64_folded(flit.header.pack(), flit.payload, 0, poly) == flit.crc


def verify_flit_isn(flit: Flit, eseq: int, *, poly: int = ECMA_182) -> bool:
    """Check payload integrity and that the sender's sequence equals ``eseq``."""
    if not 0 <= eseq < SEQ_MOD:
        raise ValueError(f"sequence number out of range: {eseq}")
    return crc64_folded(flit.header.pack(), flit.payload, eseq, poly) == flit.crc


def verify_core(core: bytes, eseq: int | None = None, *, poly: int = ECMA_182) -> bool:
    """Verify a raw 250-byte core; ``eseq=None`` selects the baseline check.

    Works on bytes whose header cannot be decoded (reserved bits set),
    which :class:`Flit` refuses to represent.
    """
    if len(core) != CORE_BYTES:
        raise ValueError(f"core must be {CORE_BYTES} bytes, got {len(core)}")
    header = core[:HEADER_BYTES]
    payload = core[HEADER_BYTES:CRC_INPUT_BYTES]
    if eseq is not None:
        payload = fold_seq(payload, eseq)
    return crc64(header + payload, poly) == core[CRC_INPUT_BYTES:]
