"""Shortened Reed-Solomon FEC for the 256B flit.

Each of the three interleaved sub-blocks is a single-symbol-correcting RS
code over GF(2^8): 2 parity symbols, generator roots alpha^0 and alpha^1,
field polynomial x^8+x^4+x^3+x^2+1 (0x11D), alpha = 0x02. A sub-block of
``k`` data bytes is the tail of a 255-symbol codeword whose leading
``253 - k`` symbols are implicit zeros.

Codeword symbol ``i`` of an ``n``-byte sub-block (data then parity) is the
coefficient of ``x^(n-1-i)``. A single error at power ``p`` with magnitude
``e`` gives syndromes ``S0 = e`` and ``S1 = e * alpha^p``; a locator that
points into the implicit-zero span cannot be a real error and is reported
as uncorrectable.

Interleaving: byte ``i`` of the 250-byte core goes to sub-block ``i % 3`` at
position ``i // 3`` (sub-block sizes 84, 83, 83). Parity of sub-block ``j``
sits at wire bytes ``250 + 2j`` and ``251 + 2j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

FIELD_POLY = 0x11D
GENERATOR = 0x02
CODE_LENGTH = 255
PARITY_SYMBOLS = 2
WAYS = 3
CORE_BYTES = 250
WIRE_BYTES = 256


def _build_tables():
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= FIELD_POLY
    exp[255:510] = exp[0:255]
    exp.flags.writeable = False
    log.flags.writeable = False
    return exp, log


GF_EXP, GF_LOG = _build_tables()

# g(x) = (x + 1)(x + alpha) = x^2 + g1*x + g0
_G1 = 1 ^ GENERATOR
_G0 = GENERATOR


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(GF_EXP[GF_LOG[a] + GF_LOG[b]])


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return int(GF_EXP[(GF_LOG[a] - GF_LOG[b]) % 255])


def gf_inv(a: int) -> int:
    return gf_div(1, a)


@njit(cache=True, nogil=True)
def _mul(a, b, exp, log):
    if a == 0 or b == 0:
        return 0
    return exp[log[a] + log[b]]


@njit(cache=True, nogil=True)
def _parity_kernel(data, exp, log, g1, g0):
    r0 = 0
    r1 = 0
    for d in data:
        fb = d ^ r0
        r0 = r1 ^ _mul(fb, g1, exp, log)
        r1 = _mul(fb, g0, exp, log)
    return r0, r1


@njit(cache=True, nogil=True)
def _syndrome_kernel(block):
    s0 = 0
    s1 = 0
    for c in block:
        s0 ^= c
        # Horner step for evaluation at alpha: s1 = s1 * alpha + c
        s1 = ((s1 << 1) ^ 0x1D) & 0xFF if s1 & 0x80 else s1 << 1
        s1 ^= c
    return s0, s1


class Outcome(Enum):
    NO_ERROR = "no_error"
    CORRECTED = "corrected"
    UNCORRECTABLE = "detected_uncorrectable"


@dataclass(frozen=True, slots=True)
class DecodeOutcome:
    """Result of decoding one sub-block.

    ``position`` indexes the sub-block's data-then-parity bytes; it and
    ``magnitude`` are set only for ``CORRECTED``.
    """

    kind: Outcome
    position: int | None = None
    magnitude: int | None = None


NO_ERROR = DecodeOutcome(Outcome.NO_ERROR)
UNCORRECTABLE = DecodeOutcome(Outcome.UNCORRECTABLE)


class FlitVerdict(Enum):
    CLEAN = "clean"
    CORRECTED = "corrected"
    UNCORRECTABLE = "detected_uncorrectable"


def _as_array(data) -> np.ndarray:
    return np.frombuffer(bytes(data), dtype=np.uint8)


def syndromes(block: bytes) -> tuple[int, int]:
    s0, s1 = _syndrome_kernel(_as_array(block))
    return int(s0), int(s1)


def rs_encode_subblock(data: bytes) -> bytes:
    """Two parity bytes for an 83- or 84-byte sub-block."""
    if len(data) not in (83, 84):
        raise ValueError(f"sub-block data must be 83 or 84 bytes, got {len(data)}")
    r0, r1 = _parity_kernel(_as_array(data), GF_EXP, GF_LOG, _G1, _G0)
    return bytes((r0, r1))


def rs_decode_subblock(block: bytes) -> tuple[bytes, DecodeOutcome]:
    """Decode data||parity (85 or 86 bytes); returns (data||parity, outcome).

    A syndrome pair that no single-symbol error can produce, or whose
    locator lands in the shortened span, is reported as uncorrectable and
    the block is returned unchanged. Any other nonzero syndrome is
    corrected under the single-error hypothesis, which silently
    miscorrects when more than one symbol is wrong.
    """
    n = len(block)
    if n not in (85, 86):
        raise ValueError(f"sub-block codeword must be 85 or 86 bytes, got {n}")
    s0, s1 = syndromes(block)
    if s0 == 0 and s1 == 0:
        return bytes(block), NO_ERROR
    if s0 == 0 or s1 == 0:
        return bytes(block), UNCORRECTABLE
    power = int(GF_LOG[s1] - GF_LOG[s0]) % 255
    if power >= n:
        return bytes(block), UNCORRECTABLE
    index = n - 1 - power
    fixed = bytearray(block)
    fixed[index] ^= s0
    return bytes(fixed), DecodeOutcome(Outcome.CORRECTED, index, s0)


def interleave(block: bytes) -> tuple[bytes, bytes, bytes]:
    if len(block) != CORE_BYTES:
        raise ValueError(f"interleave expects {CORE_BYTES} bytes, got {len(block)}")
    return block[0::3], block[1::3], block[2::3]


def deinterleave(parts: tuple[bytes, bytes, bytes]) -> bytes:
    a, b, c = parts
    if (len(a), len(b), len(c)) != (84, 83, 83):
        raise ValueError("sub-block lengths must be (84, 83, 83)")
    out = bytearray(CORE_BYTES)
    out[0::3] = a
    out[1::3] = b
    out[2::3] = c
    return bytes(out)


def fec_parity(core: bytes) -> bytes:
    """The six parity bytes for a 250-byte core."""
    return b"".join(rs_encode_subblock(part) for part in interleave(core))


def fec_encode_flit(core: bytes) -> bytes:
    if len(core) != CORE_BYTES:
        raise ValueError(f"core must be {CORE_BYTES} bytes, got {len(core)}")
    return bytes(core) + fec_parity(core)


def fec_decode_flit(wire: bytes) -> tuple[bytes, tuple[DecodeOutcome, ...], FlitVerdict]:
    if len(wire) != WIRE_BYTES:
        raise ValueError(f"wire flit must be {WIRE_BYTES} bytes, got {len(wire)}")
    parts = interleave(wire[:CORE_BYTES])
    fixed = []
    outcomes = []
    for j, part in enumerate(parts):
        parity = wire[CORE_BYTES + 2 * j : CORE_BYTES + 2 * j + 2]
        block, outcome = rs_decode_subblock(part + parity)
        fixed.append(block[:-PARITY_SYMBOLS])
        outcomes.append(outcome)
    kinds = {o.kind for o in outcomes}
    if Outcome.UNCORRECTABLE in kinds:
        verdict = FlitVerdict.UNCORRECTABLE
    elif Outcome.CORRECTED in kinds:
        verdict = FlitVerdict.CORRECTED
    else:
        verdict = FlitVerdict.CLEAN
    return deinterleave(tuple(fixed)), tuple(outcomes), verdict


def describe() -> dict[str, str]:
    """Field and generator constants, for report metadata."""
    return {
        "fec_field_poly": f"{FIELD_POLY:#x}",
        "fec_generator": f"{GENERATOR:#x}",
        "fec_roots": "alpha^0,alpha^1",
        "fec_interleave": "3-way, byte i -> sub-block i%3",
    }
