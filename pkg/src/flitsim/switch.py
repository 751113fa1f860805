"""Stateless intermediate switch: FEC decode, drop or forward, FEC re-encode.

A baseline switch terminates the link-layer CRC: it checks it on ingress
and regenerates it on egress, so corruption introduced inside the switch
leaves with a valid CRC. An RXL switch only runs FEC and treats the
250-byte core as opaque; the end-to-end CRC is checked by the endpoint.
Neither keeps any per-flow state.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from flitsim.crc import ECMA_182, crc64
from flitsim.fec import CORE_BYTES, FlitVerdict, fec_decode_flit, fec_encode_flit
from flitsim.flit import CRC_INPUT_BYTES, verify_core
from flitsim.channel import apply_mask, bit_mask
from flitsim.link import ProtocolMode

log = logging.getLogger(__name__)

CORE_BITS = CORE_BYTES * 8


class DropReason(Enum):
    FEC_UNCORRECTABLE = "fec_uncorrectable"
    CRC_MISMATCH = "crc_mismatch"
    FORCED = "forced"


@dataclass
class SwitchConfig:
    mode: ProtocolMode
    internal_error_prob: float = 0.0
    check_crc: bool | None = None  # default: on for baseline, off for RXL
    regenerate_crc: bool | None = None  # default: follows check_crc
    poly: int = ECMA_182
    drop_log: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if not 0.0 <= self.internal_error_prob <= 1.0:
            raise ValueError("internal_error_prob must be a probability")
        if self.check_crc is None:
            self.check_crc = self.mode is ProtocolMode.BASELINE
        if self.regenerate_crc is None:
            self.regenerate_crc = self.check_crc


@dataclass(frozen=True, slots=True)
class Forward:
    wire: bytes
    verdict: FlitVerdict
    internal_mask: int = 0  # ground truth, over the 250-byte core


@dataclass(frozen=True, slots=True)
class Drop:
    reason: DropReason


def record_drop(sw: SwitchConfig, reason: DropReason) -> Drop:
    sw.drop_log[reason.value] += 1
    # diagnostic report towards the originator; never triggers recovery
    log.debug("switch drop: %s", reason.value)
    return Drop(reason)


def internal_corruption(rng: np.random.Generator) -> int:
    """Flip 1 to 8 distinct random bits of the core."""
    n = int(rng.integers(1, 9))
    return bit_mask(rng.choice(CORE_BITS, size=n, replace=False), CORE_BITS)


def switch_forward(
    sw: SwitchConfig, wire: bytes, rng: np.random.Generator, *, force_internal: bool = False
) -> Forward | Drop:
    core, _, verdict = fec_decode_flit(wire)
    if verdict is FlitVerdict.UNCORRECTABLE:
        return record_drop(sw, DropReason.FEC_UNCORRECTABLE)
    if sw.check_crc and not verify_core(core, poly=sw.poly):
        return record_drop(sw, DropReason.CRC_MISMATCH)
    mask = 0
    if force_internal or (sw.internal_error_prob > 0 and rng.random() < sw.internal_error_prob):
        mask = internal_corruption(rng)
        core = apply_mask(core, mask)
        if sw.regenerate_crc:
            core = core[:CRC_INPUT_BYTES] + crc64(core[:CRC_INPUT_BYTES], sw.poly)
    return Forward(fec_encode_flit(core), verdict, mask)
