"""Exhaustive and sampled codec property checks behind ``flitsim codec-selftest``."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from flitsim.channel import make_rng
from flitsim.crc import crc64
from flitsim.fec import (
    CORE_BYTES,
    WIRE_BYTES,
    FlitVerdict,
    fec_decode_flit,
    fec_encode_flit,
    rs_decode_subblock,
    rs_encode_subblock,
)
from flitsim.flit import (
    PAYLOAD_BYTES,
    SEQ_MOD,
    FlitHeader,
    encode_flit_baseline,
    encode_flit_isn,
    verify_core,
    verify_flit_isn,
)

CORE_BITS = CORE_BYTES * 8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _flip_core(core: bytes, mask: int) -> bytes:
    return (int.from_bytes(core, "big") ^ mask).to_bytes(CORE_BYTES, "big")


def check_crc_vector(rng) -> tuple[bool, str]:
    got = crc64(b"123456789").hex()
    return got == "6c40df5f0b497347", f"crc64('123456789') = {got}"


def check_isn_pairs(rng) -> tuple[bool, str]:
    payload = rng.bytes(PAYLOAD_BYTES)
    header = FlitHeader(0, 0)
    bad = 0
    for seq in range(SEQ_MOD):
        flit = encode_flit_isn(header, payload, seq)
        for eseq in range(SEQ_MOD):
            if eseq != seq and verify_flit_isn(flit, eseq):
                bad += 1
    return bad == 0, f"{SEQ_MOD * (SEQ_MOD - 1)} mismatched pairs, {bad} accepted"


def check_isn_zero(rng) -> tuple[bool, str]:
    payload = rng.bytes(PAYLOAD_BYTES)
    same = 0
    for fsn in (0, 1, 517, 1023):
        for cmd in (0, 1):
            h = FlitHeader(fsn, cmd)
            same += encode_flit_isn(h, payload, 0) == encode_flit_baseline(h, payload)
    return same == 8, f"{same}/8 headers identical at seq 0"


def _core(rng, isn_seq: int | None) -> bytes:
    payload = rng.bytes(PAYLOAD_BYTES)
    h = FlitHeader(int(rng.integers(SEQ_MOD)), int(rng.integers(2)))
    f = encode_flit_baseline(h, payload) if isn_seq is None else encode_flit_isn(h, payload, isn_seq)
    return f.core()


def check_single_bits(rng) -> tuple[bool, str]:
    missed = 0
    for seq in (None, 371):
        core = _core(rng, seq)
        for bit in range(CORE_BITS):
            if verify_core(_flip_core(core, 1 << bit), seq):
                missed += 1
    return missed == 0, f"{2 * CORE_BITS} single-bit flips (baseline and ISN), {missed} undetected"


def check_bursts(rng) -> tuple[bool, str]:
    missed = total = 0
    for seq in (None, 602):
        core = _core(rng, seq)
        for length in range(1, 65):
            inner = length - 2
            for start in range(CORE_BITS - length + 1):
                # burst: first and last bit set, interior random
                pattern = 1 if length == 1 else (1 << (length - 1)) | 1
                if inner > 0:
                    pattern |= int(rng.integers(0, 1 << inner, dtype=np.uint64)) << 1
                mask = pattern << (CORE_BITS - start - length)
                total += 1
                if verify_core(_flip_core(core, mask), seq):
                    missed += 1
    return missed == 0, f"{total} bursts of 1..64 bits, {missed} undetected"


def check_fec_single_symbol(rng) -> tuple[bool, str]:
    core = rng.bytes(CORE_BYTES)
    wire = fec_encode_flit(core)
    wrong = total = 0
    for pos in range(WIRE_BYTES):
        for mag in rng.choice(np.arange(1, 256), size=8, replace=False):
            bad = bytearray(wire)
            bad[pos] ^= int(mag)
            fixed, _, verdict = fec_decode_flit(bytes(bad))
            total += 1
            if fixed != core or verdict is not FlitVerdict.CORRECTED:
                wrong += 1
    return wrong == 0, f"{total} single-symbol errors, {wrong} not corrected exactly"


def check_fec_three_byte_bursts(rng) -> tuple[bool, str]:
    core = rng.bytes(CORE_BYTES)
    wire = fec_encode_flit(core)
    wrong = 0
    offsets = range(CORE_BYTES - 2)  # 0..247
    for off in offsets:
        bad = bytearray(wire)
        for j in range(3):
            bad[off + j] ^= int(rng.integers(1, 256))
        fixed, _, verdict = fec_decode_flit(bytes(bad))
        if fixed != core or verdict is not FlitVerdict.CORRECTED:
            wrong += 1
    return wrong == 0, f"{len(offsets)} 3-byte bursts in the interleaved region, {wrong} not corrected"


def burst_detection_fraction(symbols: int, trials: int, rng) -> float:
    """Share of random ``symbols``-byte bursts in the core that FEC flags uncorrectable."""
    core = rng.bytes(CORE_BYTES)
    wire = fec_encode_flit(core)
    offsets = rng.integers(0, CORE_BYTES - symbols + 1, size=trials)
    mags = rng.integers(1, 256, size=(trials, symbols))
    detected = 0
    for off, mag in zip(offsets.tolist(), mags.tolist()):
        bad = bytearray(wire)
        for j, m in enumerate(mag):
            bad[off + j] ^= m
        if fec_decode_flit(bytes(bad))[2] is FlitVerdict.UNCORRECTABLE:
            detected += 1
    return detected / trials


def check_rs_roundtrip(rng) -> tuple[bool, str]:
    ok = 0
    for n in (83, 84):
        for _ in range(200):
            data = rng.bytes(n)
            block = data + rs_encode_subblock(data)
            out, outcome = rs_decode_subblock(block)
            ok += out == block and outcome.kind.value == "no_error"
    return ok == 400, f"{ok}/400 clean sub-blocks decode unchanged"


CHECKS: dict[str, Callable] = {
    "crc64_check_value": check_crc_vector,
    "isn_all_pairs": check_isn_pairs,
    "isn_seq0_equals_baseline": check_isn_zero,
    "crc_single_bit": check_single_bits,
    "crc_bursts_le_64": check_bursts,
    "rs_clean_roundtrip": check_rs_roundtrip,
    "fec_single_symbol": check_fec_single_symbol,
    "fec_3byte_bursts": check_fec_three_byte_bursts,
}

# detection model for b-symbol bursts spread over 3 interleaved sub-blocks
BURST_MODEL = {4: 2 / 3, 5: 8 / 9, 6: 26 / 27}


def run_selftest(seed: int = 0, burst_trials: int = 0) -> list[CheckResult]:
    rng = make_rng(seed)
    results = []
    for name, fn in CHECKS.items():
        t = time.perf_counter()
        passed, detail = fn(rng)
        results.append(CheckResult(name, passed, detail, time.perf_counter() - t))
    if burst_trials:
        for b, model in BURST_MODEL.items():
            t = time.perf_counter()
            frac = burst_detection_fraction(b, burst_trials, rng)
            passed = abs(frac - model) <= 0.10
            detail = f"{b}-symbol bursts: detected {frac:.4f} vs model {model:.4f} over {burst_trials} trials"
            results.append(CheckResult(f"fec_detect_{b}sym", passed, detail, time.perf_counter() - t))
    return results
