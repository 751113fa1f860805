"""Seeded bit-error injection for wire flits.

Bits are numbered in transmission order, MSB first: bit ``i`` is bit
``7 - i % 8`` of byte ``i // 8``. Error masks are Python ints aligned with
``int.from_bytes(wire, "big")``, so applying a mask is one XOR.

Independent errors flip each bit with probability ``ber``; this is drawn
as a binomial count followed by distinct uniform positions, which has the
same distribution as 2048 Bernoulli trials. Optional bursts start at each
bit with probability ``burst_start_prob`` and run for a geometric number
of bits with mean ``burst_mean_len``.

Randomness comes from numpy's Philox counter-based generator. Every
trial, and every link within a trial, owns its own stream spawned from
one ``SeedSequence``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from flitsim.fec import CORE_BYTES, WAYS

WIRE_BITS = 2048
RNG_ALGORITHM = "numpy Philox4x64-10 (SeedSequence spawn per link)"

_BUFFER = 8192


@dataclass(frozen=True)
class ErrorConfig:
    """Physical-layer error parameters for one link.

    ``uc_rate`` forces an uncorrectable pattern (two wrong symbols in one
    FEC sub-block) onto a traversal with that probability, independent of
    ``ber``. It lets bandwidth runs hit a chosen uncorrectable rate without
    relying on rare random alignments.
    """

    ber: float = 0.0
    burst_enabled: bool = False
    burst_start_prob: float = 0.0
    burst_mean_len: float = 1.0
    seed: int = 0
    uc_rate: float = 0.0

    def __post_init__(self):
        for name in ("ber", "burst_start_prob", "uc_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability, got {value}")
        if self.burst_mean_len < 1.0:
            raise ValueError(f"burst_mean_len must be >= 1, got {self.burst_mean_len}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [make_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def apply_mask(wire: bytes, mask: int) -> bytes:
    if not mask:
        return bytes(wire)
    n = len(wire)
    return (int.from_bytes(wire, "big") ^ mask).to_bytes(n, "big")


def bit_mask(positions, nbits: int = WIRE_BITS) -> int:
    mask = 0
    for p in positions:
        mask |= 1 << (nbits - 1 - int(p))
    return mask


def run_mask(start: int, length: int, nbits: int = WIRE_BITS) -> int:
    """Mask of ``length`` consecutive bits from ``start``, clipped at the end."""
    end = min(start + length, nbits)
    if end <= start:
        return 0
    return ((1 << (end - start)) - 1) << (nbits - end)


def mask_positions(mask: int, nbits: int = WIRE_BITS) -> list[int]:
    return [nbits - 1 - b for b in range(nbits) if mask >> b & 1][::-1]


def _random_mask(cfg: ErrorConfig, rng: np.random.Generator, n_flips: int, n_bursts: int) -> int:
    mask = 0
    if n_flips:
        mask = bit_mask(rng.choice(WIRE_BITS, size=n_flips, replace=False))
    if n_bursts:
        starts = rng.integers(0, WIRE_BITS, size=n_bursts)
        lengths = rng.geometric(1.0 / cfg.burst_mean_len, size=n_bursts)
        for s, n in zip(starts, lengths):
            mask |= run_mask(int(s), int(n))
    return mask


def corrupt_flit(wire: bytes, cfg: ErrorConfig, rng: np.random.Generator) -> tuple[bytes, int]:
    """Apply one traversal's worth of random errors; returns (wire, mask)."""
    if len(wire) * 8 != WIRE_BITS:
        raise ValueError(f"wire flit must be {WIRE_BITS // 8} bytes, got {len(wire)}")
    n_flips = int(rng.binomial(WIRE_BITS, cfg.ber)) if cfg.ber > 0 else 0
    n_bursts = 0
    if cfg.burst_enabled and cfg.burst_start_prob > 0:
        n_bursts = int(rng.binomial(WIRE_BITS, cfg.burst_start_prob))
    mask = _random_mask(cfg, rng, n_flips, n_bursts)
    return apply_mask(wire, mask), mask


def subblock_wire_offset(way: int, position: int) -> int:
    """Wire byte holding symbol ``position`` of interleaved sub-block ``way``."""
    n_data = len(range(way, CORE_BYTES, WAYS))
    if position < n_data:
        return WAYS * position + way
    return CORE_BYTES + 2 * way + (position - n_data)


def uncorrectable_mask(rng: np.random.Generator) -> int:
    """Two nonzero symbol errors inside one randomly chosen sub-block."""
    way = int(rng.integers(0, WAYS))
    n = len(range(way, CORE_BYTES, WAYS)) + 2
    positions = rng.choice(n, size=2, replace=False)
    magnitudes = rng.integers(1, 256, size=2)
    mask = 0
    for pos, mag in zip(positions, magnitudes):
        byte = subblock_wire_offset(way, int(pos))
        mask |= int(mag) << (8 * (WIRE_BITS // 8 - 1 - byte))
    return mask


class LinkChannel:
    """One direction of one link, with buffered draws for the common case.

    ``draw()`` returns the error mask for the next traversal, usually 0.
    Draws are consumed in a fixed order, so identical seeds give identical
    streams.
    """

    def __init__(self, cfg: ErrorConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self._flips = self._bursts = self._uc = None
        self._i = _BUFFER

    def _refill(self):
        cfg, rng = self.cfg, self.rng
        self._flips = rng.binomial(WIRE_BITS, cfg.ber, size=_BUFFER).tolist() if cfg.ber > 0 else None
        if cfg.burst_enabled and cfg.burst_start_prob > 0:
            self._bursts = rng.binomial(WIRE_BITS, cfg.burst_start_prob, size=_BUFFER).tolist()
        else:
            self._bursts = None
        self._uc = (rng.random(_BUFFER) < cfg.uc_rate).tolist() if cfg.uc_rate > 0 else None
        self._i = 0

    def draw(self) -> int:
        if self._i >= _BUFFER:
            self._refill()
        i = self._i
        self._i = i + 1
        n_flips = self._flips[i] if self._flips is not None else 0
        n_bursts = self._bursts[i] if self._bursts is not None else 0
        forced = self._uc[i] if self._uc is not None else False
        if not (n_flips or n_bursts or forced):
            return 0
        mask = _random_mask(self.cfg, self.rng, n_flips, n_bursts)
        if forced:
            mask ^= uncorrectable_mask(self.rng)
        return mask

    def corrupt(self, wire: bytes) -> tuple[bytes, int]:
        mask = self.draw()
        return apply_mask(wire, mask), mask
