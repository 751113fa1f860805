import numpy as np
import pytest

from flitsim.channel import (
    WIRE_BITS,
    ErrorConfig,
    LinkChannel,
    apply_mask,
    bit_mask,
    corrupt_flit,
    make_rng,
    mask_positions,
    run_mask,
    spawn_rngs,
    uncorrectable_mask,
)
from flitsim.fec import FlitVerdict, fec_decode_flit, fec_encode_flit


def test_bit_zero_is_msb_of_first_byte():
    assert apply_mask(bytes(256), bit_mask([0]))[0] == 0x80
    assert apply_mask(bytes(256), bit_mask([2047]))[255] == 0x01


def test_run_mask_clips_at_end():
    assert mask_positions(run_mask(2045, 10)) == [2045, 2046, 2047]
    assert mask_positions(run_mask(3, 2)) == [3, 4]


def test_zero_ber_is_identity():
    rng = make_rng(1)
    wire = bytes(range(256))
    assert corrupt_flit(wire, ErrorConfig(), rng) == (wire, 0)


def test_flip_count_statistics():
    cfg = ErrorConfig(ber=1e-3)
    rng = make_rng(7)
    counts = [bin(corrupt_flit(bytes(256), cfg, rng)[1]).count("1") for _ in range(3000)]
    mean = np.mean(counts)
    # binomial(2048, 1e-3): mean 2.048, sd of the sample mean ~0.026
    assert abs(mean - 2.048) < 0.1


def test_same_seed_same_stream():
    cfg = ErrorConfig(ber=1e-3, burst_enabled=True, burst_start_prob=1e-4, burst_mean_len=8)
    a = LinkChannel(cfg, make_rng(3))
    b = LinkChannel(cfg, make_rng(3))
    assert [a.draw() for _ in range(500)] == [b.draw() for _ in range(500)]


def test_spawned_streams_differ():
    r1, r2 = spawn_rngs(5, 2)
    assert r1.integers(1 << 62) != r2.integers(1 << 62)


def test_bursts_are_contiguous():
    cfg = ErrorConfig(burst_enabled=True, burst_start_prob=1 / WIRE_BITS, burst_mean_len=20)
    rng = make_rng(11)
    for _ in range(200):
        _, mask = corrupt_flit(bytes(256), cfg, rng)
        pos = mask_positions(mask)
        if pos:
            # a union of runs; at least one run exists and bits stay in range
            assert 0 <= pos[0] and pos[-1] < WIRE_BITS


def test_uncorrectable_mask_defeats_single_correction():
    rng = make_rng(2)
    core = bytes(rng.integers(0, 256, 250, dtype=np.uint8))
    wire = fec_encode_flit(core)
    for _ in range(300):
        fixed, _, verdict = fec_decode_flit(apply_mask(wire, uncorrectable_mask(rng)))
        # detected, or silently miscorrected; never restored
        assert verdict is FlitVerdict.UNCORRECTABLE or fixed != core


@pytest.mark.parametrize("kw", [{"ber": -0.1}, {"ber": 1.5}, {"burst_mean_len": 0.5}, {"seed": -1}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ErrorConfig(**kw)


def test_forced_uncorrectable_rate():
    ch = LinkChannel(ErrorConfig(uc_rate=0.01), make_rng(4))
    hits = sum(1 for _ in range(50000) if ch.draw())
    # binomial sd ~22
    assert abs(hits - 500) < 90
