from collections import Counter

import pytest

from flitsim import switch as switch_mod
from flitsim.channel import apply_mask, make_rng, uncorrectable_mask
from flitsim.fec import FlitVerdict, fec_encode_flit
from flitsim.flit import FlitHeader, encode_flit_baseline, encode_flit_isn, verify_core
from flitsim.link import ProtocolMode
from flitsim.switch import Drop, DropReason, Forward, SwitchConfig, switch_forward

P = bytes(range(240))


def wire_of(flit):
    return fec_encode_flit(flit.core())


def test_clean_flit_forwarded_unchanged():
    flits = {
        ProtocolMode.BASELINE: encode_flit_baseline(FlitHeader(3, 1), P),
        ProtocolMode.RXL: encode_flit_isn(FlitHeader(3, 1), P, 9),
    }
    for mode, flit in flits.items():
        w = wire_of(flit)
        out = switch_forward(SwitchConfig(mode), w, make_rng(0))
        assert isinstance(out, Forward) and out.wire == w and out.verdict is FlitVerdict.CLEAN


def test_corrected_flit_reencoded():
    w = wire_of(encode_flit_baseline(FlitHeader(), P))
    bad = bytearray(w)
    bad[17] ^= 0x5A
    out = switch_forward(SwitchConfig(ProtocolMode.BASELINE), bytes(bad), make_rng(0))
    assert out.wire == w and out.verdict is FlitVerdict.CORRECTED


def test_uncorrectable_dropped_and_logged():
    rng = make_rng(1)
    sw = SwitchConfig(ProtocolMode.RXL)
    w = wire_of(encode_flit_isn(FlitHeader(), P, 4))
    results = [switch_forward(sw, apply_mask(w, uncorrectable_mask(rng)), rng) for _ in range(200)]
    drops = [r for r in results if isinstance(r, Drop)]
    assert drops and all(d.reason is DropReason.FEC_UNCORRECTABLE for d in drops)
    assert sw.drop_log["fec_uncorrectable"] == len(drops)


def test_baseline_switch_drops_crc_mismatch_rxl_does_not():
    f = encode_flit_isn(FlitHeader(), P, 5)  # baseline CRC check fails on an ISN flit
    w = wire_of(f)
    assert isinstance(switch_forward(SwitchConfig(ProtocolMode.BASELINE), w, make_rng(0)), Drop)
    assert isinstance(switch_forward(SwitchConfig(ProtocolMode.RXL), w, make_rng(0)), Forward)


def test_internal_corruption_regenerates_crc_in_baseline_only():
    f = encode_flit_baseline(FlitHeader(), P)
    w = wire_of(f)
    base = switch_forward(SwitchConfig(ProtocolMode.BASELINE, 1.0), w, make_rng(3))
    rxl = switch_forward(SwitchConfig(ProtocolMode.RXL, 1.0), w, make_rng(3))
    assert base.internal_mask and rxl.internal_mask
    assert verify_core(base.wire[:250])  # corruption now carries a valid CRC
    assert not verify_core(rxl.wire[:250])  # end-to-end check still catches it


def test_rxl_switch_never_parses_header(monkeypatch):
    calls = Counter()
    import flitsim.flit as flit_mod

    orig = flit_mod.unpack_header

    def spy(raw):
        calls["unpack"] += 1
        return orig(raw)

    monkeypatch.setattr(flit_mod, "unpack_header", spy)
    core = bytearray(encode_flit_isn(FlitHeader(), P, 1).core())
    core[1] |= 0xF0  # reserved bits set: undecodable header
    out = switch_forward(SwitchConfig(ProtocolMode.RXL), fec_encode_flit(bytes(core)), make_rng(0))
    assert isinstance(out, Forward) and calls["unpack"] == 0


def test_stateless():
    sw = SwitchConfig(ProtocolMode.RXL)
    w = wire_of(encode_flit_isn(FlitHeader(), P, 2))
    first = switch_forward(sw, w, make_rng(0))
    for _ in range(3):
        assert switch_forward(sw, w, make_rng(0)) == first
    assert not hasattr(sw, "__dict__") or set(vars(sw)) == {
        "mode", "internal_error_prob", "check_crc", "regenerate_crc", "poly", "drop_log"
    }


def test_config_validation():
    with pytest.raises(ValueError):
        SwitchConfig(ProtocolMode.RXL, internal_error_prob=2.0)
    assert SwitchConfig(ProtocolMode.BASELINE).check_crc
    assert not SwitchConfig(ProtocolMode.RXL).check_crc


def test_forced_drop_reason_exists():
    sw = SwitchConfig(ProtocolMode.RXL)
    assert switch_mod.record_drop(sw, DropReason.FORCED).reason is DropReason.FORCED
