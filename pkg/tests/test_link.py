import pytest

from flitsim.flit import FlitHeader, ReplayCmd, encode_flit_baseline
from flitsim.link import (
    AckRoute,
    ProtocolError,
    ProtocolMode,
    Receiver,
    RxKind,
    Transmitter,
    WindowFull,
    ack_scheduler,
)

B, R = ProtocolMode.BASELINE, ProtocolMode.RXL


def payload(i):
    return bytes([i % 256]) * 240


def test_mode_parse():
    assert ProtocolMode.parse("CXL") is B and ProtocolMode.parse(" rxl ") is R
    with pytest.raises(ValueError):
        ProtocolMode.parse("tcp")


def test_baseline_header_contents():
    tx = Transmitter(B)
    f0 = tx.emit(payload(0))
    f1 = tx.emit(payload(1), piggyback_ack=77)
    assert (f0.header.fsn, f0.header.replay_cmd) == (0, ReplayCmd.SEQ)
    assert (f1.header.fsn, f1.header.replay_cmd) == (77, ReplayCmd.ACK)
    assert f1.true_seq == 1


def test_rxl_header_never_carries_seq():
    tx = Transmitter(R)
    for i in range(5):
        f = tx.emit(payload(i))
        assert f.header.fsn == 0 and f.true_seq == i


@pytest.mark.parametrize("mode", [B, R])
def test_in_order_delivery_and_ack(mode):
    tx, rx = Transmitter(mode), Receiver(mode, coalesce_k=3)
    for i in range(6):
        act = rx.accept(tx.emit(payload(i)))
        assert act.kind is RxKind.FORWARD and act.validated
        ack = rx.ack_due()
        if ack is not None:
            tx.on_ack(ack)
    assert rx.eseq == 6 and tx.outstanding == 0


def test_window_full():
    tx = Transmitter(R, capacity=2)
    tx.emit(payload(0))
    tx.emit(payload(1))
    with pytest.raises(WindowFull):
        tx.emit(payload(2))


def test_sequence_wraps():
    tx, rx = Transmitter(R), Receiver(R)
    for i in range(1100):
        assert rx.accept(tx.emit(payload(i))).kind is RxKind.FORWARD
        tx.on_ack(rx.last_validated_seq)
    assert tx.next_seq == 1100 % 1024


def test_rxl_drop_detected_by_next_flit():
    tx, rx = Transmitter(R), Receiver(R)
    rx.accept(tx.emit(payload(0)))
    tx.emit(payload(1))  # lost
    act = rx.accept(tx.emit(payload(2), piggyback_ack=5))
    assert act.kind is RxKind.NACK and act.nack == 0
    assert tx.on_nack(act.nack) == [1, 2]
    got = [rx.accept(tx.next_retransmission()) for _ in range(2)]
    assert [a.kind for a in got] == [RxKind.FORWARD] * 2
    assert [a.flit.true_seq for a in got] == [1, 2]


def test_baseline_piggyback_hides_drop():
    tx, rx = Transmitter(B), Receiver(B)
    rx.accept(tx.emit(payload(0)))
    tx.emit(payload(1))  # lost
    act = rx.accept(tx.emit(payload(2), piggyback_ack=5))
    assert act.kind is RxKind.FORWARD and not act.validated
    assert act.flit.true_seq == 2 and act.ack_for_reverse == 5
    # the next numbered flit exposes the mismatch
    act = rx.accept(tx.emit(payload(3)))
    assert act.kind is RxKind.NACK and act.sequence_error and act.nack == 0


def test_baseline_crc_failure_nacks_running_position():
    tx, rx = Transmitter(B), Receiver(B)
    rx.accept(tx.emit(payload(0)))
    rx.accept(tx.emit(payload(1), piggyback_ack=3))
    f = tx.emit(payload(2))
    bad = encode_flit_baseline(f.header, payload(9))
    bad.crc = f.crc
    act = rx.accept(bad)
    assert act.kind is RxKind.NACK and act.nack == 1 and not act.sequence_error


def test_baseline_old_fsn_discarded():
    tx, rx = Transmitter(B), Receiver(B)
    f = tx.emit(payload(0))
    rx.accept(f)
    assert rx.accept(f).kind is RxKind.DISCARD_DUPLICATE


def test_repeat_nack_coalesced_until_first_resend():
    tx = Transmitter(R)
    for i in range(3):
        tx.emit(payload(i))
    assert tx.on_nack(0) == [1, 2]
    assert tx.on_nack(0) == []
    tx.next_retransmission()
    assert tx.on_nack(0) == [1, 2]


def test_nack_for_released_flit_is_protocol_error():
    tx = Transmitter(R)
    for i in range(3):
        tx.emit(payload(i))
    tx.on_ack(1)
    with pytest.raises(ProtocolError):
        tx.on_nack(0)


def test_stale_ack_ignored():
    tx = Transmitter(R)
    for i in range(4):
        tx.emit(payload(i))
    assert tx.on_ack(2) == 3
    assert tx.on_ack(1) == 0 and tx.outstanding == 1


def test_timeout_resends_from_oldest():
    tx = Transmitter(R)
    for i in range(3):
        tx.emit(payload(i))
    tx.on_ack(0)
    assert tx.timeout() == [1, 2]
    assert tx.next_retransmission().header.replay_cmd == ReplayCmd.SEQ


def test_retransmission_never_piggybacks():
    tx = Transmitter(B)
    tx.emit(payload(0), piggyback_ack=9)
    tx.timeout()
    f = tx.next_retransmission()
    assert (f.header.fsn, f.header.replay_cmd) == (0, ReplayCmd.SEQ)


def test_ack_scheduler_routes():
    rx = Receiver(R, coalesce_k=2)
    tx = Transmitter(R)
    rx.accept(tx.emit(payload(0)))
    assert ack_scheduler(rx, True) is None
    rx.accept(tx.emit(payload(1)))
    d = ack_scheduler(rx, True)
    assert d.acknum == 1 and d.route is AckRoute.PIGGYBACK
    rx.accept(tx.emit(payload(2)))
    rx.accept(tx.emit(payload(3)))
    assert ack_scheduler(rx, True, standalone_ack=True).route is AckRoute.STANDALONE


def test_flush_ack():
    rx = Receiver(R, coalesce_k=10)
    assert rx.flush_ack() is None
    rx.accept(Transmitter(R).emit(payload(0)))
    assert rx.flush_ack() == 0 and rx.flush_ack() is None


def test_header_reserved_bits_cannot_be_built():
    with pytest.raises(ValueError):
        FlitHeader(0, 0, reserved=1)
