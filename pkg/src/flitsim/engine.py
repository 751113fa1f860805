"""Slotted-time simulation of one link direction across a chain of switches.

Topology: host, ``switch_levels`` switches, device; ``switch_levels + 1``
links. The host sends data flits downstream; the device's ACK/NACK
feedback travels the reverse direction, which is modeled as reliable and
instantaneous. A saturated reverse data stream (``reverse_traffic``)
gives the host AckNums to piggyback on its downstream data.

Time advances one slot per transmitted flit. A retry adds
``retry_latency_ns`` of dead channel time before the retransmissions,
which then take their own slots. If the link goes idle with flits still
unacknowledged, the device flushes its coalesced ACK and the host's replay
timer eventually resends whatever remains.

FEC is only run on a hop that sees an error or may corrupt internally.
Skipping it on a clean hop is exact: a clean codeword decodes to itself.
The endpoint always runs the full CRC (and ISN) check.
"""

from __future__ import annotations

import logging
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from enum import Enum

import numpy as np

from flitsim.channel import RNG_ALGORITHM, ErrorConfig, LinkChannel, apply_mask, make_rng
from flitsim.classify import FailureCounts, StreamClassifier
from flitsim.crc import ECMA_182
from flitsim.fec import FlitVerdict, fec_decode_flit, fec_encode_flit
from flitsim.flit import PAYLOAD_BYTES, Flit
from flitsim.link import (
    AckRoute,
    ProtocolMode,
    Receiver,
    RxKind,
    Transmitter,
    ack_scheduler,
)
from flitsim.switch import Drop, DropReason, SwitchConfig, record_drop, switch_forward

log = logging.getLogger(__name__)

MAX_SWITCH_LEVELS = 8


class ConfigError(ValueError):
    """Invalid scenario configuration."""


class ForcedAction(Enum):
    DROP = "drop"
    PIGGYBACK = "piggyback"
    INTERNAL_CORRUPT = "internal_corrupt"


@dataclass(frozen=True)
class ForcedEvent:
    """A scripted event on the first transmission of data flit ``index``.

    ``hop`` selects the switch (0 = first) for drops and internal
    corruption; with no switches a drop happens on the only link.
    ``arg`` is the AckNum for a forced piggyback.
    """

    index: int
    action: ForcedAction
    arg: int = 0
    hop: int = 0

    def __str__(self) -> str:
        text = f"{self.index}:{self.action.value}"
        if self.action is ForcedAction.PIGGYBACK:
            return f"{text}@{self.arg}"
        return f"{text}@{self.hop}" if self.hop else text


@dataclass(frozen=True)
class Message:
    """Scripted content of one data flit."""

    label: str
    kind: str = "request"
    cqid: int = 0

    def __str__(self) -> str:
        return f"{self.label}/{self.kind}/{self.cqid}"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    mode: ProtocolMode = ProtocolMode.RXL
    switch_levels: int = 0
    error: ErrorConfig = field(default_factory=ErrorConfig)
    coalesce_k: int = 10
    standalone_ack: bool = False
    reverse_traffic: bool = True
    slot_ns: float = 2.0
    retry_latency_ns: float = 100.0
    replay_timeout_ns: float | None = None  # default: 10 x retry latency
    flit_count: int = 1000
    seed: int = 0
    forced_events: tuple[ForcedEvent, ...] = ()
    messages: tuple[Message | None, ...] = ()  # None is a flit with no message
    cqid_count: int = 1
    drop_prob: float = 0.0  # forced random drop at each switch
    internal_error_prob: float = 0.0
    switch_check_crc: bool | None = None  # default: on for baseline only
    crc_poly: int = ECMA_182
    max_slots: int | None = None  # default: 20 x flit_count + 10000
    fast_path: bool = True  # skip the byte work for flits no hop touches

    def __post_init__(self):
        def bad(msg):
            raise ConfigError(msg)

        if not isinstance(self.mode, ProtocolMode):
            bad(f"mode must be a ProtocolMode, got {self.mode!r}")
        if not 0 <= self.switch_levels <= MAX_SWITCH_LEVELS:
            bad(f"switch_levels must be in 0..{MAX_SWITCH_LEVELS}")
        if self.slot_ns <= 0:
            bad("slot_ns must be > 0")
        if self.retry_latency_ns < 0:
            bad("retry_latency_ns must be >= 0")
        if self.replay_timeout_ns is not None and self.replay_timeout_ns < self.slot_ns:
            bad("replay_timeout_ns must be at least one slot")
        if self.flit_count < 1:
            bad("flit_count must be >= 1")
        if self.messages and len(self.messages) != self.flit_count:
            bad(f"messages: {len(self.messages)} scripted but flit_count is {self.flit_count}")
        if self.coalesce_k < 1:
            bad("coalesce_k must be >= 1")
        if self.cqid_count < 1:
            bad("cqid_count must be >= 1")
        for name in ("drop_prob", "internal_error_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                bad(f"{name} must be a probability")
        if (self.drop_prob or self.internal_error_prob) and self.switch_levels == 0:
            bad("drop_prob and internal_error_prob need switch_levels >= 1")
        if not 0 <= self.seed < 2**64:
            bad("seed must be a 64-bit unsigned integer")
        if self.max_slots is not None and self.max_slots < 1:
            bad("max_slots must be >= 1")
        for ev in self.forced_events:
            if not 0 <= ev.index < self.flit_count:
                bad(f"forced_events: {ev} is outside 0..{self.flit_count - 1}")
            if ev.action is ForcedAction.INTERNAL_CORRUPT and ev.hop >= self.switch_levels:
                bad(f"forced_events: {ev} needs a switch at hop {ev.hop}")
            if ev.action is ForcedAction.DROP and ev.hop > max(self.switch_levels - 1, 0):
                bad(f"forced_events: {ev} names a missing switch")
            if ev.action is ForcedAction.PIGGYBACK and not 0 <= ev.arg < 1024:
                bad(f"forced_events: {ev} has an AckNum outside 0..1023")

    @property
    def timeout_ns(self) -> float:
        if self.replay_timeout_ns is not None:
            return self.replay_timeout_ns
        return max(10 * self.retry_latency_ns, self.slot_ns)

    @property
    def slot_limit(self) -> int:
        return self.max_slots if self.max_slots is not None else 20 * self.flit_count + 10000

    @property
    def regime(self) -> str:
        """Which mechanism produces the errors in this scenario."""
        parts = []
        if self.forced_events:
            parts.append("scripted")
        if self.error.ber > 0 or self.error.burst_enabled:
            parts.append("random-ber")
        if self.error.uc_rate > 0:
            parts.append("forced-uncorrectable")
        if self.drop_prob > 0:
            parts.append("forced-drop")
        if self.internal_error_prob > 0:
            parts.append("switch-internal")
        return "+".join(parts) or "error-free"

    def resolved(self) -> dict[str, str]:
        """Every setting, defaults filled in, as text (the report header)."""
        e = self.error
        return {
            "name": self.name,
            "mode": self.mode.value,
            "switch_levels": str(self.switch_levels),
            "ber": repr(e.ber),
            "burst_enabled": str(e.burst_enabled).lower(),
            "burst_start_prob": repr(e.burst_start_prob),
            "burst_mean_len": repr(e.burst_mean_len),
            "uc_rate": repr(e.uc_rate),
            "coalesce_k": str(self.coalesce_k),
            "standalone_ack": str(self.standalone_ack).lower(),
            "reverse_traffic": str(self.reverse_traffic).lower(),
            "slot_ns": repr(self.slot_ns),
            "retry_latency_ns": repr(self.retry_latency_ns),
            "replay_timeout_ns": repr(self.timeout_ns),
            "flit_count": str(self.flit_count),
            "seed": str(self.seed),
            "forced_events": ", ".join(map(str, self.forced_events)),
            "messages": ", ".join("-" if m is None else str(m) for m in self.messages),
            "cqid_count": str(self.cqid_count),
            "drop_prob": repr(self.drop_prob),
            "internal_error_prob": repr(self.internal_error_prob),
            "switch_check_crc": str(self.check_crc).lower(),
            "crc_poly": f"{self.crc_poly:#018x}",
            "max_slots": str(self.slot_limit),
            "fast_path": str(self.fast_path).lower(),
        }

    @property
    def check_crc(self) -> bool:
        if self.switch_check_crc is None:
            return self.mode is ProtocolMode.BASELINE
        return self.switch_check_crc


# -- payloads and ground truth ---------------------------------------------

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_HEAD = struct.Struct("<QH14s")


def make_payload(data_id: int, cqid: int, label: str = "") -> bytes:
    """Deterministic 240-byte payload for data flit ``data_id``."""
    head = _HEAD.pack(data_id, cqid & 0xFFFF, label.encode()[:14])
    fill = ((data_id + 1) * _GOLDEN & _MASK64).to_bytes(8, "little")
    return head + fill * ((PAYLOAD_BYTES - _HEAD.size) // 8)


def _cqid_fn(cfg: ScenarioConfig):
    if cfg.messages:
        msgs = cfg.messages
        return lambda i: None if msgs[i] is None else msgs[i].cqid
    n = cfg.cqid_count
    return lambda i: i % n


# -- report ----------------------------------------------------------------


@dataclass
class SimReport:
    """Counters for one scenario; see ``docs`` in the README for meanings."""

    flits_sent: int = 0
    flits_delivered: int = 0
    in_flight: int = 0
    unrecovered: int = 0
    not_sent: int = 0
    transmissions: int = 0
    forwards: int = 0
    fec_corrected: int = 0
    fec_uncorrectable_drops: int = 0
    crc_drops: int = 0
    forced_drops: int = 0
    internal_corruptions: int = 0
    crc_nacks: int = 0
    fec_nacks: int = 0
    seq_nacks: int = 0
    retries: int = 0
    timeouts: int = 0
    discarded_duplicates: int = 0
    duplicates_forwarded: int = 0
    fail_data: int = 0
    fail_order: int = 0
    gap: int = 0
    reorder: int = 0
    hop_traversals: int = 0
    errored_traversals: int = 0
    standalone_ack_flits: int = 0
    slots: int = 0
    channel_busy_ns: float = 0.0
    goodput_flits: int = 0
    bw_loss: float = 0.0
    ack_bw_loss: float = 0.0
    trials: int = 1
    regime: str = ""
    delivered_pattern: str = ""
    rng_algorithm: str = RNG_ALGORITHM
    config: dict[str, str] = field(default_factory=dict)

    @property
    def fer_measured(self) -> float:
        return self.errored_traversals / self.hop_traversals if self.hop_traversals else 0.0

    @property
    def duplicate(self) -> int:
        return self.duplicates_forwarded

    def check_accounting(self) -> None:
        if self.flits_delivered + self.in_flight + self.unrecovered != self.flits_sent:
            raise AssertionError("delivered + in-flight + unrecovered != sent")
        if self.fail_order != self.gap + self.duplicates_forwarded + self.reorder:
            raise AssertionError("fail_order sub-kinds do not add up")

    def finish(self, cfg: ScenarioConfig) -> None:
        """Fill the derived fields from the raw counters."""
        self.goodput_flits = self.flits_delivered
        useful = self.flits_sent * cfg.slot_ns
        self.bw_loss = 1.0 - useful / self.channel_busy_ns if self.channel_busy_ns > 0 else 0.0
        self.ack_bw_loss = self.standalone_ack_flits / self.forwards if self.forwards else 0.0
        self.regime = cfg.regime
        self.config = cfg.resolved()


_SUMMED = [
    f.name
    for f in fields(SimReport)
    if f.type in ("int", "float") and f.name not in ("bw_loss", "ack_bw_loss")
]


def merge_reports(reports: list[SimReport], cfg: ScenarioConfig) -> SimReport:
    """Sum per-trial counters in list order and recompute derived fields."""
    out = SimReport(trials=0)
    for r in reports:
        for name in _SUMMED:
            setattr(out, name, getattr(out, name) + getattr(r, name))
    out.finish(cfg)
    out.delivered_pattern = reports[0].delivered_pattern if len(reports) == 1 else ""
    return out


# -- one trial ---------------------------------------------------------------


class _Trial:
    def __init__(self, cfg: ScenarioConfig, seed: np.random.SeedSequence):
        self.cfg = cfg
        n_links = cfg.switch_levels + 1
        streams = seed.spawn(n_links + cfg.switch_levels + 1)
        self.channels = [LinkChannel(cfg.error, make_rng(s)) for s in streams[:n_links]]
        self.switch_rngs = [make_rng(s) for s in streams[n_links:-1]]
        self.rng = make_rng(streams[-1])
        self.switches = [
            SwitchConfig(cfg.mode, cfg.internal_error_prob, check_crc=cfg.check_crc, poly=cfg.crc_poly)
            for _ in range(cfg.switch_levels)
        ]
        self.tx = Transmitter(cfg.mode, cfg.crc_poly)
        self.rx = Receiver(cfg.mode, cfg.crc_poly, cfg.coalesce_k)
        self.cqid_of = _cqid_fn(cfg)
        self.clf = StreamClassifier(cfg.flit_count, self.cqid_of)
        self.events: dict[int, list[ForcedEvent]] = {}
        for ev in cfg.forced_events:
            self.events.setdefault(ev.index, []).append(ev)
        self.report = SimReport()
        self.pattern: list[str] = []
        self.drop_prob = cfg.drop_prob
        # A new flit whose every hop draws a zero mask, sent while the receiver
        # expects its sequence number, always passes FEC and CRC unchanged.
        # Only the bookkeeping is done for it; the RNG draws stay identical.
        self.fast = cfg.fast_path and not self.events and not cfg.drop_prob and not cfg.internal_error_prob

    def payload(self, i: int) -> bytes:
        msgs = self.cfg.messages
        if msgs:
            m = msgs[i]
            return make_payload(i, 0xFFFF if m is None else m.cqid, "" if m is None else m.label)
        return make_payload(i, self.cqid_of(i))

    # The flit in transit is either pristine (``core is None``) or carried
    # as a possibly modified 250-byte core.
    def traverse(self, flit: Flit, forced: list[ForcedEvent], masks: list[int]) -> None:
        cfg, rep = self.cfg, self.report
        core = None
        drop_at = {ev.hop for ev in forced if ev.action is ForcedAction.DROP}
        corrupt_at = {ev.hop for ev in forced if ev.action is ForcedAction.INTERNAL_CORRUPT}
        for hop in range(cfg.switch_levels):
            mask = masks[hop]
            rep.hop_traversals += 1
            if mask:
                rep.errored_traversals += 1
            sw = self.switches[hop]
            if hop in drop_at or (self.drop_prob and self.rng.random() < self.drop_prob):
                record_drop(sw, DropReason.FORCED)
                rep.forced_drops += 1
                return
            force = hop in corrupt_at
            if not (mask or force or sw.internal_error_prob > 0 or (core is not None and sw.check_crc)):
                continue
            wire = apply_mask(fec_encode_flit(core if core is not None else flit.core()), mask)
            result = switch_forward(sw, wire, self.switch_rngs[hop], force_internal=force)
            if isinstance(result, Drop):
                if result.reason is DropReason.FEC_UNCORRECTABLE:
                    rep.fec_uncorrectable_drops += 1
                else:
                    rep.crc_drops += 1
                return
            if result.verdict is FlitVerdict.CORRECTED:
                rep.fec_corrected += 1
            if result.internal_mask:
                rep.internal_corruptions += 1
            core = result.wire[:250]
        mask = masks[-1]
        rep.hop_traversals += 1
        if mask:
            rep.errored_traversals += 1
        if drop_at and cfg.switch_levels == 0:
            rep.forced_drops += 1  # lost on the only link
            return
        self.arrive(flit, core, mask)

    def arrive(self, flit: Flit, core: bytes | None, mask: int) -> None:
        rep, rx = self.report, self.rx
        if core is not None or mask:
            wire = apply_mask(fec_encode_flit(core if core is not None else flit.core()), mask)
            fixed, _, verdict = fec_decode_flit(wire)
            if verdict is FlitVerdict.UNCORRECTABLE:
                rep.fec_nacks += 1
                self.on_nack(rx.integrity_failure().nack)
                return
            if verdict is FlitVerdict.CORRECTED:
                rep.fec_corrected += 1
            try:
                flit = Flit.from_core(fixed, data_id=flit.data_id, true_seq=flit.true_seq)
            except ValueError:
                rep.crc_nacks += 1
                self.on_nack(rx.integrity_failure().nack)
                return
        action = rx.accept(flit)
        if action.kind is RxKind.FORWARD:
            i = action.flit.data_id
            # byte equality with the regenerated oracle payload, i.e. digest match
            self.deliver(i, action.flit.payload == self.payload(i))
        elif action.kind is RxKind.NACK:
            if action.sequence_error:
                rep.seq_nacks += 1
            else:
                rep.crc_nacks += 1
            self.on_nack(action.nack)
        else:
            rep.discarded_duplicates += 1
            self.tx.on_ack(rx.last_validated_seq)  # re-ACK so the sender stops resending

    def deliver(self, i: int, data_ok: bool) -> None:
        rep, cfg = self.report, self.cfg
        rep.forwards += 1
        self.clf.observe(i, data_ok)
        if cfg.messages:
            m = cfg.messages[i]
            if m is not None:
                self.pattern.append(m.label)
        d = ack_scheduler(self.rx, cfg.reverse_traffic, cfg.standalone_ack)
        if d is not None:
            if d.route is AckRoute.STANDALONE:
                rep.standalone_ack_flits += 1
            self.tx.on_ack(d.acknum)
        self.last_delivery_ns = self.clock

    def on_nack(self, value: int) -> None:
        if self.tx.on_nack(value):
            self.report.retries += 1
            self.clock += self.cfg.retry_latency_ns

    def run(self) -> SimReport:
        cfg, tx, rx, rep = self.cfg, self.tx, self.rx, self.report
        channels = self.channels
        self.clock = 0.0
        self.last_delivery_ns = 0.0
        slot = cfg.slot_ns
        timeout = cfg.timeout_ns
        k = cfg.coalesce_k
        next_id = 0
        idle_ns = 0.0
        reverse_count = 0
        pending_ack: int | None = None
        reverse_seq = 0
        for _ in range(cfg.slot_limit):
            if cfg.reverse_traffic and not cfg.standalone_ack:
                # one reverse data flit arrives per slot; every k-th is acked
                reverse_count += 1
                reverse_seq = (reverse_seq + 1) % 1024
                if reverse_count >= k:
                    reverse_count = 0
                    pending_ack = (reverse_seq - 1) % 1024
            if tx.retransmitting:
                flit = tx.next_retransmission()
                forced: list[ForcedEvent] = []
                masks = [ch.draw() for ch in channels]
            elif next_id < cfg.flit_count and not tx.window_full:
                i = next_id
                next_id += 1
                forced = self.events.get(i, [])
                if self.events:
                    # scripted runs piggyback only where the script says so
                    ack = next((ev.arg for ev in forced if ev.action is ForcedAction.PIGGYBACK), None)
                else:
                    ack, pending_ack = pending_ack, None
                # every hop draws for every transmission, used or not, so
                # the fast path leaves the RNG streams untouched
                masks = [ch.draw() for ch in channels]
                if self.fast and rx.eseq == tx.next_seq and not any(masks):
                    tx.emit(self.payload(i), ack, data_id=i, materialize=False)
                    idle_ns = 0.0
                    self.clock += slot
                    rep.slots += 1
                    rep.transmissions += 1
                    rep.hop_traversals += len(masks)
                    rx.accept_intact(ack)
                    self.deliver(i, True)
                    continue
                flit = tx.emit(self.payload(i), ack, data_id=i)
            else:
                flushed = rx.flush_ack()
                if flushed is not None:
                    tx.on_ack(flushed)
                if not tx.outstanding and next_id >= cfg.flit_count:
                    break
                self.clock += slot
                idle_ns += slot
                if idle_ns >= timeout and tx.outstanding:
                    idle_ns = 0.0
                    if tx.timeout():
                        rep.timeouts += 1
                continue
            idle_ns = 0.0
            self.clock += slot
            rep.slots += 1
            rep.transmissions += 1
            self.traverse(flit, forced, masks)

        counts = self.clf.finish()
        rep.flits_sent = next_id
        rep.not_sent = cfg.flit_count - next_id
        rep.flits_delivered = self.clf.unique_delivered
        delivered = self.clf.delivered
        rep.in_flight = sum(1 for e in tx.replay_buffer if not delivered[e.data_id])
        rep.unrecovered = rep.flits_sent - rep.flits_delivered - rep.in_flight
        self._fill_failures(counts)
        rep.channel_busy_ns = self.last_delivery_ns
        rep.delivered_pattern = ",".join(self.pattern)
        rep.finish(cfg)
        rep.check_accounting()
        return rep

    def _fill_failures(self, c: FailureCounts) -> None:
        rep = self.report
        rep.fail_data = c.fail_data
        rep.gap = c.gap
        rep.duplicates_forwarded = c.duplicate
        rep.reorder = c.reorder
        rep.fail_order = c.fail_order


def run_trial(cfg: ScenarioConfig, seed: np.random.SeedSequence | None = None) -> SimReport:
    if seed is None:
        seed = np.random.SeedSequence(cfg.seed)
    return _Trial(cfg, seed).run()


def _split(cfg: ScenarioConfig, n: int) -> list[tuple[ScenarioConfig, np.random.SeedSequence]]:
    seeds = np.random.SeedSequence(cfg.seed).spawn(n)
    base, extra = divmod(cfg.flit_count, n)
    out = []
    for i, s in enumerate(seeds):
        count = base + (1 if i < extra else 0)
        out.append((replace(cfg, flit_count=count, max_slots=None if cfg.max_slots is None else cfg.max_slots // n), s))
    return out


def _run_packed(args):
    return run_trial(*args)


def run_scenario(cfg: ScenarioConfig, parallel: int = 1) -> SimReport:
    """Run a scenario, optionally as ``parallel`` independent trials.

    With ``parallel > 1`` the flits are split over trials seeded from
    ``SeedSequence(seed).spawn(parallel)`` and the counters are summed in
    trial order, so the result depends on ``parallel`` but never on
    scheduling. Scripted scenarios always run as a single trial.
    """
    if parallel < 1:
        raise ConfigError("parallel must be >= 1")
    n = min(parallel, cfg.flit_count)
    if n == 1 or cfg.forced_events or cfg.messages:
        return run_trial(cfg)
    jobs = _split(cfg, n)
    with ProcessPoolExecutor(max_workers=n) as pool:
        reports = list(pool.map(_run_packed, jobs))
    merged = merge_reports(reports, cfg)
    merged.check_accounting()
    return merged
