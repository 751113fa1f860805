"""Closed-form reliability and bandwidth model.

Symbols:

* ``fer``: probability a flit has at least one bit error;
* ``fer_uc``: probability FEC cannot correct a flit (per hop);
* ``fer_ud``: probability a flit error escapes detection altogether;
* ``fer_drop`` / ``fer_order``: flits dropped by switches, and the share of
  those that become ordering failures under ACK piggybacking;
* FIT: expected failures per 10^9 device-hours.

Two models exist for the RXL undetected rate. ``"rxl"`` (the default)
charges each FEC-uncorrectable flit one CRC escape chance per exposure:
the original transmission plus, with probability ``levels * fer_uc``, a
retransmission. ``"rxl_printed"`` is the simpler closed form
``(1 + fer_uc) * 2^-64``; it ignores the ``fer_uc`` factor, lands at
5.42e-20 and is kept for comparison.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

CRC_ESCAPE = 2.0**-64
HOURS_PER_BILLION = 3600 * 1e9  # seconds per hour, times 10^9 hours

FER_UD_MODES = ("direct", "rxl", "rxl_printed")


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"{name} must be a probability in [0, 1], got {p}")


@dataclass(frozen=True)
class AnalyticInputs:
    ber: float = 1e-6
    flit_bits: int = 2048
    fer_uc: float = 3.0e-5
    p_coalescing: float = 0.1
    flits_per_sec: float = 5.0e8
    slot_ns: float = 2.0
    retry_ns: float = 100.0
    crc_escape: float = CRC_ESCAPE
    switch_levels: int = 1

    def __post_init__(self):
        for name in ("ber", "fer_uc", "p_coalescing", "crc_escape"):
            _check_prob(name, getattr(self, name))
        if self.flit_bits <= 0:
            raise ValueError("flit_bits must be > 0")
        if self.flits_per_sec < 0 or self.slot_ns <= 0 or self.retry_ns < 0:
            raise ValueError("flits_per_sec, slot_ns and retry_ns must be non-negative (slot_ns > 0)")
        if self.switch_levels < 0:
            raise ValueError("switch_levels must be >= 0")


def fer_from_ber(ber: float, flit_bits: int = 2048) -> float:
    """``1 - (1 - ber)^flit_bits`` without cancellation for tiny ``ber``."""
    _check_prob("ber", ber)
    if flit_bits <= 0:
        raise ValueError("flit_bits must be > 0")
    if ber == 1.0:
        return 1.0
    return -math.expm1(flit_bits * math.log1p(-ber))


def p_correct(fer: float, fer_uc: float) -> float:
    """Share of erroneous flits that FEC corrects."""
    _check_prob("fer", fer)
    _check_prob("fer_uc", fer_uc)
    if fer < fer_uc:
        raise ValueError(f"fer ({fer}) must be >= fer_uc ({fer_uc})")
    if fer == 0:
        raise ValueError("p_correct is undefined for fer = 0")
    return 1.0 - fer_uc / fer


def fer_ud(fer_uc: float, crc_escape: float = CRC_ESCAPE, mode: str = "direct", levels: int = 1) -> float:
    """Undetected flit error rate.

    ``direct``: ``fer_uc * crc_escape``.
    ``rxl``: ``fer_uc * (1 + levels * fer_uc) * crc_escape``.
    ``rxl_printed``: ``(1 + fer_uc) * crc_escape``.
    """
    _check_prob("fer_uc", fer_uc)
    _check_prob("crc_escape", crc_escape)
    if mode == "direct":
        return fer_uc * crc_escape
    if mode == "rxl":
        if levels < 0:
            raise ValueError("levels must be >= 0")
        return fer_uc * (1.0 + levels * fer_uc) * crc_escape
    if mode == "rxl_printed":
        return (1.0 + fer_uc) * crc_escape
    raise ValueError(f"unknown fer_ud mode {mode!r} (expected one of {', '.join(FER_UD_MODES)})")


def fit(rate_per_flit: float, flits_per_sec: float = 5.0e8) -> float:
    return rate_per_flit * flits_per_sec * HOURS_PER_BILLION


def fer_order(fer_drop: float, p_coalescing: float = 0.1) -> float:
    _check_prob("fer_drop", fer_drop)
    _check_prob("p_coalescing", p_coalescing)
    return fer_drop * p_coalescing


def bw_loss_retry(fer_retry: float, slot_ns: float = 2.0, retry_ns: float = 100.0) -> float:
    """Share of channel time lost when a ``fer_retry`` share of flits each cost one retry."""
    _check_prob("fer_retry", fer_retry)
    if slot_ns <= 0:
        raise ValueError("slot_ns must be > 0")
    return 1.0 - slot_ns / ((1.0 - fer_retry) * slot_ns + fer_retry * (slot_ns + retry_ns))


def bw_loss_standalone(p_coalescing: float) -> float:
    """Reverse-direction share spent on standalone ACK flits."""
    _check_prob("p_coalescing", p_coalescing)
    return p_coalescing


def bw_loss_switched(fer_uc: float, levels: int, slot_ns: float = 2.0, retry_ns: float = 100.0) -> float:
    """Retry loss across ``levels`` switches: every one of the ``levels + 1`` hops contributes ``fer_uc``."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    return bw_loss_retry(min(1.0, (levels + 1) * fer_uc), slot_ns, retry_ns)


def fit_vs_levels(mode: str, levels: int, inputs: AnalyticInputs = AnalyticInputs()) -> float:
    """Device FIT at ``levels`` switch levels.

    Baseline: undetected errors on a direct link; with switches, ordering
    failures from ``levels * fer_uc`` drops dominate. RXL: only CRC escapes.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    if mode == "baseline":
        if levels == 0:
            rate = fer_ud(inputs.fer_uc, inputs.crc_escape, "direct")
        else:
            rate = fer_order(min(1.0, levels * inputs.fer_uc), inputs.p_coalescing)
    elif mode == "rxl":
        rate = fer_ud(inputs.fer_uc, inputs.crc_escape, "rxl", levels)
    elif mode == "rxl_printed":
        rate = fer_ud(inputs.fer_uc, inputs.crc_escape, "rxl_printed") if levels else fer_ud(
            inputs.fer_uc, inputs.crc_escape, "direct"
        )
    else:
        raise ValueError(f"unknown mode {mode!r} (expected baseline, rxl or rxl_printed)")
    return fit(rate, inputs.flits_per_sec)


def fit_curve(inputs: AnalyticInputs = AnalyticInputs(), max_levels: int = 8) -> list[tuple[int, float, float]]:
    """Rows of (level, fit_baseline, fit_rxl) for levels 0..max_levels."""
    return [(L, fit_vs_levels("baseline", L, inputs), fit_vs_levels("rxl", L, inputs)) for L in range(max_levels + 1)]


@dataclass(frozen=True)
class AnalyticReport:
    mode: str
    switch_levels: int
    fer: float
    p_correct: float
    fer_ud: float
    fer_drop: float
    fer_order: float
    fit_device: float
    bw_loss_direct: float
    bw_loss_switched: float
    bw_loss_standalone: float

    def as_dict(self) -> dict:
        return asdict(self)


REPORT_COLUMNS = tuple(f.name for f in fields(AnalyticReport))


def analyze(inputs: AnalyticInputs, mode: str = "baseline") -> AnalyticReport:
    """Every closed-form quantity for one protocol at ``inputs.switch_levels``."""
    if mode not in ("baseline", "rxl"):
        raise ValueError(f"unknown mode {mode!r} (expected baseline or rxl)")
    L = inputs.switch_levels
    fer = fer_from_ber(inputs.ber, inputs.flit_bits)
    try:
        pc = p_correct(fer, inputs.fer_uc)
    except ValueError:
        pc = math.nan  # fer below the assumed uncorrectable rate
    drop = min(1.0, L * inputs.fer_uc)
    if mode == "baseline":
        ud = fer_ud(inputs.fer_uc, inputs.crc_escape, "direct")
        order = fer_order(drop, inputs.p_coalescing)
    else:
        ud = fer_ud(inputs.fer_uc, inputs.crc_escape, "rxl", L)
        order = 0.0  # every drop is caught by the sequence-folded CRC
    return AnalyticReport(
        mode=mode,
        switch_levels=L,
        fer=fer,
        p_correct=pc,
        fer_ud=ud,
        fer_drop=drop,
        fer_order=order,
        fit_device=fit_vs_levels(mode, L, inputs),
        bw_loss_direct=bw_loss_retry(inputs.fer_uc, inputs.slot_ns, inputs.retry_ns),
        bw_loss_switched=bw_loss_switched(inputs.fer_uc, L, inputs.slot_ns, inputs.retry_ns),
        bw_loss_standalone=bw_loss_standalone(inputs.p_coalescing),
    )


def printed_rxl_note(inputs: AnalyticInputs) -> str:
    """Metadata line contrasting the two RXL undetected-rate models."""
    printed = fer_ud(inputs.fer_uc, inputs.crc_escape, "rxl_printed")
    model = fer_ud(inputs.fer_uc, inputs.crc_escape, "rxl", max(inputs.switch_levels, 1))
    return (
        f"rxl fer_ud model fer_uc*(1+L*fer_uc)*2^-64 = {model:.4g}; "
        f"closed form (1+fer_uc)*2^-64 = {printed:.4g} (fit {fit(printed, inputs.flits_per_sec):.4g})"
    )
