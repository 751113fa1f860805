"""Text and CSV rendering for simulation reports.

Both formats start with the resolved configuration as ``#`` comment lines,
so a report can be rerun from its own header. CSV columns are fixed:
``CONFIG_COLUMNS`` then ``RESULT_COLUMNS``, one row per scenario.
"""

from __future__ import annotations

import csv
import io

from flitsim.engine import SimReport

CONFIG_COLUMNS = (
    "name",
    "mode",
    "switch_levels",
    "ber",
    "uc_rate",
    "drop_prob",
    "coalesce_k",
    "standalone_ack",
    "flit_count",
    "seed",
)

RESULT_COLUMNS = (
    "regime",
    "trials",
    "flits_sent",
    "flits_delivered",
    "in_flight",
    "unrecovered",
    "not_sent",
    "transmissions",
    "forwards",
    "fec_corrected",
    "fec_uncorrectable_drops",
    "crc_drops",
    "forced_drops",
    "internal_corruptions",
    "crc_nacks",
    "fec_nacks",
    "seq_nacks",
    "retries",
    "timeouts",
    "discarded_duplicates",
    "duplicates_forwarded",
    "fail_data",
    "fail_order",
    "gap",
    "reorder",
    "hop_traversals",
    "errored_traversals",
    "fer_measured",
    "standalone_ack_flits",
    "slots",
    "channel_busy_ns",
    "goodput_flits",
    "bw_loss",
    "ack_bw_loss",
    "delivered_pattern",
    "rng_algorithm",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def config_header(report: SimReport) -> list[str]:
    return [f"# {k} = {v}" for k, v in report.config.items()]


def render_text(reports: list[SimReport]) -> str:
    out = []
    for i, rep in enumerate(reports):
        if i:
            out.append("")
        out.append(f"# scenario {rep.config.get('name', i)}")
        out.extend(config_header(rep))
        width = max(len(c) for c in RESULT_COLUMNS)
        for col in RESULT_COLUMNS:
            out.append(f"{col:<{width}}  {_fmt(getattr(rep, col))}")
    return "\n".join(out) + "\n"


def render_csv(reports: list[SimReport]) -> str:
    buf = io.StringIO()
    for rep in reports:
        for line in config_header(rep):
            buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CONFIG_COLUMNS + RESULT_COLUMNS)
    for rep in reports:
        row = [rep.config[c] for c in CONFIG_COLUMNS]
        row += [_fmt(getattr(rep, c)) for c in RESULT_COLUMNS]
        writer.writerow(row)
    return buf.getvalue()


def render(reports: list[SimReport], fmt: str) -> str:
    if fmt == "text":
        return render_text(reports)
    if fmt == "csv":
        return render_csv(reports)
    raise ValueError(f"unknown format {fmt!r}")
