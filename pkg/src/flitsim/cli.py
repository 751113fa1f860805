"""Command line entry point: ``flitsim analyze | simulate | codec-selftest``.

Exit status: 0 on success, 2 on a configuration error (the message names
the key and line), 1 on an internal assertion failure.

Output goes to ``-o PATH`` if given, else into ``$FLITSIM_OUTPUT_DIR`` if
set (as ``<name>.txt`` or ``<name>.csv``), else to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

from flitsim import __version__
from flitsim.analytics import REPORT_COLUMNS, AnalyticInputs, analyze, fit_curve, printed_rxl_note
from flitsim.engine import ConfigError, run_scenario
from flitsim.report import render
from flitsim.scenario import ScenarioError, find_scenario, load_scenario
from flitsim.selftest import run_selftest

OUTPUT_DIR_ENV = "FLITSIM_OUTPUT_DIR"

log = logging.getLogger("flitsim")


class UsageError(Exception):
    pass


def _levels(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 0:
        raise argparse.ArgumentTypeError("levels must be non-negative")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flitsim", description="256B flit reliability simulator and calculator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeat for debug)")
    sub = p.add_subparsers(dest="command", required=True)

    def output_opts(sp):
        sp.add_argument("--format", choices=("text", "csv"), default="text")
        sp.add_argument("-o", "--output", help="output file (default: stdout or $%s)" % OUTPUT_DIR_ENV)

    a = sub.add_parser("analyze", help="closed-form FER/FIT/bandwidth figures")
    d = AnalyticInputs()
    a.add_argument("--ber", type=float, default=d.ber)
    a.add_argument("--flit-bits", type=int, default=d.flit_bits)
    a.add_argument("--fer-uc", type=float, default=d.fer_uc)
    a.add_argument("--p-coalescing", type=float, default=d.p_coalescing)
    a.add_argument("--flits-per-sec", type=float, default=d.flits_per_sec)
    a.add_argument("--slot-ns", type=float, default=d.slot_ns)
    a.add_argument("--retry-ns", type=float, default=d.retry_ns)
    a.add_argument("--levels", type=_levels, default=[0, 1], help="switch levels for the table (default 0,1)")
    a.add_argument("--max-levels", type=int, default=8, help="last level of the FIT curve")
    a.add_argument("--curve", help="write the FIT curve CSV here instead of appending it")
    output_opts(a)

    s = sub.add_parser("simulate", help="run a scenario file (path or shipped name)")
    s.add_argument("scenario")
    s.add_argument("--seed", type=int, help="override the scenario seed")
    s.add_argument("--parallel", type=int, default=1, help="independent trials, merged by summation")
    output_opts(s)

    c = sub.add_parser("codec-selftest", help="exhaustive CRC/ISN/FEC property checks")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--burst-trials", type=int, default=0, help="also measure 4/5/6-symbol burst detection")
    output_opts(c)
    return p


# -- commands ----------------------------------------------------------------


def _table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def cmd_analyze(args) -> tuple[str, str, dict[str, str]]:
    try:
        base = AnalyticInputs(
            ber=args.ber,
            flit_bits=args.flit_bits,
            fer_uc=args.fer_uc,
            p_coalescing=args.p_coalescing,
            flits_per_sec=args.flits_per_sec,
            slot_ns=args.slot_ns,
            retry_ns=args.retry_ns,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.max_levels < 0:
        raise ConfigError("--max-levels must be >= 0")
    header = [f"# {k} = {v!r}" for k, v in vars(base).items() if k != "switch_levels"]
    header.append("# " + printed_rxl_note(base))
    rows = [list(REPORT_COLUMNS)]
    for level in args.levels:
        inputs = AnalyticInputs(**{**vars(base), "switch_levels": level})
        for mode in ("baseline", "rxl"):
            r = analyze(inputs, mode).as_dict()
            rows.append([r[c] if isinstance(r[c], str) else f"{r[c]:.6g}" for c in REPORT_COLUMNS])
    curve = [["level", "fit_baseline", "fit_rxl"]]
    curve += [[str(L), f"{b:.6g}", f"{x:.6g}"] for L, b, x in fit_curve(base, args.max_levels)]
    extra = {}
    if args.curve:
        extra[args.curve] = "\n".join(header) + "\n" + _csv(curve)
    if args.format == "csv":
        body = "\n".join(header) + "\n" + _csv(rows)
        if not args.curve:
            body += "\n" + _csv(curve)
    else:
        body = "\n".join(header + [""] + _table(rows))
        if not args.curve:
            body += "\n\n# fit curve (csv)\n" + _csv(curve).rstrip("\n")
        body += "\n"
    return body, "analyze", extra


def cmd_simulate(args) -> tuple[str, str, dict[str, str]]:
    path = find_scenario(args.scenario)
    scenario = load_scenario(path, seed=args.seed)
    reports = []
    for cfg in scenario.configs:
        log.info("running %s (%d flits)", cfg.name, cfg.flit_count)
        reports.append(run_scenario(cfg, parallel=args.parallel))
    return render(reports, args.format), Path(path).stem, {}


def cmd_selftest(args) -> tuple[str, str, dict[str, str]]:
    results = run_selftest(args.seed, args.burst_trials)
    if args.format == "csv":
        rows = [["check", "result", "detail", "seconds"]]
        rows += [[r.name, "PASS" if r.passed else "FAIL", r.detail, f"{r.seconds:.2f}"] for r in results]
        body = f"# seed = {args.seed}\n" + _csv(rows)
    else:
        lines = [f"# seed = {args.seed}"]
        lines += [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<26} {r.detail}" for r in results]
        body = "\n".join(lines) + "\n"
    if not all(r.passed for r in results):
        failed = ", ".join(r.name for r in results if not r.passed)
        sys.stdout.write(body)
        raise AssertionError(f"codec self-test failed: {failed}")
    return body, "codec-selftest", {}


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "codec-selftest": cmd_selftest}


def _write(body: str, stem: str, args) -> None:
    ext = "csv" if args.format == "csv" else "txt"
    target = args.output
    if target is None and os.environ.get(OUTPUT_DIR_ENV):
        target = str(Path(os.environ[OUTPUT_DIR_ENV]) / f"{stem}.{ext}")
    if target is None:
        sys.stdout.write(body)
        return
    out = Path(target)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(body)
    log.info("wrote %s", out)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        body, stem, extra = COMMANDS[args.command](args)
        _write(body, stem, args)
        for path, text in extra.items():
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
    except (ConfigError, ScenarioError) as exc:
        print(f"flitsim: config error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"flitsim: internal assertion: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"flitsim: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
