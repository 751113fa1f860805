"""Scenario files: flat ``key = value`` text.

Grammar::

    file    := line*
    line    := blank | comment | setting
    comment := '#' anything
    setting := key '=' value [comment]

Keys are case-sensitive and may appear once. Unknown keys are errors. A
comma-separated ``mode`` or ``switch_levels`` defines a sweep: the file
expands to the cartesian product, ``mode`` varying slowest.

List-valued keys:

``forced_events``
    ``index:action[@arg]`` items, e.g. ``1:drop, 2:piggyback@100,
    3:internal_corrupt@0``. For ``drop`` and ``internal_corrupt`` the arg
    is the switch index (default 0); for ``piggyback`` it is the AckNum.
``messages``
    ``label/kind/cqid`` items, or ``-`` for a flit with no message. Sets
    ``flit_count`` when that key is absent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from pathlib import Path

from flitsim.channel import ErrorConfig
from flitsim.engine import ConfigError, ForcedAction, ForcedEvent, Message, ScenarioConfig
from flitsim.link import ProtocolMode


class ScenarioError(ConfigError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None, path: str | None = None):
        self.key, self.line, self.path = key, line, path
        where = []
        if path:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key {key!r}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_bool(text: str) -> bool | None:
    return None if text.strip().lower() == "auto" else _bool(text)


def _int(text: str) -> int:
    return int(text.strip(), 0)


def _float(text: str) -> float:
    return float(text.strip())


def _items(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_forced_events(text: str) -> tuple[ForcedEvent, ...]:
    events = []
    for item in _items(text):
        index, sep, rest = item.partition(":")
        if not sep:
            raise ValueError(f"forced event {item!r} is not index:action")
        action_text, _, arg = rest.partition("@")
        try:
            action = ForcedAction(action_text.strip().replace("-", "_"))
        except ValueError:
            names = ", ".join(a.value for a in ForcedAction)
            raise ValueError(f"unknown forced action {action_text!r} (expected {names})") from None
        value = _int(arg) if arg.strip() else 0
        if action is ForcedAction.PIGGYBACK:
            events.append(ForcedEvent(_int(index), action, arg=value))
        else:
            events.append(ForcedEvent(_int(index), action, hop=value))
    return tuple(events)


def parse_messages(text: str) -> tuple[Message | None, ...]:
    out: list[Message | None] = []
    for item in _items(text):
        if item == "-":
            out.append(None)
            continue
        parts = [p.strip() for p in item.split("/")]
        if len(parts) > 3 or not parts[0]:
            raise ValueError(f"message {item!r} is not label[/kind[/cqid]]")
        label = parts[0]
        kind = parts[1] if len(parts) > 1 else "request"
        cqid = _int(parts[2]) if len(parts) > 2 else 0
        out.append(Message(label, kind, cqid))
    return tuple(out)


# key -> (parser, destination); destination "error" routes into ErrorConfig
_KEYS = {
    "name": (str.strip, "cfg"),
    "mode": (None, "sweep"),
    "switch_levels": (None, "sweep"),
    "ber": (_float, "error"),
    "burst_enabled": (_bool, "error"),
    "burst_start_prob": (_float, "error"),
    "burst_mean_len": (_float, "error"),
    "uc_rate": (_float, "error"),
    "coalesce_k": (_int, "cfg"),
    "standalone_ack": (_bool, "cfg"),
    "reverse_traffic": (_bool, "cfg"),
    "slot_ns": (_float, "cfg"),
    "retry_latency_ns": (_float, "cfg"),
    "replay_timeout_ns": (_float, "cfg"),
    "flit_count": (_int, "cfg"),
    "seed": (_int, "cfg"),
    "forced_events": (parse_forced_events, "cfg"),
    "messages": (parse_messages, "cfg"),
    "cqid_count": (_int, "cfg"),
    "drop_prob": (_float, "cfg"),
    "internal_error_prob": (_float, "cfg"),
    "switch_check_crc": (_optional_bool, "cfg"),
    "crc_poly": (_int, "cfg"),
    "max_slots": (_int, "cfg"),
    "fast_path": (_bool, "cfg"),
}

KNOWN_KEYS = tuple(_KEYS)


@dataclass
class Scenario:
    """A parsed file: one or more configs (several for a sweep)."""

    configs: list[ScenarioConfig]
    path: str | None = None


def parse_scenario(text: str, path: str | None = None, seed: int | None = None) -> Scenario:
    """Parse scenario text. ``seed`` overrides the file's seed."""
    cfg_kw: dict = {}
    err_kw: dict = {}
    modes = [ProtocolMode.RXL]
    levels = [0]
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ScenarioError("expected 'key = value'", line=lineno, path=path)
        if key not in _KEYS:
            raise ScenarioError("unknown key", key=key, line=lineno, path=path)
        if key in seen:
            raise ScenarioError(f"duplicate key (first set on line {seen[key]})", key=key, line=lineno, path=path)
        seen[key] = lineno
        parser, dest = _KEYS[key]
        try:
            if key == "mode":
                modes = [ProtocolMode.parse(v) for v in _items(value)]
            elif key == "switch_levels":
                levels = [_int(v) for v in _items(value)]
            else:
                parsed = parser(value)
                (err_kw if dest == "error" else cfg_kw)[key] = parsed
        except ValueError as exc:
            raise ScenarioError(str(exc), key=key, line=lineno, path=path) from None
        if key in ("mode", "switch_levels") and not (modes if key == "mode" else levels):
            raise ScenarioError("empty list", key=key, line=lineno, path=path)

    if seed is not None:
        cfg_kw["seed"] = seed
    if "messages" in cfg_kw and "flit_count" not in cfg_kw:
        cfg_kw["flit_count"] = len(cfg_kw["messages"])
    if "name" not in cfg_kw and path:
        cfg_kw["name"] = Path(path).stem
    try:
        err_kw["seed"] = cfg_kw.get("seed", 0)
        error = ErrorConfig(**err_kw)
    except ValueError as exc:
        key = next((k for k in err_kw if k in str(exc)), None)
        raise ScenarioError(str(exc), key=key, line=seen.get(key), path=path) from None

    configs = []
    sweep = len(modes) > 1 or len(levels) > 1
    for mode, level in itertools.product(modes, levels):
        try:
            cfg = ScenarioConfig(mode=mode, switch_levels=level, error=error, **cfg_kw)
        except ConfigError as exc:
            key = next((k for k in seen if k in str(exc)), None)
            raise ScenarioError(str(exc), key=key, line=seen.get(key), path=path) from None
        if sweep:
            cfg = replace(cfg, name=f"{cfg.name}[{mode.value},L{level}]")
        configs.append(cfg)
    return Scenario(configs, path)


def load_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    """Read and parse a scenario file; a missing file is a ``ScenarioError``."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc.strerror}", path=str(p)) from None
    return parse_scenario(text, str(p), seed)


def builtin_scenario_dir() -> Path:
    return Path(__file__).parent / "scenarios"


def find_scenario(name: str) -> Path:
    """A path as given, else a shipped scenario by file name or stem."""
    p = Path(name)
    if p.exists():
        return p
    shipped = builtin_scenario_dir()
    for candidate in (shipped / name, shipped / f"{name}.scenario"):
        if candidate.exists():
            return candidate
    return p
