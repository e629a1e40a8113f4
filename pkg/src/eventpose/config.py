"""Flat `key = value` configuration covering the whole pipeline.

Keys are `section.field` with the sections mapped onto the parameter
dataclasses; every default is dumpable and the parser rejects anything it
does not recognize, so a dump always round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace

from .events import WindowPolicy
from .features import HarrisParams
from .flow import FlowParams
from .geometry import CameraIntrinsics
from .matching import MatchParams
from .simulator import SimConfig
from .tracker import LMParams, SelectParams, SurfaceParams, TrackerConfig


@dataclass
class PipelineConfig:
    camera: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(250.0, 250.0, 173.0, 130.0,
                                                 346, 260))
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    sim: SimConfig = field(default_factory=SimConfig)


# section name -> attribute path inside PipelineConfig
SECTIONS = {
    "camera": ("camera",),
    "window": ("tracker", "window"),
    "surface": ("tracker", "surface"),
    "harris": ("tracker", "harris"),
    "select": ("tracker", "select"),
    "flow": ("tracker", "flow"),
    "matching": ("tracker", "matching"),
    "lm": ("tracker", "lm"),
    "tracker": ("tracker",),
    "sim": ("sim",),
}

# scalar fields surfaced under the bare `tracker` section
_TRACKER_SCALARS = ("huber_delta", "max_coast", "match_rounds", "predict")


def _get(cfg: PipelineConfig, path):
    obj = cfg
    for name in path:
        obj = getattr(obj, name)
    return obj


def _section_fields(section, obj):
    if section == "tracker":
        return [f for f in fields(obj) if f.name in _TRACKER_SCALARS]
    return [f for f in fields(obj) if not is_dataclass(f.type)
            and not is_dataclass(getattr(obj, f.name))]


def dump_config(cfg: PipelineConfig | None = None) -> str:
    cfg = cfg if cfg is not None else PipelineConfig()
    lines = []
    for section, path in SECTIONS.items():
        obj = _get(cfg, path)
        for f in _section_fields(section, obj):
            lines.append(f"{section}.{f.name} = {getattr(obj, f.name)!r}"
                         .replace("'", ""))
    return "\n".join(lines) + "\n"


def _convert(raw: str, kind, key: str):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: cannot read {raw!r} as a flag")
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{key}: cannot read {raw!r} as an integer") from None
    if kind is float:
        try:
            return float(raw)
        except ValueError:
            raise ValueError(f"{key}: cannot read {raw!r} as a number") from None
    return raw


_KIND = {"int": int, "float": float, "str": str, "bool": bool}


def _field_kind(f):
    t = f.type
    if isinstance(t, str):
        return _KIND.get(t, str)
    return t if t in (int, float, str, bool) else str


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Apply `key = value` lines on top of base (defaults when omitted).

    Blank lines and `#` comments are allowed; unknown keys raise
    ValueError.
    """
    cfg = base if base is not None else PipelineConfig()
    updates: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ValueError(f"line {lineno}: key {key!r} lacks a section")
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise ValueError(f"line {lineno}: unknown section {section!r}")
        obj = _get(cfg, SECTIONS[section])
        legal = {f.name: f for f in _section_fields(section, obj)}
        if name not in legal:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        updates.setdefault(section, {})[name] = _convert(
            value, _field_kind(legal[name]), key)

    for section, vals in updates.items():
        path = SECTIONS[section]
        obj = replace(_get(cfg, path), **vals)
        cfg = _replace_path(cfg, path, obj)
    return cfg


def _replace_path(cfg, path, value):
    if len(path) == 1:
        return replace(cfg, **{path[0]: value})
    parent = _get(cfg, path[:-1])
    updated = replace(parent, **{path[-1]: value})
    return _replace_path(cfg, path[:-1], updated)


def read_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    with open(path) as fh:
        return parse_config(fh.read(), base)
