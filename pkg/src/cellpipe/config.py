"""INI-style pipeline configuration.

Each section maps onto one config dataclass; keys are the field names. Unknown
sections or keys are errors so typos never silently fall back to defaults.

Example::

    [paths]
    output = run1

    [pipeline]
    stages = synth, labelgen, segment, track, score

    [segmentation]
    rho_seed = 0.5
    sigma = 1.5, 1.5
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from io import StringIO
from dataclasses import dataclass, field
from pathlib import Path

from .labelgen import LabelGenConfig
from .segment import SegmentationConfig
from .synth import SynthConfig
from .tracking import TrackingConfig

STAGES = ("synth", "labelgen", "segment", "track", "score")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PathsConfig:
    # dataset root holding 01/ (raw) and 01_GT/TRA/ (reference); defaults to output
    input: str = ""
    output: str = "cellpipe_out"


@dataclass(frozen=True)
class StageConfig:
    stages: tuple[str, ...] = STAGES

    def __post_init__(self):
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ValueError(f"unknown stage(s) {unknown}; choose from {list(STAGES)}")


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    pipeline: StageConfig = field(default_factory=StageConfig)
    labelgen: LabelGenConfig = field(default_factory=LabelGenConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    @property
    def input_dir(self) -> Path:
        return Path(self.paths.input or self.paths.output)

    @property
    def output_dir(self) -> Path:
        return Path(self.paths.output)


def _parse_value(raw: str, tp):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    if tp is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if tp in (int, float, str):
        return tp(raw)
    if origin is tuple:
        args = typing.get_args(tp)
        items = [s for s in raw.split(",") if s.strip()]
        inner = args[0]
        if typing.get_origin(inner) is tuple:
            # pairs written as a:b
            return tuple(tuple(int(x) for x in s.strip().split(":")) for s in items)
        return tuple(inner(s.strip()) for s in items)
    raise TypeError(f"unsupported config type {tp}")


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(":".join(str(x) for x in v) if isinstance(v, tuple) else str(v) for v in value)
    return str(value)


def build_section(cls, items: dict[str, str], section: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(items) - names)
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(unknown)}")
    kwargs = {}
    for key, raw in items.items():
        try:
            kwargs[key] = _parse_value(raw, hints[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def parse_config(text: str) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep key case so typos are reported verbatim
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    hints = typing.get_type_hints(PipelineConfig)
    unknown = sorted(set(parser.sections()) - set(hints))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    sections = {name: build_section(hints[name], dict(parser[name]), name) for name in parser.sections()}
    return PipelineConfig(**sections)


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: PipelineConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for f in dataclasses.fields(cfg):
        section = getattr(cfg, f.name)
        parser[f.name] = {g.name: format_value(getattr(section, g.name)) for g in dataclasses.fields(section)}
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


def override(cfg, **changes):
    """``dataclasses.replace`` that drops ``None`` values and reports bad values as ConfigError."""
    changes = {k: v for k, v in changes.items() if v is not None}
    if not changes:
        return cfg
    try:
        return dataclasses.replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
