"""Pipeline settings and their INI file form.

Every threshold lives in one of the section dataclasses below.  A config file
may set any subset of them::

    [proposal]
    tau_b = 0.5
    [train]
    loss_kind = structure_sum

Unknown sections or keys are errors so a typo never silently falls back to a
default.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigError
from .featuremaps import NoiseConfig
from .proposal import ProposalConfig
from .refine import RefineConfig
from .scoring import TrainConfig

CUE_MODES = ("photo", "maps", "none")


@dataclass(frozen=True)
class RunConfig:
    # cap on the wall count on top of the predicted complexity (0 = none)
    max_walls: int = 0
    # where alignment cues come from: the photo when given, the boundary map, or nowhere
    cues: str = "photo"
    seed: int = 0

    def __post_init__(self):
        if self.max_walls < 0:
            raise ValueError("max_walls must be >= 0")
        if self.cues not in CUE_MODES:
            raise ValueError(f"cues must be one of {CUE_MODES}")


@dataclass(frozen=True)
class PipelineConfig:
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def with_cap(self, cap: Optional[int]) -> "PipelineConfig":
        return replace(self, run=replace(self.run, max_walls=int(cap or 0)))

    def with_cues(self, cues: str) -> "PipelineConfig":
        return replace(self, run=replace(self.run, cues=cues))


SECTIONS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _convert(raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None


def from_mapping(data: dict, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Build a config from ``{section: {key: string value}}``."""
    parts = {}
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        current = getattr(base, section)
        known = {f.name for f in dataclasses.fields(current)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            kwargs[key] = _convert(str(raw), getattr(current, key), f"[{section}] {key}")
        try:
            parts[section] = replace(current, **kwargs)
        except ValueError as e:
            raise ConfigError(f"[{section}]: {e}") from None
    return replace(base, **parts)


def load_config(path) -> PipelineConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as f:
            cp.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        return from_mapping({s: dict(cp.items(s)) for s in cp.sections()})
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def dump_config(cfg: PipelineConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for name in SECTIONS:
        part = getattr(cfg, name)
        cp[name] = {f.name: str(getattr(part, f.name)) for f in dataclasses.fields(part)}
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
