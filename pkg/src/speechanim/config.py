"""YAML pipeline configuration with "desk" and "paper" profiles.

Precedence: profile defaults, then config-file values, then CLI overrides.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .filtering import FilterConfig
from .models import ModelConfig
from .synthdata import CorpusConfig
from .training import TrainConfig

PROFILES = ("desk", "paper")


@dataclass
class PipelineConfig:
    profile: str = "desk"
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    filters: FilterConfig = field(default_factory=FilterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig.desk)


def _apply(dc, data: dict | None):
    """Replace dataclass fields from a mapping, ignoring unknown keys."""
    if not data:
        return dc
    names = {f.name for f in fields(dc)}
    known = {}
    for key, value in data.items():
        if key not in names:
            raise ValueError(f"unknown config key {key!r} for {type(dc).__name__}")
        if isinstance(value, list):
            value = tuple(value)
        known[key] = value
    return replace(dc, **known)


def profile_config(profile: str) -> PipelineConfig:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {PROFILES}")
    if profile == "paper":
        return PipelineConfig(profile="paper", train=TrainConfig.paper(),
                              model=ModelConfig.paper())
    return PipelineConfig()


def load_config(path=None, profile: str | None = None) -> PipelineConfig:
    """Load a config file on top of a profile's defaults.

    The file may set ``profile`` itself; an explicit ``profile`` argument
    (e.g. from the command line) wins.
    """
    data = {}
    if path is not None:
        raw = Path(path).read_text()
        data = yaml.safe_load(raw) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must contain a mapping")
    chosen = profile or data.get("profile") or "desk"
    cfg = profile_config(chosen)
    cfg = replace(
        cfg,
        corpus=_apply(cfg.corpus, data.get("corpus")),
        filters=_apply(cfg.filters, data.get("filters")),
        train=_apply(cfg.train, data.get("train")),
        model=_apply(cfg.model, data.get("model")),
    )
    return cfg
