"""Run configuration: defaults, JSON config files, flag overrides.

Precedence is flags > config file > built-in defaults.  The config file
is one JSON object using exactly the RunConfig field names; unknown keys
are an error so typos fail loudly instead of silently keeping a default.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .body_budget import SC_MODES, WeightConfig
from .curiosity import CuriosityParams
from .trace_model import (
    ClassProfile,
    ObjectClass,
    SCOREABLE_CLASSES,
    SceneBounds,
)
from .tracker import TrackerParams


class ConfigError(ValueError):
    """Unusable configuration (bad file, unknown key, invalid value)."""


def _default_impacts() -> dict[str, float]:
    return {"sphere": 10.0, "cone": 100.0, "cube": 1000.0}


@dataclass(frozen=True)
class RunConfig:
    """Every knob of the pipeline in one place.

    q, r and p0 are the filter's process noise, measurement noise and
    initial state variance.  promotion_threshold None means: keep the
    loaded KB's stored threshold (or 3 for a fresh KB).
    """

    alpha: float = 0.33
    beta: float = 0.33
    gamma: float = 0.33
    assoc_gate: float = 50.0
    jump_gate: float = 25.0
    q: float = 1.0
    r: float = 2.0
    p0: float = 100.0
    occlusion_coverage_min: float = 0.7
    promotion_threshold: Optional[int] = None
    impact_values: Mapping[str, float] = field(default_factory=_default_impacts)
    sc_mode: str = "descriptor"
    scene_width: float = 640.0
    scene_height: float = 360.0
    kb_path: Optional[str] = None
    out_dir: str = "."
    seed: int = 0

    def __post_init__(self):
        try:
            self.weights()
            self.tracker_params()
            self.profiles()
            self.scene()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.sc_mode not in SC_MODES:
            raise ConfigError(f"sc_mode must be one of {SC_MODES}, got {self.sc_mode!r}")
        if not (0.0 < self.occlusion_coverage_min <= 1.0):
            raise ConfigError(
                f"occlusion_coverage_min must be in (0, 1], got {self.occlusion_coverage_min}"
            )
        if self.promotion_threshold is not None and self.promotion_threshold < 1:
            raise ConfigError(
                f"promotion_threshold must be >= 1, got {self.promotion_threshold}"
            )

    # -- adapters into the module-level parameter types ---------------------

    def weights(self) -> WeightConfig:
        return WeightConfig(self.alpha, self.beta, self.gamma)

    def tracker_params(self) -> TrackerParams:
        return TrackerParams(
            assoc_gate=self.assoc_gate,
            jump_gate=self.jump_gate,
            process_noise=self.q,
            measurement_noise=self.r,
            initial_variance=self.p0,
        )

    def profiles(self) -> dict[ObjectClass, ClassProfile]:
        profiles = {}
        for name, impact in self.impact_values.items():
            cls = ObjectClass.from_name(name)
            if cls not in SCOREABLE_CLASSES:
                raise ConfigError(f"impact_values: class {name!r} cannot carry an impact value")
            profiles[cls] = ClassProfile(cls, float(impact))
        if not profiles:
            raise ConfigError("impact_values must name at least one class")
        return profiles

    def scene(self) -> SceneBounds:
        return SceneBounds(self.scene_width, self.scene_height)

    def curiosity_params(self) -> CuriosityParams:
        return CuriosityParams(
            weights=self.weights(),
            tracker=self.tracker_params(),
            occlusion_coverage_min=self.occlusion_coverage_min,
            sc_mode=self.sc_mode,
            profiles=self.profiles(),
            scene=self.scene(),
        )


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}

# Fields whose JSON value must be an integer, not a float.
_INT_FIELDS = {"promotion_threshold", "seed"}


def config_from_document(doc) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a single JSON object")
    unknown = sorted(set(doc) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for name in _INT_FIELDS & set(doc):
        if doc[name] is not None and not isinstance(doc[name], int):
            raise ConfigError(f"{name} must be an integer, got {doc[name]!r}")
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_document(doc)


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """New config with the non-None overrides applied (flag precedence)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    bad = sorted(set(changes) - _FIELD_NAMES)
    if bad:
        raise ConfigError(f"unknown config fields: {', '.join(bad)}")
    return dataclasses.replace(config, **changes)
