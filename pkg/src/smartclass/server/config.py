"""Platform configuration: strict schema, defaults, full-violation reporting.

Config files are YAML (JSON works too, being a YAML subset). Unknown keys are
rejected and validation reports every violation at once rather than stopping
at the first.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..attendance import DEFAULT_PAIRING_WINDOW_MS, FraudConfig
from ..ecosmart import (
    CalibrationCurve,
    ControlConfig,
    Direction,
    HysteresisBand,
    InvalidCurve,
)
from ..quizgen import DEFAULT_NUM_QUESTIONS
from ..retrieval import DEFAULT_CHUNK_SIZE, DEFAULT_K, DEFAULT_OVERLAP, EMBEDDING_DIMS


class ConfigInvalid(Exception):
    """Carries the full list of violations, one string per problem."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid config:\n" + "\n".join(f"  - {v}" for v in violations))


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FraudToggles(_Section):
    proxy_scan: bool = True
    duplicate_tag: bool = True
    shared_mac: bool = True

    def to_fraud_config(self) -> FraudConfig:
        return FraudConfig(self.proxy_scan, self.duplicate_tag, self.shared_mac)


class AttendanceSection(_Section):
    pairing_window_ms: int = Field(default=DEFAULT_PAIRING_WINDOW_MS, gt=0)
    fraud: FraudToggles = Field(default_factory=FraudToggles)


class BandModel(_Section):
    on_threshold: float
    off_threshold: float
    direction: Literal["rising", "falling"]

    @model_validator(mode="after")
    def _deadband(self) -> "BandModel":
        if self.direction == "rising" and not self.off_threshold < self.on_threshold:
            raise ValueError(
                f"rising band requires off_threshold < on_threshold "
                f"(got off={self.off_threshold}, on={self.on_threshold})"
            )
        if self.direction == "falling" and not self.off_threshold > self.on_threshold:
            raise ValueError(
                f"falling band requires off_threshold > on_threshold "
                f"(got off={self.off_threshold}, on={self.on_threshold})"
            )
        return self

    def to_band(self) -> HysteresisBand:
        direction = (
            Direction.RISING_ACTIVATES if self.direction == "rising" else Direction.FALLING_ACTIVATES
        )
        return HysteresisBand(self.on_threshold, self.off_threshold, direction)


def _band(on: float, off: float, direction: str) -> BandModel:
    return BandModel(on_threshold=on, off_threshold=off, direction=direction)


class ControlSection(_Section):
    hvac: BandModel = Field(default_factory=lambda: _band(26.0, 24.0, "rising"))
    lighting: BandModel = Field(default_factory=lambda: _band(300.0, 400.0, "falling"))
    ventilation: BandModel = Field(default_factory=lambda: _band(600.0, 400.0, "rising"))
    humidity_vent: Optional[BandModel] = Field(default_factory=lambda: _band(70.0, 60.0, "rising"))
    poll_period_ms: int = Field(default=2000, gt=0)

    def to_control_config(self) -> ControlConfig:
        return ControlConfig(
            hvac_band=self.hvac.to_band(),
            lighting_band=self.lighting.to_band(),
            ventilation_band=self.ventilation.to_band(),
            humidity_vent_band=self.humidity_vent.to_band() if self.humidity_vent else None,
            poll_period_ms=self.poll_period_ms,
        )


class CurveModel(_Section):
    points: list[tuple[float, float]]
    unit: str

    @model_validator(mode="after")
    def _valid_curve(self) -> "CurveModel":
        try:
            CalibrationCurve(tuple(self.points), self.unit)
        except InvalidCurve as exc:
            raise ValueError(str(exc)) from exc
        return self

    def to_curve(self) -> CalibrationCurve:
        return CalibrationCurve(tuple(self.points), self.unit)


class CurvesSection(_Section):
    light: CurveModel = Field(
        default_factory=lambda: CurveModel(points=[(0, 0.0), (4095, 10000.0)], unit="lux")
    )
    air: CurveModel = Field(
        default_factory=lambda: CurveModel(points=[(0, 0.0), (4095, 2000.0)], unit="ppm")
    )


class RetrievalSection(_Section):
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, gt=0)
    overlap: int = Field(default=DEFAULT_OVERLAP, ge=0)
    dims: Literal[1024] = EMBEDDING_DIMS  # fixed embedding width, stated for the record
    default_k: int = Field(default=DEFAULT_K, ge=1)

    @model_validator(mode="after")
    def _sizes(self) -> "RetrievalSection":
        if self.chunk_size <= self.overlap:
            raise ValueError(f"chunk_size ({self.chunk_size}) must exceed overlap ({self.overlap})")
        return self


class GeneratorSection(_Section):
    mode: Literal["stub", "remote"] = "stub"
    endpoint: Optional[str] = None
    timeout_s: float = Field(default=10.0, gt=0)
    api_key_env: Optional[str] = None
    identity: str = "remote"

    @model_validator(mode="after")
    def _remote_needs_endpoint(self) -> "GeneratorSection":
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("generator.mode 'remote' requires an endpoint")
        return self

    def api_key(self) -> Optional[str]:
        return os.environ.get(self.api_key_env) if self.api_key_env else None


class QuizSection(_Section):
    default_num_questions: int = Field(default=DEFAULT_NUM_QUESTIONS, ge=1)


class ServerSection(_Section):
    host: str = "127.0.0.1"
    port: int = Field(default=8000, gt=0, lt=65536)
    device_port: Optional[int] = Field(default=None, gt=0, lt=65536)
    admin_token: Optional[str] = None
    event_log: Optional[str] = None
    allow_event_injection: bool = True
    dashboard_dist: Optional[str] = None


class PlatformConfig(_Section):
    attendance: AttendanceSection = Field(default_factory=AttendanceSection)
    control: ControlSection = Field(default_factory=ControlSection)
    curves: CurvesSection = Field(default_factory=CurvesSection)
    retrieval: RetrievalSection = Field(default_factory=RetrievalSection)
    generator: GeneratorSection = Field(default_factory=GeneratorSection)
    quiz: QuizSection = Field(default_factory=QuizSection)
    server: ServerSection = Field(default_factory=ServerSection)


def _format_violation(err: dict) -> str:
    loc = ".".join(str(p) for p in err["loc"]) or "<root>"
    return f"{loc}: {err['msg']}"


def parse_config(data: Optional[dict]) -> PlatformConfig:
    try:
        return PlatformConfig.model_validate(data or {})
    except ValidationError as exc:
        raise ConfigInvalid([_format_violation(e) for e in exc.errors()]) from exc


def load_config(path: str | Path) -> PlatformConfig:
    """Parse and fully validate a config file; raises ConfigInvalid listing
    every violation."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigInvalid([f"not valid YAML: {exc}"]) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigInvalid([f"top level must be a mapping, got {type(raw).__name__}"])
    return parse_config(raw)
