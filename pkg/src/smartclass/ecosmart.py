"""Environment monitoring and hysteresis control.

Raw LDR/MQ2 counts are calibrated through monotone piecewise-linear curves
into lux/ppm; the temperature/humidity channel arrives pre-decoded. Each
actuator is driven by a deadband: it turns on at one threshold, off at the
other, and holds in between, which is what prevents on/off chatter when a
metric hovers near a single setpoint. All functions here are pure; the
polling loop lives with the caller.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

ADC_MAX = 4095

TEMP_RANGE = (-40.0, 80.0)
HUMIDITY_RANGE = (0.0, 100.0)


class EcoError(Exception):
    pass


class OutOfDomain(EcoError):
    pass


class InvalidCurve(EcoError):
    pass


class InvalidBand(EcoError):
    pass


class RangeViolation(EcoError):
    def __init__(self, fieldname: str, value: float, trace_index: Optional[int] = None):
        self.field = fieldname
        self.value = value
        self.trace_index = trace_index
        at = f" (trace index {trace_index})" if trace_index is not None else ""
        super().__init__(f"{fieldname} out of range: {value}{at}")


class Channel(str, Enum):
    TEMP_HUMIDITY = "temp_humidity"
    LIGHT = "light"
    AIR_QUALITY = "air_quality"


class Direction(str, Enum):
    RISING_ACTIVATES = "rising"
    FALLING_ACTIVATES = "falling"


@dataclass(frozen=True)
class CalibrationCurve:
    """Monotone control-point curve from raw ADC counts to a physical unit."""

    points: tuple[tuple[float, float], ...]
    unit: str

    def __post_init__(self):
        if len(self.points) < 2:
            raise InvalidCurve("curve needs at least 2 control points")
        raws = [p[0] for p in self.points]
        values = [p[1] for p in self.points]
        if any(b <= a for a, b in zip(raws, raws[1:])):
            raise InvalidCurve("raw control points must be strictly increasing")
        if any(b < a for a, b in zip(values, values[1:])):
            raise InvalidCurve("values must be monotone non-decreasing")
        if raws[0] > 0 or raws[-1] < ADC_MAX:
            raise InvalidCurve(f"curve domain must cover [0, {ADC_MAX}]")


def calibrate(curve: CalibrationCurve, raw: float) -> float:
    """Piecewise-linear interpolation; exact at control points."""
    raws = [p[0] for p in curve.points]
    if raw < raws[0] or raw > raws[-1]:
        raise OutOfDomain(f"raw {raw} outside [{raws[0]}, {raws[-1]}]")
    i = bisect_right(raws, raw) - 1
    if i == len(raws) - 1:
        return float(curve.points[-1][1])
    (x0, y0), (x1, y1) = curve.points[i], curve.points[i + 1]
    return y0 + (y1 - y0) * (raw - x0) / (x1 - x0)


@dataclass(frozen=True)
class Reading:
    temp_c: float
    humidity_pct: float
    lux: float
    air_ppm: float
    timestamp: int = 0


def validate_reading(
    temp_c: float, humidity_pct: float, lux: float, air_ppm: float, timestamp: int = 0
) -> Reading:
    """Range-guarded Reading constructor; names the violated field."""
    if not TEMP_RANGE[0] <= temp_c <= TEMP_RANGE[1]:
        raise RangeViolation("temp_c", temp_c)
    if not HUMIDITY_RANGE[0] <= humidity_pct <= HUMIDITY_RANGE[1]:
        raise RangeViolation("humidity_pct", humidity_pct)
    if lux < 0:
        raise RangeViolation("lux", lux)
    if air_ppm < 0:
        raise RangeViolation("air_ppm", air_ppm)
    return Reading(float(temp_c), float(humidity_pct), float(lux), float(air_ppm), int(timestamp))


@dataclass(frozen=True)
class HysteresisBand:
    on_threshold: float
    off_threshold: float
    direction: Direction

    def __post_init__(self):
        if self.direction is Direction.RISING_ACTIVATES:
            if not self.off_threshold < self.on_threshold:
                raise InvalidBand(
                    f"rising band requires off < on, got off={self.off_threshold} on={self.on_threshold}"
                )
        else:
            if not self.off_threshold > self.on_threshold:
                raise InvalidBand(
                    f"falling band requires off > on, got off={self.off_threshold} on={self.on_threshold}"
                )

    def demand(self, metric: float) -> Optional[bool]:
        """True to turn on, False to turn off, None to hold the prior state."""
        if self.direction is Direction.RISING_ACTIVATES:
            if metric >= self.on_threshold:
                return True
            if metric <= self.off_threshold:
                return False
        else:
            if metric <= self.on_threshold:
                return True
            if metric >= self.off_threshold:
                return False
        return None


@dataclass(frozen=True)
class ActuatorState:
    hvac_cooling: bool = False
    lighting: bool = False
    ventilation: bool = False

    def as_dict(self) -> dict[str, bool]:
        return {
            "hvac_cooling": self.hvac_cooling,
            "lighting": self.lighting,
            "ventilation": self.ventilation,
        }


@dataclass(frozen=True)
class Command:
    timestamp: int
    actuator: str
    new_state: bool
    cause: str


@dataclass(frozen=True)
class ControlConfig:
    hvac_band: HysteresisBand
    lighting_band: HysteresisBand
    ventilation_band: HysteresisBand
    humidity_vent_band: Optional[HysteresisBand] = None
    poll_period_ms: int = 2000

    def __post_init__(self):
        if self.poll_period_ms <= 0:
            raise InvalidBand(f"poll_period_ms must be positive, got {self.poll_period_ms}")


def default_control_config() -> ControlConfig:
    """Conventional comfort thresholds; override via platform config."""
    return ControlConfig(
        hvac_band=HysteresisBand(26.0, 24.0, Direction.RISING_ACTIVATES),
        lighting_band=HysteresisBand(300.0, 400.0, Direction.FALLING_ACTIVATES),
        ventilation_band=HysteresisBand(600.0, 400.0, Direction.RISING_ACTIVATES),
        humidity_vent_band=HysteresisBand(70.0, 60.0, Direction.RISING_ACTIVATES),
    )


def default_light_curve() -> CalibrationCurve:
    return CalibrationCurve(((0, 0.0), (4095, 10000.0)), "lux")


def default_air_curve() -> CalibrationCurve:
    return CalibrationCurve(((0, 0.0), (4095, 2000.0)), "ppm")


def _edge_cause(metric_name: str, value: float, band: HysteresisBand, turned_on: bool) -> str:
    if band.direction is Direction.RISING_ACTIVATES:
        op, threshold = (">=", band.on_threshold) if turned_on else ("<=", band.off_threshold)
    else:
        op, threshold = ("<=", band.on_threshold) if turned_on else (">=", band.off_threshold)
    return f"{metric_name} {value:g} {op} {threshold:g}"


def control_step(
    reading: Reading, prev: ActuatorState, config: ControlConfig
) -> tuple[ActuatorState, list[Command]]:
    """One control tick: apply each band to the reading, emit change commands.

    Ventilation honors both the air-quality band and (when configured) the
    humidity band: it turns on when either demands on and turns off only when
    no enabled band still demands on.
    """
    commands: list[Command] = []

    d = config.hvac_band.demand(reading.temp_c)
    hvac = prev.hvac_cooling if d is None else d
    if hvac != prev.hvac_cooling:
        commands.append(
            Command(
                reading.timestamp,
                "hvac_cooling",
                hvac,
                _edge_cause("temp_c", reading.temp_c, config.hvac_band, hvac),
            )
        )

    d = config.lighting_band.demand(reading.lux)
    lighting = prev.lighting if d is None else d
    if lighting != prev.lighting:
        commands.append(
            Command(
                reading.timestamp,
                "lighting",
                lighting,
                _edge_cause("lux", reading.lux, config.lighting_band, lighting),
            )
        )

    demands = [("air_ppm", reading.air_ppm, config.ventilation_band)]
    if config.humidity_vent_band is not None:
        demands.append(("humidity_pct", reading.humidity_pct, config.humidity_vent_band))
    votes = [(name, value, band, band.demand(value)) for name, value, band in demands]
    on_votes = [(name, value, band) for name, value, band, v in votes if v is True]
    if on_votes:
        ventilation = True
    elif all(v is False for _, _, _, v in votes):
        ventilation = False
    else:
        ventilation = prev.ventilation
    if ventilation != prev.ventilation:
        if ventilation:
            name, value, band = on_votes[0]
            cause = _edge_cause(name, value, band, True)
        else:
            cause = "; ".join(_edge_cause(n, v, b, False) for n, v, b, _ in votes)
        commands.append(Command(reading.timestamp, "ventilation", ventilation, cause))

    return (
        ActuatorState(hvac_cooling=hvac, lighting=lighting, ventilation=ventilation),
        commands,
    )


@dataclass
class ScenarioResult:
    states: list[ActuatorState]
    commands: list[Command]
    toggles: dict[str, int]


def run_scenario(
    readings: Sequence[Reading], config: ControlConfig, initial: ActuatorState = ActuatorState()
) -> ScenarioResult:
    """Fold control_step over a reading trace; deterministic for given inputs."""
    if not readings:
        raise EcoError("empty reading trace")
    states: list[ActuatorState] = []
    commands: list[Command] = []
    toggles = {"hvac_cooling": 0, "lighting": 0, "ventilation": 0}
    state = initial
    for i, reading in enumerate(readings):
        try:
            validate_reading(
                reading.temp_c, reading.humidity_pct, reading.lux, reading.air_ppm, reading.timestamp
            )
        except RangeViolation as exc:
            raise RangeViolation(exc.field, exc.value, trace_index=i) from None
        state, cmds = control_step(reading, state, config)
        states.append(state)
        commands.extend(cmds)
        for c in cmds:
            toggles[c.actuator] += 1
    return ScenarioResult(states, commands, toggles)


# -- trace / log files -------------------------------------------------------


def load_trace(
    path: str | Path,
    light_curve: Optional[CalibrationCurve] = None,
    air_curve: Optional[CalibrationCurve] = None,
) -> list[Reading]:
    """Read a scenario trace file.

    Lines are whitespace-separated columns: timestamp_ms temp_c humidity_pct
    lux_raw air_raw. Raw columns are ADC counts run through the curves. Blank
    lines and '#' comments are skipped.
    """
    light_curve = light_curve or default_light_curve()
    air_curve = air_curve or default_air_curve()
    readings = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split()
        if len(cols) != 5:
            raise EcoError(f"{path}:{lineno}: expected 5 columns, got {len(cols)}")
        ts, temp, hum, lux_raw, air_raw = cols
        readings.append(
            validate_reading(
                float(temp),
                float(hum),
                calibrate(light_curve, float(lux_raw)),
                calibrate(air_curve, float(air_raw)),
                int(ts),
            )
        )
    return readings


def write_command_log(path: str | Path, commands: Iterable[Command]) -> None:
    """Line-delimited JSON records: timestamp_ms, actuator, new_state, cause."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in commands:
            fh.write(
                json.dumps(
                    {
                        "timestamp_ms": c.timestamp,
                        "actuator": c.actuator,
                        "new_state": "on" if c.new_state else "off",
                        "cause": c.cause,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
