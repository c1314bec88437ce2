"""
Raw-signal to decibel transforms for the four low-cost noise sensors.

All transforms accept a scalar or an array and return the same shape; scalar
in, Python float out. Domain violations raise ``ValueError``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "P_REF",
    "CalibrationError",
    "DegenerateFitError",
    "SensorKind",
    "ElectretParams",
    "LinearCalibration",
    "SensorModel",
    "CalibrationPair",
    "spl_from_vrms",
    "sparkfun_db",
    "linear_db",
    "fit_linear",
    "sen0232_db",
    "apply_calibration",
    "encode_raw",
    "load_pairs_csv",
]

#: Reference sound pressure in pascals (0 dB SPL).
P_REF = 2e-5

SEN0232_VOLTS_TO_DBA = 50.0


class CalibrationError(ValueError):
    """Sensor model is missing the parameters its kind requires."""


class DegenerateFitError(ValueError):
    """Regression abscissae do not determine a line."""


class SensorKind(str, enum.Enum):
    OPENJUMPER = "openjumper"
    GROVE = "grove"
    SPARKFUN = "sparkfun"
    SEN0232 = "sen0232"


@dataclass(frozen=True)
class ElectretParams:
    """Electret microphone + preamp: S in V/Pa, linear gain G, P_ref in Pa."""

    sensitivity_S: float = 316.22
    gain_G: float = 19.95
    p_ref: float = P_REF

    def __post_init__(self):
        for name in ("sensitivity_S", "gain_G", "p_ref"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def zero_db_vrms(self) -> float:
        """RMS voltage at which the computed level is exactly 0 dB."""
        return self.gain_G * self.sensitivity_S * self.p_ref


@dataclass(frozen=True)
class LinearCalibration:
    slope: float
    intercept: float

    def __post_init__(self):
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError("slope and intercept must be finite")


@dataclass(frozen=True)
class CalibrationPair:
    device_value: float
    reference_db: float

    def __post_init__(self):
        if not math.isfinite(self.reference_db):
            raise ValueError("reference_db must be finite")


@dataclass(frozen=True)
class SensorModel:
    """One deployed sensor with the parameter block its kind needs.

    Sparkfun uses the log regression unless a ``linear`` block is supplied,
    in which case it runs in amplitude (linear) mode. ``stated_error`` is
    ``None`` for the boards that make no accuracy claim.
    """

    kind: SensorKind
    electret: ElectretParams | None = None
    linear: LinearCalibration | None = None
    range_min: float = 30.0
    range_max: float = 130.0
    stated_error: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SensorKind(self.kind))
        if self.kind is SensorKind.SEN0232 and self.stated_error is None:
            object.__setattr__(self, "stated_error", 1.5)
        if not self.range_min < self.range_max:
            raise ValueError("range_min must be below range_max")
        kind = self.kind
        if kind is SensorKind.OPENJUMPER:
            ok = self.electret is not None and self.linear is None
        elif kind is SensorKind.GROVE:
            ok = self.linear is not None and self.electret is None
        elif kind is SensorKind.SPARKFUN:
            ok = self.electret is None
        else:
            ok = self.electret is None and self.linear is None
            if (self.range_min, self.range_max, self.stated_error) != (30.0, 130.0, 1.5):
                ok = False
        if not ok:
            raise CalibrationError(f"parameter block does not match sensor kind {kind.value}")

    @classmethod
    def openjumper(cls, electret: ElectretParams | None = None, **kw) -> "SensorModel":
        return cls(SensorKind.OPENJUMPER, electret=electret or ElectretParams(), **kw)

    @classmethod
    def grove(cls, linear: LinearCalibration, **kw) -> "SensorModel":
        return cls(SensorKind.GROVE, linear=linear, **kw)

    @classmethod
    def sparkfun(cls, linear: LinearCalibration | None = None, **kw) -> "SensorModel":
        return cls(SensorKind.SPARKFUN, linear=linear, **kw)

    @classmethod
    def sen0232(cls) -> "SensorModel":
        return cls(SensorKind.SEN0232, range_min=30.0, range_max=130.0, stated_error=1.5)


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


def spl_from_vrms(v_rms, params: ElectretParams = ElectretParams()):
    """Sound pressure level in dB from the amplifier's RMS output voltage.

    The voltage is referred back to the diaphragm through the gain and the
    microphone sensitivity, then expressed relative to ``params.p_ref``.
    """
    v, scalar = _as_array(v_rms)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("v_rms must be positive and finite")
    p_rms = (v / params.gain_G) / params.sensitivity_S
    return _out(20.0 * np.log10(p_rms / params.p_ref), scalar)


def sparkfun_db(value):
    """Sparkfun sound detector log regression, truncated to an integer."""
    v, scalar = _as_array(value)
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("sparkfun value must be positive and finite")
    out = np.trunc(20.0 * np.log10(v / 20.0) + 50.0)
    return int(out) if scalar else out


def linear_db(x, cal: LinearCalibration):
    v, scalar = _as_array(x)
    if not np.all(np.isfinite(v)):
        raise ValueError("linear calibration input must be finite")
    return _out(cal.slope * v + cal.intercept, scalar)


def fit_linear(pairs: Sequence[CalibrationPair]) -> LinearCalibration:
    """Ordinary least-squares line through (device_value, reference_db)."""
    if len(pairs) < 2:
        raise DegenerateFitError("need at least two calibration pairs")
    x = np.array([p.device_value for p in pairs], dtype=float)
    y = np.array([p.reference_db for p in pairs], dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("device values must be finite")
    # centred form keeps the normal equations well conditioned
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0 or np.unique(x).size < 2:
        raise DegenerateFitError("need at least two distinct device values")
    slope = float(np.dot(dx, y - ym)) / sxx
    return LinearCalibration(slope=slope, intercept=float(ym - slope * xm))


def sen0232_db(voltage):
    """SEN0232 analog output: 50 dBA per volt, clamped to 30..130 dBA."""
    v, scalar = _as_array(voltage)
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ValueError("SEN0232 voltage must be non-negative")
    return _out(np.clip(v * SEN0232_VOLTS_TO_DBA, 30.0, 130.0), scalar)


def apply_calibration(model: SensorModel, raw):
    """Convert a raw sample (or array of them) to dBA for ``model``."""
    kind = model.kind
    if kind is SensorKind.OPENJUMPER:
        if model.electret is None:
            raise CalibrationError("openjumper model lacks electret parameters")
        db = spl_from_vrms(raw, model.electret)
    elif kind is SensorKind.GROVE:
        if model.linear is None:
            raise CalibrationError("grove model lacks a linear calibration")
        db = linear_db(raw, model.linear)
    elif kind is SensorKind.SPARKFUN:
        db = linear_db(raw, model.linear) if model.linear is not None else sparkfun_db(raw)
    else:
        db = sen0232_db(raw)
    out = np.clip(db, model.range_min, model.range_max)
    return float(out) if np.ndim(out) == 0 else out


def encode_raw(true_db, model: SensorModel):
    """Raw sensor output that ``apply_calibration`` maps back to ``true_db``.

    Used by the node emulator so that every synthetic sample travels through
    the real calibration path.
    """
    d, scalar = _as_array(true_db)
    if not np.all(np.isfinite(d)) or np.any(d < model.range_min) or np.any(d > model.range_max):
        raise ValueError(f"level outside sensor range [{model.range_min}, {model.range_max}]")
    kind = model.kind
    if kind is SensorKind.OPENJUMPER:
        p = model.electret
        raw = p.zero_db_vrms * 10.0 ** (d / 20.0)
    elif kind is SensorKind.SEN0232:
        raw = d / SEN0232_VOLTS_TO_DBA
    elif model.linear is not None:
        if model.linear.slope == 0:
            raise CalibrationError("zero-slope calibration is not invertible")
        raw = (d - model.linear.intercept) / model.linear.slope
    else:
        # nudge up so truncation lands on floor(d) rather than one below it
        raw = 20.0 * 10.0 ** ((d + 1e-9 - 50.0) / 20.0)
    return _out(raw, scalar)


def load_pairs_csv(path: str | Path) -> list[CalibrationPair]:
    """Read a ``device_value,reference_db`` CSV of calibration pairs."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["device_value", "reference_db"]:
            raise ValueError("expected header 'device_value,reference_db'")
        return [CalibrationPair(float(r["device_value"]), float(r["reference_db"])) for r in reader]


def pairs_from_iterable(rows: Iterable[tuple[float, float]]) -> list[CalibrationPair]:
    return [CalibrationPair(float(x), float(y)) for x, y in rows]
