"""Light waveforms and the per-row gain model.

An AC-driven light's intensity over time, sampled row by row by a rolling
shutter, becomes a periodic pattern over image rows.  Three waveform
families are modeled, all with unit peak amplitude:

* full rectification:   |cos(theta)|
* half rectification:   max(0, cos(theta))
* pulse-width drive:    1 where cos(theta) > cos(pi * duty), else 0

The observed per-row multiplicative gain mixes the flickering source with
steady ambient light; the ambient-to-flicker ratio ``k`` controls the
modulation depth 1 / (k + 1).  A gain of 1 means no visible flicker.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import ValidationError

TWO_PI = 2.0 * np.pi

#: fixed duty-cycle grid used by the estimator's candidate search
DUTY_GRID = tuple(d / 10 for d in range(1, 10))


@dataclass(frozen=True)
class WaveformMode:
    """Waveform family tag plus the duty cycle for pulse-width drive.

    kind is one of "full", "half", "pwm".  duty is only meaningful for
    "pwm" and must lie in (0, 1]; duty == 1 is the always-on limit.
    """

    kind: str
    duty: float | None = None

    def __post_init__(self):
        if self.kind not in ("full", "half", "pwm"):
            raise ValidationError(f"unknown waveform kind: {self.kind!r}")
        if self.kind == "pwm":
            if (self.duty is None or not np.isfinite(self.duty)
                    or not 0.0 < self.duty <= 1.0):
                raise ValidationError(
                    f"pwm duty must lie in (0, 1], got {self.duty}")
            object.__setattr__(self, "duty", float(self.duty))
        elif self.duty is not None:
            raise ValidationError(
                f"duty applies to pwm only, not {self.kind!r}")

    @classmethod
    def full_wave(cls) -> "WaveformMode":
        return cls("full")

    @classmethod
    def half_wave(cls) -> "WaveformMode":
        return cls("half")

    @classmethod
    def pwm(cls, duty: float) -> "WaveformMode":
        return cls("pwm", float(duty))

    @property
    def intensity_period(self) -> float:
        """Spatial period of the intensity pattern, in radians of theta.

        Full rectification repeats every half AC cycle (pi); half
        rectification and pulse-width drive repeat every full cycle (2*pi).
        """
        return np.pi if self.kind == "full" else TWO_PI

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "pwm":
            d["duty"] = self.duty
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WaveformMode":
        duty = d.get("duty")
        return cls(d["kind"], None if duty is None else float(duty))


def waveform_value(mode: WaveformMode, theta) -> np.ndarray | float:
    """Evaluate the unit-amplitude waveform at phase angle(s) theta.

    theta may be any real scalar or array; it is reduced modulo 2*pi before
    evaluation so the function is exactly periodic in the reduced argument.
    The pwm comparison is strict (boundary angles give 0); duty == 1 is
    treated as always-on, since a light that never switches off has no
    off-interval at all.
    """
    th = np.mod(np.asarray(theta, dtype=np.float64), TWO_PI)
    if mode.kind == "full":
        out = np.abs(np.cos(th))
    elif mode.kind == "half":
        out = np.maximum(0.0, np.cos(th))
    elif mode.duty >= 1.0:
        out = np.ones_like(th)
    else:
        out = (np.cos(th) > np.cos(np.pi * mode.duty)).astype(np.float64)
    return out if isinstance(theta, np.ndarray) else float(out)


def effective_value(mode: WaveformMode) -> float:
    """Mean of the waveform over one full period.

    A shutter long enough to integrate several AC cycles sees this mean, so
    it is the brightness a flicker-free exposure of the same light would
    record.  Closed forms: 2/pi (full), 1/pi (half), duty (pwm).
    """
    if mode.kind == "full":
        return 2.0 / np.pi
    if mode.kind == "half":
        return 1.0 / np.pi
    return mode.duty


@dataclass(frozen=True)
class FlickerSpec:
    """Full description of one frame's flicker.

    enf_hz:        AC grid frequency (50 or 60 in the wild, any positive
                   value accepted).
    row_hz:        sensor row-scan rate; enf_hz / row_hz must stay below
                   the 0.5 cycles/row Nyquist bound.
    phase:         waveform phase at row 0, stored reduced to [0, 2*pi).
    ambient_ratio: per-channel ratio of ambient to flickering light (the
                   ``k`` knob); larger means shallower banding.
    """

    mode: WaveformMode
    enf_hz: float
    row_hz: float
    phase: float = 0.0
    ambient_ratio: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not np.isfinite(self.enf_hz) or self.enf_hz <= 0:
            raise ValidationError(f"enf_hz must be positive, got {self.enf_hz}")
        if not np.isfinite(self.row_hz) or self.row_hz <= 0:
            raise ValidationError(f"row_hz must be positive, got {self.row_hz}")
        if not self.enf_hz / self.row_hz < 0.5:
            raise ValidationError(
                "enf_hz / row_hz must stay below 0.5 cycles/row "
                f"(got {self.enf_hz / self.row_hz:.4g})")
        k = tuple(float(v) for v in self.ambient_ratio)
        if len(k) != 3 or any(not np.isfinite(v) or v < 0 for v in k):
            raise ValidationError(
                f"ambient_ratio must be three values >= 0, got {self.ambient_ratio}")
        object.__setattr__(self, "ambient_ratio", k)
        if not np.isfinite(self.phase):
            raise ValidationError("phase must be finite")
        object.__setattr__(self, "phase", float(np.mod(self.phase, TWO_PI)))

    @property
    def cycles_per_row(self) -> float:
        """AC cycles advanced per scanned row (enf_hz / row_hz)."""
        return self.enf_hz / self.row_hz

    def with_phase(self, phase: float) -> "FlickerSpec":
        return replace(self, phase=phase)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.to_dict(),
            "enf_hz": self.enf_hz,
            "row_hz": self.row_hz,
            "phase": self.phase,
            "ambient_ratio": list(self.ambient_ratio),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FlickerSpec":
        return cls(
            mode=WaveformMode.from_dict(d["mode"]),
            enf_hz=float(d["enf_hz"]),
            row_hz=float(d["row_hz"]),
            phase=float(d["phase"]),
            ambient_ratio=tuple(d["ambient_ratio"]),
        )


@dataclass(frozen=True)
class GainProfile:
    """Per-row, per-channel multiplicative gains for one frame.

    values has shape (rows, 3).  Gains are nonnegative, and over any whole
    number of waveform periods their mean is 1: flicker redistributes
    light across rows, it does not create or destroy it.  deviation is
    values - 1 before the offset is applied; keeping it separately
    preserves the exact (k + 1) amplitude scaling, which adding 1 and
    subtracting it again would round away.
    """

    values: np.ndarray = field(repr=False)
    deviation: np.ndarray = field(repr=False)
    spec: FlickerSpec

    @property
    def rows(self) -> int:
        return self.values.shape[0]


def gain_profile(spec: FlickerSpec, rows: int) -> GainProfile:
    """Evaluate per-row gains g(y) = 1 + (w(theta(y))/w_mean - 1)/(k + 1).

    theta(y) = 2*pi * (enf_hz / row_hz) * y + phase, for y = 0..rows-1.
    The division by the waveform's period mean makes the profile mean 1,
    and the (k + 1) divisor scales the deviation from 1: doubling (k + 1)
    exactly halves the banding amplitude.
    """
    if rows < 1:
        raise ValidationError(f"rows must be >= 1, got {rows}")
    y = np.arange(rows, dtype=np.float64)
    theta = TWO_PI * spec.cycles_per_row * y + spec.phase
    wnorm = waveform_value(spec.mode, theta) / effective_value(spec.mode)
    k = np.asarray(spec.ambient_ratio, dtype=np.float64)
    deviation = (wnorm[:, None] - 1.0) / (k[None, :] + 1.0)
    return GainProfile(values=1.0 + deviation, deviation=deviation, spec=spec)
