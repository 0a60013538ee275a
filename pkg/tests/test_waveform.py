"""Waveform shapes, effective values, flicker specs, and gain profiles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flickerforge import ValidationError
from flickerforge.waveform import (DUTY_GRID, FlickerSpec, WaveformMode,
                                   effective_value, gain_profile,
                                   waveform_value)

TWO_PI = 2.0 * np.pi


# --------------------------------------------------------------- oracle

def wave_by_definition(kind: str, duty: float | None, theta: np.ndarray):
    """Straight transcription of the waveform definitions, kept separate
    from the library so the two can disagree."""
    c = np.cos(theta)
    if kind == "full":
        return np.abs(c)
    if kind == "half":
        return np.maximum(0.0, c)
    return np.where(c > np.cos(np.pi * duty), 1.0, 0.0)


def quadrature_effective(kind: str, duty: float | None = None,
                         n: int = 1_200_000) -> float:
    """Midpoint quadrature of the waveform over one 2*pi period.

    Integration segments are split at the waveform's switch angles so
    every segment is smooth; within a segment the midpoint rule converges
    at O(h^2), and on the piecewise-constant pwm segments it is exact.
    """
    if kind == "full":
        breaks = [0.0, np.pi / 2, 3 * np.pi / 2, TWO_PI]
    elif kind == "half":
        breaks = [0.0, np.pi / 2, 3 * np.pi / 2, TWO_PI]
    else:
        on = np.pi * duty
        breaks = [0.0, on, TWO_PI - on, TWO_PI]
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        m = max(1, int(round(n * (hi - lo) / TWO_PI)))
        mids = lo + (hi - lo) * (np.arange(m) + 0.5) / m
        total += float(wave_by_definition(kind, duty, mids).sum()
                       * (hi - lo) / m)
    return total / TWO_PI


# ------------------------------------------------------ effective values

def test_effective_value_full_wave_matches_quadrature():
    mode = WaveformMode.full_wave()
    assert effective_value(mode) == 2.0 / np.pi
    assert abs(effective_value(mode) - quadrature_effective("full")) <= 1e-9


def test_effective_value_half_wave_matches_quadrature():
    mode = WaveformMode.half_wave()
    assert effective_value(mode) == 1.0 / np.pi
    assert abs(effective_value(mode) - quadrature_effective("half")) <= 1e-9


@pytest.mark.parametrize("duty", [round(0.1 * i, 1) for i in range(1, 11)])
def test_effective_value_pwm_matches_quadrature(duty):
    mode = WaveformMode.pwm(duty)
    assert effective_value(mode) == duty
    assert abs(duty - quadrature_effective("pwm", duty)) <= 1e-9


# ------------------------------------------------------- waveform values

def test_waveform_values_match_definition():
    theta = np.linspace(-20.0, 20.0, 4001)
    for kind, duty in [("full", None), ("half", None), ("pwm", 0.3),
                       ("pwm", 0.7)]:
        mode = WaveformMode(kind, duty) if duty else WaveformMode(kind)
        got = waveform_value(mode, theta)
        want = wave_by_definition(kind, duty, np.mod(theta, TWO_PI))
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_pwm_threshold_is_strict():
    # exactly on the threshold the lamp is off
    duty = 0.4
    mode = WaveformMode.pwm(duty)
    assert waveform_value(mode, np.pi * duty) == 0.0
    assert waveform_value(mode, np.pi * duty * 0.999) == 1.0


def test_pwm_full_duty_is_always_on():
    mode = WaveformMode.pwm(1.0)
    theta = np.linspace(0, TWO_PI, 1001)
    assert np.all(waveform_value(mode, theta) == 1.0)


def test_full_wave_quarter_period_is_zero_crossing():
    # cos(pi/2) = 0: the rectified wave touches zero there
    assert waveform_value(WaveformMode.full_wave(), np.pi / 2) <= 1e-15


def test_intensity_periods():
    assert WaveformMode.full_wave().intensity_period == np.pi
    assert WaveformMode.half_wave().intensity_period == TWO_PI
    assert WaveformMode.pwm(0.3).intensity_period == TWO_PI


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(-1e4, 1e4), kind=st.sampled_from(["full", "half"]))
def test_waveform_periodicity(theta, kind):
    mode = WaveformMode(kind)
    a = waveform_value(mode, theta)
    b = waveform_value(mode, theta + TWO_PI)
    assert abs(a - b) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(-1e4, 1e4),
       duty=st.sampled_from([0.1, 0.25, 0.5, 0.9, 1.0]),
       kind=st.sampled_from(["full", "half", "pwm"]))
def test_waveform_bounded_unit(theta, kind, duty):
    mode = WaveformMode(kind, duty) if kind == "pwm" else WaveformMode(kind)
    v = float(waveform_value(mode, theta))
    assert 0.0 <= v <= 1.0


def test_waveform_mode_validation():
    with pytest.raises(ValidationError):
        WaveformMode("sine")
    with pytest.raises(ValidationError):
        WaveformMode.pwm(0.0)
    with pytest.raises(ValidationError):
        WaveformMode.pwm(1.5)
    with pytest.raises(ValidationError):
        WaveformMode("full", duty=0.5)  # duty only makes sense for pwm


def test_waveform_mode_round_trips_through_dict():
    for mode in (WaveformMode.full_wave(), WaveformMode.half_wave(),
                 WaveformMode.pwm(0.35)):
        assert WaveformMode.from_dict(mode.to_dict()) == mode


# ----------------------------------------------------------- FlickerSpec

def test_spec_validation():
    mode = WaveformMode.full_wave()
    with pytest.raises(ValidationError):
        FlickerSpec(mode, enf_hz=50.0, row_hz=90.0, phase=0.0,
                    ambient_ratio=(0, 0, 0))  # nu = 0.55 >= Nyquist
    with pytest.raises(ValidationError):
        FlickerSpec(mode, enf_hz=0.0, row_hz=1e5, phase=0.0,
                    ambient_ratio=(0, 0, 0))
    with pytest.raises(ValidationError):
        FlickerSpec(mode, enf_hz=50.0, row_hz=1e5, phase=0.0,
                    ambient_ratio=(-0.1, 0, 0))


def test_spec_phase_normalized_and_cycles():
    s = FlickerSpec(WaveformMode.half_wave(), 50.0, 1e5, phase=7.0,
                    ambient_ratio=(0.5, 0.5, 0.5))
    assert 0.0 <= s.phase < TWO_PI
    assert s.cycles_per_row == pytest.approx(5e-4)
    s2 = s.with_phase(1.25)
    assert s2.phase == 1.25 and s2.mode == s.mode
    assert FlickerSpec.from_dict(s.to_dict()) == s


# ---------------------------------------------------------- gain profile

def _random_spec(rng, kinds=("full", "half", "pwm")):
    kind = kinds[int(rng.integers(len(kinds)))]
    if kind == "pwm":
        mode = WaveformMode.pwm(DUTY_GRID[int(rng.integers(len(DUTY_GRID)))])
    else:
        mode = WaveformMode(kind)
    return FlickerSpec(mode, enf_hz=float(rng.choice([50.0, 60.0])),
                       row_hz=float(rng.uniform(2e4, 2e5)),
                       phase=float(rng.uniform(0, TWO_PI)),
                       ambient_ratio=tuple(rng.uniform(0.0, 2.0, 3)))


def test_gain_profile_matches_formula_pointwise():
    rng = np.random.default_rng(11)
    for _ in range(10):
        spec = _random_spec(rng)
        rows = int(rng.integers(50, 400))
        prof = gain_profile(spec, rows)
        y = np.arange(rows)
        theta = TWO_PI * spec.cycles_per_row * y + spec.phase
        w = wave_by_definition(spec.mode.kind, spec.mode.duty, np.mod(theta, TWO_PI))
        wbar = effective_value(spec.mode)
        k = np.asarray(spec.ambient_ratio)
        want = 1.0 + (w[:, None] / wbar - 1.0) / (k[None, :] + 1.0)
        np.testing.assert_allclose(prof.values, want, atol=1e-12)


def test_gain_profile_nonnegative_and_mean_one():
    # full/half on a prime row clock spanning whole periods; pwm on an
    # integer samples-per-cycle clock where the duty count is exact
    rng = np.random.default_rng(5)
    for _ in range(8):
        if rng.integers(2):
            prime = int(rng.choice([65521, 65537]))
            enf = float(rng.choice([50.0, 60.0]))
            kind = ("full", "half")[int(rng.integers(2))]
            spec = FlickerSpec(WaveformMode(kind), enf, float(prime),
                               float(rng.uniform(0, TWO_PI)),
                               tuple(rng.uniform(0, 2, 3)))
            rows = prime
        else:
            q = int(rng.choice([600, 1000, 2000]))
            enf = float(rng.choice([50.0, 60.0]))
            duty = DUTY_GRID[int(rng.integers(len(DUTY_GRID)))]
            spec = FlickerSpec(WaveformMode.pwm(duty), enf, q * enf,
                               float(rng.uniform(0, TWO_PI)),
                               tuple(rng.uniform(0, 2, 3)))
            rows = q * int(rng.integers(1, 4))
        prof = gain_profile(spec, rows)
        assert prof.values.min() >= 0.0
        assert np.abs(prof.values.mean(axis=0) - 1.0).max() <= 1e-9


def test_gain_amplitude_scaling_is_exact():
    # (k + 1) -> 2(k + 1) must halve the deviation bit-for-bit; dyadic
    # ratios keep the doubled divisor exactly representable
    rng = np.random.default_rng(3)
    dyadic = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0]
    for _ in range(10):
        spec = _random_spec(rng)
        k = tuple(float(rng.choice(dyadic)) for _ in range(3))
        k2 = tuple(2.0 * kc + 1.0 for kc in k)
        s1 = FlickerSpec(spec.mode, spec.enf_hz, spec.row_hz, spec.phase, k)
        s2 = FlickerSpec(spec.mode, spec.enf_hz, spec.row_hz, spec.phase, k2)
        d1 = gain_profile(s1, 257).deviation
        d2 = gain_profile(s2, 257).deviation
        assert np.array_equal(d2, d1 / 2.0)


def test_full_wave_phase_pi_invariance():
    rng = np.random.default_rng(9)
    for _ in range(10):
        phase = float(rng.uniform(0, TWO_PI))
        k = tuple(rng.uniform(0, 2, 3))
        frow = float(rng.uniform(2e3, 2e5))
        g1 = gain_profile(FlickerSpec(WaveformMode.full_wave(), 50.0, frow,
                                      phase, k), 2048).values
        g2 = gain_profile(FlickerSpec(WaveformMode.full_wave(), 50.0, frow,
                                      phase + np.pi, k), 2048).values
        assert np.abs(g1 - g2).max() <= 1e-12


def test_gain_profile_channels_follow_their_ambient_ratio():
    spec = FlickerSpec(WaveformMode.half_wave(), 50.0, 5e4, 0.3,
                       ambient_ratio=(0.0, 1.0, 3.0))
    prof = gain_profile(spec, 500)
    spread = prof.values.max(axis=0) - prof.values.min(axis=0)
    # amplitude falls as 1/(k+1): channel 0 > channel 1 > channel 2
    assert spread[0] > spread[1] > spread[2]
    np.testing.assert_allclose(spread[0] / spread[1], 2.0, rtol=1e-9)
    np.testing.assert_allclose(spread[0] / spread[2], 4.0, rtol=1e-9)
