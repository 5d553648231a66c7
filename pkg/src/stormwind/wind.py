"""Wind-noise synthesis driven by randomized airflow profiles.

White noise is shaped by a speed-dependent low-pass (two cascaded one-pole
sections, cutoff rising from 100 Hz at rest to 300 Hz at full speed),
amplitude-modulated by the airflow speed and by a slow random turbulence
gain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ParameterError
from .spectral import DEFAULT_SAMPLE_RATE, Waveform

MIN_GUSTS = 1
MAX_GUSTS = 10

CUTOFF_AT_REST_HZ = 100.0
CUTOFF_AT_FULL_SPEED_HZ = 300.0
SPEED_TO_AMPLITUDE_EXPONENT = 1.5
TURBULENCE_RATE_HZ = 4.0
TURBULENCE_DEPTH = 0.15


@dataclass(frozen=True)
class Gust:
    onset: float
    duration: float
    peak: float
    attack: float = 0.25
    decay: float = 0.25

    def __post_init__(self):
        if self.duration <= 0:
            raise ParameterError("gust duration must be positive")
        if not (0 < self.attack and 0 < self.decay and self.attack + self.decay <= 1.0):
            raise ParameterError("gust attack/decay fractions must be positive and sum to <= 1")


@dataclass(frozen=True)
class AirflowProfile:
    baseline_speed: float
    total_duration: float
    gusts: tuple[Gust, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gusts", tuple(self.gusts))
        if self.total_duration <= 0:
            raise ParameterError("profile duration must be positive")
        if self.baseline_speed < 0:
            raise ParameterError("baseline speed must be non-negative")
        for g in self.gusts:
            if g.onset < 0 or g.onset + g.duration > self.total_duration + 1e-12:
                raise ParameterError(
                    f"gust [{g.onset}, {g.onset + g.duration}] exceeds profile duration {self.total_duration}"
                )
            if g.peak < self.baseline_speed:
                raise ParameterError("gust peak below baseline speed")

    def speed(self, t) -> np.ndarray:
        """Instantaneous normalized airflow speed at times ``t`` (seconds)."""
        t = np.asarray(t, dtype=np.float64)
        excess = np.zeros_like(t)
        for g in self.gusts:
            excess = np.maximum(excess, (g.peak - self.baseline_speed) * _gust_shape(t, g))
        return self.baseline_speed + excess

    def scaled(self, peak_factor: float) -> "AirflowProfile":
        """Copy with every gust peak multiplied by ``peak_factor`` (>= 1)."""
        gusts = tuple(
            Gust(g.onset, g.duration, g.peak * peak_factor, g.attack, g.decay) for g in self.gusts
        )
        return AirflowProfile(self.baseline_speed, self.total_duration, gusts)


def _gust_shape(t: np.ndarray, g: Gust) -> np.ndarray:
    # raised-cosine attack, flat top, raised-cosine decay; 0 outside the gust
    u = (t - g.onset) / g.duration
    out = np.zeros_like(u)
    rise = (u >= 0) & (u < g.attack)
    out[rise] = 0.5 - 0.5 * np.cos(np.pi * u[rise] / g.attack)
    top = (u >= g.attack) & (u <= 1.0 - g.decay)
    out[top] = 1.0
    fall = (u > 1.0 - g.decay) & (u <= 1.0)
    out[fall] = 0.5 + 0.5 * np.cos(np.pi * (u[fall] - (1.0 - g.decay)) / g.decay)
    return out


def sample_gust_count(rng: np.random.Generator, low: int = MIN_GUSTS, high: int = MAX_GUSTS) -> int:
    return int(rng.integers(low, high + 1))


def sample_airflow_profile(
    duration: float,
    rng: np.random.Generator,
    min_gusts: int = MIN_GUSTS,
    max_gusts: int = MAX_GUSTS,
) -> AirflowProfile:
    """Random airflow profile with a uniform number of gusts (1..10 by default)
    placed uniformly over ``duration``."""
    if duration <= 0:
        raise ParameterError("duration must be positive")
    if not 1 <= min_gusts <= max_gusts:
        raise ParameterError("need 1 <= min_gusts <= max_gusts")
    n_gusts = sample_gust_count(rng, min_gusts, max_gusts)
    baseline = float(rng.uniform(0.05, 0.4))
    gusts = []
    for _ in range(n_gusts):
        length = float(rng.uniform(0.1, 0.4)) * duration
        onset = float(rng.uniform(0.0, duration - length))
        peak = float(rng.uniform(baseline, 1.0))
        attack = float(rng.uniform(0.1, 0.5))
        decay = float(rng.uniform(0.1, 0.5))
        gusts.append(Gust(onset, length, peak, attack, decay))
    return AirflowProfile(baseline, duration, tuple(gusts))


def _one_pole_varying(x: np.ndarray, coef: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    state = 0.0
    for i in range(x.shape[0]):
        state += coef[i] * (x[i] - state)
        out[i] = state
    return out


def _turbulence_gain(n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    # slow random gain around 1, linearly interpolated between knots
    n_knots = int(np.ceil(n / sample_rate * TURBULENCE_RATE_HZ)) + 2
    knots = np.clip(1.0 + TURBULENCE_DEPTH * rng.standard_normal(n_knots), 0.3, None)
    positions = np.linspace(0.0, n - 1, n_knots)
    return np.interp(np.arange(n), positions, knots)


def cutoff_for_speed(speed) -> np.ndarray:
    return CUTOFF_AT_REST_HZ + (CUTOFF_AT_FULL_SPEED_HZ - CUTOFF_AT_REST_HZ) * np.asarray(speed)


def synthesize_wind_noise(
    profile: AirflowProfile,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    rng: np.random.Generator | None = None,
    turbulence: bool = True,
) -> Waveform:
    """Render wind noise following ``profile``.

    Power is a non-decreasing function of the instantaneous speed (the
    amplitude scales as ``speed**1.5`` and the low-pass cutoff widens with
    speed). The output is not peak normalized; see :func:`peak_normalize`.
    """
    rng = rng if rng is not None else np.random.default_rng()
    n = int(round(profile.total_duration * sample_rate))
    t = np.arange(n) / sample_rate
    speed = profile.speed(t)
    white = rng.standard_normal(n)
    cutoff = np.minimum(cutoff_for_speed(speed), 0.45 * sample_rate)
    coef = 1.0 - np.exp(-2.0 * np.pi * cutoff / sample_rate)
    shaped = _one_pole_varying(_one_pole_varying(white, coef), coef)
    envelope = speed**SPEED_TO_AMPLITUDE_EXPONENT
    if turbulence:
        envelope = envelope * _turbulence_gain(n, sample_rate, rng)
    return Waveform(shaped * envelope, sample_rate)


def peak_normalize(w: Waveform, peak: float = 1.0) -> Waveform:
    m = float(np.max(np.abs(w.samples))) if len(w) else 0.0
    if m == 0.0:
        return w
    return w.with_samples(w.samples * (peak / m))


def fixed_cutoff_lowpass(x: np.ndarray, cutoff_hz: float, sample_rate: int) -> np.ndarray:
    """Time-invariant version of the shaping filter (for spectral checks)."""
    a = 1.0 - np.exp(-2.0 * np.pi * cutoff_hz / sample_rate)
    b, den = [a], [1.0, a - 1.0]
    return lfilter(b, den, lfilter(b, den, x))


def load_recorded_noise(directory, sample_rate: int = DEFAULT_SAMPLE_RATE) -> list[Waveform]:
    """Read every ``*.wav`` in ``directory`` (sorted); non-16 kHz files are rejected."""
    from .audio_io import read_wav

    paths = sorted(Path(directory).glob("*.wav"))
    return [read_wav(p, expected_rate=sample_rate) for p in paths]
