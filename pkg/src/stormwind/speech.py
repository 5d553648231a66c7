"""Toy harmonic-plus-formant "speech" for desk-scale experiments.

Each utterance is a sequence of voiced syllables: a gliding fundamental
with harmonics up to 4 kHz, weighted by three moving formant resonances and
a raised-cosine syllable envelope, over a faint aspiration-noise floor.
"""
from __future__ import annotations

import numpy as np

from .spectral import DEFAULT_SAMPLE_RATE, Waveform

_FORMANT_RANGES = ((300.0, 850.0), (900.0, 2400.0), (2300.0, 3400.0))
_FORMANT_GAINS = (1.0, 0.5, 0.25)
_MAX_HARMONIC_HZ = 4000.0


def _formant_weight(freqs: np.ndarray, formants: np.ndarray, bandwidths: np.ndarray) -> np.ndarray:
    # freqs: (K, n); formants/bandwidths: (3, n)
    w = np.full_like(freqs, 0.02)
    for i, gain in enumerate(_FORMANT_GAINS):
        w += gain * np.exp(-0.5 * ((freqs - formants[i]) / bandwidths[i]) ** 2)
    return w


def _syllable(n: int, sr: int, f0: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sr
    frac = t / t[-1] if n > 1 else t
    f0_track = f0 * (1.0 + rng.uniform(-0.15, 0.15) * frac)
    start = np.array([rng.uniform(lo, hi) for lo, hi in _FORMANT_RANGES])
    stop = np.array([rng.uniform(lo, hi) for lo, hi in _FORMANT_RANGES])
    formants = start[:, None] + (stop - start)[:, None] * frac[None, :]
    bandwidths = np.array([rng.uniform(60.0, 160.0) for _ in _FORMANT_RANGES])[:, None]
    n_harm = int(_MAX_HARMONIC_HZ // (f0 * 1.15))
    k = np.arange(1, n_harm + 1)[:, None]
    phase0 = np.cumsum(2.0 * np.pi * f0_track / sr)
    freqs = k * f0_track[None, :]
    amps = _formant_weight(freqs, formants, bandwidths) / np.sqrt(k)
    voiced = np.sum(amps * np.sin(k * phase0[None, :] + rng.uniform(0, 2 * np.pi, (n_harm, 1))), axis=0)
    envelope = np.sin(np.pi * frac) ** 0.7
    return voiced * envelope


def synthesize_toy_speech(
    duration: float = 2.0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    rng: np.random.Generator | None = None,
    peak: float = 0.5,
    floor_db: float = -50.0,
) -> Waveform:
    """Render one toy utterance, peak-scaled to ``peak``."""
    rng = rng if rng is not None else np.random.default_rng()
    n = int(round(duration * sample_rate))
    out = np.zeros(n)
    f0 = rng.uniform(95.0, 230.0)
    pos = int(rng.uniform(0.02, 0.12) * sample_rate)
    while pos < n:
        length = int(rng.uniform(0.12, 0.35) * sample_rate)
        end = min(n, pos + length)
        if end - pos > 32:
            out[pos:end] += rng.uniform(0.4, 1.0) * _syllable(end - pos, sample_rate, f0 * rng.uniform(0.9, 1.1), rng)
        pos = end + int(rng.uniform(0.03, 0.15) * sample_rate)
    m = np.max(np.abs(out))
    if m > 0:
        out *= peak / m
    out += peak * 10 ** (floor_db / 20.0) * rng.standard_normal(n)
    return Waveform(out, sample_rate)
