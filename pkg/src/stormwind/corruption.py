"""Non-additive speech-in-wind-noise model.

The chain is: scale the noise to a target SNR against the clean speech,
compress the speech with a feed-forward compressor whose detector listens
to the (gain-adjusted) noise, add the scaled noise, and optionally hard clip
the mixture at ``eta * max|mixture|``. The enhancement target stays the
uncompressed clean speech.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError
from .spectral import Waveform


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if self.high < self.low:
            raise ParameterError(f"uniform range [{self.low}, {self.high}] is empty")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class CorruptionDistributions:
    """Sampling distributions for :func:`sample_corruption_params`.

    Defaults follow the data-generation table; ``threshold`` (dBFS) has no
    published distribution and defaults to U(-30, -10).
    """

    snr: Uniform = field(default_factory=lambda: Uniform(-6.0, 14.0))
    ratio: Uniform = field(default_factory=lambda: Uniform(1.0, 20.0))
    sidechain_gain: Uniform = field(default_factory=lambda: Uniform(0.8, 1.2))
    attack: Uniform = field(default_factory=lambda: Uniform(5.0, 100.0))
    release: Uniform = field(default_factory=lambda: Uniform(5.0, 500.0))
    clip_probability: float = 0.75
    eta: Uniform = field(default_factory=lambda: Uniform(0.85, 1.0))
    threshold: Uniform = field(default_factory=lambda: Uniform(-30.0, -10.0))

    def __post_init__(self):
        if not 0.0 <= self.clip_probability <= 1.0:
            raise ParameterError("clip_probability must lie in [0, 1]")
        if self.ratio.low < 1.0:
            raise ParameterError("compressor ratio must be >= 1")
        if self.eta.low <= 0.0 or self.eta.high > 1.0:
            raise ParameterError("eta must lie in (0, 1]")


@dataclass(frozen=True)
class CompressorParams:
    threshold: float = -20.0  # dBFS
    ratio: float = 4.0
    attack: float = 10.0  # ms
    release: float = 100.0  # ms
    sidechain_gain: float = 1.0

    def __post_init__(self):
        if self.ratio < 1.0:
            raise ParameterError(f"compressor ratio must be >= 1, got {self.ratio}")
        if self.attack <= 0 or self.release <= 0:
            raise ParameterError("attack and release must be positive")
        if self.sidechain_gain <= 0:
            raise ParameterError("sidechain_gain must be positive")


@dataclass(frozen=True)
class CorruptionParams:
    snr: float
    compressor: CompressorParams
    clip: bool
    eta: float

    def __post_init__(self):
        if not np.isfinite(self.snr):
            raise ParameterError("snr must be finite")
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"eta must lie in (0, 1], got {self.eta}")

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "CorruptionParams":
        return cls(
            snr=float(record["snr"]),
            compressor=CompressorParams(**record["compressor"]),
            clip=bool(record["clip"]),
            eta=float(record["eta"]),
        )


def sample_corruption_params(
    rng: np.random.Generator, dists: CorruptionDistributions | None = None
) -> CorruptionParams:
    d = dists or CorruptionDistributions()
    snr = d.snr.sample(rng)
    compressor = CompressorParams(
        threshold=d.threshold.sample(rng),
        ratio=d.ratio.sample(rng),
        attack=d.attack.sample(rng),
        release=d.release.sample(rng),
        sidechain_gain=d.sidechain_gain.sample(rng),
    )
    clip = bool(rng.random() < d.clip_probability)
    # eta is always drawn so the random stream does not depend on the clip flag
    eta = d.eta.sample(rng)
    return CorruptionParams(snr=snr, compressor=compressor, clip=clip, eta=eta)


def _power(x: np.ndarray) -> float:
    return float(np.mean(x * x))


def mix_at_snr(speech: Waveform, noise: Waveform, snr: float) -> tuple[Waveform, Waveform]:
    """Scale ``noise`` so that ``10 log10(P_speech / P_noise) == snr``.

    Returns ``(speech + scaled_noise, scaled_noise)``.
    """
    if len(speech) != len(noise):
        raise ShapeError(f"length mismatch: speech {len(speech)} vs noise {len(noise)}")
    if speech.sample_rate != noise.sample_rate:
        raise ShapeError("speech and noise sample rates differ")
    p_s, p_n = _power(speech.samples), _power(noise.samples)
    if p_s == 0.0 or p_n == 0.0:
        raise DegenerateInputError("speech and noise must both be non-silent")
    gain = np.sqrt(p_s / (p_n * 10.0 ** (snr / 10.0)))
    scaled = noise.samples * gain
    return speech.with_samples(speech.samples + scaled), noise.with_samples(scaled)


def _smoothing_coef(time_ms: float, sample_rate: int) -> float:
    return float(np.exp(-1.0 / (time_ms * 1e-3 * sample_rate)))


def detector_envelope(sidechain: np.ndarray, p: CompressorParams, sample_rate: int) -> np.ndarray:
    """Peak detector with separate attack/release one-pole smoothing."""
    a_att = _smoothing_coef(p.attack, sample_rate)
    a_rel = _smoothing_coef(p.release, sample_rate)
    level = np.abs(sidechain) * p.sidechain_gain
    env = np.empty_like(level)
    state = 0.0
    for i in range(level.shape[0]):
        v = level[i]
        a = a_att if v > state else a_rel
        state = a * state + (1.0 - a) * v
        env[i] = state
    return env


def compressor_gain(sidechain: np.ndarray, p: CompressorParams, sample_rate: int) -> np.ndarray:
    """Linear gain trajectory (<= 1) from the hard-knee dB static curve."""
    env = detector_envelope(sidechain, p, sample_rate)
    level_db = 20.0 * np.log10(np.maximum(env, 1e-12))
    over = np.maximum(level_db - p.threshold, 0.0)
    reduction_db = over * (1.0 - 1.0 / p.ratio)
    return 10.0 ** (-reduction_db / 20.0)


def sidechain_compress(speech: Waveform, sidechain: Waveform, p: CompressorParams) -> Waveform:
    if len(speech) != len(sidechain):
        raise ShapeError(f"length mismatch: speech {len(speech)} vs sidechain {len(sidechain)}")
    if p.ratio == 1.0:
        return speech
    g = compressor_gain(sidechain.samples, p, speech.sample_rate)
    return speech.with_samples(speech.samples * g)


def hard_clip(y: Waveform, eta: float) -> Waveform:
    """Clamp to ``[-eta * max|y|, eta * max|y|]``."""
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    peak = float(np.max(np.abs(y.samples))) if len(y) else 0.0
    if peak == 0.0:
        raise DegenerateInputError("cannot clip a silent signal")
    bound = eta * peak
    return y.with_samples(np.clip(y.samples, -bound, bound))


def corrupt(speech: Waveform, noise: Waveform, p: CorruptionParams) -> tuple[Waveform, Waveform]:
    """Full corruption chain; returns ``(noisy, clean_target)``."""
    _, scaled_noise = mix_at_snr(speech, noise, p.snr)
    compressed = sidechain_compress(speech, scaled_noise, p.compressor)
    noisy = compressed.with_samples(compressed.samples + scaled_noise.samples)
    if p.clip:
        noisy = hard_clip(noisy, p.eta)
    return noisy, speech
