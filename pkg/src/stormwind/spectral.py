"""Time-domain <-> time-frequency front-end.

Analysis uses a periodic square-root Hann window (510 samples, hop 128 at
16 kHz by default), zero padding of ``window_len - hop`` samples at both
ends, and least-squares overlap-add for synthesis. Spectrogram bins are
stored as ``[..., freq, frames]`` so that leading batch/channel axes can be
carried along by every operation here.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateInputError,
    LengthError,
    NormalizationError,
    ParameterError,
    SpectrogramStateError,
)

DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ParameterError(f"waveform must be mono (1-D), got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 510
    hop: int = 128

    def __post_init__(self):
        if self.window_len < 2:
            raise ParameterError("window_len must be at least 2")
        if not 0 < self.hop <= self.window_len:
            raise ParameterError(
                f"hop must satisfy 0 < hop <= window_len, got hop={self.hop}"
            )

    @property
    def n_freq(self) -> int:
        return self.window_len // 2 + 1

    @property
    def pad(self) -> int:
        return self.window_len - self.hop

    def window(self) -> np.ndarray:
        n = np.arange(self.window_len)
        return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.window_len))


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Complex STFT bins ``[..., freq, frames]`` plus bookkeeping.

    ``pad_left``/``pad_right`` record the zero padding applied before
    analysis and ``n_samples`` the original signal length, so that
    :func:`istft` can trim back exactly. ``frame_padding`` counts frames
    appended by :func:`crop_random_frames` when the input was too short.
    """

    bins: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    warped: bool = False
    warp_exponent: float = 1.0
    warp_scale: float = 1.0
    n_samples: int | None = None
    pad_left: int = 0
    pad_right: int = 0
    frame_offset: int = 0
    frame_padding: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        bins = np.asarray(self.bins)
        if not np.iscomplexobj(bins):
            bins = bins.astype(np.complex128)
        if bins.ndim < 2:
            raise ParameterError("spectrogram bins need at least [freq, frames] axes")
        if not np.all(np.isfinite(bins)):
            raise ParameterError("spectrogram contains non-finite bins")
        object.__setattr__(self, "bins", bins)

    @property
    def n_frames(self) -> int:
        return self.bins.shape[-1]

    @property
    def shape(self):
        return self.bins.shape

    def with_bins(self, bins, **changes) -> "ComplexSpectrogram":
        return replace(self, bins=bins, **changes)


def _frame_count(n_samples: int, cfg: StftConfig) -> int:
    # enough frames that the last original sample is followed by pad zeros
    span = n_samples + 2 * cfg.pad - cfg.window_len
    return -(-span // cfg.hop) + 1


def stft(w: Waveform, cfg: StftConfig | None = None) -> ComplexSpectrogram:
    """Short-time Fourier transform of a mono waveform.

    The signal is zero padded by ``window_len - hop`` samples on the left and
    by at least as many on the right (rounded up to a whole hop), so every
    original sample is covered by the full overlap of frames.

    Raises
    ------
    LengthError
        If the waveform is shorter than one analysis window.
    """
    cfg = cfg or StftConfig()
    x = w.samples
    n = x.shape[0]
    if n < cfg.window_len:
        raise LengthError(
            f"signal of {n} samples is shorter than one window ({cfg.window_len})"
        )
    n_frames = _frame_count(n, cfg)
    total = (n_frames - 1) * cfg.hop + cfg.window_len
    pad_left = cfg.pad
    pad_right = total - n - pad_left
    padded = np.concatenate([np.zeros(pad_left), x, np.zeros(pad_right)])
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.window_len)[:: cfg.hop]
    bins = np.fft.rfft(frames * cfg.window(), axis=-1).T
    return ComplexSpectrogram(
        bins=np.ascontiguousarray(bins),
        config=cfg,
        n_samples=n,
        pad_left=pad_left,
        pad_right=pad_right,
        sample_rate=w.sample_rate,
    )


def window_sumsquare(cfg: StftConfig, n_frames: int) -> np.ndarray:
    win_sq = cfg.window() ** 2
    out = np.zeros((n_frames - 1) * cfg.hop + cfg.window_len)
    for i in range(n_frames):
        out[i * cfg.hop : i * cfg.hop + cfg.window_len] += win_sq
    return out


def istft(s: ComplexSpectrogram, out_len: int | None = None) -> Waveform:
    """Least-squares overlap-add inverse of :func:`stft`.

    Leading axes are not supported here: ``s.bins`` must be ``[freq, frames]``.
    ``out_len`` defaults to the length recorded at analysis time.
    """
    if s.warped:
        raise SpectrogramStateError("istft requires an unwarped spectrogram; call unwarp first")
    if s.bins.ndim != 2:
        raise ParameterError(f"istft expects [freq, frames] bins, got shape {s.bins.shape}")
    cfg = s.config
    if s.bins.shape[0] != cfg.n_freq:
        raise ParameterError(f"expected {cfg.n_freq} frequency bins, got {s.bins.shape[0]}")
    if out_len is None:
        out_len = s.n_samples if s.n_samples is not None else 0
    n_frames = s.n_frames
    total = (n_frames - 1) * cfg.hop + cfg.window_len
    if out_len <= 0 or s.pad_left + out_len > total:
        raise LengthError(
            f"out_len={out_len} inconsistent with {n_frames} frames (covers {total - s.pad_left} samples)"
        )
    win = cfg.window()
    frames = np.fft.irfft(s.bins.T, n=cfg.window_len, axis=-1) * win
    y = np.zeros(total)
    for i in range(n_frames):
        y[i * cfg.hop : i * cfg.hop + cfg.window_len] += frames[i]
    wss = window_sumsquare(cfg, n_frames)
    region = slice(s.pad_left, s.pad_left + out_len)
    denom = wss[region]
    if np.any(denom <= 1e-10):
        raise NormalizationError("window sum-square vanishes inside the requested output region")
    return Waveform(y[region] / denom, s.sample_rate)


def warp(s: ComplexSpectrogram, exponent: float = 0.5, scale: float = 1.0) -> ComplexSpectrogram:
    """Magnitude compression ``c -> scale * |c|**exponent * exp(i angle(c))``."""
    if s.warped:
        raise SpectrogramStateError("spectrogram is already warped")
    if exponent <= 0:
        raise ParameterError(f"warp exponent must be positive, got {exponent}")
    if scale <= 0:
        raise ParameterError(f"warp scale must be positive, got {scale}")
    mag = np.abs(s.bins)
    bins = scale * mag**exponent * np.exp(1j * np.angle(s.bins))
    return s.with_bins(bins, warped=True, warp_exponent=exponent, warp_scale=scale)


def unwarp(s: ComplexSpectrogram) -> ComplexSpectrogram:
    """Exact inverse of :func:`warp`, using the exponent/scale stored on ``s``."""
    if not s.warped:
        raise SpectrogramStateError("spectrogram is not warped")
    mag = (np.abs(s.bins) / s.warp_scale) ** (1.0 / s.warp_exponent)
    bins = mag * np.exp(1j * np.angle(s.bins))
    return s.with_bins(bins, warped=False, warp_exponent=1.0, warp_scale=1.0)


def warp_array(bins, exponent: float = 0.5, scale: float = 1.0):
    return scale * np.abs(bins) ** exponent * np.exp(1j * np.angle(bins))


def unwarp_array(bins, exponent: float = 0.5, scale: float = 1.0):
    return (np.abs(bins) / scale) ** (1.0 / exponent) * np.exp(1j * np.angle(bins))


def normalize_by_noisy_max(x: Waveform, y: Waveform) -> tuple[Waveform, Waveform, float]:
    """Scale clean ``x`` and noisy ``y`` by ``1 / max|y|``; returns the gain too."""
    peak = float(np.max(np.abs(y.samples))) if len(y) else 0.0
    if peak <= 0.0:
        raise DegenerateInputError("noisy utterance is silent; cannot normalize")
    gain = 1.0 / peak
    return x.with_samples(x.samples * gain), y.with_samples(y.samples * gain), gain


def crop_random_frames(
    s: ComplexSpectrogram, frames: int = 256, rng: np.random.Generator | None = None
) -> ComplexSpectrogram:
    """Contiguous crop of ``frames`` frames at a uniformly random offset.

    Inputs with fewer frames are zero padded at the end; the number of padded
    frames is stored in ``frame_padding``. Leading axes are cropped together,
    which keeps stacked clean/noisy pairs aligned.
    """
    if frames < 1:
        raise ParameterError("frames must be >= 1")
    available = s.n_frames
    if available < 1:
        raise LengthError("spectrogram has no frames")
    rng = rng if rng is not None else np.random.default_rng()
    if available >= frames:
        offset = int(rng.integers(0, available - frames + 1))
        bins = s.bins[..., offset : offset + frames]
        return s.with_bins(bins, frame_offset=offset, frame_padding=0)
    pad_width = [(0, 0)] * (s.bins.ndim - 1) + [(0, frames - available)]
    bins = np.pad(s.bins, pad_width)
    return s.with_bins(bins, frame_offset=0, frame_padding=frames - available)
