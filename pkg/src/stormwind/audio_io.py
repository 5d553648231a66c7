"""Mono 16 kHz WAV reading/writing (16-bit PCM or 32-bit float)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import AudioFormatError
from .spectral import DEFAULT_SAMPLE_RATE, Waveform


def read_wav(path, expected_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise AudioFormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.ndim != 1:
        raise AudioFormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if rate != expected_rate:
        raise AudioFormatError(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz (resampling is not supported)"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(f"{path}: unsupported sample format {data.dtype}; use int16 or float32")
    if not np.all(np.isfinite(samples)):
        raise AudioFormatError(f"{path}: non-finite samples")
    return Waveform(samples, rate)


def write_wav(path, w: Waveform, subtype: str = "float32") -> None:
    if subtype == "float32":
        data = w.samples.astype(np.float32)
    elif subtype == "int16":
        data = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise AudioFormatError(f"unsupported WAV subtype {subtype!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(Path(path), w.sample_rate, data)
