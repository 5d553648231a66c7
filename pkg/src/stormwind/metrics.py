"""Reference-based metrics: SI-SDR, SNR and log-spectral distance."""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, LengthError
from .spectral import StftConfig, Waveform, stft

CAP_DB = 100.0
LSD_FLOOR_DB = -80.0


def _arrays(reference, estimate):
    r = reference.samples if isinstance(reference, Waveform) else np.asarray(reference, dtype=np.float64)
    e = estimate.samples if isinstance(estimate, Waveform) else np.asarray(estimate, dtype=np.float64)
    if r.shape != e.shape:
        raise LengthError(f"length mismatch: reference {r.shape} vs estimate {e.shape}")
    if not np.any(r):
        raise DegenerateInputError("reference signal is silent")
    return r, e


def _ratio_db(num: float, den: float) -> float:
    if den <= num * 10 ** (-CAP_DB / 10):
        return CAP_DB
    if num <= den * 10 ** (-CAP_DB / 10):
        return -CAP_DB
    return float(10 * np.log10(num / den))


def si_sdr(reference, estimate) -> float:
    """Scale-invariant SDR in dB, clipped to +/-100 dB."""
    r, e = _arrays(reference, estimate)
    alpha = np.dot(e, r) / np.dot(r, r)
    target = alpha * r
    return _ratio_db(float(np.dot(target, target)), float(np.sum((e - target) ** 2)))


def snr(reference, estimate) -> float:
    r, e = _arrays(reference, estimate)
    return _ratio_db(float(np.dot(r, r)), float(np.sum((e - r) ** 2)))


def log_spectral_distance(reference, estimate, cfg: StftConfig | None = None) -> float:
    """RMS over frames of the per-frame RMS dB-magnitude difference.

    Magnitudes are floored at -80 dB before taking the difference.
    """
    r, e = _arrays(reference, estimate)
    ref = stft(Waveform(r), cfg).bins
    est = stft(Waveform(e), cfg).bins
    ref_db = np.maximum(20 * np.log10(np.maximum(np.abs(ref), 1e-30)), LSD_FLOOR_DB)
    est_db = np.maximum(20 * np.log10(np.maximum(np.abs(est), 1e-30)), LSD_FLOOR_DB)
    per_frame = np.sqrt(np.mean((ref_db - est_db) ** 2, axis=0))
    return float(np.sqrt(np.mean(per_frame**2)))


def summarize(values) -> tuple[float, float]:
    v = np.asarray(list(values), dtype=np.float64)
    return float(np.mean(v)), float(np.std(v))
