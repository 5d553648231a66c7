"""Utterance-level enhancement: stochastic regeneration, purely generative,
and purely predictive paths sharing one front-end/back-end chain.

``predictor`` is any callable mapping a warped complex spectrogram
``[F, T]`` to its denoised estimate; ``score`` follows the
``score(x, conditioning, tau, sigma)`` convention of :mod:`stormwind.sde`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .sde import (
    SGMSE_PARAMS,
    SGMSE_SAMPLER,
    STORM_PARAMS,
    STORM_SAMPLER,
    OuveParams,
    SamplerConfig,
    complex_normal,
    kernel_std,
    reverse_sample,
)
from .spectral import ComplexSpectrogram, StftConfig, Waveform, istft, stft, unwarp, warp


@dataclass(frozen=True)
class FrontEnd:
    stft: StftConfig = StftConfig()
    exponent: float = 0.5
    scale: float = 1.0

    def analyse(self, y: Waveform) -> tuple[ComplexSpectrogram, float]:
        peak = float(np.max(np.abs(y.samples)))
        if peak == 0.0:
            raise DegenerateInputError("noisy input is silent")
        gain = 1.0 / peak
        spec = warp(stft(y.with_samples(y.samples * gain), self.stft), self.exponent, self.scale)
        return spec, gain

    def synthesize(self, spec: ComplexSpectrogram, bins: np.ndarray, gain: float, n: int) -> Waveform:
        if bins.shape != spec.bins.shape:
            raise ShapeError(f"model output shape {bins.shape} != input shape {spec.bins.shape}")
        out = istft(unwarp(spec.with_bins(bins)), n)
        return out.with_samples(out.samples / gain)


def enhance_predictive(y: Waveform, predictor, front: FrontEnd | None = None) -> Waveform:
    front = front or FrontEnd()
    spec, gain = front.analyse(y)
    return front.synthesize(spec, np.asarray(predictor(spec.bins)), gain, len(y))


def enhance_storm(
    y: Waveform,
    predictor,
    score,
    p: OuveParams = STORM_PARAMS,
    cfg: SamplerConfig = STORM_SAMPLER,
    rng: np.random.Generator | None = None,
    front: FrontEnd | None = None,
) -> Waveform:
    """Predict, add ``sigma(T) z`` to the prediction, then run reverse diffusion
    conditioned on the stacked ``[y, D(y)]``."""
    front = front or FrontEnd()
    rng = rng if rng is not None else np.random.default_rng()
    spec, gain = front.analyse(y)
    d = np.asarray(predictor(spec.bins), dtype=np.complex128)
    if d.shape != spec.bins.shape:
        raise ShapeError(f"predictor output shape {d.shape} != input shape {spec.bins.shape}")
    x_t = d + kernel_std(p.t_max, p) * complex_normal(rng, d.shape)
    cond = np.stack([spec.bins, d])
    x0 = reverse_sample(d, score, p, cfg, rng, conditioning=cond, x_init=x_t)
    return front.synthesize(spec, x0, gain, len(y))


def enhance_generative(
    y: Waveform,
    score,
    p: OuveParams = SGMSE_PARAMS,
    cfg: SamplerConfig = SGMSE_SAMPLER,
    rng: np.random.Generator | None = None,
    front: FrontEnd | None = None,
) -> Waveform:
    front = front or FrontEnd()
    rng = rng if rng is not None else np.random.default_rng()
    spec, gain = front.analyse(y)
    cond = spec.bins[None]
    x0 = reverse_sample(spec.bins, score, p, cfg, rng, conditioning=cond)
    return front.synthesize(spec, x0, gain, len(y))
