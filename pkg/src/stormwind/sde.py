"""Ornstein-Uhlenbeck variance-exploding (OUVE) diffusion.

Forward process ``dx = gamma (y - x) dtau + g(tau) dw`` with
``g(tau) = sigma_min (sigma_max/sigma_min)**tau sqrt(2 log(sigma_max/sigma_min))``.
Complex noise is circularly symmetric with unit total variance (real and
imaginary parts each of variance 1/2).

Arrays are treated as batches along axis 0 whenever they have more than one
dimension; that only matters for the Langevin corrector, whose step size is
computed per batch item.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import NumericalDivergenceError, ParameterError, ShapeError


@dataclass(frozen=True)
class OuveParams:
    gamma: float = 1.5
    sigma_min: float = 0.05
    sigma_max: float = 0.5
    t_max: float = 1.0
    t_eps: float = 0.03

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.sigma_min < self.sigma_max:
            raise ParameterError("need 0 < sigma_min < sigma_max")
        if not 0 < self.t_eps < self.t_max:
            raise ParameterError("need 0 < t_eps < t_max")

    @property
    def log_ratio(self) -> float:
        return float(np.log(self.sigma_max / self.sigma_min))


STORM_PARAMS = OuveParams()
SGMSE_PARAMS = OuveParams(gamma=2.5, sigma_max=0.75)


@dataclass(frozen=True)
class SamplerConfig:
    n_steps: int = 20
    corrector_steps: int = 0
    corrector_snr: float = 0.5

    def __post_init__(self):
        if self.n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        if self.corrector_steps not in (0, 1):
            raise ParameterError("corrector_steps must be 0 or 1")
        if self.corrector_steps and self.corrector_snr <= 0:
            raise ParameterError("corrector_snr must be positive")


STORM_SAMPLER = SamplerConfig(n_steps=20)
SGMSE_SAMPLER = SamplerConfig(n_steps=30, corrector_steps=1, corrector_snr=0.5)


class ProcessState(NamedTuple):
    x: np.ndarray
    tau: float


ScoreFn = Callable[..., np.ndarray]


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex standard normal samples."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def drift(x, y, p: OuveParams):
    if np.shape(x) != np.shape(y):
        raise ShapeError(f"drift: shape mismatch {np.shape(x)} vs {np.shape(y)}")
    return p.gamma * (y - x)


def diffusion_coeff(tau, p: OuveParams):
    return p.sigma_min * (p.sigma_max / p.sigma_min) ** tau * np.sqrt(2.0 * p.log_ratio)


def kernel_mean(x0, y, tau, p: OuveParams):
    if np.shape(x0) != np.shape(y):
        raise ShapeError(f"kernel_mean: shape mismatch {np.shape(x0)} vs {np.shape(y)}")
    w = np.exp(-p.gamma * tau)
    return w * x0 + (1.0 - w) * y


def kernel_std(tau, p: OuveParams):
    lr = p.log_ratio
    var = (
        p.sigma_min**2
        * ((p.sigma_max / p.sigma_min) ** (2 * tau) - np.exp(-2 * p.gamma * tau))
        * lr
        / (p.gamma + lr)
    )
    return np.sqrt(np.maximum(var, 0.0))


def sample_perturbation(x0, y, tau, p: OuveParams, rng: np.random.Generator):
    """Draw ``x_tau = mu(x0, y, tau) + sigma(tau) z``; returns ``(x_tau, z)``."""
    mean = kernel_mean(np.asarray(x0), np.asarray(y), tau, p)
    z = complex_normal(rng, np.shape(mean))
    return mean + kernel_std(tau, p) * z, z


def forward_simulate(
    x0,
    y,
    p: OuveParams,
    n_steps: int,
    rng: np.random.Generator,
    t_end: float | None = None,
    save_every: int = 1,
) -> list[ProcessState]:
    """Euler-Maruyama integration of the forward SDE on a uniform grid.

    Returns the states at every ``save_every``-th grid point (always
    including the start and the end).
    """
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    t_end = p.t_max if t_end is None else t_end
    dt = t_end / n_steps
    x = np.array(x0, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x.shape != y.shape:
        raise ShapeError("x0 and y must have the same shape")
    out = [ProcessState(x.copy(), 0.0)]
    for k in range(n_steps):
        tau = k * dt
        x = x + drift(x, y, p) * dt + diffusion_coeff(tau, p) * np.sqrt(dt) * complex_normal(rng, x.shape)
        if (k + 1) % save_every == 0 or k + 1 == n_steps:
            out.append(ProcessState(x.copy(), (k + 1) * dt))
    return out


def sample_prior(y, p: OuveParams, rng: np.random.Generator) -> ProcessState:
    y = np.asarray(y, dtype=np.complex128)
    return ProcessState(y + kernel_std(p.t_max, p) * complex_normal(rng, y.shape), p.t_max)


def _item_norm(a: np.ndarray) -> np.ndarray:
    if a.ndim <= 1:
        return np.sqrt(np.sum(np.abs(a) ** 2))
    n = np.sqrt(np.sum(np.abs(a.reshape(a.shape[0], -1)) ** 2, axis=1))
    return n.reshape((-1,) + (1,) * (a.ndim - 1))


def _checked_score(score: ScoreFn, x, conditioning, tau, sigma):
    s = np.asarray(score(x, conditioning, tau, sigma))
    if not np.all(np.isfinite(s)):
        raise NumericalDivergenceError(
            f"score model returned non-finite values at tau={tau:.4f}", tau=tau, sigma=sigma
        )
    return s


def reverse_sample(
    y,
    score: ScoreFn,
    p: OuveParams,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    conditioning=None,
    x_init=None,
) -> np.ndarray:
    """Integrate the reverse SDE from ``t_max`` down to 0.

    ``y`` is the mean the forward process drifts toward (the noisy
    spectrogram for a purely generative model, the predictor output for
    stochastic regeneration). ``score`` is called as
    ``score(x, conditioning, tau, sigma)``; ``conditioning`` defaults to
    ``y``. The start state is drawn from the prior unless ``x_init`` is
    given. With ``corrector_steps == 1`` each grid point gets one annealed
    Langevin step before the Euler-Maruyama predictor step, so the number of
    score evaluations is ``n_steps * (1 + corrector_steps)``.
    """
    y = np.asarray(y, dtype=np.complex128)
    conditioning = y if conditioning is None else conditioning
    x = sample_prior(y, p, rng).x if x_init is None else np.array(x_init, dtype=np.complex128)
    n = cfg.n_steps
    dt = p.t_max / n
    for k in range(n):
        tau = p.t_max * (1.0 - k / n)
        sigma = float(kernel_std(tau, p))
        for _ in range(cfg.corrector_steps):
            s = _checked_score(score, x, conditioning, tau, sigma)
            z = complex_normal(rng, x.shape)
            s_norm = np.maximum(_item_norm(s), 1e-30)
            eps = 2.0 * (cfg.corrector_snr * _item_norm(z) / s_norm) ** 2
            x = x + eps * s + np.sqrt(2.0 * eps) * z
        s = _checked_score(score, x, conditioning, tau, sigma)
        g = diffusion_coeff(tau, p)
        x = x - (drift(x, y, p) - g**2 * s) * dt + g * np.sqrt(dt) * complex_normal(rng, x.shape)
    return x
