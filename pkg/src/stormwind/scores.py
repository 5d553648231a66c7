"""Score-function abstractions that do not need a neural network.

``AnalyticGaussianScore`` is the exact marginal score when the clean signal
is complex Gaussian ``N_C(m0, s0**2)`` per bin and the process drifts toward
a fixed ``y``; it serves as the oracle for the reverse sampler.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalDivergenceError, ParameterError
from .sde import OuveParams, kernel_mean, kernel_std


def _per_item(v, x):
    """Reshape a per-batch-item array ``v`` so it broadcasts against ``x``."""
    if np.ndim(v) == 0:
        return v
    v = v.reshape((-1,) + (1,) * (x.ndim - 1)) if hasattr(v, "reshape") else v
    return v


@dataclass(frozen=True)
class AnalyticGaussianScore:
    m0: complex
    s0: float
    p: OuveParams
    y: complex = 0.0

    def __post_init__(self):
        if self.s0 < 0:
            raise ParameterError("s0 must be non-negative")

    def marginal_mean(self, tau):
        w = np.exp(-self.p.gamma * np.asarray(tau, dtype=np.float64))
        return w * self.m0 + (1.0 - w) * self.y

    def marginal_var(self, tau):
        tau = np.asarray(tau, dtype=np.float64)
        return np.exp(-2.0 * self.p.gamma * tau) * self.s0**2 + kernel_std(tau, self.p) ** 2

    def __call__(self, x, conditioning=None, tau=0.0, sigma=None):
        return analytic_score_eval(x, tau, self)


def analytic_score_eval(x, tau, oracle: AnalyticGaussianScore):
    """``-(x - mean(tau)) / var(tau)`` for the Gaussian toy marginal."""
    if np.any(np.asarray(tau) < 0) or np.any(np.asarray(tau) > oracle.p.t_max):
        raise ParameterError(f"tau must lie in [0, {oracle.p.t_max}]")
    var = oracle.marginal_var(tau)
    if np.any(var <= 0):
        raise NumericalDivergenceError("marginal variance is zero (tau=0 with s0=0)", tau=tau)
    mean = oracle.marginal_mean(tau)
    return -(x - _per_item(mean, x)) / _per_item(var, x)


@dataclass(frozen=True)
class KernelScore:
    """Exact conditional score ``-(x - mu(x0, y, tau)) / sigma(tau)**2``.

    With ``x_tau = mu + sigma z`` this returns ``-z / sigma``: the perfect
    score for denoising score matching given the clean ``x0``.
    """

    x0: np.ndarray
    y: np.ndarray
    p: OuveParams

    def __call__(self, x, conditioning=None, tau=0.0, sigma=None):
        tau_b = _per_item(np.asarray(tau, dtype=np.float64), x)
        mean = kernel_mean(self.x0, self.y, tau_b, self.p)
        std = kernel_std(tau_b, self.p)
        return -(x - mean) / std**2


class ZeroScore:
    def __call__(self, x, conditioning=None, tau=0.0, sigma=None):
        return x * 0


class CallCounter:
    """Wrap any callable model and count how many times it is evaluated."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, *args, **kwargs):
        self.calls += 1
        return self.fn(*args, **kwargs)
