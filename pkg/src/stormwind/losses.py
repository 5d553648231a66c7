"""Denoising score matching and stochastic-regeneration training losses.

Tensors are complex ``[B, F, T]``. Random draws (diffusion times and the
Gaussian noise) come from a numpy ``Generator`` so that runs are
reproducible independently of torch's global RNG.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import NumericalDivergenceError, ParameterError
from .sde import OuveParams, complex_normal, kernel_std

WEIGHTINGS = ("none", "sigma2")


@dataclass
class LossTerms:
    loss: torch.Tensor
    tau: np.ndarray
    sigma: np.ndarray
    z: torch.Tensor
    dsm: torch.Tensor | None = None
    sup: torch.Tensor | None = None

    def item(self) -> float:
        return float(self.loss.detach())


def as_complex_tensor(a, dtype=torch.complex128) -> torch.Tensor:
    if isinstance(a, torch.Tensor):
        return a
    return torch.as_tensor(np.asarray(a)).to(dtype)


def _bview(v: torch.Tensor) -> torch.Tensor:
    return v.view(-1, 1, 1)


def _check_finite(loss: torch.Tensor, tau, sigma):
    if not torch.isfinite(loss).all():
        raise NumericalDivergenceError(
            f"non-finite loss (tau={np.round(tau, 4).tolist()}, sigma={np.round(sigma, 5).tolist()})",
            tau=tau,
            sigma=sigma,
        )


def dsm_loss(
    score,
    x0,
    y,
    p: OuveParams,
    rng: np.random.Generator,
    conditioning=None,
    weighting: str = "none",
    tau=None,
) -> LossTerms:
    """``|| s(x_tau, cond, tau) + z / sigma(tau) ||^2`` averaged over bins and batch.

    ``tau`` is drawn uniformly from ``[t_eps, t_max]`` per batch item unless
    given. With ``weighting="sigma2"`` every item is multiplied by
    ``sigma(tau)**2``, i.e. the residual becomes ``sigma * s + z``.
    ``y`` is the mean the forward process drifts toward; ``conditioning``
    (complex ``[B, k, F, T]``) defaults to ``y`` alone.
    """
    if weighting not in WEIGHTINGS:
        raise ParameterError(f"weighting must be one of {WEIGHTINGS}")
    x0 = as_complex_tensor(x0)
    y = as_complex_tensor(y, x0.dtype)
    if x0.dim() == 2:
        x0, y = x0[None], y[None]
    if x0.shape != y.shape:
        raise ParameterError(f"shape mismatch {tuple(x0.shape)} vs {tuple(y.shape)}")
    b = x0.shape[0]
    if tau is None:
        tau = rng.uniform(p.t_eps, p.t_max, size=b)
    tau = np.broadcast_to(np.asarray(tau, dtype=np.float64), (b,)).copy()
    sigma = kernel_std(tau, p)
    z = torch.as_tensor(complex_normal(rng, tuple(x0.shape))).to(x0.dtype)
    real = x0.real.dtype
    w = torch.as_tensor(np.exp(-p.gamma * tau), dtype=real)
    sig_t = torch.as_tensor(sigma, dtype=real)
    mean = _bview(w) * x0 + (1 - _bview(w)) * y
    x_tau = mean + _bview(sig_t) * z
    if conditioning is None:
        conditioning = y[:, None]
    s = score(x_tau, conditioning, torch.as_tensor(tau, dtype=real), sig_t)
    resid = s + z / _bview(sig_t)
    per_item = resid.abs().square().mean(dim=(1, 2))
    if weighting == "sigma2":
        per_item = per_item * sig_t**2
    loss = per_item.mean()
    _check_finite(loss, tau, sigma)
    return LossTerms(loss=loss, tau=tau, sigma=sigma, z=z, dsm=loss)


def predictor_mse(predictor, x0, y) -> torch.Tensor:
    """Complex-spectrogram mean squared error ``mean |x0 - D(y)|^2``."""
    x0 = as_complex_tensor(x0)
    y = as_complex_tensor(y, x0.dtype)
    return (x0 - predictor(y)).abs().square().mean()


def storm_loss(
    score,
    predictor,
    x0,
    y,
    p: OuveParams,
    alpha: float,
    rng: np.random.Generator,
    weighting: str = "none",
    tau=None,
) -> LossTerms:
    """Joint objective: DSM conditioned on ``[y, D(y)]`` plus ``alpha`` times predictor MSE.

    The forward process drifts toward ``D(y)``; gradients reach both the
    score network and the predictor.
    """
    if alpha < 0:
        raise ParameterError("alpha must be non-negative")
    x0 = as_complex_tensor(x0)
    y = as_complex_tensor(y, x0.dtype)
    if x0.dim() == 2:
        x0, y = x0[None], y[None]
    d = predictor(y)
    cond = torch.stack([y, d], dim=1)
    terms = dsm_loss(score, x0, d, p, rng, conditioning=cond, weighting=weighting, tau=tau)
    sup = (x0 - d).abs().square().mean()
    terms.sup = sup
    terms.loss = terms.dsm + alpha * sup
    _check_finite(terms.loss, terms.tau, terms.sigma)
    return terms


def parameter_gradients(loss: torch.Tensor, *modules) -> np.ndarray:
    """Flat gradient of ``loss`` with respect to all parameters of ``modules``."""
    params = [q for m in modules for q in m.parameters()]
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    return np.concatenate(
        [
            (g if g is not None else torch.zeros_like(q)).detach().reshape(-1).cpu().numpy()
            for g, q in zip(grads, params)
        ]
    )
