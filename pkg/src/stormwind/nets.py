"""Desk-scale networks: a noise-conditioned score net and a predictive denoiser.

Both are small stacks of dilated 3x3 convolutions over real/imaginary
channels of complex spectrograms shaped ``[batch, freq, frames]``.
"""
from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from .errors import CheckpointError


def complex_to_channels(*specs: torch.Tensor) -> torch.Tensor:
    """Stack complex ``[B, F, T]`` (or ``[B, k, F, T]``) tensors as real channels."""
    chans = []
    for s in specs:
        if s.dim() == 3:
            s = s.unsqueeze(1)
        chans.append(s.real)
        chans.append(s.imag)
    return torch.cat(chans, dim=1)


def channels_to_complex(t: torch.Tensor) -> torch.Tensor:
    return torch.complex(t[:, 0], t[:, 1])


class _ConvStack(nn.Module):
    def __init__(self, in_ch: int, channels: int, dilations, out_ch: int = 2):
        super().__init__()
        self.inp = nn.Conv2d(in_ch, channels, 3, padding=1)
        self.hidden = nn.ModuleList(
            nn.Conv2d(channels, channels, 3, padding=d, dilation=d) for d in dilations
        )
        self.out = nn.Conv2d(channels, out_ch, 3, padding=1)
        self.act = nn.SiLU()

    def receptive_field(self) -> int:
        return 1 + 2 + sum(2 * c.dilation[0] for c in self.hidden) + 2


class TinyScoreNet(nn.Module):
    """Score network ``s(x_tau, [y, D(y)], sigma)``.

    The noise level enters through a sinusoidal embedding of ``log sigma``
    that produces a per-channel scale and shift for every hidden layer. The
    network output is read as an estimate of the normalized noise ``z``; the
    returned score is ``-z_hat / sigma``.
    """

    def __init__(self, n_cond: int = 2, channels: int = 32, dilations=(1, 2, 4, 8), emb_dim: int = 32):
        super().__init__()
        self.arch = {
            "kind": "score",
            "n_cond": int(n_cond),
            "channels": int(channels),
            "dilations": [int(d) for d in dilations],
            "emb_dim": int(emb_dim),
        }
        self.n_freqs = 8
        self.body = _ConvStack(2 + 2 * n_cond, channels, dilations)
        n_layers = len(dilations) + 1
        self.embed = nn.Sequential(
            nn.Linear(2 * self.n_freqs, emb_dim),
            nn.SiLU(),
            nn.Linear(emb_dim, 2 * channels * n_layers),
        )
        self.channels = channels

    def _film(self, sigma: torch.Tensor):
        log_s = torch.log(sigma).unsqueeze(-1)
        freqs = 2.0 ** torch.arange(self.n_freqs, dtype=sigma.dtype, device=sigma.device)
        feats = torch.cat([torch.sin(log_s * freqs), torch.cos(log_s * freqs)], dim=-1)
        mod = self.embed(feats).view(sigma.shape[0], -1, 2, self.channels)
        return mod[:, :, 0, :, None, None], mod[:, :, 1, :, None, None]

    def forward(self, x: torch.Tensor, cond: torch.Tensor, tau, sigma: torch.Tensor) -> torch.Tensor:
        """``x``: complex [B,F,T]; ``cond``: complex [B,k,F,T]; ``sigma``: [B].

        ``tau`` is accepted for interface compatibility; only ``sigma`` conditions the net.
        """
        h = complex_to_channels(x, cond)
        scale, shift = self._film(sigma)
        b = self.body
        h = b.act(b.inp(h) * (1 + scale[:, 0]) + shift[:, 0])
        for i, conv in enumerate(b.hidden, start=1):
            h = h + b.act(conv(h) * (1 + scale[:, i]) + shift[:, i])
        z_hat = channels_to_complex(b.out(h))
        return -z_hat / sigma.view(-1, 1, 1)


class TinyPredictor(nn.Module):
    """Residual denoiser ``D(y) = y + net(y)``; no noise conditioning."""

    def __init__(self, channels: int = 32, dilations=(1, 2, 4, 8)):
        super().__init__()
        self.arch = {
            "kind": "predictor",
            "channels": int(channels),
            "dilations": [int(d) for d in dilations],
        }
        self.body = _ConvStack(2, channels, dilations)

    def forward(self, y: torch.Tensor) -> torch.Tensor:
        b = self.body
        h = b.act(b.inp(complex_to_channels(y)))
        for conv in b.hidden:
            h = h + b.act(conv(h))
        return y + channels_to_complex(b.out(h))


def build_model(arch: dict) -> nn.Module:
    kind = arch.get("kind")
    if kind == "score":
        return TinyScoreNet(arch["n_cond"], arch["channels"], arch["dilations"], arch["emb_dim"])
    if kind == "predictor":
        return TinyPredictor(arch["channels"], arch["dilations"])
    raise CheckpointError(f"unknown architecture kind {kind!r}")


def init_parameters(model: nn.Module, rng: np.random.Generator, out_gain: float = 0.1) -> None:
    """Fan-in scaled uniform init drawn from a numpy generator (reproducible)."""
    with torch.no_grad():
        for name, p in model.named_parameters():
            if p.dim() > 1:
                fan_in = int(np.prod(p.shape[1:]))
                bound = math.sqrt(3.0 / fan_in)
                if name.startswith("body.out") or name.startswith("embed.2"):
                    bound *= out_gain
            else:
                bound = 0.01
            p.copy_(torch.from_numpy(rng.uniform(-bound, bound, size=tuple(p.shape))))


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def flat_parameters(model: nn.Module) -> np.ndarray:
    return nn.utils.parameters_to_vector(model.parameters()).detach().cpu().numpy().copy()


def load_flat_parameters(model: nn.Module, flat: np.ndarray) -> None:
    vec = torch.as_tensor(np.asarray(flat), dtype=next(model.parameters()).dtype)
    if vec.numel() != count_parameters(model):
        raise CheckpointError(
            f"parameter vector has {vec.numel()} entries, model expects {count_parameters(model)}"
        )
    with torch.no_grad():
        nn.utils.vector_to_parameters(vec, model.parameters())


def _as_batch_tensor(a, dtype):
    return torch.as_tensor(np.asarray(a)).to(dtype)


class NetworkScore:
    """Adapter exposing a :class:`TinyScoreNet` as ``score(x, cond, tau, sigma)``.

    Accepts numpy arrays (``x`` as ``[F, T]`` or ``[B, F, T]``, ``cond`` as
    ``[k, F, T]`` or ``[B, k, F, T]``) and returns numpy complex128.
    """

    def __init__(self, net: TinyScoreNet):
        self.net = net
        self.dtype = next(net.parameters()).dtype
        self.cdtype = torch.complex128 if self.dtype == torch.float64 else torch.complex64

    def __call__(self, x, conditioning, tau, sigma):
        single = np.ndim(x) == 2
        x = np.asarray(x)[None] if single else np.asarray(x)
        cond = np.asarray(conditioning)
        if single:
            cond = cond[None]
        if cond.ndim == 3:
            cond = cond[:, None]
        sig = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (x.shape[0],))
        with torch.no_grad():
            out = self.net(
                _as_batch_tensor(x, self.cdtype),
                _as_batch_tensor(cond, self.cdtype),
                tau,
                torch.tensor(sig, dtype=self.dtype),
            )
        out = out.numpy().astype(np.complex128)
        return out[0] if single else out


class NetworkPredictor:
    """Adapter exposing a :class:`TinyPredictor` on numpy ``[F, T]``/``[B, F, T]`` arrays."""

    def __init__(self, net: TinyPredictor):
        self.net = net
        dtype = next(net.parameters()).dtype
        self.cdtype = torch.complex128 if dtype == torch.float64 else torch.complex64

    def __call__(self, y):
        single = np.ndim(y) == 2
        y = np.asarray(y)[None] if single else np.asarray(y)
        with torch.no_grad():
            out = self.net(_as_batch_tensor(y, self.cdtype)).numpy().astype(np.complex128)
        return out[0] if single else out
