"""Monte-Carlo and closed-form self-checks of the diffusion machinery."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scores import AnalyticGaussianScore
from .sde import OuveParams, SamplerConfig, diffusion_coeff, forward_simulate, kernel_mean, kernel_std, reverse_sample

KERNEL_TAUS = (0.25, 0.5, 1.0)


@dataclass(frozen=True)
class Check:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tolerance)


def kernel_checks(
    p: OuveParams,
    rng: np.random.Generator,
    n_paths: int = 10_000,
    n_steps: int = 1000,
    x0: complex = 1.0 + 0.5j,
    y: complex = 2.0 - 1.0j,
    mean_tol: float = 0.01,
    std_tol: float = 0.02,
) -> list[Check]:
    """Euler-Maruyama paths of scalar complex states against the closed-form
    perturbation kernel; errors are relative."""
    x0v = np.full(n_paths, x0, dtype=np.complex128)
    yv = np.full(n_paths, y, dtype=np.complex128)
    dt = p.t_max / n_steps
    states = forward_simulate(x0v, yv, p, n_steps, rng)
    out = []
    for tau in KERNEL_TAUS:
        x = states[int(round(tau / dt))].x
        mu = complex(kernel_mean(x0, y, tau, p))
        sd = float(kernel_std(tau, p))
        m_hat = x.mean()
        s_hat = np.sqrt(np.mean(np.abs(x - m_hat) ** 2))
        out.append(Check(f"kernel mean tau={tau:g}", abs(m_hat - mu) / abs(mu), mean_tol))
        out.append(Check(f"kernel std tau={tau:g}", abs(s_hat - sd) / sd, std_tol))
    return out


def sampler_checks(
    p: OuveParams,
    rng: np.random.Generator,
    n_paths: int = 10_000,
    n_steps: int = 200,
    m0: complex = 1.0 + 0.5j,
    s0: float = 0.5,
    y: complex = 0.0,
    mean_tol: float = 0.02,
    std_tol: float = 0.05,
) -> list[Check]:
    """Reverse sampling with the exact Gaussian score must recover N(m0, s0^2)."""
    oracle = AnalyticGaussianScore(m0, s0, p, y)
    yv = np.full(n_paths, y, dtype=np.complex128)
    x_init = oracle.marginal_mean(p.t_max) + np.sqrt(oracle.marginal_var(p.t_max)) * (
        (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2.0)
    )
    x = reverse_sample(yv, oracle, p, SamplerConfig(n_steps=n_steps), rng, x_init=x_init)
    m_hat = x.mean()
    s_hat = np.sqrt(np.mean(np.abs(x - m_hat) ** 2))
    return [
        Check("reverse terminal mean", abs(m_hat - m0) / abs(m0), mean_tol),
        Check("reverse terminal std", abs(s_hat - s0) / s0, std_tol),
    ]


def variance_ode_check(p: OuveParams, n_points: int = 50, h: float = 1e-5, tol: float = 1e-6) -> Check:
    """max |d sigma^2/d tau - (g^2 - 2 gamma sigma^2)| by central differences."""
    taus = np.linspace(0.02, p.t_max - 0.02, n_points)
    var = lambda t: kernel_std(t, p) ** 2  # noqa: E731
    lhs = (var(taus + h) - var(taus - h)) / (2 * h)
    rhs = diffusion_coeff(taus, p) ** 2 - 2 * p.gamma * var(taus)
    return Check("variance ODE residual", float(np.max(np.abs(lhs - rhs))), tol)


def run_checks(p: OuveParams, seed: int, tolerance_scale: float = 1.0, n_paths: int = 10_000) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = kernel_checks(p, rng, n_paths=n_paths) + sampler_checks(p, rng, n_paths=n_paths) + [variance_ode_check(p)]
    return [Check(c.name, c.error, c.tolerance * tolerance_scale) for c in checks]


def format_report(checks: list[Check], p: OuveParams, seed: int) -> str:
    lines = [
        f"# OUVE self-check gamma={p.gamma:g} sigma_min={p.sigma_min:g} sigma_max={p.sigma_max:g} "
        f"T={p.t_max:g} seed={seed}",
        f"{'check':<28} {'error':>12} {'tolerance':>12}  result",
    ]
    for c in checks:
        lines.append(f"{c.name:<28} {c.error:12.4e} {c.tolerance:12.4e}  {'PASS' if c.passed else 'FAIL'}")
    n_ok = sum(c.passed for c in checks)
    lines.append(f"{n_ok}/{len(checks)} checks passed")
    return "\n".join(lines) + "\n"
