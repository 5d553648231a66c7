import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from stormwind.errors import NumericalDivergenceError, ParameterError, ShapeError
from stormwind.scores import AnalyticGaussianScore, CallCounter, ZeroScore
from stormwind.sde import (
    SGMSE_PARAMS,
    SGMSE_SAMPLER,
    STORM_PARAMS,
    OuveParams,
    SamplerConfig,
    complex_normal,
    diffusion_coeff,
    drift,
    forward_simulate,
    kernel_mean,
    kernel_std,
    reverse_sample,
    sample_perturbation,
)

P = STORM_PARAMS


def variance_by_quadrature(tau, p):
    # sigma^2(tau) = int_0^tau exp(-2 gamma (tau - s)) g(s)^2 ds
    val, _ = quad(lambda s: np.exp(-2 * p.gamma * (tau - s)) * diffusion_coeff(s, p) ** 2, 0, tau, epsabs=1e-14)
    return val


@pytest.mark.parametrize("p", [STORM_PARAMS, SGMSE_PARAMS, OuveParams(gamma=0.7, sigma_min=0.1, sigma_max=2.0)])
@pytest.mark.parametrize("tau", [0.03, 0.25, 0.5, 0.9, 1.0])
def test_kernel_variance_matches_quadrature(p, tau):
    assert kernel_std(tau, p) ** 2 == pytest.approx(variance_by_quadrature(tau, p), rel=1e-9)


def test_kernel_std_at_zero_and_mean_endpoints():
    assert kernel_std(0.0, P) == 0.0
    assert kernel_mean(2.0, 5.0, 0.0, P) == 2.0
    big = OuveParams(gamma=50.0)
    assert kernel_mean(2.0, 5.0, 1.0, big) == pytest.approx(5.0)


def test_variance_ode():
    h = 1e-5
    taus = np.linspace(0.02, 0.98, 50)
    v = lambda t: kernel_std(t, P) ** 2  # noqa: E731
    lhs = (v(taus + h) - v(taus - h)) / (2 * h)
    rhs = diffusion_coeff(taus, P) ** 2 - 2 * P.gamma * v(taus)
    assert np.max(np.abs(lhs - rhs)) < 1e-6


def test_baseline_prior_wider_than_storm():
    assert kernel_std(1.0, SGMSE_PARAMS) > kernel_std(1.0, STORM_PARAMS)


def test_diffusion_endpoints():
    c = np.sqrt(2 * np.log(P.sigma_max / P.sigma_min))
    assert diffusion_coeff(0.0, P) == pytest.approx(P.sigma_min * c)
    assert diffusion_coeff(1.0, P) == pytest.approx(P.sigma_max * c)


def test_drift_examples():
    np.testing.assert_allclose(drift(np.array([1.0]), np.array([3.0]), P), [3.0])
    with pytest.raises(ShapeError):
        drift(np.zeros(2), np.zeros(3), P)


def test_param_validation():
    with pytest.raises(ParameterError):
        OuveParams(gamma=0)
    with pytest.raises(ParameterError):
        OuveParams(sigma_min=0.5, sigma_max=0.1)
    with pytest.raises(ParameterError):
        OuveParams(t_eps=0.0)
    with pytest.raises(ParameterError):
        SamplerConfig(n_steps=0)


def test_complex_normal_moments():
    z = complex_normal(np.random.default_rng(0), (200_000,))
    assert np.mean(z.real**2) == pytest.approx(0.5, abs=0.01)
    assert np.mean(z.imag**2) == pytest.approx(0.5, abs=0.01)
    assert abs(np.mean(z * z)) < 0.01  # circular symmetry: E[z^2] = 0


def test_sample_perturbation_moments():
    rng = np.random.default_rng(1)
    x0 = np.full(50_000, 1 + 1j)
    y = np.full(50_000, -1.0 + 0j)
    x, z = sample_perturbation(x0, y, 0.6, P, rng)
    np.testing.assert_allclose(x, kernel_mean(x0, y, 0.6, P) + kernel_std(0.6, P) * z)
    assert np.mean(x) == pytest.approx(kernel_mean(1 + 1j, -1.0, 0.6, P), abs=0.01)


@pytest.mark.parametrize("tau", [0.25, 0.5, 1.0])
def test_forward_em_matches_kernel(tau):
    rng = np.random.default_rng(2)
    n = 10_000
    states = forward_simulate(np.full(n, 1 + 0.5j), np.full(n, 2 - 1j), P, 1000, rng, t_end=tau)
    x = states[-1].x
    assert states[-1].tau == pytest.approx(tau)
    mu = kernel_mean(1 + 0.5j, 2 - 1j, tau, P)
    sd = kernel_std(tau, P)
    assert abs(x.mean() - mu) / abs(mu) < 0.01
    assert abs(np.sqrt(np.mean(np.abs(x - x.mean()) ** 2)) - sd) / sd < 0.02


def test_forward_simulate_saves_every():
    st_ = forward_simulate(np.zeros(3), np.ones(3), P, 10, np.random.default_rng(0), save_every=4)
    assert [round(s.tau, 6) for s in st_] == [0.0, 0.4, 0.8, 1.0]


def test_reverse_sampler_call_counts():
    y = np.zeros((4, 6), dtype=complex)
    c = CallCounter(ZeroScore())
    reverse_sample(y, c, P, SamplerConfig(n_steps=20), np.random.default_rng(0))
    assert c.calls == 20
    c = CallCounter(ZeroScore())
    reverse_sample(y, c, SGMSE_PARAMS, SGMSE_SAMPLER, np.random.default_rng(0))
    assert c.calls == 60


def test_reverse_sampler_deterministic():
    y = np.ones((3, 5), dtype=complex)
    oracle = AnalyticGaussianScore(0.5, 0.2, P, 1.0)
    a = reverse_sample(y, oracle, P, SamplerConfig(n_steps=10), np.random.default_rng(4))
    b = reverse_sample(y, oracle, P, SamplerConfig(n_steps=10), np.random.default_rng(4))
    np.testing.assert_array_equal(a, b)


def test_reverse_sampler_recovers_gaussian():
    n = 10_000
    m0, s0 = 1.0 + 0.5j, 0.5
    oracle = AnalyticGaussianScore(m0, s0, P, 0.0)
    rng = np.random.default_rng(5)
    y = np.zeros(n, dtype=complex)
    x_t = oracle.marginal_mean(1.0) + np.sqrt(oracle.marginal_var(1.0)) * complex_normal(rng, (n,))
    x = reverse_sample(y, oracle, P, SamplerConfig(n_steps=200), rng, x_init=x_t)
    assert abs(x.mean() - m0) / abs(m0) < 0.02
    assert abs(np.sqrt(np.mean(np.abs(x - x.mean()) ** 2)) - s0) / s0 < 0.05


def test_reverse_sampler_with_corrector_recovers_gaussian():
    m0, s0 = 0.8, 0.4
    oracle = AnalyticGaussianScore(m0, s0, SGMSE_PARAMS, 0.3)
    rng = np.random.default_rng(6)
    # corrector step sizes use per-item norms, so each item needs many bins
    y = np.full((40, 256), 0.3 + 0j)
    x = reverse_sample(y, oracle, SGMSE_PARAMS, SamplerConfig(n_steps=100, corrector_steps=1), rng)
    assert abs(x.mean() - m0) / abs(m0) < 0.02
    # a finite Langevin step (eps ~ 2 r^2 var) inflates the spread slightly:
    # stationary variance of the discretized step is var / (1 - eps / (2 var))
    std = np.sqrt(np.mean(np.abs(x - x.mean()) ** 2))
    assert s0 <= std < 1.15 * s0


def test_corrector_step_formula():
    """One corrector step with a constant score stub, compared to a manual evaluation."""
    y = np.zeros((2, 3), dtype=complex)
    s_const = np.full((2, 3), 0.5 - 0.25j)
    cfg = SamplerConfig(n_steps=1, corrector_steps=1, corrector_snr=0.5)
    x_init = np.ones((2, 3), dtype=complex)
    out = reverse_sample(y, lambda x, c, t, s: s_const, P, cfg, np.random.default_rng(7), x_init=x_init)

    rng = np.random.default_rng(7)
    z = complex_normal(rng, (2, 3))
    zn = np.sqrt(np.sum(np.abs(z) ** 2, axis=1, keepdims=True))
    sn = np.sqrt(np.sum(np.abs(s_const) ** 2, axis=1, keepdims=True))
    eps = 2 * (0.5 * zn / sn) ** 2
    x = x_init + eps * s_const + np.sqrt(2 * eps) * z
    g = diffusion_coeff(1.0, P)
    x = x - (P.gamma * (y - x) - g**2 * s_const) * 1.0 + g * complex_normal(rng, (2, 3))
    np.testing.assert_allclose(out, x, rtol=1e-12)


def test_reverse_sampler_detects_divergence():
    def bad(x, c, t, s):
        return np.full_like(x, np.nan)

    with pytest.raises(NumericalDivergenceError) as info:
        reverse_sample(np.zeros(3, dtype=complex), bad, P, SamplerConfig(n_steps=5), np.random.default_rng(0))
    assert info.value.tau == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(
    gamma=st.floats(0.2, 5.0),
    smin=st.floats(0.01, 0.2),
    ratio=st.floats(1.5, 30.0),
    tau=st.floats(0.0, 1.0),
)
def test_kernel_std_monotone_and_bounded(gamma, smin, ratio, tau):
    p = OuveParams(gamma=gamma, sigma_min=smin, sigma_max=smin * ratio)
    s = kernel_std(tau, p)
    assert 0 <= s <= p.sigma_max
    assert kernel_std(min(tau + 0.01, 1.0), p) >= s - 1e-15
