import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare, kstest

from stormwind.corruption import (
    CompressorParams,
    CorruptionDistributions,
    CorruptionParams,
    compressor_gain,
    corrupt,
    hard_clip,
    mix_at_snr,
    sample_corruption_params,
    sidechain_compress,
)
from stormwind.errors import DegenerateInputError, ParameterError, ShapeError
from stormwind.spectral import Waveform

SR = 16000


def _wave(seed, n=8000):
    return Waveform(np.random.default_rng(seed).standard_normal(n))


def _measured_snr(speech, noise):
    return 10 * np.log10(np.mean(speech**2) / np.mean(noise**2))


def test_mix_gain_examples():
    s = Waveform(np.ones(100))
    n = Waveform(-np.ones(100))
    _, scaled = mix_at_snr(s, n, 0.0)
    np.testing.assert_allclose(scaled.samples, -1.0)
    _, scaled = mix_at_snr(s, n, 20.0)
    np.testing.assert_allclose(scaled.samples, -0.1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), snr=st.floats(-30, 40))
def test_mix_achieves_snr(seed, snr):
    s, n = _wave(seed, 2000), _wave(seed + 1, 2000)
    noisy, scaled = mix_at_snr(s, n, snr)
    assert abs(_measured_snr(s.samples, scaled.samples) - snr) < 1e-6
    np.testing.assert_allclose(noisy.samples, s.samples + scaled.samples)


def test_mix_errors():
    with pytest.raises(DegenerateInputError):
        mix_at_snr(Waveform(np.zeros(10)), _wave(0, 10), 0.0)
    with pytest.raises(ShapeError):
        mix_at_snr(_wave(0, 10), _wave(1, 11), 0.0)


def test_compressor_unit_ratio_identity():
    s, n = _wave(0), _wave(1)
    out = sidechain_compress(s, n, CompressorParams(threshold=-60, ratio=1.0))
    np.testing.assert_array_equal(out.samples, s.samples)


def test_compressor_below_threshold_identity():
    s = _wave(0)
    level = 10 ** ((-20 - 20) / 20)  # 20 dB below a -20 dBFS threshold
    side = Waveform(np.full(len(s), level))
    out = sidechain_compress(s, side, CompressorParams(threshold=-20, ratio=8))
    np.testing.assert_array_equal(out.samples, s.samples)


def _reference_gain(side, p):
    """Straight-line reimplementation written separately from the library."""
    att = np.exp(-1000.0 / (p.attack * SR))
    rel = np.exp(-1000.0 / (p.release * SR))
    env, out = 0.0, []
    for v in np.abs(side) * p.sidechain_gain:
        coef = att if v > env else rel
        env = coef * env + (1 - coef) * v
        db = 20 * np.log10(max(env, 1e-12))
        red = (db - p.threshold) * (1 - 1 / p.ratio) if db > p.threshold else 0.0
        out.append(10 ** (-red / 20))
    return np.array(out)


def test_compressor_steady_state_reduction():
    p = CompressorParams(threshold=-20, ratio=2, attack=10, release=100, sidechain_gain=1.1)
    level = 10 ** ((-20 + 10) / 20) / 1.1
    side = np.full(SR, level)
    g = compressor_gain(side, p, SR)
    reduction_db = -20 * np.log10(g[-1])
    assert reduction_db == pytest.approx(5.0, abs=0.1)
    np.testing.assert_allclose(g, _reference_gain(side, p), rtol=1e-12)


@settings(max_examples=15, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    threshold=st.floats(-40, -5),
    ratio=st.floats(1, 20),
    attack=st.floats(5, 100),
    release=st.floats(5, 500),
    sc=st.floats(0.8, 1.2),
)
def test_compressor_gain_properties(seed, threshold, ratio, attack, release, sc):
    p = CompressorParams(threshold, ratio, attack, release, sc)
    side = 0.3 * np.random.default_rng(seed).standard_normal(3000)
    g = compressor_gain(side, p, SR)
    assert np.all(g <= 1.0) and np.all(g > 0)
    np.testing.assert_allclose(g, _reference_gain(side, p), rtol=1e-9)


def test_hard_clip_examples():
    y = Waveform(np.array([0.5, -2.0, 1.0]))
    np.testing.assert_allclose(hard_clip(y, 0.9).samples, [0.5, -1.8, 1.0])
    np.testing.assert_array_equal(hard_clip(y, 1.0).samples, y.samples)
    with pytest.raises(DegenerateInputError):
        hard_clip(Waveform(np.zeros(3)), 0.9)
    with pytest.raises(ParameterError):
        hard_clip(y, 1.5)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eta=st.floats(0.05, 1.0))
def test_hard_clip_bound_and_reapplication(seed, eta):
    y = _wave(seed, 500)
    peak = np.max(np.abs(y.samples))
    once = hard_clip(y, eta)
    assert np.max(np.abs(once.samples)) == pytest.approx(eta * peak)
    twice = hard_clip(once, eta)
    assert np.max(np.abs(twice.samples - once.samples)) <= (1 - eta) * eta * peak + 1e-12
    if eta == 1.0:
        np.testing.assert_array_equal(twice.samples, once.samples)


def test_corrupt_additive_limit():
    s, n = _wave(0), _wave(1)
    p = CorruptionParams(snr=3.0, compressor=CompressorParams(ratio=1.0), clip=False, eta=1.0)
    noisy, clean = corrupt(s, n, p)
    _, scaled = mix_at_snr(s, n, 3.0)
    np.testing.assert_array_equal(noisy.samples, s.samples + scaled.samples)
    np.testing.assert_array_equal(clean.samples, s.samples)


def test_corrupt_clipping_scales_peak():
    s, n = _wave(0), _wave(1)
    comp = CompressorParams(threshold=-20, ratio=4)
    pre, _ = corrupt(s, n, CorruptionParams(2.0, comp, False, 1.0))
    post, _ = corrupt(s, n, CorruptionParams(2.0, comp, True, 0.85))
    assert np.max(np.abs(post.samples)) == pytest.approx(0.85 * np.max(np.abs(pre.samples)))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_compression_never_raises_snr(seed):
    rng = np.random.default_rng(seed)
    s, n = Waveform(0.5 * rng.standard_normal(4000)), Waveform(rng.standard_normal(4000))
    p = sample_corruption_params(rng)
    p = CorruptionParams(p.snr, p.compressor, False, p.eta)
    noisy, clean = corrupt(s, n, p)
    # the residual is the scaled noise plus the speech removed by compression, which only
    # shrinks speech samples towards zero; measured on the mixture components directly:
    _, scaled = mix_at_snr(s, n, p.snr)
    compressed = noisy.samples - scaled.samples
    assert np.all(np.abs(compressed) <= np.abs(clean.samples) + 1e-15)
    measured = 10 * np.log10(np.mean(compressed**2) / np.mean(scaled.samples**2))
    assert measured <= p.snr + 1e-9


def test_sampler_moments_and_determinism():
    rng = np.random.default_rng(0)
    draws = [sample_corruption_params(rng) for _ in range(10_000)]
    snr = np.array([d.snr for d in draws])
    clip = np.array([d.clip for d in draws])
    assert abs(snr.mean() - 4.0) <= 0.3
    assert abs(clip.mean() - 0.75) <= 0.02
    assert sample_corruption_params(np.random.default_rng(3)) == sample_corruption_params(np.random.default_rng(3))


def test_sampler_distributions_ks():
    rng = np.random.default_rng(1)
    d = CorruptionDistributions()
    draws = [sample_corruption_params(rng, d) for _ in range(10_000)]
    fields = {
        "snr": ([x.snr for x in draws], d.snr),
        "ratio": ([x.compressor.ratio for x in draws], d.ratio),
        "attack": ([x.compressor.attack for x in draws], d.attack),
        "release": ([x.compressor.release for x in draws], d.release),
        "sidechain_gain": ([x.compressor.sidechain_gain for x in draws], d.sidechain_gain),
        "eta": ([x.eta for x in draws if x.clip], d.eta),
        "threshold": ([x.compressor.threshold for x in draws], d.threshold),
    }
    for name, (vals, u) in fields.items():
        p = kstest(vals, "uniform", args=(u.low, u.high - u.low)).pvalue
        assert p > 0.01, name
    clips = sum(x.clip for x in draws)
    assert chisquare([clips, len(draws) - clips], [7500, 2500]).pvalue > 0.01


def test_params_record_roundtrip():
    p = sample_corruption_params(np.random.default_rng(2))
    assert CorruptionParams.from_record(p.to_record()) == p
    assert set(p.to_record()) == {"snr", "compressor", "clip", "eta"}


def test_invalid_params():
    with pytest.raises(ParameterError):
        CompressorParams(ratio=0.5)
    with pytest.raises(ParameterError):
        CompressorParams(attack=0)
    with pytest.raises(ParameterError):
        CorruptionParams(snr=float("nan"), compressor=CompressorParams(), clip=False, eta=1.0)
