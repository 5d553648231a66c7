import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stormwind.errors import (
    DegenerateInputError,
    LengthError,
    ParameterError,
    SpectrogramStateError,
)
from stormwind.spectral import (
    ComplexSpectrogram,
    StftConfig,
    Waveform,
    crop_random_frames,
    istft,
    normalize_by_noisy_max,
    stft,
    unwarp,
    warp,
)

CFG = StftConfig()


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def brute_force_frames(x, cfg):
    """Independent framing + DFT by matrix multiplication (no FFT)."""
    pad = cfg.window_len - cfg.hop
    n_frames = stft(Waveform(x), cfg).n_frames
    total = (n_frames - 1) * cfg.hop + cfg.window_len
    padded = np.zeros(total)
    padded[pad : pad + len(x)] = x
    n = np.arange(cfg.window_len)
    k = np.arange(cfg.n_freq)
    dft = np.exp(-2j * np.pi * np.outer(k, n) / cfg.window_len)
    frames = np.stack([padded[i * cfg.hop : i * cfg.hop + cfg.window_len] for i in range(n_frames)])
    return dft @ (frames * cfg.window()).T, frames * cfg.window()


def test_bin_count_and_frame_count():
    w = Waveform(np.random.default_rng(0).standard_normal(16000))
    s = stft(w)
    assert s.bins.shape[0] == 256
    padded = s.n_samples + s.pad_left + s.pad_right
    assert s.n_frames == (padded - CFG.window_len) // CFG.hop + 1
    assert s.pad_left == CFG.window_len - CFG.hop
    assert s.pad_right >= CFG.window_len - CFG.hop


def test_stft_matches_brute_force_dft():
    x = np.random.default_rng(1).standard_normal(3000)
    expected, _ = brute_force_frames(x, CFG)
    np.testing.assert_allclose(stft(Waveform(x)).bins, expected, atol=1e-9)


def test_zero_signal_gives_zero_spectrogram():
    assert not np.any(stft(Waveform(np.zeros(2000))).bins)


def test_short_signal_rejected():
    with pytest.raises(LengthError):
        stft(Waveform(np.ones(509)))


def test_bin_centre_sinusoid_energy():
    k = 40
    n = np.arange(16000)
    x = np.cos(2 * np.pi * k * n / CFG.window_len)
    s = stft(Waveform(x))
    interior = np.abs(s.bins[:, 5:-5]) ** 2
    energy_per_row = interior.sum(axis=1)
    # oracle: brute-force DFT of one windowed frame gives the leakage profile
    _, frames = brute_force_frames(x, CFG)
    ref = np.abs(np.fft.fft(frames[10])[: CFG.n_freq]) ** 2
    ref_lobe = ref[k - 1 : k + 2].sum() / ref.sum()
    assert np.argmax(energy_per_row) == k
    lobe = energy_per_row[k - 1 : k + 2].sum() / energy_per_row.sum()
    assert lobe >= 0.95
    assert lobe == pytest.approx(ref_lobe, abs=1e-3)


@pytest.mark.parametrize("kind", ["noise", "impulses"])
def test_roundtrip(kind):
    rng = np.random.default_rng(2)
    if kind == "noise":
        x = rng.standard_normal(16000)
    else:
        x = np.zeros(16000)
        x[::401] = 1.0
    y = istft(stft(Waveform(x)))
    assert len(y) == len(x)
    assert rel_err(y.samples, x) < 1e-6


def test_istft_zero_spectrogram():
    s = stft(Waveform(np.zeros(4000)))
    assert not np.any(istft(s).samples)


def test_istft_rejects_warped():
    with pytest.raises(SpectrogramStateError):
        istft(warp(stft(Waveform(np.ones(2000)))))


def test_istft_rejects_inconsistent_length():
    s = stft(Waveform(np.ones(2000)))
    with pytest.raises(LengthError):
        istft(s, out_len=10**6)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(510, 5000),
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
    seed=st.integers(0, 2**32 - 1),
)
def test_linearity_and_roundtrip_property(n, a, b, seed):
    rng = np.random.default_rng(seed)
    w1, w2 = rng.standard_normal(n), rng.standard_normal(n)
    lhs = stft(Waveform(a * w1 + b * w2)).bins
    rhs = a * stft(Waveform(w1)).bins + b * stft(Waveform(w2)).bins
    scale = max(np.linalg.norm(rhs), 1e-300)
    assert np.linalg.norm(lhs - rhs) / scale < 1e-9 or np.linalg.norm(lhs - rhs) < 1e-9
    assert rel_err(istft(stft(Waveform(w1))).samples, w1) < 1e-6


def test_parseval_per_frame():
    x = np.random.default_rng(3).standard_normal(5000)
    s = stft(Waveform(x))
    _, frames = brute_force_frames(x, CFG)
    mag2 = np.abs(s.bins) ** 2
    # one-sided spectrum of an even-length DFT: DC and Nyquist once, the rest twice
    full = mag2[0] + mag2[-1] + 2 * mag2[1:-1].sum(axis=0)
    np.testing.assert_allclose(full, CFG.window_len * np.sum(frames**2, axis=1), rtol=1e-6)


def test_warp_examples():
    s = ComplexSpectrogram(np.array([[0.0, 4.0], [1j * 9, -16.0]]))
    w = warp(s, 0.5)
    np.testing.assert_allclose(w.bins, [[0.0, 2.0], [3j, -4.0]], atol=1e-12)
    assert w.warped


def test_warp_rejects_bad_exponent():
    s = ComplexSpectrogram(np.ones((3, 3)))
    with pytest.raises(ParameterError):
        warp(s, 0.0)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    exponent=st.floats(0.2, 2.0),
    scale=st.floats(0.05, 5.0),
)
def test_warp_unwarp_identity(seed, exponent, scale):
    rng = np.random.default_rng(seed)
    bins = rng.standard_normal((8, 5)) + 1j * rng.standard_normal((8, 5))
    s = ComplexSpectrogram(bins)
    back = unwarp(warp(s, exponent, scale))
    assert rel_err(back.bins, bins) < 1e-9
    # the other order: treat random bins as already warped
    ws = ComplexSpectrogram(bins, warped=True, warp_exponent=exponent, warp_scale=scale)
    assert rel_err(warp(unwarp(ws), exponent, scale).bins, bins) < 1e-9


def test_normalize_by_noisy_max():
    x = Waveform(np.array([0.5, -1.0, 0.25]))
    y = Waveform(np.array([1.0, -2.0, 0.5]))
    xn, yn, gain = normalize_by_noisy_max(x, y)
    assert gain == 0.5
    np.testing.assert_array_equal(yn.samples, [0.5, -1.0, 0.25])
    np.testing.assert_array_equal(xn.samples, [0.25, -0.5, 0.125])
    np.testing.assert_array_equal(yn.samples / gain, y.samples)
    _, y1, g1 = normalize_by_noisy_max(yn, yn)
    assert g1 == 1.0 and np.array_equal(y1.samples, yn.samples)


def test_normalize_silent_rejected():
    with pytest.raises(DegenerateInputError):
        normalize_by_noisy_max(Waveform(np.ones(4)), Waveform(np.zeros(4)))


def _spec(frames):
    return ComplexSpectrogram(np.arange(3 * frames, dtype=float).reshape(3, frames) + 0j)


def test_crop_identity_when_exact():
    s = _spec(256)
    c = crop_random_frames(s, 256, np.random.default_rng(0))
    np.testing.assert_array_equal(c.bins, s.bins)


def test_crop_deterministic():
    s = _spec(600)
    a = crop_random_frames(s, 256, np.random.default_rng(7))
    b = crop_random_frames(s, 256, np.random.default_rng(7))
    assert a.frame_offset == b.frame_offset
    np.testing.assert_array_equal(a.bins, b.bins)


def test_crop_pads_short_inputs():
    c = crop_random_frames(_spec(10), 16, np.random.default_rng(0))
    assert c.n_frames == 16 and c.frame_padding == 6
    assert not np.any(c.bins[:, 10:])


def test_crop_keeps_stacked_pairs_aligned():
    bins = np.stack([_spec(300).bins, 2 * _spec(300).bins])
    c = crop_random_frames(ComplexSpectrogram(bins), 64, np.random.default_rng(1))
    np.testing.assert_array_equal(c.bins[1], 2 * c.bins[0])


def test_crop_offset_uniform_chi_square():
    from scipy.stats import chisquare

    s = _spec(512)
    rng = np.random.default_rng(11)
    offsets = np.array([crop_random_frames(s, 256, rng).frame_offset for _ in range(10_000)])
    assert offsets.min() >= 0 and offsets.max() <= 256
    counts = np.bincount(offsets, minlength=257)
    assert len(counts) == 257
    assert chisquare(counts).pvalue > 0.01
