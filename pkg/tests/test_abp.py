import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import interior, sine_amplitude, tone
from ippgbench.abp import (DEFAULT_GRID, ScaleGrid, cwt_forward, cwt_inverse, fourier_factor,
                           scales_for, wavelet_filter)
from ippgbench.core import IppgSignal, SignalError, TimeSeries
from ippgbench.filters import HR_BAND

VOICE = 2 ** (1 / 32)


def band_energy(x: TimeSeries, lo=0.65, hi=4.0) -> float:
    spec = np.abs(np.fft.rfft(x.samples)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / x.rate_hz)
    return float(spec[(f >= lo) & (f <= hi)].sum())


def ridge_freqs(x: TimeSeries) -> np.ndarray:
    """Per-time argmax frequency restricted to columns clear of the cone of influence
    at the lowest scale of interest."""
    S = cwt_forward(x)
    idx = DEFAULT_GRID.band_indices()
    k = idx[np.argmax(S.power[idx], axis=0)]
    ok = S.coi_mask()[idx[0]]
    return DEFAULT_GRID.frequencies[k][ok]


def test_grid_spacing_and_coverage():
    f = DEFAULT_GRID.frequencies
    assert f[0] == pytest.approx(0.325)
    assert f[-1] <= 25.0 and f[-1] * VOICE > 25.0 * (1 - 1e-9)
    np.testing.assert_allclose(f[1:] / f[:-1], VOICE)
    assert f[0] <= 0.65 and f[-1] >= 4.0
    idx = DEFAULT_GRID.band_indices(HR_BAND)
    assert f[idx[0]] == pytest.approx(0.65) and f[idx[-1]] <= 4.0


def test_scale_period_mapping():
    # Morlet with omega0 = 6: Fourier period is 1.0330 times the scale
    assert fourier_factor() == pytest.approx(1.0330, abs=1e-4)
    s = scales_for(np.array([1.0]), 50.0)[0]
    assert s * fourier_factor() / 50.0 == pytest.approx(1.0)


def test_sine_ridge_within_one_voice():
    x = tone(1.2)
    f = ridge_freqs(x)
    assert f.size > 0
    assert np.all(np.abs(np.log(f / 1.2)) <= np.log(VOICE) + 1e-12)


def test_two_tones_two_ridges():
    x = tone(0.9)
    x = x.with_samples(x.samples + tone(2.7).samples)
    S = cwt_forward(x)
    f = DEFAULT_GRID.frequencies
    col = S.power[:, S.power.shape[1] // 2]
    peaks = [i for i in range(1, f.size - 1) if col[i] > col[i - 1] and col[i] >= col[i + 1]
             and col[i] > 0.1 * col.max()]
    assert len(peaks) == 2
    for i, target in zip(peaks, (0.9, 2.7)):
        assert abs(np.log(f[i] / target)) <= np.log(VOICE)


def test_zero_signal_zero_scalogram_and_back():
    S = cwt_forward(TimeSeries(np.zeros(500), 50.0))
    assert not np.any(S.coefficients)
    assert not np.any(cwt_inverse(S).samples)


def test_scalogram_shape_and_finite():
    S = cwt_forward(tone(1.0, duration_s=10))
    assert S.coefficients.shape == (DEFAULT_GRID.frequencies.size, 500)
    assert np.all(np.isfinite(S.coefficients))


def test_too_short():
    with pytest.raises(SignalError):
        cwt_forward(TimeSeries(np.ones(10), 50.0))


@pytest.mark.parametrize("f", [0.8, 1.2, 2.5])
def test_round_trip_in_band(f):
    x = tone(f)
    y = cwt_inverse(cwt_forward(x))
    s = interior(len(x), 500)
    err = np.sqrt(np.mean((y.samples[s] - x.samples[s]) ** 2) / np.mean(x.samples[s] ** 2))
    assert err < 0.02


def test_round_trip_multitone():
    rng = np.random.default_rng(0)
    t = np.arange(3000) / 50
    v = sum(rng.uniform(0.5, 1) * np.sin(2 * np.pi * f * t + rng.uniform(0, 6))
            for f in (0.9, 1.4, 2.2, 3.1))
    y = cwt_inverse(cwt_forward(TimeSeries(v, 50.0))).samples
    s = interior(v.size, 500)
    assert np.sqrt(np.mean((y[s] - v[s]) ** 2) / np.mean(v[s] ** 2)) < 0.02


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_cwt_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, 256))
    Sx = cwt_forward(TimeSeries(x, 50.0)).coefficients
    Sy = cwt_forward(TimeSeries(y, 50.0)).coefficients
    Sz = cwt_forward(TimeSeries(a * x + b * y, 50.0)).coefficients
    assert np.abs(Sz - (a * Sx + b * Sy)).max() <= 1e-9 * (1 + np.abs(Sz).max())


def test_wavelet_filter_passes_clean_sine():
    x = tone(1.2)
    y = wavelet_filter(x)
    s = interior(len(x), 500)
    dev = np.sqrt(np.mean((y.samples[s] - x.samples[s]) ** 2) / np.mean(x.samples[s] ** 2))
    assert dev < 0.05


def test_wavelet_filter_attenuates_interferer():
    x = tone(1.2)
    z = tone(0.3, amp=3.0)
    y = wavelet_filter(x.with_samples(x.samples + z.samples)).samples
    s = interior(len(x), 500)
    t = x.times[s]
    gain_sig = sine_amplitude(y[s], t, 1.2) / 1.0
    gain_int = sine_amplitude(y[s], t, 0.3) / 3.0
    assert 20 * np.log10(gain_sig / gain_int) > 10


def test_wavelet_filter_zero_and_wrapping():
    z = TimeSeries(np.zeros(1000), 50.0)
    assert not np.any(wavelet_filter(z).samples)
    sig = IppgSignal(tone(1.2), "POS")
    out = wavelet_filter(sig)
    assert isinstance(out, IppgSignal) and out.provenance == "POS"


def test_wavelet_filter_too_short():
    with pytest.raises(SignalError):
        wavelet_filter(tone(1.2, duration_s=10))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_wavelet_filter_never_amplifies(seed):
    rng = np.random.default_rng(seed)
    x = TimeSeries(rng.normal(size=1500), 50.0)
    assert band_energy(wavelet_filter(x)) <= 1.05 * band_energy(x)


def test_custom_grid_band_indices():
    g = ScaleGrid(0.5, 8.0, 4)
    np.testing.assert_allclose(g.frequencies, 0.5 * 2 ** (np.arange(17) / 4))
    assert g.frequencies[g.band_indices()].min() >= 0.65
