import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ippgbench.core import (ColorSignal, EpochSpec, SignalError, TimeSeries, epoch_bounds,
                            epoch_starts, natural_key, resample_cubic_spline, segment_epochs,
                            spline_at)


def test_time_series_rejects_bad_rate():
    with pytest.raises(SignalError):
        TimeSeries(np.zeros(3), 0.0)


def test_time_series_times_and_duration():
    x = TimeSeries(np.arange(5.0), 2.0, t0_s=1.0)
    np.testing.assert_allclose(x.times, [1.0, 1.5, 2.0, 2.5, 3.0])
    assert x.duration_s == pytest.approx(2.5)


def test_color_signal_requires_equal_channels():
    with pytest.raises(SignalError):
        ColorSignal(TimeSeries(np.zeros(3), 50), TimeSeries(np.zeros(4), 50),
                    TimeSeries(np.zeros(3), 50))


def test_color_signal_round_trip():
    rgb = np.random.default_rng(0).random((10, 3))
    c = ColorSignal.from_array(rgb, 50.0)
    np.testing.assert_array_equal(c.as_array(), rgb)
    assert c.rate_hz == 50.0 and len(c) == 10


def test_epoch_spec_defaults():
    spec = EpochSpec()
    assert (spec.length_s, spec.overlap_s, spec.count_per_trial) == (20.48, 9.88, 5)
    assert spec.hop_s == pytest.approx(10.6)


def test_epoch_spec_rejects_overlap_not_below_length():
    with pytest.raises(SignalError):
        EpochSpec(length_s=10, overlap_s=10)


def test_five_windows_for_63s():
    x = TimeSeries(np.zeros(63 * 50), 50.0)
    starts = [w.t0_s for w in segment_epochs(x)]
    np.testing.assert_allclose(starts, [0, 10.6, 21.2, 31.8, 42.4])


def test_one_window_for_single_epoch_signal():
    x = TimeSeries(np.zeros(1024), 50.0)
    ws = segment_epochs(x)
    assert len(ws) == 1 and ws[0].t0_s == 0.0


def test_last_window_shifted_flush_for_60s():
    x = TimeSeries(np.zeros(3000), 50.0)
    ws = segment_epochs(x)
    assert len(ws) == 5
    assert ws[-1].t0_s == pytest.approx(39.52)
    assert ws[-1].t0_s + len(ws[-1]) / 50.0 == pytest.approx(60.0)


def test_too_short_signal():
    with pytest.raises(SignalError, match="signal too short"):
        segment_epochs(TimeSeries(np.zeros(1000), 50.0))


def test_epoch_bounds_match_segments():
    x = TimeSeries(np.arange(3150.0), 50.0)
    for (a, b), w in zip(epoch_bounds(x), segment_epochs(x)):
        assert a == pytest.approx(w.t0_s)
        assert b == pytest.approx(w.t0_s + 20.48)


def test_untrial_bound_keeps_all_windows():
    n = 120 * 50
    assert len(epoch_starts(n, 50.0, EpochSpec(), trial_bound=False)) > 5


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1024, 8000), rate=st.sampled_from([25.0, 50.0, 60.0]))
def test_windows_full_length_and_inside(n, rate):
    spec = EpochSpec()
    win = int(round(spec.length_s * rate))
    if n < win:
        return
    starts = epoch_starts(n, rate, spec)
    assert 1 <= len(starts) <= spec.count_per_trial
    assert all(0 <= s and s + win <= n for s in starts)
    assert starts == sorted(set(starts))


def test_resample_constant():
    y = resample_cubic_spline(TimeSeries(np.full(20, 5.0), 50.0), 250.0)
    np.testing.assert_allclose(y.samples, 5.0)
    assert y.rate_hz == 250.0


def test_resample_linear_is_exact():
    y = resample_cubic_spline(TimeSeries(np.arange(4.0), 1.0), 250.0)
    np.testing.assert_allclose(y.samples, y.times, atol=1e-12)
    assert y.times[-1] == pytest.approx(3.0)


def test_resample_sine_interior():
    t = np.arange(3000) / 50.0
    x = TimeSeries(np.sin(2 * np.pi * 1.2 * t), 50.0)
    y = resample_cubic_spline(x, 250.0)
    inner = (y.times > 1) & (y.times < 59)
    err = np.abs(y.samples - np.sin(2 * np.pi * 1.2 * y.times))[inner]
    assert err.max() < 1e-3


def test_resample_reproduces_knots():
    x = TimeSeries(np.random.default_rng(1).normal(size=50), 50.0)
    y = resample_cubic_spline(x, 250.0)
    np.testing.assert_allclose(y.samples[::5], x.samples, atol=1e-12)


def test_resample_identity_at_same_rate():
    x = TimeSeries(np.random.default_rng(2).normal(size=40), 50.0)
    np.testing.assert_allclose(resample_cubic_spline(x, 50.0).samples, x.samples, atol=1e-12)


def test_resample_needs_four_samples():
    with pytest.raises(SignalError):
        resample_cubic_spline(TimeSeries(np.zeros(3), 50.0), 250.0)


def test_spline_at_knots():
    x = TimeSeries(np.array([0.0, 1.0, 0.0, -1.0, 0.0]), 4.0)
    np.testing.assert_allclose(spline_at(x, x.times), x.samples, atol=1e-12)


def test_natural_key_orders_numbers():
    assert sorted(["P10", "P2", "P1"], key=natural_key) == ["P1", "P2", "P10"]
