"""Pulse-rate estimators: interbeat intervals, DFT, Burg AR and CWT ridge."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal
from scipy.ndimage import uniform_filter1d

from .abp import DEFAULT_GRID, ScaleGrid, cwt_forward
from .core import (EpochSpec, NoSpectralContentError, SignalError, TimeSeries,
                   TooFewBeatsError, epoch_bounds, resample_cubic_spline)
from .filters import HR_BAND, BandSpec

log = logging.getLogger(__name__)

SYSTOLIC_PEAK = "systolic_peak"
DIASTOLIC_MINIMUM = "diastolic_minimum"

BPM_MIN, BPM_MAX = 40.0, 240.0
MIN_SPACING_S = 60.0 / BPM_MAX
IBI_RATE_HZ = 250.0
DFT_POINTS = 1024
AR_ORDER_WAVELET = 23
AR_ORDER_PLAIN = 34


@dataclass(frozen=True)
class BeatDetectorParams:
    w1_s: float = 0.111
    w2_s: float = 0.667
    beta: float = 0.02
    offset_window_s: float = 7.0

    def __post_init__(self):
        if not 0 < self.w1_s < self.w2_s < self.offset_window_s:
            raise SignalError("detector windows must satisfy 0 < w1 < w2 < offset window")


@dataclass(frozen=True, eq=False)
class ExtremaList:
    indices: np.ndarray
    kind: str
    rate_hz: float
    t0_s: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + self.indices / self.rate_hz

    def __len__(self) -> int:
        return self.indices.size


@dataclass(frozen=True, eq=False)
class RateSeries:
    """Momentary rate samples.

    ``durations_s`` is set for interval-based rates (one interval per value)
    and drives duration weighting in :func:`epoch_average_rate`.
    """

    times_s: np.ndarray
    bpm: np.ndarray
    method: str
    durations_s: Optional[np.ndarray] = None


def _centered_mean(v: np.ndarray, seconds: float, rate_hz: float) -> np.ndarray:
    size = max(1, int(round(seconds * rate_hz)))
    return uniform_filter1d(v, size=size, mode="nearest")


def _blocks(mask: np.ndarray) -> list[tuple[int, int]]:
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return list(zip(starts, stops))


def _enforce_spacing(idx: list[int], v: np.ndarray, min_gap: int) -> list[int]:
    out: list[int] = []
    for i in idx:
        if out and i - out[-1] < min_gap:
            if v[i] > v[out[-1]]:
                out[-1] = i
        else:
            out.append(i)
    return out


def reject_false_extrema(times: np.ndarray, short: float = 2 / 3,
                         long: float = 2.3) -> np.ndarray:
    """Boolean keep-mask after the interval-consistency rejection rule.

    An extremum is dropped when the span between its neighbours is shorter
    than ``short`` times the smaller of the preceding two-interval span and
    ``long`` times the mean interval. Points are visited left to right and a
    dropped point no longer serves as a neighbour. Where the preceding span
    is undefined only the mean-interval term is used.
    """
    t = np.asarray(times, dtype=float)
    n = t.size
    keep = np.ones(n, dtype=bool)
    if n < 3:
        return keep
    mean_term = long * (t[-1] - t[0]) / (n - 1)
    alive = list(range(n))
    i = 1
    while i < len(alive) - 1:
        span = t[alive[i + 1]] - t[alive[i - 1]]
        bound = mean_term
        if i >= 3:
            bound = min(t[alive[i - 1]] - t[alive[i - 3]], mean_term)
        if span < short * bound:
            keep[alive.pop(i)] = False
        else:
            i += 1
    return keep


def detect_extrema(x: TimeSeries, p: BeatDetectorParams = BeatDetectorParams(),
                   kind: str = SYSTOLIC_PEAK, reject: bool = True) -> ExtremaList:
    """Two-moving-average beat detector with a running offset level.

    For diastolic minima the signal is negated first. ``reject=False``
    returns the candidates before the interval rejection rule.
    """
    if kind not in (SYSTOLIC_PEAK, DIASTOLIC_MINIMUM):
        raise SignalError(f"unknown extremum kind {kind!r}")
    fs = x.rate_hz
    v = x.samples if kind == SYSTOLIC_PEAK else -x.samples
    sq = np.clip(v, 0.0, None) ** 2
    ma_event = _centered_mean(sq, p.w1_s, fs)
    ma_beat = _centered_mean(sq, p.w2_s, fs)
    offset = p.beta * _centered_mean(sq, p.offset_window_s, fs)
    above = ma_event > ma_beat + offset
    min_width = max(1, int(round(p.w1_s * fs)))
    idx = [a + int(np.argmax(v[a:b])) for a, b in _blocks(above) if b - a >= min_width]
    idx = _enforce_spacing(idx, v, int(np.ceil(MIN_SPACING_S * fs)))
    idx = np.asarray(idx, dtype=int)
    if reject and idx.size:
        idx = idx[reject_false_extrema(idx / fs)]
    if idx.size < 4:
        raise TooFewBeatsError(f"too few beats: {idx.size} extrema detected")
    return ExtremaList(idx, kind, fs, x.t0_s)


def ibi_momentary_rate(e: ExtremaList, rate_hz: Optional[float] = None) -> RateSeries:
    """60 / IBI at each interval midpoint; out-of-band intervals are dropped."""
    if len(e) < 2:
        raise TooFewBeatsError("need at least 2 extrema for an interval")
    fs = e.rate_hz if rate_hz is None else rate_hz
    t = e.t0_s + e.indices / fs
    dt = np.diff(t)
    bpm = 60.0 / dt
    ok = (bpm >= BPM_MIN) & (bpm <= BPM_MAX)
    mid = 0.5 * (t[1:] + t[:-1])
    return RateSeries(mid[ok], bpm[ok], "IBI", dt[ok])


def rate_ibi(x: TimeSeries, p: BeatDetectorParams = BeatDetectorParams(),
             upsample_hz: Optional[float] = IBI_RATE_HZ) -> RateSeries:
    """Systolic-peak IBI rates, after spline upsampling to ``upsample_hz``."""
    if upsample_hz and upsample_hz > x.rate_hz:
        x = resample_cubic_spline(x, upsample_hz)
    return ibi_momentary_rate(detect_extrema(x, p, SYSTOLIC_PEAK))


def _band_bins(freqs_bpm: np.ndarray, lo: float = BPM_MIN, hi: float = BPM_MAX) -> np.ndarray:
    return (freqs_bpm >= lo - 1e-9) & (freqs_bpm <= hi + 1e-9)


def rate_dft(x: TimeSeries, n_fft: int = DFT_POINTS) -> float:
    """Frequency of the largest in-band periodogram bin, in BPM (no interpolation)."""
    v = x.samples
    n = max(n_fft, v.size)
    if v.size < n_fft:
        log.warning("DFT epoch of %d samples zero-padded to %d", v.size, n_fft)
    power = np.abs(np.fft.rfft(v, n)) ** 2
    k = np.arange(power.size)
    bpm = 60.0 * k * x.rate_hz / n
    band = _band_bins(bpm)
    if not np.any(power[band] > 0):
        raise NoSpectralContentError("no spectral content")
    kk = k[band][np.argmax(power[band])]
    return 60.0 * kk * x.rate_hz / n


def burg(x: np.ndarray, order: int) -> tuple[np.ndarray, float]:
    """Burg estimate of AR coefficients ``a`` (a[0] = 1) and driving-noise power."""
    x = np.asarray(x, dtype=float)
    if order < 1:
        raise SignalError(f"AR order must be >= 1, got {order}")
    if x.size <= 2 * order:
        raise SignalError(f"epoch of {x.size} samples too short for AR order {order}")
    ef = x.copy()
    eb = x.copy()
    a = np.array([1.0])
    err = np.dot(x, x) / x.size
    for _ in range(order):
        f = ef[1:]
        b = eb[:-1]
        den = np.dot(f, f) + np.dot(b, b)
        if den <= 0:
            raise SignalError("singular Burg recursion: zero prediction-error energy")
        k = -2.0 * np.dot(f, b) / den
        ef = f + k * b
        eb = b + k * f
        a = np.concatenate([a, [0.0]])
        a = a + k * a[::-1]
        err *= 1.0 - k * k
    return a, err


def ar_psd(a: np.ndarray, noise: float, freqs_hz: np.ndarray, rate_hz: float) -> np.ndarray:
    w = 2 * np.pi * np.asarray(freqs_hz) / rate_hz
    A = np.exp(-1j * np.outer(w, np.arange(a.size))) @ a
    # a pole exactly on the grid gives an infinite (and correctly maximal) value
    with np.errstate(divide="ignore"):
        return noise / np.abs(A) ** 2


def rate_ar_burg(x: TimeSeries, order: int = AR_ORDER_PLAIN,
                 band: BandSpec = HR_BAND, step_hz: float = 0.01) -> float:
    """Peak of the Burg AR spectrum on a 0.01-Hz grid; ties go to the lower frequency."""
    v = x.samples - x.samples.mean()
    a, noise = burg(v, order)
    n = int(round((band.high_hz - band.low_hz) / step_hz))
    freqs = band.low_hz + step_hz * np.arange(n + 1)
    psd = ar_psd(a, noise, freqs, x.rate_hz)
    return 60.0 * freqs[int(np.argmax(psd))]


def rate_cwt(x: TimeSeries, grid: ScaleGrid = DEFAULT_GRID, band: BandSpec = HR_BAND,
             smooth_s: float = 1.0, pad_s: float = 5.0) -> RateSeries:
    """Momentary rate from the in-band ridge of the Morlet scalogram."""
    # mirror the ends so the circular transform does not wrap one edge onto the other
    n = len(x)
    pad = min(n - 1, int(round(pad_s * x.rate_hz)))
    padded = np.pad(x.samples, pad, mode="reflect")
    S = cwt_forward(TimeSeries(padded, x.rate_hz), grid)
    idx = grid.band_indices(band)
    power = S.power[idx][:, pad:pad + n]
    if not np.any(power > 0):
        raise NoSpectralContentError("no spectral content")
    bpm = 60.0 * grid.frequencies[idx][np.argmax(power, axis=0)]
    if smooth_s > 0:
        bpm = _centered_mean(bpm, smooth_s, x.rate_hz)
    return RateSeries(x.times, bpm, "CWT")


def epoch_average_rate(r: RateSeries,
                       windows: Sequence[tuple[float, float]]) -> list[Optional[float]]:
    """Mean rate per [start, end) window; ``None`` marks an epoch without rates.

    Interval rates are weighted by their overlap with the window, sampled
    rates count once per sample inside it.
    """
    out: list[Optional[float]] = []
    t = np.asarray(r.times_s, dtype=float)
    bpm = np.asarray(r.bpm, dtype=float)
    for start, end in windows:
        if r.durations_s is not None:
            d = np.asarray(r.durations_s, dtype=float)
            lo = np.maximum(t - d / 2, start)
            hi = np.minimum(t + d / 2, end)
            w = np.clip(hi - lo, 0.0, None)
        else:
            w = ((t >= start) & (t < end)).astype(float)
        if w.sum() <= 0:
            out.append(None)
        else:
            out.append(float(np.dot(w, bpm) / w.sum()))
    return out


def ppg_band_limit(ppg: TimeSeries, low_hz: float = 0.5, high_hz: float = 8.0) -> TimeSeries:
    """2nd-order zero-phase Butterworth band-pass applied to contact PPG before detection."""
    high = min(high_hz, 0.45 * ppg.rate_hz)
    sos = signal.butter(2, [low_hz, high], btype="bandpass", output="sos", fs=ppg.rate_hz)
    return ppg.with_samples(signal.sosfiltfilt(sos, ppg.samples))


def reference_rate_from_ppg(ppg: TimeSeries, p: BeatDetectorParams = BeatDetectorParams(),
                            spec: EpochSpec = EpochSpec(),
                            windows: Optional[Sequence[tuple[float, float]]] = None,
                            ) -> list[Optional[float]]:
    """Per-epoch reference rate from diastolic-minimum intervals of contact PPG."""
    if windows is None:
        windows = epoch_bounds(ppg, spec)
    e = detect_extrema(ppg_band_limit(ppg), p, DIASTOLIC_MINIMUM)
    return epoch_average_rate(ibi_momentary_rate(e), windows)
