"""Detrending, moving-average and band-pass filters for color and iPPG signals."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import signal
from scipy.linalg import solveh_banded

from .core import ColorSignal, IppgSignal, SignalError, TimeSeries, spline_at

DETRENDS = ("none", "mcas", "spa")
BANDPASSES = ("none", "fir255_hamming", "iir_butter5")
MA_CHOICES = (0, 3, 6, 9, 12)

FIR_TAPS = 256
IIR_ORDER = 5
SPA_LAMBDA = 300.0


@dataclass(frozen=True)
class BandSpec:
    low_hz: float = 0.65
    high_hz: float = 4.0

    def check(self, rate_hz: float) -> None:
        if not 0 < self.low_hz < self.high_hz < rate_hz / 2:
            raise SignalError(
                f"band [{self.low_hz}, {self.high_hz}] Hz invalid at {rate_hz} Hz sampling")


HR_BAND = BandSpec()


@dataclass(frozen=True)
class FilterChoice:
    detrend: str = "none"
    ma_points: int = 0
    bandpass: str = "none"

    def __post_init__(self):
        if self.detrend not in DETRENDS:
            raise SignalError(f"unknown detrend {self.detrend!r}")
        if self.bandpass not in BANDPASSES:
            raise SignalError(f"unknown band-pass {self.bandpass!r}")
        if self.ma_points < 0:
            raise SignalError("ma_points must be >= 0")

    def check(self, rate_hz: float) -> None:
        # MA nulls sit at n * rate / M; keep the first one above 4 Hz
        if self.ma_points and not self.ma_points < rate_hz / 4:
            raise SignalError(
                f"MA length {self.ma_points} must be below rate/4 = {rate_hz / 4:g}")

    @property
    def is_identity(self) -> bool:
        return self.detrend == "none" and self.ma_points == 0 and self.bandpass == "none"


def _trailing_mean(v: np.ndarray, L: int) -> np.ndarray:
    sums = signal.lfilter(np.ones(L), 1.0, v)
    counts = np.minimum(np.arange(1, v.size + 1), L)
    return sums / counts


def running_mean(x: TimeSeries, L: int) -> TimeSeries:
    """Trailing L-point mean; the first L-1 outputs average the available prefix."""
    if L < 1:
        raise SignalError(f"window length must be >= 1, got {L}")
    return x.with_samples(_trailing_mean(x.samples, int(L)))


def mcas(x: TimeSeries, L_seconds: float = 1.0) -> TimeSeries:
    """Mean-centering and scaling: (x - m) / m with m the 1-s running mean."""
    L = max(1, int(round(L_seconds * x.rate_hz)))
    m = _trailing_mean(x.samples, L)
    if np.any(m == 0):
        raise SignalError("zero baseline")
    return x.with_samples((x.samples - m) / m)


def spa_trend(x: TimeSeries, lam: float = SPA_LAMBDA) -> np.ndarray:
    """Solve (I + lam^2 D2'D2) z = x for the smoothness-priors trend z."""
    n = len(x)
    if n < 3:
        raise SignalError("SPA detrending needs at least 3 samples")
    # D2'D2 is pentadiagonal; build its upper bands from the rows [1, -2, 1]
    diag0 = np.zeros(n)
    diag1 = np.zeros(n - 1)
    diag2 = np.zeros(n - 2)
    coef = np.array([1.0, -2.0, 1.0])
    for a in range(3):
        diag0[a:n - 2 + a] += coef[a] ** 2
        for b in range(a + 1, 3):
            if b - a == 1:
                diag1[a:n - 2 + a] += coef[a] * coef[b]
            else:
                diag2[a:n - 2 + a] += coef[a] * coef[b]
    lam2 = float(lam) ** 2
    ab = np.zeros((3, n))
    ab[0, 2:] = lam2 * diag2
    ab[1, 1:] = lam2 * diag1
    ab[2, :] = 1.0 + lam2 * diag0
    return solveh_banded(ab, x.samples)


def spa_detrend(x: TimeSeries, lam: float = SPA_LAMBDA) -> TimeSeries:
    return x.with_samples(x.samples - spa_trend(x, lam))


def moving_average_filter(x: TimeSeries, M: int) -> TimeSeries:
    if M < 1:
        raise SignalError(f"MA length must be >= 1, got {M}")
    return running_mean(x, M)


@lru_cache(maxsize=32)
def fir_taps(rate_hz: float, low_hz: float, high_hz: float,
             numtaps: int = FIR_TAPS) -> np.ndarray:
    return signal.firwin(numtaps, [low_hz, high_hz], pass_zero=False,
                         window="hamming", fs=rate_hz)


def fir_bandpass(x: TimeSeries, band: BandSpec = HR_BAND) -> TimeSeries:
    """Order-255 Hamming-window FIR band-pass with its group delay removed.

    The full convolution is delayed by 127.5 samples; the aligned output is
    read off a cubic spline through it at half-sample offsets.
    """
    band.check(x.rate_hz)
    h = fir_taps(x.rate_hz, band.low_hz, band.high_hz)
    if len(x) <= h.size:
        raise SignalError(f"signal of {len(x)} samples is shorter than the {h.size}-tap filter")
    full = np.convolve(x.samples, h)
    delay = (h.size - 1) / 2.0
    delayed = TimeSeries(full, x.rate_hz, x.t0_s)
    return x.with_samples(spline_at(delayed, x.times + delay / x.rate_hz))


@lru_cache(maxsize=32)
def iir_sos(rate_hz: float, low_hz: float, high_hz: float,
            order: int = IIR_ORDER) -> np.ndarray:
    return signal.butter(order, [low_hz, high_hz], btype="bandpass",
                         output="sos", fs=rate_hz)


def iir_bandpass(x: TimeSeries, band: BandSpec = HR_BAND) -> TimeSeries:
    """5th-order Butterworth band-pass, applied forward and backward."""
    try:
        band.check(x.rate_hz)
    except SignalError as exc:
        raise SignalError(f"unstable IIR design: {exc}") from None
    if len(x) <= 100:
        raise SignalError("IIR band-pass needs more than 100 samples")
    sos = iir_sos(x.rate_hz, band.low_hz, band.high_hz)
    y = signal.sosfiltfilt(sos, x.samples)
    if not np.all(np.isfinite(y)):
        raise SignalError("unstable IIR design: non-finite output")
    return x.with_samples(y)


def filter_series(x: TimeSeries, choice: FilterChoice,
                  band: BandSpec = HR_BAND) -> TimeSeries:
    """detrend -> moving average -> band-pass on one series."""
    choice.check(x.rate_hz)
    if choice.detrend == "mcas":
        x = mcas(x)
    elif choice.detrend == "spa":
        x = spa_detrend(x)
    if choice.ma_points:
        x = moving_average_filter(x, choice.ma_points)
    if choice.bandpass == "fir255_hamming":
        x = fir_bandpass(x, band)
    elif choice.bandpass == "iir_butter5":
        x = iir_bandpass(x, band)
    return x


Filterable = Union[ColorSignal, IppgSignal, TimeSeries]


def apply_filter_chain(x: Filterable, choice: FilterChoice,
                       band: BandSpec = HR_BAND) -> Filterable:
    if isinstance(x, ColorSignal):
        return x.map(lambda ch: filter_series(ch, choice, band))
    if isinstance(x, IppgSignal):
        return x.with_series(filter_series(x.series, choice, band))
    return filter_series(x, choice, band)
