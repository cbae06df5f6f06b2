"""Combining refined color signals into a raw iPPG trace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core import ColorSignal, IppgSignal, SignalError, TimeSeries
from .filters import HR_BAND, BandSpec
from .jade import jade

METHODS = ("G", "GRD", "aGRD", "ICA", "CHROM", "POS")
TUNING_WINDOW_S = 1.6


@dataclass(frozen=True)
class ExtractionMethod:
    kind: str = "POS"
    window_s: float = TUNING_WINDOW_S

    def __post_init__(self):
        if self.kind not in METHODS:
            raise SignalError(f"unknown extraction method {self.kind!r}")
        if self.kind in ("CHROM", "POS") and not self.window_s > 0:
            raise SignalError("tuning window must be positive")


def _trailing_sum(v: np.ndarray, L: int) -> np.ndarray:
    return signal.lfilter(np.ones(L), 1.0, v)


def running_std(x: TimeSeries, L: int) -> TimeSeries:
    """Trailing L-point standard deviation from running sums.

    sigma^2 = sum(x^2) / (n - 1) - sum(x)^2 / (n (n - 1)) over the last n
    samples, n = min(t + 1, L). The first output reuses the two-sample
    window ending at t = 1.
    """
    if L < 2:
        raise SignalError(f"running std needs L >= 2, got {L}")
    v = x.samples
    N = v.size
    if N < 2:
        return x.with_samples(np.zeros(N))
    # shifting by a constant leaves the variance unchanged but tames cancellation
    v = v - v.mean()
    s1 = _trailing_sum(v, L)
    s2 = _trailing_sum(v * v, L)
    n = np.minimum(np.arange(1, N + 1), L).astype(float)
    n[0] = 2.0
    s1[0], s2[0] = s1[1], s2[1]
    var = s2 / (n - 1) - s1 * s1 / (n * (n - 1))
    return x.with_samples(np.sqrt(np.clip(var, 0.0, None)))


def _tuned_difference(x1: np.ndarray, x2: np.ndarray, rate_hz: float,
                      window_s: float, sign: float) -> np.ndarray:
    L = max(2, int(round(window_s * rate_hz)))
    s1 = running_std(TimeSeries(x1, rate_hz), L).samples
    s2 = running_std(TimeSeries(x2, rate_hz), L).samples
    ratio = np.divide(s1, s2, out=np.zeros_like(s1), where=s2 > 0)
    return x1 + sign * ratio * x2


def _ippg(c: ColorSignal, values: np.ndarray, method: str) -> IppgSignal:
    return IppgSignal(TimeSeries(values, c.rate_hz, c.r.t0_s), method)


def extract_g(c: ColorSignal) -> IppgSignal:
    return _ippg(c, c.g.samples.copy(), "G")


def extract_grd(c: ColorSignal) -> IppgSignal:
    return _ippg(c, c.g.samples - c.r.samples, "GRD")


def extract_agrd(c: ColorSignal, c0: ColorSignal) -> IppgSignal:
    """Adaptive green-red difference; ``c0`` is the raw, unfiltered signal."""
    if len(c0) != len(c):
        raise SignalError("raw and refined color signals differ in length")
    r0, g0 = c0.r.samples, c0.g.samples
    if np.any(g0 == 0) or np.any(r0 == 0):
        raise SignalError("zero raw channel")
    norm = np.linalg.norm(c0.as_array(), axis=1)
    return _ippg(c, norm * (c.g.samples / g0 - c.r.samples / r0), "aGRD")


def extract_chrom(c: ColorSignal, window_s: float = TUNING_WINDOW_S) -> IppgSignal:
    r, g, b = c.r.samples, c.g.samples, c.b.samples
    x1 = 0.77 * r - 0.51 * g
    x2 = 0.77 * r + 0.51 * g - 0.77 * b
    return _ippg(c, _tuned_difference(x1, x2, c.rate_hz, window_s, -1.0), "CHROM")


def extract_pos(c: ColorSignal, window_s: float = TUNING_WINDOW_S) -> IppgSignal:
    r, g, b = c.r.samples, c.g.samples, c.b.samples
    x1 = g - b
    x2 = g + b - 2.0 * r
    return _ippg(c, _tuned_difference(x1, x2, c.rate_hz, window_s, +1.0), "POS")


def component_scores(S: np.ndarray, rate_hz: float, band: BandSpec = HR_BAND) -> np.ndarray:
    """Peak in-band periodogram bin over total power, per row of ``S``."""
    S = S - S.mean(axis=1, keepdims=True)
    power = np.abs(np.fft.rfft(S, axis=1)) ** 2
    freqs = np.fft.rfftfreq(S.shape[1], 1.0 / rate_hz)
    inband = (freqs >= band.low_hz) & (freqs <= band.high_hz)
    total = power.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = power[:, inband].max(axis=1) / total
    return np.nan_to_num(scores)


def extract_ica(c: ColorSignal, band: BandSpec = HR_BAND) -> IppgSignal:
    """JADE on z-scored channels; keep the component with the sharpest in-band peak."""
    if len(c) < 3 * c.rate_hz:
        raise SignalError("ICA needs at least 3 s of samples")
    X = c.as_array().T
    sd = X.std(axis=1, keepdims=True)
    if np.any(sd == 0):
        raise SignalError("degenerate channels")
    Xz = (X - X.mean(axis=1, keepdims=True)) / sd
    _, S = jade(Xz)
    best = int(np.argmax(component_scores(S, c.rate_hz, band)))
    y = S[best]
    if np.dot(y, Xz[1]) < 0:
        y = -y
    return _ippg(c, y, "ICA")


def extract(c: ColorSignal, method: ExtractionMethod, c0: ColorSignal | None = None) -> IppgSignal:
    kind = method.kind
    if kind == "G":
        return extract_g(c)
    if kind == "GRD":
        return extract_grd(c)
    if kind == "aGRD":
        if c0 is None:
            raise SignalError("aGRD needs the raw color signal")
        return extract_agrd(c, c0)
    if kind == "ICA":
        return extract_ica(c)
    if kind == "CHROM":
        return extract_chrom(c, method.window_s)
    return extract_pos(c, method.window_s)
