"""Shared signal containers, epoching and spline resampling."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline


class SignalError(ValueError):
    """Raised when a signal violates an operation's preconditions."""


class EmptyROIError(SignalError):
    pass


class TooFewBeatsError(SignalError):
    pass


class NoSpectralContentError(SignalError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled real signal.

    ``samples[i]`` is taken at ``t0_s + i / rate_hz``.
    """

    samples: np.ndarray
    rate_hz: float
    t0_s: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1:
            raise SignalError(f"samples must be 1-D, got shape {arr.shape}")
        if not self.rate_hz > 0:
            raise SignalError(f"rate_hz must be positive, got {self.rate_hz}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "rate_hz", float(self.rate_hz))
        object.__setattr__(self, "t0_s", float(self.t0_s))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.rate_hz

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.samples.size) / self.rate_hz

    def with_samples(self, samples) -> "TimeSeries":
        return TimeSeries(samples, self.rate_hz, self.t0_s)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.samples)))


@dataclass(frozen=True, eq=False)
class ColorSignal:
    """Spatially averaged (r, g, b) traces sharing one time base."""

    r: TimeSeries
    g: TimeSeries
    b: TimeSeries

    def __post_init__(self):
        n = len(self.r)
        if n == 0:
            raise SignalError("color signal is empty")
        for ch in (self.g, self.b):
            if len(ch) != n or ch.rate_hz != self.r.rate_hz or ch.t0_s != self.r.t0_s:
                raise SignalError("color channels must share length, rate and t0")

    @classmethod
    def from_array(cls, rgb, rate_hz: float, t0_s: float = 0.0) -> "ColorSignal":
        """Build from an (N, 3) array of r, g, b columns."""
        rgb = np.asarray(rgb, dtype=float)
        if rgb.ndim != 2 or rgb.shape[1] != 3:
            raise SignalError(f"expected (N, 3) array, got {rgb.shape}")
        return cls(*(TimeSeries(rgb[:, k], rate_hz, t0_s) for k in range(3)))

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.r.samples, self.g.samples, self.b.samples])

    def map(self, fn) -> "ColorSignal":
        return ColorSignal(fn(self.r), fn(self.g), fn(self.b))

    @property
    def rate_hz(self) -> float:
        return self.r.rate_hz

    def __len__(self) -> int:
        return len(self.r)


@dataclass(frozen=True, eq=False)
class IppgSignal:
    series: TimeSeries
    provenance: Optional[object] = None

    @property
    def rate_hz(self) -> float:
        return self.series.rate_hz

    def with_series(self, series: TimeSeries) -> "IppgSignal":
        return IppgSignal(series, self.provenance)

    def __len__(self) -> int:
        return len(self.series)


@dataclass(frozen=True)
class EpochSpec:
    length_s: float = 20.48
    overlap_s: float = 9.88
    count_per_trial: int = 5

    def __post_init__(self):
        if not 0 <= self.overlap_s < self.length_s:
            raise SignalError("epoch overlap must satisfy 0 <= overlap < length")
        if self.count_per_trial < 1:
            raise SignalError("count_per_trial must be >= 1")

    @property
    def hop_s(self) -> float:
        return self.length_s - self.overlap_s


def epoch_starts(n_samples: int, rate_hz: float, spec: EpochSpec,
                 trial_bound: bool = True) -> list[int]:
    """Start indices of the epoch windows for a signal of ``n_samples``.

    Windows are placed every ``hop`` seconds; if samples remain after the
    last window that fits, one more window is added flush with the end.
    """
    win = int(round(spec.length_s * rate_hz))
    hop = spec.hop_s * rate_hz
    if n_samples < win:
        raise SignalError(
            f"signal too short: {n_samples / rate_hz:.3f} s < epoch {spec.length_s} s")
    starts = []
    k = 0
    while True:
        s = int(round(k * hop))
        if s + win > n_samples:
            break
        starts.append(s)
        k += 1
    if starts[-1] + win < n_samples:
        starts.append(n_samples - win)
    if trial_bound:
        starts = starts[: spec.count_per_trial]
    return starts


def segment_epochs(x: TimeSeries, spec: EpochSpec = EpochSpec(),
                   trial_bound: bool = True) -> list[TimeSeries]:
    win = int(round(spec.length_s * x.rate_hz))
    return [
        TimeSeries(x.samples[s:s + win], x.rate_hz, x.t0_s + s / x.rate_hz)
        for s in epoch_starts(len(x), x.rate_hz, spec, trial_bound)
    ]


def epoch_bounds(x: TimeSeries, spec: EpochSpec = EpochSpec(),
                 trial_bound: bool = True) -> list[tuple[float, float]]:
    """(start_s, end_s) of each epoch window; end is exclusive."""
    win = int(round(spec.length_s * x.rate_hz))
    return [
        (x.t0_s + s / x.rate_hz, x.t0_s + (s + win) / x.rate_hz)
        for s in epoch_starts(len(x), x.rate_hz, spec, trial_bound)
    ]


def spline_at(x: TimeSeries, times) -> np.ndarray:
    """Evaluate the natural cubic spline through ``x`` at arbitrary times."""
    if len(x) < 4:
        raise SignalError("cubic spline needs at least 4 samples")
    cs = CubicSpline(x.times, x.samples, bc_type="natural")
    return cs(np.asarray(times, dtype=float))


def resample_cubic_spline(x: TimeSeries, new_rate_hz: float) -> TimeSeries:
    if not new_rate_hz > 0:
        raise SignalError("new_rate_hz must be positive")
    if len(x) < 4:
        raise SignalError("cubic spline needs at least 4 samples")
    span = (len(x) - 1) / x.rate_hz
    # tolerance keeps the last knot when span * rate is an integer
    n_new = int(np.floor(span * new_rate_hz + 1e-9)) + 1
    times = x.t0_s + np.arange(n_new) / new_rate_hz
    return TimeSeries(spline_at(x, times), new_rate_hz, x.t0_s)


def natural_key(text: str) -> tuple:
    """Sort key that orders ``P2`` before ``P10``."""
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", text))
