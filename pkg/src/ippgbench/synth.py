"""Synthetic facial-video trials with a shared ground-truth beat train."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .core import SignalError, TimeSeries
from .roi import FaceRect, FrameRGB

# blood-volume pulse signature (relative r, g, b modulation strengths)
PBV = np.array([0.33, 0.77, 0.53])
SKIN_RGB = (180.0, 120.0, 100.0)
BACKGROUND_RGB = (60.0, 80.0, 140.0)
CABLE_RGB = (0.0, 0.0, 255.0)

BpmProfile = Union[float, tuple[float, float], Callable[[np.ndarray], np.ndarray]]


def bpm_function(profile: BpmProfile, duration_s: float) -> Callable[[np.ndarray], np.ndarray]:
    """Rate in BPM as a function of time: constant, linear ramp (start, end) or callable."""
    if callable(profile):
        return profile
    if isinstance(profile, tuple):
        start, end = profile
        return lambda t: start + (end - start) * np.clip(np.asarray(t) / duration_s, 0, 1)
    return lambda t: np.full(np.shape(t), float(profile))


def parse_bpm_profile(text: str) -> BpmProfile:
    """``"72"`` for a constant rate, ``"60:90"`` for a linear ramp."""
    try:
        values = tuple(float(v) for v in text.split(":", 1))
    except ValueError:
        raise SignalError(f"bad BPM profile {text!r}; use '72' or '60:90'") from None
    if not all(40.0 <= v <= 240.0 for v in values):
        raise SignalError(f"BPM profile {text!r} outside 40..240")
    return values if len(values) == 2 else values[0]


def _raw_shape(ph: np.ndarray) -> np.ndarray:
    sys = (np.exp(-0.5 * ((ph - 0.2) / 0.07) ** 2)
           + np.exp(-0.5 * ((ph - 1.2) / 0.07) ** 2))
    dic = 0.4 * np.exp(-0.5 * ((ph - 0.5) / 0.09) ** 2)
    rise = np.clip(ph / 0.1, 0.0, 1.0)
    rise = rise * rise * (3 - 2 * rise)
    # diastolic run-off that ends in a sharp foot at phase 0
    return sys + dic + 0.5 * (1.0 - ph) * rise


_CYCLE = _raw_shape(np.linspace(0.0, 1.0, 4096, endpoint=False))
_MEAN, _PTP = _CYCLE.mean(), np.ptp(_CYCLE)
SYSTOLIC_PHASE = float(np.argmax(_CYCLE) / _CYCLE.size)


def pulse_shape(phase: np.ndarray) -> np.ndarray:
    """PPG-like waveform: foot (minimum) at integer phase, systolic peak shortly after.

    Zero mean and unit peak-to-peak over a cycle.
    """
    return (_raw_shape(np.mod(phase, 1.0)) - _MEAN) / _PTP


@dataclass
class SynthParams:
    bpm: BpmProfile = 72.0
    duration_s: float = 63.0
    fps: float = 50.0
    width: int = 64
    height: int = 64
    noise_sigma: float = 2.0
    texture: float = 0.05
    pulse_amplitude: float = 0.006
    trend_amplitude: float = 0.02
    artifact_amplitude: float = 0.0
    cable: bool = False
    ppg_rate_hz: float = 128.0
    ppg_amplitude_jitter: float = 0.0
    seed: int = 0


@dataclass
class SyntheticTrial:
    frames: np.ndarray  # uint8, (n_frames, height, width, 3)
    faces: list[FaceRect]
    ppg: TimeSeries
    beat_times: np.ndarray
    fps: float
    bpm_at: Callable[[np.ndarray], np.ndarray]
    face: FaceRect

    def frame_list(self) -> list[FrameRGB]:
        return [FrameRGB(f) for f in self.frames]

    def mean_bpm(self, start_s: float, end_s: float) -> float:
        t = np.linspace(start_s, end_s, 2001)
        return float(np.mean(self.bpm_at(t)))


def _phase(bpm_at, t: np.ndarray) -> np.ndarray:
    f = bpm_at(t) / 60.0
    dt = np.diff(t, prepend=t[0])
    return np.cumsum(0.5 * (f + np.concatenate([[f[0]], f[:-1]])) * dt)


def _beat_times(bpm_at, duration_s: float, fine_hz: float = 2000.0) -> np.ndarray:
    t = np.arange(0, duration_s + 1.0 / fine_hz, 1.0 / fine_hz)
    ph = _phase(bpm_at, t)
    k = np.arange(1, int(np.floor(ph[-1])) + 1)
    return np.interp(k, ph, t)


def _band_limited_artifact(t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    freqs = rng.uniform(0.7, 3.0, size=4)
    phases = rng.uniform(0, 2 * np.pi, size=4)
    a = np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]).sum(axis=0)
    return a / a.std()


def face_rect_for(width: int, height: int) -> FaceRect:
    return FaceRect(int(round(0.2 * width)), int(round(0.1 * height)),
                    int(round(0.6 * width)), int(round(0.8 * height)))


def synthesize_trial(params: SynthParams = SynthParams(),
                     chunk: int = 256) -> SyntheticTrial:
    """Generate frames, static face rectangles and a contact PPG sharing beat times.

    Pixels get a static brightness texture. Skin pixels carry a pulsatile
    modulation along the blood-volume signature (strongest in green). All
    pixels share an intensity trend and an optional in-band common-mode
    artifact; every pixel gets Gaussian noise.
    """
    rng = np.random.default_rng(params.seed)
    bpm_at = bpm_function(params.bpm, params.duration_s)
    n = int(round(params.duration_s * params.fps))
    t = np.arange(n) / params.fps
    phase = _phase(bpm_at, t)
    pulse = pulse_shape(phase)

    trend_phase = rng.uniform(0, 2 * np.pi)
    drift = rng.uniform(-1, 1)
    trend = params.trend_amplitude * (np.sin(2 * np.pi * 0.03 * t + trend_phase)
                                      + drift * t / params.duration_s)
    artifact = np.zeros(n)
    if params.artifact_amplitude:
        artifact = params.artifact_amplitude * _band_limited_artifact(t, rng)
    intensity = 1.0 + trend + artifact

    H, W = params.height, params.width
    face = face_rect_for(W, H)
    base = np.empty((H, W, 3))
    base[:] = BACKGROUND_RGB
    skin = np.zeros((H, W), dtype=bool)
    skin[face.y:face.y + face.h, face.x:face.x + face.w] = True
    base[skin] = SKIN_RGB
    # static brightness texture; keeps hue and saturation inside skin ranges
    base *= 1.0 + params.texture * np.clip(rng.normal(size=(H, W, 1)), -3, 3)
    if params.cable:
        cx = face.x + face.w // 3
        cable = np.zeros((H, W), dtype=bool)
        cable[:, cx:cx + max(2, face.w // 8)] = True
        base[cable] = CABLE_RGB
        skin &= ~cable
    pulsatile = skin[..., None] * base * PBV  # per-pixel modulation direction

    frames = np.empty((n, H, W, 3), dtype=np.uint8)
    for s in range(0, n, chunk):
        sl = slice(s, min(n, s + chunk))
        m = sl.stop - sl.start
        img = (base[None] * intensity[sl, None, None, None]
               + pulsatile[None] * (params.pulse_amplitude * pulse[sl])[:, None, None, None]
               * intensity[sl, None, None, None])
        img += rng.normal(0.0, params.noise_sigma, size=(m, H, W, 3))
        frames[sl] = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    beats = _beat_times(bpm_at, params.duration_s)
    n_ppg = int(round(params.duration_s * params.ppg_rate_hz))
    tp = np.arange(n_ppg) / params.ppg_rate_hz
    ph_ppg = _phase(bpm_at, tp)
    amp = np.ones(int(np.ceil(ph_ppg[-1])) + 2)
    if params.ppg_amplitude_jitter:
        amp = 1.0 + params.ppg_amplitude_jitter * rng.uniform(-1, 1, size=amp.size)
    ppg = (amp[np.floor(ph_ppg).astype(int)] * pulse_shape(ph_ppg)
           + 0.2 * np.sin(2 * np.pi * 0.1 * tp + rng.uniform(0, 2 * np.pi))
           + 0.01 * rng.normal(size=n_ppg))
    return SyntheticTrial(frames, [face] * n, TimeSeries(ppg, params.ppg_rate_hz),
                          beats, params.fps, bpm_at, face)
