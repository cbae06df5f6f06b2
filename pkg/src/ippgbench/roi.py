"""Region-of-interest selection, refinement and spatial averaging."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ColorSignal, EmptyROIError, SignalError

log = logging.getLogger(__name__)

WHOLE_FACE = "whole_face"
BELOW_EYES = "below_eyes"
ROI_MODES = (WHOLE_FACE, BELOW_EYES)

ROI_WIDTH_FRACTION = 0.8
BELOW_EYES_FRACTION = 0.45


@dataclass(frozen=True, eq=False)
class FrameRGB:
    """One decoded frame; ``pixels`` has shape (height, width, 3), uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise SignalError(f"frame must be (h, w, 3), got {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class FaceRect:
    x: int
    y: int
    w: int
    h: int

    def clamp(self, width: int, height: int) -> "FaceRect":
        x0, y0 = max(self.x, 0), max(self.y, 0)
        x1, y1 = min(self.x + self.w, width), min(self.y + self.h, height)
        if x1 <= x0 or y1 <= y0:
            raise SignalError(f"rectangle {self} lies outside the {width}x{height} frame")
        return FaceRect(x0, y0, x1 - x0, y1 - y0)

    def crop(self, frame: FrameRGB) -> np.ndarray:
        return frame.pixels[self.y:self.y + self.h, self.x:self.x + self.w]


@dataclass(frozen=True, eq=False)
class RoiMask:
    rect: FaceRect
    included: np.ndarray  # bool, shape (rect.h, rect.w)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.included))


@dataclass(frozen=True)
class SkinRangesHsv:
    hue_deg: tuple[float, float] = (0.0, 46.0)
    sat: tuple[float, float] = (23.0, 132.0)
    val: tuple[float, float] = (88.0, 255.0)

    def __post_init__(self):
        for lo, hi in (self.hue_deg, self.sat, self.val):
            if lo > hi:
                raise SignalError("HSV range low bound exceeds high bound")


def roi_rect(face: FaceRect, mode: str = WHOLE_FACE) -> FaceRect:
    if face.w <= 0 or face.h <= 0:
        raise SignalError(f"degenerate face rectangle {face}")
    if mode not in ROI_MODES:
        raise SignalError(f"unknown ROI mode {mode!r}")
    w = max(1, int(round(ROI_WIDTH_FRACTION * face.w)))
    x = face.x + (face.w - w) // 2
    if mode == WHOLE_FACE:
        return FaceRect(x, face.y, w, face.h)
    h = max(1, int(round(BELOW_EYES_FRACTION * face.h)))
    return FaceRect(x, face.y + face.h - h, w, h)


def rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hexcone conversion. Hue in degrees [0, 360), S and V on 0..255."""
    rgb = np.asarray(rgb, dtype=float)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    h = np.zeros_like(mx)
    rmax = (mx == r) & (delta > 0)
    gmax = (mx == g) & (delta > 0) & ~rmax
    bmax = (delta > 0) & ~rmax & ~gmax
    h[rmax] = np.mod((g - b)[rmax] / safe[rmax], 6.0)
    h[gmax] = (b - r)[gmax] / safe[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / safe[bmax] + 4.0
    h *= 60.0
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0) * 255.0
    return h, s, mx


def skin_mask(frame: FrameRGB, rect: FaceRect,
              ranges: SkinRangesHsv = SkinRangesHsv()) -> RoiMask:
    rect = rect.clamp(frame.width, frame.height)
    h, s, v = rgb_to_hsv(rect.crop(frame))
    inc = ((h >= ranges.hue_deg[0]) & (h <= ranges.hue_deg[1])
           & (s >= ranges.sat[0]) & (s <= ranges.sat[1])
           & (v >= ranges.val[0]) & (v <= ranges.val[1]))
    return RoiMask(rect, inc)


def full_mask(frame: FrameRGB, rect: FaceRect) -> RoiMask:
    rect = rect.clamp(frame.width, frame.height)
    return RoiMask(rect, np.ones((rect.h, rect.w), dtype=bool))


def reject_outliers(frame: FrameRGB, mask: RoiMask, gamma: float = 1.5) -> RoiMask:
    """Drop pixels farther than ``gamma`` standard deviations from the ROI mean.

    Statistics come from the input mask only (single pass). A channel with
    zero spread rejects nothing.
    """
    if mask.count == 0:
        raise EmptyROIError("empty ROI")
    px = mask.rect.crop(frame).astype(float)
    sel = px[mask.included]
    mean = sel.mean(axis=0)
    sigma = np.sqrt(((sel - mean) ** 2).mean(axis=0))
    dev = np.abs(px - mean)
    with np.errstate(invalid="ignore"):
        ok = (dev < gamma * sigma) | (sigma == 0)
    return RoiMask(mask.rect, mask.included & ok.all(axis=-1))


def spatial_average(frame: FrameRGB, mask: RoiMask) -> np.ndarray:
    if mask.count == 0:
        raise EmptyROIError("empty ROI")
    return mask.rect.crop(frame)[mask.included].astype(float).mean(axis=0)


def frame_average(frame: FrameRGB, face: FaceRect, mode: str = WHOLE_FACE,
                  ranges: Optional[SkinRangesHsv] = SkinRangesHsv(),
                  gamma: Optional[float] = 1.5) -> np.ndarray:
    """ROI choice, optional skin mask, optional outlier rejection, averaging."""
    rect = roi_rect(face, mode)
    mask = skin_mask(frame, rect, ranges) if ranges is not None else full_mask(frame, rect)
    if gamma is not None:
        mask = reject_outliers(frame, mask, gamma)
    return spatial_average(frame, mask)


def build_color_signal(frames: Sequence[FrameRGB], faces: Sequence[FaceRect],
                       mode: str = WHOLE_FACE,
                       ranges: Optional[SkinRangesHsv] = SkinRangesHsv(),
                       gamma: Optional[float] = 1.5,
                       rate_hz: float = 50.0) -> ColorSignal:
    """Raw color signal c0(t), one averaged (r, g, b) per frame.

    Pass ``ranges=None`` to skip skin masking and ``gamma=None`` to skip
    outlier rejection. A frame whose refined ROI is empty repeats the
    previous frame's average.
    """
    if len(frames) != len(faces):
        raise SignalError(f"{len(frames)} frames but {len(faces)} face rectangles")
    if len(frames) == 0:
        raise SignalError("no frames")
    out = np.empty((len(frames), 3))
    carried = 0
    for i, (frame, face) in enumerate(zip(frames, faces)):
        try:
            out[i] = frame_average(frame, face, mode, ranges, gamma)
        except EmptyROIError:
            if i == 0:
                raise EmptyROIError("empty ROI in the first frame") from None
            out[i] = out[i - 1]
            carried += 1
    if carried:
        log.warning("%d frame(s) had an empty ROI; previous average reused", carried)
    return ColorSignal.from_array(out, rate_hz)
