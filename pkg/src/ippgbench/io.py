"""On-disk trial layout: raw RGB video, face sidecar, contact PPG and exclusions.

Layout of a dataset directory::

    <data>/<participant>/<trial>/video.rgb    interleaved 8-bit RGB, frame after frame
    <data>/<participant>/<trial>/video.json   {"width", "height", "fps", "frame_count"}
    <data>/<participant>/<trial>/faces.txt    "frame_index x y w h" per line ("*" = every frame)
    <data>/<participant>/<trial>/ppg.txt      "rate_hz=<r>" header, then one sample per line
    <data>/exclude.txt                        optional, "<participant> <trial>" per line
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import TimeSeries, natural_key
from .pipeline import TrialData
from .roi import FaceRect

log = logging.getLogger(__name__)

VIDEO_FILE = "video.rgb"
DESCRIPTOR_FILE = "video.json"
FACES_FILE = "faces.txt"
PPG_FILE = "ppg.txt"
EXCLUDE_FILE = "exclude.txt"
DESCRIPTOR_KEYS = ("width", "height", "fps", "frame_count")


class IngestError(OSError):
    """Unreadable or inconsistent input files."""


def _descriptor_path(video: Path) -> Path:
    return video.with_suffix(".json")


def read_descriptor(path: os.PathLike) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestError(f"{path}: cannot read descriptor: {exc.strerror or exc}") from None
    try:
        meta = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from None
    if not isinstance(meta, dict):
        raise IngestError(f"{path}: descriptor must be a JSON object")
    missing = [k for k in DESCRIPTOR_KEYS if k not in meta]
    if missing:
        raise IngestError(f"{path}: descriptor lacks {', '.join(missing)}")
    for k in ("width", "height", "frame_count"):
        if not isinstance(meta[k], int) or meta[k] <= 0:
            raise IngestError(f"{path}: {k} must be a positive integer")
    if not isinstance(meta["fps"], (int, float)) or not meta["fps"] > 0:
        raise IngestError(f"{path}: fps must be positive")
    return meta


@dataclass
class Video:
    frames: np.ndarray  # uint8, (n, h, w, 3)
    fps: float


def ingest_frames(path: os.PathLike, descriptor: Optional[os.PathLike] = None) -> Video:
    """Decode a raw RGB stream using its JSON descriptor (same stem by default)."""
    path = Path(path)
    meta = read_descriptor(descriptor or _descriptor_path(path))
    h, w, n = meta["height"], meta["width"], meta["frame_count"]
    expected = n * h * w * 3
    try:
        actual = path.stat().st_size
    except OSError as exc:
        raise IngestError(f"{path}: cannot read video: {exc.strerror or exc}") from None
    if actual != expected:
        raise IngestError(f"{path}: expected {expected} bytes "
                          f"({n} frames of {w}x{h}), found {actual}")
    data = np.fromfile(path, dtype=np.uint8)
    return Video(data.reshape(n, h, w, 3), float(meta["fps"]))


def write_frames(path: os.PathLike, frames: np.ndarray, fps: float) -> None:
    path = Path(path)
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    if frames.ndim != 4 or frames.shape[3] != 3:
        raise ValueError(f"frames must be (n, h, w, 3), got {frames.shape}")
    n, h, w, _ = frames.shape
    frames.tofile(path)
    meta = {"width": w, "height": h, "fps": fps, "frame_count": n}
    _descriptor_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def ingest_ppg(path: os.PathLike) -> TimeSeries:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IngestError(f"{path}: cannot read PPG: {exc.strerror or exc}") from None
    if not lines or not lines[0].strip().lstrip("#").strip().startswith("rate_hz="):
        raise IngestError(f"{path}: missing 'rate_hz=<value>' header on line 1")
    try:
        rate = float(lines[0].strip().lstrip("#").strip()[len("rate_hz="):])
    except ValueError:
        raise IngestError(f"{path}:1: invalid rate") from None
    if not rate > 0:
        raise IngestError(f"{path}:1: rate must be positive")
    values = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise IngestError(f"{path}:{lineno}: not a number: {line.strip()!r}") from None
    if not values:
        raise IngestError(f"{path}: no samples")
    return TimeSeries(np.asarray(values), rate)


def write_ppg(path: os.PathLike, ppg: TimeSeries) -> None:
    body = "\n".join(repr(float(v)) for v in ppg.samples)
    Path(path).write_text(f"rate_hz={ppg.rate_hz!r}\n{body}\n")


def read_faces(path: os.PathLike, n_frames: int) -> list[FaceRect]:
    """Per-frame face rectangles; frames without a line reuse the previous one."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IngestError(f"{path}: cannot read faces: {exc.strerror or exc}") from None
    rects: list[Optional[FaceRect]] = [None] * n_frames
    static: Optional[FaceRect] = None
    for lineno, line in enumerate(lines, 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        if len(parts) != 5:
            raise IngestError(f"{path}:{lineno}: expected 'frame_index x y w h'")
        try:
            x, y, w, h = (int(v) for v in parts[1:])
            rect = FaceRect(x, y, w, h)
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        if parts[0] == "*":
            static = rect
            continue
        try:
            idx = int(parts[0])
        except ValueError:
            raise IngestError(f"{path}:{lineno}: bad frame index {parts[0]!r}") from None
        if not 0 <= idx < n_frames:
            raise IngestError(f"{path}:{lineno}: frame index {idx} outside 0..{n_frames - 1}")
        rects[idx] = rect
    prev = static
    out = []
    for i, r in enumerate(rects):
        r = r or prev
        if r is None:
            raise IngestError(f"{path}: no face rectangle for frame {i}")
        out.append(r)
        prev = r
    return out


def write_faces(path: os.PathLike, faces: Sequence[FaceRect]) -> None:
    if faces and all(f == faces[0] for f in faces):
        f = faces[0]
        Path(path).write_text(f"* {f.x} {f.y} {f.w} {f.h}\n")
        return
    lines = [f"{i} {f.x} {f.y} {f.w} {f.h}" for i, f in enumerate(faces)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_exclusions(path: os.PathLike) -> set[tuple[str, str]]:
    """``P4 T17`` style lines naming trials to skip."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IngestError(f"{path}: cannot read exclusions: {exc.strerror or exc}") from None
    out = set()
    for lineno, line in enumerate(lines, 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        if len(parts) != 2:
            raise IngestError(f"{path}:{lineno}: expected '<participant> <trial>'")
        out.add((parts[0], parts[1]))
    return out


@dataclass(frozen=True)
class TrialRecord:
    """A trial on disk; calling it loads a :class:`TrialData`."""

    participant_id: str
    trial_id: str
    directory: Path
    excluded: bool = False

    @property
    def video_path(self) -> Path:
        return self.directory / VIDEO_FILE

    @property
    def faces_path(self) -> Path:
        return self.directory / FACES_FILE

    @property
    def ppg_path(self) -> Path:
        return self.directory / PPG_FILE

    def __call__(self) -> TrialData:
        video = ingest_frames(self.video_path, self.directory / DESCRIPTOR_FILE)
        faces = read_faces(self.faces_path, len(video.frames))
        return TrialData(self.participant_id, self.trial_id, video.frames, faces,
                         ingest_ppg(self.ppg_path), video.fps)


def discover_trials(data_dir: os.PathLike,
                    exclude_file: Optional[os.PathLike] = None) -> list[TrialRecord]:
    """All ``<participant>/<trial>`` directories holding a video, naturally sorted."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise IngestError(f"{data_dir}: not a directory")
    if exclude_file is None and (data_dir / EXCLUDE_FILE).exists():
        exclude_file = data_dir / EXCLUDE_FILE
    excluded = read_exclusions(exclude_file) if exclude_file else set()
    records = []
    for pdir in sorted((p for p in data_dir.iterdir() if p.is_dir()),
                       key=lambda p: natural_key(p.name)):
        for tdir in sorted((t for t in pdir.iterdir() if t.is_dir()),
                           key=lambda t: natural_key(t.name)):
            if (tdir / VIDEO_FILE).exists():
                records.append(TrialRecord(pdir.name, tdir.name, tdir,
                                           (pdir.name, tdir.name) in excluded))
    return records


def write_trial(directory: os.PathLike, frames: np.ndarray, fps: float,
                faces: Sequence[FaceRect], ppg: TimeSeries) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_frames(directory / VIDEO_FILE, frames, fps)
    write_faces(directory / FACES_FILE, faces)
    write_ppg(directory / PPG_FILE, ppg)
    return directory
