import json

import numpy as np
import pytest

from ippgbench.core import TimeSeries
from ippgbench.io import (IngestError, discover_trials, ingest_frames, ingest_ppg, read_descriptor,
                          read_exclusions, read_faces, write_faces, write_frames, write_ppg,
                          write_trial)
from ippgbench.roi import FaceRect
from ippgbench.pipeline import color_signal_for, recommended_spec


def descriptor(path, **kw):
    meta = {"width": 2, "height": 2, "fps": 50, "frame_count": 2, **kw}
    path.write_text(json.dumps(meta))


def test_two_frame_stream(tmp_path):
    (tmp_path / "video.rgb").write_bytes(bytes(range(24)))
    descriptor(tmp_path / "video.json")
    v = ingest_frames(tmp_path / "video.rgb")
    assert v.frames.shape == (2, 2, 2, 3) and v.fps == 50.0
    np.testing.assert_array_equal(v.frames[0, 0, 1], [3, 4, 5])
    np.testing.assert_array_equal(v.frames[1, 1, 1], [21, 22, 23])


def test_truncated_stream(tmp_path):
    (tmp_path / "video.rgb").write_bytes(bytes(20))
    descriptor(tmp_path / "video.json")
    with pytest.raises(IngestError, match="expected 24 bytes .* found 20"):
        ingest_frames(tmp_path / "video.rgb")


@pytest.mark.parametrize("text, msg", [
    ('{"width": 2, ', "byte offset 13"), ('[1, 2]', "JSON object"),
    ('{"width": 2}', "lacks height, fps, frame_count"),
    ('{"width": 2, "height": 0, "fps": 50, "frame_count": 1}', "height"),
    ('{"width": 2, "height": 2, "fps": -1, "frame_count": 1}', "fps"),
])
def test_bad_descriptor(tmp_path, text, msg):
    p = tmp_path / "video.json"
    p.write_text(text)
    with pytest.raises(IngestError, match=msg):
        read_descriptor(p)


def test_missing_files(tmp_path):
    with pytest.raises(IngestError):
        read_descriptor(tmp_path / "nope.json")
    descriptor(tmp_path / "video.json")
    with pytest.raises(IngestError, match="cannot read video"):
        ingest_frames(tmp_path / "video.rgb")


def test_frames_round_trip_and_rate(tmp_path):
    frames = np.random.default_rng(0).integers(0, 256, size=(30, 8, 6, 3), dtype=np.uint8)
    write_frames(tmp_path / "v.rgb", frames, 50.0)
    v = ingest_frames(tmp_path / "v.rgb")
    np.testing.assert_array_equal(v.frames, frames)
    meta = read_descriptor(tmp_path / "v.json")
    assert meta == {"width": 6, "height": 8, "fps": 50.0, "frame_count": 30}


def test_ppg_three_lines(tmp_path):
    p = tmp_path / "ppg.txt"
    p.write_text("rate_hz=128\n0.1\n0.2\n-0.3\n")
    x = ingest_ppg(p)
    assert len(x) == 3 and x.rate_hz == 128.0
    np.testing.assert_array_equal(x.samples, [0.1, 0.2, -0.3])
    p.write_text("# rate_hz=64\n1\n\n2\n")
    assert len(ingest_ppg(p)) == 2


@pytest.mark.parametrize("text, msg", [
    ("0.1\n0.2\n", "header"), ("rate_hz=abc\n1\n", "invalid rate"),
    ("rate_hz=0\n1\n", "positive"), ("rate_hz=128\n1\nx\n", r":3: not a number"),
    ("rate_hz=128\n", "no samples"), ("", "header"),
])
def test_ppg_errors(tmp_path, text, msg):
    p = tmp_path / "ppg.txt"
    p.write_text(text)
    with pytest.raises(IngestError, match=msg):
        ingest_ppg(p)


def test_ppg_round_trip(tmp_path):
    x = TimeSeries(np.random.default_rng(1).normal(size=500), 128.0)
    write_ppg(tmp_path / "ppg.txt", x)
    y = ingest_ppg(tmp_path / "ppg.txt")
    np.testing.assert_array_equal(y.samples, x.samples)
    assert y.rate_hz == x.rate_hz


def test_faces_static_and_forward_fill(tmp_path):
    p = tmp_path / "faces.txt"
    p.write_text("* 1 2 3 4\n2 5 6 7 8  # moved\n\n")
    faces = read_faces(p, 4)
    assert faces == [FaceRect(1, 2, 3, 4)] * 2 + [FaceRect(5, 6, 7, 8)] * 2


def test_faces_round_trip(tmp_path):
    p = tmp_path / "faces.txt"
    same = [FaceRect(1, 1, 5, 5)] * 3
    write_faces(p, same)
    assert p.read_text() == "* 1 1 5 5\n"
    assert read_faces(p, 3) == same
    moving = [FaceRect(i, 1, 5, 5) for i in range(3)]
    write_faces(p, moving)
    assert read_faces(p, 3) == moving


@pytest.mark.parametrize("text, msg", [
    ("1 2 3\n", ":1: expected"), ("0 1 2 3 x\n", ":1:"), ("a 1 2 3 4\n", "bad frame index"),
    ("9 1 2 3 4\n", "outside"), ("1 1 2 3 4\n", "no face rectangle for frame 0"),
])
def test_faces_errors(tmp_path, text, msg):
    p = tmp_path / "faces.txt"
    p.write_text(text)
    with pytest.raises(IngestError, match=msg):
        read_faces(p, 3)


def test_exclusions(tmp_path):
    p = tmp_path / "exclude.txt"
    p.write_text("# occluded\nP4 T17\nP9 T2  # hand\n")
    assert read_exclusions(p) == {("P4", "T17"), ("P9", "T2")}
    p.write_text("P4\n")
    with pytest.raises(IngestError, match=":1:"):
        read_exclusions(p)


def tiny_trial(d, n=10):
    frames = np.full((n, 4, 4, 3), 120, dtype=np.uint8)
    return write_trial(d, frames, 50.0, [FaceRect(0, 0, 4, 4)] * n,
                       TimeSeries(np.arange(20.0), 128.0))


def test_discover_natural_order_and_exclusions(tmp_path):
    for pid, tid in [("P10", "T1"), ("P2", "T10"), ("P2", "T9")]:
        tiny_trial(tmp_path / pid / tid)
    (tmp_path / "P3").mkdir()  # no trials
    (tmp_path / "exclude.txt").write_text("P2 T9\n")
    recs = discover_trials(tmp_path)
    assert [(r.participant_id, r.trial_id, r.excluded) for r in recs] == [
        ("P2", "T9", True), ("P2", "T10", False), ("P10", "T1", False)]
    other = tmp_path / "other.txt"
    other.write_text("P10 T1\n")
    assert [r.excluded for r in discover_trials(tmp_path, other)] == [False, False, True]
    with pytest.raises(IngestError):
        discover_trials(tmp_path / "missing")


def test_record_loads_trial(tmp_path):
    tiny_trial(tmp_path / "P1" / "T1")
    (rec,) = discover_trials(tmp_path)
    t = rec()
    assert (t.participant_id, t.trial_id, t.fps) == ("P1", "T1", 50.0)
    assert t.frames.shape == (10, 4, 4, 3) and len(t.faces) == 10
    assert len(t.ppg) == 20
    spec = recommended_spec("G", "CWT", skin_mask_on=False, outlier_rejection_on=False)
    assert color_signal_for(t, spec).rate_hz == 50.0
