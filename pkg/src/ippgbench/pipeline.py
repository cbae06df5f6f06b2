"""Pipeline specifications, the recommended-processing table and the trial runner."""

from __future__ import annotations

import itertools
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .abp import wavelet_filter
from .core import (ColorSignal, EpochSpec, SignalError, TimeSeries, epoch_bounds, natural_key,
                   segment_epochs)
from .extract import METHODS, ExtractionMethod, extract
from .filters import FilterChoice, apply_filter_chain
from .metrics import EpochPair, snr
from .pulserate import (AR_ORDER_PLAIN, AR_ORDER_WAVELET, epoch_average_rate, rate_ar_burg,
                        rate_cwt, rate_dft, rate_ibi, reference_rate_from_ppg)
from .roi import ROI_MODES, WHOLE_FACE, FaceRect, FrameRGB, SkinRangesHsv, build_color_signal

log = logging.getLogger(__name__)

ESTIMATORS = ("IBI", "DFT", "AR", "CWT")
NEEDS_MCAS = ("GRD", "CHROM", "POS")


class SpecError(SignalError):
    """An invalid pipeline specification or grid file."""


@dataclass(frozen=True)
class PostChoice:
    filters: FilterChoice = FilterChoice()
    wavelet: bool = False


@dataclass(frozen=True)
class PipelineSpec:
    extraction: ExtractionMethod = ExtractionMethod("POS")
    estimator: str = "CWT"
    pre: FilterChoice = FilterChoice("mcas")
    post: PostChoice = PostChoice()
    roi_mode: str = WHOLE_FACE
    skin_mask_on: bool = True
    outlier_rejection_on: bool = True
    ar_order: Optional[int] = None

    def __post_init__(self):
        if self.roi_mode not in ROI_MODES:
            raise SpecError(f"unknown ROI mode {self.roi_mode!r}")
        if self.estimator not in ESTIMATORS:
            raise SpecError(f"unknown estimator {self.estimator!r}")
        kind = self.extraction.kind
        if kind in NEEDS_MCAS and self.pre.detrend != "mcas":
            raise SpecError(f"{kind} requires MCaS detrending at pre-processing")
        if kind == "aGRD" and self.pre.bandpass == "none":
            raise SpecError("aGRD requires a band-pass filter at pre-processing")
        if self.post.filters.detrend != "none":
            raise SpecError("detrending belongs to pre-processing")
        if self.ar_order is not None and self.ar_order < 1:
            raise SpecError("AR order must be >= 1")

    @property
    def resolved_ar_order(self) -> int:
        if self.ar_order is not None:
            return self.ar_order
        return AR_ORDER_WAVELET if self.post.wavelet else AR_ORDER_PLAIN

    @property
    def roi_key(self) -> tuple[str, bool, bool]:
        return (self.roi_mode, self.skin_mask_on, self.outlier_rejection_on)

    @property
    def label(self) -> str:
        """Canonical one-line form; parsing it gives a spec with the same label."""
        est = f"AR{self.resolved_ar_order}" if self.estimator == "AR" else self.estimator
        return " ".join([
            f"extraction={self.extraction.kind}", f"estimator={est}",
            f"pre={format_filters(self.pre)}",
            f"post={format_filters(self.post.filters, self.post.wavelet)}",
            f"roi={self.roi_mode}", f"skin={_onoff(self.skin_mask_on)}",
            f"outliers={_onoff(self.outlier_rejection_on)}",
        ])


def _onoff(v: bool) -> str:
    return "on" if v else "off"


_BANDPASS_TOKENS = {"fir": "fir255_hamming", "iir": "iir_butter5"}


def format_filters(choice: FilterChoice, wavelet: bool = False) -> str:
    parts = []
    if choice.detrend != "none":
        parts.append(choice.detrend)
    if choice.ma_points:
        parts.append(f"ma{choice.ma_points}")
    for tok, name in _BANDPASS_TOKENS.items():
        if choice.bandpass == name:
            parts.append(tok)
    if wavelet:
        parts.append("wf")
    return "+".join(parts) or "none"


def parse_filters(text: str) -> tuple[FilterChoice, bool]:
    """``"mcas+ma12+fir+wf"`` -> (FilterChoice, wavelet flag)."""
    detrend, ma, bandpass, wf = "none", 0, "none", False
    for tok in text.lower().split("+"):
        tok = tok.strip()
        if tok in ("", "none", "-"):
            continue
        if tok in ("mcas", "spa"):
            detrend = tok
        elif re.fullmatch(r"ma\d+", tok):
            ma = int(tok[2:])
        elif tok in _BANDPASS_TOKENS:
            bandpass = _BANDPASS_TOKENS[tok]
        elif tok == "wf":
            wf = True
        else:
            raise SpecError(f"unknown filter token {tok!r}")
    return FilterChoice(detrend, ma, bandpass), wf


def recommended_spec(extraction: str, estimator: str, **overrides) -> PipelineSpec:
    """Best-performing pre/post-processing for an extraction/estimator pair.

    MCaS is always applied first; band-pass and MA go before extraction
    for aGRD and ICA and after it for the others.
    """
    if extraction not in METHODS:
        raise SpecError(f"unknown extraction method {extraction!r}")
    if estimator not in ESTIMATORS:
        raise SpecError(f"unknown estimator {estimator!r}")
    ar = estimator == "AR"
    pre, post = "mcas", "ma12+fir+wf"
    if extraction == "GRD" and ar:
        post = "ma12+iir+wf"
    elif extraction == "aGRD":
        pre, post = ("mcas+iir" if ar else "mcas+fir"), "ma12+wf"
    elif extraction == "ICA":
        pre, post = ("mcas+ma12+iir" if ar else "mcas+ma12+fir"), "wf"
    elif extraction in ("CHROM", "POS"):
        if ar:
            post = "ma12+wf"
        elif estimator == "CWT":
            post = "ma9+fir+wf" if extraction == "CHROM" else "ma9+fir"
    pre_choice, _ = parse_filters(pre)
    post_choice, wf = parse_filters(post)
    return PipelineSpec(ExtractionMethod(extraction), estimator, pre_choice,
                        PostChoice(post_choice, wf), **overrides)


def recommended_specs(**overrides) -> list[PipelineSpec]:
    return [recommended_spec(m, e, **overrides) for m in METHODS for e in ESTIMATORS]


_GRID_KEYS = ("preset", "extraction", "estimator", "pre", "post", "roi", "skin", "outliers")
_WILDCARDS = {"extraction": METHODS, "estimator": ESTIMATORS, "roi": ROI_MODES,
              "skin": ("on", "off"), "outliers": ("on", "off")}


def _parse_bool(key: str, v: str) -> bool:
    if v.lower() in ("on", "true", "yes", "1"):
        return True
    if v.lower() in ("off", "false", "no", "0"):
        return False
    raise SpecError(f"{key} must be on/off, got {v!r}")


def _spec_from_fields(f: dict[str, str]) -> PipelineSpec:
    est = f.get("estimator", "CWT")
    ar_order = None
    m = re.fullmatch(r"AR(\d+)", est)
    if m:
        est, ar_order = "AR", int(m.group(1))
    overrides = dict(
        roi_mode=f.get("roi", WHOLE_FACE),
        skin_mask_on=_parse_bool("skin", f.get("skin", "on")),
        outlier_rejection_on=_parse_bool("outliers", f.get("outliers", "on")),
        ar_order=ar_order,
    )
    spec = recommended_spec(f.get("extraction", "POS"), est, **overrides)
    if "pre" in f or "post" in f:
        pre = parse_filters(f["pre"])[0] if "pre" in f else spec.pre
        post = PostChoice(*parse_filters(f["post"])) if "post" in f else spec.post
        if "pre" in f and parse_filters(f["pre"])[1]:
            raise SpecError("wavelet filtering is a post-processing step")
        spec = replace(spec, pre=pre, post=post)
    return spec


def parse_spec_line(line: str) -> list[PipelineSpec]:
    """Expand one grid line (``key=value`` tokens, ``*`` wildcards) into specs."""
    fields: dict[str, str] = {}
    for tok in line.split():
        if "=" not in tok:
            raise SpecError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k not in _GRID_KEYS:
            raise SpecError(f"unknown key {k!r}")
        fields[k] = v
    if "preset" in fields:
        if fields.pop("preset") != "recommended":
            raise SpecError("the only preset is 'recommended'")
        fields.setdefault("extraction", "*")
        fields.setdefault("estimator", "*")
    axes = [(k, _WILDCARDS[k] if v == "*" else (v,)) for k, v in fields.items()
            if k in _WILDCARDS]
    fixed = {k: v for k, v in fields.items() if k not in _WILDCARDS}
    specs = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        f = dict(fixed)
        f.update({k: v for (k, _), v in zip(axes, combo)})
        specs.append(_spec_from_fields(f))
    return specs


def parse_spec_grid(text: str) -> list[PipelineSpec]:
    """All specs of a grid file, first occurrence order, duplicates dropped."""
    out: list[PipelineSpec] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            specs = parse_spec_line(line)
        except SignalError as exc:
            raise SpecError(f"line {lineno}: {exc}") from None
        for s in specs:
            if s.label not in seen:
                seen.add(s.label)
                out.append(s)
    if not out:
        raise SpecError("spec grid is empty")
    return out


@dataclass
class TrialData:
    participant_id: str
    trial_id: str
    frames: np.ndarray  # uint8, (n, h, w, 3)
    faces: Sequence[FaceRect]
    ppg: TimeSeries
    fps: float


@dataclass
class CellResult:
    """Outcome of one (trial, spec) cell; ``error`` is set when the pipeline failed."""

    participant_id: str
    trial_id: str
    spec_index: int
    spec_label: str
    pairs: list[EpochPair] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def key(self) -> tuple:
        return (natural_key(self.participant_id), natural_key(self.trial_id), self.spec_index)


def color_signal_for(trial: TrialData, spec: PipelineSpec) -> ColorSignal:
    frames = [FrameRGB(f) for f in trial.frames]
    return build_color_signal(frames, trial.faces, spec.roi_mode,
                              SkinRangesHsv() if spec.skin_mask_on else None,
                              1.5 if spec.outlier_rejection_on else None, trial.fps)


def ippg_for(c0: ColorSignal, spec: PipelineSpec) -> TimeSeries:
    """Steps 2-4: pre-processing, extraction and post-processing."""
    c = apply_filter_chain(c0, spec.pre)
    y = extract(c, spec.extraction, c0)
    y = apply_filter_chain(y, spec.post.filters)
    if spec.post.wavelet:
        y = wavelet_filter(y)
    return y.series


def estimate_epochs(y: TimeSeries, spec: PipelineSpec,
                    epochs: EpochSpec = EpochSpec()) -> list[Optional[float]]:
    """Step 5: one rate per epoch (``None`` where the estimator produced nothing)."""
    windows = epoch_bounds(y, epochs)
    if spec.estimator == "IBI":
        return epoch_average_rate(rate_ibi(y), windows)
    if spec.estimator == "CWT":
        return epoch_average_rate(rate_cwt(y), windows)
    out: list[Optional[float]] = []
    for seg in segment_epochs(y, epochs):
        try:
            if spec.estimator == "DFT":
                out.append(rate_dft(seg))
            else:
                out.append(rate_ar_burg(seg, spec.resolved_ar_order))
        except SignalError as exc:
            log.warning("epoch at %.2f s: %s", seg.t0_s, exc)
            out.append(None)
    return out


def _epoch_snrs(y: TimeSeries, refs: Sequence[Optional[float]],
                epochs: EpochSpec) -> list[Optional[float]]:
    out = []
    for seg, ref in zip(segment_epochs(y, epochs), refs):
        try:
            out.append(None if ref is None else snr(seg, ref))
        except SignalError:
            out.append(None)
    return out


def _pairs(trial: TrialData, est, refs, snrs) -> list[EpochPair]:
    return [EpochPair(e, r, i, trial.trial_id, trial.participant_id, s)
            for i, (e, r, s) in enumerate(zip(est, refs, snrs))]


def run_trial(trial: TrialData, specs: Sequence[PipelineSpec],
              epochs: EpochSpec = EpochSpec()) -> list[CellResult]:
    """Evaluate every spec on one trial; failures are recorded per cell."""
    windows = epoch_bounds(TimeSeries(np.zeros(len(trial.frames)), trial.fps), epochs)
    n_epochs = len(windows)
    try:
        refs = reference_rate_from_ppg(trial.ppg, spec=epochs, windows=windows)
    except SignalError as exc:
        log.warning("%s/%s: reference rate unavailable: %s",
                    trial.participant_id, trial.trial_id, exc)
        refs = [None] * n_epochs
    colors: dict[tuple, Union[ColorSignal, Exception]] = {}
    results = []
    for i, spec in enumerate(specs):
        cell = CellResult(trial.participant_id, trial.trial_id, i, spec.label)
        try:
            if spec.roi_key not in colors:
                try:
                    colors[spec.roi_key] = color_signal_for(trial, spec)
                except SignalError as exc:
                    colors[spec.roi_key] = exc
            c0 = colors[spec.roi_key]
            if isinstance(c0, Exception):
                raise c0
            y = ippg_for(c0, spec)
            est = estimate_epochs(y, spec, epochs)
            cell.pairs = _pairs(trial, est, refs, _epoch_snrs(y, refs, epochs))
        except (SignalError, FloatingPointError, np.linalg.LinAlgError) as exc:
            cell.error = f"{type(exc).__name__}: {exc}"
            cell.pairs = _pairs(trial, [None] * n_epochs, refs, [None] * n_epochs)
            log.warning("%s/%s [%s]: %s", trial.participant_id, trial.trial_id,
                        spec.label, cell.error)
        results.append(cell)
    return results


TrialSource = Union[TrialData, Callable[[], TrialData]]


@dataclass(frozen=True)
class _Job:
    source: TrialSource
    participant_id: str
    trial_id: str


def _run_job(job: _Job, specs: Sequence[PipelineSpec], epochs: EpochSpec) -> list[CellResult]:
    try:
        trial = job.source() if callable(job.source) else job.source
        return run_trial(trial, specs, epochs)
    except Exception as exc:  # one broken trial must not abort the sweep
        msg = f"{type(exc).__name__}: {exc}"
        log.warning("%s/%s: trial failed: %s", job.participant_id, job.trial_id, msg)
        return [CellResult(job.participant_id, job.trial_id, i, s.label,
                           [EpochPair(None, None, k, job.trial_id, job.participant_id)
                            for k in range(epochs.count_per_trial)], msg)
                for i, s in enumerate(specs)]


def _ids(source: TrialSource) -> tuple[str, str]:
    pid = getattr(source, "participant_id", None)
    tid = getattr(source, "trial_id", None)
    if pid is None or tid is None:
        raise SpecError("trial sources must expose participant_id and trial_id")
    return str(pid), str(tid)


def run_grid(trials: Iterable[TrialSource], specs: Sequence[PipelineSpec],
             epochs: EpochSpec = EpochSpec(), workers: int = 1) -> list[CellResult]:
    """Run every spec on every trial.

    Trials are the work units of a bounded process pool; results come back
    sorted by (participant, trial, spec index) whatever the completion order.
    """
    specs = list(specs)
    if not specs:
        raise SpecError("no pipeline specs given")
    jobs = [_Job(t, *_ids(t)) for t in trials]
    if not jobs:
        raise SpecError("no trials given")
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_job, jobs, [specs] * len(jobs),
                                   [epochs] * len(jobs)))
    else:
        chunks = [_run_job(j, specs, epochs) for j in jobs]
    cells = [c for chunk in chunks for c in chunk]
    cells.sort(key=lambda c: c.key)
    return cells
