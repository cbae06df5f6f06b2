"""Accuracy and signal-quality metrics over per-epoch rate estimates."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import NoSpectralContentError, SignalError, TimeSeries, natural_key

log = logging.getLogger(__name__)

PE_THRESHOLD_BPM = 3.5
OVERALL = "ALL"


@dataclass(frozen=True)
class EpochPair:
    """Estimated and reference rate for one epoch; ``None`` marks a missing value."""

    pr_bpm: Optional[float]
    pr_ref_bpm: Optional[float]
    epoch_index: int = 0
    trial_id: str = ""
    participant_id: str = ""
    snr_db: Optional[float] = None

    @property
    def scored(self) -> bool:
        return (self.pr_bpm is not None and self.pr_ref_bpm is not None
                and math.isfinite(self.pr_bpm) and math.isfinite(self.pr_ref_bpm))

    @property
    def error_bpm(self) -> float:
        return self.pr_bpm - self.pr_ref_bpm


PairLike = Union[EpochPair, tuple[float, float]]


@dataclass(frozen=True)
class SnrTemplateParams:
    delta_f_bpm: float = 50 * 60 / 1024
    band_bpm: tuple[float, float] = (40.0, 240.0)

    def __post_init__(self):
        if not self.delta_f_bpm > 0:
            raise SignalError("template half-width must be positive")
        if not self.band_bpm[0] < self.band_bpm[1]:
            raise SignalError("empty SNR band")


def errors(pairs: Iterable[PairLike]) -> np.ndarray:
    """Signed errors of the scored pairs; raises when none are scored."""
    e = []
    for p in pairs:
        if not isinstance(p, EpochPair):
            p = EpochPair(float(p[0]), float(p[1]))
        if p.scored:
            e.append(p.error_bpm)
    if not e:
        raise SignalError("no scored epochs to evaluate")
    return np.asarray(e, dtype=float)


def mae(pairs: Iterable[PairLike]) -> float:
    return float(np.mean(np.abs(errors(pairs))))


def rmse(pairs: Iterable[PairLike], literal: bool = False) -> float:
    """Root-mean-square error.

    ``literal=True`` gives sqrt(sum e^2) / N, which shrinks with N and is
    only kept for exact-replication comparisons.
    """
    e = errors(pairs)
    if literal:
        return float(np.sqrt(np.sum(e * e)) / e.size)
    return float(np.sqrt(np.mean(e * e)))


def pe(pairs: Iterable[PairLike], threshold_bpm: float = PE_THRESHOLD_BPM) -> float:
    """Percentage of epochs with absolute error strictly below the threshold."""
    e = errors(pairs)
    return float(100.0 * np.count_nonzero(np.abs(e) < threshold_bpm) / e.size)


def snr_template(freqs_bpm: np.ndarray, pr_ref_bpm: float,
                 p: SnrTemplateParams = SnrTemplateParams()) -> tuple[np.ndarray, np.ndarray]:
    """(signal, noise) bin masks: bins near the rate and its harmonic versus the rest of the band."""
    f = np.asarray(freqs_bpm, dtype=float)
    lo, hi = p.band_bpm
    band = (f >= lo) & (f <= hi)
    near = ((np.abs(f - pr_ref_bpm) <= p.delta_f_bpm)
            | (np.abs(f - 2 * pr_ref_bpm) <= 2 * p.delta_f_bpm))
    return band & near, band & ~near


def snr(epoch: TimeSeries, pr_ref_bpm: float,
        p: SnrTemplateParams = SnrTemplateParams()) -> float:
    """Template SNR in dB of one epoch's magnitude spectrum.

    Returns +inf when all in-band energy falls inside the template.
    """
    v = np.asarray(epoch.samples, dtype=float)
    spec = np.abs(np.fft.rfft(v)) ** 2
    freqs = 60.0 * np.fft.rfftfreq(v.size, 1.0 / epoch.rate_hz)
    sig_mask, noise_mask = snr_template(freqs, pr_ref_bpm, p)
    s, n = spec[sig_mask].sum(), spec[noise_mask].sum()
    if s <= 0 and n <= 0:
        raise NoSpectralContentError("no spectral content")
    if n <= 0:
        return math.inf
    if s <= 0:
        return -math.inf
    return float(10.0 * np.log10(s / n))


def mean_snr(values: Iterable[Optional[float]]) -> tuple[Optional[float], int]:
    """Mean of the finite SNR values and the number of infinite ones left out."""
    vals = [v for v in values if v is not None and not math.isnan(v)]
    finite = [v for v in vals if math.isfinite(v)]
    n_inf = len(vals) - len(finite)
    if n_inf:
        log.warning("%d infinite SNR value(s) left out of the mean", n_inf)
    return (float(np.mean(finite)) if finite else None), n_inf


@dataclass(frozen=True)
class MetricRow:
    participant_id: str
    n_epochs: int
    missing_epochs: int
    mae: Optional[float]
    rmse: Optional[float]
    pe: Optional[float]
    snr_db: Optional[float]

    def as_dict(self) -> dict:
        return {"participant": self.participant_id, "n_epochs": self.n_epochs,
                "missing_epochs": self.missing_epochs, "MAE": self.mae,
                "RMSE": self.rmse, "PE_3.5": self.pe, "SNR_dB": self.snr_db}


def metric_row(participant_id: str, pairs: Sequence[EpochPair],
               threshold_bpm: float = PE_THRESHOLD_BPM,
               literal_rmse: bool = False) -> MetricRow:
    scored = [p for p in pairs if p.scored]
    missing = len(pairs) - len(scored)
    snr_db, _ = mean_snr(p.snr_db for p in pairs)
    if not scored:
        return MetricRow(participant_id, 0, missing, None, None, None, snr_db)
    return MetricRow(participant_id, len(scored), missing, mae(scored),
                     rmse(scored, literal_rmse), pe(scored, threshold_bpm), snr_db)


def participant_report(pairs: Sequence[EpochPair],
                       threshold_bpm: float = PE_THRESHOLD_BPM,
                       literal_rmse: bool = False) -> list[MetricRow]:
    """One row per participant (sorted by id) and a pooled ``ALL`` row.

    The pooled row weights every epoch equally rather than averaging
    participant means.
    """
    groups: dict[str, list[EpochPair]] = {}
    for p in pairs:
        groups.setdefault(p.participant_id, []).append(p)
    rows = []
    for pid in sorted(groups, key=natural_key):
        if not groups[pid]:
            log.warning("participant %s has no epochs; omitted", pid)
            continue
        rows.append(metric_row(pid, groups[pid], threshold_bpm, literal_rmse))
    if pairs:
        rows.append(metric_row(OVERALL, list(pairs), threshold_bpm, literal_rmse))
    return rows
