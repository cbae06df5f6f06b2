"""Aggregating sweep cells into metric tables and writing them as CSV or JSON."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import natural_key
from .metrics import OVERALL, participant_report
from .pipeline import CellResult

METRIC_COLUMNS = ("MAE", "RMSE", "PE_3.5", "SNR_dB")
CSV_COLUMNS = ("spec", "participant", "n_epochs", "missing_epochs") + METRIC_COLUMNS
EPOCH_COLUMNS = ("participant", "trial", "spec", "epoch", "pr_bpm", "pr_ref_bpm",
                 "snr_db", "error")


class ReportError(OSError):
    """Nothing to report or the report cannot be written."""


@dataclass(frozen=True)
class ReportRow:
    spec: str
    participant: str
    n_epochs: int
    missing_epochs: int
    MAE: Optional[float]
    RMSE: Optional[float]
    PE_3_5: Optional[float]
    SNR_dB: Optional[float]

    def metrics(self) -> dict:
        return {"MAE": self.MAE, "RMSE": self.RMSE, "PE_3.5": self.PE_3_5,
                "SNR_dB": self.SNR_dB}


def round_sig(v: Optional[float], digits: int = 4) -> Optional[float]:
    """Round to ``digits`` significant digits; the CSV and JSON writers share it."""
    if v is None:
        return None
    return float(f"{v:.{digits}g}")


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.4g}"


def aggregate(cells: Sequence[CellResult], literal_rmse: bool = False) -> list[ReportRow]:
    """Per-(spec, participant) rows followed by the pooled ``ALL`` row of each spec."""
    by_spec: dict[tuple[int, str], list] = {}
    for c in cells:
        by_spec.setdefault((c.spec_index, c.spec_label), []).extend(c.pairs)
    rows = []
    for (_, label), pairs in sorted(by_spec.items()):
        for m in participant_report(pairs, literal_rmse=literal_rmse):
            rows.append(ReportRow(label, m.participant_id, m.n_epochs, m.missing_epochs,
                                  round_sig(m.mae), round_sig(m.rmse), round_sig(m.pe),
                                  round_sig(m.snr_db)))
    return rows


def csv_text(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.spec, r.participant, r.n_epochs, r.missing_epochs,
                    *(_fmt(v) for v in r.metrics().values())])
    return buf.getvalue()


def json_text(rows: Sequence[ReportRow]) -> str:
    specs: dict[str, dict] = {}
    for r in rows:
        entry = specs.setdefault(r.spec, {"spec": r.spec, "participants": {}, "overall": None})
        values = {"n_epochs": r.n_epochs, "missing_epochs": r.missing_epochs, **r.metrics()}
        if r.participant == OVERALL:
            entry["overall"] = values
        else:
            entry["participants"][r.participant] = values
    return json.dumps({"specs": list(specs.values())}, indent=2) + "\n"


def emit_report(rows: Sequence[ReportRow], out_dir: os.PathLike,
                fmt: str = "csv") -> Path:
    """Write ``report.csv`` or ``report.json`` into ``out_dir``."""
    if not rows:
        raise ReportError("no report rows to write")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"report.{fmt}"
        path.write_text(csv_text(rows) if fmt == "csv" else json_text(rows))
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc.strerror or exc}") from None
    return path


def emit_epochs(cells: Sequence[CellResult], out_dir: os.PathLike) -> Path:
    """Plot-ready per-epoch estimates, one line per (trial, spec, epoch)."""
    path = Path(out_dir) / "epochs.csv"
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EPOCH_COLUMNS)
            for c in cells:
                for p in c.pairs:
                    w.writerow([c.participant_id, c.trial_id, c.spec_label, p.epoch_index,
                                _fmt(p.pr_bpm), _fmt(p.pr_ref_bpm), _fmt(p.snr_db),
                                c.error or ""])
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def load_report(in_dir: os.PathLike) -> list[ReportRow]:
    """Read back ``report.csv`` (or ``report.json`` when no CSV exists)."""
    d = Path(in_dir)
    csv_path, json_path = d / "report.csv", d / "report.json"
    num = lambda s: float(s) if s not in ("", None) else None
    if csv_path.exists():
        with csv_path.open(newline="") as fh:
            return [ReportRow(r["spec"], r["participant"], int(r["n_epochs"]),
                              int(r["missing_epochs"]), num(r["MAE"]), num(r["RMSE"]),
                              num(r["PE_3.5"]), num(r["SNR_dB"]))
                    for r in csv.DictReader(fh)]
    if json_path.exists():
        data = json.loads(json_path.read_text())
        rows = []
        for entry in data["specs"]:
            items = sorted(entry["participants"].items(), key=lambda kv: natural_key(kv[0]))
            if entry.get("overall") is not None:
                items.append((OVERALL, entry["overall"]))
            for pid, v in items:
                rows.append(ReportRow(entry["spec"], pid, v["n_epochs"], v["missing_epochs"],
                                      v["MAE"], v["RMSE"], v["PE_3.5"], v["SNR_dB"]))
        return rows
    raise ReportError(f"no report.csv or report.json in {d}")


def top_specs(rows: Sequence[ReportRow], k: int) -> list[ReportRow]:
    """Overall rows ranked by MAE (specs without scored epochs last)."""
    overall = [r for r in rows if r.participant == OVERALL]
    overall.sort(key=lambda r: (r.MAE is None, r.MAE if r.MAE is not None else 0.0, r.spec))
    return overall[:k]


def format_top(rows: Sequence[ReportRow]) -> str:
    lines = [f"{'rank':>4}  {'MAE':>7}  {'RMSE':>7}  {'PE_3.5':>7}  {'SNR_dB':>7}  spec"]
    for i, r in enumerate(rows, 1):
        lines.append(f"{i:>4}  {_fmt(r.MAE):>7}  {_fmt(r.RMSE):>7}  {_fmt(r.PE_3_5):>7}  "
                     f"{_fmt(r.SNR_dB):>7}  {r.spec}")
    return "\n".join(lines)
