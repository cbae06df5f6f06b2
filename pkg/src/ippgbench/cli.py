"""Command-line entry point: ``run``, ``synth`` and ``report``.

Exit codes: 0 success, 1 invalid arguments or specs, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import SignalError
from .io import discover_trials, write_trial
from .pipeline import parse_spec_grid, run_grid
from .report import aggregate, emit_epochs, emit_report, format_top, load_report, top_specs
from .synth import SynthParams, parse_bpm_profile, synthesize_trial

log = logging.getLogger("ippgbench")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _cmd_run(args) -> int:
    try:
        text = Path(args.specs).read_text()
    except OSError as exc:
        raise OSError(f"{args.specs}: cannot read spec grid: {exc.strerror or exc}") from None
    specs = parse_spec_grid(text)
    records = discover_trials(args.data, args.exclude)
    for r in records:
        if r.excluded:
            log.info("skipping excluded trial %s %s", r.participant_id, r.trial_id)
    trials = [r for r in records if not r.excluded]
    if not trials:
        raise SignalError(f"no trials to run under {args.data}")
    log.info("%d trial(s) x %d spec(s), %d worker(s)", len(trials), len(specs), args.workers)
    cells = run_grid(trials, specs, workers=args.workers)
    failed = sum(1 for c in cells if c.error)
    if failed:
        log.warning("%d of %d cell(s) failed; see epochs.csv", failed, len(cells))
    rows = aggregate(cells, literal_rmse=args.literal_rmse)
    path = emit_report(rows, args.out, args.format)
    emit_epochs(cells, args.out)
    print(path)
    return EXIT_OK


def _cmd_synth(args) -> int:
    params = SynthParams(bpm=parse_bpm_profile(args.bpm), duration_s=args.duration,
                         fps=args.fps, width=args.size, height=args.size,
                         noise_sigma=args.noise, artifact_amplitude=args.artifact,
                         seed=args.seed)
    trial = synthesize_trial(params)
    d = write_trial(Path(args.out) / args.participant / args.trial, trial.frames,
                    trial.fps, trial.faces, trial.ppg)
    print(d)
    return EXIT_OK


def _cmd_report(args) -> int:
    if args.top_k < 1:
        raise SignalError("--top-k must be >= 1")
    print(format_top(top_specs(load_report(args.in_dir), args.top_k)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ippgbench", description="iPPG pulse-rate pipeline benchmark")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="sweep pipeline specs over a dataset")
    run.add_argument("--data", required=True, help="dataset directory")
    run.add_argument("--specs", required=True, help="spec grid file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--exclude", help="exclusion list (default: <data>/exclude.txt)")
    run.add_argument("--literal-rmse", action="store_true",
                     help="use sqrt(sum e^2)/N instead of the standard RMSE")
    run.set_defaults(func=_cmd_run)

    syn = sub.add_parser("synth", help="write one synthetic trial")
    syn.add_argument("--bpm", default="72", help="'72' or a ramp '60:90'")
    syn.add_argument("--duration", type=float, default=63.0)
    syn.add_argument("--noise", type=float, default=2.0, help="per-pixel noise sigma")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True, help="dataset directory")
    syn.add_argument("--participant", default="P1")
    syn.add_argument("--trial", default="T1")
    syn.add_argument("--fps", type=float, default=50.0)
    syn.add_argument("--size", type=int, default=64, help="frame width and height")
    syn.add_argument("--artifact", type=float, default=0.0,
                     help="common-mode in-band intensity artifact amplitude")
    syn.set_defaults(func=_cmd_synth)

    rep = sub.add_parser("report", help="rank specs of a finished run")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--top-k", type=int, default=10)
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "workers", 1) < 1:
            raise SignalError("--workers must be >= 1")
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SignalError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
