import numpy as np
import pytest

from ippgbench.core import TimeSeries
from ippgbench.synth import SynthParams, synthesize_trial


def sine_amplitude(y: np.ndarray, t: np.ndarray, f: float) -> float:
    """Least-squares amplitude of a sinusoid at frequency f in y(t)."""
    A = np.column_stack([np.sin(2 * np.pi * f * t), np.cos(2 * np.pi * f * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.hypot(coef[0], coef[1]))


def tone(f_hz: float, duration_s: float = 60.0, rate_hz: float = 50.0,
         amp: float = 1.0, phase: float = 0.0) -> TimeSeries:
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    return TimeSeries(amp * np.sin(2 * np.pi * f_hz * t + phase), rate_hz)


def interior(n: int, margin: int) -> slice:
    return slice(margin, n - margin)


@pytest.fixture(scope="session")
def trial72():
    return synthesize_trial(SynthParams(bpm=72.0, seed=11))


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the session summary."""
    def record(number: int, passed: bool, detail: str) -> bool:
        verdict = "PASS" if passed else "FAIL"
        if detail.startswith("SKIP: "):
            verdict, detail = "SKIP", detail[len("SKIP: "):]
        _CRITERIA[number] = f"criterion {number:>2}: {verdict}  {detail}"
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
