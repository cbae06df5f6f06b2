"""Imaging-photoplethysmography pulse-rate pipeline and benchmark harness.

Steps: ROI averaging (``roi``), pre/post filtering (``filters``, ``abp``),
iPPG extraction (``extract``), rate estimation (``pulserate``) and scoring
(``metrics``). ``pipeline`` composes them; ``io``, ``report`` and ``cli``
provide the dataset and command-line plumbing.
"""

from .core import (ColorSignal, EmptyROIError, EpochSpec, IppgSignal, NoSpectralContentError,
                   SignalError, TimeSeries, TooFewBeatsError)
from .pipeline import PipelineSpec, recommended_spec, run_grid, recommended_specs

__all__ = [
    "ColorSignal", "EmptyROIError", "EpochSpec", "IppgSignal", "NoSpectralContentError",
    "PipelineSpec", "SignalError", "TimeSeries", "TooFewBeatsError", "recommended_spec",
    "run_grid", "recommended_specs",
]
__version__ = "0.1.0"
