"""Fetal brain linear measurements (CBD, BBD, TCD) from a volume, its
segmentation and per-slice reference probabilities."""
from .core import (LabelMap, Line2D, Measurement, PipelineReport, ReliabilityWarning, RoiBox,
                   Volume)
from .metrics import AgreementStats, bland_altman, dice, msl_angle_diff, slice_selection_accuracy
from .phantom import PhantomSpec, generate
from .pipeline import PipelineConfig, run_eval, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Volume", "LabelMap", "RoiBox", "Line2D", "Measurement", "ReliabilityWarning",
    "PipelineReport", "PipelineConfig", "run_pipeline", "run_eval", "PhantomSpec", "generate",
    "AgreementStats", "bland_altman", "dice", "msl_angle_diff", "slice_selection_accuracy",
]
