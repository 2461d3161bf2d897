"""Probability-based Detection Quality (PDQ) for probabilistic object detections."""

from .assignment import FrameResult, Match, score_frame, solve_assignment
from .errors import PDQError
from .ground_truth import DatasetStats, GroundTruthObject, SegmentMask, compute_stats, is_tiny, tight_bbox
from .kernels import BACKEND
from .pbox import (
    DEFAULT_THRESHOLD,
    GaussianCorner,
    Heatmap,
    PBox,
    ProbabilisticDetection,
    bivariate_normal_cdf,
    pixel_inclusion_probability,
    rasterize,
    support_region,
)
from .quality import PairwiseQuality, background_loss, foreground_loss, label_quality, pairwise_pdq
from .report import EvaluationSummary, aggregate, per_class_breakdown, render_report

__all__ = [
    "BACKEND",
    "DEFAULT_THRESHOLD",
    "DatasetStats",
    "EvaluationSummary",
    "FrameResult",
    "GaussianCorner",
    "GroundTruthObject",
    "Heatmap",
    "Match",
    "PBox",
    "PDQError",
    "PairwiseQuality",
    "ProbabilisticDetection",
    "SegmentMask",
    "aggregate",
    "background_loss",
    "bivariate_normal_cdf",
    "compute_stats",
    "foreground_loss",
    "is_tiny",
    "label_quality",
    "pairwise_pdq",
    "per_class_breakdown",
    "pixel_inclusion_probability",
    "rasterize",
    "render_report",
    "score_frame",
    "solve_assignment",
    "support_region",
    "tight_bbox",
]

__version__ = "0.1.0"
