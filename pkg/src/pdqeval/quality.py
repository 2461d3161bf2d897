"""Pairwise quality between one ground-truth object and one detection.

Spatial quality is ``exp(-(L_fg + L_bg))``. The foreground loss averages
``-log p`` over the segment's pixels; the background loss sums
``-log(1 - p)`` over detection pixels outside the ground truth's bounding box,
also divided by the segment size. Pixels inside the bounding box but off the
segment enter neither loss. Probabilities are clamped to ``EPS`` inside the
logarithms; a detection that gives no segment pixel any probability has
spatial quality exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import image_rect
from .ground_truth import GroundTruthObject
from .pbox import DEFAULT_THRESHOLD, Heatmap, ProbabilisticDetection, rasterize

EPS = 1e-14
LOG_EPS = math.log(EPS)


@dataclass(frozen=True)
class PairwiseQuality:
    foreground_loss: float
    background_loss: float
    spatial_quality: float
    label_quality: float
    ppdq: float

    @classmethod
    def from_parts(cls, fg: float, bg: float, label_quality: float, hit: bool = True) -> PairwiseQuality:
        qs = math.exp(-(fg + bg)) if hit else 0.0
        return cls(fg, bg, qs, label_quality, math.sqrt(qs * label_quality))


ZERO_QUALITY = PairwiseQuality(-LOG_EPS, 0.0, 0.0, 0.0, 0.0)


def label_quality(det: ProbabilisticDetection, true_class: int) -> float:
    """Probability the detection gives to ``true_class`` (0 if absent)."""
    if 0 <= true_class < det.label_probs.size:
        return float(det.label_probs[true_class])
    return 0.0


@dataclass(frozen=True)
class BackgroundTable:
    """Per-heatmap sums of background terms ``-log(1 - p)`` for ``p > threshold``.

    ``left[y, x]`` sums row ``y`` strictly left of column ``x`` and
    ``right[y, x]`` sums from column ``x`` onward, so the background outside
    any box is read off without touching cells inside it.
    """

    row_sums: np.ndarray
    left: np.ndarray
    right: np.ndarray


def background_table(heatmap: Heatmap, threshold: float = DEFAULT_THRESHOLD) -> BackgroundTable:
    return BackgroundTable(*kernels.background_table(heatmap.values, threshold, EPS))


def spatial_losses(
    gt: GroundTruthObject,
    heatmap: Heatmap,
    threshold: float = DEFAULT_THRESHOLD,
    table: BackgroundTable | None = None,
) -> tuple[float, float, bool]:
    """Foreground and background loss of ``heatmap`` against ``gt``.

    Returns ``(fg, bg, hit)`` where ``hit`` says whether any segment pixel
    received nonzero probability. ``table`` may carry a precomputed
    ``background_table(heatmap, threshold)``.
    """
    n = gt.pixel_count
    if heatmap.width == 0:
        return -LOG_EPS, 0.0, False
    if table is None:
        table = background_table(heatmap, threshold)
    seg = gt.segment
    fg_sum, n_in, n_hit, bg_sum = kernels.pair_sums(
        heatmap.values,
        heatmap.origin[0],
        heatmap.origin[1],
        seg.bits,
        seg.origin[0],
        seg.origin[1],
        table.row_sums,
        table.left,
        table.right,
        EPS,
    )
    fg = -(fg_sum + (n - n_in) * LOG_EPS) / n
    return fg, bg_sum / n, n_hit > 0


def _clip_for(gt: GroundTruthObject):
    return image_rect(*gt.image_size) if gt.image_size is not None else None


def foreground_loss(gt: GroundTruthObject, det: ProbabilisticDetection, threshold: float = DEFAULT_THRESHOLD) -> float:
    return spatial_losses(gt, rasterize(det.pbox, threshold, _clip_for(gt)), threshold)[0]


def background_loss(gt: GroundTruthObject, det: ProbabilisticDetection, threshold: float = DEFAULT_THRESHOLD) -> float:
    return spatial_losses(gt, rasterize(det.pbox, threshold, _clip_for(gt)), threshold)[1]


def quality_from_heatmap(
    gt: GroundTruthObject,
    heatmap: Heatmap,
    label_q: float,
    threshold: float = DEFAULT_THRESHOLD,
    table: BackgroundTable | None = None,
) -> PairwiseQuality:
    fg, bg, hit = spatial_losses(gt, heatmap, threshold, table)
    return PairwiseQuality.from_parts(fg, bg, label_q, hit)


def pairwise_pdq(
    gt: GroundTruthObject,
    det: ProbabilisticDetection,
    threshold: float = DEFAULT_THRESHOLD,
    heatmap: Heatmap | None = None,
) -> PairwiseQuality:
    """Losses, spatial and label quality, and pPDQ for one pair.

    Pass ``heatmap`` to reuse a raster of ``det`` across ground truths; it must
    have been produced with the same threshold and image clip.
    """
    if heatmap is None:
        heatmap = rasterize(det.pbox, threshold, _clip_for(gt))
    return quality_from_heatmap(gt, heatmap, label_quality(det, gt.class_id), threshold)
