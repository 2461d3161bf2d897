"""Per-frame optimal assignment and TP / FP / FN accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import MixedFrames
from .geometry import image_rect
from .ground_truth import GroundTruthObject, is_tiny
from .pbox import DEFAULT_THRESHOLD, ProbabilisticDetection, rasterize
from .quality import PairwiseQuality, background_table, label_quality, quality_from_heatmap

# Assignments whose totals differ by less than this are treated as tied.
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Match:
    gt_index: int
    det_index: int
    quality: PairwiseQuality


@dataclass(frozen=True)
class FrameResult:
    matches: tuple[Match, ...] = ()
    false_positive_dets: tuple[int, ...] = ()
    false_negative_gts: tuple[int, ...] = ()
    filtered_pairs: tuple[tuple[int, int | None], ...] = ()
    frame_index: int = 0
    sequence: str | None = None
    # Class attribution for breakdowns: ground-truth classes and detection argmax classes.
    gt_classes: tuple[int, ...] = field(default=(), repr=False)
    det_classes: tuple[int, ...] = field(default=(), repr=False)

    @property
    def true_positives(self) -> int:
        return len(self.matches)

    @property
    def false_positives(self) -> int:
        return len(self.false_positive_dets)

    @property
    def false_negatives(self) -> int:
        return len(self.false_negative_gts)

    @property
    def total_ppdq(self) -> float:
        return sum(m.quality.ppdq for m in self.matches)


def _best_total(q: np.ndarray) -> float:
    if q.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(q, maximize=True)
    return float(q[rows, cols].sum())


def solve_assignment(quality_matrix) -> list[tuple[int, int]]:
    """Maximum-total one-to-one assignment over a nonnegative score matrix.

    Only pairs with positive score are returned; a zero-score pair is
    equivalent to leaving both sides unassigned. Among matchings whose total
    is within ``TIE_TOLERANCE`` of the maximum, the lexicographically smallest
    sorted pair list wins, a list ranking before any of its own prefixes. So
    a positive pair is never dropped while it can be added, and results do not
    depend on solver internals.
    """
    q = np.asarray(quality_matrix, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError("quality matrix must be 2-d")
    m, n = q.shape
    best = _best_total(q)
    pairs: list[tuple[int, int]] = []
    fixed = 0.0
    free_rows = list(range(m))
    free_cols = list(range(n))
    while True:
        chosen = None
        for pos, i in enumerate(free_rows):
            later = free_rows[pos + 1:]
            for j in free_cols:
                if q[i, j] <= 0.0:
                    continue
                rest_cols = [c for c in free_cols if c != j]
                rest = _best_total(q[np.ix_(later, rest_cols)]) if later and rest_cols else 0.0
                if fixed + q[i, j] + rest >= best - TIE_TOLERANCE:
                    chosen = (pos, i, j)
                    break
            if chosen:
                break
        if chosen is None:
            break
        pos, i, j = chosen
        pairs.append((i, j))
        fixed += q[i, j]
        free_rows = free_rows[pos + 1:]
        free_cols.remove(j)
    return pairs


def _check_frames(gts: Sequence[GroundTruthObject], dets: Sequence[ProbabilisticDetection]) -> int:
    frames = {g.frame_index for g in gts} | {d.frame_index for d in dets}
    if len(frames) > 1:
        raise MixedFrames(f"objects from several frames: {sorted(frames)}")
    return frames.pop() if frames else 0


def quality_matrix(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[ProbabilisticDetection],
    threshold: float = DEFAULT_THRESHOLD,
    class_aware: bool = False,
) -> list[list[PairwiseQuality | None]]:
    """Pairwise qualities, rows are ground truths. ``None`` marks pairs excluded
    by class-aware matching."""
    sizes = {g.image_size for g in gts if g.image_size is not None}
    clip = image_rect(*sizes.pop()) if len(sizes) == 1 else None
    heatmaps = [rasterize(d.pbox, threshold, clip) for d in dets]
    tables = [background_table(hm, threshold) for hm in heatmaps]
    out: list[list[PairwiseQuality | None]] = []
    for gt in gts:
        row = []
        for det, hm, table in zip(dets, heatmaps, tables):
            if class_aware and det.predicted_class != gt.class_id:
                row.append(None)
            else:
                row.append(quality_from_heatmap(gt, hm, label_quality(det, gt.class_id), threshold, table))
        out.append(row)
    return out


def finalize_frame(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[ProbabilisticDetection],
    qualities: list[list[PairwiseQuality | None]],
    pairs: Sequence[tuple[int, int]],
    frame_index: int = 0,
    sequence: str | None = None,
) -> FrameResult:
    """Turn an assignment into TP / FP / FN, then drop tiny ground truths.

    Pairs with zero pPDQ are demoted to an FP plus an FN. A tiny ground truth
    is removed together with the detection matched to it, if any.
    """
    matches = []
    for i, j in sorted(pairs):
        q = qualities[i][j]
        if q is not None and q.ppdq > 0.0:
            matches.append(Match(i, j, q))
    matched_gts = {m.gt_index for m in matches}
    matched_dets = {m.det_index for m in matches}

    filtered: list[tuple[int, int | None]] = []
    kept = []
    for m in matches:
        if is_tiny(gts[m.gt_index]):
            filtered.append((m.gt_index, m.det_index))
        else:
            kept.append(m)
    fns = []
    for i, gt in enumerate(gts):
        if i in matched_gts:
            continue
        if is_tiny(gt):
            filtered.append((i, None))
        else:
            fns.append(i)
    fps = [j for j in range(len(dets)) if j not in matched_dets]
    return FrameResult(
        matches=tuple(kept),
        false_positive_dets=tuple(fps),
        false_negative_gts=tuple(fns),
        filtered_pairs=tuple(sorted(filtered)),
        frame_index=frame_index,
        sequence=sequence,
        gt_classes=tuple(g.class_id for g in gts),
        det_classes=tuple(d.predicted_class for d in dets),
    )


def score_frame(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[ProbabilisticDetection],
    threshold: float = DEFAULT_THRESHOLD,
    class_aware: bool = False,
    sequence: str | None = None,
) -> FrameResult:
    """Score one frame: pairwise qualities, optimal assignment, filtering.

    Raises:
        MixedFrames: if the inputs do not share one frame index.
    """
    frame = _check_frames(gts, dets)
    qualities = quality_matrix(gts, dets, threshold, class_aware)
    scores = np.array(
        [[q.ppdq if q is not None else 0.0 for q in row] for row in qualities],
        dtype=np.float64,
    ).reshape(len(gts), len(dets))
    pairs = solve_assignment(scores)
    return finalize_frame(gts, dets, qualities, pairs, frame, sequence)
