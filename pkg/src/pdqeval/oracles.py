"""Brute-force reference computations used to check the fast paths.

Nothing here touches the raster, kernel or assignment code: losses loop over
every image pixel with the scalar inclusion probability, and assignments are
found by enumerating every matching of positive cells.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .assignment import FrameResult, Match
from .errors import TooLarge
from .ground_truth import GroundTruthObject
from .pbox import DEFAULT_THRESHOLD, PBox, ProbabilisticDetection, pixel_inclusion_probability
from .quality import PairwiseQuality

MAX_BRUTE_FORCE = 6
_EPS = 1e-14
_TIE = 1e-12


def mc_inclusion_probability(point, pbox: PBox, samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of the inclusion probability and its standard error.

    Samples both corners independently and counts draws whose box contains
    ``point`` (closed on every side).
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = np.random.default_rng(seed)
    px, py = (float(v) for v in point)
    tl = rng.multivariate_normal(pbox.top_left.mean, pbox.top_left.covariance, size=samples, method="eigh")
    br = rng.multivariate_normal(pbox.bottom_right.mean, pbox.bottom_right.covariance, size=samples, method="eigh")
    inside = (tl[:, 0] <= px) & (tl[:, 1] <= py) & (br[:, 0] >= px) & (br[:, 1] >= py)
    p = float(inside.mean())
    return p, math.sqrt(p * (1.0 - p) / samples)


def naive_losses(
    gt: GroundTruthObject,
    det: ProbabilisticDetection,
    threshold: float = DEFAULT_THRESHOLD,
) -> tuple[float, float, bool]:
    """Foreground / background loss by a double loop over every image pixel.

    Requires ``gt.image_size``. Returns ``(fg, bg, hit)`` like
    ``quality.spatial_losses``.
    """
    if gt.image_size is None:
        raise ValueError("naive loss needs the image size")
    width, height = gt.image_size
    seg_pixels = {(int(x), int(y)) for x, y in gt.segment.pixels()}
    b = gt.bbox
    fg = bg = 0.0
    hit = False
    for y in range(height):
        for x in range(width):
            p = pixel_inclusion_probability((x + 0.5, y + 0.5), det.pbox)
            if p < threshold:
                p = 0.0
            if (x, y) in seg_pixels:
                fg += math.log(max(p, _EPS))
                hit = hit or p > 0.0
            elif not (b.x0 <= x <= b.x1 and b.y0 <= y <= b.y1) and p > threshold:
                bg += -math.log(max(1.0 - p, _EPS))
    n = len(seg_pixels)
    return -fg / n, bg / n, hit


def naive_pairwise(gt: GroundTruthObject, det: ProbabilisticDetection, threshold: float = DEFAULT_THRESHOLD) -> PairwiseQuality:
    fg, bg, hit = naive_losses(gt, det, threshold)
    ql = float(det.label_probs[gt.class_id]) if gt.class_id < det.label_probs.size else 0.0
    qs = math.exp(-(fg + bg)) if hit else 0.0
    return PairwiseQuality(fg, bg, qs, ql, math.sqrt(qs * ql))


def _matchings(scores: np.ndarray, row: int, used: frozenset):
    """Every one-to-one set of positive cells using rows >= ``row``."""
    if row == scores.shape[0]:
        yield 0.0, []
        return
    yield from _matchings(scores, row + 1, used)
    for j in range(scores.shape[1]):
        if j not in used and scores[row, j] > 0.0:
            for total, pairs in _matchings(scores, row + 1, used | {j}):
                yield scores[row, j] + total, [(row, j)] + pairs


def brute_force_assignment(scores: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Best total and its pairs, by enumerating every matching of positive cells.

    Ties (within 1e-12 of the best total) resolve to the lexicographically
    smallest sorted pair list, where a list ranks before its own prefixes.
    """
    scores = np.asarray(scores, dtype=np.float64)
    candidates = list(_matchings(scores, 0, frozenset()))
    best = max(t for t, _ in candidates)
    end = (math.inf, math.inf)
    tied = [p for t, p in candidates if t >= best - _TIE]
    return best, min(tied, key=lambda p: p + [end])


def brute_force_frame_score(
    gts: Sequence[GroundTruthObject],
    dets: Sequence[ProbabilisticDetection],
    threshold: float = DEFAULT_THRESHOLD,
) -> FrameResult:
    """Reference frame scoring: naive losses plus exhaustive assignment.

    Raises:
        TooLarge: more than six ground truths or detections.
    """
    if len(gts) > MAX_BRUTE_FORCE or len(dets) > MAX_BRUTE_FORCE:
        raise TooLarge(f"brute force limited to {MAX_BRUTE_FORCE}x{MAX_BRUTE_FORCE}, got {len(gts)}x{len(dets)}")
    quals = [[naive_pairwise(g, d, threshold) for d in dets] for g in gts]
    scores = np.array([[q.ppdq for q in row] for row in quals]).reshape(len(gts), len(dets))
    _, pairs = brute_force_assignment(scores)

    def tiny(g: GroundTruthObject) -> bool:
        b = g.bbox
        return (b.x1 - b.x0 + 1) < 10 or (b.y1 - b.y0 + 1) < 10 or g.pixel_count < 100

    matches, filtered = [], []
    for i, j in pairs:
        if tiny(gts[i]):
            filtered.append((i, j))
        else:
            matches.append(Match(i, j, quals[i][j]))
    used_g = {i for i, _ in pairs}
    used_d = {j for _, j in pairs}
    fns = []
    for i, g in enumerate(gts):
        if i not in used_g:
            if tiny(g):
                filtered.append((i, None))
            else:
                fns.append(i)
    return FrameResult(
        matches=tuple(matches),
        false_positive_dets=tuple(j for j in range(len(dets)) if j not in used_d),
        false_negative_gts=tuple(fns),
        filtered_pairs=tuple(sorted(filtered, key=lambda p: (p[0], -1 if p[1] is None else p[1]))),
        frame_index=gts[0].frame_index if gts else (dets[0].frame_index if dets else 0),
        gt_classes=tuple(g.class_id for g in gts),
        det_classes=tuple(d.predicted_class for d in dets),
    )
