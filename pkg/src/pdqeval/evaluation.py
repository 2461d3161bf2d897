"""Dataset-level evaluation with optional frame-parallel workers."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .assignment import FrameResult, score_frame
from .formats import GroundTruthDocument, SubmissionDocument
from .ground_truth import GroundTruthObject
from .pbox import DEFAULT_THRESHOLD, ProbabilisticDetection
from .report import EvaluationSummary, aggregate, per_class_breakdown, per_sequence_breakdown

log = logging.getLogger(__name__)

WORKERS_ENV = "PDQEVAL_WORKERS"


@dataclass(frozen=True)
class FrameTask:
    frame_index: int
    gts: tuple[GroundTruthObject, ...]
    dets: tuple[ProbabilisticDetection, ...]
    sequence: str | None = None


@dataclass(frozen=True)
class Evaluation:
    frames: list[FrameResult]
    summary: EvaluationSummary
    per_sequence: dict[str, EvaluationSummary]
    per_class: dict[int, EvaluationSummary]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        log.warning("ignoring non-integer %s=%r", WORKERS_ENV, raw)
        return 1
    return max(1, n) if n > 0 else max(1, os.cpu_count() or 1)


def _score_chunk(args) -> list[FrameResult]:
    tasks, threshold, class_aware = args
    return [score_frame(t.gts, t.dets, threshold, class_aware, t.sequence) for t in tasks]


def score_frames(
    tasks: Sequence[FrameTask],
    threshold: float = DEFAULT_THRESHOLD,
    class_aware: bool = False,
    workers: int | None = None,
) -> list[FrameResult]:
    """Score frames in order, fanning out to worker processes if ``workers > 1``."""
    workers = default_workers() if workers is None else workers
    tasks = list(tasks)
    if workers <= 1 or len(tasks) < 2:
        return _score_chunk((tasks, threshold, class_aware))
    n_chunks = min(len(tasks), workers * 4)
    size = -(-len(tasks) // n_chunks)
    chunks = [(tasks[i:i + size], threshold, class_aware) for i in range(0, len(tasks), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_score_chunk, chunks)
        return [fr for part in parts for fr in part]


def build_tasks(gt_doc: GroundTruthDocument, sub_doc: SubmissionDocument) -> list[FrameTask]:
    """Pair ground-truth frames with submitted detections.

    Ground-truth frames without detections score as all misses. Submitted
    frames unknown to the ground truth are skipped with a warning.
    """
    dets = sub_doc.detections()
    unknown = sorted(set(dets) - set(gt_doc.frames))
    if unknown:
        log.warning("skipping %d submitted frame(s) absent from ground truth: %s", len(unknown), unknown[:10])
    return [
        FrameTask(fidx, tuple(fr.objects), tuple(dets.get(fidx, ())), fr.sequence)
        for fidx, fr in sorted(gt_doc.frames.items())
    ]


def evaluate(
    gt_doc: GroundTruthDocument,
    sub_doc: SubmissionDocument,
    threshold: float = DEFAULT_THRESHOLD,
    class_aware: bool = False,
    workers: int | None = None,
) -> Evaluation:
    frames = score_frames(build_tasks(gt_doc, sub_doc), threshold, class_aware, workers)
    return Evaluation(
        frames,
        aggregate(frames),
        per_sequence_breakdown(frames),
        per_class_breakdown(frames),
    )
