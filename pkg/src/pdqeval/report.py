"""Aggregate frame results into PDQ and its breakdown statistics."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

from .assignment import FrameResult
from .errors import UnknownFormat

log = logging.getLogger(__name__)

COLUMNS = (
    "PDQ",
    "Overall Quality",
    "Spatial Quality",
    "Label Quality",
    "True Positives",
    "False Positives",
    "False Negatives",
)
_FIELDS = (
    "pdq",
    "overall_quality",
    "spatial_quality",
    "label_quality",
    "true_positives",
    "false_positives",
    "false_negatives",
)
FORMATS = ("table", "csv", "json")


@dataclass(frozen=True)
class EvaluationSummary:
    pdq: float = 0.0
    overall_quality: float = 0.0
    spatial_quality: float = 0.0
    label_quality: float = 0.0
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0

    def values(self) -> tuple:
        return tuple(getattr(self, f) for f in _FIELDS)


@dataclass(frozen=True)
class Tally:
    """Running sums behind an EvaluationSummary; merges with ``+``."""

    sum_ppdq: float = 0.0
    sum_spatial: float = 0.0
    sum_label: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: Tally) -> Tally:
        return Tally(
            self.sum_ppdq + other.sum_ppdq,
            self.sum_spatial + other.sum_spatial,
            self.sum_label + other.sum_label,
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
        )

    @classmethod
    def of_frame(cls, fr: FrameResult) -> Tally:
        return cls(
            sum(m.quality.ppdq for m in fr.matches),
            sum(m.quality.spatial_quality for m in fr.matches),
            sum(m.quality.label_quality for m in fr.matches),
            fr.true_positives,
            fr.false_positives,
            fr.false_negatives,
        )

    def summary(self) -> EvaluationSummary:
        total = self.tp + self.fp + self.fn
        if total == 0:
            return EvaluationSummary()
        pdq = self.sum_ppdq / total
        if self.tp == 0:
            return EvaluationSummary(pdq, 0.0, 0.0, 0.0, 0, self.fp, self.fn)
        return EvaluationSummary(
            pdq,
            self.sum_ppdq / self.tp,
            self.sum_spatial / self.tp,
            self.sum_label / self.tp,
            self.tp,
            self.fp,
            self.fn,
        )


def pdq_from_breakdown(overall_quality: float, tp: int, fp: int, fn: int) -> float:
    """PDQ implied by a breakdown row: mean pPDQ times TP over all outcomes."""
    total = tp + fp + fn
    return overall_quality * tp / total if total else 0.0


def tally(frame_results: Iterable[FrameResult]) -> Tally:
    out = Tally()
    for fr in frame_results:
        out = out + Tally.of_frame(fr)
    return out


def aggregate(frame_results: Iterable[FrameResult]) -> EvaluationSummary:
    """PDQ over all frames: summed pPDQ of matches over TP + FP + FN."""
    t = tally(frame_results)
    if t.tp + t.fp + t.fn == 0:
        log.warning("no ground truths or detections were evaluated; PDQ defined as 0")
    return t.summary()


def per_class_breakdown(frame_results: Iterable[FrameResult]) -> dict[int, EvaluationSummary]:
    """Summaries per class.

    Matches and false negatives count toward the ground truth's class, false
    positives toward the detection's most probable class.
    """
    tallies: dict[int, Tally] = {}

    def bump(cls_id: int, t: Tally):
        tallies[cls_id] = tallies.get(cls_id, Tally()) + t

    for fr in frame_results:
        for m in fr.matches:
            q = m.quality
            bump(fr.gt_classes[m.gt_index], Tally(q.ppdq, q.spatial_quality, q.label_quality, 1, 0, 0))
        for j in fr.false_positive_dets:
            bump(fr.det_classes[j], Tally(fp=1))
        for i in fr.false_negative_gts:
            bump(fr.gt_classes[i], Tally(fn=1))
    return {c: tallies[c].summary() for c in sorted(tallies)}


def per_sequence_breakdown(frame_results: Iterable[FrameResult]) -> dict[str, EvaluationSummary]:
    tallies: dict[str, Tally] = {}
    for fr in frame_results:
        key = fr.sequence if fr.sequence is not None else ""
        tallies[key] = tallies.get(key, Tally()) + Tally.of_frame(fr)
    return {k: tallies[k].summary() for k in sorted(tallies)}


def format_row(summary: EvaluationSummary) -> list[str]:
    return [f"{v:.3f}" for v in summary.values()[:4]] + [str(v) for v in summary.values()[4:]]


def render_report(
    summary: EvaluationSummary,
    breakdowns: Mapping[str, EvaluationSummary] | None = None,
    fmt: str = "table",
) -> str:
    """Render the overall row plus optional labelled breakdown rows.

    Qualities are printed to three decimals and counts as integers, in the
    column order of ``COLUMNS``. ``json`` keeps full precision.

    Raises:
        UnknownFormat: for anything but ``table``, ``csv`` or ``json``.
    """
    rows = [("overall", summary)] + list((breakdowns or {}).items())
    if fmt == "json":
        payload = {
            "columns": list(COLUMNS),
            "summary": asdict(summary),
            "breakdowns": {k: asdict(v) for k, v in (breakdowns or {}).items()},
        }
        return json.dumps(payload, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("Scope",) + COLUMNS)
        for label, s in rows:
            writer.writerow([label] + format_row(s))
        return buf.getvalue()
    if fmt == "table":
        cells = [["Scope", *COLUMNS]] + [[label, *format_row(s)] for label, s in rows]
        widths = [max(len(r[c]) for r in cells) for c in range(len(cells[0]))]
        lines = []
        for r in cells:
            first = r[0].ljust(widths[0])
            rest = [v.rjust(w) for v, w in zip(r[1:], widths[1:])]
            lines.append("  ".join([first, *rest]).rstrip())
        return "\n".join(lines) + "\n"
    raise UnknownFormat(f"unknown report format {fmt!r}; expected one of {FORMATS}")


def parse_report_csv(text: str) -> dict[str, EvaluationSummary]:
    """Inverse of the csv rendering, at its printed precision."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header[1:]) != COLUMNS:
        raise ValueError(f"unexpected csv header {header}")
    out = {}
    for row in reader:
        if not row:
            continue
        label, *vals = row
        out[label] = EvaluationSummary(
            *(float(v) for v in vals[:4]), *(int(v) for v in vals[4:])
        )
    return out


def round_summary(summary: EvaluationSummary) -> EvaluationSummary:
    vals = summary.values()
    return EvaluationSummary(*(round(v, 3) for v in vals[:4]), *vals[4:])


def labelled_breakdowns(
    per_sequence: Mapping[str, EvaluationSummary] | None = None,
    per_class: Mapping[int, EvaluationSummary] | None = None,
    class_names: Sequence[str] | None = None,
) -> dict[str, EvaluationSummary]:
    out = {}
    for name, s in (per_sequence or {}).items():
        out[f"sequence:{name}"] = s
    for cid, s in (per_class or {}).items():
        name = class_names[cid] if class_names and 0 <= cid < len(class_names) else str(cid)
        out[f"class:{name}"] = s
    return out
