"""Submission and ground-truth file formats.

Both are JSON objects with a ``frames`` map keyed by frame index (as a
string). A submission frame is a list of detection records::

    {"frames": {"0": [{"label_probs": [0.9, 0.1],
                       "bbox": [x1, y1, x2, y2],
                       "covars": [[[4, 0], [0, 4]], [[4, 0], [0, 4]]]}]}}

``covars`` is optional and defaults to zero matrices. A ground-truth frame
carries image dimensions, an optional sequence name, and instance records::

    {"frames": {"0": {"width": 3, "height": 3, "sequence": "seq00",
                      "objects": [{"class": "cup", "instance_id": 1,
                                   "mask": {"rle": "0:4,1:2,0:3"}}]}}}

Masks are row-major over the whole image, either as ``"value:length"`` runs
or as ``{"bitmap": <base64 of numpy.packbits>}``.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import (
    DocumentError,
    DocumentInvalid,
    EmptySegment,
    InvalidProbability,
    InvertedBox,
    MalformedSyntax,
    NegativeVariance,
    NonSymmetricCovariance,
    RleLengthMismatch,
    UnknownClass,
    WrongProbVectorLength,
)
from .ground_truth import GroundTruthObject
from .pbox import PBox, ProbabilisticDetection

_SYM_RTOL = 1e-9
_PROB_SLACK = 1e-6


@dataclass(frozen=True)
class DetectionRecord:
    label_probs: tuple[float, ...]
    bbox: tuple[float, float, float, float]
    covars: tuple | None = None

    def to_detection(self, frame_index: int) -> ProbabilisticDetection:
        tl_cov, br_cov = self.covars if self.covars is not None else (None, None)
        pbox = PBox.from_box(*self.bbox, tl_cov=tl_cov, br_cov=br_cov)
        return ProbabilisticDetection(pbox, np.array(self.label_probs), frame_index)


@dataclass(frozen=True)
class SubmissionDocument:
    frames: dict[int, list[DetectionRecord]] = field(default_factory=dict)

    def detections(self) -> dict[int, list[ProbabilisticDetection]]:
        return {f: [r.to_detection(f) for r in recs] for f, recs in self.frames.items()}


@dataclass(frozen=True)
class GroundTruthFrame:
    width: int
    height: int
    objects: list[GroundTruthObject]
    sequence: str | None = None


@dataclass(frozen=True)
class GroundTruthDocument:
    frames: dict[int, GroundTruthFrame]
    class_names: tuple[str, ...]


def load_class_list(path: str | Path) -> list[str]:
    """Class names from a JSON list or a text file with one name per line."""
    text = Path(path).read_text()
    try:
        names = json.loads(text)
    except json.JSONDecodeError:
        names = [line.strip() for line in text.splitlines()]
        names = [n for n in names if n and not n.startswith("#")]
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise MalformedSyntax(f"class list in {path} must be a list of names")
    return names


def _load_json(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedSyntax(f"not UTF-8: {exc}") from None
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedSyntax(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _frames_map(doc: Any) -> dict[int, Any]:
    if not isinstance(doc, dict) or not isinstance(doc.get("frames"), dict):
        raise MalformedSyntax('top level must be an object with a "frames" map')
    out = {}
    for key, value in doc["frames"].items():
        try:
            idx = int(key)
        except (TypeError, ValueError):
            raise MalformedSyntax(f"frame key {key!r} is not an integer") from None
        if idx in out:
            raise MalformedSyntax(f"frame {idx} listed twice")
        out[idx] = value
    return out


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _matrix(v: Any) -> np.ndarray | None:
    if (
        isinstance(v, list)
        and len(v) == 2
        and all(isinstance(row, list) and len(row) == 2 and all(_is_number(x) for x in row) for row in v)
    ):
        return np.array(v, dtype=np.float64)
    return None


def _check_covariance(m: np.ndarray, which: str, frame: int, rec: int) -> list[DocumentError]:
    errs: list[DocumentError] = []
    scale = max(1.0, float(np.abs(m).max()))
    if abs(m[0, 1] - m[1, 0]) > _SYM_RTOL * scale:
        errs.append(NonSymmetricCovariance(f"{which} covariance is not symmetric: {m.tolist()}", frame, rec))
        return errs
    if m[0, 0] < 0 or m[1, 1] < 0:
        errs.append(NegativeVariance(f"{which} covariance has a negative variance: {m.tolist()}", frame, rec))
    elif m[0, 1] ** 2 > m[0, 0] * m[1, 1] + _SYM_RTOL * scale * scale:
        errs.append(NegativeVariance(f"{which} covariance has a negative eigenvalue: {m.tolist()}", frame, rec))
    return errs


def validate_detection_record(
    raw: Any, frame: int, rec: int, class_count: int | None
) -> tuple[DetectionRecord | None, list[DocumentError]]:
    if not isinstance(raw, dict):
        return None, [MalformedSyntax("detection record must be an object", frame, rec)]
    errs: list[DocumentError] = []

    probs = raw.get("label_probs")
    if not isinstance(probs, list) or not all(_is_number(p) for p in probs):
        errs.append(MalformedSyntax("label_probs must be a list of numbers", frame, rec))
        probs = None
    else:
        if class_count is not None and len(probs) != class_count:
            errs.append(WrongProbVectorLength(f"expected {class_count} label probabilities, got {len(probs)}", frame, rec))
        if any(p < 0 or p > 1 for p in probs):
            errs.append(InvalidProbability("label probabilities must lie in [0, 1]", frame, rec))
        elif sum(probs) > 1 + _PROB_SLACK:
            errs.append(InvalidProbability(f"label probabilities sum to {sum(probs):.6g} > 1", frame, rec))

    bbox = raw.get("bbox")
    if not isinstance(bbox, list) or len(bbox) != 4 or not all(_is_number(v) for v in bbox):
        errs.append(MalformedSyntax("bbox must be four numbers [x1, y1, x2, y2]", frame, rec))
        bbox = None
    elif bbox[0] > bbox[2] or bbox[1] > bbox[3]:
        errs.append(InvertedBox(f"bbox {bbox} has x1 > x2 or y1 > y2", frame, rec))

    covars = raw.get("covars")
    mats = None
    if covars is not None:
        if not isinstance(covars, list) or len(covars) != 2:
            errs.append(MalformedSyntax("covars must be a pair of 2x2 matrices", frame, rec))
        else:
            mats = [_matrix(c) for c in covars]
            if any(m is None for m in mats):
                errs.append(MalformedSyntax("covars must be a pair of 2x2 matrices", frame, rec))
                mats = None
            else:
                for m, which in zip(mats, ("top-left", "bottom-right")):
                    errs.extend(_check_covariance(m, which, frame, rec))

    extra = set(raw) - {"label_probs", "bbox", "covars"}
    if extra:
        errs.append(MalformedSyntax(f"unknown fields {sorted(extra)}", frame, rec))
    if errs:
        return None, errs
    cov = None if covars is None else tuple(tuple(tuple(float(x) for x in row) for row in c) for c in covars)
    return DetectionRecord(tuple(float(p) for p in probs), tuple(float(v) for v in bbox), cov), []


def parse_submission(data: bytes | str, class_count: int | None) -> SubmissionDocument:
    """Parse and fully validate a detection submission.

    ``class_count=None`` skips the label-vector length check.

    Raises:
        MalformedSyntax: the text is not JSON or lacks the frames map.
        DocumentInvalid: one or more records are invalid; ``violations`` lists
            each with its frame and record index.
    """
    frames = _frames_map(_load_json(data))
    violations: list[DocumentError] = []
    out: dict[int, list[DetectionRecord]] = {}
    for fidx in sorted(frames):
        records = frames[fidx]
        if not isinstance(records, list):
            violations.append(MalformedSyntax("frame entry must be a list of detections", fidx))
            continue
        parsed = []
        for ridx, raw in enumerate(records):
            rec, errs = validate_detection_record(raw, fidx, ridx, class_count)
            violations.extend(errs)
            if rec is not None:
                parsed.append(rec)
        out[fidx] = parsed
    if violations:
        raise DocumentInvalid(violations)
    return SubmissionDocument(out)


def submission_to_json(doc: SubmissionDocument) -> dict:
    frames = {}
    for fidx in sorted(doc.frames):
        recs = []
        for r in doc.frames[fidx]:
            item: dict[str, Any] = {"label_probs": list(r.label_probs), "bbox": list(r.bbox)}
            if r.covars is not None:
                item["covars"] = [[list(row) for row in c] for c in r.covars]
            recs.append(item)
        frames[str(fidx)] = recs
    return {"frames": frames}


def serialize_submission(doc: SubmissionDocument) -> str:
    return json.dumps(submission_to_json(doc))


def detections_to_submission(dets_by_frame: dict[int, Sequence[ProbabilisticDetection]]) -> SubmissionDocument:
    frames = {}
    for fidx, dets in dets_by_frame.items():
        recs = []
        for d in dets:
            tl, br = d.pbox.top_left, d.pbox.bottom_right
            cov = None
            if not (tl.is_deterministic and br.is_deterministic):
                cov = tuple(tuple(tuple(row) for row in c.covariance.tolist()) for c in (tl, br))
            recs.append(DetectionRecord(tuple(d.label_probs.tolist()), d.pbox.mean_box, cov))
        frames[fidx] = recs
    return SubmissionDocument(frames)


def decode_rle(rle: str, length: int) -> np.ndarray:
    """Decode ``"value:length,..."`` runs into a flat boolean array.

    Raises:
        MalformedSyntax: unparseable run or value other than 0/1.
        RleLengthMismatch: runs do not total ``length``.
    """
    values, counts = [], []
    for run in rle.split(",") if rle.strip() else []:
        try:
            v, n = run.split(":")
            v, n = int(v), int(n)
        except ValueError:
            raise MalformedSyntax(f"bad RLE run {run!r}") from None
        if v not in (0, 1) or n < 0:
            raise MalformedSyntax(f"bad RLE run {run!r}")
        values.append(v)
        counts.append(n)
    total = sum(counts)
    if total != length:
        raise RleLengthMismatch(f"RLE covers {total} pixels, image has {length}")
    return np.repeat(np.array(values, dtype=bool), counts)


def encode_rle(flat: np.ndarray) -> str:
    """Row-major runs alternating from value 0 (a leading ``0:0`` if needed)."""
    flat = np.asarray(flat, dtype=bool).ravel()
    if flat.size == 0:
        return ""
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate([[0], change])
    lengths = np.diff(np.concatenate([starts, [flat.size]]))
    runs = [f"{int(flat[s])}:{n}" for s, n in zip(starts, lengths)]
    if flat[0]:
        runs.insert(0, "0:0")
    return ",".join(runs)


def _decode_mask(raw: Any, width: int, height: int) -> np.ndarray:
    if not isinstance(raw, dict):
        raise MalformedSyntax("mask must be an object with 'rle' or 'bitmap'")
    if isinstance(raw.get("rle"), str):
        flat = decode_rle(raw["rle"], width * height)
    elif isinstance(raw.get("bitmap"), str):
        try:
            packed = np.frombuffer(base64.b64decode(raw["bitmap"], validate=True), dtype=np.uint8)
        except ValueError:
            raise MalformedSyntax("bitmap is not valid base64") from None
        if packed.size != (width * height + 7) // 8:
            raise RleLengthMismatch(f"bitmap holds {packed.size * 8} bits, image has {width * height}")
        flat = np.unpackbits(packed)[: width * height].astype(bool)
    else:
        raise MalformedSyntax("mask must have an 'rle' string or a 'bitmap' string")
    return flat.reshape(height, width)


def parse_ground_truth(data: bytes | str, class_list: Sequence[str] | None) -> GroundTruthDocument:
    """Parse ground truth, decoding masks and computing tight boxes.

    With ``class_list=None`` class names are accepted as they appear and
    numbered in order of first appearance.

    Raises:
        MalformedSyntax: the text is not JSON or lacks the frames map.
        DocumentInvalid: lists RleLengthMismatch, UnknownClass and other
            per-record violations.
    """
    frames = _frames_map(_load_json(data))
    names = list(class_list) if class_list is not None else []
    index = {n: i for i, n in enumerate(names)}
    violations: list[DocumentError] = []
    out: dict[int, GroundTruthFrame] = {}
    for fidx in sorted(frames):
        raw = frames[fidx]
        if not isinstance(raw, dict):
            violations.append(MalformedSyntax("frame entry must be an object", fidx))
            continue
        w, h = raw.get("width"), raw.get("height")
        if not (isinstance(w, int) and isinstance(h, int) and w > 0 and h > 0):
            violations.append(MalformedSyntax("frame needs positive integer width and height", fidx))
            continue
        seq = raw.get("sequence")
        if seq is not None and not isinstance(seq, str):
            violations.append(MalformedSyntax("sequence must be a string", fidx))
            seq = None
        objs_raw = raw.get("objects", [])
        if not isinstance(objs_raw, list):
            violations.append(MalformedSyntax("objects must be a list", fidx))
            continue
        objects = []
        seen_ids = set()
        for ridx, obj in enumerate(objs_raw):
            if not isinstance(obj, dict):
                violations.append(MalformedSyntax("object record must be an object", fidx, ridx))
                continue
            name, iid = obj.get("class"), obj.get("instance_id")
            if not isinstance(name, str) or not isinstance(iid, int) or isinstance(iid, bool):
                violations.append(MalformedSyntax("object needs a string 'class' and integer 'instance_id'", fidx, ridx))
                continue
            if iid in seen_ids:
                violations.append(MalformedSyntax(f"instance_id {iid} repeated in frame", fidx, ridx))
                continue
            seen_ids.add(iid)
            if name not in index:
                if class_list is not None:
                    violations.append(UnknownClass(f"class {name!r} is not in the class list", fidx, ridx))
                    continue
                index[name] = len(names)
                names.append(name)
            try:
                image_mask = _decode_mask(obj.get("mask"), w, h)
            except DocumentError as err:
                violations.append(type(err)(err.message, fidx, ridx))
                continue
            if not image_mask.any():
                violations.append(EmptySegment("mask has no pixels", fidx, ridx))
                continue
            objects.append(GroundTruthObject.from_image_mask(image_mask, index[name], iid, fidx))
        out[fidx] = GroundTruthFrame(w, h, objects, seq)
    if violations:
        raise DocumentInvalid(violations)
    return GroundTruthDocument(out, tuple(names))


def ground_truth_to_json(doc: GroundTruthDocument, use_bitmap: bool = False) -> dict:
    frames = {}
    for fidx in sorted(doc.frames):
        fr = doc.frames[fidx]
        objs = []
        for gt in fr.objects:
            flat = gt.segment.to_image(fr.width, fr.height).ravel()
            if use_bitmap:
                mask = {"bitmap": base64.b64encode(np.packbits(flat).tobytes()).decode("ascii")}
            else:
                mask = {"rle": encode_rle(flat)}
            objs.append({"class": doc.class_names[gt.class_id], "instance_id": gt.instance_id, "mask": mask})
        entry: dict[str, Any] = {"width": fr.width, "height": fr.height, "objects": objs}
        if fr.sequence is not None:
            entry["sequence"] = fr.sequence
        frames[str(fidx)] = entry
    return {"frames": frames}


def serialize_ground_truth(doc: GroundTruthDocument, use_bitmap: bool = False) -> str:
    return json.dumps(ground_truth_to_json(doc, use_bitmap))
