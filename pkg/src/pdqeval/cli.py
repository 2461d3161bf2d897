"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DocumentError, DocumentInvalid, InvalidThreshold
from .evaluation import evaluate
from .formats import load_class_list, parse_ground_truth, parse_submission
from .geometry import image_rect
from .ground_truth import compute_stats, format_stats
from .pbox import DEFAULT_THRESHOLD, rasterize
from .report import FORMATS, labelled_breakdowns, render_report
from .synth import PerturbationSpec, write_fixture

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

log = logging.getLogger("pdqeval")


class _IOFailure(Exception):
    pass


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc.strerror or exc}") from None


def _report_invalid(err: Exception) -> int:
    if isinstance(err, DocumentInvalid):
        for v in err.violations:
            print(v, file=sys.stderr)
    else:
        print(err, file=sys.stderr)
    return EXIT_INVALID


def _classes(path: str) -> list[str]:
    try:
        return load_class_list(path)
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc.strerror or exc}") from None


def cmd_evaluate(args) -> int:
    classes = _classes(args.classes)
    gt_doc = parse_ground_truth(_read(args.gt), classes)
    sub_doc = parse_submission(_read(args.det), len(classes))
    result = evaluate(gt_doc, sub_doc, args.threshold, args.class_aware, args.workers)
    breakdowns = labelled_breakdowns(result.per_sequence, result.per_class, gt_doc.class_names)
    text = render_report(result.summary, breakdowns, args.format)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise _IOFailure(f"cannot write {args.out}: {exc.strerror or exc}") from None
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    classes = _classes(args.classes)
    doc = parse_submission(_read(args.det), len(classes))
    n = sum(len(v) for v in doc.frames.values())
    print(f"ok: {len(doc.frames)} frame(s), {n} detection(s)")
    return EXIT_OK


def cmd_stats(args) -> int:
    classes = _classes(args.classes) if args.classes else None
    doc = parse_ground_truth(_read(args.gt), classes)
    stats = compute_stats((f.objects for f in doc.frames.values()), filter_tiny=args.filter_tiny)
    print(format_stats(stats, doc.class_names))
    return EXIT_OK


def cmd_render(args) -> int:
    doc = parse_submission(_read(args.det), None)
    dets = doc.detections().get(args.frame)
    if dets is None:
        print(f"frame {args.frame} not found in {args.det}", file=sys.stderr)
        return EXIT_INVALID
    clip = None
    if args.size:
        try:
            w, h = (int(v) for v in args.size.lower().split("x"))
        except ValueError:
            print(f"--size must look like 640x480, got {args.size!r}", file=sys.stderr)
            return EXIT_INVALID
        clip = image_rect(w, h)
    if clip is None:
        # Fit the canvas to the detections' unclipped support.
        extents = [m for m in (rasterize(d.pbox, args.threshold) for d in dets) if m.width > 0]
        clip = image_rect(
            max([m.rect.x1 + 1 for m in extents], default=1),
            max([m.rect.y1 + 1 for m in extents], default=1),
        )
    maps = [m for m in (rasterize(d.pbox, args.threshold, clip) for d in dets) if m.width > 0]
    canvas = np.zeros((clip.height, clip.width))
    for m in maps:
        r = m.rect
        canvas[r.y0:r.y1 + 1, r.x0:r.x1 + 1] = np.maximum(canvas[r.y0:r.y1 + 1, r.x0:r.x1 + 1], m.values)
    image = Image.fromarray(np.round(canvas * 255).astype(np.uint8))
    try:
        image.save(args.out)
    except (OSError, ValueError) as exc:
        raise _IOFailure(f"cannot write {args.out}: {exc}") from None
    print(f"wrote {clip.width}x{clip.height} heatmap of {len(dets)} detection(s) to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = PerturbationSpec(
        translation_sigma=args.translation,
        label_flip_prob=args.flip,
        covariance_model=args.covariance,
        covariance_value=args.covariance_value,
    )
    try:
        paths = write_fixture(args.out, args.frames, args.seed, spec, width=args.width, height=args.height)
    except OSError as exc:
        raise _IOFailure(f"cannot write fixture: {exc}") from None
    for key, p in paths.items():
        print(f"{key}: {p}")
    return EXIT_OK


def _threshold(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 0.5:
        raise argparse.ArgumentTypeError("threshold must lie in (0, 0.5)")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdqeval", description="Probability-based Detection Quality evaluation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a submission against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--det", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--format", choices=FORMATS, default="table")
    p.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
    p.add_argument("--out")
    p.add_argument("--class-aware", action="store_true", help="only match detections whose top class equals the ground truth's")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $PDQEVAL_WORKERS or 1)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate", help="check a submission file")
    p.add_argument("--det", required=True)
    p.add_argument("--classes", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="dataset statistics of a ground-truth file")
    p.add_argument("--gt", required=True)
    p.add_argument("--classes")
    p.add_argument("--filter-tiny", action="store_true", help="exclude tiny objects from counts and averages")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("render", help="write a grayscale heatmap of one frame's detections")
    p.add_argument("--det", required=True)
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", help="image size WxH; default fits the detections")
    p.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", help="write a synthetic ground-truth / submission fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--translation", type=float, default=0.0)
    p.add_argument("--flip", type=float, default=0.0)
    p.add_argument("--covariance", choices=("zero", "fixed", "percentage"), default="zero")
    p.add_argument("--covariance-value", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _IOFailure as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except (DocumentInvalid, DocumentError, InvalidThreshold) as exc:
        return _report_invalid(exc)


if __name__ == "__main__":
    sys.exit(main())
