"""Synthetic scenes and perturbed detections with predictable scores.

Scenes plant rectangles, ellipses and L-shapes, so some segments leave part
of their bounding box uncovered. Detections copy each object's box and then
apply translation, scale and label noise plus a covariance model:
``zero``, ``fixed`` (the same isotropic variance on both corners) or
``percentage`` (standard deviation proportional to box width / height).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import (
    GroundTruthDocument,
    GroundTruthFrame,
    detections_to_submission,
    serialize_ground_truth,
    serialize_submission,
)
from .ground_truth import GroundTruthObject
from .pbox import PBox, ProbabilisticDetection

SHAPES = ("rect", "ellipse", "lshape")
COVARIANCE_MODELS = ("zero", "fixed", "percentage")


@dataclass(frozen=True)
class SyntheticScene:
    width: int
    height: int
    objects: tuple[GroundTruthObject, ...]
    seed: int
    class_count: int
    frame_index: int = 0


@dataclass(frozen=True)
class PerturbationSpec:
    translation_sigma: float = 0.0
    scale_sigma: float = 0.0
    label_flip_prob: float = 0.0
    label_confidence: float = 1.0
    covariance_model: str = "zero"
    covariance_value: float = 0.0

    def __post_init__(self):
        if self.translation_sigma < 0 or self.scale_sigma < 0 or self.covariance_value < 0:
            raise ValueError("sigmas and covariance value must be nonnegative")
        if not (0 <= self.label_flip_prob <= 1 and 0 <= self.label_confidence <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.covariance_model not in COVARIANCE_MODELS:
            raise ValueError(f"covariance model must be one of {COVARIANCE_MODELS}")


def _shape_mask(shape: str, w: int, h: int, rng: np.random.Generator) -> np.ndarray:
    if shape == "rect":
        return np.ones((h, w), dtype=bool)
    if shape == "ellipse":
        yy, xx = np.mgrid[0:h, 0:w]
        cx, cy = (w - 1) / 2, (h - 1) / 2
        rx, ry = max(w / 2, 0.5), max(h / 2, 0.5)
        m = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        # Force the full extent so the tight box keeps size w x h.
        m[int(cy), :] = True
        m[:, int(cx)] = True
        return m
    if shape == "lshape":
        m = np.ones((h, w), dtype=bool)
        cut_w = max(1, int(w * rng.uniform(0.3, 0.6)))
        cut_h = max(1, int(h * rng.uniform(0.3, 0.6)))
        corner = rng.integers(4)
        ys = slice(0, cut_h) if corner < 2 else slice(h - cut_h, h)
        xs = slice(0, cut_w) if corner % 2 == 0 else slice(w - cut_w, w)
        m[ys, xs] = False
        return m
    raise ValueError(f"unknown shape {shape!r}")


def make_scene(
    seed: int,
    width: int = 128,
    height: int = 128,
    n_objects: int = 3,
    class_count: int = 3,
    size_range: tuple[int, int] = (12, 48),
    shapes: tuple[str, ...] = SHAPES,
    tiny_fraction: float = 0.0,
    frame_index: int = 0,
) -> SyntheticScene:
    """Plant ``n_objects`` shapes at random positions; reproducible per seed.

    ``tiny_fraction`` of the objects are drawn 3-9 px on a side so that the
    tiny-object filter is exercised.
    """
    rng = np.random.default_rng(seed)
    lo, hi = size_range
    objects = []
    for iid in range(n_objects):
        if rng.random() < tiny_fraction:
            w, h = (int(v) for v in rng.integers(3, 10, size=2))
        else:
            w, h = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        w, h = min(w, width), min(h, height)
        x0 = int(rng.integers(0, width - w + 1))
        y0 = int(rng.integers(0, height - h + 1))
        shape = shapes[int(rng.integers(len(shapes)))]
        image = np.zeros((height, width), dtype=bool)
        image[y0:y0 + h, x0:x0 + w] = _shape_mask(shape, w, h, rng)
        cls = int(rng.integers(class_count))
        objects.append(GroundTruthObject.from_image_mask(image, cls, iid, frame_index))
    return SyntheticScene(width, height, tuple(objects), seed, class_count, frame_index)


def _covariances(spec: PerturbationSpec, w: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    if spec.covariance_model == "zero":
        c = np.zeros((2, 2))
    elif spec.covariance_model == "fixed":
        c = np.diag([spec.covariance_value, spec.covariance_value])
    else:
        p = spec.covariance_value
        c = np.diag([(p * w) ** 2, (p * h) ** 2])
    return c, c.copy()


def generate(spec: PerturbationSpec, scene: SyntheticScene) -> list[ProbabilisticDetection]:
    """One perturbed detection per planted object, deterministic in the scene seed.

    The random stream does not depend on the covariance model, so two specs
    that differ only in covariance produce identically placed boxes.
    """
    rng = np.random.default_rng([scene.seed, 0x5EED])
    dets = []
    k = scene.class_count
    for gt in scene.objects:
        z = rng.standard_normal(4)
        flip = rng.random() < spec.label_flip_prob
        other = int(rng.integers(max(k - 1, 1)))
        b = gt.bbox
        x1, y1, x2, y2 = float(b.x0), float(b.y0), float(b.x1 + 1), float(b.y1 + 1)
        cx = 0.5 * (x1 + x2) + spec.translation_sigma * z[0]
        cy = 0.5 * (y1 + y2) + spec.translation_sigma * z[1]
        w = (x2 - x1) * max(0.1, 1.0 + spec.scale_sigma * z[2])
        h = (y2 - y1) * max(0.1, 1.0 + spec.scale_sigma * z[3])
        tl_cov, br_cov = _covariances(spec, w, h)
        pbox = PBox.from_box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, tl_cov, br_cov)
        label = (gt.class_id + 1 + other) % k if (flip and k > 1) else gt.class_id
        probs = np.zeros(k)
        probs[label] = spec.label_confidence
        dets.append(ProbabilisticDetection(pbox, probs, scene.frame_index))
    return dets


def write_fixture(
    out_dir: str | Path,
    n_frames: int = 10,
    seed: int = 0,
    spec: PerturbationSpec | None = None,
    class_names: tuple[str, ...] = ("cup", "bottle", "laptop"),
    width: int = 128,
    height: int = 128,
    n_objects: int = 3,
    sequences: int = 2,
) -> dict[str, Path]:
    """Write ``gt.json``, ``det.json`` and ``classes.json`` for a synthetic set."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = spec or PerturbationSpec()
    frames = {}
    dets = {}
    for f in range(n_frames):
        scene = make_scene(
            seed * 100_003 + f,
            width,
            height,
            n_objects,
            len(class_names),
            frame_index=f,
        )
        seq = f"seq{f * sequences // max(n_frames, 1):02d}"
        frames[f] = GroundTruthFrame(width, height, list(scene.objects), seq)
        dets[f] = generate(spec, scene)
    paths = {"gt": out / "gt.json", "det": out / "det.json", "classes": out / "classes.json"}
    paths["gt"].write_text(serialize_ground_truth(GroundTruthDocument(frames, tuple(class_names))))
    paths["det"].write_text(serialize_submission(detections_to_submission(dets)))
    paths["classes"].write_text(json.dumps(list(class_names)))
    return paths
