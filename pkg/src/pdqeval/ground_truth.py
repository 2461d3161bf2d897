"""Ground-truth instances, the tiny-object filter, and dataset statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyMask
from .geometry import Rect

TINY_MIN_SIDE = 10
TINY_MIN_PIXELS = 100

STATS_LABELS = (
    "number of images",
    "ground truth objects",
    "avg objects per image",
    "avg pixels per object",
    "empty images",
)


@dataclass(frozen=True)
class SegmentMask:
    """Boolean mask over a rectangle of the image.

    ``bits[j, i]`` is pixel ``(origin[0] + i, origin[1] + j)``.
    """

    origin: tuple[int, int]
    width: int
    height: int
    bits: np.ndarray
    pixel_count: int = field(init=False)

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise ValueError(f"bits shape {bits.shape} != ({self.height}, {self.width})")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        object.__setattr__(self, "pixel_count", int(np.count_nonzero(bits)))

    @classmethod
    def from_image(cls, image_mask: np.ndarray) -> SegmentMask:
        """Crop a full-image boolean mask to its tight bounding box."""
        image_mask = np.asarray(image_mask, dtype=bool)
        full = cls((0, 0), image_mask.shape[1], image_mask.shape[0], image_mask)
        if full.pixel_count == 0:
            return full
        box = tight_bbox(full)
        crop = image_mask[box.y0:box.y1 + 1, box.x0:box.x1 + 1]
        return cls((box.x0, box.y0), box.width, box.height, crop)

    def to_image(self, width: int, height: int) -> np.ndarray:
        out = np.zeros((height, width), dtype=bool)
        x0, y0 = self.origin
        out[y0:y0 + self.height, x0:x0 + self.width] = self.bits
        return out

    def pixels(self) -> np.ndarray:
        """Absolute ``(x, y)`` coordinates of set pixels, row-major order."""
        ys, xs = np.nonzero(self.bits)
        return np.column_stack([xs + self.origin[0], ys + self.origin[1]])


def tight_bbox(mask: SegmentMask) -> Rect:
    """Smallest rectangle containing every set pixel of ``mask``.

    Raises:
        EmptyMask: if no pixel is set.
    """
    if mask.pixel_count == 0:
        raise EmptyMask("cannot take the bounding box of an empty mask")
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    x0, y0 = mask.origin
    return Rect(x0 + int(cols[0]), y0 + int(rows[0]), x0 + int(cols[-1]), y0 + int(rows[-1]))


@dataclass(frozen=True)
class GroundTruthObject:
    """One annotated instance.

    ``segment`` is stored over exactly ``bbox``; constructing from a looser
    mask crops it. ``image_size`` is ``(width, height)`` when known and bounds
    the pixels a detection can be penalized for.
    """

    class_id: int
    instance_id: int
    segment: SegmentMask
    bbox: Rect = field(init=False)
    frame_index: int = 0
    image_size: tuple[int, int] | None = None

    def __post_init__(self):
        box = tight_bbox(self.segment)
        seg = self.segment
        if (seg.origin, seg.width, seg.height) != ((box.x0, box.y0), box.width, box.height):
            i0, j0 = box.x0 - seg.origin[0], box.y0 - seg.origin[1]
            bits = seg.bits[j0:j0 + box.height, i0:i0 + box.width]
            seg = SegmentMask((box.x0, box.y0), box.width, box.height, bits)
            object.__setattr__(self, "segment", seg)
        object.__setattr__(self, "bbox", box)

    @classmethod
    def from_image_mask(
        cls, image_mask: np.ndarray, class_id: int, instance_id: int, frame_index: int = 0
    ) -> GroundTruthObject:
        image_mask = np.asarray(image_mask, dtype=bool)
        h, w = image_mask.shape
        return cls(
            class_id,
            instance_id,
            SegmentMask.from_image(image_mask),
            frame_index=frame_index,
            image_size=(w, h),
        )

    @property
    def pixel_count(self) -> int:
        return self.segment.pixel_count


def is_tiny(gt: GroundTruthObject) -> bool:
    """True for objects under 10px on either side or under 100 pixels."""
    return (
        gt.bbox.width < TINY_MIN_SIDE
        or gt.bbox.height < TINY_MIN_SIDE
        or gt.pixel_count < TINY_MIN_PIXELS
    )


@dataclass(frozen=True)
class DatasetStats:
    num_images: int
    num_objects: int
    empty_images: int
    avg_objects_per_image: float
    avg_pixels_per_object: float
    per_class_counts: dict = field(default_factory=dict)

    def rows(self) -> list[tuple[str, str]]:
        return [
            (STATS_LABELS[0], f"{self.num_images:,}"),
            (STATS_LABELS[1], f"{self.num_objects:,}"),
            (STATS_LABELS[2], f"{self.avg_objects_per_image:.2f}"),
            (STATS_LABELS[3], f"{self.avg_pixels_per_object:,.1f}"),
            (STATS_LABELS[4], f"{self.empty_images:,}"),
        ]


def compute_stats(
    frames: Iterable[Sequence[GroundTruthObject]],
    filter_tiny: bool = False,
) -> DatasetStats:
    """Table-style statistics over frames of ground-truth objects.

    ``empty_images`` always counts frames with no raw annotations; with
    ``filter_tiny`` the object counts and averages skip tiny instances.
    """
    num_images = num_objects = empty = total_pixels = 0
    per_class: Counter = Counter()
    for objs in frames:
        num_images += 1
        if len(objs) == 0:
            empty += 1
        for gt in objs:
            if filter_tiny and is_tiny(gt):
                continue
            num_objects += 1
            total_pixels += gt.pixel_count
            per_class[gt.class_id] += 1
    return DatasetStats(
        num_images=num_images,
        num_objects=num_objects,
        empty_images=empty,
        avg_objects_per_image=num_objects / num_images if num_images else 0.0,
        avg_pixels_per_object=total_pixels / num_objects if num_objects else 0.0,
        per_class_counts=dict(sorted(per_class.items())),
    )


def format_stats(stats: DatasetStats, class_names: Sequence[str] | None = None) -> str:
    rows = stats.rows()
    width = max(len(label) for label, _ in rows)
    lines = [f"{label:<{width}}  {value:>12}" for label, value in rows]
    if stats.per_class_counts:
        lines.append("")
        lines.append("objects per class")
        for cid, count in stats.per_class_counts.items():
            name = class_names[cid] if class_names and 0 <= cid < len(class_names) else str(cid)
            lines.append(f"  {name:<{width - 2}}  {count:>12,}")
    return "\n".join(lines)
