"""Integer pixel rectangles.

All rectangles use inclusive pixel indices: ``Rect(2, 3, 7, 5)`` covers
columns 2..7 and rows 3..5. Pixel ``(i, j)`` has its center at
``(i + 0.5, j + 0.5)`` in continuous image coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return max(0, self.x1 - self.x0 + 1)

    @property
    def height(self) -> int:
        return max(0, self.y1 - self.y0 + 1)

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def is_empty(self) -> bool:
        return self.x1 < self.x0 or self.y1 < self.y0

    def intersect(self, other: Rect) -> Rect:
        return Rect(
            max(self.x0, other.x0),
            max(self.y0, other.y0),
            min(self.x1, other.x1),
            min(self.y1, other.y1),
        )

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


EMPTY_RECT = Rect(0, 0, -1, -1)


def image_rect(width: int, height: int) -> Rect:
    return Rect(0, 0, width - 1, height - 1)
