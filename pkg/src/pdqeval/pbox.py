"""Probabilistic bounding boxes and their per-pixel inclusion probabilities.

A PBox has two Gaussian corners, modeled as independent. A point ``p`` lies
inside the box with probability ``P(TL <= p) * P(BR >= p)`` (componentwise).
Zero variance on an axis turns that axis into a closed step, so a PBox with
zero covariances reproduces an ordinary inclusive box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import kernels
from .errors import InvalidCovariance, InvalidProbabilities, InvalidThreshold
from .geometry import EMPTY_RECT, Rect

DEFAULT_THRESHOLD = 0.0027
# Relative tolerance for symmetry / PSD checks on user-supplied covariances.
_COV_RTOL = 1e-9
_SQRT1_2 = math.sqrt(0.5)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def canonical_covariance(cov) -> np.ndarray:
    """Validate a 2x2 covariance and return a symmetric, exactly-PSD copy.

    Raises:
        InvalidCovariance: wrong shape, non-finite, asymmetric, or not PSD.
    """
    c = np.array(cov, dtype=np.float64)
    if c.shape != (2, 2) or not np.all(np.isfinite(c)):
        raise InvalidCovariance(f"covariance must be a finite 2x2 matrix, got {cov!r}")
    scale = max(1.0, float(np.abs(c).max()))
    if abs(c[0, 1] - c[1, 0]) > _COV_RTOL * scale:
        raise InvalidCovariance(f"covariance is not symmetric: {c.tolist()}")
    off = 0.5 * (c[0, 1] + c[1, 0])
    vx, vy = c[0, 0], c[1, 1]
    if vx < -_COV_RTOL * scale or vy < -_COV_RTOL * scale:
        raise InvalidCovariance(f"negative variance in {c.tolist()}")
    vx, vy = max(vx, 0.0), max(vy, 0.0)
    bound = math.sqrt(vx * vy)
    if abs(off) > bound + _COV_RTOL * scale:
        raise InvalidCovariance(f"covariance is not positive semi-definite: {c.tolist()}")
    off = math.copysign(min(abs(off), bound), off)
    return np.array([[vx, off], [off, vy]])


@dataclass(frozen=True)
class GaussianCorner:
    mean: np.ndarray
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        if mean.shape != (2,) or not np.all(np.isfinite(mean)):
            raise ValueError(f"corner mean must be a finite 2-vector, got {self.mean!r}")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "covariance", _frozen(canonical_covariance(self.covariance)))

    @property
    def std(self) -> tuple[float, float]:
        return math.sqrt(self.covariance[0, 0]), math.sqrt(self.covariance[1, 1])

    @property
    def is_deterministic(self) -> bool:
        return not np.any(self.covariance)


@dataclass(frozen=True)
class PBox:
    top_left: GaussianCorner
    bottom_right: GaussianCorner

    def __post_init__(self):
        tl, br = self.top_left.mean, self.bottom_right.mean
        if tl[0] > br[0] or tl[1] > br[1]:
            raise ValueError(f"inverted box: top-left {tl.tolist()} bottom-right {br.tolist()}")

    @classmethod
    def from_box(cls, x1: float, y1: float, x2: float, y2: float, tl_cov=None, br_cov=None) -> PBox:
        """Build a PBox from corner means; missing covariances are zero."""
        zero = np.zeros((2, 2))
        return cls(
            GaussianCorner((x1, y1), zero if tl_cov is None else tl_cov),
            GaussianCorner((x2, y2), zero if br_cov is None else br_cov),
        )

    @property
    def mean_box(self) -> tuple[float, float, float, float]:
        return (*self.top_left.mean.tolist(), *self.bottom_right.mean.tolist())


@dataclass(frozen=True)
class ProbabilisticDetection:
    pbox: PBox
    label_probs: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        probs = np.array(self.label_probs, dtype=np.float64).reshape(-1)
        if np.any(~np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs > 1.0):
            raise InvalidProbabilities(f"label probabilities must lie in [0, 1]: {probs.tolist()}")
        if probs.sum() > 1.0 + 1e-6:
            raise InvalidProbabilities(f"label probabilities sum to {probs.sum():.6g} > 1")
        object.__setattr__(self, "label_probs", _frozen(probs))

    @property
    def predicted_class(self) -> int:
        """Most probable class; ties go to the lowest index."""
        return int(np.argmax(self.label_probs)) if self.label_probs.size else -1


@dataclass(frozen=True)
class Heatmap:
    """Inclusion probabilities over a rectangle of pixels.

    ``values[j, i]`` belongs to pixel ``(origin[0] + i, origin[1] + j)``.
    """

    origin: tuple[int, int]
    width: int
    height: int
    values: np.ndarray

    @property
    def rect(self) -> Rect:
        if self.width == 0 or self.height == 0:
            return EMPTY_RECT
        x0, y0 = self.origin
        return Rect(x0, y0, x0 + self.width - 1, y0 + self.height - 1)

    def at(self, x: int, y: int) -> float:
        """Value at absolute pixel ``(x, y)``; zero outside the stored region."""
        i, j = x - self.origin[0], y - self.origin[1]
        if 0 <= i < self.width and 0 <= j < self.height:
            return float(self.values[j, i])
        return 0.0

    def with_values(self, values: np.ndarray) -> Heatmap:
        values = np.array(values, dtype=np.float64)
        if values.shape != (self.height, self.width):
            raise ValueError("replacement values must keep the heatmap shape")
        return Heatmap(self.origin, self.width, self.height, _frozen(values))


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold < 0.5:
        raise InvalidThreshold(f"threshold must lie in (0, 0.5), got {threshold}")


def _step(mean: float, x: float) -> float:
    return 1.0 if mean <= x else 0.0


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z * _SQRT1_2)


def _corner_cdf(px: float, py: float, mx: float, my: float, cov: np.ndarray) -> float:
    vx, vy, c = cov[0, 0], cov[1, 1], cov[0, 1]
    if vx == 0.0 or vy == 0.0 or c == 0.0:
        fx = _step(mx, px) if vx == 0.0 else _phi((px - mx) / math.sqrt(vx))
        fy = _step(my, py) if vy == 0.0 else _phi((py - my) / math.sqrt(vy))
        return fx * fy
    sx, sy = math.sqrt(vx), math.sqrt(vy)
    r = min(1.0, max(-1.0, c / (sx * sy)))
    return kernels.bvn_cdf((px - mx) / sx, (py - my) / sy, r)


def bivariate_normal_cdf(point, mean, covariance) -> float:
    """``P(X <= point)`` componentwise for ``X ~ N(mean, covariance)``.

    A zero variance makes that axis a closed step at the mean. Diagonal
    covariances use the product of 1-d CDFs.

    Raises:
        InvalidCovariance: if ``covariance`` is not symmetric PSD.
    """
    cov = canonical_covariance(covariance)
    px, py = (float(v) for v in point)
    mx, my = (float(v) for v in mean)
    return _corner_cdf(px, py, mx, my, cov)


def pixel_inclusion_probability(point, pbox: PBox) -> float:
    """Probability that continuous ``point`` falls inside ``pbox``."""
    px, py = (float(v) for v in point)
    tl, br = pbox.top_left, pbox.bottom_right
    p_tl = _corner_cdf(px, py, tl.mean[0], tl.mean[1], tl.covariance)
    if p_tl == 0.0:
        return 0.0
    # P(BR >= p) is the CDF of -BR at -p; the covariance is unchanged by the flip.
    p_br = _corner_cdf(-px, -py, -br.mean[0], -br.mean[1], br.covariance)
    return p_tl * p_br


def _axis_cdf(coords: np.ndarray, mean: float, var: float) -> np.ndarray:
    if var == 0.0:
        return (mean <= coords).astype(np.float64)
    return ndtr((coords - mean) / math.sqrt(var))


def _corner_grid(xs: np.ndarray, ys: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """``P(C <= (x, y))`` on the grid ``ys x xs``."""
    vx, vy, c = cov[0, 0], cov[1, 1], cov[0, 1]
    if vx == 0.0 or vy == 0.0 or c == 0.0:
        return np.outer(_axis_cdf(ys, mean[1], vy), _axis_cdf(xs, mean[0], vx))
    sx, sy = math.sqrt(vx), math.sqrt(vy)
    r = min(1.0, max(-1.0, c / (sx * sy)))
    return kernels.bvn_cdf_grid((xs - mean[0]) / sx, (ys - mean[1]) / sy, r)


def inclusion_grid(pbox: PBox, rect: Rect) -> np.ndarray:
    """Inclusion probability at every pixel center of ``rect`` (rows are y)."""
    if rect.is_empty:
        return np.zeros((0, 0))
    xs = np.arange(rect.x0, rect.x1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(rect.y0, rect.y1 + 1, dtype=np.float64) + 0.5
    tl, br = pbox.top_left, pbox.bottom_right
    p_tl = _corner_grid(xs, ys, tl.mean, tl.covariance)
    p_br = _corner_grid(-xs, -ys, -br.mean, br.covariance)
    return p_tl * p_br


def _candidate_region(pbox: PBox, threshold: float) -> Rect:
    # Marginal tail bound: P(TL_x <= x) < t left of mean - z*sd, likewise for
    # the other three edges. Widened by one pixel against rounding.
    z = float(ndtri(1.0 - threshold))
    tl, br = pbox.top_left, pbox.bottom_right
    tsx, tsy = tl.std
    bsx, bsy = br.std
    lo_x, lo_y = tl.mean[0] - z * tsx, tl.mean[1] - z * tsy
    hi_x, hi_y = br.mean[0] + z * bsx, br.mean[1] + z * bsy
    return Rect(
        math.ceil(lo_x - 0.5) - 1,
        math.ceil(lo_y - 0.5) - 1,
        math.floor(hi_x - 0.5) + 1,
        math.floor(hi_y - 0.5) + 1,
    )


def _raster(pbox: PBox, threshold: float, clip: Rect | None) -> tuple[Rect, np.ndarray]:
    _check_threshold(threshold)
    rect = _candidate_region(pbox, threshold)
    if clip is not None:
        rect = rect.intersect(clip)
    if rect.is_empty:
        return EMPTY_RECT, np.zeros((0, 0))
    grid = inclusion_grid(pbox, rect)
    keep = grid >= threshold
    rows = np.flatnonzero(keep.any(axis=1))
    cols = np.flatnonzero(keep.any(axis=0))
    if rows.size == 0:
        return EMPTY_RECT, np.zeros((0, 0))
    j0, j1, i0, i1 = rows[0], rows[-1], cols[0], cols[-1]
    tight = Rect(rect.x0 + int(i0), rect.y0 + int(j0), rect.x0 + int(i1), rect.y0 + int(j1))
    values = np.where(keep, grid, 0.0)[j0:j1 + 1, i0:i1 + 1]
    return tight, values


def support_region(pbox: PBox, threshold: float = DEFAULT_THRESHOLD, clip: Rect | None = None) -> Rect:
    """Tightest pixel rectangle holding every center with probability >= threshold.

    Pixels outside the returned rectangle have inclusion probability below
    ``threshold``. Returns an empty rectangle when no pixel reaches it.
    ``clip`` optionally restricts the search, typically to the image.

    Raises:
        InvalidThreshold: unless ``0 < threshold < 0.5``.
    """
    return _raster(pbox, threshold, clip)[0]


def rasterize(pbox: PBox, threshold: float = DEFAULT_THRESHOLD, clip: Rect | None = None) -> Heatmap:
    """Heatmap of inclusion probabilities over the support region.

    Cells are evaluated at pixel centers; values below ``threshold`` are
    stored as exactly 0.
    """
    rect, values = _raster(pbox, threshold, clip)
    if rect.is_empty:
        return Heatmap((0, 0), 0, 0, _frozen(np.zeros((0, 0))))
    return Heatmap((rect.x0, rect.y0), rect.width, rect.height, _frozen(np.ascontiguousarray(values)))
