"""Numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the extension is benchmarked and cross-checked against. Both
modules expose the same three functions with identical semantics.

The bivariate normal routine follows Genz's BVNU (Drezner-Wesolowsky with
Gauss-Legendre quadrature, plus an asymptotic expansion for |r| >= 0.925),
accurate to about 1e-15.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

_TWO_PI = 2.0 * math.pi
# Standardized limits beyond this are saturated; Phi(-40) underflows to 0.
_Z_CLIP = 40.0
_CHUNK = 1 << 15

_GL6_X = (0.9324695142031522, 0.6612093864662647, 0.2386191860831970)
_GL6_W = (0.1713244923791705, 0.3607615730481384, 0.4679139345726904)
_GL12_X = (
    0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
    0.5873179542866171, 0.3678314989981802, 0.1252334085114692,
)
_GL12_W = (
    0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
    0.2031674267230659, 0.2334925365383547, 0.2491470458134029,
)
_GL20_X = (
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
    0.07652652113349733,
)
_GL20_W = (
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
    0.1527533871307259,
)


def _nodes(r: float) -> tuple[np.ndarray, np.ndarray]:
    ar = abs(r)
    if ar < 0.3:
        x, w = _GL6_X, _GL6_W
    elif ar < 0.75:
        x, w = _GL12_X, _GL12_W
    else:
        x, w = _GL20_X, _GL20_W
    x = np.asarray(x)
    w = np.asarray(w)
    return np.concatenate([1.0 - x, 1.0 + x]), np.concatenate([w, w])


def _bvnu(h: np.ndarray, k: np.ndarray, r: float) -> np.ndarray:
    """Upper orthant P(X > h, Y > k) for a standard bivariate normal, 1-d inputs."""
    if r == 0.0:
        return ndtr(-h) * ndtr(-k)
    x, w = _nodes(r)
    hk = h * k
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(r)
        sn = np.sin(asr * x)
        expo = (hk[:, None] * sn[None, :] - hs[:, None]) / (1.0 - sn * sn)[None, :]
        bvn = np.exp(expo) @ w
        bvn = bvn * asr / _TWO_PI + ndtr(-h) * ndtr(-k)
        return np.clip(bvn, 0.0, 1.0)

    if r < 0.0:
        k = -k
        hk = -hk
    bvn = np.zeros_like(h)
    if abs(r) < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        asr = -0.5 * (bs / as_ + hk)
        with np.errstate(over="ignore", invalid="ignore"):
            t1 = np.where(
                asr > -100.0,
                a * np.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_),
                0.0,
            )
            b = np.sqrt(bs)
            sp = math.sqrt(_TWO_PI) * ndtr(-b / a)
            t2 = np.where(
                hk > -100.0,
                np.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0),
                0.0,
            )
            bvn = t1 - t2
            a2 = 0.5 * a
            xs = (a2 * x) ** 2
            asr2 = -0.5 * (bs[:, None] / xs[None, :] + hk[:, None])
            sp2 = 1.0 + c[:, None] * xs[None, :] * (1.0 + 5.0 * d[:, None] * xs[None, :])
            rs = np.sqrt(1.0 - xs)
            ep = np.exp(-0.5 * hk[:, None] * (xs / (1.0 + rs) ** 2)[None, :]) / rs[None, :]
            terms = np.where(asr2 > -100.0, np.exp(asr2) * (sp2 - ep), 0.0)
        bvn = (a2 * (terms @ w) - bvn) / _TWO_PI
    if r > 0.0:
        bvn = bvn + ndtr(-np.maximum(h, k))
    else:
        span = np.where(h < 0.0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
        bvn = np.where(h >= k, -bvn, span - bvn)
    return np.clip(bvn, 0.0, 1.0)


def bvn_cdf(h: float, k: float, r: float) -> float:
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation r."""
    hh = np.array([-min(max(h, -_Z_CLIP), _Z_CLIP)])
    kk = np.array([-min(max(k, -_Z_CLIP), _Z_CLIP)])
    return float(_bvnu(hh, kk, r)[0])


def bvn_cdf_grid(hs: np.ndarray, ks: np.ndarray, r: float) -> np.ndarray:
    """Evaluate ``bvn_cdf(hs[j], ks[i], r)`` into a ``(len(ks), len(hs))`` array."""
    hs = np.clip(np.asarray(hs, dtype=np.float64), -_Z_CLIP, _Z_CLIP)
    ks = np.clip(np.asarray(ks, dtype=np.float64), -_Z_CLIP, _Z_CLIP)
    hh = np.broadcast_to(-hs[None, :], (ks.size, hs.size)).ravel()
    kk = np.broadcast_to(-ks[:, None], (ks.size, hs.size)).ravel()
    out = np.empty(hh.size)
    for start in range(0, hh.size, _CHUNK):
        stop = start + _CHUNK
        out[start:stop] = _bvnu(hh[start:stop], kk[start:stop], r)
    return out.reshape(ks.size, hs.size)


def region_sums(
    values: np.ndarray,
    segment: np.ndarray,
    seg_x: int,
    seg_y: int,
    threshold: float,
    eps: float,
) -> tuple[float, int, int, float]:
    """Loss accumulators for one heatmap against one segment.

    ``segment`` is the boolean mask over the ground-truth bounding box, placed
    at column ``seg_x`` and row ``seg_y`` of ``values`` (offsets may be negative
    or exceed the heatmap). Returns ``(fg_log_sum, n_inside, n_hit, bg_sum)``:
    the sum of ``log(max(v, eps))`` over segment pixels covered by the heatmap,
    how many such pixels there are, how many of them carry ``v > 0``, and the
    sum of ``-log(max(1 - v, eps))`` over heatmap cells with ``v > threshold``
    that lie outside the bounding box.
    """
    hh, hw = values.shape
    sh, sw = segment.shape
    oy0, oy1 = max(0, seg_y), min(hh, seg_y + sh)
    ox0, ox1 = max(0, seg_x), min(hw, seg_x + sw)

    above = values > threshold
    bg = np.where(above, -np.log(np.maximum(1.0 - values, eps)), 0.0)
    fg_log_sum = 0.0
    n_inside = n_hit = 0
    if oy0 < oy1 and ox0 < ox1:
        sub = values[oy0:oy1, ox0:ox1]
        seg = segment[oy0 - seg_y:oy1 - seg_y, ox0 - seg_x:ox1 - seg_x]
        covered = sub[seg]
        n_inside = int(covered.size)
        n_hit = int(np.count_nonzero(covered > 0.0))
        fg_log_sum = float(np.log(np.maximum(covered, eps)).sum())
        bg[oy0:oy1, ox0:ox1] = 0.0
    return fg_log_sum, n_inside, n_hit, float(bg.sum())


def background_table(values: np.ndarray, threshold: float, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row tables of the background terms ``-log(max(1 - v, eps))`` for ``v > threshold``.

    Returns ``(row_sums, left, right)`` with ``left[y, x]`` the sum of row ``y``
    over columns ``< x`` and ``right[y, x]`` the sum over columns ``>= x``; both
    have one more column than ``values``.
    """
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    terms = np.zeros((h, w))
    on = values > threshold
    terms[on] = -np.log(np.maximum(1.0 - values[on], eps))
    left = np.zeros((h, w + 1))
    right = np.zeros((h, w + 1))
    np.cumsum(terms, axis=1, out=left[:, 1:])
    np.cumsum(terms[:, ::-1], axis=1, out=right[:, -2::-1])
    return left[:, -1].copy(), left, right


def pair_sums(
    values: np.ndarray,
    heat_x: int,
    heat_y: int,
    segment: np.ndarray,
    seg_x: int,
    seg_y: int,
    row_sums: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    eps: float,
) -> tuple[float, int, int, float]:
    """Loss accumulators for one heatmap and one ground truth, in image coordinates.

    The heatmap's top-left cell sits at ``(heat_x, heat_y)``; ``segment`` spans
    the ground truth's bounding box from ``(seg_x, seg_y)``. The foreground
    part is ``region_sums`` over the overlap. The background sum is read from
    ``background_table`` rows: whole rows outside the box plus the parts of
    box rows left and right of it.
    """
    h, w = values.shape
    sh, sw = segment.shape
    r0, r1 = min(max(seg_y - heat_y, 0), h), min(max(seg_y + sh - heat_y, 0), h)
    c0, c1 = min(max(seg_x - heat_x, 0), w), min(max(seg_x + sw - heat_x, 0), w)
    fg, n_in, n_hit = 0.0, 0, 0
    if r0 < r1 and c0 < c1:
        seg = segment[r0 + heat_y - seg_y:r1 + heat_y - seg_y, c0 + heat_x - seg_x:c1 + heat_x - seg_x]
        covered = values[r0:r1, c0:c1][seg]
        n_in = int(covered.size)
        n_hit = int(np.count_nonzero(covered > 0.0))
        fg = float(np.log(np.maximum(covered, eps)).sum())
    bg = float(row_sums[:r0].sum() + row_sums[r1:].sum())
    if r0 < r1:
        bg += float(left[r0:r1, c0].sum() + right[r0:r1, c1].sum())
    return fg, n_in, n_hit, bg
