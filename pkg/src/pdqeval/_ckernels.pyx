# cython: language_level=3
"""Compiled hot kernels: bivariate normal CDF rasters and loss accumulation.

Mirrors ``_pykernels`` function for function.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport asin, sin, exp, log, sqrt, erfc, fabs, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI
cdef double Z_CLIP = 40.0
cdef double SQRT1_2 = 0.70710678118654752440

cdef double[3] GL6_X = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970]
cdef double[3] GL6_W = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904]
cdef double[6] GL12_X = [0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                         0.5873179542866171, 0.3678314989981802, 0.1252334085114692]
cdef double[6] GL12_W = [0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                         0.2031674267230659, 0.2334925365383547, 0.2491470458134029]
cdef double[10] GL20_X = [0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                          0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                          0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                          0.07652652113349733]
cdef double[10] GL20_W = [0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                          0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                          0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                          0.1527533871307259]


cdef inline double phid(double z) nogil:
    return 0.5 * erfc(-z * SQRT1_2)


cdef inline double clipz(double z) nogil:
    if z > Z_CLIP:
        return Z_CLIP
    if z < -Z_CLIP:
        return -Z_CLIP
    return z


cdef struct Quad:
    int n
    double x[20]
    double w[20]
    # |r| < 0.925 branch
    double asr
    double sn[20]
    double inv_1msn2[20]
    # |r| >= 0.925 branch
    double as_
    double a
    double xs[20]
    double rs[20]


cdef Quad make_quad(double r) nogil:
    cdef Quad q
    cdef int i, m
    cdef double ar = fabs(r)
    cdef const double* px
    cdef const double* pw
    if ar < 0.3:
        m = 3
        px = GL6_X
        pw = GL6_W
    elif ar < 0.75:
        m = 6
        px = GL12_X
        pw = GL12_W
    else:
        m = 10
        px = GL20_X
        pw = GL20_W
    q.n = 2 * m
    for i in range(m):
        q.x[i] = 1.0 - px[i]
        q.x[i + m] = 1.0 + px[i]
        q.w[i] = pw[i]
        q.w[i + m] = pw[i]
    if ar < 0.925:
        q.asr = 0.5 * asin(r)
        for i in range(q.n):
            q.sn[i] = sin(q.asr * q.x[i])
            q.inv_1msn2[i] = 1.0 / (1.0 - q.sn[i] * q.sn[i])
    elif ar < 1.0:
        q.as_ = (1.0 - r) * (1.0 + r)
        q.a = sqrt(q.as_)
        for i in range(q.n):
            q.xs[i] = (0.5 * q.a * q.x[i]) * (0.5 * q.a * q.x[i])
            q.rs[i] = sqrt(1.0 - q.xs[i])
    return q


cdef double bvnu(double h, double k, double r, Quad* q) nogil:
    """Upper orthant P(X > h, Y > k), standard bivariate normal."""
    cdef double hk, hs, bvn, as_, a, bs, c, d, asr, b, sp, a2, xs, sp2, ep, span
    cdef int i
    if r == 0.0:
        return phid(-h) * phid(-k)
    hk = h * k
    if fabs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        bvn = 0.0
        for i in range(q.n):
            bvn += q.w[i] * exp((q.sn[i] * hk - hs) * q.inv_1msn2[i])
        bvn = bvn * q.asr / TWO_PI + phid(-h) * phid(-k)
    else:
        if r < 0.0:
            k = -k
            hk = -hk
        bvn = 0.0
        if fabs(r) < 1.0:
            as_ = q.as_
            a = q.a
            bs = (h - k) * (h - k)
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            asr = -0.5 * (bs / as_ + hk)
            if asr > -100.0:
                bvn = a * exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_)
            if hk > -100.0:
                b = sqrt(bs)
                sp = sqrt(TWO_PI) * phid(-b / a)
                bvn = bvn - exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
            a2 = 0.5 * a
            sp = 0.0
            for i in range(q.n):
                xs = q.xs[i]
                asr = -0.5 * (bs / xs + hk)
                if asr > -100.0:
                    sp2 = 1.0 + c * xs * (1.0 + 5.0 * d * xs)
                    ep = exp(-0.5 * hk * xs / ((1.0 + q.rs[i]) * (1.0 + q.rs[i]))) / q.rs[i]
                    sp += q.w[i] * exp(asr) * (sp2 - ep)
            bvn = (a2 * sp - bvn) / TWO_PI
        if r > 0.0:
            bvn = bvn + phid(-(h if h > k else k))
        elif h >= k:
            bvn = -bvn
        else:
            if h < 0.0:
                span = phid(k) - phid(h)
            else:
                span = phid(-h) - phid(-k)
            bvn = span - bvn
    if bvn < 0.0:
        return 0.0
    if bvn > 1.0:
        return 1.0
    return bvn


def bvn_cdf(double h, double k, double r):
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation r."""
    cdef Quad q = make_quad(r)
    return bvnu(-clipz(h), -clipz(k), r, &q)


def bvn_cdf_grid(hs, ks, double r):
    """Evaluate ``bvn_cdf(hs[j], ks[i], r)`` into a ``(len(ks), len(hs))`` array."""
    cdef const double[::1] hv = np.ascontiguousarray(hs, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(ks, dtype=np.float64)
    cdef Py_ssize_t nh = hv.shape[0], nk = kv.shape[0], i, j
    out = np.empty((nk, nh), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Quad q = make_quad(r)
    cdef double kk
    with nogil:
        for i in range(nk):
            kk = -clipz(kv[i])
            for j in range(nh):
                ov[i, j] = bvnu(-clipz(hv[j]), kk, r, &q)
    return out


def region_sums(values, segment, Py_ssize_t seg_x, Py_ssize_t seg_y,
                double threshold, double eps):
    """Loss accumulators for one heatmap against one segment.

    See ``_pykernels.region_sums`` for the contract.
    """
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const cnp.npy_bool[:, ::1] s = np.ascontiguousarray(segment, dtype=np.bool_)
    cdef Py_ssize_t hh = v.shape[0], hw = v.shape[1]
    cdef Py_ssize_t sh = s.shape[0], sw = s.shape[1]
    cdef Py_ssize_t y, x, sy, sx
    cdef double fg = 0.0, bg = 0.0, p, log_eps = log(eps)
    cdef long n_inside = 0, n_hit = 0
    with nogil:
        for y in range(hh):
            sy = y - seg_y
            for x in range(hw):
                p = v[y, x]
                sx = x - seg_x
                if 0 <= sy < sh and 0 <= sx < sw:
                    if s[sy, sx]:
                        n_inside += 1
                        if p > 0.0:
                            n_hit += 1
                        fg += log(p) if p > eps else log_eps
                elif p > threshold:
                    bg -= log(1.0 - p) if 1.0 - p > eps else log_eps
    return fg, n_inside, n_hit, bg


def background_table(values, double threshold, double eps):
    """Row tables of background terms. See ``_pykernels.background_table``."""
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t h = v.shape[0], w = v.shape[1], y, x
    left_a = np.zeros((h, w + 1), dtype=np.float64)
    right_a = np.zeros((h, w + 1), dtype=np.float64)
    rows_a = np.zeros(h, dtype=np.float64)
    cdef double[:, ::1] left = left_a
    cdef double[:, ::1] right = right_a
    cdef double[::1] rows = rows_a
    cdef double[:, ::1] terms
    cdef double p, acc, log_eps = log(eps)
    terms_a = np.zeros((h, w), dtype=np.float64)
    terms = terms_a
    with nogil:
        for y in range(h):
            acc = 0.0
            for x in range(w):
                p = v[y, x]
                if p > threshold:
                    terms[y, x] = -log(1.0 - p) if 1.0 - p > eps else -log_eps
                acc = acc + terms[y, x]
                left[y, x + 1] = acc
            rows[y] = acc
            acc = 0.0
            for x in range(w - 1, -1, -1):
                acc = acc + terms[y, x]
                right[y, x] = acc
    return rows_a, left_a, right_a


def pair_sums(values, Py_ssize_t heat_x, Py_ssize_t heat_y, segment,
              Py_ssize_t seg_x, Py_ssize_t seg_y, row_sums, left, right, double eps):
    """Loss accumulators for one pair. See ``_pykernels.pair_sums``."""
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const cnp.npy_bool[:, ::1] s = np.ascontiguousarray(segment, dtype=np.bool_)
    cdef const double[::1] rs = np.ascontiguousarray(row_sums, dtype=np.float64)
    cdef const double[:, ::1] lt = np.ascontiguousarray(left, dtype=np.float64)
    cdef const double[:, ::1] rt = np.ascontiguousarray(right, dtype=np.float64)
    cdef Py_ssize_t h = v.shape[0], w = v.shape[1], sh = s.shape[0], sw = s.shape[1]
    cdef Py_ssize_t r0, r1, c0, c1, y, x
    cdef double fg = 0.0, bg = 0.0, p, log_eps = log(eps), bg_rows = 0.0
    cdef long n_in = 0, n_hit = 0
    r0 = min(max(seg_y - heat_y, 0), h)
    r1 = min(max(seg_y + sh - heat_y, 0), h)
    c0 = min(max(seg_x - heat_x, 0), w)
    c1 = min(max(seg_x + sw - heat_x, 0), w)
    with nogil:
        if r0 < r1 and c0 < c1:
            for y in range(r0, r1):
                for x in range(c0, c1):
                    if s[y + heat_y - seg_y, x + heat_x - seg_x]:
                        p = v[y, x]
                        n_in += 1
                        if p > 0.0:
                            n_hit += 1
                        fg += log(p) if p > eps else log_eps
        for y in range(r0):
            bg += rs[y]
        for y in range(r1, h):
            bg += rs[y]
        for y in range(r0, r1):
            bg_rows += lt[y, c0] + rt[y, c1]
    return fg, n_in, n_hit, bg + bg_rows
