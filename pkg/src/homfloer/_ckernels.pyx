# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, floor, fabs, isfinite, M_PI

cnp.import_array()

DEF LINEAR = 0
DEF STANDARD = 1
DEF CUBIC_HENON = 2
DEF PENDULUM_VERLET = 3


cdef inline int _step(int model_id, double[::1] params, double* q, double* p, bint inverse) noexcept nogil:
    cdef double k, a, q0, p1, tau, h, ph, det, b, c, d, qq, pp
    cdef int s, nsteps
    if model_id == STANDARD:
        k = params[0] / (2.0 * M_PI)
        if inverse:
            q0 = q[0] - p[0]
            p[0] = p[0] - k * sin(2.0 * M_PI * q0)
            q[0] = q0
        else:
            p1 = p[0] + k * sin(2.0 * M_PI * q[0])
            q[0] = q[0] + p1
            p[0] = p1
        return 0
    if model_id == CUBIC_HENON:
        a = params[0]
        if inverse:
            qq = -p[0] + (2.0 + a) * q[0] - a * q[0] * q[0] * q[0]
            p[0] = q[0]
            q[0] = qq
        else:
            pp = -q[0] + (2.0 + a) * p[0] - a * p[0] * p[0] * p[0]
            q[0] = p[0]
            p[0] = pp
        return 0
    if model_id == PENDULUM_VERLET:
        tau = params[0]
        nsteps = <int>params[1]
        h = 0.5 * tau
        for s in range(nsteps):
            if inverse:
                ph = p[0] + h * sin(q[0])
                q[0] = q[0] - tau * ph
                p[0] = ph + h * sin(q[0])
            else:
                ph = p[0] - h * sin(q[0])
                q[0] = q[0] + tau * ph
                p[0] = ph - h * sin(q[0])
        return 0
    if model_id == LINEAR:
        a = params[0]; b = params[1]; c = params[2]; d = params[3]
        if inverse:
            det = a * d - b * c
            qq = (d * q[0] - b * p[0]) / det
            pp = (-c * q[0] + a * p[0]) / det
        else:
            qq = a * q[0] + b * p[0]
            pp = c * q[0] + d * p[0]
        q[0] = qq
        p[0] = pp
        return 0
    return -1


def iterate(int model_id, params, q, p, counts, bint inverse, bbox, int repeat=1):
    cdef double[::1] prm = np.ascontiguousarray(params, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qa = np.array(q, dtype=np.float64, copy=True).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.array(p, dtype=np.float64, copy=True).ravel()
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ca = np.ascontiguousarray(counts, dtype=np.int64).ravel()
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] esc = np.zeros(qa.shape[0], dtype=np.uint8)
    cdef double xmin = bbox[0], xmax = bbox[1], ymin = bbox[2], ymax = bbox[3]
    cdef Py_ssize_t i, n = qa.shape[0]
    cdef long long j, cnt
    cdef double qq, pp
    if model_id not in (LINEAR, STANDARD, CUBIC_HENON, PENDULUM_VERLET):
        raise ValueError(f"unknown kernel model id {model_id}")
    with nogil:
        for i in range(n):
            qq = qa[i]
            pp = pa[i]
            cnt = ca[i] * repeat
            for j in range(cnt):
                _step(model_id, prm, &qq, &pp, inverse)
                if not (isfinite(qq) and isfinite(pp)) or qq < xmin or qq > xmax or pp < ymin or pp > ymax:
                    esc[i] = 1
                    break
                qa[i] = qq
                pa[i] = pp
    return qa, pa, esc.astype(bool)


cdef inline double _orient(double ax, double ay, double bx, double by, double cx, double cy) noexcept nogil:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segment_pairs(ax_, ay_, bx_, by_):
    cdef double[::1] ax = np.ascontiguousarray(ax_, dtype=np.float64)
    cdef double[::1] ay = np.ascontiguousarray(ay_, dtype=np.float64)
    cdef double[::1] bx = np.ascontiguousarray(bx_, dtype=np.float64)
    cdef double[::1] by = np.ascontiguousarray(by_, dtype=np.float64)
    cdef Py_ssize_t na = ax.shape[0] - 1, nb = bx.shape[0] - 1
    empty = np.zeros(0, dtype=np.int64)
    if na < 1 or nb < 1:
        return empty, empty.copy()
    cdef double lo_x = min(np.min(ax_), np.min(bx_)), hi_x = max(np.max(ax_), np.max(bx_))
    cdef double lo_y = min(np.min(ay_), np.min(by_)), hi_y = max(np.max(ay_), np.max(by_))
    cdef double ext = 0.0, span, h
    cdef Py_ssize_t i, j, c, cx, cy
    for i in range(na):
        ext = max(ext, fabs(ax[i + 1] - ax[i]), fabs(ay[i + 1] - ay[i]))
    for i in range(nb):
        ext = max(ext, fabs(bx[i + 1] - bx[i]), fabs(by[i + 1] - by[i]))
    span = max(hi_x - lo_x, hi_y - lo_y)
    h = max(ext, span / 1024.0, 1e-300)
    cdef Py_ssize_t nx = <Py_ssize_t>floor((hi_x - lo_x) / h) + 3
    cdef Py_ssize_t ny = <Py_ssize_t>floor((hi_y - lo_y) / h) + 3
    cdef Py_ssize_t ncell = nx * ny

    # CSR of B segments per cell
    cdef cnp.ndarray[cnp.int64_t, ndim=1] start = np.zeros(ncell + 1, dtype=np.int64)
    cdef Py_ssize_t ix0, ix1, iy0, iy1
    for j in range(nb):
        ix0 = <Py_ssize_t>floor((min(bx[j], bx[j + 1]) - lo_x) / h)
        ix1 = <Py_ssize_t>floor((max(bx[j], bx[j + 1]) - lo_x) / h)
        iy0 = <Py_ssize_t>floor((min(by[j], by[j + 1]) - lo_y) / h)
        iy1 = <Py_ssize_t>floor((max(by[j], by[j + 1]) - lo_y) / h)
        for cx in range(ix0, ix1 + 1):
            for cy in range(iy0, iy1 + 1):
                start[cx * ny + cy + 1] += 1
    for c in range(ncell):
        start[c + 1] += start[c]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fill = start[:-1].copy()
    cdef cnp.ndarray[cnp.int64_t, ndim=1] items = np.empty(start[ncell], dtype=np.int64)
    for j in range(nb):
        ix0 = <Py_ssize_t>floor((min(bx[j], bx[j + 1]) - lo_x) / h)
        ix1 = <Py_ssize_t>floor((max(bx[j], bx[j + 1]) - lo_x) / h)
        iy0 = <Py_ssize_t>floor((min(by[j], by[j + 1]) - lo_y) / h)
        iy1 = <Py_ssize_t>floor((max(by[j], by[j + 1]) - lo_y) / h)
        for cx in range(ix0, ix1 + 1):
            for cy in range(iy0, iy1 + 1):
                c = cx * ny + cy
                items[fill[c]] = j
                fill[c] += 1

    cdef cnp.ndarray[cnp.int64_t, ndim=1] stamp = np.full(nb, -1, dtype=np.int64)
    cdef Py_ssize_t cap = 1024, nout = 0, t
    cdef cnp.ndarray[cnp.int64_t, ndim=1] oi = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] oj = np.empty(cap, dtype=np.int64)
    cdef bint s1, s2, s3, s4
    for i in range(na):
        ix0 = <Py_ssize_t>floor((min(ax[i], ax[i + 1]) - lo_x) / h)
        ix1 = <Py_ssize_t>floor((max(ax[i], ax[i + 1]) - lo_x) / h)
        iy0 = <Py_ssize_t>floor((min(ay[i], ay[i + 1]) - lo_y) / h)
        iy1 = <Py_ssize_t>floor((max(ay[i], ay[i + 1]) - lo_y) / h)
        for cx in range(ix0, ix1 + 1):
            for cy in range(iy0, iy1 + 1):
                c = cx * ny + cy
                for t in range(start[c], start[c + 1]):
                    j = items[t]
                    if stamp[j] == i:
                        continue
                    stamp[j] = i
                    s1 = _orient(ax[i], ay[i], ax[i + 1], ay[i + 1], bx[j], by[j]) > 0
                    s2 = _orient(ax[i], ay[i], ax[i + 1], ay[i + 1], bx[j + 1], by[j + 1]) > 0
                    if s1 == s2:
                        continue
                    s3 = _orient(bx[j], by[j], bx[j + 1], by[j + 1], ax[i], ay[i]) > 0
                    s4 = _orient(bx[j], by[j], bx[j + 1], by[j + 1], ax[i + 1], ay[i + 1]) > 0
                    if s3 == s4:
                        continue
                    if nout == cap:
                        cap *= 2
                        oi = np.resize(oi, cap)
                        oj = np.resize(oj, cap)
                    oi[nout] = i
                    oj[nout] = j
                    nout += 1
    oi = oi[:nout]
    oj = oj[:nout]
    order = np.lexsort((oj, oi))
    return oi[order], oj[order]
