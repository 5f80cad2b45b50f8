# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors ``_pykernels`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, sqrt, atan2, fabs, INFINITY, M_PI

cnp.import_array()

BACKEND = "cython"

cdef double _TWO_PI = 2.0 * M_PI


def rasterize_strand(points, double radius, double[:, ::1] theta, unsigned char[:, ::1] mask):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double minx = INFINITY, maxx = -INFINITY, miny = INFINITY, maxy = -INFINITY
    for k in range(n):
        if pts[k, 0] < minx: minx = pts[k, 0]
        if pts[k, 0] > maxx: maxx = pts[k, 0]
        if pts[k, 1] < miny: miny = pts[k, 1]
        if pts[k, 1] > maxy: maxy = pts[k, 1]
    cdef Py_ssize_t x0 = max(0, <Py_ssize_t>ceil(minx - radius))
    cdef Py_ssize_t x1 = min(w - 1, <Py_ssize_t>floor(maxx + radius))
    cdef Py_ssize_t y0 = max(0, <Py_ssize_t>ceil(miny - radius))
    cdef Py_ssize_t y1 = min(h - 1, <Py_ssize_t>floor(maxy + radius))
    if x1 < x0 or y1 < y0:
        return
    best_arr = np.full((y1 - y0 + 1, x1 - x0 + 1), np.inf)
    ang_arr = np.zeros((y1 - y0 + 1, x1 - x0 + 1))
    cdef double[:, ::1] best = best_arr
    cdef double[:, ::1] ang = ang_arr
    cdef double r2 = radius * radius
    cdef double ax, ay, bx, by, abx, aby, len2, t, dx, dy, d2, a
    cdef Py_ssize_t sx0, sx1, sy0, sy1
    for k in range(n - 1):
        ax = pts[k, 0]; ay = pts[k, 1]
        bx = pts[k + 1, 0]; by = pts[k + 1, 1]
        abx = bx - ax; aby = by - ay
        len2 = abx * abx + aby * aby
        if len2 == 0.0:
            continue
        sx0 = max(x0, <Py_ssize_t>ceil(min(ax, bx) - radius))
        sx1 = min(x1, <Py_ssize_t>floor(max(ax, bx) + radius))
        sy0 = max(y0, <Py_ssize_t>ceil(min(ay, by) - radius))
        sy1 = min(y1, <Py_ssize_t>floor(max(ay, by) + radius))
        if sx1 < sx0 or sy1 < sy0:
            continue
        a = atan2(-aby, abx)
        if a < 0.0:
            a += _TWO_PI
        for j in range(sy0, sy1 + 1):
            for i in range(sx0, sx1 + 1):
                t = ((<double>i - ax) * abx + (<double>j - ay) * aby) / len2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                dx = <double>i - (ax + t * abx)
                dy = <double>j - (ay + t * aby)
                d2 = dx * dx + dy * dy
                if d2 <= r2 and d2 < best[j - y0, i - x0]:
                    best[j - y0, i - x0] = d2
                    ang[j - y0, i - x0] = a
    for j in range(y0, y1 + 1):
        for i in range(x0, x1 + 1):
            if best[j - y0, i - x0] < INFINITY:
                theta[j, i] = ang[j - y0, i - x0]
                mask[j, i] = 1


cdef int _sample(const double[:, ::1] dirx, const double[:, ::1] diry, const unsigned char[:, ::1] mask,
                 double x, double y, double* ox, double* oy) nogil:
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    cdef double xf = floor(x)
    cdef double yf = floor(y)
    cdef double fx = x - xf
    cdef double fy = y - yf
    cdef Py_ssize_t ix = <Py_ssize_t>xf
    cdef Py_ssize_t iy = <Py_ssize_t>yf
    cdef double sx = 0.0, sy = 0.0, wsum = 0.0, wgt, wy, wx, nrm
    cdef Py_ssize_t i, j, di, dj
    for dj in range(2):
        j = iy + dj
        if j < 0 or j >= h:
            continue
        wy = (1.0 - fy) if dj == 0 else fy
        for di in range(2):
            i = ix + di
            if i < 0 or i >= w or not mask[j, i]:
                continue
            wx = (1.0 - fx) if di == 0 else fx
            wgt = wx * wy
            sx += wgt * dirx[j, i]
            sy += wgt * diry[j, i]
            wsum += wgt
    if wsum <= 0.0:
        return 0
    nrm = sqrt(sx * sx + sy * sy)
    if nrm < 1e-12:
        return 0
    ox[0] = sx / nrm
    oy[0] = sy / nrm
    return 1


def trace_direction(const double[:, ::1] dirx, const double[:, ::1] diry, const unsigned char[:, ::1] mask,
                    double x0, double y0, double sign, double step, long max_steps,
                    double cos_turn):
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    out_arr = np.empty((max_steps + 1, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double x = x0, y = y0, px = 0.0, py = 0.0
    cdef double vx = 0.0, vy = 0.0, mx, my, wx, wy, nx, ny
    cdef int have_prev = 0
    cdef Py_ssize_t count = 1, ix, iy
    cdef long k
    out[0, 0] = x0
    out[0, 1] = y0
    with nogil:
        for k in range(max_steps):
            if not _sample(dirx, diry, mask, x, y, &vx, &vy):
                break
            mx = x + 0.5 * step * sign * vx
            my = y + 0.5 * step * sign * vy
            if not _sample(dirx, diry, mask, mx, my, &vx, &vy):
                break
            wx = sign * vx
            wy = sign * vy
            if have_prev and wx * px + wy * py < cos_turn:
                break
            nx = x + step * wx
            ny = y + step * wy
            ix = <Py_ssize_t>floor(nx + 0.5)
            iy = <Py_ssize_t>floor(ny + 0.5)
            if ix < 0 or iy < 0 or ix >= w or iy >= h or not mask[iy, ix]:
                break
            x = nx
            y = ny
            px = wx
            py = wy
            have_prev = 1
            out[count, 0] = x
            out[count, 1] = y
            count += 1
    return out_arr[:count].copy()


def plane_hypotheses(points, triples, double tol):
    cdef const double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef const long long[:, ::1] tr = np.ascontiguousarray(triples, dtype=np.int64)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t m = tr.shape[0]
    counts_arr = np.empty(m, dtype=np.int64)
    normals_arr = np.zeros((m, 3), dtype=np.float64)
    offsets_arr = np.zeros(m, dtype=np.float64)
    cdef long long[::1] counts = counts_arr
    cdef double[:, ::1] normals = normals_arr
    cdef double[::1] offsets = offsets_arr
    cdef Py_ssize_t k, i
    cdef long long ia, ib, ic, c
    cdef double abx, aby, abz, acx, acy, acz, nx, ny, nz, nn, scale, d
    with nogil:
        for k in range(m):
            ia = tr[k, 0]; ib = tr[k, 1]; ic = tr[k, 2]
            abx = p[ib, 0] - p[ia, 0]; aby = p[ib, 1] - p[ia, 1]; abz = p[ib, 2] - p[ia, 2]
            acx = p[ic, 0] - p[ia, 0]; acy = p[ic, 1] - p[ia, 1]; acz = p[ic, 2] - p[ia, 2]
            nx = aby * acz - abz * acy
            ny = abz * acx - abx * acz
            nz = abx * acy - aby * acx
            nn = sqrt(nx * nx + ny * ny + nz * nz)
            scale = sqrt(abx * abx + aby * aby + abz * abz) * sqrt(acx * acx + acy * acy + acz * acz)
            if nn <= 1e-12 * scale:
                counts[k] = -1
                normals[k, 0] = nx; normals[k, 1] = ny; normals[k, 2] = nz
                offsets[k] = -(nx * p[ia, 0] + ny * p[ia, 1] + nz * p[ia, 2])
                continue
            nx = nx / nn; ny = ny / nn; nz = nz / nn
            d = -(nx * p[ia, 0] + ny * p[ia, 1] + nz * p[ia, 2])
            normals[k, 0] = nx; normals[k, 1] = ny; normals[k, 2] = nz
            offsets[k] = d
            c = 0
            for i in range(n):
                if fabs(p[i, 0] * nx + p[i, 1] * ny + p[i, 2] * nz + d) <= tol:
                    c += 1
            counts[k] = c
    return counts_arr, normals_arr, offsets_arr
