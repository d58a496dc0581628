# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: closest-point projection and marching squares."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, fabs, fmod, M_PI

cnp.import_array()


cdef inline void _eval(double s, const double[::1] k, const double[::1] ax,
                       const double[::1] bx, const double[::1] ay, const double[::1] by,
                       double* out) noexcept nogil:
    cdef Py_ssize_t m
    cdef double w, co, si
    for m in range(6):
        out[m] = 0.0
    for m in range(k.shape[0]):
        w = 2.0 * M_PI * k[m]
        co = cos(w * s)
        si = sin(w * s)
        out[0] += ax[m] * co + bx[m] * si
        out[1] += ay[m] * co + by[m] * si
        out[2] += w * (-ax[m] * si + bx[m] * co)
        out[3] += w * (-ay[m] * si + by[m] * co)
        out[4] -= w * w * (ax[m] * co + bx[m] * si)
        out[5] -= w * w * (ay[m] * co + by[m] * si)


def project_points(px, py, k, ax, bx, ay, by, sx, sy, int max_iter=20, double tol=1e-12):
    """Closest-point parameter and signed distance; see the numpy fallback for the contract."""
    cdef const double[::1] Px = np.ascontiguousarray(px, dtype=np.float64).ravel()
    cdef const double[::1] Py = np.ascontiguousarray(py, dtype=np.float64).ravel()
    cdef const double[::1] K = np.ascontiguousarray(k, dtype=np.float64)
    cdef const double[::1] Ax = np.ascontiguousarray(ax, dtype=np.float64)
    cdef const double[::1] Bx = np.ascontiguousarray(bx, dtype=np.float64)
    cdef const double[::1] Ay = np.ascontiguousarray(ay, dtype=np.float64)
    cdef const double[::1] By = np.ascontiguousarray(by, dtype=np.float64)
    cdef const double[::1] Sx = np.ascontiguousarray(sx, dtype=np.float64)
    cdef const double[::1] Sy = np.ascontiguousarray(sy, dtype=np.float64)
    cdef Py_ssize_t n = Px.shape[0], ns = Sx.shape[0], i, j, jbest
    s_out = np.empty(n)
    d_out = np.empty(n)
    st_out = np.zeros(n, dtype=np.int32)
    cdef double[::1] S = s_out
    cdef double[::1] D = d_out
    cdef int[::1] ST = st_out
    cdef double e[6]
    cdef double best, d2, s, s0, rx, ry, g, gp, speed, step, max_step = 2.0 / ns
    cdef int it, ok
    with nogil:
        for i in range(n):
            best = 1e300
            jbest = 0
            for j in range(ns):
                d2 = (Px[i] - Sx[j]) ** 2 + (Py[i] - Sy[j]) ** 2
                if d2 < best:
                    best = d2
                    jbest = j
            s0 = <double> jbest / ns
            s = s0
            ok = 0
            for it in range(max_iter):
                _eval(s, K, Ax, Bx, Ay, By, e)
                rx = e[0] - Px[i]
                ry = e[1] - Py[i]
                g = rx * e[2] + ry * e[3]
                speed = sqrt(e[2] * e[2] + e[3] * e[3])
                if fabs(g) <= tol * speed:
                    ok = 1
                    break
                gp = e[2] * e[2] + e[3] * e[3] + rx * e[4] + ry * e[5]
                if gp <= 0.0:
                    break
                step = -g / gp
                if step > max_step:
                    step = max_step
                elif step < -max_step:
                    step = -max_step
                s += step
            if ok:
                s = fmod(s, 1.0)
                if s < 0.0:
                    s += 1.0
                _eval(s, K, Ax, Bx, Ay, By, e)
                speed = sqrt(e[2] * e[2] + e[3] * e[3])
                S[i] = s
                D[i] = ((Px[i] - e[0]) * (-e[3]) + (Py[i] - e[1]) * e[2]) / speed
            else:
                _eval(s0, K, Ax, Bx, Ay, By, e)
                g = (Px[i] - e[0]) * (-e[3]) + (Py[i] - e[1]) * e[2]
                S[i] = s0
                D[i] = sqrt(best) if g >= 0.0 else -sqrt(best)
                ST[i] = 1
    return s_out, d_out, st_out


cdef inline double _tri(double x0, double y0, double x1, double y1, double x2, double y2) noexcept nogil:
    return 0.5 * fabs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def contour_length_area(c, double h, double level=0.0):
    """Level-contour length and area of {c > level}; see the numpy fallback for the contract."""
    cdef const double[:, ::1] C = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n0 = C.shape[0] - 1, n1 = C.shape[1] - 1, i, j, m, q, nm
    cdef double v[4]
    cdef double cx[4]
    cdef double cy[4]
    cdef double px[8]
    cdef double py[8]
    cdef double ex[4]
    cdef double ey[4]
    cdef int up[4]
    cdef int has_cut[4]
    cdef double area = 0.0, length = 0.0, t, a, centre
    cdef int nup, ncut
    with nogil:
        for i in range(n0):
            for j in range(n1):
                v[0] = C[i, j]; v[1] = C[i + 1, j]; v[2] = C[i + 1, j + 1]; v[3] = C[i, j + 1]
                nup = 0
                for m in range(4):
                    up[m] = v[m] > level
                    nup += up[m]
                if nup == 4:
                    area += h * h
                    continue
                if nup == 0:
                    continue
                cx[0] = i * h; cy[0] = j * h
                cx[1] = (i + 1) * h; cy[1] = j * h
                cx[2] = (i + 1) * h; cy[2] = (j + 1) * h
                cx[3] = i * h; cy[3] = (j + 1) * h
                nm = 0
                ncut = 0
                for m in range(4):
                    q = (m + 1) % 4
                    has_cut[m] = 0
                    if up[m]:
                        px[nm] = cx[m]; py[nm] = cy[m]; nm += 1
                    if up[m] != up[q]:
                        t = (level - v[m]) / (v[q] - v[m])
                        ex[m] = cx[m] + t * (cx[q] - cx[m])
                        ey[m] = cy[m] + t * (cy[q] - cy[m])
                        px[nm] = ex[m]; py[nm] = ey[m]; nm += 1
                        has_cut[m] = 1
                        ncut += 1
                centre = 0.25 * (v[0] + v[1] + v[2] + v[3])
                if ncut == 4 and not centre > level:
                    for m in range(4):
                        if up[m]:
                            q = (m + 3) % 4
                            area += _tri(ex[q], ey[q], cx[m], cy[m], ex[m], ey[m])
                            length += sqrt((ex[m] - ex[q]) ** 2 + (ey[m] - ey[q]) ** 2)
                    continue
                a = 0.0
                for m in range(nm):
                    q = (m + 1) % nm
                    a += px[m] * py[q] - px[q] * py[m]
                area += 0.5 * fabs(a)
                if ncut == 4:
                    for m in range(4):
                        if not up[m]:
                            q = (m + 3) % 4
                            length += sqrt((ex[m] - ex[q]) ** 2 + (ey[m] - ey[q]) ** 2)
                else:
                    q = -1
                    for m in range(4):
                        if has_cut[m]:
                            if q < 0:
                                q = m
                            else:
                                length += sqrt((ex[m] - ex[q]) ** 2 + (ey[m] - ey[q]) ** 2)
    return length, area
