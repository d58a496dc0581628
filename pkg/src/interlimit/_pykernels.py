"""Numpy implementations of the hot kernels (fallback for the compiled module)."""

import numpy as np

TWO_PI = 2.0 * np.pi
CHUNK = 2048


def _fourier(s, k, ax, bx, ay, by):
    arg = TWO_PI * np.multiply.outer(s, k)
    co, si = np.cos(arg), np.sin(arg)
    w = TWO_PI * k
    x = co @ ax + si @ bx
    y = co @ ay + si @ by
    dx = (-si * w) @ ax + (co * w) @ bx
    dy = (-si * w) @ ay + (co * w) @ by
    w2 = w * w
    ddx = -(co * w2) @ ax - (si * w2) @ bx
    ddy = -(co * w2) @ ay - (si * w2) @ by
    return x, y, dx, dy, ddx, ddy


def project_points(px, py, k, ax, bx, ay, by, sx, sy, max_iter=20, tol=1e-12):
    """Closest-point parameter and signed distance of points to a Fourier curve.

    Coarse argmin over the dense samples (sx, sy) at s_j = j / n_s, then Newton on
    (X(s) - p) . X'(s) = 0. Returns (s, d, status) with status 0 on convergence and 1
    when Newton failed and the sample-based distance was returned instead.
    """
    px = np.ascontiguousarray(px, dtype=float)
    py = np.ascontiguousarray(py, dtype=float)
    k = np.asarray(k, dtype=float)
    ns = sx.size
    npts = px.size
    best = np.empty(npts, dtype=np.int64)
    for lo in range(0, npts, CHUNK):
        hi = min(lo + CHUNK, npts)
        d2 = (px[lo:hi, None] - sx[None, :]) ** 2 + (py[lo:hi, None] - sy[None, :]) ** 2
        best[lo:hi] = np.argmin(d2, axis=1)
    s0 = best / ns
    s = s0.copy()
    done = np.zeros(npts, dtype=bool)
    failed = np.zeros(npts, dtype=bool)
    max_step = 2.0 / ns
    for _ in range(max_iter):
        act = ~(done | failed)
        if not act.any():
            break
        x, y, dx, dy, ddx, ddy = _fourier(s[act], k, ax, bx, ay, by)
        rx, ry = x - px[act], y - py[act]
        g = rx * dx + ry * dy
        gp = dx * dx + dy * dy + rx * ddx + ry * ddy
        speed = np.sqrt(dx * dx + dy * dy)
        conv = np.abs(g) <= tol * speed
        bad = (gp <= 0) & ~conv
        step = np.where(conv | bad, 0.0, -g / np.where(gp > 0, gp, 1.0))
        step = np.clip(step, -max_step, max_step)
        idx = np.flatnonzero(act)
        s[idx] += step
        done[idx[conv]] = True
        failed[idx[bad]] = True
    failed |= ~done
    s = np.mod(s, 1.0)
    x, y, dx, dy, _, _ = _fourier(s, k, ax, bx, ay, by)
    speed = np.sqrt(dx * dx + dy * dy)
    d = ((px - x) * (-dy) + (py - y) * dx) / speed
    status = np.zeros(npts, dtype=np.int32)
    if failed.any():
        f = np.flatnonzero(failed)
        j = best[f]
        x, y, dx, dy, _, _ = _fourier(s0[f], k, ax, bx, ay, by)
        speed = np.sqrt(dx * dx + dy * dy)
        dist = np.hypot(px[f] - sx[j], py[f] - sy[j])
        side = np.sign((px[f] - x) * (-dy) + (py[f] - y) * dx)
        s[f] = s0[f]
        d[f] = np.where(side < 0, -dist, dist)
        status[f] = 1
    return s, d, status


def _cross(a, b, level):
    return (level - a) / (b - a)


def contour_length_area(c, h, level=0.0):
    """Length of the piecewise-linear `level` contour and area of {c > level}.

    Marching squares on the vertex field c[i, j] at (i h, j h); saddle cells are
    resolved with the cell-average value.
    """
    c = np.asarray(c, dtype=float)
    hi = c > level
    c00, c10, c11, c01 = hi[:-1, :-1], hi[1:, :-1], hi[1:, 1:], hi[:-1, 1:]
    n_high = c00.astype(int) + c10 + c11 + c01
    area = h * h * float(np.count_nonzero(n_high == 4))
    length = 0.0
    for i, j in zip(*np.nonzero((n_high > 0) & (n_high < 4))):
        v = (c[i, j], c[i + 1, j], c[i + 1, j + 1], c[i, j + 1])
        corners = ((i * h, j * h), ((i + 1) * h, j * h), ((i + 1) * h, (j + 1) * h), (i * h, (j + 1) * h))
        a, ln = _cell(v, corners, level)
        area += a
        length += ln
    return length, area


def _cell(v, corners, level):
    up = [val > level for val in v]
    pts = []        # CCW walk: high corners and edge crossings
    cuts = []
    for m in range(4):
        n = (m + 1) % 4
        if up[m]:
            pts.append(corners[m])
        if up[m] != up[n]:
            t = _cross(v[m], v[n], level)
            p = (corners[m][0] + t * (corners[n][0] - corners[m][0]),
                 corners[m][1] + t * (corners[n][1] - corners[m][1]))
            pts.append(p)
            cuts.append((m, p))
    saddle = len(cuts) == 4
    centre_up = sum(v) / 4.0 > level
    if saddle and not centre_up:
        # two disjoint high triangles at the high corners
        area = 0.0
        length = 0.0
        for m in range(4):
            if up[m]:
                prev = [p for e, p in cuts if e == (m - 1) % 4][0]
                nxt = [p for e, p in cuts if e == m][0]
                area += _shoelace([prev, corners[m], nxt])
                length += np.hypot(nxt[0] - prev[0], nxt[1] - prev[1])
        return area, length
    area = _shoelace(pts)
    if saddle:
        length = 0.0
        for m in range(4):
            if not up[m]:
                prev = [p for e, p in cuts if e == (m - 1) % 4][0]
                nxt = [p for e, p in cuts if e == m][0]
                length += np.hypot(nxt[0] - prev[0], nxt[1] - prev[1])
        return area, length
    (_, p), (_, q) = cuts
    return area, float(np.hypot(q[0] - p[0], q[1] - p[1]))


def _shoelace(pts):
    a = 0.0
    for m in range(len(pts)):
        x0, y0 = pts[m]
        x1, y1 = pts[(m + 1) % len(pts)]
        a += x0 * y1 - x1 * y0
    return 0.5 * abs(a)
