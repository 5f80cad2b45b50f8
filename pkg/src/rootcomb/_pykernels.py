"""Pure-Python kernels. Same contracts as the compiled ``_ckernels``."""

import math

import numpy as np

BACKEND = "python"

_TWO_PI = 2.0 * math.pi


def rasterize_strand(points, radius, theta, mask):
    """Stamp one thick polyline into ``theta``/``mask`` in place.

    A pixel centre within ``radius`` of the polyline is covered; its value is
    the direction angle of the nearest segment (earlier segment on ties).
    """
    pts = np.asarray(points, dtype=np.float64)
    h, w = mask.shape
    x0 = max(0, int(math.ceil(pts[:, 0].min() - radius)))
    x1 = min(w - 1, int(math.floor(pts[:, 0].max() + radius)))
    y0 = max(0, int(math.ceil(pts[:, 1].min() - radius)))
    y1 = min(h - 1, int(math.floor(pts[:, 1].max() + radius)))
    if x1 < x0 or y1 < y0:
        return
    best = np.full((y1 - y0 + 1, x1 - x0 + 1), np.inf)
    ang = np.zeros_like(best)
    r2 = radius * radius
    for k in range(len(pts) - 1):
        ax, ay = pts[k]
        bx, by = pts[k + 1]
        abx, aby = bx - ax, by - ay
        len2 = abx * abx + aby * aby
        if len2 == 0.0:
            continue
        sx0 = max(x0, int(math.ceil(min(ax, bx) - radius)))
        sx1 = min(x1, int(math.floor(max(ax, bx) + radius)))
        sy0 = max(y0, int(math.ceil(min(ay, by) - radius)))
        sy1 = min(y1, int(math.floor(max(ay, by) + radius)))
        if sx1 < sx0 or sy1 < sy0:
            continue
        px = np.arange(sx0, sx1 + 1, dtype=np.float64)[None, :]
        py = np.arange(sy0, sy1 + 1, dtype=np.float64)[:, None]
        t = ((px - ax) * abx + (py - ay) * aby) / len2
        t = np.clip(t, 0.0, 1.0)
        dx = px - (ax + t * abx)
        dy = py - (ay + t * aby)
        d2 = dx * dx + dy * dy
        sub = best[sy0 - y0:sy1 - y0 + 1, sx0 - x0:sx1 - x0 + 1]
        sub_ang = ang[sy0 - y0:sy1 - y0 + 1, sx0 - x0:sx1 - x0 + 1]
        hit = (d2 <= r2) & (d2 < sub)
        sub[hit] = d2[hit]
        a = math.atan2(-aby, abx)
        if a < 0.0:
            a += _TWO_PI
        sub_ang[hit] = a
    covered = np.isfinite(best)
    theta[y0:y1 + 1, x0:x1 + 1][covered] = ang[covered]
    mask[y0:y1 + 1, x0:x1 + 1][covered] = 1


def _sample(dirx, diry, mask, x, y):
    h, w = mask.shape
    xf = math.floor(x)
    yf = math.floor(y)
    fx = x - xf
    fy = y - yf
    ix = int(xf)
    iy = int(yf)
    sx = 0.0
    sy = 0.0
    wsum = 0.0
    for dj, wy in ((0, 1.0 - fy), (1, fy)):
        j = iy + dj
        if j < 0 or j >= h:
            continue
        for di, wx in ((0, 1.0 - fx), (1, fx)):
            i = ix + di
            if i < 0 or i >= w or not mask[j, i]:
                continue
            wgt = wx * wy
            sx += wgt * dirx[j, i]
            sy += wgt * diry[j, i]
            wsum += wgt
    if wsum <= 0.0:
        return None
    n = math.sqrt(sx * sx + sy * sy)
    if n < 1e-12:
        return None
    return sx / n, sy / n


def trace_direction(dirx, diry, mask, x0, y0, sign, step, max_steps, cos_turn):
    """Midpoint-rule streamline from ``(x0, y0)``.

    ``sign`` is +1 to follow the field and -1 to go against it. Stops on mask
    exit, a turn whose cosine drops below ``cos_turn``, or after ``max_steps``.
    Returns the visited points including the start, shape ``(M, 2)``.
    """
    h, w = mask.shape
    out = [(x0, y0)]
    x, y = float(x0), float(y0)
    px = py = 0.0
    have_prev = False
    for _ in range(int(max_steps)):
        v = _sample(dirx, diry, mask, x, y)
        if v is None:
            break
        mx = x + 0.5 * step * sign * v[0]
        my = y + 0.5 * step * sign * v[1]
        v = _sample(dirx, diry, mask, mx, my)
        if v is None:
            break
        wx = sign * v[0]
        wy = sign * v[1]
        if have_prev and wx * px + wy * py < cos_turn:
            break
        nx = x + step * wx
        ny = y + step * wy
        ix = int(math.floor(nx + 0.5))
        iy = int(math.floor(ny + 0.5))
        if ix < 0 or iy < 0 or ix >= w or iy >= h or not mask[iy, ix]:
            break
        x, y = nx, ny
        px, py = wx, wy
        have_prev = True
        out.append((x, y))
    return np.array(out, dtype=np.float64)


def plane_hypotheses(points, triples, tol):
    """Score plane hypotheses through point triples.

    Returns ``(counts, normals, offsets)``; degenerate (collinear or repeated)
    triples get a count of -1.
    """
    p = np.asarray(points, dtype=np.float64)
    tr = np.asarray(triples, dtype=np.int64)
    a = p[tr[:, 0]]
    ab = p[tr[:, 1]] - a
    ac = p[tr[:, 2]] - a
    n = np.cross(ab, ac)
    nn = np.linalg.norm(n, axis=1)
    scale = np.linalg.norm(ab, axis=1) * np.linalg.norm(ac, axis=1)
    bad = nn <= 1e-12 * scale
    safe = np.where(bad, 1.0, nn)
    n = n / safe[:, None]
    d = -np.einsum("ij,ij->i", n, a)
    dist = np.abs(p @ n.T + d[None, :])
    counts = np.sum(dist <= tol, axis=0).astype(np.int64)
    counts[bad] = -1
    return counts, n, d
