"""Angles, polylines, cubic Bezier smoothing and 3D frames.

Conventions
-----------
Images are indexed ``[row, col] = [y, x]`` with +y pointing down. Orientation
angles are directed and measured counter-clockwise from +x with +y *up*, so an
image-space step ``(dx, dy)`` has angle ``atan2(-dy, dx)``. A strand hanging
straight down therefore has orientation 3*pi/2 (270 degrees).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


class DegenerateFrameError(ValueError):
    """Raised when a tangent and normal cannot span a frame."""


def normalize_angle(theta):
    """Wrap angle(s) into [0, 2*pi)."""
    out = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def angle_difference(theta_a, theta_b):
    """Orientation difference with the half-turn fold.

    The absolute difference of the two normalized angles is taken and, when it
    exceeds pi, reduced by pi. The result lies in [0, pi] and is symmetric.
    Works elementwise on arrays.
    """
    d = np.abs(normalize_angle(theta_a) - normalize_angle(theta_b))
    d = np.where(d > np.pi, d - np.pi, d)
    if np.ndim(d) == 0:
        return float(d)
    return d


def direction_to_angle(vec):
    """Image-space direction vector(s) ``(..., 2)`` to orientation angle(s)."""
    vec = np.asarray(vec, dtype=float)
    return normalize_angle(np.arctan2(-vec[..., 1], vec[..., 0]))


def angle_to_direction(theta):
    """Orientation angle(s) to unit image-space direction(s) ``(..., 2)``."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), -np.sin(theta)], axis=-1)


# ---------------------------------------------------------------------------
# polylines
# ---------------------------------------------------------------------------

def as_polyline(points, name: str = "polyline") -> np.ndarray:
    """Validate and clean an ``(N, 2)`` point sequence.

    Consecutive duplicates are dropped. Raises ``ValueError`` if fewer than two
    distinct points remain.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must have shape (N, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    if len(pts) > 1:
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
    if len(pts) < 2:
        raise ValueError(f"{name} needs at least two distinct points")
    return pts


def cumulative_length(points: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def arc_length(points) -> float:
    pts = np.asarray(points, dtype=float)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def resample_polyline(points, count: int) -> np.ndarray:
    """Resample to ``count`` points equally spaced in arc length."""
    pts = np.asarray(points, dtype=float)
    s = cumulative_length(pts)
    target = np.linspace(0.0, s[-1], count)
    x = np.interp(target, s, pts[:, 0])
    y = np.interp(target, s, pts[:, 1])
    out = np.column_stack([x, y])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def point_at_length(points: np.ndarray, distance: float) -> np.ndarray:
    s = cumulative_length(points)
    d = min(max(distance, 0.0), s[-1])
    return np.array([np.interp(d, s, points[:, 0]), np.interp(d, s, points[:, 1])])


def project_onto_polyline(point, points: np.ndarray):
    """Closest point on a polyline.

    Returns ``(distance, segment_index, t, foot)`` where ``foot`` lies on
    segment ``segment_index`` at parameter ``t`` in [0, 1].
    """
    p = np.asarray(point, dtype=float)
    a = points[:-1]
    ab = points[1:] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    feet = a + t[:, None] * ab
    d = np.linalg.norm(feet - p, axis=1)
    i = int(np.argmin(d))
    return float(d[i]), i, float(t[i]), feet[i]


def distance_to_polyline(points_q, points: np.ndarray) -> np.ndarray:
    """Distance from each query point ``(M, 2)`` to the polyline."""
    q = np.atleast_2d(np.asarray(points_q, dtype=float))
    a = points[:-1][None, :, :]
    ab = (points[1:] - points[:-1])[None, :, :]
    denom = np.sum(ab * ab, axis=2)
    t = np.sum((q[:, None, :] - a) * ab, axis=2) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    feet = a + t[:, :, None] * ab
    return np.min(np.linalg.norm(feet - q[:, None, :], axis=2), axis=1)


# ---------------------------------------------------------------------------
# cubic Bezier
# ---------------------------------------------------------------------------

def bernstein3(t: np.ndarray) -> np.ndarray:
    """Cubic Bernstein basis, shape ``(len(t), 4)``."""
    t = np.asarray(t, dtype=float)
    u = 1.0 - t
    return np.column_stack([u ** 3, 3 * t * u ** 2, 3 * t ** 2 * u, t ** 3])


def chord_parameters(points: np.ndarray) -> np.ndarray:
    s = cumulative_length(points)
    return s / s[-1]


def _is_collinear(points: np.ndarray, rel_tol: float = 1e-9) -> bool:
    chord = points[-1] - points[0]
    scale = max(np.max(np.abs(points - points[0])), 1.0)
    if np.linalg.norm(chord) <= rel_tol * scale:
        return False
    cross = chord[0] * (points[:, 1] - points[0, 1]) - chord[1] * (points[:, 0] - points[0, 0])
    return bool(np.max(np.abs(cross)) / np.linalg.norm(chord) <= rel_tol * scale)


def bezier_control_points(raw) -> np.ndarray:
    """Least-squares cubic control points with interpolated endpoints.

    Interior control points minimise the squared distance between the curve at
    chord-length parameters and the raw points. When the system is
    underdetermined the solution closest to the straight chord is returned.
    """
    pts = as_polyline(raw, "raw")
    p0, p3 = pts[0], pts[-1]
    t = chord_parameters(pts)
    basis = bernstein3(t)
    # unknowns are offsets from the chord's third points
    l1 = p0 + (p3 - p0) / 3.0
    l2 = p0 + 2.0 * (p3 - p0) / 3.0
    rhs = pts - np.outer(basis[:, 0], p0) - np.outer(basis[:, 3], p3)
    rhs -= np.outer(basis[:, 1], l1) + np.outer(basis[:, 2], l2)
    offsets, *_ = np.linalg.lstsq(basis[:, 1:3], rhs, rcond=None)
    return np.vstack([p0, l1 + offsets[0], l2 + offsets[1], p3])


def evaluate_bezier(control: np.ndarray, t) -> np.ndarray:
    return bernstein3(t) @ control


def fit_bezier(raw, samples: int) -> np.ndarray:
    """Smooth a polyline with a single least-squares cubic Bezier.

    Parameters
    ----------
    raw : array_like, shape (N, 2)
        Input path, N >= 2.
    samples : int
        Number of output points (uniform in the curve parameter), >= 2.

    Returns
    -------
    ndarray, shape (samples, 2)
        The first and last rows equal the first and last raw points. Straight
        inputs (two points, or all collinear) come back as the resampled
        segment.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    pts = as_polyline(raw, "raw")
    t = np.linspace(0.0, 1.0, samples)
    if len(pts) == 2 or _is_collinear(pts):
        out = pts[0] + t[:, None] * (pts[-1] - pts[0])
    else:
        out = evaluate_bezier(bezier_control_points(pts), t)
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


# ---------------------------------------------------------------------------
# 3D frames and planes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame3D:
    """Right-handed orthonormal tool frame. Origin in mm."""

    origin: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def matrix(self) -> np.ndarray:
        """3x3 rotation with the axes as columns."""
        return np.column_stack([self.x, self.y, self.z])

    def orthonormality_error(self) -> float:
        """Largest violation among unit norms, dot products and x = y cross z."""
        axes = (self.x, self.y, self.z)
        errs = [abs(np.linalg.norm(a) - 1.0) for a in axes]
        errs += [abs(float(np.dot(self.x, self.y))), abs(float(np.dot(self.y, self.z))),
                 abs(float(np.dot(self.x, self.z)))]
        errs.append(float(np.linalg.norm(self.x - np.cross(self.y, self.z))))
        return max(errs)

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.orthonormality_error() <= tol

    def translated(self, offset) -> "Frame3D":
        return Frame3D(self.origin + np.asarray(offset, dtype=float), self.x, self.y, self.z)


def build_frame(origin, tangent, normal, min_angle: float = 1e-6) -> Frame3D:
    """Frame with z along ``normal`` and y along the tangent projected off z.

    x is then ``y cross z``. Raises ``DegenerateFrameError`` when the two
    vectors are (nearly) parallel or either is zero.
    """
    t = np.asarray(tangent, dtype=float)
    n = np.asarray(normal, dtype=float)
    nt, nn = np.linalg.norm(t), np.linalg.norm(n)
    if nt == 0.0 or nn == 0.0:
        raise DegenerateFrameError(f"zero vector: tangent={t.tolist()}, normal={n.tolist()}")
    z = n / nn
    along = t - np.dot(t, z) * z
    na = np.linalg.norm(along)
    if na <= nt * np.sin(min_angle):
        raise DegenerateFrameError(
            f"tangent {t.tolist()} is parallel to normal {n.tolist()}")
    y = along / na
    # one Gram-Schmidt pass removes the residual dot product
    y = y - np.dot(y, z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    return Frame3D(np.asarray(origin, dtype=float).copy(), x, y, z)


@dataclass(frozen=True)
class Plane3D:
    """Plane ``a x + b y + c z + d = 0`` with unit normal (a, b, c)."""

    a: float
    b: float
    c: float
    d: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def signed_distance(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.normal + self.d

    def project(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p - np.outer(np.atleast_1d(self.signed_distance(p)), self.normal).reshape(p.shape)

    @classmethod
    def from_normal_point(cls, normal, point) -> "Plane3D":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        n = canonical_normal(n)
        return cls(float(n[0]), float(n[1]), float(n[2]), float(-np.dot(n, point)))


def canonical_normal(n: np.ndarray) -> np.ndarray:
    """Flip so c >= 0, breaking ties by b >= 0, then a >= 0."""
    for k in (2, 1, 0):
        if n[k] > 0:
            return n
        if n[k] < 0:
            return -n
    return n
