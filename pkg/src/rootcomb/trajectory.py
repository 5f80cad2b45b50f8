"""Lifting 2D comb strokes to 6-DoF tool trajectories.

Depth back-projection here is orthographic: a pixel ``(u, v)`` with depth
``Z`` maps to ``((u - cx) * sx, (v - cy) * sy, Z)`` in mm, with the camera at
the origin looking along +Z.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from rootcomb import kernels
from rootcomb.geometry import Plane3D, build_frame
from rootcomb.planner import CombStroke

CSV_HEADER = ["idx", "px", "py", "pz", "xx", "xy", "xz", "yx", "yy", "yz", "zx", "zy", "zz"]


class TrajectoryError(ValueError):
    """Base for lifting failures; ``stroke_index`` is set when raised per stroke point."""

    def __init__(self, message: str, stroke_index=None):
        super().__init__(message if stroke_index is None else f"stroke point {stroke_index}: {message}")
        self.stroke_index = stroke_index


class DepthHoleError(TrajectoryError):
    pass


class PlaneFitError(TrajectoryError):
    pass


@dataclass(frozen=True, eq=False)
class DepthGrid:
    depth: np.ndarray
    sx: float = 1.0
    sy: float = 1.0
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if self.sx <= 0 or self.sy <= 0:
            raise ValueError("intrinsic scale factors must be positive")
        defined = self.depth[np.isfinite(self.depth)]
        if np.any(defined <= 0):
            raise ValueError("depths must be positive where defined")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    def back_project(self, u, v, z) -> np.ndarray:
        u, v, z = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float), np.asarray(z, float))
        return np.stack([(u - self.cx) * self.sx, (v - self.cy) * self.sy, z], axis=-1)


def _bilinear_depth(grid: DepthGrid, x: float, y: float):
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    if x0 < 0 or y0 < 0 or x0 + 1 >= grid.width or y0 + 1 >= grid.height:
        return None
    patch = grid.depth[y0:y0 + 2, x0:x0 + 2]
    if not np.all(np.isfinite(patch)):
        return None
    fx, fy = x - x0, y - y0
    top = patch[0, 0] * (1 - fx) + patch[0, 1] * fx
    bottom = patch[1, 0] * (1 - fx) + patch[1, 1] * fx
    return float(top * (1 - fy) + bottom * fy)


def lift_point(grid: DepthGrid, pixel, hole_radius: int = 3) -> np.ndarray:
    """Back-project a pixel to mm.

    Depth is bilinear when the four surrounding pixels are defined; otherwise
    the nearest defined depth within ``hole_radius`` px is used.
    """
    x, y = float(pixel[0]), float(pixel[1])
    ix, iy = int(np.floor(x + 0.5)), int(np.floor(y + 0.5))
    if not (0 <= ix < grid.width and 0 <= iy < grid.height):
        raise DepthHoleError(f"pixel ({x:.2f}, {y:.2f}) is outside the depth grid")
    z = _bilinear_depth(grid, x, y)
    if z is None:
        r = hole_radius
        ys, xs = np.mgrid[max(0, iy - r):min(grid.height, iy + r + 1),
                          max(0, ix - r):min(grid.width, ix + r + 1)]
        vals = grid.depth[ys, xs]
        d2 = (xs - x) ** 2 + (ys - y) ** 2
        ok = np.isfinite(vals) & (d2 <= r * r + 1e-9)
        if not ok.any():
            raise DepthHoleError(f"no depth within {r} px of pixel ({x:.2f}, {y:.2f})")
        k = np.flatnonzero(ok.ravel())[np.argmin(d2.ravel()[ok.ravel()])]
        z = float(vals.ravel()[k])
    return grid.back_project(x, y, z)


def _sample_triples(rng: np.random.Generator, n: int, iterations: int) -> np.ndarray:
    """Uniform ordered triples of distinct indices, shape ``(iterations, 3)``."""
    a = rng.integers(0, n, size=iterations)
    b = rng.integers(0, n - 1, size=iterations)
    b += b >= a
    c = rng.integers(0, n - 2, size=iterations)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    c += c >= lo
    c += c >= hi
    return np.column_stack([a, b, c]).astype(np.int64)


def fit_plane_lstsq(points) -> Plane3D:
    p = np.asarray(points, dtype=float)
    centroid = p.mean(axis=0)
    _, _, vt = np.linalg.svd(p - centroid, full_matrices=False)
    return Plane3D.from_normal_point(vt[-1], centroid)


def ransac_plane(points, iterations: int = 200, inlier_tol: float = 1.5,
                 rng_seed=0) -> Plane3D:
    """Robust plane fit.

    Each iteration draws three distinct points and scores the exact plane
    through them by its inlier count; the best hypothesis (first on ties) is
    refitted by least squares over its inliers. The normal is unit length with
    c >= 0 (then b >= 0, then a >= 0).
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3 or len(p) < 3:
        raise PlaneFitError(f"need >= 3 points of shape (N, 3), got {p.shape}")
    rng = np.random.default_rng(rng_seed)
    triples = _sample_triples(rng, len(p), iterations)
    counts, normals, offsets = kernels.plane_hypotheses(p, triples, float(inlier_tol))
    best = int(np.argmax(counts))
    if counts[best] < 0:
        raise PlaneFitError(f"all {iterations} samples were collinear")
    dist = np.abs(p @ normals[best] + offsets[best])
    inliers = p[dist <= inlier_tol]
    if len(inliers) < 3:
        return Plane3D.from_normal_point(normals[best], p[triples[best, 0]])
    return fit_plane_lstsq(inliers)


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 200
    inlier_tol: float = 1.5
    seed: int = 0


@dataclass(frozen=True, eq=False)
class ToolTrajectory:
    poses: list = field(default_factory=list)
    approach_clearance: float = 20.0
    retract_clearance: float = 20.0

    def origins(self) -> np.ndarray:
        return np.array([f.origin for f in self.poses])

    def max_step(self) -> float:
        o = self.origins()
        return float(np.max(np.linalg.norm(np.diff(o, axis=0), axis=1))) if len(o) > 1 else 0.0

    def is_feasible(self, max_step_mm: float = 25.0, tol: float = 1e-9) -> bool:
        return self.max_step() <= max_step_mm and all(f.is_valid(tol) for f in self.poses)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, f in enumerate(self.poses):
            w.writerow([i] + [repr(float(v)) for v in np.concatenate([f.origin, f.x, f.y, f.z])])
        return buf.getvalue()


def window_points(grid: DepthGrid, pixel, window: int) -> np.ndarray:
    """Lifted 3D points of every defined depth pixel in the square window."""
    half = window // 2
    ix, iy = int(np.floor(pixel[0] + 0.5)), int(np.floor(pixel[1] + 0.5))
    y0, y1 = max(0, iy - half), min(grid.height, iy + half + 1)
    x0, x1 = max(0, ix - half), min(grid.width, ix + half + 1)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    z = grid.depth[y0:y1, x0:x1]
    ok = np.isfinite(z)
    return grid.back_project(xs[ok], ys[ok], z[ok])


def stroke_to_trajectory(stroke: CombStroke, grid: DepthGrid, window: int = 11,
                         ransac_cfg: RansacConfig = RansacConfig(),
                         approach_clearance: float = 20.0,
                         retract_clearance: float = 20.0) -> ToolTrajectory:
    """Contact poses along the stroke plus approach and retract standoffs.

    Each contact pose sits on the lifted stroke point; z is the local RANSAC
    plane normal turned toward the camera, y the projected path tangent.
    Errors carry the index of the failing stroke point.
    """
    path = stroke.path
    n = len(path)
    lifted = np.empty((n, 3))
    for i, px in enumerate(path):
        try:
            lifted[i] = lift_point(grid, px)
        except DepthHoleError as exc:
            raise DepthHoleError(str(exc), stroke_index=i) from exc
    seeds = np.random.SeedSequence(ransac_cfg.seed).generate_state(n)
    poses = []
    for i in range(n):
        pts = window_points(grid, path[i], window)
        try:
            plane = ransac_plane(pts, ransac_cfg.iterations, ransac_cfg.inlier_tol, int(seeds[i]))
        except PlaneFitError as exc:
            raise PlaneFitError(str(exc), stroke_index=i) from exc
        normal = plane.normal
        # face the camera origin
        if np.dot(normal, -lifted[i]) < 0:
            normal = -normal
        lo, hi = max(i - 1, 0), min(i + 1, n - 1)
        tangent = lifted[hi] - lifted[lo]
        poses.append(build_frame(lifted[i], tangent, normal))
    first, last = poses[0], poses[-1]
    poses.insert(0, first.translated(approach_clearance * first.z))
    poses.append(last.translated(retract_clearance * last.z))
    return ToolTrajectory(poses, approach_clearance, retract_clearance)

