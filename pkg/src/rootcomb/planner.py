"""Root-centric target strand selection and comb stroke generation."""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from rootcomb.geometry import arc_length, as_polyline, fit_bezier, point_at_length, resample_polyline
from rootcomb.tracing import Strand

logger = logging.getLogger(__name__)

NOISE = -1
_UNVISITED = -2

DEFAULT_EPS = 25.0
DEFAULT_MIN_PTS = 2
DEFAULT_RADIUS = 12.0
DEFAULT_RESAMPLE = 32
DEFAULT_COMB_LENGTH = 20.0
DEFAULT_COMB_WIDTH = 24.0
DEFAULT_STROKE_SAMPLES = 32


class NoRepresentativeError(ValueError):
    """The largest cluster is empty, so there is nothing to average."""


class InvalidRepresentativeError(ValueError):
    pass


def strand_features(strands, direction_weight: float = 1.0) -> np.ndarray:
    """Rows of ``(end_x, end_y, w*dir_x, w*dir_y)``, dir being tip minus root."""
    if len(strands) == 0:
        return np.zeros((0, 4))
    tips = np.array([s.tip for s in strands])
    roots = np.array([s.root for s in strands])
    return np.hstack([tips, direction_weight * (tips - roots)])


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Plain DBSCAN labels (``NOISE`` = -1), visiting points in index order.

    A point's neighbourhood includes itself and every point within ``eps``.
    """
    X = np.asarray(points, dtype=float)
    n = len(X)
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    neighbours = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    labels = np.full(n, _UNVISITED, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != _UNVISITED:
            continue
        if len(neighbours[i]) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = deque(int(j) for j in neighbours[i] if j != i)
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster  # border point
            if labels[j] != _UNVISITED:
                continue
            labels[j] = cluster
            if len(neighbours[j]) >= min_pts:
                queue.extend(int(k) for k in neighbours[j])
        cluster += 1
    return labels


@dataclass(frozen=True, eq=False)
class ClusterResult:
    labels: np.ndarray
    largest_cluster: list

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


def largest_cluster(labels: np.ndarray) -> list:
    """Indices of the biggest non-noise cluster; ties go to the smaller id."""
    valid = labels[labels >= 0]
    if len(valid) == 0:
        return []
    counts = np.bincount(valid)
    best = int(np.argmax(counts))  # first maximum = smallest id
    return [int(i) for i in np.flatnonzero(labels == best)]


def candidate_targets(current: Strand, target_strands, radius: float = DEFAULT_RADIUS):
    """Target strands rooted within ``radius`` px of the current strand's root."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not target_strands:
        return []
    roots = np.array([s.root for s in target_strands])
    d = np.linalg.norm(roots - current.root, axis=1)
    return [s for s, di in zip(target_strands, d) if di <= radius]


def cluster_strands(candidates, eps: float = DEFAULT_EPS, min_pts: int = DEFAULT_MIN_PTS,
                    direction_weight: float = 1.0) -> ClusterResult:
    if len(candidates) == 0:
        raise ValueError("cluster_strands needs at least one candidate")
    labels = dbscan(strand_features(candidates, direction_weight), eps, min_pts)
    return ClusterResult(labels, largest_cluster(labels))


def average_strands(strands, n_points: int = DEFAULT_RESAMPLE) -> Strand:
    stack = np.stack([resample_polyline(s.path, n_points) for s in strands])
    path = stack.mean(axis=0)
    # the pointwise mean already starts at the mean root; pin it exactly
    path[0] = np.mean([s.root for s in strands], axis=0)
    return Strand(path)


def representative_strand(candidates, cluster: ClusterResult,
                          n_points: int = DEFAULT_RESAMPLE) -> Strand:
    """Pointwise mean of the largest cluster's strands after arc-length resampling."""
    if not cluster.largest_cluster:
        raise NoRepresentativeError("largest cluster is empty (all candidates are noise)")
    return average_strands([candidates[i] for i in cluster.largest_cluster], n_points)


def centroid_fallback(candidates, direction_weight: float = 1.0) -> Strand:
    """Candidate whose feature vector lies nearest the candidate centroid."""
    f = strand_features(candidates, direction_weight)
    d = np.linalg.norm(f - f.mean(axis=0), axis=1)
    return candidates[int(np.argmin(d))]


@dataclass(frozen=True, eq=False)
class CombStroke:
    path: np.ndarray
    comb_width: float
    source_root: np.ndarray

    @property
    def length(self) -> float:
        return arc_length(self.path)

    def to_json(self) -> str:
        return json.dumps({
            "path": self.path.tolist(),
            "comb_width": self.comb_width,
            "source_root": list(map(float, self.source_root)),
        })

    @classmethod
    def from_json(cls, text: str) -> "CombStroke":
        doc = json.loads(text)
        return cls(as_polyline(doc["path"], "stroke path"), float(doc["comb_width"]),
                   np.asarray(doc["source_root"], dtype=float))


def initial_direction(path: np.ndarray, reach: float = 4.0) -> np.ndarray:
    """Unit vector from the first point toward the point ``reach`` px along the path."""
    ahead = point_at_length(path, reach) - path[0]
    n = np.linalg.norm(ahead)
    if n == 0:
        raise InvalidRepresentativeError("representative strand has zero length")
    return ahead / n


def generate_stroke(current: Strand, rep: Strand, comb_length: float = DEFAULT_COMB_LENGTH,
                    samples: int = DEFAULT_STROKE_SAMPLES,
                    comb_width: float = DEFAULT_COMB_WIDTH) -> CombStroke:
    """Comb stroke along ``rep`` re-rooted at the current strand's root.

    The path starts ``comb_length`` px behind the root, along the reverse of
    rep's initial direction, so the raw length is ``len(rep) + comb_length``.
    The raw path is then smoothed with a cubic Bezier.
    """
    if comb_length <= 0:
        raise ValueError("comb_length must be positive")
    if rep.arc_length <= 0:
        raise InvalidRepresentativeError("representative strand has zero length")
    root = current.root
    u = initial_direction(rep.path)
    body = rep.path - rep.root + root
    raw = np.vstack([root - comb_length * u, body])
    return CombStroke(fit_bezier(raw, samples), float(comb_width), root.copy())


def random_baseline_stroke(target_strands, rng_seed, comb_length: float = DEFAULT_COMB_LENGTH,
                           samples: int = DEFAULT_STROKE_SAMPLES,
                           comb_width: float = DEFAULT_COMB_WIDTH) -> CombStroke:
    """Stroke along one uniformly drawn target strand, at that strand's own root."""
    if len(target_strands) == 0:
        raise ValueError("random baseline needs at least one target strand")
    rng = np.random.default_rng(rng_seed)
    chosen = target_strands[int(rng.integers(len(target_strands)))]
    return generate_stroke(chosen, chosen, comb_length, samples, comb_width)


def plan_root_centric(current: Strand, target_strands, radius: float = DEFAULT_RADIUS,
                      eps: float = DEFAULT_EPS, min_pts: int = DEFAULT_MIN_PTS,
                      direction_weight: float = 1.0, n_points: int = DEFAULT_RESAMPLE,
                      comb_length: float = DEFAULT_COMB_LENGTH,
                      samples: int = DEFAULT_STROKE_SAMPLES,
                      comb_width: float = DEFAULT_COMB_WIDTH):
    """Full proposed planning step for one current strand.

    Returns ``(stroke, used_fallback)``, or ``(None, False)`` when no target
    strand is rooted nearby.
    """
    cands = candidate_targets(current, target_strands, radius)
    if not cands:
        return None, False
    clusters = cluster_strands(cands, eps, min_pts, direction_weight)
    fallback = False
    try:
        rep = representative_strand(cands, clusters, n_points)
    except NoRepresentativeError:
        logger.debug("all %d candidates are noise; using centroid fallback", len(cands))
        rep = Strand(resample_polyline(centroid_fallback(cands, direction_weight).path, n_points))
        fallback = True
    return generate_stroke(current, rep, comb_length, samples, comb_width), fallback
