"""Strand extraction from orientation maps.

Seeds are picked where the orientation difference is large, then a
streamline is integrated through the orientation field in both directions.
The trace end closer to the scalp line becomes the strand root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from rootcomb import kernels
from rootcomb.geometry import angle_to_direction, arc_length, as_polyline, distance_to_polyline
from rootcomb.orientation import DifferenceReport, OrientationState


class InvalidSeedError(ValueError):
    pass


class Strand:
    """A root-to-tip polyline in pixel coordinates."""

    __slots__ = ("path", "_length")

    def __init__(self, path):
        self.path = as_polyline(path, "strand path")
        self.path.setflags(write=False)
        self._length = None

    @property
    def root(self) -> np.ndarray:
        return self.path[0]

    @property
    def tip(self) -> np.ndarray:
        return self.path[-1]

    @property
    def arc_length(self) -> float:
        if self._length is None:
            self._length = arc_length(self.path)
        return self._length

    def translated(self, offset) -> "Strand":
        return Strand(self.path + np.asarray(offset, dtype=float))

    def __len__(self):
        return len(self.path)

    def __repr__(self):
        r = self.root
        return f"Strand(root=({r[0]:.1f}, {r[1]:.1f}), n={len(self.path)}, L={self.arc_length:.1f})"


@dataclass(frozen=True)
class SeedPolicy:
    difference_threshold: float = 0.35
    max_seeds: int = 8
    min_seed_separation: float = 12.0

    def __post_init__(self):
        if not 0.0 < self.difference_threshold < np.pi:
            raise ValueError("difference_threshold must lie in (0, pi)")
        if self.max_seeds < 1:
            raise ValueError("max_seeds must be >= 1")
        if self.min_seed_separation < 0:
            raise ValueError("min_seed_separation must be >= 0")


def select_seeds(report: DifferenceReport, policy: SeedPolicy = SeedPolicy()):
    """Greedy non-maximum suppression over significant difference pixels.

    Candidates are visited in descending delta (row-major order on ties); a
    candidate is kept when it is at least ``min_seed_separation`` px from every
    seed kept so far. Returns a list of ``(x, y)`` integer tuples.
    """
    significant = report.mask & (report.delta >= policy.difference_threshold)
    ys, xs = np.nonzero(significant)
    if len(xs) == 0:
        return []
    values = report.delta[ys, xs]
    order = np.argsort(-values, kind="stable")
    xs = xs[order].astype(float)
    ys = ys[order].astype(float)
    alive = np.ones(len(xs), dtype=bool)
    sep2 = policy.min_seed_separation ** 2
    seeds = []
    while len(seeds) < policy.max_seeds:
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        i = idx[0]
        seeds.append((int(xs[i]), int(ys[i])))
        alive &= (xs - xs[i]) ** 2 + (ys - ys[i]) ** 2 >= sep2
        alive[i] = False
    return seeds


class FieldTracer:
    """Caches the direction components of one orientation map for repeated tracing."""

    def __init__(self, state: OrientationState):
        self.state = state
        d = angle_to_direction(state.orientation)
        m = state.mask
        self.dirx = np.ascontiguousarray(np.where(m, d[..., 0], 0.0))
        self.diry = np.ascontiguousarray(np.where(m, d[..., 1], 0.0))
        self.mask = np.ascontiguousarray(m, dtype=np.uint8)

    def trace(self, seed, step: float = 1.0, max_steps: int = 600,
              turn_limit: float = np.deg2rad(60.0)) -> Strand:
        x, y = float(seed[0]), float(seed[1])
        ix, iy = int(np.floor(x + 0.5)), int(np.floor(y + 0.5))
        h, w = self.mask.shape
        if not (0 <= ix < w and 0 <= iy < h) or not self.mask[iy, ix]:
            raise InvalidSeedError(f"seed ({x}, {y}) is outside the hair mask")
        cos_turn = float(np.cos(turn_limit))
        down = kernels.trace_direction(self.dirx, self.diry, self.mask, x, y, 1.0,
                                       float(step), int(max_steps), cos_turn)
        budget = int(max_steps) - (len(down) - 1)
        up = kernels.trace_direction(self.dirx, self.diry, self.mask, x, y, -1.0,
                                     float(step), budget, cos_turn)
        path = np.vstack([up[::-1], down[1:]])
        if len(path) < 2:
            # isolated pixel: a zero-length trace still yields a valid stub
            d = np.array([self.dirx[iy, ix], self.diry[iy, ix]]) * 1e-3
            path = np.array([[x, y], [x + d[0], y + d[1]]])
        ends = distance_to_polyline(path[[0, -1]], self.state.scalp_line)
        if ends[1] < ends[0]:
            path = path[::-1]
        return Strand(path)


def trace_strand(state: OrientationState, seed, step: float = 1.0, max_steps: int = 600,
                 turn_limit: float = np.deg2rad(60.0)) -> Strand:
    """Trace the strand through ``seed`` and orient it root to tip.

    ``max_steps`` bounds the total number of steps over both directions.
    Raises ``InvalidSeedError`` if the seed is not on the mask.
    """
    return FieldTracer(state).trace(seed, step, max_steps, turn_limit)


def strands_to_json(strands) -> str:
    doc = {"strands": [{"root": s.root.tolist(), "points": s.path.tolist()} for s in strands]}
    return json.dumps(doc)


def strands_from_json(text: str):
    doc = json.loads(text)
    out = []
    for item in doc["strands"]:
        s = Strand(item["points"])
        if not np.allclose(s.root, item["root"]):
            raise ValueError(f"root {item['root']} does not match first point {s.root.tolist()}")
        out.append(s)
    return out
