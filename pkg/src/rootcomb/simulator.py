"""A 2.5D stand-in for the mannequin and the comb.

The head is an analytic half-ellipsoid seen by an orthographic depth camera
(1 px = 1 mm). Hair is a list of root-to-tip strands rooted on the scalp line;
rendering rasterizes them into an orientation map, and a comb stroke re-lays
the strands whose roots it sweeps over.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rootcomb import kernels
from rootcomb.geometry import (
    arc_length, cumulative_length, distance_to_polyline, project_onto_polyline, resample_polyline,
)
from rootcomb.orientation import LandmarkSet, OrientationState, Similarity
from rootcomb.planner import CombStroke
from rootcomb.tracing import Strand
from rootcomb.trajectory import DepthGrid


@dataclass(frozen=True, eq=False)
class HeadModel:
    depth: DepthGrid
    scalp_line: np.ndarray
    landmarks: LandmarkSet

    @property
    def shape(self):
        return self.depth.depth.shape

    @property
    def scalp_length(self) -> float:
        return arc_length(self.scalp_line)

    def scalp_point(self, fraction: float) -> np.ndarray:
        s = cumulative_length(self.scalp_line)
        d = fraction * s[-1]
        return np.array([np.interp(d, s, self.scalp_line[:, 0]),
                         np.interp(d, s, self.scalp_line[:, 1])])


def make_head_model(size: int = 256, radii=(118.0, 124.0, 90.0),
                    camera_distance: float = 400.0, hairline_shift: float = 0.0,
                    hairline_curvature: float = 0.004) -> HeadModel:
    """Half-ellipsoid head centred in a ``size`` x ``size`` grid.

    ``hairline_shift`` moves the scalp line down (px, at 256 scale) and
    ``hairline_curvature`` sets its bow; the face landmarks do not move.
    """
    c = (size - 1) / 2.0
    rx, ry, rz = radii
    ys, xs = np.mgrid[0:size, 0:size].astype(float)
    r2 = ((xs - c) / rx) ** 2 + ((ys - c) / ry) ** 2
    depth = np.full((size, size), np.nan)
    inside = r2 < 1.0
    depth[inside] = camera_distance - rz * np.sqrt(1.0 - r2[inside])
    grid = DepthGrid(depth, 1.0, 1.0, c, c)
    k = size / 256.0
    xs_scalp = np.arange(60.0, 196.0 + 1e-9, 2.0) * k
    scalp = np.column_stack([xs_scalp, (52.0 + hairline_shift) * k
                             + hairline_curvature / k * (xs_scalp - c) ** 2])
    landmarks = LandmarkSet({
        "eye_left": (98.0 * k, 170.0 * k),
        "eye_right": (158.0 * k, 170.0 * k),
        "nose": (128.0 * k, 200.0 * k),
        "chin": (128.0 * k, 240.0 * k),
    })
    return HeadModel(grid, scalp, landmarks)


@dataclass(frozen=True, eq=False)
class StrandField:
    """Strands plus per-strand stiffness and draw order.

    ``order`` lists strand indices bottom to top; it defaults to list order.
    """

    strands: tuple
    stiffness: np.ndarray
    order: np.ndarray = None

    def __post_init__(self):
        if len(self.strands) < 1:
            raise ValueError("a strand field needs at least one strand")
        if len(self.stiffness) != len(self.strands):
            raise ValueError("one stiffness value per strand is required")
        if np.any((self.stiffness < 0) | (self.stiffness > 1)):
            raise ValueError("stiffness must lie in [0, 1]")
        order = np.arange(len(self.strands)) if self.order is None else np.asarray(self.order)
        if not np.array_equal(np.sort(order), np.arange(len(self.strands))):
            raise ValueError("order must be a permutation of the strand indices")
        object.__setattr__(self, "order", order)

    def __len__(self):
        return len(self.strands)

    def roots(self) -> np.ndarray:
        return np.array([s.root for s in self.strands])

    def transformed(self, transform: Similarity) -> "StrandField":
        return StrandField(tuple(Strand(transform.apply(s.path)) for s in self.strands),
                           self.stiffness, self.order)

    def identical_to(self, other: "StrandField") -> bool:
        return (len(self) == len(other)
                and np.array_equal(self.stiffness, other.stiffness)
                and np.array_equal(self.order, other.order)
                and all(a is b or np.array_equal(a.path, b.path)
                        for a, b in zip(self.strands, other.strands)))


@dataclass(frozen=True, eq=False)
class StyleScenario:
    name: str
    target_field: StrandField
    description: str
    part: np.ndarray = field(default=None)


def grow_strand(root, bend, length: float, n_points: int) -> Strand:
    """Strand whose angle from straight-down follows ``bend(u)`` for u in [0, 1].

    Positive angles lean toward +x.
    """
    u = (np.arange(n_points - 1) + 0.5) / (n_points - 1)
    a = bend(u)
    seg = length / (n_points - 1)
    steps = np.column_stack([np.sin(a), np.cos(a)]) * seg
    path = np.vstack([root, root + np.cumsum(steps, axis=0)])
    return Strand(path)


def _root_positions(model: HeadModel, n_strands: int):
    fractions = np.linspace(0.02, 0.98, n_strands)
    return fractions, np.array([model.scalp_point(f) for f in fractions])


def natural_field(model: HeadModel, n_strands: int = 64, length: float = 100.0,
                  n_points: int = 41, stiffness: float = 0.2, jitter: float = 0.0,
                  rng_seed=None) -> StrandField:
    """Hair brushed straight down, optionally with a random per-strand sway.

    The sway bends each strand progressively from root to tip by an angle
    drawn from N(0, jitter) at the tip.
    """
    _, roots = _root_positions(model, n_strands)
    rng = np.random.default_rng(rng_seed)
    sway = rng.normal(0.0, jitter, n_strands) if jitter > 0 else np.zeros(n_strands)
    strands = tuple(grow_strand(r, lambda u, j=j: j * u, length, n_points)
                    for r, j in zip(roots, sway))
    return StrandField(strands, np.full(n_strands, float(stiffness)))


def parted_field(model: HeadModel, part_fraction: float, n_strands: int = 64,
                 length: float = 100.0, n_points: int = 41, stiffness: float = 0.2,
                 near_angle: float = np.deg2rad(40.0), far_angle: float = np.deg2rad(12.0),
                 settle: float = 0.7) -> StrandField:
    """Hair parted at ``part_fraction`` of the scalp line, swept away from the part.

    Strands leave the root at ``near_angle`` from vertical next to the part and
    ``far_angle`` at the scalp ends, relaxing toward vertical by ``settle``
    (fraction of the initial lean lost at the tip).
    """
    fractions, roots = _root_positions(model, n_strands)
    strands = []
    for f, r in zip(fractions, roots):
        if f < part_fraction:
            side, q = -1.0, (part_fraction - f) / part_fraction
        else:
            side, q = 1.0, (f - part_fraction) / (1.0 - part_fraction)
        a0 = near_angle + (far_angle - near_angle) * q
        strands.append(grow_strand(r, lambda u, a0=a0, side=side: side * a0 * (1.0 - settle * u),
                                   length, n_points))
    return StrandField(tuple(strands), np.full(n_strands, float(stiffness)))


def builtin_scenarios(model: HeadModel, n_strands: int = 64, length: float = 100.0,
                      n_points: int = 41, stiffness: float = 0.2):
    """The natural, 5:5 and 7:3 parting target styles."""
    kw = dict(n_strands=n_strands, length=length, n_points=n_points, stiffness=stiffness)
    return [
        StyleScenario("natural", natural_field(model, **kw),
                      "all strands combed straight down"),
        StyleScenario("5to5", parted_field(model, 0.5, **kw),
                      "centre parting, strands swept left and right",
                      model.scalp_point(0.5)),
        StyleScenario("7to3", parted_field(model, 0.7, **kw),
                      "side parting at 70% of the scalp line",
                      model.scalp_point(0.7)),
    ]


SCENARIO_NAMES = ("natural", "5to5", "7to3")


def render(model: HeadModel, field: StrandField, rasterize_width: float = 5.0,
           shape=None) -> OrientationState:
    """Rasterize strands into an orientation map, painting in draw order (top wins)."""
    h, w = model.shape if shape is None else shape
    theta = np.zeros((h, w))
    mask = np.zeros((h, w), dtype=np.uint8)
    radius = rasterize_width / 2.0
    for i in field.order:
        kernels.rasterize_strand(field.strands[i].path, radius, theta, mask)
    return OrientationState(theta, mask.astype(bool), model.scalp_line)


def photograph(model: HeadModel, field: StrandField, pose: Similarity,
               rasterize_width: float = 5.0):
    """Render the field as seen under a camera pose; returns (state, landmarks)."""
    state = render(model, field.transformed(pose), rasterize_width)
    state = OrientationState(state.orientation, state.mask, pose.apply(model.scalp_line))
    return state, model.landmarks.transformed(pose)


def _follow(path: np.ndarray, root: np.ndarray, length: float, n_points: int) -> np.ndarray:
    """Stroke path from the point nearest ``root`` onward, shifted to start at the root.

    Extended straight past the stroke end if it is shorter than ``length``.
    """
    _, seg, _, foot = project_onto_polyline(root, path)
    rest = np.vstack([foot, path[seg + 1:]])
    keep = np.ones(len(rest), dtype=bool)
    keep[1:] = np.any(np.diff(rest, axis=0) != 0, axis=1)
    rest = rest[keep] + (root - foot)
    if len(rest) < 2:
        tail = path[-1] - path[-2]
        rest = np.vstack([rest, rest[-1] + tail])
    s = cumulative_length(rest)
    if s[-1] < length:
        d = rest[-1] - rest[-2]
        d /= np.linalg.norm(d)
        rest = np.vstack([rest, rest[-1] + (length - s[-1]) * d])
        s = cumulative_length(rest)
    target = np.linspace(0.0, length, n_points)
    return np.column_stack([np.interp(target, s, rest[:, 0]), np.interp(target, s, rest[:, 1])])


def apply_stroke(field: StrandField, stroke: CombStroke, catch_width=None,
                 compliance: float = 0.85, noise_sigma: float = 0.05, rng_seed=0) -> StrandField:
    """Re-lay every strand whose root lies inside the comb swath.

    A caught strand is blended toward the stroke path (taken from the point
    nearest its root) with weight ``compliance * (1 - stiffness)``, each
    segment then turned by N(0, noise_sigma), and rebuilt with its original
    arc length. Re-laid strands move to the top of the draw order, keeping
    their relative order. Strands outside the swath are returned as the same
    objects.
    """
    if not 0.0 <= compliance <= 1.0:
        raise ValueError("compliance must lie in [0, 1]")
    width = stroke.comb_width if catch_width is None else catch_width
    rng = np.random.default_rng(rng_seed)
    roots = field.roots()
    caught = distance_to_polyline(roots, stroke.path) <= width / 2.0
    strands = list(field.strands)
    moved = np.zeros(len(strands), dtype=bool)
    for i in np.flatnonzero(caught):
        weight = compliance * (1.0 - field.stiffness[i])
        if weight <= 0.0:
            continue
        moved[i] = True
        old = strands[i]
        n = len(old.path)
        length = old.arc_length
        guide = _follow(stroke.path, old.root, length, n)
        blended = (1.0 - weight) * resample_polyline(old.path, n) + weight * guide
        d = np.diff(blended, axis=0)
        ang = np.arctan2(d[:, 1], d[:, 0])
        if noise_sigma > 0:
            ang = ang + rng.normal(0.0, noise_sigma, len(ang))
        seg = length / (n - 1)
        steps = np.column_stack([np.cos(ang), np.sin(ang)]) * seg
        strands[i] = Strand(np.vstack([old.root, old.root + np.cumsum(steps, axis=0)]))
    order = np.concatenate([field.order[~moved[field.order]], field.order[moved[field.order]]])
    return StrandField(tuple(strands), field.stiffness, order)
