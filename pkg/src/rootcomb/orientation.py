"""Orientation maps: alignment, mask erosion and difference metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from rootcomb.geometry import TWO_PI, angle_difference, as_polyline, normalize_angle

#: value used for current-mask pixels the aligned target leaves uncovered
DEFAULT_ABSENT_PENALTY = np.pi / 2
DEFAULT_EROSION = 15


class AlignmentError(ValueError):
    """Landmarks do not determine a similarity transform."""


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OrientationState:
    """Directed orientation map plus hair mask and scalp reference.

    ``orientation`` is ``(H, W)`` radians in [0, 2*pi) and is only meaningful
    where ``mask`` is true (unmasked entries are kept at 0).
    """

    orientation: np.ndarray
    mask: np.ndarray
    scalp_line: np.ndarray

    def __post_init__(self):
        if self.orientation.shape != self.mask.shape:
            raise ShapeMismatchError(
                f"orientation {self.orientation.shape} vs mask {self.mask.shape}")
        if not np.all(np.isfinite(self.orientation[self.mask])):
            raise ValueError("orientation must be finite under the mask")

    @property
    def height(self) -> int:
        return self.orientation.shape[0]

    @property
    def width(self) -> int:
        return self.orientation.shape[1]

    def with_mask(self, mask: np.ndarray) -> "OrientationState":
        orient = np.where(mask, self.orientation, 0.0)
        return OrientationState(orient, mask, self.scalp_line)

    def eroded(self, kernel_size: int = DEFAULT_EROSION) -> "OrientationState":
        return self.with_mask(erode_mask(self.mask, kernel_size))

    def same_as(self, other: "OrientationState") -> bool:
        return (np.array_equal(self.mask, other.mask)
                and np.array_equal(self.orientation, other.orientation)
                and np.array_equal(self.scalp_line, other.scalp_line))


@dataclass(frozen=True)
class LandmarkSet:
    """Named facial landmarks in pixel coordinates."""

    points: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) < 3:
            raise AlignmentError(f"need >= 3 landmarks, got {len(self.points)}")
        arr = self.array()
        centred = arr - arr.mean(axis=0)
        if np.linalg.matrix_rank(centred, tol=1e-9 * max(1.0, np.abs(centred).max())) < 2:
            raise AlignmentError("landmarks are collinear")

    def names(self):
        return sorted(self.points)

    def array(self, names=None) -> np.ndarray:
        names = self.names() if names is None else names
        return np.array([self.points[n] for n in names], dtype=float)

    def transformed(self, transform: "Similarity") -> "LandmarkSet":
        names = self.names()
        moved = transform.apply(self.array(names))
        return LandmarkSet({n: (float(p[0]), float(p[1])) for n, p in zip(names, moved)})


@dataclass(frozen=True)
class Similarity:
    """``p -> scale * R(rotation) p + (tx, ty)`` in image coordinates.

    The rotation is stored as the turn it causes in orientation angles
    (counter-clockwise with +y up), so mapping an image by this transform adds
    ``rotation`` to every orientation value.
    """

    rotation: float = 0.0
    scale: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def _complex(self) -> complex:
        # +y down: a visual counter-clockwise turn is a negative complex angle
        return self.scale * np.exp(-1j * self.rotation)

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        z = p[..., 0] + 1j * p[..., 1]
        out = self._complex() * z + (self.tx + 1j * self.ty)
        return np.stack([out.real, out.imag], axis=-1)

    def inverse(self) -> "Similarity":
        a = 1.0 / self._complex()
        b = -a * (self.tx + 1j * self.ty)
        return Similarity(float(-np.angle(a)), float(abs(a)), float(b.real), float(b.imag))

    @classmethod
    def about(cls, center, rotation: float = 0.0, scale: float = 1.0,
              shift=(0.0, 0.0)) -> "Similarity":
        """Rotate/scale about ``center`` and then translate by ``shift``."""
        a = scale * np.exp(-1j * rotation)
        c = complex(center[0], center[1])
        b = c - a * c + complex(shift[0], shift[1])
        return cls(rotation, scale, float(b.real), float(b.imag))


def fit_similarity(source: LandmarkSet, destination: LandmarkSet) -> Similarity:
    """Least-squares similarity mapping ``source`` landmarks onto ``destination``."""
    if set(source.points) != set(destination.points):
        raise AlignmentError(
            f"landmark names differ: {sorted(source.points)} vs {sorted(destination.points)}")
    names = source.names()
    s = source.array(names)
    d = destination.array(names)
    zs = s[:, 0] + 1j * s[:, 1]
    zd = d[:, 0] + 1j * d[:, 1]
    ms, md = zs.mean(), zd.mean()
    denom = np.sum(((zs - ms) * np.conj(zs - ms)).real)
    if denom == 0:
        raise AlignmentError("source landmarks coincide")
    a = np.sum((zd - md) * np.conj(zs - ms)) / denom
    b = md - a * ms
    return Similarity(float(-np.angle(a)), float(abs(a)), float(b.real), float(b.imag))


def warp_state(state: OrientationState, transform: Similarity,
               shape=None) -> OrientationState:
    """Resample a state under ``transform`` with nearest-neighbour lookup."""
    h, w = state.mask.shape if shape is None else shape
    inv = transform.inverse()
    ys, xs = np.mgrid[0:h, 0:w]
    src = inv.apply(np.stack([xs, ys], axis=-1).astype(float))
    sx = np.floor(src[..., 0] + 0.5).astype(np.int64)
    sy = np.floor(src[..., 1] + 0.5).astype(np.int64)
    sh, sw = state.mask.shape
    inside = (sx >= 0) & (sx < sw) & (sy >= 0) & (sy < sh)
    sxc = np.clip(sx, 0, sw - 1)
    syc = np.clip(sy, 0, sh - 1)
    mask = inside & state.mask[syc, sxc]
    orient = np.where(mask, normalize_angle(state.orientation[syc, sxc] + transform.rotation), 0.0)
    return OrientationState(orient, mask, transform.apply(state.scalp_line))


def align_target(target_state: OrientationState, target_landmarks: LandmarkSet,
                 current_landmarks: LandmarkSet) -> OrientationState:
    """Map the target state into the current image frame.

    The similarity transform is fitted to the landmark correspondences;
    orientation values turn with it.
    """
    return warp_state(target_state, fit_similarity(target_landmarks, current_landmarks))


def erode_mask(mask: np.ndarray, kernel_size: int = DEFAULT_EROSION) -> np.ndarray:
    """Binary erosion with a ``kernel_size`` square; outside the image counts as empty."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    mask = np.asarray(mask, dtype=bool)
    if kernel_size == 1:
        return mask.copy()
    structure = np.ones((kernel_size, kernel_size), dtype=bool)
    return ndimage.binary_erosion(mask, structure=structure, border_value=0)


@dataclass(frozen=True, eq=False)
class DifferenceReport:
    """Per-pixel orientation difference over the current mask and its mean."""

    delta: np.ndarray
    mask: np.ndarray
    mean: float
    coverage_penalty_count: int


def difference_map(current: OrientationState, aligned_target: OrientationState,
                   absent_mask_penalty: float = DEFAULT_ABSENT_PENALTY) -> DifferenceReport:
    """Compare two (already eroded) states over the current mask.

    Pixels covered by both use the folded angle difference; pixels the target
    does not cover take ``absent_mask_penalty``. ``coverage_penalty_count``
    counts pixels where exactly one of the two masks is set.
    """
    if current.mask.shape != aligned_target.mask.shape:
        raise ShapeMismatchError(
            f"current {current.mask.shape} vs target {aligned_target.mask.shape}")
    cur = current.mask
    if not cur.any():
        raise ValueError("current mask is empty")
    both = cur & aligned_target.mask
    delta = np.zeros(cur.shape)
    delta[both] = angle_difference(current.orientation[both], aligned_target.orientation[both])
    delta[cur & ~aligned_target.mask] = absent_mask_penalty
    mean = float(np.mean(delta[cur]))
    return DifferenceReport(delta, cur.copy(), mean, int(np.count_nonzero(cur ^ aligned_target.mask)))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def save_state(state: OrientationState, path) -> None:
    """Write ``ORIENT v1`` format: header, float32 LE grid (NaN = unmasked), scalp line."""
    grid = np.where(state.mask, state.orientation, np.nan).astype("<f4")
    scalp = " ".join(f"{x!r},{y!r}" for x, y in state.scalp_line.tolist())
    with open(path, "wb") as fh:
        fh.write(f"ORIENT v1 {state.width} {state.height}\n".encode("ascii"))
        fh.write(grid.tobytes(order="C"))
        fh.write(("\n" + scalp + "\n").encode("ascii"))


def load_state(path) -> OrientationState:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    parts = data[:nl].decode("ascii").split()
    if len(parts) != 4 or parts[0] != "ORIENT" or parts[1] != "v1":
        raise ValueError(f"{path}: not an ORIENT v1 file")
    w, h = int(parts[2]), int(parts[3])
    start = nl + 1
    end = start + 4 * w * h
    if len(data) < end:
        raise ValueError(f"{path}: truncated grid")
    grid = np.frombuffer(data[start:end], dtype="<f4").reshape(h, w).astype(np.float64)
    tail = data[end:].decode("ascii").split()
    scalp = as_polyline([[float(v) for v in pair.split(",")] for pair in tail], "scalp_line")
    mask = ~np.isnan(grid)
    orient = np.where(mask, np.mod(grid, TWO_PI), 0.0)
    return OrientationState(orient, mask, scalp)


def heatmap_rgb(report: DifferenceReport, vmax: float = np.pi) -> np.ndarray:
    """Blue (agreement) to red (large difference); unmasked pixels are black."""
    v = np.clip(report.delta / vmax, 0.0, 1.0)
    rgb = np.zeros(v.shape + (3,), dtype=np.uint8)
    rgb[..., 0] = np.round(255 * v).astype(np.uint8)
    rgb[..., 2] = np.round(255 * (1.0 - v)).astype(np.uint8)
    rgb[~report.mask] = 0
    return rgb


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P6":
        raise ValueError(f"{path}: not a binary PPM")
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data[pos:pos + 3 * w * h], dtype=np.uint8).reshape(h, w, 3)
