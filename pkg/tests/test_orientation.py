import math

import numpy as np
import pytest

from rootcomb.orientation import (
    AlignmentError, LandmarkSet, OrientationState, ShapeMismatchError, Similarity, align_target,
    difference_map, erode_mask, fit_similarity, heatmap_rgb, load_state, read_ppm, save_state,
    write_ppm,
)
from rootcomb.simulator import make_head_model

SCALP = np.array([[0.0, 0.0], [10.0, 0.0]])


def state(orient, mask):
    return OrientationState(np.asarray(orient, float), np.asarray(mask, bool), SCALP)


def dense_state(n=64, rng=None):
    ys, xs = np.mgrid[0:n, 0:n].astype(float)
    theta = np.mod(0.05 * xs + 0.11 * ys + 0.3 * np.sin(xs / 7.0), 2 * np.pi)
    mask = (xs - n / 2) ** 2 + (ys - n / 2) ** 2 < (0.45 * n) ** 2
    return state(np.where(mask, theta, 0.0), mask)


def landmarks(n=64):
    return LandmarkSet({"a": (20.0, 22.0), "b": (44.0, 21.0), "c": (31.0, 40.0), "d": (33.0, 50.0)})


# --- alignment ----------------------------------------------------------------

def test_align_identity_landmarks():
    s = dense_state()
    out = align_target(s, landmarks(), landmarks())
    assert out.same_as(s)


def test_align_translation_moves_mask_only():
    s = dense_state()
    moved = LandmarkSet({k: (x + 10.0, y) for k, (x, y) in landmarks().points.items()})
    out = align_target(s, landmarks(), moved)
    np.testing.assert_array_equal(out.mask[:, 10:], s.mask[:, :-10])
    np.testing.assert_array_equal(out.orientation[:, 10:], s.orientation[:, :-10])
    assert not out.mask[:, :10].any()


def _rotation_oracle(s, phi, cx, cy):
    """Per-pixel inverse rotation with nearest lookup, written without the library transform."""
    h, w = s.mask.shape
    theta = np.zeros((h, w))
    mask = np.zeros((h, w), bool)
    ambiguous = np.zeros((h, w), bool)
    c, sn = math.cos(phi), math.sin(phi)
    for y in range(h):
        for x in range(w):
            dx, dy = x - cx, y - cy
            xs = cx + c * dx - sn * dy
            ys = cy + sn * dx + c * dy
            ambiguous[y, x] = min(abs((xs % 1) - 0.5), abs((ys % 1) - 0.5)) < 1e-6
            ix, iy = int(math.floor(xs + 0.5)), int(math.floor(ys + 0.5))
            if 0 <= ix < w and 0 <= iy < h and s.mask[iy, ix]:
                mask[y, x] = True
                theta[y, x] = (s.orientation[iy, ix] + phi) % (2 * math.pi)
    return theta, mask, ambiguous


def test_align_rotation_turns_orientations():
    s = dense_state()
    cx = cy = 31.5
    phi = math.radians(30)
    # target landmarks are the current ones turned by -30 degrees, so alignment turns by +30
    back = Similarity.about((cx, cy), -phi)
    target_lm = landmarks().transformed(back)
    out = align_target(s, target_lm, landmarks())
    theta, mask, amb = _rotation_oracle(s, phi, cx, cy)
    ok = ~amb
    np.testing.assert_array_equal(out.mask[ok], mask[ok])
    both = ok & mask
    assert both.sum() > 1000
    d = np.abs(out.orientation[both] - theta[both])
    np.testing.assert_allclose(np.minimum(d, 2 * np.pi - d), 0.0, atol=1e-9)


def test_fit_similarity_recovers_transform(rng):
    for _ in range(20):
        t = Similarity(rng.uniform(-np.pi, np.pi), rng.uniform(0.5, 2), *rng.uniform(-50, 50, 2))
        lm = landmarks()
        got = fit_similarity(lm, lm.transformed(t))
        np.testing.assert_allclose(got.apply(lm.array()), t.apply(lm.array()), atol=1e-9)
        np.testing.assert_allclose(t.inverse().apply(t.apply(lm.array())), lm.array(), atol=1e-9)


def test_landmark_errors():
    with pytest.raises(AlignmentError):
        LandmarkSet({"a": (0, 0), "b": (1, 1)})
    with pytest.raises(AlignmentError):
        LandmarkSet({"a": (0, 0), "b": (1, 1), "c": (2, 2)})
    other = LandmarkSet({"x": (0, 0), "y": (5, 1), "z": (2, 7)})
    with pytest.raises(AlignmentError):
        fit_similarity(landmarks(), other)


def test_head_model_landmarks_align_to_themselves():
    m = make_head_model()
    t = fit_similarity(m.landmarks, m.landmarks)
    assert (t.rotation, t.scale, t.tx, t.ty) == pytest.approx((0, 1, 0, 0), abs=1e-12)


# --- erosion ------------------------------------------------------------------

def _erosion_oracle(masks, k):
    """AND over every offset of a k x k window; pixels beyond the border count as empty."""
    n, h, w = masks.shape
    r = k // 2
    padded = np.zeros((n, h + 2 * r, w + 2 * r), bool)
    padded[:, r:r + h, r:r + w] = masks
    out = np.ones((n, h, w), bool)
    for dy in range(k):
        for dx in range(k):
            out &= padded[:, dy:dy + h, dx:dx + w]
    return out


def test_erosion_examples():
    full = np.ones((100, 100), bool)
    e = erode_mask(full, 15)
    assert e.sum() == 86 * 86 and e[7:93, 7:93].all()
    m = np.random.default_rng(1).random((30, 30)) > 0.3
    np.testing.assert_array_equal(erode_mask(m, 1), m)
    with pytest.raises(ValueError):
        erode_mask(m, 4)


def test_erosion_random_64_size_5(rng):
    m = rng.random((64, 64)) > 0.2
    np.testing.assert_array_equal(erode_mask(m, 5), _erosion_oracle(m[None], 5)[0])


def all_4x4_masks():
    codes = np.arange(1 << 16, dtype=np.uint32)
    bits = (codes[:, None] >> np.arange(16, dtype=np.uint32)) & 1
    return bits.astype(bool).reshape(-1, 4, 4)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_erosion_exhaustive_4x4(k):
    masks = all_4x4_masks()
    expected = _erosion_oracle(masks, k)
    got = np.stack([erode_mask(m, k) for m in masks])
    np.testing.assert_array_equal(got, expected)


# --- difference map -------------------------------------------------------------

def _difference_oracle(cur, tgt, penalty):
    total, count = 0.0, 0
    h, w = cur.mask.shape
    for y in range(h):
        for x in range(w):
            if not cur.mask[y, x]:
                continue
            if tgt.mask[y, x]:
                d = abs(cur.orientation[y, x] % (2 * math.pi) - tgt.orientation[y, x] % (2 * math.pi))
                total += d - math.pi if d > math.pi else d
            else:
                total += penalty
            count += 1
    return total / count


def test_difference_hand_example():
    mask = np.array([[1, 1], [1, 1]], bool)
    cur = state(np.radians([[10, 10], [10, 10]]), mask)
    tgt = state(np.radians([[20, 30], [10, 10]]), mask)
    rep = difference_map(cur, tgt)
    assert rep.mean == pytest.approx(0.1309, abs=1e-4)
    assert rep.mean == pytest.approx(_difference_oracle(cur, tgt, np.pi / 2), abs=1e-12)


def test_difference_identity_and_penalty():
    s = dense_state()
    rep = difference_map(s, s)
    assert rep.mean == 0.0 and not rep.delta.any()
    cur = state(np.zeros((1, 3)), [[1, 1, 0]])
    tgt = state(np.zeros((1, 3)), [[0, 0, 1]])
    rep = difference_map(cur, tgt, np.pi / 2)
    assert rep.mean == pytest.approx(np.pi / 2)
    assert rep.coverage_penalty_count == 3


def test_difference_random_matches_oracle(rng):
    for _ in range(10):
        cur = state(rng.uniform(0, 2 * np.pi, (12, 12)), rng.random((12, 12)) > 0.3)
        tgt = state(rng.uniform(0, 2 * np.pi, (12, 12)), rng.random((12, 12)) > 0.3)
        if not cur.mask.any():
            continue
        rep = difference_map(cur, tgt)
        assert rep.mean == pytest.approx(_difference_oracle(cur, tgt, np.pi / 2), abs=1e-12)


def test_difference_errors():
    a = state(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ShapeMismatchError):
        difference_map(a, state(np.zeros((3, 3)), np.ones((3, 3))))
    with pytest.raises(ValueError):
        difference_map(state(np.zeros((2, 2)), np.zeros((2, 2))), a)


# --- files ----------------------------------------------------------------------

def test_state_round_trip(tmp_path):
    s = dense_state()
    save_state(s, tmp_path / "s.orient")
    back = load_state(tmp_path / "s.orient")
    np.testing.assert_array_equal(back.mask, s.mask)
    np.testing.assert_allclose(back.orientation, s.orientation, atol=1e-6)
    np.testing.assert_array_equal(back.scalp_line, s.scalp_line)
    (tmp_path / "bad").write_bytes(b"NOPE\n")
    with pytest.raises(ValueError):
        load_state(tmp_path / "bad")


def test_ppm_round_trip(tmp_path):
    s = dense_state()
    rgb = heatmap_rgb(difference_map(s, s))
    write_ppm(tmp_path / "h.ppm", rgb)
    np.testing.assert_array_equal(read_ppm(tmp_path / "h.ppm"), rgb)
    assert (rgb[~s.mask] == 0).all() and (rgb[s.mask][:, 2] == 255).all()


def test_orientation_state_validation():
    with pytest.raises(ShapeMismatchError):
        OrientationState(np.zeros((2, 2)), np.ones((3, 3), bool), SCALP)
    with pytest.raises(ValueError):
        OrientationState(np.full((2, 2), np.nan), np.ones((2, 2), bool), SCALP)


