import math

import numpy as np
import pytest

from oracles import bezier_normal_equations, dbscan_oracle, same_partition
from rootcomb.geometry import distance_to_polyline, fit_bezier, resample_polyline
from rootcomb.planner import (
    NOISE, CombStroke, NoRepresentativeError, average_strands, candidate_targets,
    centroid_fallback, cluster_strands, dbscan, generate_stroke, plan_root_centric,
    random_baseline_stroke, representative_strand, strand_features,
)
from rootcomb.tracing import Strand


def straight(root, angle_deg, length=100.0, n=21):
    a = math.radians(angle_deg)
    d = np.array([math.sin(a), math.cos(a)])
    return Strand(np.asarray(root, float) + np.linspace(0, length, n)[:, None] * d)


def random_strands(rng, k, spread=60.0):
    return [straight(rng.uniform(0, spread, 2), rng.uniform(-60, 60), rng.uniform(20, 100))
            for _ in range(k)]


def test_candidate_targets_examples(rng):
    cur = straight((10, 10), 0)
    assert candidate_targets(cur, [straight((10, 10), 30)], 0.5)[0].root.tolist() == [10, 10]
    assert candidate_targets(cur, [straight((50, 50), 0)], 5) == []
    pool = random_strands(rng, 100, 120)
    got = candidate_targets(cur, pool, 30)
    want = [s for s in pool if math.dist(s.root, cur.root) <= 30]
    assert [id(s) for s in got] == [id(s) for s in want]
    with pytest.raises(ValueError):
        candidate_targets(cur, pool, 0)


def test_candidate_targets_monotone(rng):
    pool = random_strands(rng, 60, 100)
    cur = straight((50, 50), 0)
    prev = set()
    for r in (5, 10, 20, 40, 80):
        ids = {id(s) for s in candidate_targets(cur, pool, r)}
        assert prev <= ids
        prev = ids


def test_cluster_examples():
    one = cluster_strands([straight((0, 0), 0)], eps=1, min_pts=1)
    assert one.largest_cluster == [0]
    far = [straight((100 * i, 0), 0) for i in range(4)]
    res = cluster_strands(far, eps=5, min_pts=2)
    assert np.all(res.labels == NOISE) and res.largest_cluster == []
    with pytest.raises(NoRepresentativeError):
        representative_strand(far, res)


def test_cluster_two_groups_tie_goes_to_smaller_id():
    eps = 5.0
    a = [straight((0, 0.01 * i), 0) for i in range(5)]
    b = [straight((10 * eps * 10, 0.01 * i), 0) for i in range(5)]
    res = cluster_strands(a + b, eps=eps, min_pts=3)
    assert res.n_clusters == 2
    assert res.largest_cluster == [0, 1, 2, 3, 4]
    feats = strand_features(a + b)
    assert same_partition(res.labels, dbscan_oracle(feats, eps, 3))


def test_dbscan_matches_oracle_small_sample(rng):
    for _ in range(100):
        n = int(rng.integers(1, 13))
        pts = rng.uniform(0, 10, (n, 2))
        eps, mp = float(rng.uniform(0.5, 4)), int(rng.integers(1, 5))
        got = dbscan(pts, eps, mp)
        np.testing.assert_array_equal(got, dbscan_oracle(pts, eps, mp))


def test_representative_examples(rng):
    s = straight((5, 5), 10)
    res = cluster_strands([s], eps=1, min_pts=1)
    np.testing.assert_allclose(representative_strand([s], res).path, resample_polyline(s.path, 32))
    pair = [straight((0, 0), 10), straight((0, 0), -10)]
    rep = representative_strand(pair, cluster_strands(pair, eps=1000, min_pts=1))
    np.testing.assert_allclose(rep.path[:, 0], 0.0, atol=1e-9)
    assert rep.arc_length == pytest.approx(100 * math.cos(math.radians(10)), rel=1e-9)
    five = random_strands(rng, 5)
    rep = average_strands(five, 32)
    oracle = np.zeros((32, 2))
    for st in five:
        cum = np.concatenate([[0], np.cumsum(np.hypot(*np.diff(st.path, axis=0).T))])
        u = np.linspace(0, cum[-1], 32)
        oracle += np.column_stack([np.interp(u, cum, st.path[:, 0]), np.interp(u, cum, st.path[:, 1])])
    np.testing.assert_allclose(rep.path, oracle / 5, atol=1e-9)


def test_representative_of_identical_strands():
    s = straight((3, 4), 25)
    rep = average_strands([s, s, s], 32)
    np.testing.assert_allclose(rep.path, resample_polyline(s.path, 32), atol=1e-12, rtol=0)


def test_centroid_fallback_picks_middle():
    c = [straight((0, 0), -40), straight((0, 0), 0), straight((0, 0), 40)]
    assert centroid_fallback(c) is c[1]


def test_generate_stroke_examples():
    cur = straight((50, 50), 0)
    rep = straight((0, 0), 0)
    st = generate_stroke(cur, rep, comb_length=30, samples=32)
    assert st.length == pytest.approx(130.0)
    np.testing.assert_allclose(st.path[0], [50, 20])
    assert distance_to_polyline(np.array([[50.0, 50.0]]), st.path)[0] < 1e-9
    short = generate_stroke(cur, rep, comb_length=1e-6, samples=8)
    np.testing.assert_allclose(short.path[0], cur.root, atol=1e-5)
    with pytest.raises(ValueError):
        generate_stroke(cur, rep, comb_length=0)


def test_generate_stroke_curved_endpoints_and_length(rng):
    for _ in range(30):
        cur = straight(rng.uniform(0, 100, 2), 0)
        t = np.linspace(0, 1, 25)
        bend = rng.uniform(-1, 1)
        rep = Strand(np.column_stack([40 * bend * t ** 2, 90 * t]) + rng.uniform(0, 50, 2))
        cl = float(rng.uniform(5, 40))
        st = generate_stroke(cur, rep, cl, 32)
        assert np.linalg.norm(st.path[0] - cur.root) == pytest.approx(cl, abs=1e-6)
        back = (cur.root - st.path[0]) / cl
        first = (rep.path[1] - rep.path[0]) / np.linalg.norm(rep.path[1] - rep.path[0])
        assert float(back @ first) > math.cos(math.radians(5))
        np.testing.assert_allclose(st.path[-1], rep.tip - rep.root + cur.root, atol=1e-6)
        assert abs(st.length - (rep.arc_length + cl)) <= 2.0
        assert distance_to_polyline(cur.root[None], st.path)[0] <= st.comb_width / 2


def test_random_baseline_examples():
    only = straight((7, 7), 15)
    a = random_baseline_stroke([only], 3)
    b = generate_stroke(only, only)
    np.testing.assert_array_equal(a.path, b.path)
    pool = [straight((i * 10, 0), 0) for i in range(4)]
    np.testing.assert_array_equal(random_baseline_stroke(pool, 9).path,
                                  random_baseline_stroke(pool, 9).path)
    with pytest.raises(ValueError):
        random_baseline_stroke([], 0)


def test_random_baseline_uniform_chi_square():
    pool = [straight((i * 100, 0), 0) for i in range(4)]
    counts = np.zeros(4)
    rng = np.random.default_rng(0)
    for seed in rng.integers(0, 2 ** 62, 10_000):
        counts[int(random_baseline_stroke(pool, int(seed), samples=4).source_root[0] // 100)] += 1
    expected = 2500
    # each count within 3 sigma of the binomial mean
    sigma = math.sqrt(10_000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - expected) <= 3 * sigma)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < 16.27  # 99.9th percentile, 3 dof


def test_plan_root_centric():
    cur = straight((50, 50), 0)
    targets = [straight((50 + d, 50), 30) for d in (-2, 0, 2)] + [straight((52, 50), -40)]
    stroke, fb = plan_root_centric(cur, targets, radius=12, eps=25, min_pts=2)
    assert not fb
    tail = stroke.path[-1] - cur.root
    assert math.degrees(math.atan2(tail[0], tail[1])) == pytest.approx(30, abs=1)
    assert plan_root_centric(cur, [straight((200, 200), 0)], radius=12) == (None, False)
    spread = [straight((50, 50), a) for a in (-60, 0, 60)]
    stroke, fb = plan_root_centric(cur, spread, radius=12, eps=1, min_pts=2)
    assert fb and stroke is not None


def test_stroke_json_round_trip():
    st = generate_stroke(straight((1, 2), 5), straight((0, 0), 5))
    back = CombStroke.from_json(st.to_json())
    np.testing.assert_array_equal(back.path, st.path)
    assert back.comb_width == st.comb_width


def test_bezier_quarter_arc_matches_normal_equations(rng):
    t = np.linspace(0, np.pi / 2, 40)
    raw = 50 * np.column_stack([np.cos(t), np.sin(t)]) + rng.normal(0, 0.5, (40, 2))
    np.testing.assert_allclose(fit_bezier(raw, 64), bezier_normal_equations(raw, 64), atol=1e-6, rtol=0)
