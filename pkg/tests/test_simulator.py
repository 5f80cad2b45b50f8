import math

import numpy as np
import pytest

from rootcomb import _pykernels
from rootcomb.geometry import arc_length, cumulative_length, distance_to_polyline
from rootcomb.orientation import difference_map
from rootcomb.planner import CombStroke
from rootcomb.simulator import (
    StrandField, apply_stroke, builtin_scenarios, grow_strand, make_head_model, natural_field,
    render,
)
from rootcomb.tracing import Strand, trace_strand


@pytest.fixture(scope="module")
def model():
    return make_head_model()


def one_strand_field(path, stiffness=0.0):
    return StrandField((Strand(path),), np.array([stiffness]))


def test_render_single_vertical_strand(model):
    f = one_strand_field([[100.0, 60.0], [100.0, 140.0]])
    st = render(model, f, 5.0)
    cols = np.flatnonzero(st.mask.any(axis=0))
    assert cols.tolist() == [98, 99, 100, 101, 102]
    np.testing.assert_allclose(st.orientation[st.mask], 1.5 * np.pi)
    assert not st.mask[:50].any() and not st.orientation[~st.mask].any()


def test_render_mask_is_union_of_footprints(model, rng):
    field = natural_field(model, 16, jitter=0.3, rng_seed=4)
    st = render(model, field, 5.0)
    union = np.zeros(model.shape, bool)
    for s in field.strands:
        th = np.zeros(model.shape)
        m = np.zeros(model.shape, np.uint8)
        _pykernels.rasterize_strand(s.path, 2.5, th, m)
        union |= m.astype(bool)
    np.testing.assert_array_equal(st.mask, union)
    st2 = render(model, field, 5.0)
    assert st.same_as(st2)


def test_draw_order_decides_overlap(model):
    a = Strand([[80.0, 100.0], [160.0, 100.0]])
    b = Strand([[120.0, 60.0], [120.0, 140.0]])
    k = np.zeros(2)
    top_b = render(model, StrandField((a, b), k))
    top_a = render(model, StrandField((a, b), k, order=[1, 0]))
    assert top_b.orientation[100, 120] == pytest.approx(1.5 * np.pi)
    assert top_a.orientation[100, 120] == pytest.approx(0.0)
    with pytest.raises(ValueError):
        StrandField((a, b), k, order=[0, 0])


def test_strand_field_validation():
    s = Strand([[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        StrandField((), np.zeros(0))
    with pytest.raises(ValueError):
        StrandField((s,), np.zeros(2))
    with pytest.raises(ValueError):
        StrandField((s,), np.array([1.5]))


def test_render_trace_round_trip(model):
    s = grow_strand(np.array([128.0, 60.0]), lambda u: 0.6 * u, 100.0, 41)
    st = render(model, one_strand_field(s.path), 5.0)
    traced = trace_strand(st, tuple(s.path[20]))
    dev = distance_to_polyline(traced.path, s.path)
    assert dev.mean() <= 1.5


def test_apply_stroke_identity_cases(model):
    field = natural_field(model, 32, jitter=0.1, rng_seed=1)
    path = np.column_stack([np.full(20, 128.0), np.linspace(30, 150, 20)])
    stroke = CombStroke(path, 24.0, path[0])
    assert apply_stroke(field, stroke, compliance=0.0).identical_to(field)
    off = CombStroke(path + [500.0, 0.0], 24.0, path[0])
    out = apply_stroke(field, off)
    assert all(a is b for a, b in zip(out.strands, field.strands))
    out = apply_stroke(field, stroke, rng_seed=3)
    caught = distance_to_polyline(field.roots(), path) <= 12.0
    for i, (a, b) in enumerate(zip(field.strands, out.strands)):
        assert (a is not b) == caught[i]
    with pytest.raises(ValueError):
        apply_stroke(field, stroke, compliance=1.5)


def test_apply_stroke_full_compliance_collinear():
    s = Strand(np.column_stack([np.full(41, 50.0), np.linspace(20, 120, 41)]))
    field = StrandField((s,), np.zeros(1))
    a = math.radians(35)
    path = np.array([50.0, 10.0]) + np.linspace(0, 160, 50)[:, None] * [math.sin(a), math.cos(a)]
    path = path - path[6] + [50.0, 20.0]
    out = apply_stroke(field, CombStroke(path, 24.0, path[0]), compliance=1.0, noise_sigma=0.0)
    new = out.strands[0].path
    assert abs(arc_length(new) - 100.0) <= 1.0
    d = np.diff(new, axis=0)
    np.testing.assert_allclose(np.arctan2(d[:, 0], d[:, 1]), a, atol=1e-9)


def test_apply_stroke_preserves_length_and_count(model, rng):
    field = natural_field(model, 64, jitter=0.08, rng_seed=2)
    for k in range(10):
        start = np.array([rng.uniform(60, 196), rng.uniform(30, 60)])
        ang = rng.uniform(-1, 1)
        path = start + np.linspace(0, 120, 32)[:, None] * [math.sin(ang), math.cos(ang)]
        out = apply_stroke(field, CombStroke(path, 24.0, start), rng_seed=k)
        assert len(out) == len(field)
        for a, b in zip(field.strands, out.strands):
            assert abs(a.arc_length - b.arc_length) <= 1.0
            np.testing.assert_array_equal(a.root, b.root)
        moved = [i for i in range(len(out)) if out.strands[i] is not field.strands[i]]
        if moved:
            assert sorted(out.order[-len(moved):].tolist()) == moved
        field = out


def test_scenarios(model):
    scen = {s.name: s for s in builtin_scenarios(model)}
    assert list(scen) == ["natural", "5to5", "7to3"]
    init = natural_field(model, jitter=0.08, rng_seed=0)
    rep = difference_map(render(model, init).eroded(15), render(model, scen["natural"].target_field).eroded(15))
    assert rep.mean < 0.05
    field = scen["5to5"].target_field
    mid = model.scalp_point(0.5)[0]
    for s in field.strands:
        lean = s.tip[0] - s.root[0]
        assert lean < 0 if s.root[0] < mid else lean > 0
    s = cumulative_length(model.scalp_line)
    part = scen["7to3"].part
    assert np.min(np.hypot(*(model.scalp_line - part).T)) <= 2.0
    frac = np.interp(part[0], model.scalp_line[:, 0], s) / s[-1]
    assert abs(frac - 0.7) * s[-1] <= 1.0


def test_hairline_shift_moves_scalp_not_face():
    a, b = make_head_model(), make_head_model(hairline_shift=10.0)
    np.testing.assert_allclose(b.scalp_line[:, 1] - a.scalp_line[:, 1], 10.0)
    np.testing.assert_array_equal(a.landmarks.array(), b.landmarks.array())
