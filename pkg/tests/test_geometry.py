import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from fracmh import geometry as G
from fracmh.geometry import ShapeSpec, rasterize

DISK = ShapeSpec("disk", radius=1.0)
SQUARE = ShapeSpec("square", side=2.0)


def test_disk_area():
    h = 0.05
    m = rasterize(DISK, h)
    assert abs(m.area - math.pi) < 4 * math.pi * h


def test_square_area_exact():
    for h in (0.25, 0.1, 1 / 32):
        assert_allclose(rasterize(SQUARE, h).area, 4.0, rtol=1e-12)


def test_cracked_square_segments():
    m = rasterize(ShapeSpec("cracked-square", k=2), 0.05)
    assert m.bbox == ((-2.0, -2.0), (2.0, 2.0))
    assert_allclose(m.area, 16.0, rtol=1e-12)  # cracks remove no cells
    ys = sorted({float(seg[0, 1]) for seg in m.segments})
    assert ys == [-1.0, 0.0, 1.0]
    for p, q in m.segments:
        assert p[1] == q[1]
        assert min(abs(p[0]), abs(q[0])) == 1.0 and max(abs(p[0]), abs(q[0])) == 2.0


def test_feature_too_fine_and_invalid_specs():
    with pytest.raises(G.FeatureTooFineError):
        rasterize(DISK, 0.2)
    with pytest.raises(G.InvalidSpecError):
        ShapeSpec("disk", radius=-1)
    with pytest.raises(G.InvalidSpecError):
        ShapeSpec("blob")
    with pytest.raises(G.InvalidSpecError):
        ShapeSpec("polygon", vertices=((0, 0), (1, 1), (1, 0), (0, 1)))  # bow tie
    with pytest.raises(G.InvalidSpecError):
        rasterize(SQUARE, 0.0)


@pytest.mark.parametrize("h", [1 / 16, 1 / 32])
def test_inradius_examples(h):
    tol = h * math.sqrt(2)
    assert abs(G.inradius(rasterize(DISK, h)) - 1) <= tol
    assert abs(G.inradius(rasterize(SQUARE, h)) - 1) <= tol
    for k in (2, 3, 4):
        r = G.inradius(rasterize(ShapeSpec("cracked-square", k=k), h))
        assert abs(r - math.sqrt(5) / 2) <= tol


def test_inradius_empty():
    m = G.DomainMask(0.1, (0, 0), np.zeros((4, 4), bool))
    with pytest.raises(G.EmptyDomainError):
        G.inradius(m)


def test_simple_connectivity():
    for h in (1 / 32, 1 / 48):
        assert G.is_simply_connected(rasterize(DISK, h))
        assert not G.is_simply_connected(rasterize(ShapeSpec("annulus", radius=1, inner=0.4), h))
        assert G.is_simply_connected(rasterize(ShapeSpec("cracked-square", k=2), h))
    assert G.is_simply_connected(rasterize(ShapeSpec("spiral", pitch=0.5, width=0.25, turns=2.5), 1 / 32))


def test_closed_crack_loop_disconnects():
    # a closed loop of cracks cuts off an island: the complement splits
    segs = np.array([[[-.5, -.5], [.5, -.5]], [[.5, -.5], [.5, .5]],
                     [[.5, .5], [-.5, .5]], [[-.5, .5], [-.5, -.5]]])
    base = rasterize(SQUARE, 1 / 16)
    m = G.DomainMask(base.h, base.origin, base.occupied, segs)
    assert not G.is_simply_connected(m)
    # a free-floating crack is a hole too; one reaching the boundary is not
    assert not G.is_simply_connected(G.DomainMask(base.h, base.origin, base.occupied, segs[:3]))
    reach = np.array([[[-1.0, 0.25], [0.3, 0.25]]])
    assert G.is_simply_connected(G.DomainMask(base.h, base.origin, base.occupied, reach))


def test_scale_examples():
    h = 1 / 16
    m = rasterize(DISK, h)
    m2 = G.scale(m, 2.0)
    assert abs(G.inradius(m2) - 2) <= 2 * h * math.sqrt(2)
    m1 = G.scale(m, 1.0)
    assert m1.h == m.h and m1.origin == m.origin and np.array_equal(m1.occupied, m.occupied)
    with pytest.raises(G.GeometryError):
        G.scale(m, 0.0)


@settings(max_examples=25, deadline=None)
@given(t=st.floats(0.1, 10.0), k=st.integers(2, 3))
def test_inradius_homogeneous(t, k):
    m = rasterize(ShapeSpec("cracked-square", k=k), 1 / 8)
    assert_allclose(G.inradius(G.scale(m, t)), t * G.inradius(m), rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_inradius_monotone(seed):
    rng = np.random.default_rng(seed)
    big = rasterize(SQUARE, 1 / 8)
    small_occ = big.occupied & (rng.random(big.shape) > 0.2)
    if not small_occ.any():
        return
    small = G.DomainMask(big.h, big.origin, small_occ)
    assert G.inradius(small) <= G.inradius(big) + 1e-15


def test_inradius_translation_invariant():
    m = rasterize(ShapeSpec("L-shape", side=2.0), 1 / 16)
    assert_allclose(G.inradius(G.translate_cells(m, 3, -5)), G.inradius(m), rtol=1e-14)


def test_boundary_points():
    h = 1 / 16
    sq = rasterize(SQUARE, h)
    pts = G.boundary_points(sq)
    side_dist = np.abs(np.max(np.abs(pts), axis=1) - 1)
    assert np.all(side_dist <= h)
    d = np.linalg.norm(G.boundary_points(rasterize(DISK, h)), axis=1)
    assert np.all(np.abs(d - 1) <= h * (1 + 1e-9) + h / 2)
    cr = G.boundary_points(rasterize(ShapeSpec("cracked-square", k=2), h))
    on_crack = (np.abs(cr[:, 1] - np.round(cr[:, 1])) < 1e-12) & (np.abs(cr[:, 0]) >= 1) & (np.abs(cr[:, 0]) <= 2)
    for y in (-1, 0, 1):
        assert np.any(on_crack & (cr[:, 1] == y) & (cr[:, 0] > 0))
        assert np.any(on_crack & (cr[:, 1] == y) & (cr[:, 0] < 0))


def test_nodes_exclude_cracks():
    m = rasterize(ShapeSpec("cracked-square", k=2), 1 / 8)
    nodes = m.nodes()
    x0, y0 = m.origin
    ii, jj = np.nonzero(nodes)
    x, y = x0 + ii * m.h, y0 + jj * m.h
    # a hat whose open support crosses y = 0 with |x| > 1 - h is excluded
    on = (np.abs(y) < m.h) & (np.abs(x) > 1 - m.h + 1e-12)
    assert not on.any()
    # but the gap |x| < 1 on y = 0 keeps its interior nodes
    assert np.any((y == 0) & (np.abs(x) < 1 - m.h))


def test_refine_preserves_set():
    m = rasterize(ShapeSpec("L-shape", side=2.0), 1 / 8)
    r = G.refine(m, 2)
    assert_allclose(r.area, m.area, rtol=1e-14)
    assert r.h == m.h / 2


def test_mask_roundtrip(tmp_path):
    m = rasterize(ShapeSpec("cracked-square", k=3), 1 / 8)
    G.save_mask(m, tmp_path / "m.txt")
    back = G.load_mask(tmp_path / "m.txt")
    assert back.h == m.h and back.origin == m.origin
    assert np.array_equal(back.occupied, m.occupied)
    assert_allclose(back.segments, m.segments)


def test_segment_outside_bbox_rejected():
    with pytest.raises(G.GeometryError):
        G.DomainMask(0.5, (0, 0), np.ones((2, 2), bool), [[[0, 0], [3, 0]]])


def test_shape_config(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[shape]\ntag = polygon\nvertices = 0/0 2/0 2/1 0/1\n")
    spec = G.load_shape_config(p)
    m = rasterize(spec, 1 / 8)
    assert_allclose(m.area, 2.0)
    assert ShapeSpec.parse("cracked-square:k=3").k == 3
    assert ShapeSpec.parse("rectangle:width=2,height=1").width == 2.0


def test_spiral_resolved():
    spec = ShapeSpec("spiral", pitch=0.5, width=0.25, turns=2.5)
    assert spec.feature_size() == 0.25
    m = rasterize(spec, 1 / 32)
    assert 0.08 < G.inradius(m) <= 0.125 + 1e-12
