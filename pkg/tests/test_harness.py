import math

import numpy as np
import pytest

from fracmh import constants as K
from fracmh import harness as H
from fracmh.geometry import DomainMask, GeometryError, ShapeSpec, inradius, rasterize

DISK = ShapeSpec("disk", radius=1.0)
SQUARE = ShapeSpec("square", side=2.0)
MS = K.MSConfig("user", 1.0)


@pytest.fixture(scope="module")
def lab():
    return H.Lab()


def test_row_flags_recomputable():
    r = H.ReportRow("x", "disk", 0.75, 0.1, 1.0, 1.0, 2.0, 1.0, 1.0, False, 0.0)
    assert r.passed and r.recheck() and r.hard
    soft = H.ReportRow("x-soft", "disk", 0.75, 0.1, 1.0, 1.0, 0.5, 1.0, -0.5, True, 0.0)
    assert not soft.passed and not soft.hard
    assert H.hard_failures([r, soft]) == []
    with pytest.raises(ValueError):
        H.ReportRow("x", "disk", 0.75, 0.1, math.nan, 1.0, 2.0, 1.0, 1.0, True, 0.0)


def test_makai_hayman_disk(lab):
    rows = H.run_makai_hayman([DISK], [0.75], 1 / 16, MS, lab=lab)
    (r,) = rows
    assert r.passed and r.margin > 0
    assert r.product > 100 * r.bound  # the constant is tiny by construction
    assert r.product == pytest.approx(r.lam * r.r_omega**1.5)


def test_makai_hayman_rejects(lab):
    with pytest.raises(K.ConstantsError):
        H.run_makai_hayman([DISK], [0.5], 1 / 16, MS, lab=lab)
    occ = np.ones((16, 16), bool)
    occ[6:10, 6:10] = False
    holed = DomainMask(1 / 8, (0.0, 0.0), occ, name="holed")
    with pytest.raises(GeometryError):
        H.run_makai_hayman([holed], [0.75], lab=lab)


def test_scaled_disk_product(lab):
    base = H.run_makai_hayman([DISK], [0.75], 1 / 16, MS, lab=lab)[0]
    big = H.run_makai_hayman([ShapeSpec("disk", radius=3.0)], [0.75], 3 / 16, MS, lab=lab)[0]
    assert abs(big.product / base.product - 1) < 1e-9
    # resampled: 48 vs 32 cells per radius; the raster inradius error is O(h / r)
    ref = H.run_makai_hayman([DISK], [0.75], 1 / 32, MS, lab=lab)[0]
    fine = H.run_makai_hayman([ShapeSpec("disk", radius=3.0)], [0.75], 1 / 16, MS, lab=lab)[0]
    assert abs(fine.product / ref.product - 1) < 0.03


def test_scaling_rows(lab):
    rows = H.run_scaling(SQUARE, [0.75], 1 / 8, lab=lab)
    tags = {r.experiment: r for r in rows}
    assert tags["scaling-exact"].passed
    assert tags["scaling-resampled"].passed


def brute_alpha(m, sigma):
    """Direct scan: complement fraction of the lattice disk around every occupied cell."""
    rho = sigma * inradius(m)
    k = int(math.ceil(rho / m.h)) + 1
    off = np.arange(-k, k + 1) * m.h
    O = np.stack(np.meshgrid(off, off, indexing="ij"), -1).reshape(-1, 2)
    O = O[np.sum(O**2, axis=1) < rho**2]
    occ = {tuple(ij) for ij in np.argwhere(m.occupied)}
    worst = 1.0
    for ij in np.argwhere(m.occupied):
        steps = np.rint(O / m.h).astype(int) + ij
        inside = sum((a, b) in occ for a, b in steps)
        worst = min(worst, 1 - inside / len(O))
    return worst


def test_density_bound(lab):
    m = lab.mask(DISK, 1 / 8)
    alpha, bound = H.density_lower_bound(m, 2.0, 0.75)
    assert abs(alpha - brute_alpha(m, 2.0)) < 1e-12
    # continuum value at the centre: 1 - 1 / sigma^2 up to the raster inradius
    assert abs(alpha - 0.75) < 0.1
    assert bound == pytest.approx(alpha * math.pi * 2 ** -1.5 * inradius(m) ** -1.5)
    a_big, _ = H.density_lower_bound(m, 50.0, 0.75)
    assert a_big > 0.99
    with pytest.raises(ValueError):
        H.density_lower_bound(m, 1.0, 0.75)
    rows = H.run_density([DISK], [0.75], 1 / 8, lab=lab)
    assert rows[0].experiment == "density" and rows[0].passed


def test_density_small_sigma():
    # a 4 x 4 square: the centre's disk of radius 1.01 r stays inside, so alpha = 0
    wide = DomainMask(1 / 16, (0.0, 0.0), np.ones((64, 64), bool))
    alpha, bound = H.density_lower_bound(wide, 1.01, 0.75)
    assert alpha == 0.0 and bound == 0.0
    rows = H.run_density([wide], [0.75], lab=H.Lab(), sigma=1.01)
    assert rows[0].experiment == "density-soft" and not rows[0].hard


def test_counterexample_small(lab):
    rows = H.run_counterexample([2, 3], [0.5, 0.75], 1 / 8, MS, refine_h=(1 / 8, 1 / 16), lab=lab)
    by = {}
    for r in rows:
        by.setdefault(r.experiment, []).append(r)
    for r in by["crack-inradius"]:
        assert r.passed and abs(r.r_omega - math.sqrt(5) / 2) <= r.h * math.sqrt(2)
    assert all(r.passed for r in by["crack-lower"])
    assert "crack-ratio-trend" in by and "crack-ratio-refine" in by
    assert all(r.s == 0.75 for r in by["crack-lower"])
    with pytest.raises(ValueError):
        H.run_counterexample([1], [0.75], 1 / 8, MS)


def test_cheeger_rows(lab):
    rows = H.run_cheeger(DISK, 0.75, MS, h=1 / 16, perimeter_cells=16, lab=lab)
    tags = {r.experiment: r for r in rows}
    assert set(tags) == {"cheeger-h1", "cheeger-identity", "cheeger-hs"}
    assert all(r.passed for r in rows)
    r = tags["cheeger-h1"]
    cs = K.c_s(0.75, MS)
    assert r.bound == pytest.approx(cs * r.r_omega**-1.5, rel=1e-12)


def test_comparison_rows(lab):
    rows = H.run_comparison(DISK, 0.75, MS, h=1 / 16, lab=lab)
    assert rows[0].experiment == "compare-lower" and rows[0].passed
    assert rows[1].experiment in ("compare-upper", "compare-upper-soft")
    with pytest.raises(K.ConstantsError):
        H.run_comparison(DISK, 0.4, MS, h=1 / 16, lab=lab)


def test_run_constants():
    out = H.run_constants([0.4, 0.75], MS)
    assert len(out) == 1


@pytest.mark.parametrize("ext", ["csv", "json"])
def test_report_roundtrip(tmp_path, lab, ext):
    rows = H.run_makai_hayman([DISK], [0.6, 0.75], 1 / 16, MS, lab=lab)
    path = tmp_path / f"rows.{ext}"
    H.write_rows(rows, path)
    back = H.read_rows(path)
    assert len(back) == 2
    for a, b in zip(rows, back):
        assert (a.experiment, a.shape, a.passed) == (b.experiment, b.shape, b.passed)
        assert b.margin == a.margin and b.recheck()
    if ext == "csv":
        header = path.read_text().splitlines()[0].split(",")
        assert tuple(header) == H.ReportRow.FIELDS


def test_lab_memoizes(lab):
    m = lab.mask(DISK, 1 / 16)
    assert lab.mask(DISK, 1 / 16) is m
    a = lab.frac(m, 0.6)
    assert lab.frac(m, 0.6) == a
    assert lab.mask(m, 0.3) is m


def test_default_zoo_simply_connected():
    from fracmh.geometry import is_simply_connected
    for name, spec in H.default_zoo().items():
        assert is_simply_connected(rasterize(spec, 1 / 32)), name
