"""Experiment drivers producing :class:`ReportRow` records.

Every row carries the compared quantity (``product``), the bound it is
compared with and ``margin = product - bound``; ``passed`` is
``margin >= 0``.  Rows whose tag ends in ``-soft`` or ``-trend`` are
informational; all others are hard assertions.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import fft

from . import constants as K
from .geometry import (DomainMask, FeatureTooFineError, GeometryError, ShapeSpec, inradius,
                       is_simply_connected, rasterize, scale)
from .nonlocal_form import fractional_perimeter
from .spectral import lambda1_local, lambda1_s

SOFT_SUFFIXES = ("-soft", "-trend")
DEFAULT_S = (0.4, 0.5, 0.55, 0.6, 0.75, 0.9)
MH_S = (0.55, 0.75, 0.9)
SQRT5_HALF = math.sqrt(5) / 2


@dataclass
class ReportRow:
    experiment: str
    shape: str
    s: float
    h: float
    lam: float
    r_omega: float
    product: float
    bound: float
    margin: float
    passed: bool
    runtime: float

    FIELDS = ("experiment", "shape", "s", "h", "lam", "r_omega", "product", "bound",
              "margin", "passed", "runtime")

    def __post_init__(self):
        for name in ("s", "h", "lam", "r_omega", "product", "bound", "margin", "runtime"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"row field {name} is not finite: {v}")
            setattr(self, name, v)
        self.passed = bool(self.margin >= 0)

    @property
    def hard(self) -> bool:
        return not self.experiment.endswith(SOFT_SUFFIXES)

    def recheck(self) -> bool:
        return self.passed == (self.margin >= 0)


def _row(experiment, shape, s, h, lam, r, product, bound, t0, margin=None):
    m = product - bound if margin is None else margin
    return ReportRow(experiment, shape, s, h, lam, r, product, bound, m, m >= 0,
                     time.perf_counter() - t0)


def default_zoo() -> dict:
    return {
        "disk": ShapeSpec("disk", radius=1.0),
        "square": ShapeSpec("square", side=2.0),
        "rectangle": ShapeSpec("rectangle", width=2.0, height=1.0),
        "L-shape": ShapeSpec("L-shape", side=2.0),
        "spiral": ShapeSpec("spiral", pitch=0.5, width=0.25, turns=2.5),
        "cracked-2": ShapeSpec("cracked-square", k=2),
        "cracked-3": ShapeSpec("cracked-square", k=3),
        "cracked-4": ShapeSpec("cracked-square", k=4),
    }


class Lab:
    """Memoizes masks and eigenvalues so experiments can share solves."""

    def __init__(self):
        self._masks = {}
        self._frac = {}
        self._local = {}

    def mask(self, shape, h) -> DomainMask:
        if isinstance(shape, DomainMask):
            return shape
        key = (shape, float(h))
        if key not in self._masks:
            self._masks[key] = rasterize(shape, h)
        return self._masks[key]

    def frac(self, mask: DomainMask, s: float) -> float:
        key = (id(mask), float(s))
        if key not in self._frac:
            self._frac[key] = (mask, lambda1_s(mask, s).lam)
        return self._frac[key][1]

    def local(self, mask: DomainMask) -> float:
        key = id(mask)
        if key not in self._local:
            self._local[key] = (mask, lambda1_local(mask).lam)
        return self._local[key][1]


def _name(shape, mask):
    if isinstance(shape, ShapeSpec):
        return shape.tag if shape.tag != "cracked-square" else f"cracked-square-k{shape.k}"
    return mask.name or "mask"


def _check_mh_order(s):
    if not 0.5 < s < 1:
        raise K.ConstantsError(f"the Makai-Hayman constant needs 1/2 < s < 1, got {s}")


def run_makai_hayman(shapes, s_list=MH_S, h=1 / 32, ms: K.MSConfig | None = None,
                     lab: Lab | None = None) -> list:
    """``lambda_hat * r^{2s} >= C_s`` per shape and order."""
    ms = ms or K.default_ms()
    lab = lab or Lab()
    rows = []
    for shape in shapes:
        mask = lab.mask(shape, h)
        if not is_simply_connected(mask):
            raise GeometryError(f"{_name(shape, mask)} is not simply connected")
        r = inradius(mask)
        for s in s_list:
            _check_mh_order(s)
            t0 = time.perf_counter()
            lam = lab.frac(mask, s)
            rows.append(_row("makai-hayman", _name(shape, mask), s, mask.h, lam, r,
                             lam * r ** (2 * s), K.c_s(s, ms), t0))
    return rows


def density_lower_bound(mask: DomainMask, sigma: float, s: float) -> tuple[float, float]:
    """``(alpha, alpha pi sigma^{-2s} r^{-2s})`` with ``alpha`` the smallest
    complement fraction of ``B_{sigma r}(x)`` over occupied cell centres."""
    if not sigma > 1:
        raise ValueError("sigma must exceed 1")
    r = inradius(mask)
    rho = sigma * r
    h = mask.h
    m = int(math.ceil(rho / h)) + 1
    comp = ~np.pad(mask.occupied, m)
    off = np.arange(-m, m + 1) * h
    disk = (off[:, None] ** 2 + off[None, :] ** 2 < rho**2).astype(float)
    shp = [fft.next_fast_len(a + b - 1, real=True) for a, b in zip(comp.shape, disk.shape)]
    conv = fft.irfft2(fft.rfft2(comp.astype(float), s=shp) * fft.rfft2(disk, s=shp), s=shp)
    nx, ny = mask.shape
    # full-convolution index of cell (i, j) is (i + m) + m
    frac = conv[2 * m:2 * m + nx, 2 * m:2 * m + ny] / disk.sum()
    alpha = float(max(frac[mask.occupied].min(), 0.0))
    return alpha, alpha * math.pi * sigma ** (-2 * s) * r ** (-2 * s)


def run_density(shapes, s_list=MH_S, h=1 / 32, sigma=2.0, lab: Lab | None = None) -> list:
    lab = lab or Lab()
    rows = []
    for shape in shapes:
        mask = lab.mask(shape, h)
        r = inradius(mask)
        for s in s_list:
            t0 = time.perf_counter()
            alpha, bound = density_lower_bound(mask, sigma, s)
            lam = lab.frac(mask, s)
            tag = "density" if alpha > 0 else "density-soft"
            rows.append(_row(tag, _name(shape, mask), s, mask.h, lam, r, lam, bound, t0))
    return rows


def run_scaling(shape, s_list=MH_S, h=1 / 16, t=2.0, lab: Lab | None = None) -> list:
    """Exact rescaling (same cells) and resampled rescaling at fixed ``h``."""
    lab = lab or Lab()
    rows = []
    base = lab.mask(shape, h)
    big_same = scale(base, t)
    spec_big = dataclasses.replace(shape, radius=shape.radius * t, side=shape.side * t,
                                   width=shape.width * t, height=shape.height * t)
    big_resampled = lab.mask(spec_big, h)
    r = inradius(base)
    for s in s_list:
        t0 = time.perf_counter()
        lam = lab.frac(base, s)
        expect = t ** (-2 * s) * lam
        exact = lab.frac(big_same, s)
        rel = abs(exact / expect - 1)
        rows.append(_row("scaling-exact", _name(shape, base), s, h, exact, r * t,
                         exact, expect, t0, margin=1e-10 - rel))
        res = lab.frac(big_resampled, s)
        rel = abs(res / expect - 1)
        rows.append(_row("scaling-resampled", _name(shape, base), s, h, res, inradius(big_resampled),
                         res, expect, t0, margin=0.03 - rel))
    return rows


def run_counterexample(k_list=(2, 3, 4), s_list=(0.5, 0.75), h=1 / 32,
                       ms: K.MSConfig | None = None, refine_h=(1 / 8, 1 / 16, 1 / 32),
                       trend_k=2, lab: Lab | None = None) -> list:
    """Cracked squares against plain squares on both sides of ``s = 1/2``."""
    ms = ms or K.default_ms()
    lab = lab or Lab()
    for k in k_list:
        if k < 2:
            raise ValueError("k must be at least 2")
    rows = []
    cracked = {k: lab.mask(ShapeSpec("cracked-square", k=k), h) for k in k_list}
    plain = {k: lab.mask(ShapeSpec("square", side=2.0 * k), h) for k in k_list}
    q1 = lab.mask(ShapeSpec("square", side=2.0), h)
    for k in k_list:
        t0 = time.perf_counter()
        r = inradius(cracked[k])
        rows.append(_row("crack-inradius", f"cracked-square-k{k}", 0.0, h,
                         0.0, r, r, SQRT5_HALF, t0, margin=h * math.sqrt(2) - abs(r - SQRT5_HALF)))
    for s in s_list:
        lam_q1 = lab.frac(q1, s)
        prev = None
        for k in k_list:
            t0 = time.perf_counter()
            lc = lab.frac(cracked[k], s)
            lp = lab.frac(plain[k], s)
            r = inradius(cracked[k])
            rows.append(_row("square-scaling", f"square-side{2 * k}", s, h, lp, inradius(plain[k]),
                             lp * k ** (2 * s), lam_q1, t0,
                             margin=0.03 - abs(lp * k ** (2 * s) / lam_q1 - 1)))
            if s > 0.5:
                rows.append(_row("crack-lower", f"cracked-square-k{k}", s, h, lc, r, lc,
                                 K.c_s(s, ms) * (2 / math.sqrt(5)) ** (2 * s), t0))
            else:
                rows.append(_row("crack-ratio-trend", f"cracked-square-k{k}", s, h, lc, r,
                                 lc / lp, 1.0, t0))
                if prev is not None:
                    rows.append(_row("crack-decrease-in-k-trend", f"cracked-square-k{k}", s, h, lc,
                                     r, prev, lc, t0))
            prev = lc
    # refinement trend of the cracked/plain ratio at s = 1/2
    if 0.5 in s_list and refine_h:
        prev = None
        for hh in refine_h:
            t0 = time.perf_counter()
            mc = lab.mask(ShapeSpec("cracked-square", k=trend_k), hh)
            mp = lab.mask(ShapeSpec("square", side=2.0 * trend_k), hh)
            ratio = lab.frac(mc, 0.5) / lab.frac(mp, 0.5)
            if prev is not None:
                rows.append(_row("crack-ratio-refine", f"cracked-square-k{trend_k}", 0.5, hh,
                                 lab.frac(mc, 0.5), inradius(mc), prev, ratio, t0))
            prev = ratio
    return rows


def run_cheeger(shape, s, ms: K.MSConfig | None = None, h=1 / 32, perimeter_cells=32,
                lab: Lab | None = None) -> list:
    """Cheeger-type lower bounds with ``h_1 <= 2/r`` and ``h_s <= P_s(B_r)/|B_r|``."""
    _check_mh_order(s)
    ms = ms or K.default_ms()
    lab = lab or Lab()
    mask = lab.mask(shape, h)
    if not is_simply_connected(mask):
        raise GeometryError("shape is not simply connected")
    t0 = time.perf_counter()
    r = inradius(mask)
    lam = lab.frac(mask, s)
    cs = K.c_s(s, ms)
    name = _name(shape, mask)
    h1 = 2 / r
    b1 = cs * (h1 / 2) ** (2 * s)
    rows = [_row("cheeger-h1", name, s, h, lam, r, lam, b1, t0)]
    rows.append(_row("cheeger-identity", name, s, h, lam, r, b1, cs * r ** (-2 * s), t0,
                     margin=1e-12 * b1 - abs(b1 - cs * r ** (-2 * s))))
    t0 = time.perf_counter()
    unit = rasterize(ShapeSpec("disk", radius=1.0), 1.0 / perimeter_cells)
    ball = rasterize(ShapeSpec("disk", radius=r), r / perimeter_cells)
    p1 = fractional_perimeter(unit, s)
    hs = fractional_perimeter(ball, s) / (math.pi * r * r)
    bs = cs * (math.pi / p1 * hs) ** 2
    rows.append(_row("cheeger-hs", name, s, h, lam, r, lam, bs, t0))
    return rows


def run_comparison(shape, s, ms: K.MSConfig | None = None, h=1 / 32, agree=0.02,
                   lab: Lab | None = None) -> list:
    """``alpha_s lambda_1^s <= lambda_1^s(frac) <= beta_s lambda_1^s``.

    The local estimate in the lower chain is reduced by ``1 - 2h/r`` (its
    node set sits up to a cell inside the boundary).  The upper chain is a
    hard check only if both estimates move by less than ``agree`` between
    ``2h`` and ``h`` (soft when ``2h`` is too coarse for the shape).
    """
    _check_mh_order(s)
    ms = ms or K.default_ms()
    lab = lab or Lab()
    mask = lab.mask(shape, h)
    t0 = time.perf_counter()
    r = inradius(mask)
    name = _name(shape, mask)
    lf, ll = lab.frac(mask, s), lab.local(mask)
    try:
        coarse = lab.mask(shape, 2 * h)
    except FeatureTooFineError:
        coarse = None  # no refinement pair: the upper chain stays soft
    lam1_disk = K.lambda1_unit_disk()
    a = K.alpha_s(s, lam1_disk, ms)
    corr = max(1 - 2 * h / r, 0.0)
    rows = [_row("compare-lower", name, s, h, lf, r, lf, a * (ll * corr) ** s, t0)]
    settled = coarse is not None and (abs(lab.frac(coarse, s) / lf - 1) < agree
                                      and abs(lab.local(coarse) / ll - 1) < agree)
    tag = "compare-upper" if settled else "compare-upper-soft"
    rows.append(_row(tag, name, s, h, lf, r, K.beta_s(s) * ll**s, lf, t0))
    return rows


def run_constants(s_list, ms: K.MSConfig | None = None) -> list:
    ms = ms or K.default_ms()
    lam = K.lambda1_unit_disk()
    out = []
    for s in s_list:
        if 0.5 < s < 1:
            out.append(K.profile(s, ms, lam))
    return out


# --------------------------------------------------------------- reporting

def hard_failures(rows) -> list:
    return [r for r in rows if r.hard and not r.passed]


def write_rows(rows, path) -> None:
    path = str(path)
    if path.endswith(".json"):
        with open(path, "w") as fh:
            json.dump([{f: getattr(r, f) for f in ReportRow.FIELDS} for r in rows], fh, indent=1)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ReportRow.FIELDS)
        for r in rows:
            w.writerow([getattr(r, f) for f in ReportRow.FIELDS])


def read_rows(path) -> list:
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
    else:
        with open(path, newline="") as fh:
            data = list(csv.DictReader(fh))
    rows = []
    for d in data:
        rows.append(ReportRow(d["experiment"], d["shape"], *(float(d[f]) for f in ReportRow.FIELDS[2:9]),
                              str(d["passed"]) in ("True", "true", "1"), float(d["runtime"])))
    return rows
