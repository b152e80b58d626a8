"""Rasterized planar domains.

A :class:`DomainMask` is a uniform grid of square cells of side ``h``; cell
``(i, j)`` covers ``[x0 + i h, x0 + (i+1) h] x [y0 + j h, y0 + (j+1) h]``.
Zero-width cracks are kept as geometric segments rather than removed cells,
so they do not change areas but do enter distances and connectivity.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage


class GeometryError(ValueError):
    pass


class FeatureTooFineError(GeometryError):
    pass


class InvalidSpecError(GeometryError):
    pass


class EmptyDomainError(GeometryError):
    pass


SHAPE_TAGS = ("disk", "square", "rectangle", "L-shape", "spiral",
              "cracked-square", "polygon", "annulus")


@dataclass(frozen=True)
class ShapeSpec:
    """Parametric description of a test shape.

    Only the parameters relevant to ``tag`` are read:

    ========== =========================================================
    disk       ``radius``
    annulus    ``radius``, ``inner``
    square     ``side``
    rectangle  ``width``, ``height``
    L-shape    ``side`` (the removed quadrant has side ``side/2``)
    spiral     ``pitch``, ``width``, ``turns``, ``inner``
    cracked-square ``k`` (the square ``(-k, k)^2`` with slits on ``y = i``)
    polygon    ``vertices``
    ========== =========================================================
    """

    tag: str
    radius: float = 1.0
    side: float = 2.0
    width: float = 1.0
    height: float = 1.0
    inner: float = 0.0
    pitch: float = 0.5
    turns: float = 2.0
    k: int = 2
    vertices: tuple = ()

    def __post_init__(self):
        if self.tag not in SHAPE_TAGS:
            raise InvalidSpecError(f"unknown shape tag {self.tag!r}")
        pos = {
            "disk": ("radius",),
            "annulus": ("radius", "inner"),
            "square": ("side",),
            "rectangle": ("width", "height"),
            "L-shape": ("side",),
            "spiral": ("pitch", "width", "turns"),
        }.get(self.tag, ())
        for name in pos:
            if not getattr(self, name) > 0:
                raise InvalidSpecError(f"{self.tag}: {name} must be positive")
        if self.tag == "annulus" and self.inner >= self.radius:
            raise InvalidSpecError("annulus: inner radius must be below radius")
        if self.tag == "spiral" and self.width >= self.pitch:
            raise InvalidSpecError("spiral: width must be smaller than pitch")
        if self.tag == "cracked-square" and int(self.k) < 2:
            raise InvalidSpecError("cracked-square: k must be at least 2")
        if self.tag == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
                raise InvalidSpecError("polygon: need at least 3 vertices")
            if _self_intersecting(v):
                raise InvalidSpecError("polygon: vertex list self-intersects")

    def feature_size(self) -> float:
        """Smallest length scale the raster has to resolve."""
        if self.tag == "disk":
            return self.radius
        if self.tag == "annulus":
            return min(self.inner, self.radius - self.inner)
        if self.tag == "square":
            return self.side
        if self.tag == "rectangle":
            return min(self.width, self.height)
        if self.tag == "L-shape":
            return self.side / 2
        if self.tag == "spiral":
            return min(self.width, self.pitch - self.width)
        if self.tag == "cracked-square":
            return 1.0
        v = np.asarray(self.vertices, dtype=float)
        return float(np.min(np.linalg.norm(np.roll(v, -1, 0) - v, axis=1)))

    @classmethod
    def parse(cls, text: str) -> "ShapeSpec":
        """Parse ``"disk:radius=1"`` or ``"cracked-square:k=3"``."""
        tag, _, rest = text.partition(":")
        kw = {}
        for item in filter(None, rest.split(",")):
            key, _, val = item.partition("=")
            kw[key.strip()] = val.strip()
        return cls.from_mapping(tag.strip(), kw)

    @classmethod
    def from_mapping(cls, tag: str, kw: dict) -> "ShapeSpec":
        args = {}
        for key, val in kw.items():
            if key == "k":
                args[key] = int(val)
            elif key == "vertices":
                pts = [p for p in str(val).replace(";", " ").split()]
                args[key] = tuple(tuple(float(c) for c in p.split("/")) for p in pts)
            elif key in cls.__dataclass_fields__:
                args[key] = float(val)
            else:
                raise InvalidSpecError(f"unknown shape parameter {key!r}")
        return cls(tag, **args)


def load_shape_config(path) -> ShapeSpec:
    """Read a shape from an INI-style key-value file with a ``[shape]`` section.

    Polygon vertices are written ``x/y`` separated by spaces or ``;``.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(path):
        raise InvalidSpecError(f"cannot read {path}")
    sec = dict(cp["shape"])
    tag = sec.pop("tag")
    return ShapeSpec.from_mapping(tag, sec)


@dataclass(frozen=True, eq=False)
class DomainMask:
    h: float
    origin: tuple
    occupied: np.ndarray
    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    name: str = ""

    def __post_init__(self):
        if not self.h > 0:
            raise GeometryError("grid spacing must be positive")
        occ = np.asarray(self.occupied, dtype=bool)
        if occ.ndim != 2 or occ.size == 0:
            raise GeometryError("occupancy grid must be a nonempty 2-D array")
        object.__setattr__(self, "occupied", occ)
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
        object.__setattr__(self, "segments", seg)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        if len(seg):
            (x0, y0), (x1, y1) = self.bbox
            tol = 1e-9 * max(1.0, abs(x1), abs(y1), abs(x0), abs(y0))
            if (seg[..., 0].min() < x0 - tol or seg[..., 0].max() > x1 + tol
                    or seg[..., 1].min() < y0 - tol or seg[..., 1].max() > y1 + tol):
                raise GeometryError("obstacle segment leaves the bounding box")

    @property
    def shape(self):
        return self.occupied.shape

    @property
    def bbox(self):
        nx, ny = self.occupied.shape
        x0, y0 = self.origin
        return (x0, y0), (x0 + nx * self.h, y0 + ny * self.h)

    @property
    def area(self) -> float:
        return float(self.occupied.sum()) * self.h**2

    def cell_centers(self, which=None) -> np.ndarray:
        """Centers of the cells selected by the boolean array ``which``
        (all occupied cells by default), shape ``(m, 2)``."""
        if which is None:
            which = self.occupied
        i, j = np.nonzero(which)
        x0, y0 = self.origin
        return np.column_stack([x0 + (i + 0.5) * self.h, y0 + (j + 0.5) * self.h])

    def nodes(self) -> np.ndarray:
        """Boolean ``(nx+1, ny+1)`` array of admissible grid vertices.

        A vertex qualifies when the four cells around it are occupied and no
        obstacle segment passes through the open square they form, so the
        bilinear hat at that vertex vanishes on the complement and on every crack.
        """
        occ = self.occupied
        nx, ny = occ.shape
        ok = np.zeros((nx + 1, ny + 1), dtype=bool)
        ok[1:-1, 1:-1] = occ[:-1, :-1] & occ[1:, :-1] & occ[:-1, 1:] & occ[1:, 1:]
        if len(self.segments):
            ok &= ~_segments_hit_open_supports(self, ok.shape)
        return ok


def _segments_hit_open_supports(mask: DomainMask, nshape) -> np.ndarray:
    # vertex (a, b) owns the open box (x_a - h, x_a + h) x (y_b - h, y_b + h)
    hit = np.zeros(nshape, dtype=bool)
    h = mask.h
    x0, y0 = mask.origin
    for (p, q) in mask.segments:
        lo = np.minimum(p, q)
        hi = np.maximum(p, q)
        a0 = max(int(math.floor((lo[0] - x0) / h)) - 1, 0)
        a1 = min(int(math.ceil((hi[0] - x0) / h)) + 1, nshape[0] - 1)
        b0 = max(int(math.floor((lo[1] - y0) / h)) - 1, 0)
        b1 = min(int(math.ceil((hi[1] - y0) / h)) + 1, nshape[1] - 1)
        A, B = np.meshgrid(np.arange(a0, a1 + 1), np.arange(b0, b1 + 1), indexing="ij")
        cx = x0 + A * h
        cy = y0 + B * h
        hit[A, B] |= _segment_meets_open_box(p, q, cx, cy, h * (1 - 1e-9))
    return hit


def _segment_meets_open_box(p, q, cx, cy, half):
    # Liang-Barsky clip of the segment against each box, vectorized over boxes
    d = np.asarray(q, float) - np.asarray(p, float)
    t0 = np.zeros_like(cx)
    t1 = np.ones_like(cx)
    ok = np.ones(cx.shape, dtype=bool)
    for comp, c in ((0, cx), (1, cy)):
        lo = c - half - p[comp]
        hi = c + half - p[comp]
        if abs(d[comp]) < 1e-300:
            ok &= (lo < 0) & (hi > 0)
        else:
            ta = lo / d[comp]
            tb = hi / d[comp]
            t0 = np.maximum(t0, np.minimum(ta, tb))
            t1 = np.minimum(t1, np.maximum(ta, tb))
    return ok & (t0 < t1)


# ---------------------------------------------------------------- rasterize

def rasterize(spec: ShapeSpec, h: float) -> DomainMask:
    """Rasterize ``spec`` on a grid of spacing ``h`` anchored at the shape's
    lower-left bounding-box corner; a cell is occupied when its center is inside."""
    if not h > 0:
        raise InvalidSpecError("grid spacing must be positive")
    if h > spec.feature_size() / 8 * (1 + 1e-12):
        raise FeatureTooFineError(
            f"h={h} exceeds 1/8 of the feature size {spec.feature_size()} of {spec.tag}")
    segments = np.zeros((0, 2, 2))
    if spec.tag in ("disk", "annulus"):
        R = spec.radius
        lo, hi = (-R, -R), (R, R)
        inside = lambda x, y: (x**2 + y**2 < R**2) & (x**2 + y**2 > spec.inner**2)
    elif spec.tag in ("square", "rectangle"):
        w, ht = (spec.side, spec.side) if spec.tag == "square" else (spec.width, spec.height)
        lo, hi = (-w / 2, -ht / 2), (w / 2, ht / 2)
        inside = lambda x, y: (np.abs(x) < w / 2) & (np.abs(y) < ht / 2)
    elif spec.tag == "cracked-square":
        k = int(spec.k)
        lo, hi = (-k, -k), (k, k)
        inside = lambda x, y: (np.abs(x) < k) & (np.abs(y) < k)
        segs = []
        for i in range(-(k - 1), k):
            segs.append([[-k, i], [-1, i]])
            segs.append([[1, i], [k, i]])
        segments = np.array(segs, dtype=float)
    else:
        verts = _polygon_vertices(spec)
        lo = tuple(verts.min(axis=0))
        hi = tuple(verts.max(axis=0))
        inside = lambda x, y: points_in_polygon(np.column_stack([x.ravel(), y.ravel()]),
                                                verts).reshape(x.shape)
    nx = max(int(math.ceil((hi[0] - lo[0]) / h - 1e-9)), 1)
    ny = max(int(math.ceil((hi[1] - lo[1]) / h - 1e-9)), 1)
    xc = lo[0] + (np.arange(nx) + 0.5) * h
    yc = lo[1] + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    occ = inside(X, Y)
    if not occ.any():
        raise InvalidSpecError(f"{spec.tag} rasterizes to an empty mask at h={h}")
    return DomainMask(h, lo, occ, segments, name=spec.tag)


def _polygon_vertices(spec: ShapeSpec) -> np.ndarray:
    if spec.tag == "polygon":
        return np.asarray(spec.vertices, dtype=float)
    if spec.tag == "L-shape":
        a = spec.side
        return np.array([[0, 0], [a, 0], [a, a / 2], [a / 2, a / 2], [a / 2, a], [0, a]], float)
    if spec.tag == "spiral":
        return spiral_polygon(spec.pitch, spec.width, spec.turns, spec.inner)
    raise InvalidSpecError(spec.tag)


def spiral_polygon(pitch, width, turns, inner=0.0, per_turn=256) -> np.ndarray:
    """Archimedean channel ``r = inner + width/2 + pitch * theta / 2 pi``
    thickened to ``width``, returned as a closed polygon."""
    n = max(int(per_turn * turns), 16)
    th = np.linspace(0.0, 2 * np.pi * turns, n + 1)
    rc = inner + width / 2 + pitch * th / (2 * np.pi)
    out = np.column_stack([(rc + width / 2) * np.cos(th), (rc + width / 2) * np.sin(th)])
    inn = np.column_stack([(rc - width / 2) * np.cos(th), (rc - width / 2) * np.sin(th)])
    return np.vstack([out, inn[::-1]])


def points_in_polygon(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd crossing test, vectorized over points."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    xa, ya = verts[:, 0], verts[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)
    for i in range(len(verts)):
        cond = (ya[i] > y) != (yb[i] > y)
        if not cond.any():
            continue
        xi = xa[i] + (y[cond] - ya[i]) * (xb[i] - xa[i]) / (yb[i] - ya[i])
        inside[cond] ^= x[cond] < xi
    return inside


def _self_intersecting(v: np.ndarray) -> bool:
    n = len(v)
    p = v
    q = np.roll(v, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]

    def orient(a, b, c):
        return np.sign((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                       - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    o1 = orient(p[i], q[i], p[j])
    o2 = orient(p[i], q[i], q[j])
    o3 = orient(p[j], q[j], p[i])
    o4 = orient(p[j], q[j], q[i])
    return bool(np.any((o1 * o2 < 0) & (o3 * o4 < 0)))


# ---------------------------------------------------------------- measures

def _require_nonempty(mask: DomainMask):
    if not mask.occupied.any():
        raise EmptyDomainError("mask has no occupied cell")


def segment_distance(pts: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the union of segments (inf if none)."""
    out = np.full(len(pts), np.inf)
    for p, q in segments:
        d = q - p
        L2 = float(d @ d)
        t = np.zeros(len(pts)) if L2 == 0 else np.clip((pts - p) @ d / L2, 0.0, 1.0)
        proj = p + t[:, None] * d
        out = np.minimum(out, np.linalg.norm(pts - proj, axis=1))
    return out


def clearance(mask: DomainMask) -> np.ndarray:
    """Per occupied cell: distance from its center to the complement or a crack.

    The complement part is the exact distance to the nearest unoccupied cell
    center less ``h/2``; cracks enter as exact point-segment distances.
    """
    _require_nonempty(mask)
    pad = np.pad(mask.occupied, 1)
    edt = ndimage.distance_transform_edt(pad, sampling=mask.h)[1:-1, 1:-1]
    d = edt - 0.5 * mask.h
    if len(mask.segments):
        sel = mask.occupied
        d = d.copy()
        d[sel] = np.minimum(d[sel], segment_distance(mask.cell_centers(), mask.segments))
    return np.where(mask.occupied, d, 0.0)


def inradius(mask: DomainMask) -> float:
    return float(clearance(mask).max())


def is_simply_connected(mask: DomainMask) -> bool:
    """Single-component complement test on the vertex/edge/cell lattice.

    The doubled lattice resolves cells (odd, odd), edges and vertices, so a
    crack lying on grid lines becomes a chain of blocked edges joined to the
    outside exactly when it reaches the complement.
    """
    _require_nonempty(mask)
    occ = np.pad(mask.occupied, 1)
    nx, ny = occ.shape
    comp = np.ones((2 * nx + 1, 2 * ny + 1), dtype=bool)
    # interior of occupied cells and the open edges/vertices between occupied cells
    comp[1::2, 1::2] = ~occ
    comp[2:-1:2, 1::2] = ~(occ[:-1, :] & occ[1:, :])
    comp[1::2, 2:-1:2] = ~(occ[:, :-1] & occ[:, 1:])
    comp[2:-1:2, 2:-1:2] = ~(occ[:-1, :-1] & occ[1:, :-1] & occ[:-1, 1:] & occ[1:, 1:])
    if len(mask.segments):
        h = mask.h
        x0 = mask.origin[0] - h
        y0 = mask.origin[1] - h
        for p, q in mask.segments:
            n = int(math.ceil(np.linalg.norm(q - p) / (h / 4))) + 1
            t = np.linspace(0, 1, n + 1)
            pts = p[None, :] + t[:, None] * (q - p)[None, :]
            # half-cell lattice coordinates; a point on a grid line maps to an even index
            gx = np.rint(2 * (pts[:, 0] - x0) / h).astype(int)
            gy = np.rint(2 * (pts[:, 1] - y0) / h).astype(int)
            good = (gx >= 0) & (gx < comp.shape[0]) & (gy >= 0) & (gy < comp.shape[1])
            comp[gx[good], gy[good]] = True
    _, ncomp = ndimage.label(comp)
    return ncomp == 1


def scale(mask: DomainMask, t: float) -> DomainMask:
    if not t > 0:
        raise GeometryError("scale factor must be positive")
    return DomainMask(mask.h * t, (mask.origin[0] * t, mask.origin[1] * t),
                      mask.occupied.copy(), mask.segments * t, name=mask.name)


def translate_cells(mask: DomainMask, di: int, dj: int) -> DomainMask:
    """Shift the whole mask by an integer number of cells."""
    h = mask.h
    off = np.array([di * h, dj * h])
    return DomainMask(h, (mask.origin[0] + off[0], mask.origin[1] + off[1]),
                      mask.occupied.copy(), mask.segments + off, name=mask.name)


def refine(mask: DomainMask, factor: int = 2) -> DomainMask:
    """Split every cell into ``factor**2`` cells; the represented set is unchanged."""
    occ = np.repeat(np.repeat(mask.occupied, factor, axis=0), factor, axis=1)
    return DomainMask(mask.h / factor, mask.origin, occ, mask.segments.copy(), name=mask.name)


def boundary_points(mask: DomainMask) -> np.ndarray:
    """Centers of unoccupied cells 4-adjacent to the domain, plus samples of the
    cracks at spacing at most ``h``."""
    _require_nonempty(mask)
    occ = np.pad(mask.occupied, 1)
    nb = np.zeros_like(occ)
    nb[1:, :] |= occ[:-1, :]
    nb[:-1, :] |= occ[1:, :]
    nb[:, 1:] |= occ[:, :-1]
    nb[:, :-1] |= occ[:, 1:]
    ring = nb & ~occ
    i, j = np.nonzero(ring)
    h = mask.h
    x0, y0 = mask.origin
    pts = [np.column_stack([x0 + (i - 0.5) * h, y0 + (j - 0.5) * h])]
    for p, q in mask.segments:
        n = int(math.ceil(np.linalg.norm(q - p) / h))
        t = np.linspace(0.0, 1.0, n + 1)
        pts.append(p[None, :] + t[:, None] * (q - p)[None, :])
    return np.vstack(pts)


# ---------------------------------------------------------------- file format

def save_mask(mask: DomainMask, path) -> None:
    """Write the portable text bitmap.

    Header lines ``key value`` (``h``, ``origin``, ``dims`` and one
    ``segment x0 y0 x1 y1`` per crack) are followed by a ``cells`` line and
    then ``ny`` rows of ``nx`` 0/1 characters, top row = highest ``y``.
    """
    nx, ny = mask.shape
    lines = ["# fracmh mask v1", f"h {float(mask.h)!r}",
             f"origin {mask.origin[0]!r} {mask.origin[1]!r}", f"dims {nx} {ny}"]
    if mask.name:
        lines.append(f"name {mask.name}")
    for (p, q) in mask.segments:
        lines.append("segment " + " ".join(repr(float(c)) for c in (*p, *q)))
    lines.append("cells")
    for j in range(ny - 1, -1, -1):
        lines.append("".join("1" if v else "0" for v in mask.occupied[:, j]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_mask(path) -> DomainMask:
    header = {}
    segs = []
    rows = []
    in_cells = False
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if in_cells:
            rows.append([c == "1" for c in line])
            continue
        key, _, rest = line.partition(" ")
        if key == "cells":
            in_cells = True
        elif key == "segment":
            x0, y0, x1, y1 = map(float, rest.split())
            segs.append([[x0, y0], [x1, y1]])
        else:
            header[key] = rest
    nx, ny = map(int, header["dims"].split())
    occ = np.array(rows[::-1], dtype=bool).T
    if occ.shape != (nx, ny):
        raise GeometryError(f"bitmap is {occ.shape}, header says {(nx, ny)}")
    origin = tuple(map(float, header["origin"].split()))
    return DomainMask(float(header["h"]), origin, occ,
                      np.array(segs).reshape(-1, 2, 2), name=header.get("name", ""))
