"""Full-plane Gagliardo form on conforming bilinear elements.

For ``u = sum_i u_i phi_i`` (hats on a uniform lattice, extended by zero)
the double integral over the whole plane is exactly ``u^T A u`` with a
translation-invariant matrix ``A_ij = a(x_j - x_i)``::

    a(h d) = h^{2-2s} * 2 int |z|^{-2-2s} (C(d) - C(d + z)) dz

where ``C`` is the autocorrelation of the unit hat (a tensor product of
centered cubic B-splines).  The interaction with the complement of the
domain is therefore already contained in ``A``; :func:`tail_density` is
the explicit pointwise form of that exterior contribution.

Entries with ``|d|_inf <= near_radius`` are computed in polar coordinates
around ``d`` with adaptive radial quadrature (the ``r^{1-2s}`` factor taken
exactly) and piecewise Gauss-Legendre in angle; the rest by tensor Gauss
rules on the sixteen polynomial pieces of ``C``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft, integrate, sparse
from scipy.sparse import linalg as spla

from .geometry import DomainMask, EmptyDomainError, GeometryError

EIGEN = "eigen"
PERIMETER = "perimeter"

_GL12 = np.polynomial.legendre.leggauss(12)
SQRT2 = math.sqrt(2.0)


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Kernel ``|z|^{-p}`` with ``p = 2 + 2s`` (eigenvalue form) or ``2 + s`` (perimeter)."""

    s: float
    kind: str = EIGEN
    near_radius: int = 4
    rtol: float = 1e-8

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError(f"order s must lie in (0, 1), got {self.s}")
        if self.kind not in (EIGEN, PERIMETER):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.near_radius < 2:
            raise ValueError("near-field radius must be at least 2 cells")

    @property
    def p(self) -> float:
        return 2 + 2 * self.s if self.kind == EIGEN else 2 + self.s


# ------------------------------------------------------------------ splines

def bspline3(t):
    """Centered cubic B-spline: the autocorrelation of the unit hat."""
    t = np.abs(t)
    return np.where(t <= 1, 2 / 3 - t**2 + 0.5 * t**3, np.where(t <= 2, (2 - t) ** 3 / 6, 0.0))


def _bspline3_dd(t):
    t = np.abs(t)
    return np.where(t <= 1, -2 + 3 * t, np.where(t <= 2, 2 - t, 0.0))


def hat_corr(x, y):
    return bspline3(x) * bspline3(y)


def tent(x, y):
    """Autocorrelation of the unit cell indicator."""
    return np.maximum(1 - np.abs(x), 0) * np.maximum(1 - np.abs(y), 0)


# ------------------------------------------------------------ polar helpers

def _circle_integral(F, c, r, knots):
    """``int_0^{2 pi} F(c + r w(theta)) d theta`` with ``F`` piecewise polynomial
    on the lattice lines ``x, y in knots``; split where the circle crosses them."""
    br = [0.0, 2 * math.pi]
    for k in knots:
        v = (k - c[0]) / r
        if abs(v) <= 1:
            a = math.acos(v)
            br += [a, 2 * math.pi - a]
        v = (k - c[1]) / r
        if abs(v) <= 1:
            a = math.asin(v)
            br += [a % (2 * math.pi), (math.pi - a) % (2 * math.pi)]
    br = np.unique(br)
    a, b = br[:-1], br[1:]
    gx, gw = _GL12
    th = (0.5 * (b - a))[:, None] * gx + (0.5 * (a + b))[:, None]
    w = (0.5 * (b - a))[:, None] * gw
    return float(np.sum(w * F(c[0] + r * np.cos(th), c[1] + r * np.sin(th))))


def _radial_breaks(c, knots, rmax):
    rs = set()
    for k in knots:
        rs.add(abs(c[0] - k))
        rs.add(abs(c[1] - k))
        for l in knots:
            rs.add(math.hypot(c[0] - k, c[1] - l))
    out = sorted(x for x in rs if 1e-12 < x < rmax - 1e-12)
    return out + [rmax]


def _quad(f, a, b, rtol, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=400, **kw)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"radial quadrature on [{a}, {b}] did not reach rtol={rtol}: {exc}")
    return val


def _polar_moment(g, lead, c, knots, support, q, rtol, far_value):
    """``int_0^inf r^{-q} g(r) dr`` where ``g(r) ~ lead * r^m`` at 0.

    ``lead`` is ``(m, limit of g(r)/r^m)``; the first radial piece uses the
    algebraic weight ``r^{m-q}``.  Beyond ``support`` ``g`` equals
    ``far_value`` and the remainder is integrated in closed form.
    """
    m, g0 = lead
    rb = _radial_breaks(c, knots, support)
    total = _quad(lambda r: g(r) / r**m if r > 0 else g0, 0.0, rb[0], rtol,
                  weight="alg", wvar=(m - q, 0.0))
    for a, b in zip(rb[:-1], rb[1:]):
        total += _quad(lambda r: r ** (-q) * g(r), a, b, rtol)
    if far_value:
        total += far_value * support ** (1 - q) / (q - 1)
    return total


def _stiffness_entry(d, s, rtol):
    """Dimensionless ``2 int |z|^{-2-2s} (C(d) - C(d+z)) dz``."""
    c = (float(d[0]), float(d[1]))
    knots = range(-2, 3)
    Cd = float(hat_corr(*c))
    g = lambda r: 2 * (2 * math.pi * Cd - _circle_integral(hat_corr, c, r, knots)) if r > 0 else 0.0
    lap = float(_bspline3_dd(c[0]) * bspline3(c[1]) + bspline3(c[0]) * _bspline3_dd(c[1]))
    support = math.hypot(*c) + 2 * SQRT2 + 1e-9
    # C is C^2, so g(r) = -pi lap(C)(d) r^2 + o(r^2)
    return _polar_moment(g, (2, -math.pi * lap), c, knots, support, 1 + 2 * s, rtol, 4 * math.pi * Cd)


_GAUSS_FAR = {n: np.polynomial.legendre.leggauss(n) for n in (3, 6)}


def _cell_rule(n, lo, hi):
    gx, gw = _GAUSS_FAR[n]
    pts, wts = [], []
    for a in range(lo, hi):
        for b in range(lo, hi):
            X, Y = np.meshgrid(a + 0.5 + 0.5 * gx, b + 0.5 + 0.5 * gx, indexing="ij")
            W = np.outer(gw, gw) * 0.25
            pts.append(np.column_stack([X.ravel(), Y.ravel()]))
            wts.append(W.ravel())
    return np.vstack(pts), np.concatenate(wts)


def _far_convolution(d1, d2, p, F, lo, hi, switch=12):
    """``int |d - w|^{-p} F(w) dw`` for lattice offsets outside ``F``'s support."""
    out = np.zeros(np.shape(d1))
    big = np.maximum(np.abs(d1), np.abs(d2)) > switch
    for n, sel in ((6, ~big), (3, big)):
        if not sel.any():
            continue
        pts, wts = _cell_rule(n, lo, hi)
        fw = F(pts[:, 0], pts[:, 1]) * wts
        x = d1[sel].astype(float)
        y = d2[sel].astype(float)
        acc = np.zeros(x.shape)
        for (px, py), c in zip(pts, fw):
            if c != 0.0:
                acc += c * ((x - px) ** 2 + (y - py) ** 2) ** (-p / 2)
        out[sel] = acc
    return out


@lru_cache(maxsize=64)
def _near_table(s: float, near_radius: int, rtol: float) -> np.ndarray:
    R = near_radius
    t = np.zeros((R + 1, R + 1))
    for i in range(R + 1):
        for j in range(i + 1):
            t[i, j] = t[j, i] = _stiffness_entry((i, j), s, rtol)
    return t


@dataclass(frozen=True, eq=False)
class StencilTable:
    """Interaction weights ``a(h d)`` for ``|d|_inf <= extent`` (first quadrant, ``d >= 0``)."""

    spec: KernelSpec
    h: float
    values: np.ndarray

    @property
    def extent(self) -> tuple:
        return self.values.shape[0] - 1, self.values.shape[1] - 1

    def __call__(self, di, dj):
        return self.values[np.abs(di), np.abs(dj)]

    def full(self) -> np.ndarray:
        """The table on ``[-Ex, Ex] x [-Ey, Ey]``, index ``(Ex + di, Ey + dj)``."""
        v = self.values
        top = np.concatenate([v[::-1, :][:-1], v], axis=0)
        return np.concatenate([top[:, ::-1][:, :-1], top], axis=1)


def nearfield_stencil(spec: KernelSpec, h: float, extent=None) -> StencilTable:
    """Weights of the eigenvalue kernel on offsets up to ``extent`` (default: near radius).

    Offsets within ``spec.near_radius`` come from the adaptive polar rule;
    farther offsets from the tensor Gauss rule on the support of ``C``.
    """
    if spec.kind != EIGEN:
        raise ValueError("stiffness stencil is defined for the eigenvalue kernel")
    if not h > 0:
        raise ValueError("h must be positive")
    R = spec.near_radius
    ex, ey = (R, R) if extent is None else (max(int(extent[0]), R), max(int(extent[1]), R))
    vals = np.zeros((ex + 1, ey + 1))
    D1, D2 = np.meshgrid(np.arange(ex + 1), np.arange(ey + 1), indexing="ij")
    far = np.maximum(D1, D2) > R
    vals[far] = -2 * _far_convolution(D1[far], D2[far], spec.p, hat_corr, -2, 2)
    vals[: R + 1, : R + 1] = _near_table(float(spec.s), R, float(spec.rtol))
    return StencilTable(spec, h, vals * h ** (2 - 2 * spec.s))


MASS_WEIGHTS = {(0, 0): 4 / 9, (1, 0): 1 / 9, (0, 1): 1 / 9, (1, 1): 1 / 36}


# ------------------------------------------------------------- tail density

def _box_exterior(x, x0, y0, x1, y1, s):
    """``int_{R^2 minus box} |x - y|^{-2-2s} dy`` for ``x`` inside the box."""
    px, py = x
    corners = [(x1, y1), (x0, y1), (x0, y0), (x1, y0)]
    angs = sorted(math.atan2(cy - py, cx - px) % (2 * math.pi) for cx, cy in corners)
    br = np.array([0.0] + angs + [2 * math.pi])
    gx, gw = np.polynomial.legendre.leggauss(40)
    total = 0.0
    for a, b in zip(br[:-1], br[1:]):
        if b - a < 1e-15:
            continue
        th = 0.5 * (b - a) * gx + 0.5 * (a + b)
        c, sn = np.cos(th), np.sin(th)
        with np.errstate(divide="ignore"):
            tx = np.where(c > 0, (x1 - px) / c, np.where(c < 0, (x0 - px) / c, np.inf))
            ty = np.where(sn > 0, (y1 - py) / sn, np.where(sn < 0, (y0 - py) / sn, np.inf))
        dist = np.minimum(tx, ty)
        total += 0.5 * (b - a) * np.sum(gw * dist ** (-2 * s)) / (2 * s)
    return total


def tail_density(mask: DomainMask, spec: KernelSpec, x) -> float:
    """``rho(x) = int_{R^2 minus Omega} |x - y|^{-p} dy`` for ``x`` in the domain.

    Empty cells of the bounding box use a 4x4 Gauss rule per cell (refined
    to 8x8 on cells within two cells of ``x``); the exterior of the box is an
    angular integral of the ray distance.  Cracks have measure zero and do
    not contribute.
    """
    if spec.kind != EIGEN:
        raise ValueError("tail density is defined for the eigenvalue kernel")
    x = np.asarray(x, float)
    h = mask.h
    (bx0, by0), (bx1, by1) = mask.bbox
    i = int(math.floor((x[0] - bx0) / h))
    j = int(math.floor((x[1] - by0) / h))
    nx, ny = mask.shape
    if not (0 <= i < nx and 0 <= j < ny and mask.occupied[i, j]):
        raise GeometryError(f"point {tuple(x)} is not inside the occupied region")
    s = spec.s
    total = _box_exterior(x, bx0, by0, bx1, by1, s)
    I, J = np.nonzero(~mask.occupied)
    if len(I):
        near = (np.abs(I - i) <= 2) & (np.abs(J - j) <= 2)
        for n, sel in ((4, ~near), (8, near)):
            if not sel.any():
                continue
            gx, gw = np.polynomial.legendre.leggauss(n)
            u = 0.5 * (gx + 1)
            W = np.outer(gw, gw).ravel() * 0.25 * h * h
            ox = (np.add.outer(I[sel], u) * h + bx0)[:, :, None]
            oy = (np.add.outer(J[sel], u) * h + by0)[:, None, :]
            r2 = (ox - x[0]) ** 2 + (oy - x[1]) ** 2
            total += float(np.sum(r2.reshape(len(ox), -1) ** (-spec.p / 2) * W))
    return total


# ----------------------------------------------------------------- assembly

DENSE_LIMIT = 5000


@dataclass(eq=False)
class NonlocalSystem:
    """Stiffness ``A`` and mass ``B`` of one ``(mask, s, h)``.

    ``A`` is dense (``ndarray``) up to :data:`DENSE_LIMIT` nodes and an FFT
    ``LinearOperator`` above; ``precond`` is a sparse SPD approximation of
    ``A`` (near field plus a diagonal for the rest) used by iterative solvers.
    """

    mask: DomainMask
    s: float
    h: float
    node_ij: np.ndarray
    A: object
    B: sparse.csr_matrix
    stencil: StencilTable
    precond: sparse.csc_matrix | None = None
    _tail: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.node_ij)

    @property
    def dense(self) -> bool:
        return isinstance(self.A, np.ndarray)

    def node_points(self) -> np.ndarray:
        x0, y0 = self.mask.origin
        return np.column_stack([x0 + self.node_ij[:, 0] * self.h, y0 + self.node_ij[:, 1] * self.h])

    def matvec(self, v):
        return self.A @ v

    def tail_at_nodes(self) -> np.ndarray:
        """Tail density at every node (computed on first use)."""
        if self._tail is None:
            spec = KernelSpec(self.s)
            self._tail = np.array([tail_density(self.mask, spec, x) for x in self.node_points()])
        return self._tail

    def grid(self, v, fill=np.nan) -> np.ndarray:
        """Node vector placed on the ``(nx+1, ny+1)`` vertex grid."""
        nx, ny = self.mask.shape
        out = np.full((nx + 1, ny + 1), fill, dtype=float)
        out[self.node_ij[:, 0], self.node_ij[:, 1]] = v
        return out


class _ToeplitzOperator(spla.LinearOperator):
    def __init__(self, node_ij, table_full, ext):
        n = len(node_ij)
        super().__init__(dtype=float, shape=(n, n))
        self.ij = node_ij - node_ij.min(axis=0)
        mx, my = self.ij.max(axis=0) + 1
        ex, ey = ext
        self.shape_fft = (fft.next_fast_len(mx + ex + 1, real=True), fft.next_fast_len(my + ey + 1, real=True))
        ker = np.zeros(self.shape_fft)
        # circular layout: offset d at index d mod size
        ix = np.arange(-ex, ex + 1) % self.shape_fft[0]
        iy = np.arange(-ey, ey + 1) % self.shape_fft[1]
        ker[np.ix_(ix, iy)] = table_full
        self.kf = fft.rfft2(ker)
        self.m = (mx, my)

    def _matvec(self, v):
        v = np.asarray(v).ravel()
        g = np.zeros(self.shape_fft)
        g[self.ij[:, 0], self.ij[:, 1]] = v
        out = fft.irfft2(fft.rfft2(g) * self.kf, s=self.shape_fft)
        return out[self.ij[:, 0], self.ij[:, 1]]

    def _adjoint(self):
        return self


def _offset_pairs(ij, di, dj):
    """Index pairs ``(k, m)`` of nodes with ``ij[m] - ij[k] == (di, dj)``."""
    base = ij.min(axis=0)
    loc = ij - base
    shp = loc.max(axis=0) + 1
    grid = np.full(shp, -1, dtype=np.int64)
    grid[loc[:, 0], loc[:, 1]] = np.arange(len(ij))
    tx = loc[:, 0] + di
    ty = loc[:, 1] + dj
    inside = (tx >= 0) & (tx < shp[0]) & (ty >= 0) & (ty < shp[1])
    k = np.nonzero(inside)[0]
    m = grid[tx[inside], ty[inside]]
    keep = m >= 0
    return k[keep], m[keep]


def _banded(ij, weight, radius):
    rows, cols, vals = [], [], []
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            k, m = _offset_pairs(ij, di, dj)
            rows.append(k)
            cols.append(m)
            vals.append(np.full(len(k), weight(abs(di), abs(dj))))
    n = len(ij)
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))


def _mass_matrix(ij, h):
    return _banded(ij, lambda a, b: MASS_WEIGHTS[(a, b)] * h * h, 1)


def _near_sparse(ij, table: StencilTable, radius):
    return _banded(ij, lambda a, b: table.values[a, b], radius)


def _far_abs_sum(stencil: StencilTable, radius):
    full = stencil.full()
    ex, ey = stencil.extent
    D1, D2 = np.meshgrid(np.arange(-ex, ex + 1), np.arange(-ey, ey + 1), indexing="ij")
    far = np.maximum(np.abs(D1), np.abs(D2)) > radius
    return float(np.abs(full[far]).sum())


def assemble(mask: DomainMask, s: float, h: float | None = None, dense: bool | None = None,
             spec: KernelSpec | None = None) -> NonlocalSystem:
    """Assemble the discrete form on the admissible nodes of ``mask``.

    ``h`` must equal the mask spacing (it is accepted for symmetry with the
    eigenvalue routines). ``dense`` forces or forbids the dense path.
    """
    if h is not None and not math.isclose(h, mask.h, rel_tol=1e-12):
        raise GeometryError(f"h={h} differs from the mask spacing {mask.h}")
    h = mask.h
    spec = spec or KernelSpec(s)
    ok = mask.nodes()
    ij = np.column_stack(np.nonzero(ok))
    if len(ij) == 0:
        raise EmptyDomainError("no admissible node: the domain is too thin for this h")
    ext = tuple(int(e) for e in ij.max(axis=0) - ij.min(axis=0))
    st = nearfield_stencil(spec, h, extent=ext)
    if dense is None:
        dense = len(ij) <= DENSE_LIMIT
    B = _mass_matrix(ij, h)
    if dense:
        A = np.empty((len(ij), len(ij)))
        for k0 in range(0, len(ij), 512):
            blk = ij[k0:k0 + 512]
            A[k0:k0 + 512] = st.values[np.abs(blk[:, None, 0] - ij[None, :, 0]),
                                       np.abs(blk[:, None, 1] - ij[None, :, 1])]
        return NonlocalSystem(mask, s, h, ij, A, B, st)
    ex, ey = st.extent
    op = _ToeplitzOperator(ij, st.full(), (ex, ey))
    P = _near_sparse(ij, st, 2) + _far_abs_sum(st, 2) * sparse.identity(len(ij), format="csc")
    return NonlocalSystem(mask, s, h, ij, op, B, st, precond=P.tocsc())


def seminorm_estimate(values, system: NonlocalSystem) -> float:
    v = np.asarray(values, dtype=float)
    if v.shape != (system.n,):
        raise ValueError(f"expected a vector of length {system.n}, got shape {v.shape}")
    return float(v @ (system.A @ v))


def sample_on_nodes(system: NonlocalSystem, f) -> np.ndarray:
    """Evaluate ``f(x, y)`` at the admissible nodes."""
    p = system.node_points()
    return np.asarray(f(p[:, 0], p[:, 1]), dtype=float)


def dump_system(system: NonlocalSystem, path) -> None:
    """Upper-triangle coordinate triplets of ``A`` and ``B``.

    Format: ``# fracmh system v1``, a line ``n h s``, then ``A i j value``
    and ``B i j value`` lines (0-based, ``i <= j``).  Entries of ``A``
    below ``1e-300`` in magnitude are skipped.  Dense systems only.
    """
    if not system.dense:
        raise ValueError("only dense systems can be dumped")
    A = system.A
    with open(path, "w") as fh:
        fh.write("# fracmh system v1\n")
        fh.write(f"{system.n} {float(system.h)!r} {float(system.s)!r}\n")
        I, J = np.triu_indices(system.n)
        vals = A[I, J]
        for i, j, v in zip(I, J, vals):
            if abs(v) > 1e-300:
                fh.write(f"A {i} {j} {float(v)!r}\n")
        Bt = sparse.triu(system.B).tocoo()
        for i, j, v in zip(Bt.row, Bt.col, Bt.data):
            fh.write(f"B {i} {j} {float(v)!r}\n")


def load_system_triplets(path):
    """Read a :func:`dump_system` file back as symmetric dense ``A`` and sparse ``B``."""
    with open(path) as fh:
        head = fh.readline()
        if not head.startswith("# fracmh system"):
            raise ValueError("not a fracmh system file")
        n, h, s = fh.readline().split()
        n = int(n)
        A = np.zeros((n, n))
        bi, bj, bv = [], [], []
        for line in fh:
            tag, i, j, v = line.split()
            i, j, v = int(i), int(j), float(v)
            if tag == "A":
                A[i, j] = A[j, i] = v
            else:
                bi += [i, j] if i != j else [i]
                bj += [j, i] if i != j else [j]
                bv += [v, v] if i != j else [v]
    return A, sparse.csr_matrix((bv, (bi, bj)), shape=(n, n)), float(h), float(s)


# --------------------------------------------------------- fractional perimeter

@lru_cache(maxsize=64)
def _perimeter_self(s: float, rtol: float) -> float:
    """``int |w|^{-2-s} (1 - tent(w)) dw`` (dimensionless)."""
    knots = (-1, 0, 1)
    c = (0.0, 0.0)
    g = lambda r: 2 * math.pi - _circle_integral(tent, c, r, knots) if r > 0 else 0.0
    # 1 - tent ~ |w1| + |w2| at 0, whose circle integral is 8 r
    return _polar_moment(g, (1, 8.0), c, knots, SQRT2 + 1e-9, 1 + s, rtol, 2 * math.pi)


@lru_cache(maxsize=4096)
def _perimeter_pair(i: int, j: int, s: float, rtol: float) -> float:
    """``int |w|^{-2-s} tent(w - d) dw`` for a lattice offset ``d != 0``."""
    c = (float(i), float(j))
    knots = (-1, 0, 1)
    g = lambda r: _circle_integral(tent, c, r, knots) if r > 0 else 0.0
    eps = 1e-7
    g0 = g(eps) / eps
    return _polar_moment(g, (1, g0), c, knots, math.hypot(*c) + SQRT2 + 1e-9, 1 + s, rtol, 0.0)


def _perimeter_table(ex, ey, s, near=4, rtol=1e-8):
    D1, D2 = np.meshgrid(np.arange(ex + 1), np.arange(ey + 1), indexing="ij")
    vals = _far_convolution(D1, D2, 2 + s, tent, -1, 1)
    for i in range(min(near, ex) + 1):
        for j in range(min(near, ey) + 1):
            if i or j:
                a, b = max(i, j), min(i, j)
                vals[i, j] = _perimeter_pair(a, b, float(s), rtol)
    vals[0, 0] = 0.0
    return vals


def fractional_perimeter(E: DomainMask, s: float, rtol: float = 1e-8) -> float:
    """``iint |1_E(x) - 1_E(y)| |x - y|^{-2-s}`` over the plane for the union of occupied cells.

    Writing ``2 int K(z) (|E| - |E cap (E - z)|) dz`` and expanding the
    covariogram of a union of lattice cells in tents gives an exact finite
    sum over occupied-cell pair offsets (counted by FFT autocorrelation).
    Cracks have measure zero and are ignored.
    """
    if not 0 < s < 1:
        raise ValueError(f"order s must lie in (0, 1), got {s}")
    occ = E.occupied
    if not np.isfinite(E.h) or not np.all(np.isfinite(E.origin)):
        raise GeometryError("unbounded set")
    if not occ.any():
        return 0.0
    ii, jj = np.nonzero(occ)
    sub = occ[ii.min():ii.max() + 1, jj.min():jj.max() + 1].astype(float)
    mx, my = sub.shape
    shp = (fft.next_fast_len(2 * mx - 1, real=True), fft.next_fast_len(2 * my - 1, real=True))
    F = fft.rfft2(sub, s=shp)
    corr = np.rint(fft.irfft2(F * np.conj(F), s=shp))
    ix = np.arange(-(mx - 1), mx) % shp[0]
    iy = np.arange(-(my - 1), my) % shp[1]
    counts = corr[np.ix_(ix, iy)]
    tab = _perimeter_table(mx - 1, my - 1, s, rtol=rtol)
    ax = np.abs(np.arange(-(mx - 1), mx))
    ay = np.abs(np.arange(-(my - 1), my))
    pair = tab[np.ix_(ax, ay)]
    n0 = counts[mx - 1, my - 1]
    val = n0 * _perimeter_self(float(s), rtol) - float(np.sum(counts * pair))
    return 2 * E.h ** (2 - s) * val
