"""Kelvin-inversion extension from the unit disk, its norm bounds, and the
empirical subset-mean Poincare constant."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import DomainMask

DIM = 2


class ExtensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SampledField:
    """Cell-centred samples on the square ``center + [-radius, radius]^2``.

    The field lives on the disk ``B_radius(center)``; samples in the square
    corners only serve interpolation.
    """

    center: tuple
    radius: float
    spacing: float
    values: np.ndarray

    def __post_init__(self):
        if not self.spacing > 0 or not self.radius > 0:
            raise ExtensionError("radius and spacing must be positive")
        v = np.asarray(self.values, float)
        n = self.n_side
        if v.shape != (n, n):
            raise ExtensionError(f"expected {n}x{n} samples, got {v.shape}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def n_side(self) -> int:
        return _n_side(self.radius, self.spacing)

    def axis(self, k: int) -> np.ndarray:
        return _axis(self.radius, self.spacing) + self.center[k]

    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        return np.stack([X, Y], axis=-1)

    def in_disk(self) -> np.ndarray:
        return _disk_cells(self.radius, self.spacing)

    @classmethod
    def sample(cls, f, radius: float = 1.0, spacing: float = 0.05, center=(0.0, 0.0)) -> "SampledField":
        ax = _axis(radius, spacing)
        X, Y = np.meshgrid(ax + center[0], ax + center[1], indexing="ij")
        return cls(center, radius, spacing, np.broadcast_to(f(X, Y), X.shape).astype(float))


def _n_side(radius, spacing):
    return int(round(2 * radius / spacing))


def _axis(radius, spacing):
    n = _n_side(radius, spacing)
    return -radius + (np.arange(n) + 0.5) * (2 * radius / n)


def _disk_cells(radius, spacing):
    ax = _axis(radius, spacing)
    return ax[:, None] ** 2 + ax[None, :] ** 2 < radius**2


def kelvin(x):
    """Inversion in the unit circle, ``x / |x|^2``; acts on the last axis."""
    x = np.asarray(x, float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    if np.any(r2 == 0):
        raise ExtensionError("the inversion is undefined at the origin")
    return x / r2


def extend(u: SampledField, R: float, spacing: float | None = None) -> SampledField:
    """``u`` inside the unit disk, ``u o kelvin`` outside, sampled on ``B_R``.

    Values at inverted points come from bilinear interpolation of the
    samples of ``u``.
    """
    if not R > 1:
        raise ExtensionError("extension radius must exceed 1")
    if u.center != (0.0, 0.0) or abs(u.radius - 1) > 1e-12:
        raise ExtensionError("the field must live on the unit disk at the origin")
    hs = u.spacing if spacing is None else spacing
    interp = RegularGridInterpolator((u.axis(0), u.axis(1)), u.values, method="linear",
                                     bounds_error=False, fill_value=None)
    ax = _axis(R, hs)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    P = np.stack([X, Y], axis=-1)
    r2 = X**2 + Y**2
    out = np.empty(X.shape)
    inside = r2 < 1
    out[inside] = interp(P[inside])
    out[~inside] = interp(kelvin(P[~inside]))
    return SampledField((0.0, 0.0), R, hs, out)


# ------------------------------------------------------- discrete seminorms

@lru_cache(maxsize=16)
def _self_cell(s: float) -> float:
    """``int_{[0,1]^2} int_{[0,1]^2} |x - y|^{-2s}``."""
    from .nonlocal_form import SQRT2, _circle_integral, _polar_moment, tent
    knots = (-1, 0, 1)
    g = lambda r: _circle_integral(tent, (0.0, 0.0), r, knots) if r > 0 else 2 * math.pi
    return _polar_moment(g, (0, 2 * math.pi), (0.0, 0.0), knots, SQRT2 + 1e-9, 2 * s - 1, 1e-10, 0.0)


NEAR = 3


@lru_cache(maxsize=64)
def _near_weight(i: int, j: int, s: float) -> float:
    """``int tent(w - d) |w|^{-2s} dw / |d|^2`` for a lattice offset ``d``.

    Exact cell-pair weight for linear fields once summed over the offset's
    symmetry orbit; tends to the centroid value ``|d|^{-2-2s}`` far away.
    """
    from .nonlocal_form import SQRT2, _circle_integral, _polar_moment, tent
    c = (float(i), float(j))
    knots = (-1, 0, 1)
    g = lambda r: _circle_integral(tent, c, r, knots) if r > 0 else 0.0
    eps = 1e-7
    J = _polar_moment(g, (1, g(eps) / eps), c, knots, math.hypot(*c) + SQRT2 + 1e-9,
                      2 * s - 1, 1e-10, 0.0)
    return J / (i * i + j * j)


def _kernel(P: np.ndarray, hs: float, s: float) -> np.ndarray:
    D = np.rint((P[:, None, :] - P[None, :, :]) / hs).astype(int)
    D2 = np.sum(D * D, axis=-1).astype(float)
    np.fill_diagonal(D2, np.inf)
    K = D2 ** (-(1 + s))
    ad = np.abs(D)
    near = (ad.max(axis=-1) <= NEAR) & np.isfinite(D2)
    table = np.zeros((NEAR + 1, NEAR + 1))
    for i in range(NEAR + 1):
        for j in range(NEAR + 1):
            if i or j:
                table[i, j] = _near_weight(max(i, j), min(i, j), s)
    K[near] = table[ad[..., 0][near], ad[..., 1][near]]
    return K * hs ** (-2 - 2 * s)


@lru_cache(maxsize=16)
def _pair_kernel(radius: float, spacing: float, s: float):
    inside = _disk_cells(radius, spacing)
    ax = _axis(radius, spacing)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    P = np.column_stack([X[inside], Y[inside]])
    K = _kernel(P, 2 * radius / _n_side(radius, spacing), s)
    return inside, K, K.sum(axis=1)


def discrete_seminorm_sq(field: SampledField, s: float) -> float:
    """Cell-pair double sum for ``[u]^2`` on the field's disk.

    Off-diagonal pairs use the centre values, with exact cell-pair weights
    for offsets up to ``NEAR`` cells; each cell's self-interaction
    uses the local gradient, ``|grad u|^2 / 2 * h^{4-2s} * I_s``.
    """
    if not 0 < s < 1:
        raise ExtensionError("order s must lie in (0, 1)")
    hs = 2 * field.radius / field.n_side
    inside, K, K1 = _pair_kernel(field.radius, field.spacing, float(s))
    v = field.values[inside]
    pair = 2 * (float(v @ (K1 * v)) - float(v @ (K @ v)))
    gx, gy = np.gradient(field.values, hs)
    grad2 = (gx**2 + gy**2)[inside]
    self_term = 0.5 * float(grad2.sum()) * hs ** (4 - 2 * s) * _self_cell(float(s))
    return hs**4 * pair + self_term


def l2_norm_sq(field: SampledField, region=None) -> float:
    hs = 2 * field.radius / field.n_side
    sel = field.in_disk() if region is None else region
    return float(np.sum(field.values[sel] ** 2)) * hs * hs


@dataclass(frozen=True)
class BoundRatios:
    seminorm_ratio: float
    l2_ratio: float
    seminorm_bound: float
    l2_bound: float
    combined_bound: float

    @property
    def ok(self) -> bool:
        sem = math.isnan(self.seminorm_ratio) or self.seminorm_ratio <= self.seminorm_bound
        return sem and self.l2_ratio <= self.l2_bound


def extension_bounds(R: float, N: int = DIM) -> tuple[float, float, float]:
    """``4 R^{4N}``, ``2 R^{2N}`` and ``sqrt(1 + R^{4N} + 2 R^{2N})``."""
    return 4 * R ** (4 * N), 2 * R ** (2 * N), math.sqrt(1 + R ** (4 * N) + 2 * R ** (2 * N))


def extension_bound_ratios(u: SampledField, R: float, s: float) -> BoundRatios:
    """``[E u]_{B_R} / [u]_{B_1}`` and ``||E u||_{B_R} / ||u||_{B_1}``; the
    seminorm ratio is NaN for a constant field."""
    ext = extend(u, R)
    sb, lb, cb = extension_bounds(R)
    den = discrete_seminorm_sq(u, s)
    num = discrete_seminorm_sq(ext, s)
    scale = max(1.0, float(np.abs(u.values).max()) ** 2)
    sem = math.nan if den <= 1e-12 * scale else math.sqrt(max(num, 0.0) / den)
    l2 = math.sqrt(l2_norm_sq(ext) / l2_norm_sq(u))
    return BoundRatios(sem, l2, sb, lb, cb)


def mask_contains(mask: DomainMask, pts) -> np.ndarray:
    pts = np.asarray(pts, float)
    i = np.floor((pts[..., 0] - mask.origin[0]) / mask.h).astype(int)
    j = np.floor((pts[..., 1] - mask.origin[1]) / mask.h).astype(int)
    nx, ny = mask.shape
    ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
    out = np.zeros(pts.shape[:-1], dtype=bool)
    out[ok] = mask.occupied[i[ok], j[ok]]
    return out


def ms_poincare_empirical(u: SampledField, E, s: float) -> float:
    """``||u - mean_E u||^2_{B_R} / ((1 - s) (R^N / |E|) R^{2s} [u]^2_{B_R})``.

    ``E`` is a :class:`DomainMask` in the field's coordinates (its cells are
    resolved at the field's sample points) or a boolean array over samples.
    """
    disk = u.in_disk()
    sel = mask_contains(E, u.points()) if isinstance(E, DomainMask) else np.asarray(E, bool)
    sel = sel & disk
    hs = 2 * u.radius / u.n_side
    area_E = float(sel.sum()) * hs * hs
    if area_E <= 0:
        raise ExtensionError("E has zero measure on the sample grid")
    mean = float(u.values[sel].mean())
    num = float(np.sum((u.values[disk] - mean) ** 2)) * hs * hs
    if num <= 1e-14 * max(1.0, float(np.sum(u.values[disk] ** 2)) * hs * hs):
        return 0.0
    sem = discrete_seminorm_sq(u, s)
    if sem <= 0:
        raise ExtensionError("zero seminorm")
    R = u.radius
    return num / ((1 - s) * R**DIM / area_E * R ** (2 * s) * sem)


def random_smooth_field(rng: np.random.Generator, radius: float = 1.0, spacing: float = 0.05,
                        modes: int = 3, center=(0.0, 0.0)) -> SampledField:
    """Linear part plus a few random low-frequency plane waves."""
    a, b = rng.normal(size=2)
    ks = rng.normal(size=(modes, 2)) * 1.5 / radius
    ph = rng.uniform(0, 2 * math.pi, size=modes)
    amp = rng.normal(size=modes) / (1 + np.arange(modes))

    def f(x, y):
        out = a * (x - center[0]) / radius + b * (y - center[1]) / radius
        for k, p, c in zip(ks, ph, amp):
            out = out + c * np.cos(k[0] * x + k[1] * y + p)
        return out
    return SampledField.sample(f, radius, spacing, center)


CN_ORDERS = (0.6, 0.75, 0.9)


def estimate_cn(seed: int = 0, n_fields: int = 60, spacing: float = 0.1,
                orders=CN_ORDERS) -> float:
    """Largest observed ``||u - mean u||^2 / ((1 - s) [u]^2)`` on the square ``(-1, 1)^2``.

    A lower estimate of the fractional Poincare constant on that square;
    the battery mixes pure linear fields with random smooth ones.
    """
    rng = np.random.default_rng(seed)
    n = _n_side(1.0, spacing)
    ax = _axis(1.0, spacing)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    hs = 2.0 / n
    fields = [X, Y, X + Y]
    for _ in range(n_fields):
        fields.append(random_smooth_field(rng, 1.0, spacing).values)
    best = 0.0
    for s in orders:
        K = _kernel(P, hs, float(s))
        K1 = K.sum(axis=1)
        Is = _self_cell(float(s))
        for F in fields:
            v = F.ravel()
            pair = 2 * (float(v @ (K1 * v)) - float(v @ (K @ v)))
            gx, gy = np.gradient(F, hs)
            sem = hs**4 * pair + 0.5 * float(np.sum(gx**2 + gy**2)) * hs ** (4 - 2 * s) * Is
            var = float(np.sum((v - v.mean()) ** 2)) * hs * hs
            best = max(best, var / ((1 - s) * sem))
    return best


def inversion_inequalities(n: int, seed: int = 0) -> tuple[float, float]:
    """Smallest relative slack of ``|K z - K w| >= |z - w|`` and
    ``|x - K w| >= |x - w|`` over ``n`` random triples in the punctured unit disk."""
    rng = np.random.default_rng(seed)

    def draw(m):
        r = np.sqrt(rng.uniform(0, 1, m))
        r = np.where(r == 0, 0.5, r)
        t = rng.uniform(0, 2 * math.pi, m)
        return np.column_stack([r * np.cos(t), r * np.sin(t)])
    z, w, x = draw(n), draw(n), draw(n)
    Kz, Kw = kelvin(z), kelvin(w)
    a = np.linalg.norm(Kz - Kw, axis=1)
    b = np.linalg.norm(z - w, axis=1)
    c = np.linalg.norm(x - Kw, axis=1)
    d = np.linalg.norm(x - w, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s1 = np.where(b > 0, (a - b) / np.maximum(a, 1e-300), 0.0)
        s2 = np.where(d > 0, (c - d) / np.maximum(c, 1e-300), 0.0)
    return float(s1.min()), float(s2.min())
