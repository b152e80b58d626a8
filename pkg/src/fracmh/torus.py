"""Periodic functions on the one-dimensional torus and their fractional seminorm.

Functions are stored by Fourier coefficients, in which the translation
and Plancherel identities are exact; the direct double-integral routine
:func:`seminorm_quadrature` is kept independent of that representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import ConstantsError, mode_weight, mu_s

TWO_PI = 2 * math.pi


class TorusError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TorusFunction:
    """``w(theta) = sum_n coeffs[n + N] exp(2 pi i n theta / T)``, ``|n| <= N``."""

    coeffs: np.ndarray
    period: float = TWO_PI
    real: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or len(c) % 2 == 0 or len(c) < 3:
            raise TorusError("coefficients must have odd length 2N+1 with N >= 1")
        if not self.period > 0:
            raise TorusError("period must be positive")
        if self.real and not np.allclose(c, np.conj(c[::-1]), rtol=0, atol=1e-12 * (1 + abs(c).max())):
            raise TorusError("real-valued function needs w(-n) = conj(w(n))")
        object.__setattr__(self, "coeffs", c)

    @property
    def nmax(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.nmax, self.nmax + 1)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.real:
            # w = c_0 + 2 sum_{n>0} Re(c_n e^{i n x})
            N = self.nmax
            pos = self.coeffs[N + 1:]
            x = np.multiply.outer(theta, TWO_PI / self.period * np.arange(1, N + 1))
            return self.coeffs[N].real + 2 * (np.cos(x) @ pos.real - np.sin(x) @ pos.imag)
        ph = np.exp(1j * TWO_PI / self.period * np.multiply.outer(theta, self.modes))
        return ph @ self.coeffs

    def scaled(self, c: float) -> "TorusFunction":
        return TorusFunction(self.coeffs * c, self.period, self.real)

    def l2_norm_sq(self) -> float:
        """``int_0^T |w|^2`` by Plancherel."""
        return self.period * float(np.sum(np.abs(self.coeffs) ** 2))

    def sup_norm(self, samples: int = 4096) -> float:
        th = np.linspace(0, self.period, samples, endpoint=False)
        return float(np.abs(self(th)).max())

    @classmethod
    def from_trig(cls, a0: float, a, b, period: float = TWO_PI) -> "TorusFunction":
        """``a0 + sum_n a_n cos(n t) + b_n sin(n t)`` with ``t = 2 pi theta / T``."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        N = max(len(a), len(b), 1)
        a = np.pad(a, (0, N - len(a)))
        b = np.pad(b, (0, N - len(b)))
        pos = 0.5 * (a - 1j * b)
        c = np.concatenate([np.conj(pos[::-1]), [a0], pos])
        return cls(c, period, True)


def random_trig_poly(rng: np.random.Generator, degree: int, vanish_at: float | None = None,
                     period: float = TWO_PI) -> TorusFunction:
    """Random real trigonometric polynomial; optionally shifted so ``w(vanish_at) = 0``."""
    a = rng.normal(size=degree) / (1 + np.arange(degree))
    b = rng.normal(size=degree) / (1 + np.arange(degree))
    w = TorusFunction.from_trig(rng.normal(), a, b, period)
    if vanish_at is not None:
        c = w.coeffs.copy()
        c[w.nmax] -= w(vanish_at)
        w = TorusFunction(c, period, True)
    return w


def torus_norm(alpha, T: float = TWO_PI):
    """Distance to the nearest multiple of ``T``; lies in ``[0, T/2]``."""
    if not T > 0:
        raise TorusError("period must be positive")
    a = np.mod(np.asarray(alpha, dtype=float), T)
    return np.minimum(a, T - a)


def chord_ratio_extrema(grid_size: int) -> tuple[float, float]:
    """Extrema of ``|e^{i a} - 1| / |a|_{S^1}`` on a grid of ``(0, 2 pi)``."""
    if grid_size < 16:
        raise TorusError("grid_size must be at least 16")
    a = np.linspace(0, TWO_PI, grid_size + 1)[1:-1]
    a = np.concatenate([a, [math.pi]])
    r = np.abs(np.exp(1j * a) - 1) / torus_norm(a)
    return float(r.min()), float(r.max())


def _check_s(s):
    if not 0 < s < 1:
        raise TorusError(f"order s must lie in (0, 1), got {s}")


def mode_weights(nmax: int, s: float) -> np.ndarray:
    return np.array([mode_weight(float(s), int(n)) for n in range(-nmax, nmax + 1)])


def seminorm_fourier(w: TorusFunction, s: float) -> float:
    """``sum_{n != 0} W_s(n) |w_n|^2``, exact for trigonometric polynomials.

    A general period is reduced to ``2 pi``; the double integral scales by
    ``(T / 2 pi)^{1-2s}``.
    """
    _check_s(s)
    val = float(np.sum(mode_weights(w.nmax, s) * np.abs(w.coeffs) ** 2))
    return val * (w.period / TWO_PI) ** (1 - 2 * s)


def seminorm_quadrature(w: TorusFunction, s: float, panels: int = 1024) -> float:
    """Direct evaluation of ``iint |w(t) - w(p)|^2 / |t - p|^{1+2s}`` over a period.

    The integrand depends on the pair only through the shift ``d = p - t``;
    the outer variable uses the trapezoid rule (spectrally exact for
    periodic integrands), the shift is integrated panel-wise with
    Gauss-Legendre on panels that double in width away from ``d = 0``; the
    innermost piece ``(0, delta/16)`` uses the Taylor form ``|w'|^2 d^2``.
    """
    _check_s(s)
    if panels < 64:
        raise TorusError("panels must be at least 64")
    T = w.period
    t = np.linspace(0, T, panels, endpoint=False)
    wt = w(t)
    dw = TorusFunction(w.coeffs * (1j * TWO_PI / T * w.modes), T, w.real)
    gx, gw = np.polynomial.legendre.leggauss(8)

    def shifted_energy(d):
        # int_0^T |w(t + d) - w(t)|^2 dt for each shift d (trapezoid in t)
        out = np.empty(len(d))
        for k0 in range(0, len(d), 64):
            vals = w(np.add.outer(d[k0:k0 + 64], t))
            out[k0:k0 + 64] = (T / panels) * np.sum(np.abs(vals - wt[None, :]) ** 2, axis=1)
        return out

    delta = T / panels
    # uniform Gauss panels away from d = 0, doubling panels from delta/16 up to
    # the uniform width so every panel is as wide as its distance to 0
    width = (T / 2) / max(panels // 16, 32)
    uniform = np.arange(width, T / 2 + 0.5 * width, width)
    grade = delta / 16 * 2.0 ** np.arange(0, 64)
    grade = grade[grade < width]
    edges = np.unique(np.concatenate([grade, uniform]))
    a, b = edges[:-1], edges[1:]
    d = ((0.5 * (b - a))[:, None] * gx[None, :] + (0.5 * (a + b))[:, None]).ravel()
    wts = ((0.5 * (b - a))[:, None] * gw[None, :]).ravel()
    total = np.sum(wts * shifted_energy(d) * d ** (-1 - 2 * s))
    # innermost piece (0, delta/16]: E(d) ~ d^2 ||w'||^2
    d0 = edges[0]
    total += dw.l2_norm_sq() * d0 ** (2 - 2 * s) / (2 - 2 * s)
    # shifts in (-T/2, 0) mirror those in (0, T/2)
    return float(2 * total)


def poincare_margin(w: TorusFunction, s: float, theta0: float) -> float:
    """``seminorm - mu_s (2 pi / T)^{2s} ||w||^2``; nonnegative when ``w(theta0) = 0``."""
    if not 0.5 < s < 1:
        raise ConstantsError("the periodic Poincare inequality needs 1/2 < s < 1")
    val = abs(w(theta0))
    if val > 1e-10 * max(w.sup_norm(), 1e-300) and val > 0:
        raise TorusError(f"w(theta0) = {val:.3g} is not numerically zero")
    lhs = mu_s(s) * (TWO_PI / w.period) ** (2 * s) * w.l2_norm_sq()
    return seminorm_fourier(w, s) - lhs


def translate(w: TorusFunction, shift: float) -> TorusFunction:
    """``w(. + shift)``: coefficient ``n`` picks up ``exp(i n shift)`` (``2 pi`` units)."""
    ph = np.exp(1j * TWO_PI / w.period * w.modes * shift)
    return TorusFunction(w.coeffs * ph, w.period, w.real)
