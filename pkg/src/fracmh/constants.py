"""Explicit constants of the fractional Makai-Hayman chain.

Every quantity here is a closed formula or a one-dimensional integral/series,
so the whole chain is reproducible once the Maz'ya-Shaposhnikova constant
``C_N`` is fixed (it is configuration, see :class:`MSConfig`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

QUAD_RTOL = 1e-10
SERIES_TERMS = 10_000

# 2 (omega_2 + 2^2) times the squared extension factor 1 + R^{4N} + 2 R^{2N} at R = sqrt 2
MS_ASSEMBLY_FACTOR = 2 * (math.pi + 4) * (1 + 2**4 + 2 * 2**2)


class ConstantsError(ValueError):
    pass


def _check_open(s, lo, hi, what):
    if not lo < s < hi:
        raise ConstantsError(f"{what} needs {lo} < s < {hi}, got s={s}")


def _one_minus_cos(t):
    # 1 - cos t without cancellation for small t
    return 2.0 * np.sin(0.5 * t) ** 2


def _mode_integral(s: float, n: int) -> float:
    """int_0^{pi n} (1 - cos tau) tau^{-1-2s} d tau, adaptive."""
    # near 0 the integrand is tau^{1-2s} * (1 - cos tau)/tau^2; QAWS takes the power exactly
    f = lambda t: _one_minus_cos(t) / t**2 if t > 0 else 0.5
    total, _ = integrate.quad(f, 0.0, math.pi, weight="alg", wvar=(1 - 2 * s, 0.0),
                              epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    g = lambda t: _one_minus_cos(t) * t ** (-1 - 2 * s)
    for m in range(1, n):
        part, _ = integrate.quad(g, m * math.pi, (m + 1) * math.pi,
                                 epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
        total += part
    return total


@lru_cache(maxsize=4096)
def mode_weight(s: float, n: int) -> float:
    """Fourier weight of mode ``n`` in the torus seminorm:
    ``8 pi int_0^pi (1 - cos(h n)) h^{-1-2s} dh``."""
    n = abs(int(n))
    if n == 0:
        return 0.0
    return 8 * math.pi * n ** (2 * s) * _mode_integral(s, n)


def c1s(s: float) -> float:
    _check_open(s, 0.0, 1.0, "C1s")
    return mode_weight(float(s), 1)


def c2s_bracket(s: float, terms: int = SERIES_TERMS) -> tuple[float, float]:
    """Certified enclosure of ``2 pi (1 + 2 zeta(2s))``.

    The tail ``sum_{n > N} n^{-p}`` of a convex decreasing summand lies
    between ``int_{N+1}^inf + f(N+1)/2`` (trapezoid) and ``int_{N+1/2}^inf``
    (midpoint).
    """
    _check_open(s, 0.5, 1.0, "C2s")
    p = 2.0 * s
    n = np.arange(1, terms + 1, dtype=float)
    head = math.fsum(n ** (-p))
    N = float(terms)
    lo_tail = (N + 1) ** (1 - p) / (p - 1) + 0.5 * (N + 1) ** (-p)
    hi_tail = (N + 0.5) ** (1 - p) / (p - 1)
    scale = 2 * math.pi
    return scale * (1 + 2 * (head + lo_tail)), scale * (1 + 2 * (head + hi_tail))


def c2s(s: float) -> float:
    lo, hi = c2s_bracket(s)
    return 0.5 * (lo + hi)


def mu_s(s: float) -> float:
    return c1s(s) / c2s(s)


def beta_s(s: float) -> float:
    _check_open(s, 0.0, 1.0, "beta_s")
    return 4 ** (1 - s) / (s * (1 - s)) * math.pi


@dataclass(frozen=True)
class MSConfig:
    """Maz'ya-Shaposhnikova constant ``C_N`` and the assembled ``M``.

    ``mode`` is ``"user"`` when ``cn`` was supplied, ``"empirical"`` when it
    came from :func:`fracmh.extension.estimate_cn` (already multiplied by
    the safety factor).
    """

    mode: str = "user"
    cn: float | None = None
    safety: float = 10.0
    note: str = ""

    def __post_init__(self):
        if self.mode not in ("user", "empirical"):
            raise ConstantsError(f"unknown MSConfig mode {self.mode!r}")
        if self.cn is not None and not self.cn > 0:
            raise ConstantsError("C_N must be positive")

    @property
    def value(self) -> float:
        return ms_default(self)

    @classmethod
    def empirical(cls, seed: int = 0, n_fields: int = 60, safety: float = 10.0,
                  spacing: float = 0.1) -> "MSConfig":
        from .extension import estimate_cn
        est = estimate_cn(seed=seed, n_fields=n_fields, spacing=spacing)
        return cls("empirical", est * safety, safety,
                   note=f"empirical C_N lower estimate {est:.6g} x safety {safety:g} (not certified)")


@lru_cache(maxsize=8)
def default_ms() -> MSConfig:
    """Empirical configuration used when no ``C_N`` is supplied (seeded, cached)."""
    return MSConfig.empirical()


def ms_default(config: MSConfig) -> float:
    """``M = 2 (omega_2 + 4) (1 + 2^4 + 2 * 2^2) C_N = 50 (pi + 4) C_N``."""
    if config.cn is None:
        raise ConstantsError("MSConfig in user mode needs a value for C_N")
    return MS_ASSEMBLY_FACTOR * config.cn


def t_s(s: float, ms: MSConfig) -> float:
    """Boundary-disk Poincare constant."""
    _check_open(s, 0.5, 1.0, "T_s")
    M = ms_default(ms)
    return 1.0 / (20 * (1 + 2 * s) / (3 * mu_s(s)) + 8 / (3 * math.pi) * M * (1 - s))


def c_s(s: float, ms: MSConfig) -> float:
    """Fractional Makai-Hayman constant ``T_s / (36 (1 + sqrt 2)^{2s})``."""
    return t_s(s, ms) / (36 * (1 + math.sqrt(2)) ** (2 * s))


def alpha_s(s: float, lambda1_disk: float, ms: MSConfig) -> float:
    if not lambda1_disk > 0:
        raise ConstantsError("lambda_1(B_1) must be positive")
    return c_s(s, ms) / lambda1_disk ** s


def lambda1_unit_disk() -> float:
    """``j_{0,1}^2``, the first Dirichlet eigenvalue of the unit disk."""
    from scipy.special import j0
    from scipy.optimize import brentq
    return brentq(j0, 2.0, 3.0, xtol=1e-15) ** 2


@dataclass(frozen=True)
class ConstantsProfile:
    s: float
    C1s: float
    C2s: float
    mu_s: float
    T_s: float
    C_s: float
    beta_s: float
    alpha_s: float
    ms_constant: float
    quad_rtol: float = QUAD_RTOL

    CSV_COLUMNS = ("s", "C1s", "C2s", "mu_s", "T_s", "C_s", "beta_s", "alpha_s")

    def row(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def profile(s: float, ms: MSConfig, lambda1_disk: float | None = None) -> ConstantsProfile:
    lam = lambda1_unit_disk() if lambda1_disk is None else lambda1_disk
    c1, c2 = c1s(s), c2s(s)
    return ConstantsProfile(
        s=s, C1s=c1, C2s=c2, mu_s=c1 / c2, T_s=t_s(s, ms), C_s=c_s(s, ms),
        beta_s=beta_s(s), alpha_s=alpha_s(s, lam, ms), ms_constant=ms_default(ms))
