import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from fracmh import constants as K
from fracmh import torus as T
from fracmh.torus import TorusFunction, seminorm_fourier, seminorm_quadrature

TWO_PI = 2 * math.pi


def cos_plus_sin2():
    return TorusFunction.from_trig(0.0, [1.0, 0.0], [0.0, 0.3])


def test_torus_norm_examples():
    assert T.torus_norm(0.0) == 0.0
    assert_allclose(T.torus_norm(1.5 * math.pi), math.pi / 2, rtol=1e-15)
    assert_allclose(T.torus_norm(TWO_PI + 0.3), 0.3, rtol=1e-12)
    with pytest.raises(T.TorusError):
        T.torus_norm(1.0, T=0.0)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(-1e3, 1e3), per=st.floats(0.5, 20.0))
def test_torus_norm_properties(a, per):
    v = T.torus_norm(a, per)
    assert -1e-12 <= v <= per / 2 + 1e-12
    assert abs(T.torus_norm(-a, per) - v) < 1e-9
    assert abs(T.torus_norm(a + per, per) - v) < 1e-9


def test_chord_identity():
    a = np.linspace(-10, 10, 100001)
    assert np.max(np.abs(np.abs(np.exp(1j * a) - 1) - 2 * np.abs(np.sin(a / 2)))) < 1e-12


def test_chord_ratio_extrema():
    lo, hi = T.chord_ratio_extrema(10**5)
    assert abs(lo - 2 / math.pi) < 1e-6
    assert abs(hi - 1) < 1e-6
    assert 2 / math.pi - 1e-12 <= lo <= hi <= 1 + 1e-12
    with pytest.raises(T.TorusError):
        T.chord_ratio_extrema(8)


def test_invalid_functions():
    with pytest.raises(T.TorusError):
        TorusFunction(np.array([1.0, 2.0]))
    with pytest.raises(T.TorusError):
        TorusFunction(np.array([1j, 0, 1j]))  # not conjugate symmetric
    TorusFunction(np.array([1j, 0, 1j]), real=False)


def test_evaluation_matches_trig_form():
    w = TorusFunction.from_trig(0.5, [1.0, -0.2], [0.0, 0.3])
    th = np.linspace(0, TWO_PI, 17)
    assert_allclose(w(th), 0.5 + np.cos(th) - 0.2 * np.cos(2 * th) + 0.3 * np.sin(2 * th), atol=1e-14)
    wc = TorusFunction(w.coeffs, real=False)
    assert_allclose(wc(th).real, w(th), atol=1e-14)


def test_mode_weight_oracle():
    # W_s(n) = 8 pi n^{2s} int_0^{n pi} (1 - cos t) t^{-1-2s} dt; the oracle
    # integrates 2 sin^2(t/2) t^{-1-2s} on [0, n pi] by Gauss-Jacobi per period
    from scipy.special import roots_jacobi, roots_legendre
    s, n = 0.75, 3
    x, w = roots_jacobi(60, 0.0, 1 - 2 * s)
    t = 0.5 * math.pi * (1 + x)
    first = (0.5 * math.pi) ** (2 - 2 * s) * np.sum(w * 2 * np.sin(t / 2) ** 2 / t**2)
    g, gw = roots_legendre(60)
    rest = 0.0
    for k in range(1, n):
        tt = math.pi * (k + 0.5 * (1 + g))
        rest += 0.5 * math.pi * np.sum(gw * 2 * np.sin(tt / 2) ** 2 * tt ** (-1 - 2 * s))
    oracle = 8 * math.pi * n ** (2 * s) * (first + rest)
    assert_allclose(K.mode_weight(s, n), oracle, rtol=1e-9)


@pytest.mark.parametrize("s", [0.3, 0.55, 0.75, 0.9])
def test_mode_weight_properties(s):
    W = T.mode_weights(12, s)
    assert W[12] == 0.0
    assert_allclose(W, W[::-1], rtol=0, atol=0)
    assert np.all(np.diff(W[12:]) > 0)
    n = np.arange(1, 13)
    assert np.all(W[13:] >= K.c1s(s) * n ** (2 * s) * (1 - 1e-10))


def test_constant_has_zero_seminorm():
    w = TorusFunction.from_trig(2.0, [0.0], [0.0])
    assert seminorm_fourier(w, 0.75) == 0.0
    assert abs(seminorm_quadrature(w, 0.75)) < 1e-20


def test_cos_fourier_vs_quadrature():
    w = TorusFunction.from_trig(0.0, [1.0], [0.0])
    assert_allclose(seminorm_quadrature(w, 0.75), seminorm_fourier(w, 0.75), rtol=1e-4)
    w2 = cos_plus_sin2()
    assert_allclose(seminorm_quadrature(w2, 0.75, panels=1024), seminorm_fourier(w2, 0.75), rtol=1e-3)


def test_quadrature_converges():
    w = cos_plus_sin2()
    exact = seminorm_fourier(w, 0.9)
    errs = [abs(seminorm_quadrature(w, 0.9, panels=p) / exact - 1) for p in (64, 256, 1024)]
    assert errs[-1] < 1e-4
    assert errs[-1] <= errs[0]


def test_quadratic_scaling():
    w = cos_plus_sin2()
    assert_allclose(seminorm_quadrature(w.scaled(2.0), 0.6), 4 * seminorm_quadrature(w, 0.6), rtol=1e-12)
    assert_allclose(seminorm_fourier(w.scaled(2.0), 0.6), 4 * seminorm_fourier(w, 0.6), rtol=1e-12)


def test_general_period():
    rng = np.random.default_rng(7)
    w = T.random_trig_poly(rng, 4, period=5.0)
    assert_allclose(seminorm_quadrature(w, 0.7), seminorm_fourier(w, 0.7), rtol=1e-3)
    assert_allclose(w.l2_norm_sq(), 5.0 / 4000 * np.sum(w(np.arange(4000) * 5.0 / 4000) ** 2), rtol=1e-10)


def test_l2_plancherel():
    rng = np.random.default_rng(3)
    w = T.random_trig_poly(rng, 6)
    th = np.arange(512) * TWO_PI / 512
    assert_allclose(w.l2_norm_sq(), TWO_PI * np.mean(w(th) ** 2), rtol=1e-12)


def test_poincare_examples():
    w = TorusFunction.from_trig(-1.0, [1.0], [0.0])  # cos - 1
    assert w(0.0) == pytest.approx(0.0, abs=1e-15)
    assert T.poincare_margin(w, 0.75, 0.0) >= 0
    z = TorusFunction(np.zeros(3))
    assert T.poincare_margin(z, 0.75, 0.0) == 0.0


def test_poincare_errors():
    w = TorusFunction.from_trig(1.0, [1.0], [0.0])
    with pytest.raises(T.TorusError):
        T.poincare_margin(w, 0.75, 0.0)
    with pytest.raises(K.ConstantsError):
        T.poincare_margin(TorusFunction.from_trig(-1.0, [1.0], [0.0]), 0.4, 0.0)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), deg=st.integers(1, 8),
       s=st.sampled_from([0.55, 0.75, 0.9]), th0=st.floats(0, TWO_PI))
def test_poincare_property(seed, deg, s, th0):
    w = T.random_trig_poly(np.random.default_rng(seed), deg, vanish_at=th0)
    m = T.poincare_margin(w, s, th0)
    assert m >= -1e-9 * max(1.0, seminorm_fourier(w, s))
    assert m > 0  # strict for w != 0


def test_poincare_general_period():
    w = T.random_trig_poly(np.random.default_rng(1), 5, vanish_at=1.0, period=3.0)
    assert T.poincare_margin(w, 0.8, 1.0) > 0


def test_translation_identities():
    w = T.random_trig_poly(np.random.default_rng(11), 6)
    assert np.array_equal(T.translate(w, 0.0).coeffs, w.coeffs)
    for h in (0.3, 2.0, -5.1):
        wt = T.translate(w, h)
        assert_allclose(seminorm_fourier(wt, 0.75), seminorm_fourier(w, 0.75), rtol=1e-12)
        assert_allclose(wt.l2_norm_sq(), w.l2_norm_sq(), rtol=1e-12)
        assert_allclose(wt(0.7), w(0.7 + h), atol=1e-12)
    assert_allclose(T.translate(T.translate(w, 0.4), 1.1).coeffs, T.translate(w, 1.5).coeffs, atol=1e-14)


def test_out_of_range_order():
    w = cos_plus_sin2()
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(T.TorusError):
            seminorm_fourier(w, bad)
        with pytest.raises(T.TorusError):
            seminorm_quadrature(w, bad)
    with pytest.raises(T.TorusError):
        seminorm_quadrature(w, 0.5, panels=32)
