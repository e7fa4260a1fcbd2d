import math

import numpy as np
import pytest
from numpy.polynomial import legendre as npleg
from scipy.special import ndtr, spherical_in

from langevin_transport import oracle as orc
from langevin_transport.bounds import EuclideanParams, lip_const_euclidean, theta_euclidean
from langevin_transport.measures import AbsValue, Linear, SmoothedAbs, Zero

XS = np.linspace(-5, 5, 11)


def _ou(kappa, t):
    return math.exp(-kappa * t), math.sqrt(-math.expm1(-2 * kappa * t) / kappa)


def test_quad_pt_examples():
    assert np.allclose(orc.quad_Pt(Zero(), 1.0, XS, 0.7), 1.0, atol=1e-14)
    for kappa, L, t in ((1.0, 1.0, 0.5), (2.0, -0.7, 1.3), (0.5, 2.0, 0.05)):
        a, s = _ou(kappa, t)
        expect = np.exp(-L * a * XS + 0.5 * L * L * s * s)
        assert np.allclose(orc.quad_Pt(Linear(L), kappa, XS, t), expect, rtol=1e-12)
    w = SmoothedAbs(1.0)
    assert np.allclose(orc.quad_Pt(w, 1.0, XS, 0.0), np.exp(-w.W(XS[:, None])), rtol=1e-15)


def test_abs_value_closed_form():
    L, kappa, t = 1.3, 1.0, 0.4
    a, s = _ou(kappa, t)
    m = a * XS
    expect = np.exp(0.5 * L * L * s * s) * (np.exp(-L * m) * ndtr(m / s - L * s) + np.exp(L * m) * ndtr(-m / s - L * s))
    assert np.allclose(orc.quad_Pt(AbsValue(L), kappa, XS, t), expect, rtol=1e-12)


def test_direct_and_score_forms_agree():
    for w in (SmoothedAbs(1.0), AbsValue(0.8), SmoothedAbs(1.0, 1e-3, 1, -1.0)):
        for t in (0.01, 0.3, 2.0):
            a = orc.OUQuadrature(w, 1.0, "direct").moments(XS, t)
            b = orc.OUQuadrature(w, 1.0, "score").moments(XS, t)
            for u, v in zip(a, b):
                assert np.allclose(u, v, rtol=1e-9, atol=1e-12)


def test_adaptive_fallback_agrees():
    w = SmoothedAbs(1.0)
    for x, t in ((0.0, 0.05), (1.0, 0.5), (-3.0, 2.0)):
        assert orc.adaptive_Pt(w, 1.0, x, t) == pytest.approx(orc.quad_Pt(w, 1.0, x, t)[0], rel=1e-11)


def test_hessian_examples():
    assert np.allclose(orc.quad_hess_log_Pt(Zero(), 1.0, XS, 0.5), 0.0)
    assert np.allclose(orc.quad_hess_log_Pt(Linear(1.0), 1.0, XS, 0.5), 0.0, atol=1e-12)
    v = orc.quad_hess_log_Pt(SmoothedAbs(1.0), 1.0, 1.0, 0.5)[0]
    assert v <= theta_euclidean(0.5, EuclideanParams(1.0, 0.0, 1.0))
    # derivatives are consistent with finite differences of log P
    q = orc.OUQuadrature(SmoothedAbs(1.0), 1.0)
    h = 1e-4
    logp = lambda x: np.log(q.Pt(x, 0.5))
    fd = (logp(1 + h) - 2 * logp(1.0) + logp(1 - h)) / h**2
    assert fd[0] == pytest.approx(v, rel=1e-5)
    with pytest.raises(orc.OracleError):
        orc.quad_hess_log_Pt(Linear(1.0), 1.0, 0.0, 0.0)


def test_chapman_kolmogorov():
    w = SmoothedAbs(1.0)
    q = orc.OUQuadrature(w, 1.0)
    for s, t in ((0.2, 0.3), (0.05, 1.0)):
        inner = lambda y: q.Pt(y.ravel(), s).reshape(y.shape)
        composed = q.Pt_of(inner, XS, t)
        assert np.allclose(composed, q.Pt(XS, s + t), rtol=1e-8)


def test_reverse_holder_margin_nonnegative():
    for w in (SmoothedAbs(1.0), AbsValue(1.0), SmoothedAbs(1.0, 1e-3, 1, -1.0)):
        for t in (0.05, 0.5, 5.0):
            margin, _, _ = orc.reverse_holder_margin(w, 1.0, np.linspace(-8, 8, 17), t)
            assert margin.min() >= -1e-10


def test_nu_cdf_normalization_and_tails():
    L = 0.7
    cdf = orc.NuCDF(Linear(L), 1.0)
    assert cdf.Z == pytest.approx(math.exp(L * L / 2), rel=1e-12)
    y = np.array([-9.0, -1.0, 0.3, 6.0])
    lo, hi = cdf.tails(y)
    assert np.allclose(lo, ndtr(y + L), rtol=1e-10, atol=0)
    assert np.allclose(hi, ndtr(-(y + L)), rtol=1e-10, atol=0)


def test_monotone_map_examples():
    x = np.linspace(-4, 4, 9)
    T, dT = orc.monotone_map(Zero(), 1.0, x)
    assert np.array_equal(T, x) and np.all(dT == 1)
    T, dT = orc.monotone_map(Linear(1.0), 1.0, x)
    assert np.allclose(T, x - 1, atol=1e-10) and np.allclose(dT, 1, atol=1e-9)


def test_monotone_map_exactness():
    x = np.linspace(-6, 6, 121)
    for w in (SmoothedAbs(1.0), AbsValue(1.0, sign=-1.0), Linear(-0.5)):
        T, dT = orc.monotone_map(w, 1.0, x)
        lo, hi = orc.NuCDF(w, 1.0).tails(T)
        assert np.all(np.minimum(np.abs(lo - ndtr(x)), np.abs(hi - ndtr(-x))) <= 1e-10)
        assert np.all(np.diff(T) > 0) and np.all(dT > 0)


def test_sharpness_example():
    x = np.linspace(-3, 3, 6001)
    _, dT = orc.monotone_map(AbsValue(1.0, sign=-1.0), 1.0, x)
    assert dT.max() >= math.exp(0.5)
    # at 0 the derivative is Z = 2 e^{1/2} Phi(1)
    assert dT[3000] == pytest.approx(2 * math.exp(0.5) * ndtr(1.0), rel=1e-9)


def test_isoperimetry_examples():
    r = orc.isoperimetry_check(Zero(), 1.0, 1.0, [0.0, 1.5])
    assert abs(r["slack"][0]) <= 1e-10
    r = orc.isoperimetry_check(Linear(1.0), 1.0, 1.0, np.linspace(-5, 5, 11))
    assert np.all(np.abs(r["slack"]) <= 1e-10)
    M = lip_const_euclidean(EuclideanParams(1.0, 0.0, 1.0))[0]
    r = orc.isoperimetry_check(SmoothedAbs(1.0), 1.0, M, np.linspace(-6, 6, 41))
    assert r["min_slack"] >= 0
    with pytest.raises(orc.OracleError):
        orc.isoperimetry_check(Zero(), 1.0, 0.5, [0.0])


def test_legendre_coefficients():
    sp = orc.SphereSpectral(1.0)
    ell = np.arange(sp.lmax + 1)
    assert np.allclose(sp.coef, (2 * ell + 1) * (-1.0) ** ell * spherical_in(ell, 1.0), rtol=0, atol=0)
    quad = orc.SphereSpectral(1.0, lmax=60, method="quadrature")
    assert np.allclose(quad.coef, sp.coef[:61], atol=1e-11)
    assert np.max(np.abs(sp.coef[-3:])) <= 1e-14 * np.max(np.abs(sp.coef))
    with pytest.raises(orc.OracleError):
        orc.SphereSpectral(40.0, lmax=20)
    with pytest.raises(orc.OracleError):
        orc.SphereSpectral(1.0, method="fft")


def test_spectral_examples():
    th = np.linspace(0, math.pi, 13)
    flat = orc.SphereSpectral(0.0)
    assert np.allclose(flat.Pt(0.4, th), 1.0) and np.allclose(flat.hess_log(0.4, th), 0.0)
    for a in (1.0, 2.5):
        sp = orc.SphereSpectral(a)
        assert np.allclose(sp.Pt(0.0, th), np.exp(-a * np.cos(th)), rtol=0, atol=1e-10)
        assert np.allclose(sp.Pt(30.0, th), math.sinh(a) / a, rtol=1e-12)
    assert orc.spectral_Pt_sphere(1.0, 0.3, 0.0) == pytest.approx(orc.SphereSpectral(1.0).Pt(0.3, 0.0))
    with pytest.raises(orc.OracleError):
        orc.SphereSpectral(1.0).Pt(-1.0, 0.3)


def test_spectral_derivatives_match_finite_differences():
    sp = orc.SphereSpectral(1.0)
    t, th, h = 0.3, 1.1, 1e-4
    lf = lambda s: math.log(sp.Pt(t, s))
    fd1 = (lf(th + h) - lf(th - h)) / (2 * h)
    fd2 = (lf(th + h) - 2 * lf(th) + lf(th - h)) / h**2
    assert sp.grad_log(t, th) == pytest.approx(fd1, rel=1e-8)
    assert sp.hess_log(t, th) == pytest.approx(fd2, rel=1e-5)
    assert orc.spectral_hess_log(1.0, t, th) == pytest.approx(fd2, rel=1e-5)


def test_spectral_eigenfunction_decay():
    # x_3 is a degree-one harmonic: P_t x_3 = e^{-2t} x_3 (eigenvalue l(l+1) = 2)
    c = np.zeros(4)
    c[1] = 1.0
    sp = orc.SphereSpectral(0.0, lmax=3)
    sp.coef = c
    assert sp.Pt(0.5, 0.7) == pytest.approx(math.exp(-1.0) * math.cos(0.7), rel=1e-14)


def test_sphere_reverse_holder_and_axis_cdf():
    th = np.linspace(0.2, math.pi - 0.2, 9)
    for t in (0.05, 0.5, 3.0):
        assert orc.sphere_reverse_holder_margin(1.0, t, th)[0].min() >= -1e-10
    u = np.array([-1.0, 0.0, 1.0])
    F = orc.sphere_axis_cdf(1.0, u)
    assert F[0] == 0.0 and F[2] == pytest.approx(1.0, rel=1e-15)
    assert np.allclose(orc.sphere_axis_cdf(0.0, u), [0, 0.5, 1])
    # mean of x_3 under exp(-x_3) on the sphere
    uu, ww = npleg.leggauss(50)
    dens = np.exp(-uu)
    assert np.sum(ww * uu * dens) / np.sum(ww * dens) == pytest.approx(1 - 1 / math.tanh(1.0), rel=1e-13)
