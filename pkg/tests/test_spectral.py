import math

import mpmath
import numpy as np
import pytest
from scipy import integrate
from scipy.special import j1

from flatlattice import bodies as bd
from flatlattice import lattice as lt
from flatlattice import spectral as sp


DISK = bd.make_body("disk")
GE4 = bd.make_body("gen_ellipse", gamma=4)


def bessel_series_j1(x, terms=80):
    # independent power-series oracle for J1 in high precision
    with mpmath.workdps(60):
        x = mpmath.mpf(x)
        tot = mpmath.mpf(0)
        for k in range(terms):
            tot += (-1) ** k * (x / 2) ** (2 * k + 1) / (mpmath.factorial(k) * mpmath.factorial(k + 1))
        return float(tot)


def test_bessel_oracle_agrees_with_scipy():
    for x in (1.0, 2 * math.pi, 16 * math.pi):
        assert bessel_series_j1(x) == pytest.approx(j1(x), abs=1e-14)


def test_slice_transform_examples():
    assert sp.chi_hat_slice(GE4, 0.0) == pytest.approx(GE4.area, rel=1e-12)
    ref = bessel_series_j1(2 * math.pi)
    assert ref == pytest.approx(-0.21238, abs=1e-5)
    assert sp.chi_hat_slice(DISK, 1.0) == pytest.approx(ref, rel=1e-9)
    for s in (0.7, 13.0, 250.0):
        v = sp.chi_hat_slice(GE4, s)
        assert np.conj(sp.chi_hat_slice(GE4, -s)) == pytest.approx(v, rel=1e-12, abs=1e-15)


def test_slice_transform_vs_scipy_quad():
    s = 3.3
    re, _ = integrate.quad(lambda t: bd.slice_width(GE4, t) * math.cos(2 * math.pi * s * t),
                           -1, 1, limit=400, epsabs=1e-13)
    assert sp.chi_hat_slice(GE4, s).real == pytest.approx(re, abs=1e-10)


def test_slice_budget():
    with pytest.raises(ValueError):
        sp.chi_hat_slice(GE4, 1e9)


def test_boundary_integral_disk_bessel():
    ref = bessel_series_j1(16 * math.pi) / 8
    for ang in (0.0, 0.3, 1.0, 2.5):
        z = 8 * np.array([math.cos(ang), math.sin(ang)])
        assert sp.chi_hat_2d(DISK, z) == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_boundary_integral_matches_slice():
    for s in (1.0, 7.5, 40.0, 300.0):
        a = sp.chi_hat_2d(GE4, (0.0, s))
        b = sp.chi_hat_slice(GE4, s)
        assert abs(a - b) <= 1e-6 * abs(b) + 1e-12


def test_boundary_integral_symmetries():
    for z in ((3.0, 4.0), (0.5, 17.0), (25.0, -9.0)):
        v = sp.chi_hat_2d(GE4, z)
        w = sp.chi_hat_2d(GE4, (-z[0], -z[1]))
        assert abs(v - np.conj(w)) < 1e-10
        assert abs(v.imag) <= 1e-8 * GE4.area
        assert abs(v) <= GE4.area
    with pytest.raises(ValueError):
        sp.chi_hat_2d(GE4, (0.0, 0.0))


def test_boundary_integral_rotated_body():
    # rotating the body rotates the transform
    th = 0.4
    rot = bd.rotate_body(GE4, th)
    z = np.array([2.0, 9.0])
    c, s = math.cos(th), math.sin(th)
    zb = np.array([c * z[0] + s * z[1], -s * z[0] + c * z[1]])
    assert sp.chi_hat_2d(rot, z) == pytest.approx(sp.chi_hat_2d(GE4, zb), rel=1e-9, abs=1e-13)


def test_dilation_identity_on_disk():
    # chi_hat of R*disk at zeta equals R^2 chi_hat(disk, R zeta)
    R, r = 2.5, 3.1
    dil = R * j1(2 * math.pi * R * r) / r
    assert R ** 2 * sp.chi_hat_2d(DISK, (R * r, 0.0)) == pytest.approx(dil, rel=1e-8)


def test_two_term_expansion_terms():
    P, Q = sorted(GE4.flat_points, key=lambda f: f.location[1])
    # equal poles at t = -1 and t = +1: the two terms are complex conjugates of
    # magnitude g0 Gamma(5/4) (2 pi)^(-5/4) |s|^(-5/4), so the sum is real
    one = P.g0 * math.gamma(1.25) * (2 * math.pi) ** (-1.25)
    for s in (2.0, 2.3, 4.0, 17.7):
        ref = 2 * one * s ** -1.25 * math.cos(2 * math.pi * s - 0.625 * math.pi)
        assert sp.sezioni_expansion(P, Q, s) == pytest.approx(ref, rel=1e-12, abs=1e-15)
    # envelope ratio between s = 2 and s = 4 is 2^(5/4)
    env = [2 * one * s ** -1.25 for s in (2.0, 4.0)]
    assert env[0] / env[1] == pytest.approx(2 ** 1.25, rel=1e-14)
    with pytest.raises(ValueError):
        sp.sezioni_expansion(P, Q, 0.0)


def test_two_term_expansion_remainder_small():
    P, Q = sorted(GE4.flat_points, key=lambda f: f.location[1])
    for s in (64.0, 256.0):
        main = sp.sezioni_expansion(P, Q, s)
        rem = abs(sp.chi_hat_slice(GE4, s) - main)
        assert rem < 0.05 * 2 * abs(P.g0 * math.gamma(1.25) * (2 * math.pi * s) ** -1.25)


def test_decay_fit_examples():
    x = np.geomspace(1, 1000, 40)
    fit = sp.decay_fit((x, 3.0 * x ** -1.7))
    assert fit.exponent == pytest.approx(-1.7, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    fit = sp.decay_fit((x, 3.0 * x ** -1.7 * (1 + 0.01 * np.sin(x))))
    assert fit.exponent == pytest.approx(-1.7, abs=0.02)
    fit = sp.decay_fit((x, np.full_like(x, 5.0)))
    assert fit.exponent == pytest.approx(0.0, abs=1e-12) and fit.r2 == 1.0
    sub = sp.decay_fit((x, x ** 2), window=(10, 100))
    assert sub.window[0] >= 10 and sub.window[1] <= 100
    with pytest.raises(ValueError):
        sp.decay_fit((x[:5], x[:5]))
    with pytest.raises(ValueError):
        sp.decay_fit((x, -x))


def test_regime_bounds():
    b = sp.regime_bounds(4)
    assert b["normal"] == pytest.approx(-1.25)
    assert b["tangential"] == pytest.approx(-1.5)
    # at |xi| = |s| the intermediate bound decays like |zeta|^(-(g-2)/(2(g-1)) - 1/(2(g-1)) - 1)
    assert b["intermediate"] == pytest.approx(-(2 / 6) - (1 / 6) - 1)
    assert sp.regime_bounds(2)["normal"] == pytest.approx(-1.5)


@pytest.fixture(scope="module")
def ge4_regimes():
    return sp.regime_report(GE4, 4, sp.default_s_grid(16, 1024, 96))


def test_regime_report_gen_ellipse(ge4_regimes):
    rep = ge4_regimes
    assert rep["normal"].fit.exponent == pytest.approx(-1.25, abs=0.10)
    assert rep["tangential"].fit.exponent <= -1.35
    assert rep["intermediate"].passed
    assert all(r.passed for r in rep.values())


def test_regime_report_needs_samples():
    with pytest.raises(ValueError):
        sp.regime_report(DISK, 2, sp.default_s_grid(16, 64, 10))


def test_parseval_disk_closed_form():
    # the Bessel closed form gives the same half-plane sum
    R, K = 2.0, 16
    res = sp.parseval_l2(DISK, R, K)
    m1, m2 = np.meshgrid(np.arange(-K, K + 1), np.arange(-K, K + 1))
    r = np.hypot(m1, m2)
    keep = (r > 0) & (r <= K)
    ref = R ** 4 * np.sum((j1(2 * math.pi * R * r[keep]) / (R * r[keep])) ** 2)
    assert res.value == pytest.approx(ref, rel=1e-6)
    assert res.tail > 0


def test_parseval_monotone_in_K():
    a = sp.parseval_l2(DISK, 2.0, 16).value
    b = sp.parseval_l2(DISK, 2.0, 24).value
    assert b >= a
    with pytest.raises(ValueError):
        sp.parseval_l2(DISK, 2.0, 8)


def test_parseval_vs_lattice_small():
    res = sp.parseval_l2(DISK, 2.0, 32)
    lat = lt.lp_norm(DISK, 2.0, 2, M=1024, seed=0).value ** 2
    assert res.value + res.tail == pytest.approx(lat, rel=0.02)
