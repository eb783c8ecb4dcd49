import math

import numpy as np
import pytest
import scipy.special as sp

from asympheat import resolvent as rs
from asympheat.spaces import RemainderField

from conftest import gaussian_field


# --------------------------------------------------------------------------- Hankel


def test_half_order_closed_form():
    z = 1j
    closed = -1j * np.sqrt(2 / (np.pi * z)) * np.exp(1j * z)
    assert abs(rs.hankel1(0.5, z) - closed) < 1e-14
    assert abs(rs.hankel1_series(0.5, z) - closed) < 1e-10


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0])
def test_large_argument_terms(nu):
    z = 50.0
    exact = sp.hankel1(nu, z)
    one = rs.hankel1_asymptotic(nu, z, terms=1)
    two = rs.hankel1_asymptotic(nu, z, terms=2)
    assert abs(one - exact) / abs(exact) < 1e-2
    assert abs(two - exact) / abs(exact) < 1e-4


def test_leading_term_error_scales_with_order():
    # first correction is (4 nu^2 - 1) / (8 z); for nu = 3/2 that is exactly 1/z and the
    # two-term sum terminates
    z = 50.0
    exact = sp.hankel1(1.5, z)
    assert abs(rs.hankel1_asymptotic(1.5, z, terms=1) - exact) / abs(exact) == pytest.approx(1 / z, rel=1e-3)
    assert abs(rs.hankel1_asymptotic(1.5, z, terms=2) - exact) < 1e-13 * abs(exact)


def test_wronskian_of_series():
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = complex(*rng.uniform(0.3, 6, 2))
        for nu in (0.0, 1.0, 0.5, 1.5, 2.0):
            J0, Y0 = rs.bessel_jy_series(nu, z)
            J1, Y1 = rs.bessel_jy_series(nu + 1, z)
            w = J1 * Y0 - J0 * Y1
            assert abs(w - 2 / (np.pi * z)) < 1e-10 * abs(2 / (np.pi * z))


def test_hankel_against_scipy():
    rng = np.random.default_rng(1)
    for _ in range(50):
        z = np.exp(rng.uniform(-2, 3.5)) * np.exp(1j * rng.uniform(-3, 3))
        for nu in (0.0, 0.5, 1.0, 1.5):
            ref = sp.hankel1(nu, z)
            assert abs(rs.hankel1(nu, z) - ref) <= 2e-8 * abs(ref)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_branch_overlap_half_integer(nu):
    for rad in np.linspace(8, 12, 9):
        for ang in (0.3, 1.2, 2.5):
            z = rad * np.exp(1j * ang)
            a, b = rs.hankel1_series(nu, z), rs.hankel1_asymptotic(nu, z)
            assert abs(a - b) <= 1e-8 * abs(b)


@pytest.mark.parametrize("nu", [0.0, 1.0])
def test_branch_overlap_integer_floor(nu):
    # the Y_n series cancels near |z| = 8; the floor is ~1.1e-8 (see the ledger)
    worst = 0.0
    for rad in np.linspace(8, 12, 9):
        for ang in (0.3, 1.2, 2.5):
            z = rad * np.exp(1j * ang)
            a, b = rs.hankel1_series(nu, z), rs.hankel1_asymptotic(nu, z)
            worst = max(worst, abs(a - b) / abs(b))
    assert worst < 2e-8


def test_hankel_zero_argument():
    with pytest.raises(ValueError):
        rs.hankel1(0.5, 0.0)


# --------------------------------------------------------------------------- kernels


def test_kernel_unit_example():
    # e^{-1}/(4 pi) = 0.02927492...; the quoted 0.0292751 is off in the seventh digit
    assert rs.resolvent_kernel([1, 0, 0], [0, 0, 0], 1.0, 3)[0] == pytest.approx(0.0292751, rel=1e-5)
    assert rs.resolvent_kernel([1, 0, 0], [0, 0, 0], 1.0, 3)[0] == pytest.approx(math.exp(-1) / (4 * math.pi), rel=1e-15)


def test_hankel_kernel_equals_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(100):
        lam = np.exp(rng.uniform(-2, 4)) * np.exp(1j * rng.uniform(-3, 3))
        r = np.exp(rng.uniform(-3, 2))
        a = complex(rs.kernel_radial(r, lam, 3)[0])
        b = complex(rs.kernel_closed_form_3d(r, lam))
        assert abs(a - b) <= 1e-12 * abs(b)


@pytest.mark.parametrize("d", [2, 3])
def test_real_lambda_kernel_positive(d):
    r = np.geomspace(0.01, 20, 30)
    k = rs.kernel_radial(r, 2.5, d)
    assert np.all(np.abs(k.imag) <= 1e-12 * np.abs(k.real))
    assert np.all(k.real > 0)


def test_kernel_d2_is_k0():
    # d=2: K = K_0(sqrt(lambda) r) / (2 pi)
    r = np.geomspace(0.05, 8, 20)
    assert np.allclose(rs.kernel_radial(r, 3.0, 2).real, sp.k0(math.sqrt(3) * r) / (2 * math.pi), rtol=1e-8)


def test_kernel_singular():
    with pytest.raises(ValueError):
        rs.resolvent_kernel([0, 0, 0], [0, 0, 0], 1.0, 3)


# --------------------------------------------------------------------------- Schur


def test_schur_unweighted_d3_closed_form():
    for lam in (0.7, 4.0, 3 + 4j, -2 + 1j):
        mu = rs._principal_sqrt(lam).real
        I1, I2 = rs.schur_integrals(lam, 0.0, 3)
        assert I1 + I2 == pytest.approx(mu**-2, rel=1e-9)
        assert I1 == pytest.approx((1 - 2 / math.e) / mu**2, rel=1e-9)


def test_schur_sector_bound():
    rng = np.random.default_rng(4)
    vals = [abs(pt.lam) * sum(rs.schur_integrals(pt.lam, 2.0, 3))
            for pt in rs.sector_samples(50, rng, eps=0.1)]
    assert np.all(np.isfinite(vals))
    # at fixed |lambda| the product grows only through 1/sin^2 of the sector margin
    assert max(vals) < 1e4


def test_schur_large_real_lambda_split():
    # both halves scale like 1/lambda; the tail fraction tends to 2/(e-2) in d=3
    ratios = []
    for lam in (1e2, 1e4, 1e6):
        I1, I2 = rs.schur_integrals(lam, 2.0, 3)
        assert lam * (I1 + I2) == pytest.approx(1.0, abs=10 / lam)
        ratios.append(I2 / I1)
    assert ratios[-1] == pytest.approx(2 / (math.e - 2), rel=1e-3)


def test_schur_rejects_small_lambda():
    with pytest.raises(ValueError):
        rs.schur_integrals(0.1, 0.0, 3)


# --------------------------------------------------------------------------- apply


def test_resolvent_identity():
    f = gaussian_field(3, 32, 6.0, shift=0.5)
    for lam in (2.0, 2 + 1j, -1 + 3j, 0.1j + 0.01):
        assert rs.resolvent_identity_residual(f, lam) < 1e-10


def test_kernel_path_matches_spectral():
    f = gaussian_field(3, 48, 8.0, width=0.8)
    a = rs.resolvent_apply(f, 2.0).data
    b = rs.resolvent_apply(f, 2.0, method="kernel").data
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-3


def test_spectrum_rejected():
    f = gaussian_field(2, 16, 4.0)
    with pytest.raises(ValueError):
        rs.resolvent_apply(f, -1.0)
    with pytest.raises(ValueError):
        rs.resolvent_apply(f, 0.0)


def test_sector_samples_inside():
    pts = rs.sector_samples(200, np.random.default_rng(5), eps=0.2)
    assert all(p.inside for p in pts)
    assert all(abs(p.lam) >= 0.5 for p in pts)


def test_sectorial_ratio_bounded():
    f = gaussian_field(3, 32, 6.0)
    pts = rs.sector_samples(50, np.random.default_rng(6), eps=0.1)
    for delta in (0.0, 2.0):
        ratios = [rs.sectorial_ratio(f, p, delta=delta) for p in pts]
        assert np.all(np.isfinite(ratios))
        assert max(ratios) <= 1 / math.sin(0.05) ** 2


def test_positive_lambda_contraction():
    # on the positive axis |lambda| ||R f|| <= ||f|| (multiplier lambda / (lambda + |xi|^2))
    f = gaussian_field(2, 64, 8.0)
    for lam in (0.5, 3.0, 40.0):
        pt = rs.SectorPoint(lam, 0.0)
        assert rs.sectorial_ratio(f, pt) <= 1 + 1e-12
