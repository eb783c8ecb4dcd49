"""Resolvent ``(lambda - Delta)^{-1}`` on R^d: kernels, Hankel functions, Schur integrals.

The kernel is

    K(r) = (i/4) (i sqrt(lambda) / (2 pi r))^nu H^(1)_nu(i sqrt(lambda) r),  nu = (d-2)/2,

which for d=3 reduces to ``exp(-sqrt(lambda) r) / (4 pi r)``.  The principal
branch of the square root (``Re sqrt(lambda) > 0``) is used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy import integrate
from scipy.signal import fftconvolve
from scipy.special import gamma, rgamma, digamma

from .heatflow import wavenumber_squared
from .spaces import RemainderField, japanese, lp_norm

__all__ = [
    "SectorPoint",
    "hankel1",
    "hankel1_series",
    "hankel1_asymptotic",
    "bessel_jy_series",
    "sphere_area",
    "resolvent_kernel",
    "kernel_radial",
    "kernel_closed_form_3d",
    "schur_integrals",
    "resolvent_apply",
    "resolvent_identity_residual",
    "sector_samples",
    "sectorial_ratio",
]

CROSSOVER = 10.0


def _principal_sqrt(lam) -> complex:
    mu = np.sqrt(complex(lam))
    return mu


@dataclass(frozen=True)
class SectorPoint:
    """Spectral parameter ``lam`` with the sector ``|arg(lam - omega)| < pi - eps``."""

    lam: complex
    omega: float = 1.0
    eps: float = 0.1

    @property
    def inside(self) -> bool:
        w = complex(self.lam) - self.omega
        return w != 0 and abs(np.angle(w)) < np.pi - self.eps


# --------------------------------------------------------------------------- Bessel


def _is_half_integer(nu: float) -> bool:
    return abs(nu - 0.5 - round(nu - 0.5)) < 1e-14


def _is_integer(nu: float) -> bool:
    return abs(nu - round(nu)) < 1e-14


def _asym_coeffs(nu: float, kmax: int) -> list:
    """``a_k(nu) = prod_{j=1..k} (4 nu^2 - (2j-1)^2) / (k! 8^k)``."""
    out, a = [1.0], 1.0
    mu = 4 * nu * nu
    for k in range(1, kmax + 1):
        a *= (mu - (2 * k - 1) ** 2) / (k * 8)
        out.append(a)
    return out


def hankel1_asymptotic(nu: float, z, terms: int | None = None) -> complex:
    """Large-argument expansion ``sqrt(2/(pi z)) e^{i(z - nu pi/2 - pi/4)} sum_k i^k a_k / z^k``.

    ``terms=None`` sums up to the smallest term and adds half of it, which
    roughly halves the truncation error of the divergent series; the sum is
    exact for half-integer ``nu``.
    """
    z = complex(z)
    prefactor = np.sqrt(2 / (np.pi * z)) * np.exp(1j * (z - nu * np.pi / 2 - np.pi / 4))
    if terms is not None:
        coeffs = _asym_coeffs(nu, terms - 1)
        return prefactor * sum(a * (1j / z) ** k for k, a in enumerate(coeffs))
    mu4 = 4 * nu * nu
    terminating = _is_half_integer(nu)
    total, prev, term = 0j, None, 1.0 + 0j
    for k in range(400):
        if k > 0:
            term = term * (mu4 - (2 * k - 1) ** 2) / (8 * k) * (1j / z)
        if term == 0:  # terminating series (half-integer order)
            total += prev
            prev = None
            break
        if not terminating and prev is not None and abs(term) > abs(prev):
            break
        if prev is not None:
            total += prev
            if not terminating and abs(prev) < 1e-17 * abs(total):
                prev = None
                break
        prev = term
    if prev is not None:
        total += 0.5 * prev if abs(prev) < 1e-3 * abs(total) else prev
    return prefactor * total


def _j_series(nu: float, z: complex) -> complex:
    half = z / 2
    term = half**nu * rgamma(nu + 1) if nu != 0 else 1.0 + 0j
    total = term
    q = -half * half
    for k in range(1, 400):
        term = term * q / (k * (k + nu))
        total += term
        if abs(term) < 1e-17 * abs(total) and k > 5:
            break
    return total


def _y_integer_series(n: int, z: complex) -> complex:
    half = z / 2
    head = 0j
    for k in range(n):
        head += math.factorial(n - k - 1) / math.factorial(k) * half ** (2 * k - n)
    q = -half * half
    term = half**n / math.factorial(n)
    tail = (digamma(1) + digamma(n + 1)) * term
    for k in range(1, 400):
        term = term * q / (k * (n + k))
        c = (digamma(k + 1) + digamma(n + k + 1)) * term
        tail += c
        if abs(c) < 1e-17 * abs(tail) and k > 5:
            break
    return -head / np.pi + 2 / np.pi * np.log(half) * _j_series(n, z) - tail / np.pi


def bessel_jy_series(nu: float, z) -> tuple:
    """``(J_nu(z), Y_nu(z))`` from their ascending series."""
    z = complex(z)
    if z == 0:
        raise ValueError("Bessel series at z = 0")
    J = _j_series(nu, z)
    if _is_integer(nu):
        Y = _y_integer_series(int(round(nu)), z)
    else:
        Y = (J * np.cos(nu * np.pi) - _j_series(-nu, z)) / np.sin(nu * np.pi)
    return J, Y


def _hankel1_integral(nu: float, z: complex, step: float = 0.01) -> complex:
    """``H1_nu(z) = (2/(i pi)) e^{-i nu pi/2} K_nu(-i z)`` with ``K_nu`` by trapezoid."""
    zeta = -1j * z
    smax = math.acosh(max(1.0, 60.0 / zeta.real)) + 1.0
    s = np.arange(0.0, smax, step)
    f = np.exp(-zeta * np.cosh(s)) * np.cosh(nu * s)
    K = step * (f.sum() - 0.5 * f[0])
    return 2 / (1j * np.pi) * np.exp(-1j * nu * np.pi / 2) * K


def hankel1_series(nu: float, z) -> complex:
    """Small-argument ``H1_nu = J_nu + i Y_nu``.

    In the upper half plane (``Im z > 2``) ``J`` and ``Y`` both grow while ``H1``
    decays, so the sum cancels; there the modified-Bessel integral is used.
    """
    z = complex(z)
    if z.imag > 2:
        return _hankel1_integral(nu, z)
    J, Y = bessel_jy_series(nu, z)
    return J + 1j * Y


def hankel1(nu: float, z) -> complex:
    """First Hankel function ``H^(1)_nu(z)`` for ``nu >= 0``, ``|arg z| < pi``."""
    z = complex(z)
    if z == 0:
        raise ValueError("H1 is singular at z = 0")
    if nu < 0:
        raise ValueError("order must be >= 0")
    if z.real <= 0 and z.imag == 0:
        raise ValueError("argument on the branch cut")
    if _is_half_integer(nu):
        return hankel1_asymptotic(nu, z)
    # The expansion degrades towards arg z = -pi (Stokes phenomenon); the third
    # quadrant has no cancellation in J + iY, so the series is used there.
    if abs(z) >= CROSSOVER and (z.real >= 0 or z.imag >= 0):
        return hankel1_asymptotic(nu, z)
    return hankel1_series(nu, z)


# --------------------------------------------------------------------------- kernels


def sphere_area(d: int) -> float:
    return 2 * np.pi ** (d / 2) / gamma(d / 2)


def kernel_closed_form_3d(r, lam) -> np.ndarray:
    mu = _principal_sqrt(lam)
    r = np.asarray(r, dtype=float)
    return np.exp(-mu * r) / (4 * np.pi * r)


def kernel_radial(r, lam, d: int) -> np.ndarray:
    """Hankel form of the kernel as a function of ``r = |x - y|``."""
    mu = _principal_sqrt(lam)
    if mu.real <= 0:
        raise ValueError("need Re sqrt(lambda) > 0")
    nu = (d - 2) / 2
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("kernel is singular at x = y")
    out = np.array([
        0.25j * (1j * mu / (2 * np.pi * ri)) ** nu * hankel1(nu, 1j * mu * ri) for ri in r.ravel()
    ]).reshape(r.shape)
    return out


def resolvent_kernel(x, y, lam, d: int) -> np.ndarray:
    """``K(x, y, lambda)``; the d=3 closed form, the Hankel form otherwise."""
    diff = np.atleast_2d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    r = np.linalg.norm(diff, axis=1)
    if np.any(r == 0):
        raise ValueError("kernel is singular at x = y")
    if d == 3:
        return kernel_closed_form_3d(r, lam)
    return kernel_radial(r, lam, d)


def schur_integrals(lam, delta: float, d: int, kappa: float = 0.5) -> tuple:
    """``(I1, I2)``: weighted kernel mass split at ``r = 1/Re sqrt(lambda)``.

    ``I = |S^{d-1}| int_0^inf |K(r)| (1 + r^2)^{|delta|/2} r^{d-1} dr``.  Multiplied by
    ``2^{|delta|/2}`` this bounds the ``L^p_delta`` operator norm of the resolvent
    for every ``p`` (Schur test).
    """
    lam = complex(lam.lam if isinstance(lam, SectorPoint) else lam)
    if abs(lam) < kappa:
        raise ValueError(f"|lambda| = {abs(lam)} below kappa = {kappa}")
    mu = _principal_sqrt(lam)
    nu = (d - 2) / 2
    area = sphere_area(d)
    scale = 0.25 * (abs(mu) / (2 * np.pi)) ** nu

    def integrand(r):
        if mu.real * r > 700:
            return 0.0
        if d == 3:
            kr = math.exp(-mu.real * r) / (4 * np.pi * r)
        else:
            kr = scale * r ** (-nu) * abs(hankel1(nu, 1j * mu * r))
        return area * kr * (1 + r * r) ** (abs(delta) / 2) * r ** (d - 1)

    split = 1.0 / mu.real
    opts = dict(limit=200, epsabs=0.0, epsrel=1e-10)
    I1 = integrate.quad(integrand, 0.0, split, **opts)[0]
    I2 = integrate.quad(integrand, split, np.inf, **opts)[0]
    return I1, I2


# --------------------------------------------------------------------------- apply


def _check_lambda(lam) -> complex:
    lam = complex(lam)
    if lam.imag == 0 and lam.real <= 0:
        raise ValueError(f"lambda={lam} lies in the spectrum (-inf, 0]")
    return lam


# Punctured-trapezoid correction for 1/|x| on the unit cubic lattice: the rule
# h^3 sum_{j != 0} g(x_j)/|x_j| + C h^2 g(0) is fourth-order accurate.
_LATTICE_INV_R = 2.8372974794806


def resolvent_apply(f: RemainderField, lam, method: str = "spectral") -> RemainderField:
    """``R(lambda) f``.

    ``spectral`` divides by ``lambda + |xi|^2`` on the periodised box; ``kernel``
    convolves with the sampled d=3 kernel; the singular self-cell weight is the
    lattice correction for ``1/r`` plus the regular value ``-sqrt(lambda)/(4 pi)``.
    """
    lam = _check_lambda(lam)
    if method == "spectral":
        q = wavenumber_squared(f.shape, f.spacing, False)
        out = scipy.fft.ifftn(scipy.fft.fftn(f.data) / (lam + q))
        if lam.imag == 0 and not np.iscomplexobj(f.data):
            out = out.real
        return f.like(out)
    if method == "kernel":
        if f.d != 3:
            raise ValueError("kernel path implemented for d=3")
        h = f.spacing
        mu = _principal_sqrt(lam)
        n = f.shape
        axes = [h * np.arange(-(m - 1), m) for m in n]
        X = np.meshgrid(*axes, indexing="ij", sparse=True)
        r = np.sqrt(sum(x**2 for x in X))
        with np.errstate(divide="ignore", invalid="ignore"):
            K = np.exp(-mu * r) / (4 * np.pi * r) * h**3
        centre = tuple(m - 1 for m in n)
        K[centre] = (_LATTICE_INV_R * h**2 - mu * h**3) / (4 * np.pi)
        if lam.imag == 0:
            K = K.real
        out = fftconvolve(f.data, K, mode="valid")
        return f.like(out)
    raise ValueError(f"unknown resolvent method {method!r}")


def resolvent_identity_residual(f: RemainderField, lam) -> float:
    """``||(lambda - Delta_h) R(lambda) f - f|| / ||f||`` with the spectral Laplacian."""
    lam = _check_lambda(lam)
    u = resolvent_apply(f, lam)
    q = wavenumber_squared(f.shape, f.spacing, False)
    back = lam * u.data + scipy.fft.ifftn(q * scipy.fft.fftn(u.data))
    return float(np.linalg.norm(back - f.data) / np.linalg.norm(f.data))


def sector_samples(count: int, rng: np.random.Generator, eps: float = 0.1, omega: float = 1.0,
                   kappa: float = 0.5, radius=(0.5, 200.0)) -> list:
    """Random points of ``|arg(lambda - omega)| < pi - eps`` with ``|lambda| >= kappa``."""
    out = []
    while len(out) < count:
        theta = rng.uniform(-(np.pi - eps), np.pi - eps)
        rho = np.exp(rng.uniform(np.log(radius[0]), np.log(radius[1])))
        lam = omega + rho * np.exp(1j * theta)
        if abs(lam) >= kappa:
            out.append(SectorPoint(lam, omega, eps))
    return out


def sectorial_ratio(f: RemainderField, point: SectorPoint, delta: float = 0.0, p: float = 2.0) -> float:
    """``|lambda - omega| ||R(lambda) f||_{L^p_delta} / ||f||_{L^p_delta}``."""
    w = japanese(f.radius()) ** delta
    u = resolvent_apply(f, point.lam)
    num = lp_norm(f.like(w * np.abs(u.data)), p)
    den = lp_norm(f.like(w * np.abs(f.data)), p)
    return abs(complex(point.lam) - point.omega) * num / den
