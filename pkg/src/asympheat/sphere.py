"""Real harmonic analysis on the unit circle (d=2) and the unit sphere (d=3).

Mode ordering (see ``docs/modes.md``):

* d=2: ``[1, cos(phi), sin(phi), cos(2 phi), sin(2 phi), ...]`` normalised to
  unit L2 norm on the circle, index ``0`` for l=0 and ``2l-1, 2l`` for cos/sin.
* d=3: real orthonormal spherical harmonics ``Y_{l,m}``, ``-l <= m <= l``,
  flat index ``l*l + l + m``.  ``m > 0`` carries ``cos(m phi)``, ``m < 0``
  carries ``sin(|m| phi)``; no Condon-Shortley phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

__all__ = [
    "SphereFunction",
    "SphereGrid",
    "mode_count",
    "mode_degrees",
    "mode_index",
    "harmonic_basis",
    "make_grid",
    "analyze",
    "synthesize",
    "laplace_beltrami",
    "eigenvalues",
    "sphere_sobolev_norm",
    "quadrature_inner",
    "degree_purity",
]


def mode_count(d: int, L: int) -> int:
    if d == 2:
        return 2 * L + 1
    if d == 3:
        return (L + 1) ** 2
    raise ValueError(f"unsupported dimension d={d}")


def mode_index(d: int, l: int, m: int) -> int:
    """Flat coefficient index of mode ``(l, m)``.

    For d=2 use ``m=0`` for l=0, ``m=+1`` for cosine and ``m=-1`` for sine.
    """
    if d == 2:
        if l == 0:
            return 0
        return 2 * l - 1 if m >= 0 else 2 * l
    if abs(m) > l:
        raise ValueError(f"|m| > l for (l, m)=({l}, {m})")
    return l * l + l + m


@lru_cache(maxsize=None)
def _degrees(d: int, L: int) -> np.ndarray:
    if d == 2:
        deg = np.zeros(2 * L + 1, dtype=int)
        deg[1::2] = np.arange(1, L + 1)
        deg[2::2] = np.arange(1, L + 1)
    else:
        deg = np.concatenate([np.full(2 * l + 1, l) for l in range(L + 1)])
    deg.setflags(write=False)
    return deg


def mode_degrees(d: int, L: int) -> np.ndarray:
    """Harmonic degree ``l`` of every flat mode index."""
    if d not in (2, 3):
        raise ValueError(f"unsupported dimension d={d}")
    return _degrees(d, L)


def eigenvalues(d: int, L: int) -> np.ndarray:
    """Eigenvalues ``l(l+d-2)`` of ``-Delta_theta`` per mode."""
    l = mode_degrees(d, L)
    return (l * (l + d - 2)).astype(float)


@dataclass(frozen=True)
class SphereFunction:
    """Band-limited function on S^{d-1} stored by harmonic coefficients.

    Coefficients are real for all physical data; complex coefficients occur
    only when the heat flow is evaluated at complex time.
    """

    d: int
    L_max: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if not np.iscomplexobj(c):
            c = c.astype(float)
        if c.shape != (mode_count(self.d, self.L_max),):
            raise ValueError(
                f"coefficient vector has shape {c.shape}, expected "
                f"({mode_count(self.d, self.L_max)},) for d={self.d}, L_max={self.L_max}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite sphere coefficients")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, d: int, L_max: int) -> "SphereFunction":
        return cls(d, L_max, np.zeros(mode_count(d, L_max)))

    @classmethod
    def mode(cls, d: int, L_max: int, l: int, m: int = 0, value: float = 1.0) -> "SphereFunction":
        c = np.zeros(mode_count(d, L_max))
        c[mode_index(d, l, m)] = value
        return cls(d, L_max, c)

    @classmethod
    def constant(cls, d: int, L_max: int, value: float) -> "SphereFunction":
        """The constant function ``value`` (not the unit-norm mode)."""
        area = 2 * np.pi if d == 2 else 4 * np.pi
        return cls.mode(d, L_max, 0, 0, value * np.sqrt(area))

    @property
    def degrees(self) -> np.ndarray:
        return mode_degrees(self.d, self.L_max)

    def with_coeffs(self, coeffs) -> "SphereFunction":
        return SphereFunction(self.d, self.L_max, coeffs)

    def __call__(self, directions) -> np.ndarray:
        """Evaluate at unit vectors, array of shape ``(npts, d)``."""
        return harmonic_basis(self.d, self.L_max, directions) @ self.coeffs

    def __add__(self, other: "SphereFunction") -> "SphereFunction":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SphereFunction") -> "SphereFunction":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SphereFunction":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SphereFunction":
        return self.with_coeffs(-self.coeffs)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


def _check_compatible(a: SphereFunction, b: SphereFunction):
    if a.d != b.d or a.L_max != b.L_max:
        raise ValueError("sphere functions live on different bases")


def _normalized_legendre(L: int, x: np.ndarray) -> np.ndarray:
    """Orthonormalised associated Legendre values ``P[l, m, i]``.

    ``Y_{l,0} = P[l,0]`` and ``Y_{l,+-m} = sqrt(2) P[l,m] (cos|sin)(m phi)``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((L + 1, L + 1) + x.shape)
    P[0, 0] = 1.0 / np.sqrt(4 * np.pi)
    for m in range(1, L + 1):
        P[m, m] = np.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(0, L):
        P[m + 1, m] = np.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = np.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def harmonic_basis(d: int, L: int, directions) -> np.ndarray:
    """Matrix ``B[i, mode]`` of basis values at unit vectors ``directions``."""
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    if u.shape[1] != d:
        raise ValueError(f"directions must have {d} columns")
    if d == 2:
        phi = np.arctan2(u[:, 1], u[:, 0])
        B = np.empty((u.shape[0], 2 * L + 1))
        B[:, 0] = 1.0 / np.sqrt(2 * np.pi)
        for l in range(1, L + 1):
            B[:, 2 * l - 1] = np.cos(l * phi) / np.sqrt(np.pi)
            B[:, 2 * l] = np.sin(l * phi) / np.sqrt(np.pi)
        return B
    if d != 3:
        raise ValueError(f"unsupported dimension d={d}")
    z = np.clip(u[:, 2], -1.0, 1.0)
    phi = np.arctan2(u[:, 1], u[:, 0])
    P = _normalized_legendre(L, z)
    B = np.empty((u.shape[0], (L + 1) ** 2))
    root2 = np.sqrt(2.0)
    for l in range(L + 1):
        B[:, l * l + l] = P[l, 0]
        for m in range(1, l + 1):
            B[:, l * l + l + m] = root2 * P[l, m] * np.cos(m * phi)
            B[:, l * l + l - m] = root2 * P[l, m] * np.sin(m * phi)
    return B


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature grid on S^{d-1}.

    d=2: ``nlon`` equispaced angles.  d=3: ``nlat`` Gauss-Legendre nodes in
    ``cos(theta)`` times ``nlon`` equispaced longitudes.
    """

    d: int
    nlon: int
    nlat: int = 0
    cos_theta: np.ndarray = field(default=None, repr=False)
    lat_weights: np.ndarray = field(default=None, repr=False)

    @property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.nlon) / self.nlon

    @property
    def shape(self) -> tuple:
        return (self.nlon,) if self.d == 2 else (self.nlat, self.nlon)

    @property
    def weights(self) -> np.ndarray:
        dphi = 2 * np.pi / self.nlon
        if self.d == 2:
            return np.full(self.nlon, dphi)
        return np.outer(self.lat_weights, np.full(self.nlon, dphi))

    def points(self) -> np.ndarray:
        """Unit vectors of the nodes, shape ``(*grid.shape, d)``."""
        phi = self.phi
        if self.d == 2:
            return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        ct = self.cos_theta[:, None]
        st = np.sqrt(1 - ct**2)
        return np.stack(
            np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), ct), axis=-1
        )

    def max_degree(self) -> int:
        """Largest L_max this grid analyses exactly."""
        lon_limit = (self.nlon - 2) // 2
        if self.d == 2:
            return lon_limit
        return min(lon_limit, self.nlat - 1)


def make_grid(d: int, L_max: int, oversample: int = 1) -> SphereGrid:
    """Smallest admissible grid for band limit ``L_max`` (times ``oversample``)."""
    nlon = oversample * (2 * L_max + 2)
    if d == 2:
        return SphereGrid(2, nlon)
    nlat = oversample * (L_max + 1)
    x, w = np.polynomial.legendre.leggauss(nlat)
    return SphereGrid(3, nlon, nlat, x, w)


def _check_resolution(grid: SphereGrid, L: int):
    if L > grid.max_degree():
        raise ValueError(
            f"sphere grid ({grid.shape}) too coarse for L_max={L}; "
            f"needs nlon >= {2 * L + 2}" + ("" if grid.d == 2 else f" and nlat >= {L + 1}")
        )


def synthesize(a: SphereFunction, grid: SphereGrid) -> np.ndarray:
    """Sample ``a`` on the grid nodes."""
    _check_resolution(grid, a.L_max)
    L, c = a.L_max, a.coeffs
    nlon = grid.nlon
    nf = nlon // 2 + 1
    if grid.d == 2:
        spec = np.zeros(nf, dtype=complex)
        spec[0] = c[0] / np.sqrt(2 * np.pi)
        for l in range(1, L + 1):
            spec[l] = (c[2 * l - 1] - 1j * c[2 * l]) / np.sqrt(np.pi) / 2
        out = scipy.fft.irfft(spec * nlon, n=nlon)
        return out if not np.iscomplexobj(c) else _complex_synth(a, grid)
    if np.iscomplexobj(c):
        return _complex_synth(a, grid)
    P = _normalized_legendre(L, grid.cos_theta)
    spec = np.zeros((grid.nlat, nf), dtype=complex)
    root2 = np.sqrt(2.0)
    for m in range(L + 1):
        ls = np.arange(m, L + 1)
        if m == 0:
            spec[:, 0] = c[ls * ls + ls] @ P[m:, 0]
        else:
            cos_part = c[ls * ls + ls + m] @ P[m:, m]
            sin_part = c[ls * ls + ls - m] @ P[m:, m]
            spec[:, m] = root2 * (cos_part - 1j * sin_part) / 2
    return scipy.fft.irfft(spec * nlon, n=nlon, axis=-1)


def _complex_synth(a: SphereFunction, grid: SphereGrid) -> np.ndarray:
    re = synthesize(a.with_coeffs(a.coeffs.real), grid)
    im = synthesize(a.with_coeffs(a.coeffs.imag), grid)
    return re + 1j * im


def analyze(samples, grid: SphereGrid, L_max: int) -> SphereFunction:
    """Project grid samples onto the harmonic basis up to ``L_max``."""
    _check_resolution(grid, L_max)
    f = np.asarray(samples)
    if f.shape != grid.shape:
        raise ValueError(f"samples have shape {f.shape}, grid expects {grid.shape}")
    if np.iscomplexobj(f):
        re = analyze(f.real, grid, L_max).coeffs
        im = analyze(f.imag, grid, L_max).coeffs
        return SphereFunction(grid.d, L_max, re + 1j * im)
    nlon = grid.nlon
    dphi = 2 * np.pi / nlon
    F = scipy.fft.rfft(f, axis=-1) * dphi  # int f e^{-i m phi} dphi
    c = np.zeros(mode_count(grid.d, L_max))
    if grid.d == 2:
        c[0] = F[0].real / np.sqrt(2 * np.pi)
        for l in range(1, L_max + 1):
            c[2 * l - 1] = F[l].real / np.sqrt(np.pi)
            c[2 * l] = -F[l].imag / np.sqrt(np.pi)
        return SphereFunction(2, L_max, c)
    P = _normalized_legendre(L_max, grid.cos_theta)
    w = grid.lat_weights
    root2 = np.sqrt(2.0)
    for m in range(L_max + 1):
        ls = np.arange(m, L_max + 1)
        wc = w * F[:, m].real
        if m == 0:
            c[ls * ls + ls] = P[m:, 0] @ wc
        else:
            ws = -w * F[:, m].imag
            c[ls * ls + ls + m] = root2 * (P[m:, m] @ wc)
            c[ls * ls + ls - m] = root2 * (P[m:, m] @ ws)
    return SphereFunction(3, L_max, c)


def laplace_beltrami(a: SphereFunction) -> SphereFunction:
    """Delta_theta acting mode-wise by ``-l(l+d-2)``."""
    return a.with_coeffs(-eigenvalues(a.d, a.L_max) * a.coeffs)


def quadrature_inner(a: SphereFunction, b: SphereFunction, grid: SphereGrid | None = None) -> float:
    """L2(S^{d-1}) inner product evaluated by grid quadrature."""
    _check_compatible(a, b)
    grid = grid or make_grid(a.d, a.L_max, oversample=2)
    return float(np.sum(grid.weights * synthesize(a, grid) * synthesize(b, grid)))


def _fractional_power(a: SphereFunction, s: float) -> SphereFunction:
    return a.with_coeffs(eigenvalues(a.d, a.L_max) ** (s / 2) * a.coeffs)


def sphere_sobolev_norm(a: SphereFunction, l: int, p: float = 2.0) -> float:
    """Sobolev norm of order ``l`` on S^{d-1}.

    At ``p=2`` this is the spectral norm ``(sum (1+lambda)^l |c|^2)^(1/2)``.
    For other ``p`` it is ``sum_{j<=l} ||(-Delta_theta)^(j/2) a||_{L^p}``
    with the fractional powers applied spectrally and the L^p norms taken by
    grid quadrature.  This surrogate is equivalent to, but not equal to, the
    classical W^{l,p} norm.
    """
    if l < 0:
        raise ValueError("Sobolev order must be >= 0")
    if p == 2:
        lam = eigenvalues(a.d, a.L_max)
        return float(np.sqrt(np.sum((1 + lam) ** l * np.abs(a.coeffs) ** 2)))
    grid = make_grid(a.d, a.L_max, oversample=4)
    total = 0.0
    for j in range(l + 1):
        vals = synthesize(_fractional_power(a, j), grid)
        total += float(np.sum(grid.weights * np.abs(vals) ** p) ** (1.0 / p))
    return total


def degree_purity(a: SphereFunction, degree: int) -> float:
    """Fraction of spectral energy of ``a`` in harmonic degree ``degree``."""
    energy = np.abs(a.coeffs) ** 2
    total = energy.sum()
    if total == 0:
        return 1.0
    return float(energy[a.degrees == degree].sum() / total)
