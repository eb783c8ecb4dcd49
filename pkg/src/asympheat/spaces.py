"""Asymptotic functions, weighted norms, the cutoff and the N* rule.

An asymptotic function on R^d is stored as

    v(x) = chi(|x|) * sum_{k=n}^{N*} a_k(x/|x|) / |x|^k + f(x)

where the ``a_k`` are band-limited sphere functions (:class:`AsymptoticChart`),
``f`` is sampled on a centred box (:class:`RemainderField`) and ``chi`` is a
radial switch from 0 (``r <= 1``) to 1 (``r >= 2``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import expit

from .sphere import SphereFunction, harmonic_basis, sphere_sobolev_norm

__all__ = [
    "SphereFunction",
    "AsymptoticChart",
    "RemainderField",
    "AsymptoticFunction",
    "CutoffSpec",
    "NormSpec",
    "n_star",
    "cutoff_eval",
    "chart_samples",
    "eval_asymptotic",
    "japanese",
    "weight_multiply",
    "fd_derivative",
    "lp_norm",
    "weighted_norm",
    "asymptotic_norm",
    "weight_inequality_check",
    "default_gamma0",
]

MAX_NORM_ORDER = 4


def n_star(N: int, d: int, p: float) -> int:
    """Integer ``N*`` with ``N - 1 < N* - d/p <= N``."""
    if N < 0 or d < 1 or not p > 1:
        raise ValueError(f"need N >= 0, d >= 1, p > 1; got N={N}, d={d}, p={p}")
    ratio = Fraction(d) / Fraction(p).limit_denominator(10**9)
    return int(math.floor(N + ratio))


# --------------------------------------------------------------------------- cutoff


@dataclass(frozen=True)
class CutoffSpec:
    """Radial switch, 0 for ``r <= r0`` and 1 for ``r >= r1``.

    ``polynomial_smoothstep`` is the C^3 septic ``s^4(35-84s+70s^2-20s^3)``;
    ``smooth_bump`` is the C-infinity logistic of ``1/s - 1/(1-s)``.
    """

    kind: str = "polynomial_smoothstep"
    r0: float = 1.0
    r1: float = 2.0

    def __post_init__(self):
        if self.kind not in ("polynomial_smoothstep", "smooth_bump"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if not self.r1 > self.r0 >= 0:
            raise ValueError("cutoff needs r1 > r0 >= 0")

    def __call__(self, r, derivative: int = 0):
        return cutoff_eval(self, r, derivative)


def _smoothstep(s, derivative):
    if derivative == 0:
        return s**4 * (35 - 84 * s + 70 * s**2 - 20 * s**3)
    if derivative == 1:
        return 140 * s**3 * (1 - s) ** 3
    if derivative == 2:
        return 420 * s**2 * (1 - s) ** 2 * (1 - 2 * s)
    if derivative == 3:
        return 840 * s * (1 - s) * (1 - 5 * s + 5 * s**2)
    raise ValueError("smoothstep derivatives available up to order 3")


def _bump(s, derivative):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        phi = 1 / s - 1 / (1 - s)
        chi = expit(-phi)
        if derivative == 0:
            return chi
        dphi = -1 / s**2 - 1 / (1 - s) ** 2
        g = chi * (1 - chi)
        if derivative == 1:
            return -g * dphi
        if derivative == 2:
            ddphi = 2 / s**3 - 2 / (1 - s) ** 3
            dg = -g * dphi * (1 - 2 * chi)
            return -dg * dphi - g * ddphi
    raise ValueError("smooth_bump derivatives available up to order 2")


def cutoff_eval(spec: CutoffSpec, r, derivative: int = 0):
    """Value (or radial derivative) of the cutoff at radii ``r``."""
    r = np.asarray(r, dtype=float)
    width = spec.r1 - spec.r0
    s = (r - spec.r0) / width
    inside = (s > 0) & (s < 1)
    out = np.zeros_like(r)
    if derivative == 0:
        out[s >= 1] = 1.0
    fn = _smoothstep if spec.kind == "polynomial_smoothstep" else _bump
    if np.any(inside):
        out[inside] = fn(s[inside], derivative) / width**derivative
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------- data


@dataclass(frozen=True)
class RemainderField:
    """Samples of a function on a box centred at the origin.

    Node ``i`` along each axis sits at ``origin + i * spacing`` with
    ``origin = -(n - 1) * spacing / 2``.
    """

    d: int
    shape: tuple
    spacing: float
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != self.d:
            raise ValueError(f"shape {shape} does not match dimension {self.d}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        arr = np.asarray(self.data)
        if arr.size != math.prod(shape):
            raise ValueError(
                f"data has {arr.size} samples, shape {shape} needs {math.prod(shape)}"
            )
        arr = arr.reshape(shape)
        if not np.iscomplexobj(arr):
            arr = arr.astype(float, copy=False)
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite samples in remainder field")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "data", arr)

    @classmethod
    def box(cls, d: int, n: int, half_width: float, data=None) -> "RemainderField":
        """Field on ``[-half_width, half_width]^d`` with ``n`` nodes per axis."""
        h = 2 * half_width / (n - 1)
        shape = (n,) * d
        return cls(d, shape, h, np.zeros(shape) if data is None else data)

    @property
    def origin(self) -> tuple:
        return tuple(-(n - 1) * self.spacing / 2 for n in self.shape)

    @property
    def half_width(self) -> float:
        return (max(self.shape) - 1) * self.spacing / 2

    def axes(self) -> list:
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.shape)]

    def mesh(self) -> list:
        return np.meshgrid(*self.axes(), indexing="ij")

    def radius(self) -> np.ndarray:
        return _radius(self.d, self.shape, self.spacing)

    def like(self, data) -> "RemainderField":
        return RemainderField(self.d, self.shape, self.spacing, data)

    def zeros_like(self) -> "RemainderField":
        return self.like(np.zeros(self.shape))

    def same_grid(self, other: "RemainderField") -> bool:
        return self.d == other.d and self.shape == other.shape and self.spacing == other.spacing

    def __add__(self, other):
        _check_grid(self, other)
        return self.like(self.data + other.data)

    def __sub__(self, other):
        _check_grid(self, other)
        return self.like(self.data - other.data)

    def __mul__(self, scalar):
        return self.like(self.data * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.data)


def _check_grid(a: RemainderField, b: RemainderField):
    if not a.same_grid(b):
        raise ValueError("remainder fields live on different grids")


@lru_cache(maxsize=8)
def _radius(d, shape, h):
    axes = [-(n - 1) * h / 2 + h * np.arange(n) for n in shape]
    r2 = np.zeros(shape)
    for j, ax in enumerate(axes):
        r2 = r2 + (ax**2).reshape([-1 if i == j else 1 for i in range(d)])
    r = np.sqrt(r2)
    r.setflags(write=False)
    return r


@dataclass(frozen=True)
class AsymptoticChart:
    """Far-field coefficients ``a_k`` for ``k = n .. N_star``.

    ``p`` is the integrability exponent that fixes ``N_star`` through
    :func:`n_star`; it may be ``None`` when only the chart values matter, in
    which case ``N_star`` just has to be at least ``N``.
    """

    d: int
    n: int
    N: int
    N_star: int
    coeffs: tuple
    p: float | None = None

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        if self.n < 0:
            raise ValueError(f"chart.n must be >= 0, got {self.n}")
        if self.N < self.n:
            raise ValueError(f"chart.N must be >= n={self.n}, got {self.N}")
        if self.p is not None and self.N_star != n_star(self.N, self.d, self.p):
            raise ValueError(
                f"chart.N_star={self.N_star} inconsistent with N={self.N}, "
                f"d={self.d}, p={self.p} (expected {n_star(self.N, self.d, self.p)})"
            )
        if self.N_star < self.N:
            raise ValueError("chart.N_star must be >= N")
        if len(coeffs) != self.N_star - self.n + 1:
            raise ValueError(
                f"chart needs {self.N_star - self.n + 1} coefficients, got {len(coeffs)}"
            )
        L = {c.L_max for c in coeffs}
        if len(L) > 1 or any(c.d != self.d for c in coeffs):
            raise ValueError("chart coefficients must share d and L_max")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, d, n, N, L_max, p=None, N_star=None) -> "AsymptoticChart":
        Ns = n_star(N, d, p) if N_star is None else N_star
        return cls(d, n, N, Ns, [SphereFunction.zeros(d, L_max)] * (Ns - n + 1), p)

    @property
    def L_max(self) -> int:
        return self.coeffs[0].L_max

    @property
    def ks(self) -> range:
        return range(self.n, self.N_star + 1)

    def __getitem__(self, k: int) -> SphereFunction:
        """Coefficient ``a_k``; zero outside ``n .. N_star``."""
        if self.n <= k <= self.N_star:
            return self.coeffs[k - self.n]
        return SphereFunction.zeros(self.d, self.L_max)

    def reg_ladder(self, m: int) -> dict:
        """Nominal sphere regularity ``m + 1 + N* - k`` for every ``k``."""
        return {k: m + 1 + self.N_star - k for k in self.ks}

    def with_coeffs(self, coeffs) -> "AsymptoticChart":
        return AsymptoticChart(self.d, self.n, self.N, self.N_star, coeffs, self.p)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __add__(self, other):
        return self.with_coeffs([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        return self.with_coeffs([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __mul__(self, scalar):
        return self.with_coeffs([a * scalar for a in self.coeffs])

    __rmul__ = __mul__


@dataclass(frozen=True)
class AsymptoticFunction:
    chart: AsymptoticChart
    remainder: RemainderField
    cutoff: CutoffSpec = CutoffSpec()

    def __post_init__(self):
        if self.chart.d != self.remainder.d:
            raise ValueError("chart and remainder dimensions differ")

    @property
    def d(self) -> int:
        return self.chart.d

    def __add__(self, other):
        return AsymptoticFunction(self.chart + other.chart, self.remainder + other.remainder, self.cutoff)

    def __sub__(self, other):
        return AsymptoticFunction(self.chart - other.chart, self.remainder - other.remainder, self.cutoff)

    def __mul__(self, scalar):
        return AsymptoticFunction(self.chart * scalar, self.remainder * scalar, self.cutoff)

    __rmul__ = __mul__

    def samples(self) -> np.ndarray:
        """Full function ``chi * chart + f`` on the remainder grid."""
        return chart_samples(self.chart, self.cutoff, self.remainder) + self.remainder.data


@dataclass(frozen=True)
class NormSpec:
    """Selects a norm family and its parameters.

    ``delta`` is the weight (H/W families) and is ignored by the asymptotic
    family, whose remainder weight is the chart order ``N``.
    """

    family: str = "H_weighted"
    m: int = 0
    p: float = 2.0
    delta: float = 0.0
    n: int | None = None
    N: int | None = None
    N_star: int | None = None
    gamma0: float | None = None

    def __post_init__(self):
        if self.family not in ("H_weighted", "W_weighted", "A_asymptotic", "sphere_Sobolev"):
            raise ValueError(f"unknown norm family {self.family!r}")
        if self.m < 0:
            raise ValueError("norm order m must be >= 0")
        if not 1 < self.p < math.inf:
            raise ValueError("norm exponent p must lie in (1, inf)")


def default_gamma0(d: int, p: float) -> float:
    """Default ``gamma0`` with ``0 < gamma0 + d/p < 1``, valid when ``p > d``."""
    return (1 - d / p) / 2


# --------------------------------------------------------------------------- evaluation


def _chart_sum(chart: AsymptoticChart, r: np.ndarray, u: np.ndarray) -> np.ndarray:
    B = harmonic_basis(chart.d, chart.L_max, u)
    total = np.zeros(len(r), dtype=np.result_type(*[c.coeffs for c in chart.coeffs], float))
    for k in chart.ks:
        a = chart[k]
        if not a.is_zero():
            total += (B @ a.coeffs) / r**k
    return total


def chart_samples(chart: AsymptoticChart, cutoff: CutoffSpec, grid: RemainderField,
                  chunk: int = 1 << 16) -> np.ndarray:
    """``chi(r) * sum_k a_k(theta) / r^k`` on the nodes of ``grid``."""
    r = grid.radius()
    dtype = np.result_type(*[c.coeffs for c in chart.coeffs], float)
    out = np.zeros(grid.shape, dtype=dtype)
    if chart.is_zero():
        return out
    chi = cutoff(r)
    idx = np.flatnonzero(chi > 0)
    coords = [m.ravel() for m in grid.mesh()]
    flat = out.reshape(-1)
    for start in range(0, len(idx), chunk):
        sel = idx[start:start + chunk]
        rs = r.reshape(-1)[sel]
        u = np.stack([c[sel] for c in coords], axis=1) / rs[:, None]
        flat[sel] = chi.reshape(-1)[sel] * _chart_sum(chart, rs, u)
    return out


def eval_asymptotic(v: AsymptoticFunction, x) -> np.ndarray:
    """Evaluate ``v`` at points ``x`` (shape ``(npts, d)`` or ``(d,)``).

    The remainder is interpolated multilinearly and contributes 0 outside its box.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    r = np.linalg.norm(x, axis=1)
    chi = v.cutoff(r)
    val = np.zeros(len(r), dtype=np.result_type(v.remainder.data, *[c.coeffs for c in v.chart.coeffs]))
    far = chi > 0
    if np.any(far):
        val[far] = chi[far] * _chart_sum(v.chart, r[far], x[far] / r[far, None])
    interp = RegularGridInterpolator(
        v.remainder.axes(), v.remainder.data, method="linear", bounds_error=False, fill_value=0.0
    )
    val = val + interp(x)
    return val[0] if single else val


# --------------------------------------------------------------------------- norms


def japanese(r) -> np.ndarray:
    """``<x> = (1 + |x|^2)^(1/2)`` from ``|x|``."""
    return np.sqrt(1.0 + np.asarray(r, dtype=float) ** 2)


def weight_multiply(f: RemainderField, delta: float) -> RemainderField:
    """``J_delta f = <x>^delta f`` on the same grid."""
    return f.like(japanese(f.radius()) ** delta * f.data)


def _fornberg(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the ``m``-th derivative at ``z`` from nodes ``x``."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=32)
def _diff_matrix(n: int, order: int, accuracy: int = 4) -> np.ndarray:
    """Dense ``order``-th derivative matrix on unit spacing, one-sided near the ends."""
    half = (order + 1) // 2 - 1 + accuracy // 2
    width = 2 * half + 1
    onesided = order + accuracy
    if n < max(width, onesided):
        raise ValueError(f"grid of {n} points too small for a derivative of order {order}")
    D = np.zeros((n, n))
    centre = _fornberg(0.0, np.arange(-half, half + 1, dtype=float), order)
    for i in range(n):
        if half <= i < n - half:
            D[i, i - half:i + half + 1] = centre
        elif i < half:
            nodes = np.arange(onesided, dtype=float)
            D[i, :onesided] = _fornberg(float(i), nodes, order)
        else:
            nodes = np.arange(n - onesided, n, dtype=float)
            D[i, n - onesided:] = _fornberg(float(i), nodes, order)
    D.setflags(write=False)
    return D


def fd_derivative(data: np.ndarray, spacing: float, alpha) -> np.ndarray:
    """Fourth-order finite-difference ``d^alpha`` of gridded ``data``."""
    out = data
    for axis, order in enumerate(alpha):
        if order == 0:
            continue
        D = _diff_matrix(data.shape[axis], int(order)) / spacing**order
        out = np.moveaxis(np.tensordot(D, np.moveaxis(out, axis, 0), axes=(1, 0)), 0, axis)
    return out


def _trapezoid_weights(f: RemainderField) -> np.ndarray:
    w = np.ones(f.shape)
    for axis, n in enumerate(f.shape):
        w1 = np.full(n, f.spacing)
        w1[[0, -1]] *= 0.5
        w = w * w1.reshape([-1 if i == axis else 1 for i in range(f.d)])
    return w


def lp_norm(f: RemainderField, p: float) -> float:
    """Trapezoid-rule ``L^p`` norm of the samples."""
    return float(np.sum(_trapezoid_weights(f) * np.abs(f.data) ** p) ** (1.0 / p))


def _multi_indices(d: int, m: int):
    for order in range(m + 1):
        for alpha in itertools.product(range(order + 1), repeat=d):
            if sum(alpha) == order:
                yield alpha


def weighted_norm(f: RemainderField, spec: NormSpec) -> float:
    """``sum_{|alpha| <= m} || <x>^w d^alpha f ||_{L^p}`` with ``w = delta`` (H) or ``delta + |alpha|`` (W)."""
    if spec.family not in ("H_weighted", "W_weighted"):
        raise ValueError(f"weighted_norm does not handle family {spec.family!r}")
    if spec.m > MAX_NORM_ORDER:
        raise ValueError(f"norm order m={spec.m} exceeds the stencil table limit {MAX_NORM_ORDER}")
    if not np.all(np.isfinite(f.data)):
        raise ValueError("non-finite samples")
    jr = japanese(f.radius())
    w = _trapezoid_weights(f)
    total = 0.0
    for alpha in _multi_indices(f.d, spec.m):
        deriv = fd_derivative(f.data, f.spacing, alpha)
        power = spec.delta + (sum(alpha) if spec.family == "W_weighted" else 0)
        total += float(np.sum(w * np.abs(jr**power * deriv) ** spec.p) ** (1.0 / spec.p))
    return total


def asymptotic_norm(v: AsymptoticFunction, spec: NormSpec) -> float:
    """Chart sphere norms on the regularity ladder plus the remainder ``H^{m,p}_N`` norm."""
    if spec.family != "A_asymptotic":
        raise ValueError("asymptotic_norm needs family 'A_asymptotic'")
    chart = v.chart
    ladder = chart.reg_ladder(spec.m)
    total = sum(sphere_sobolev_norm(chart[k], ladder[k], spec.p) for k in chart.ks)
    rem = NormSpec("H_weighted", spec.m, spec.p, float(chart.N))
    return total + weighted_norm(v.remainder, rem)


def weight_inequality_check(delta: float, x, y) -> float:
    """Max of ``<x>^delta <y>^-delta / <x-y>^|delta|`` over the sample pairs."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    jx = japanese(np.linalg.norm(x, axis=1))
    jy = japanese(np.linalg.norm(y, axis=1))
    jxy = japanese(np.linalg.norm(x - y, axis=1))
    return float(np.max((jx / jy) ** delta / jxy ** abs(delta)))
