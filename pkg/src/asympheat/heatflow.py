"""Heat semigroup on asymptotic functions.

For ``v = chi * sum_k b_k / r^k + g`` the solution of ``u_t = Delta u`` keeps the
same form, ``chi * sum_k a_k(t) / r^k + f(t)``, with

* ``a_n``, ``a_{n+1}`` constant and
  ``da_k/dt = (Delta_theta + (k-2)(k-d)) a_{k-2}`` otherwise, so every
  ``a_k`` is a polynomial in ``t``;
* ``f_t = Delta f + h(t)``, where ``h`` collects the two chart terms whose
  Laplacian falls outside the chart and the commutator of ``Delta`` with ``chi``.

The remainder is propagated by the Fourier multiplier ``exp(-z |xi|^2)`` on the
periodised box and the forced part by Duhamel's formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from .spaces import (
    AsymptoticChart,
    AsymptoticFunction,
    CutoffSpec,
    NormSpec,
    RemainderField,
    asymptotic_norm,
    japanese,
    lp_norm,
    n_star,
    weighted_norm,
)
from .sphere import SphereFunction, eigenvalues, harmonic_basis

__all__ = [
    "ComplexTime",
    "CoefficientFlow",
    "DuhamelSource",
    "chart_operator",
    "evolve_coefficients",
    "assemble_source",
    "radial_harmonic_fields",
    "wavenumber_squared",
    "heat_apply",
    "spectral_laplacian",
    "duhamel_integral",
    "semigroup_apply",
    "generator_apply",
    "nonsmoothing_check",
    "semigroup_property_check",
    "growth_bound_harness",
    "derivative_estimate_harness",
    "fit_exponent",
]

MAX_SOURCE_SPACING = 0.25


@dataclass(frozen=True)
class ComplexTime:
    """Time ``z`` in the closed subsector ``|arg z| <= pi/2 - eps`` (or ``z = 0``)."""

    z: complex
    eps: float = 0.0

    def __post_init__(self):
        z = complex(self.z)
        if z != 0:
            if z.real <= 0:
                raise ValueError(f"complex time needs Re z > 0, got {z}")
            if abs(np.angle(z)) > np.pi / 2 - self.eps + 1e-15:
                raise ValueError(f"|arg z| exceeds pi/2 - eps for z={z}, eps={self.eps}")
        object.__setattr__(self, "z", z)


def _as_time(z):
    if isinstance(z, ComplexTime):
        z = z.z
    if isinstance(z, complex) or np.iscomplexobj(z):
        z = complex(z)
        if z.imag == 0:
            z = z.real
    else:
        z = float(z)
    if z != 0 and (np.real(z) <= 0):
        raise ValueError(f"time must satisfy Re z > 0 (or z = 0), got {z}")
    return z


# --------------------------------------------------------------------------- chart flow


def chart_operator(a: SphereFunction, k: int) -> SphereFunction:
    """``L_k a = Delta_theta a + (k-2)(k-d) a``, the radial Laplacian shift of ``a / r^(k-2)``."""
    lam = -eigenvalues(a.d, a.L_max) + (k - 2) * (k - a.d)
    return a.with_coeffs(lam * a.coeffs)


@dataclass(frozen=True)
class CoefficientFlow:
    """``a_k(t) = sum_j poly[k][j] t^j`` for ``k = n .. N_star``."""

    chart: AsymptoticChart
    poly: dict = field(repr=False)

    def degree(self, k: int) -> int:
        return len(self.poly[k]) - 1

    def at(self, z) -> AsymptoticChart:
        z = _as_time(z)
        coeffs = []
        for k in self.chart.ks:
            terms = self.poly[k]
            acc = terms[-1].coeffs
            for c in reversed(terms[:-1]):  # Horner
                acc = acc * z + c.coeffs
            coeffs.append(terms[0].with_coeffs(acc))
        return self.chart.with_coeffs(coeffs)


def evolve_coefficients(chart: AsymptoticChart, d: int | None = None) -> CoefficientFlow:
    """Exact polynomial-in-time coefficients of the heat flow of ``chart``."""
    if d is not None and d != chart.d:
        raise ValueError("dimension mismatch")
    poly = {}
    for k in chart.ks:
        terms = [chart[k]]
        if k >= chart.n + 2:
            for j, c in enumerate(poly[k - 2]):
                terms.append(chart_operator(c, k) * (1.0 / (j + 1)))
        poly[k] = terms
    return CoefficientFlow(chart, poly)


# --------------------------------------------------------------------------- source


def radial_harmonic_fields(grid: RemainderField, L_max: int, terms, r_min: float = 0.0,
                           chunk: int = 1 << 15) -> np.ndarray:
    """Evaluate ``sum_q w_q(r) * c_q(theta)`` into output slots on the grid nodes.

    ``terms`` is a list of ``(slot, coeff_vector, radial_function)``; only nodes with
    ``r > r_min`` are visited.  Returns an array of shape ``(nslots, *grid.shape)``.
    """
    nslots = 1 + max((t[0] for t in terms), default=-1)
    dtype = np.result_type(float, *[t[1] for t in terms])
    out = np.zeros((nslots,) + grid.shape, dtype=dtype)
    if not terms:
        return out
    r = grid.radius().reshape(-1)
    idx = np.flatnonzero(r > r_min)
    C = np.stack([np.asarray(t[1]) for t in terms], axis=1)
    coords = [m.reshape(-1) for m in grid.mesh()]
    flat = out.reshape(nslots, -1)
    for start in range(0, len(idx), chunk):
        sel = idx[start:start + chunk]
        rs = r[sel]
        u = np.stack([c[sel] for c in coords], axis=1) / rs[:, None]
        angular = harmonic_basis(grid.d, L_max, u) @ C
        for q, (slot, _, radial) in enumerate(terms):
            flat[slot, sel] += radial(rs) * angular[:, q]
    return out


@dataclass(frozen=True)
class DuhamelSource:
    """``h(t) = sum_j fields[j] t^j`` on the remainder grid."""

    fields: tuple

    @property
    def degree(self) -> int:
        return len(self.fields) - 1

    def at(self, s) -> RemainderField:
        acc = self.fields[-1].data
        for f in reversed(self.fields[:-1]):
            acc = acc * s + f.data
        return self.fields[0].like(acc)

    def is_zero(self) -> bool:
        return all(not np.any(f.data) for f in self.fields)


def assemble_source(flow: CoefficientFlow, cutoff: CutoffSpec, grid: RemainderField) -> DuhamelSource:
    """Polynomial-in-time Duhamel source of the chart flow, sampled on ``grid``."""
    chart = flow.chart
    if grid.spacing > MAX_SOURCE_SPACING:
        raise ValueError(
            f"grid spacing {grid.spacing} too coarse to resolve the cutoff annulus "
            f"(needs <= {MAX_SOURCE_SPACING})"
        )
    d, Ns = chart.d, chart.N_star
    deg = max(flow.degree(k) for k in chart.ks)
    terms = []

    def chi_tail(power):
        return lambda r: cutoff(r) / r**power

    def grad_term(k):
        return lambda r: -2.0 * k * cutoff(r, 1) / r ** (k + 1)

    def lap_term(k):
        return lambda r: (cutoff(r, 2) + (d - 1) * cutoff(r, 1) / r) / r**k

    for j in range(deg + 1):
        for k in chart.ks:
            if j >= len(flow.poly[k]):
                continue
            c = flow.poly[k][j]
            if c.is_zero():
                continue
            if k >= Ns - 1:
                terms.append((j, chart_operator(c, k + 2).coeffs, chi_tail(k + 2)))
            terms.append((j, c.coeffs, grad_term(k)))
            terms.append((j, c.coeffs, lap_term(k)))
    vals = radial_harmonic_fields(grid, chart.L_max, terms, r_min=cutoff.r0)
    fields = [grid.like(vals[j]) if j < len(vals) else grid.zeros_like() for j in range(deg + 1)]
    return DuhamelSource(tuple(fields))


# --------------------------------------------------------------------------- spectral


@lru_cache(maxsize=8)
def wavenumber_squared(shape: tuple, spacing: float, real: bool = True) -> np.ndarray:
    """``|xi|^2`` on the (r)fft frequency grid of the periodised box."""
    d = len(shape)
    q = None
    for axis, n in enumerate(shape):
        if real and axis == d - 1:
            k = 2 * np.pi * scipy.fft.rfftfreq(n, spacing)
        else:
            k = 2 * np.pi * scipy.fft.fftfreq(n, spacing)
        k2 = (k**2).reshape([-1 if i == axis else 1 for i in range(d)])
        q = k2 if q is None else q + k2
    q = np.ascontiguousarray(np.broadcast_to(q, q.shape))
    q.setflags(write=False)
    return q


def _apply_multiplier(data: np.ndarray, spacing: float, mult) -> np.ndarray:
    """``ifft(mult(|xi|^2) * fft(data))``; real-to-real when both are real."""
    shape = data.shape
    if not np.iscomplexobj(data):
        q = wavenumber_squared(shape, spacing, True)
        m = mult(q)
        if not np.iscomplexobj(m):
            return scipy.fft.irfftn(m * scipy.fft.rfftn(data), s=shape)
    q = wavenumber_squared(shape, spacing, False)
    return scipy.fft.ifftn(mult(q) * scipy.fft.fftn(data))


def heat_apply(f: RemainderField, z) -> RemainderField:
    """Spectral heat flow ``exp(z Delta) f`` on the periodised box."""
    z = _as_time(z)
    if z == 0:
        return f
    return f.like(_apply_multiplier(f.data, f.spacing, lambda q: np.exp(-z * q)))


def spectral_laplacian(f: RemainderField) -> RemainderField:
    return f.like(_apply_multiplier(f.data, f.spacing, lambda q: -q))


def _phi_moments(a: np.ndarray, jmax: int) -> list:
    """``I_j(a) = int_0^1 exp(-a (1 - tau)) tau^j dtau`` for ``j = 0 .. jmax``."""
    a = np.asarray(a)
    small = np.abs(a) < 2.0
    out = []
    with np.errstate(divide="ignore", invalid="ignore"):
        prev = np.where(small, 0.0, -np.expm1(-a) / np.where(small, 1.0, a))
    for j in range(jmax + 1):
        if j > 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                prev = np.where(small, 0.0, (1.0 - j * prev) / np.where(small, 1.0, a))
        if np.any(small):
            asmall = a[small]
            # sum_n (-a)^n j! / (n + j + 1)!
            term = np.full(asmall.shape, 1.0 / (j + 1), dtype=asmall.dtype)
            acc = term.copy()
            for nn in range(1, 60):
                term = term * (-asmall) / (nn + j + 1)
                acc = acc + term
            prev = prev.astype(np.result_type(prev, acc))
            prev[small] = acc
        out.append(prev)
    return out


def _gauss_moments(a: np.ndarray, jmax: int, nodes: int) -> list:
    x, w = np.polynomial.legendre.leggauss(nodes)
    tau, w = (x + 1) / 2, w / 2
    out = [np.zeros(a.shape, dtype=np.result_type(a, float)) for _ in range(jmax + 1)]
    for ti, wi in zip(tau, w):
        e = wi * np.exp(-a * (1 - ti))
        for j in range(jmax + 1):
            out[j] = out[j] + e * ti**j
    return out


def duhamel_integral(h: DuhamelSource, t, nodes: int = 32, method: str = "exact") -> RemainderField:
    """``int_0^t S(t - s) h(s) ds`` along the straight path ``s = tau t``.

    ``method='gauss'`` applies Gauss-Legendre quadrature in ``tau`` mode by mode;
    ``method='exact'`` integrates the exponential-times-polynomial integrand in
    closed form.  Both evaluate every propagator spectrally.
    """
    t = _as_time(t)
    base = h.fields[0]
    if t == 0 or h.is_zero():
        return base.zeros_like()
    complex_path = isinstance(t, complex)
    real = not complex_path and not any(np.iscomplexobj(f.data) for f in h.fields)
    q = wavenumber_squared(base.shape, base.spacing, real)
    fft = scipy.fft.rfftn if real else scipy.fft.fftn
    a = t * q
    if method == "exact":
        moments = _phi_moments(a, h.degree)
    elif method == "gauss":
        moments = _gauss_moments(a, h.degree, nodes)
    else:
        raise ValueError(f"unknown Duhamel method {method!r}")
    acc = 0
    for j, f in enumerate(h.fields):
        if np.any(f.data):
            acc = acc + t ** (j + 1) * moments[j] * fft(f.data)
    if real:
        return base.like(scipy.fft.irfftn(acc, s=base.shape))
    return base.like(scipy.fft.ifftn(acc))


# --------------------------------------------------------------------------- semigroup


def semigroup_apply(v: AsymptoticFunction, z, nodes: int = 32, method: str = "exact") -> AsymptoticFunction:
    """``S(z) v``: exact chart flow, spectral remainder flow and the Duhamel correction."""
    z = _as_time(z)
    if z == 0:
        return v
    flow = evolve_coefficients(v.chart)
    rem = heat_apply(v.remainder, z)
    if not v.chart.is_zero():
        h = assemble_source(flow, v.cutoff, v.remainder)
        rem = rem + duhamel_integral(h, z, nodes=nodes, method=method)
    return AsymptoticFunction(flow.at(z), rem, v.cutoff)


def generator_apply(v: AsymptoticFunction) -> AsymptoticFunction:
    """``Lambda v``: chart shifted by two slots through ``L_k`` plus ``Delta f + h(0)``."""
    chart = v.chart
    coeffs = []
    for k in chart.ks:
        if k >= chart.n + 2:
            coeffs.append(chart_operator(chart[k - 2], k))
        else:
            coeffs.append(SphereFunction.zeros(chart.d, chart.L_max))
    rem = spectral_laplacian(v.remainder)
    if not chart.is_zero():
        rem = rem + assemble_source(evolve_coefficients(chart), v.cutoff, v.remainder).at(0.0)
    return AsymptoticFunction(chart.with_coeffs(coeffs), rem, v.cutoff)


# --------------------------------------------------------------------------- harnesses


def nonsmoothing_check(chart: AsymptoticChart, times) -> dict:
    """Drift of the two leading coefficients ``a_n``, ``a_{n+1}`` along the flow."""
    flow = evolve_coefficients(chart)
    drift = 0.0
    for t in times:
        at = flow.at(t)
        for k in (chart.n, chart.n + 1):
            if k <= chart.N_star:
                drift = max(drift, float(np.max(np.abs(at[k].coeffs - chart[k].coeffs))))
    return {"times": list(times), "max_drift": drift, "frozen": [chart.n, chart.n + 1], "passed": drift == 0.0}


def _combined_norm(v: AsymptoticFunction, spec: NormSpec) -> float:
    if spec.family == "A_asymptotic":
        return asymptotic_norm(v, spec)
    return weighted_norm(v.remainder, spec)


def semigroup_property_check(v: AsymptoticFunction, t1, t2, spec: NormSpec | None = None,
                             nodes: int = 32, method: str = "exact") -> dict:
    """``S(t1) S(t2) v`` against ``S(t1 + t2) v``: sup-norm errors of remainder and chart."""
    lhs = semigroup_apply(semigroup_apply(v, t2, nodes, method), t1, nodes, method)
    rhs = semigroup_apply(v, _as_time(t1) + _as_time(t2), nodes, method)
    rem_err = float(np.max(np.abs(lhs.remainder.data - rhs.remainder.data)))
    chart_err = max(
        (float(np.max(np.abs(lhs.chart[k].coeffs - rhs.chart[k].coeffs))) for k in v.chart.ks),
        default=0.0,
    )
    out = {"remainder_error": rem_err, "chart_error": chart_err, "error": max(rem_err, chart_err)}
    if spec is not None:
        out["norm_error"] = _combined_norm(lhs - rhs, spec)
    return out


def fit_exponent(times, values, tail: int | None = None) -> tuple:
    """Least-squares slope and constant of ``log values`` against ``log times``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if tail:
        t, y = t[-tail:], y[-tail:]
    slope, intercept = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope), float(np.exp(intercept))


def growth_bound_harness(samples, spec: NormSpec, times, tail: int = 4, eps: float = 0.0) -> dict:
    """Norm growth ``||S(t) v|| / ||v||`` and its fitted large-time exponent.

    For ``A_asymptotic`` samples the reference exponent is ``mu = (N + N* + 2)/2``;
    for remainder-only ``H_weighted`` samples it is ``|delta| / 2``.  ``eps > 0``
    rotates every time onto the ray ``arg z = pi/2 - eps``.
    """
    times = list(times)
    ratios = np.zeros((len(samples), len(times)))
    for i, v in enumerate(samples):
        nv = _combined_norm(v, spec)
        if nv == 0:
            raise ValueError("growth samples must be nonzero")
        for j, t in enumerate(times):
            z = t if eps == 0 else t * np.exp(1j * (np.pi / 2 - eps))
            ratios[i, j] = _combined_norm(semigroup_apply(v, z), spec) / nv
    worst = ratios.max(axis=0)
    slope, const = fit_exponent(times, worst, tail)
    if spec.family == "A_asymptotic":
        v0 = samples[0]
        bound = (v0.chart.N + v0.chart.N_star + 2) / 2
    else:
        bound = abs(spec.delta) / 2
    return {
        "times": times,
        "ratios": ratios.tolist(),
        "worst": worst.tolist(),
        "exponent": slope,
        "constant": const,
        "reference_exponent": bound,
        "passed": slope <= bound + 0.1,
    }


def derivative_estimate_harness(samples, times, delta: float = 0.0, p: float = 2.0,
                                axis: int = 0, eps: float | None = None) -> dict:
    """``sup_f ||d_j S(z) f||_{L^p_delta} / ||f||_{L^p_delta}`` over a sample family.

    The supremum over a rich enough family approximates the operator norm, whose
    small-time behaviour follows ``|z|^(-1/2)``.  With ``eps`` the times are put on
    the ray ``arg z = pi/2 - eps``.  Derivatives are spectral.
    """
    times = list(times)
    ratios = np.zeros((len(samples), len(times)))
    for i, f in enumerate(samples):
        wt = japanese(f.radius()) ** delta
        nf = lp_norm(f.like(wt * f.data), p)
        d = f.d
        shape = f.shape
        k = 2 * np.pi * scipy.fft.fftfreq(shape[axis], f.spacing)
        kx = k.reshape([-1 if a == axis else 1 for a in range(d)])
        q = wavenumber_squared(shape, f.spacing, False)
        fh = scipy.fft.fftn(f.data)
        for j, t in enumerate(times):
            z = t if eps is None else t * np.exp(1j * (np.pi / 2 - eps))
            g = scipy.fft.ifftn(1j * kx * np.exp(-z * q) * fh)
            if eps is None:
                g = g.real
            ratios[i, j] = lp_norm(f.like(wt * np.abs(g)), p) / nf
    worst = ratios.max(axis=0)
    slope, const = fit_exponent(times, worst)
    scaled = worst * np.sqrt(np.asarray(times)) * (1 + np.asarray(times)) ** (-abs(delta) / 2)
    return {
        "times": times,
        "worst": worst.tolist(),
        "rate": -slope,
        "constant": const,
        "scaled_max": float(scaled.max()),
        "scaled_min": float(scaled.min()),
    }
