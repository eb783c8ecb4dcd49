"""Brute-force reference computations.

Nothing here calls the differentiation, transform or harmonic code of the other
modules: charts are evaluated through ``scipy.special`` spherical harmonics,
derivatives by explicit stencils, convolutions by direct quadrature.  Only the
plain data containers from :mod:`asympheat.spaces` are shared.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import sph_harm_y

from .spaces import AsymptoticChart, RemainderField

__all__ = [
    "septic_cutoff",
    "real_harmonic",
    "chart_direct",
    "asymptotic_direct",
    "graded_nodes",
    "gaussian_convolve",
    "newtonian_potential",
    "newtonian_at_points",
    "fd_laplacian",
    "fd_gradient",
    "l_delta_apply",
    "l_delta_conjugation_check",
    "rk4_coefficients",
    "fd_sphere_laplacian",
    "ball_potential",
]


def septic_cutoff(r):
    """0 below 1, 1 above 2, ``s^4 (35 - 84 s + 70 s^2 - 20 s^3)`` between."""
    s = np.clip(np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return s**4 * (35 - 84 * s + 70 * s**2 - 20 * s**3)


def real_harmonic(d: int, l: int, m: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal real harmonic of degree ``l`` at unit vectors ``x``.

    d=2: ``cos(l phi)/sqrt(pi)`` for ``m >= 0``, ``sin(l phi)/sqrt(pi)`` for ``m < 0``.
    d=3: ``sqrt(2) (-1)^m Re / Im Y_l^|m|`` from ``scipy.special.sph_harm_y``, which
    removes the Condon-Shortley phase.
    """
    x = np.atleast_2d(x)
    phi = np.arctan2(x[:, 1], x[:, 0])
    if d == 2:
        if l == 0:
            return np.full(len(x), 1 / math.sqrt(2 * math.pi))
        return (np.cos(l * phi) if m >= 0 else np.sin(l * phi)) / math.sqrt(math.pi)
    theta = np.arccos(np.clip(x[:, 2], -1, 1))
    Y = sph_harm_y(l, abs(m), theta, phi)
    if m == 0:
        return Y.real
    sign = (-1) ** m
    return math.sqrt(2) * sign * (Y.real if m > 0 else Y.imag)


def _modes(d: int, L: int):
    """``(flat index, l, m)`` in the documented coefficient ordering."""
    if d == 2:
        yield 0, 0, 0
        for l in range(1, L + 1):
            yield 2 * l - 1, l, 1
            yield 2 * l, l, -1
    else:
        for l in range(L + 1):
            for m in range(-l, l + 1):
                yield l * l + l + m, l, m


def chart_direct(chart: AsymptoticChart, x) -> np.ndarray:
    """``chi(|x|) sum_k a_k(x/|x|)/|x|^k`` term by term with the septic cutoff."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=1)
    chi = septic_cutoff(r)
    out = np.zeros(len(x))
    far = chi > 0
    if not np.any(far):
        return out
    u = x[far] / r[far, None]
    acc = np.zeros(far.sum())
    for k in chart.ks:
        c = chart[k].coeffs
        for idx, l, m in _modes(chart.d, chart.L_max):
            if c[idx] != 0:
                acc += c[idx] * real_harmonic(chart.d, l, m, u) / r[far] ** k
    out[far] = chi[far] * acc
    return out


def asymptotic_direct(chart: AsymptoticChart, remainder_fn):
    """Pointwise evaluator ``x -> chart_direct(chart, x) + remainder_fn(x)``."""

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return chart_direct(chart, x) + remainder_fn(x)

    return evaluate


# --------------------------------------------------------------------------- heat kernel


def graded_nodes(radius: float, fine: float = 0.25, coarse: float = 0.5, core: float = 3.0,
                 order: int = 10) -> tuple:
    """Composite Gauss-Legendre nodes on ``[-radius, radius]``, finer for ``|y| < core``."""
    edges = [0.0]
    while edges[-1] < core - 1e-12:
        edges.append(min(edges[-1] + fine, core))
    while edges[-1] < radius - 1e-12:
        edges.append(min(edges[-1] + coarse, radius))
    edges = np.array(edges)
    edges = np.concatenate([-edges[:0:-1], edges])
    g, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append((a + b) / 2 + (b - a) / 2 * g)
        weights.append((b - a) / 2 * w)
    return np.concatenate(nodes), np.concatenate(weights)


def gaussian_convolve(v_eval, t: float, grid: RemainderField, mass_tol: float = 1e-12,
                      **node_opts) -> RemainderField:
    """``(4 pi t)^{-d/2} int exp(-|x-y|^2/(4t)) v(y) dy`` at the nodes of ``grid``.

    The source integral runs over a cube that extends the target box by the
    radius outside which the one-dimensional kernel mass is below ``mass_tol``.
    The Gaussian factorises, so the d-dimensional sum is a chain of
    one-dimensional kernel matrices applied to samples of ``v`` on the tensor
    product of graded Gauss-Legendre nodes.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    reach = math.sqrt(4 * t * -math.log(mass_tol))
    y, w = graded_nodes(grid.half_width + reach, **node_opts)
    axes = grid.axes()
    mats = [
        np.exp(-((ax[:, None] - y[None, :]) ** 2) / (4 * t)) * w[None, :] / math.sqrt(4 * math.pi * t)
        for ax in axes
    ]
    d = grid.d
    ny = len(y)
    if d == 2:
        Y1, Y2 = np.meshgrid(y, y, indexing="ij")
        V = v_eval(np.stack([Y1.ravel(), Y2.ravel()], axis=1)).reshape(ny, ny)
        out = mats[0] @ V @ mats[1].T
    elif d == 3:
        out = np.zeros((len(axes[0]), ny, ny))
        Y2, Y3 = np.meshgrid(y, y, indexing="ij")
        plane = np.stack([Y2.ravel(), Y3.ravel()], axis=1)
        # contract the first axis slab by slab to keep memory bounded
        for a in range(ny):
            pts = np.column_stack([np.full(len(plane), y[a]), plane])
            out += mats[0][:, a, None, None] * v_eval(pts).reshape(ny, ny)[None]
        out = np.einsum("ibc,jb,kc->ijk", out, mats[1], mats[2], optimize=True)
    else:
        raise ValueError("gaussian_convolve supports d = 2, 3")
    return grid.like(out)


# --------------------------------------------------------------------------- Newtonian potential

# Punctured trapezoid correction for int g(y)/|y| dy on the unit cubic lattice.
_LATTICE_1_OVER_R = 2.8372974794806


def newtonian_potential(rho: RemainderField) -> RemainderField:
    """``-(1/4 pi) int rho(y) / |x - y| dy`` on the nodes of ``rho`` (d=3)."""
    if rho.d != 3:
        raise ValueError("newtonian_potential is three-dimensional")
    h = rho.spacing
    offs = [h * np.arange(-(n - 1), n) for n in rho.shape]
    X = np.meshgrid(*offs, indexing="ij", sparse=True)
    dist = np.sqrt(X[0] ** 2 + X[1] ** 2 + X[2] ** 2)
    with np.errstate(divide="ignore"):
        G = np.where(dist > 0, 1.0 / np.where(dist > 0, dist, 1.0), 0.0) * h**3
    G[tuple(n - 1 for n in rho.shape)] = _LATTICE_1_OVER_R * h**2
    return rho.like(-fftconvolve(rho.data, G, mode="valid") / (4 * math.pi))


def newtonian_at_points(rho: RemainderField, points, chunk: int | None = None, cut: float = 1e-16) -> np.ndarray:
    """Direct sum of ``-(1/4 pi) h^3 sum rho(y_j)/|x - y_j|`` at targets away from the grid nodes."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coords = np.stack([m.ravel() for m in rho.mesh()], axis=1)
    vals = rho.data.ravel()
    keep = np.abs(vals) > cut * np.abs(vals).max() if np.any(vals) else np.zeros(len(vals), bool)
    coords, vals = coords[keep], vals[keep] * rho.spacing**rho.d
    out = np.empty(len(pts))
    chunk = chunk or max(1, 2_000_000 // max(len(vals), 1))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]
        d2 = (p**2).sum(1)[:, None] + (coords**2).sum(1)[None, :] - 2 * p @ coords.T
        out[s:s + chunk] = (vals[None, :] / np.sqrt(np.maximum(d2, 0.0))).sum(axis=1)
    return -out / (4 * math.pi)


def ball_potential(r, radius: float, mass: float) -> np.ndarray:
    """Potential ``Delta^{-1}`` of a uniform ball of total ``mass``."""
    r = np.asarray(r, dtype=float)
    inside = -mass / (8 * math.pi * radius**3) * (3 * radius**2 - r**2)
    with np.errstate(divide="ignore"):
        outside = -mass / (4 * math.pi * np.where(r > 0, r, 1.0))
    return np.where(r <= radius, inside, outside)


# --------------------------------------------------------------------------- stencils


def _shift(a: np.ndarray, axis: int, k: int) -> np.ndarray:
    """``a`` displaced by ``k`` nodes along ``axis`` with zeros beyond the box."""
    out = np.zeros_like(a)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k > 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def fd_laplacian(f: RemainderField, order: int = 2) -> RemainderField:
    """Centred-stencil Laplacian (order 2 or 4), zero extension outside the box."""
    a, h = f.data, f.spacing
    out = np.zeros_like(a)
    for ax in range(f.d):
        if order == 2:
            out += (_shift(a, ax, 1) - 2 * a + _shift(a, ax, -1)) / h**2
        elif order == 4:
            out += (-_shift(a, ax, 2) + 16 * _shift(a, ax, 1) - 30 * a
                    + 16 * _shift(a, ax, -1) - _shift(a, ax, -2)) / (12 * h**2)
        else:
            raise ValueError("order must be 2 or 4")
    return f.like(out)


def fd_gradient(f: RemainderField, order: int = 2) -> list:
    """Centred first derivatives along every axis (order 2 or 4)."""
    a, h = f.data, f.spacing
    if order == 2:
        return [(_shift(a, ax, 1) - _shift(a, ax, -1)) / (2 * h) for ax in range(f.d)]
    if order == 4:
        return [(-_shift(a, ax, 2) + 8 * _shift(a, ax, 1) - 8 * _shift(a, ax, -1) + _shift(a, ax, -2)) / (12 * h)
                for ax in range(f.d)]
    raise ValueError("order must be 2 or 4")


def l_delta_apply(f: RemainderField, delta: float, order: int = 4) -> RemainderField:
    """``L_delta f = Delta f - 2 delta <x>^-2 x.grad f + (delta(delta+2)|x|^2 <x>^-4 - delta d <x>^-2) f``."""
    X = f.mesh()
    r2 = sum(x * x for x in X)
    jx2 = 1 + r2
    grad = fd_gradient(f, order)
    xg = sum(x * g for x, g in zip(X, grad))
    lap = fd_laplacian(f, order).data
    pot = delta * (delta + 2) * r2 / jx2**2 - delta * f.d / jx2
    return f.like(lap - 2 * delta * xg / jx2 + pot * f.data)


def l_delta_conjugation_check(f: RemainderField, delta: float, interior: int = 2, order: int = 4) -> float:
    """Max residual of ``J_delta Delta J_-delta f - L_delta f`` away from the box edges.

    Both sides use centred stencils of the given order, so the residual is the
    consistency error ``O(h^order)`` of the two discretizations.
    """
    X = f.mesh()
    w = (1 + sum(x * x for x in X)) ** (delta / 2)
    lhs = w * fd_laplacian(f.like(f.data / w), order).data
    rhs = l_delta_apply(f, delta, order).data
    core = tuple(slice(interior, -interior) for _ in range(f.d))
    return float(np.max(np.abs(lhs - rhs)[core]))


# --------------------------------------------------------------------------- ODE and sphere


def _sphere_eigs(d: int, L: int) -> np.ndarray:
    return np.array([l * (l + d - 2) for _, l, _ in sorted(_modes(d, L))], dtype=float)


def rk4_coefficients(chart: AsymptoticChart, t: float, steps: int = 200) -> dict:
    """Classical RK4 for ``a_k' = (Delta_theta + (k-2)(k-d)) a_{k-2}`` (k >= n+2)."""
    lam = _sphere_eigs(chart.d, chart.L_max)
    ks = list(chart.ks)
    y0 = np.stack([chart[k].coeffs for k in ks])

    def rhs(y):
        out = np.zeros_like(y)
        for i, k in enumerate(ks):
            if k >= chart.n + 2:
                out[i] = (-lam + (k - 2) * (k - chart.d)) * y[i - 2]
        return out

    y, dt = y0.copy(), t / steps
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + dt / 2 * k1)
        k3 = rhs(y + dt / 2 * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return {k: y[i] for i, k in enumerate(ks)}


def fd_sphere_laplacian(fn, d: int, n: int = 200) -> tuple:
    """Finite-difference Laplace-Beltrami of the pointwise function ``fn`` on a (theta, phi) grid.

    Returns ``(grid_points, values)`` with ``grid_points`` unit vectors, away from the poles.
    """
    if d == 2:
        phi = 2 * np.pi * np.arange(n) / n
        h = phi[1] - phi[0]
        pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        v = fn(pts)
        return pts, (np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h**2
    theta = np.linspace(0.2, np.pi - 0.2, n)
    phi = np.linspace(0, 2 * np.pi, 2 * n, endpoint=False)
    ht, hp = theta[1] - theta[0], phi[1] - phi[0]
    T, P = np.meshgrid(theta, phi, indexing="ij")

    def on(T, P):
        pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
        return fn(pts.reshape(-1, 3)).reshape(T.shape)

    v = on(T, P)
    vp, vm = on(T + ht, P), on(T - ht, P)
    dtt = (vp - 2 * v + vm) / ht**2
    dt = (vp - vm) / (2 * ht)
    dpp = (np.roll(v, -1, axis=1) - 2 * v + np.roll(v, 1, axis=1)) / hp**2
    lap = dtt + np.cos(T) / np.sin(T) * dt + dpp / np.sin(T) ** 2
    pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    return pts.reshape(-1, 3), lap.ravel()
