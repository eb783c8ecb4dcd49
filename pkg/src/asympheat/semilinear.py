"""Semilinear heat flow ``u_t = Delta u + phi - psi u^3`` and its equilibria.

Solutions live in the ``n = 1`` subspace: ``u = chi * sum_{k=1}^{N*} a_k / r^k + f``.
Along the flow ``a_1`` and ``a_2`` are frozen and the higher coefficients follow
the same polynomial recursion as the linear heat flow; the remainder solves
``f_t = Delta f + h(t) + phi - psi u^3``.

At an equilibrium ``Delta u = psi u^3 - phi =: rho``.  The far-field
coefficients are the multipole moments of ``rho``,

    a_{l+1}(theta) = -1/(2l+1) sum_m Y_lm(theta) int rho(y) |y|^l Y_lm(y/|y|) dy,

each a degree-``l`` harmonic (``Delta_theta a_k = -k(k-1) a_k``), and the
remainder is the periodic inverse Laplacian of ``rho`` minus the Laplacian of
the cut-off chart, a source with vanishing low moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, gmres

from . import oracle
from .heatflow import (
    _phi_moments,
    assemble_source,
    evolve_coefficients,
    radial_harmonic_fields,
    wavenumber_squared,
)
from .spaces import (
    AsymptoticChart,
    AsymptoticFunction,
    CutoffSpec,
    RemainderField,
    lp_norm,
    n_star,
)
from .sphere import SphereFunction, degree_purity, harmonic_basis, mode_count, mode_degrees

__all__ = [
    "SemilinearProblem",
    "EquilibriumResult",
    "FlowResult",
    "PicardResult",
    "nonlinearity",
    "multipole_extract",
    "equilibrium_solve",
    "eigenfunction_check",
    "max_principle_checks",
    "far_field_fit",
    "semilinear_step",
    "flow",
    "picard_iterate",
    "genericity_sweep",
    "solid_harmonic_perturbation",
    "newton_linearization_check",
]

BLOWUP = 1e6


@dataclass(frozen=True)
class SemilinearProblem:
    """Data of ``u_t = Delta u + phi - psi u^3`` on a centred box."""

    phi: RemainderField
    psi: RemainderField
    N: int = 3
    p: float = 4.0
    tol: float = 1e-8
    max_newton: int = 50
    cutoff: CutoffSpec = CutoffSpec(r0=1.0, r1=4.0)
    boundary_tol: float = 1e-12

    def __post_init__(self):
        if not self.phi.same_grid(self.psi):
            raise ValueError("phi and psi must share a grid")
        if np.min(self.psi.data) < 0:
            raise ValueError("psi must be nonnegative")
        for name, f in (("phi", self.phi), ("psi", self.psi)):
            if _boundary_max(f) > self.boundary_tol * max(1.0, np.abs(f.data).max()):
                raise ValueError(f"{name} does not decay to the box boundary")

    @property
    def d(self) -> int:
        return self.phi.d

    @property
    def N_star(self) -> int:
        return n_star(self.N, self.d, self.p)

    @property
    def L_max(self) -> int:
        return max(self.N_star - 1, 0)

    @property
    def grid(self) -> RemainderField:
        return self.phi

    def with_phi(self, phi: RemainderField) -> "SemilinearProblem":
        return SemilinearProblem(phi, self.psi, self.N, self.p, self.tol, self.max_newton,
                                 self.cutoff, self.boundary_tol)


def _boundary_max(f: RemainderField) -> float:
    a = np.abs(f.data)
    m = 0.0
    for ax in range(f.d):
        m = max(m, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(m)


def nonlinearity(u: np.ndarray, prob: SemilinearProblem) -> np.ndarray:
    """``phi - psi u^3``."""
    return prob.phi.data - prob.psi.data * u**3


def _volume(f: RemainderField) -> float:
    return f.spacing**f.d


def _l2(f: RemainderField, data) -> float:
    return float(np.sqrt(np.sum(np.abs(data) ** 2) * _volume(f)))


# --------------------------------------------------------------------------- chart basis


class _ChartBasis:
    """Per-mode fields for charts whose ``a_k`` lies in degree ``k - 1``.

    ``field[i] = chi Y_i / r^k`` (chart), ``lap[i]`` its Laplacian (supported in the
    cutoff annulus), ``solid[i] = r^l Y_i`` for the moments.
    """

    def __init__(self, grid: RemainderField, N: int, p: float, cutoff: CutoffSpec):
        if grid.d != 3:
            raise ValueError("equilibrium machinery is three-dimensional")
        self.grid, self.cutoff = grid, cutoff
        self.N, self.p = N, p
        self.N_star = n_star(N, 3, p)
        self.L = self.N_star - 1
        self.degrees = mode_degrees(3, self.L)
        nm = mode_count(3, self.L)
        eye = np.eye(nm)
        terms_chart, terms_solid = [], []
        for i in range(nm):
            l = int(self.degrees[i])
            k = l + 1
            terms_chart.append((i, eye[i], lambda r, k=k: cutoff(r) / r**k))
            terms_solid.append((i, eye[i], lambda r, l=l: r**l))
        self.chart_fields = radial_harmonic_fields(grid, self.L, terms_chart, r_min=cutoff.r0)
        self.solid = radial_harmonic_fields(grid, self.L, terms_solid, r_min=0.0)
        centre = tuple(n // 2 for n in grid.shape)
        if all(n % 2 == 1 for n in grid.shape):
            # r^0 Y_00 at the origin node (skipped by r_min)
            self.solid[(0,) + centre] = 1 / math.sqrt(4 * math.pi)
        self.lap_fields = np.stack([self._mode_laplacian(i) for i in range(nm)])
        self.lap_sums = self.lap_fields.reshape(nm, -1).sum(axis=1) * _volume(grid)

    def _mode_laplacian(self, i: int) -> np.ndarray:
        chart = self.chart_from_vector(np.eye(len(self.degrees))[i])
        h = assemble_source(evolve_coefficients(chart), self.cutoff, self.grid)
        return h.at(0.0).data

    def chart_from_vector(self, c: np.ndarray) -> AsymptoticChart:
        coeffs = []
        for k in range(1, self.N_star + 1):
            mask = self.degrees == k - 1
            coeffs.append(SphereFunction(3, self.L, np.where(mask, c, 0.0)))
        return AsymptoticChart(3, 1, self.N, self.N_star, coeffs, self.p)

    def vector_from_chart(self, chart: AsymptoticChart) -> np.ndarray:
        c = np.zeros(len(self.degrees))
        for k in chart.ks:
            mask = self.degrees == k - 1
            c[mask] = chart[k].coeffs[mask]
        return c

    def samples(self, c: np.ndarray) -> np.ndarray:
        return np.tensordot(c, self.chart_fields, axes=(0, 0))

    def laplacian(self, c: np.ndarray) -> np.ndarray:
        return np.tensordot(c, self.lap_fields, axes=(0, 0))

    def moments(self, rho: np.ndarray) -> np.ndarray:
        """Chart vector of ``Delta^{-1} rho``; the monopole enforces a zero discrete mean."""
        vol = _volume(self.grid)
        raw = self.solid.reshape(len(self.degrees), -1) @ rho.reshape(-1) * vol
        c = -raw / (2 * self.degrees + 1)
        total = rho.sum() * vol
        c[0] = (total - self.lap_sums[1:] @ c[1:]) / self.lap_sums[0]
        return c


def multipole_extract(rho: RemainderField, N: int = 3, p: float = 4.0,
                      cutoff: CutoffSpec = CutoffSpec(r0=1.0, r1=4.0)) -> AsymptoticChart:
    """Far-field chart ``a_1 .. a_{N*}`` of ``Delta^{-1} rho`` from solid-harmonic moments."""
    basis = _ChartBasis(rho, N, p, cutoff)
    return basis.chart_from_vector(basis.moments(rho.data))


# --------------------------------------------------------------------------- equilibrium


@dataclass
class EquilibriumResult:
    u_star: AsymptoticFunction
    residual: float
    iterations: int
    chart: AsymptoticChart
    purity: dict
    residual_history: list = field(default_factory=list)
    converged: bool = True


def _boundary_mean(a: np.ndarray) -> float:
    faces = [np.take(a, i, axis=ax) for ax in range(a.ndim) for i in (0, -1)]
    return float(sum(f.sum() for f in faces) / sum(f.size for f in faces))


def _inverse_laplacian(grid: RemainderField, data: np.ndarray) -> np.ndarray:
    """Periodic ``Delta_h^{-1}`` of a zero-mean source, shifted to vanish on average at the box faces.

    The periodic inverse fixes the box mean to zero; the decaying free-space
    solution differs from it by a constant, removed here.
    """
    q = wavenumber_squared(grid.shape, grid.spacing, True)
    fh = scipy.fft.rfftn(data)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(q > 0, -fh / np.where(q > 0, q, 1.0), 0.0)
    f = scipy.fft.irfftn(out, s=grid.shape)
    return f - _boundary_mean(f)


def _laplacian(grid: RemainderField, data: np.ndarray) -> np.ndarray:
    q = wavenumber_squared(grid.shape, grid.spacing, True)
    return scipy.fft.irfftn(-q * scipy.fft.rfftn(data), s=grid.shape)


class _EquilibriumMap:
    """``T(c, f) = (M rho, Delta^{-1}(rho - S M rho))`` with ``rho = psi u^3 - phi``."""

    def __init__(self, prob: SemilinearProblem):
        self.prob = prob
        self.basis = _ChartBasis(prob.grid, prob.N, prob.p, prob.cutoff)
        self.nm = len(self.basis.degrees)
        self.shape = prob.grid.shape

    def split(self, x):
        return x[: self.nm], x[self.nm:].reshape(self.shape)

    def u(self, x) -> np.ndarray:
        c, f = self.split(x)
        return self.basis.samples(c) + f

    def linear(self, rho: np.ndarray) -> np.ndarray:
        c = self.basis.moments(rho)
        f = _inverse_laplacian(self.prob.grid, rho - self.basis.laplacian(c))
        return np.concatenate([c, f.ravel()])

    def rho(self, u: np.ndarray) -> np.ndarray:
        return -nonlinearity(u, self.prob)

    def residual_field(self, x) -> np.ndarray:
        c, f = self.split(x)
        u = self.u(x)
        return self.basis.laplacian(c) + _laplacian(self.prob.grid, f) - self.rho(u)


def equilibrium_solve(prob: SemilinearProblem, initial: AsymptoticFunction | None = None,
                      gmres_tol: float = 1e-8, _map: _EquilibriumMap | None = None) -> EquilibriumResult:
    """Damped Newton for ``Delta u - psi u^3 = -phi`` with GMRES inner solves."""
    emap = _map or _EquilibriumMap(prob)
    grid = prob.grid
    n = emap.nm + grid.data.size
    if initial is None:
        x = np.zeros(n)
    else:
        x = np.concatenate([emap.basis.vector_from_chart(initial.chart), initial.remainder.data.ravel()])

    def fixed_point_gap(x):
        return x - emap.linear(emap.rho(emap.u(x)))

    history = []
    g = fixed_point_gap(x)
    its = 0
    scale = max(1.0, float(np.abs(prob.phi.data).max()))
    converged = False
    for its in range(prob.max_newton + 1):
        res = _l2(grid, emap.residual_field(x))
        history.append(res)
        if np.max(np.abs(g)) < 1e-14 * scale and res <= prob.tol:
            converged = True
            break
        if its == prob.max_newton:
            break
        u = emap.u(x)
        w = 3 * prob.psi.data * u**2

        def matvec(dx, w=w):
            return dx - emap.linear(w * emap.u(dx))

        A = LinearOperator((n, n), matvec=matvec, dtype=float)
        dx, info = gmres(A, -g, rtol=gmres_tol, atol=0.0, restart=60, maxiter=20)
        step, gnorm = 1.0, np.linalg.norm(g)
        while True:
            xn = x + step * dx
            gn = fixed_point_gap(xn)
            if np.linalg.norm(gn) < gnorm or step < 1e-3:
                break
            step /= 2
        x, g = xn, gn
    c, f = emap.split(x)
    chart = emap.basis.chart_from_vector(c)
    u_star = AsymptoticFunction(chart, grid.like(f.copy()), prob.cutoff)
    return EquilibriumResult(
        u_star=u_star,
        residual=history[-1],
        iterations=its,
        chart=chart,
        purity=eigenfunction_check(chart),
        residual_history=history,
        converged=converged,
    )


def eigenfunction_check(chart: AsymptoticChart, threshold: float = 0.99) -> dict:
    """Fraction of the spectral mass of each ``a_k`` in degree ``k - 1``."""
    out = {}
    for k in chart.ks:
        a = chart[k]
        out[k] = {"purity": degree_purity(a, k - 1), "norm": float(np.linalg.norm(a.coeffs))}
        out[k]["flagged"] = out[k]["norm"] > 0 and out[k]["purity"] < threshold
    return out


def far_field_fit(rho: RemainderField, radii=(8.0, 16.0), n_radii: int = 9, n_dirs: int = 300,
                  L_fit: int = 5, K_fit: int = 6, seed: int = 0) -> dict:
    """Least-squares fit of the direct potential of ``rho`` by ``Y_lm(theta) / r^k``.

    The basis contains every degree ``l <= L_fit`` at every power ``k <= K_fit``, so
    the fitted ``a_k`` are free to leave the degree ``k - 1`` eigenspace.
    """
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    rs = np.linspace(radii[0], radii[1], n_radii)
    pts = np.concatenate([r * dirs for r in rs])
    rcol = np.repeat(rs, n_dirs)
    target = oracle.newtonian_at_points(rho, pts)
    Y = np.column_stack([
        oracle.real_harmonic(3, l, m, np.tile(dirs, (n_radii, 1)))
        for l in range(L_fit + 1) for m in range(-l, l + 1)
    ])
    cols = np.concatenate([Y / rcol[:, None] ** k for k in range(1, K_fit + 1)], axis=1)
    sol, *_ = np.linalg.lstsq(cols, target, rcond=None)
    nm = (L_fit + 1) ** 2
    fitted = {k: SphereFunction(3, L_fit, sol[(k - 1) * nm:k * nm]) for k in range(1, K_fit + 1)}
    resid = float(np.max(np.abs(cols @ sol - target)) / np.max(np.abs(target)))
    return {"coeffs": fitted, "relative_misfit": resid}


def max_principle_checks(result: EquilibriumResult, prob: SemilinearProblem,
                         radii=(2.0, 4.0, 6.0)) -> dict:
    """Sup-norm bound ``||u*|| <= 2 ||Delta^{-1} phi||`` and nested-ball maxima.

    With ``ft = Delta^{-1}(Delta u* - psi u*^3) = -Delta^{-1} phi`` the function
    ``z = u* - ft`` satisfies ``Delta z = psi u*^3``; the maximum principle gives
    ``max_{B_R} |z| <= max_{|x|=R} |u*| + max_{B_R} |ft|`` on every ball.
    """
    u = result.u_star.samples()
    pot = oracle.newtonian_potential(prob.phi).data
    u_sup, pot_sup = float(np.abs(u).max()), float(np.abs(pot).max())
    bound_ok = u_sup <= 2 * pot_sup + 1e-8
    r = prob.grid.radius()
    h = prob.grid.spacing
    ft = -pot
    z = u - ft
    balls = []
    for R in radii:
        inside = r <= R
        shell = np.abs(r - R) <= h
        lhs = float(np.abs(z[inside]).max())
        rhs = float(np.abs(u[shell]).max() + np.abs(ft[inside]).max())
        balls.append({"R": R, "lhs": lhs, "rhs": rhs, "ok": lhs <= rhs + 1e-8})
    return {
        "u_sup": u_sup,
        "inverse_laplacian_phi_sup": pot_sup,
        "ratio": u_sup / pot_sup if pot_sup > 0 else 0.0,
        "bound_ok": bool(bound_ok),
        "balls": balls,
        "passed": bool(bound_ok and all(b["ok"] for b in balls)),
    }


def newton_linearization_check(prob: SemilinearProblem, u: np.ndarray, w: np.ndarray,
                               eps=(1e-3, 1e-4)) -> dict:
    """Centred differences of ``F(u) = Delta_h u - psi u^3`` against ``Delta_h w - 3 psi u^2 w``."""
    grid = prob.grid

    def F(v):
        return _laplacian(grid, v) - prob.psi.data * v**3

    exact = _laplacian(grid, w) - 3 * prob.psi.data * u**2 * w
    errs = [float(np.max(np.abs((F(u + e * w) - F(u - e * w)) / (2 * e) - exact))) for e in eps]
    order = math.log(errs[0] / errs[1]) / math.log(eps[0] / eps[1]) if errs[1] > 0 else math.inf
    return {"eps": list(eps), "errors": errs, "order": order}


# --------------------------------------------------------------------------- flow


class _Stepper:
    """Exponential midpoint integrator with the chart flow and its source precomputed.

    The chart and the Duhamel source ``h`` are polynomials in the global time, so
    both are assembled once.  The linear part (heat flow plus ``h``) is integrated
    exactly; the nonlinearity uses ``phi_1`` weights at the predicted midpoint.
    """

    def __init__(self, v0: AsymptoticFunction, prob: SemilinearProblem, t0: float = 0.0):
        self.prob = prob
        self.grid = v0.remainder
        self.cutoff = v0.cutoff
        self.coeff_flow = evolve_coefficients(v0.chart)
        self.t0 = t0
        grid = self.grid
        deg = max(self.coeff_flow.degree(k) for k in v0.chart.ks)
        terms = []
        for k in v0.chart.ks:
            for j, c in enumerate(self.coeff_flow.poly[k]):
                if not c.is_zero():
                    terms.append((j, c.coeffs, lambda r, k=k: self.cutoff(r) / r**k))
        fields = radial_harmonic_fields(grid, v0.chart.L_max, terms, r_min=self.cutoff.r0)
        self.chart_poly = [fields[j] if j < len(fields) else np.zeros(grid.shape) for j in range(deg + 1)]
        if v0.chart.is_zero():
            self.h_hat = []
        else:
            h = assemble_source(self.coeff_flow, self.cutoff, grid)
            self.h_hat = [scipy.fft.rfftn(f.data) for f in h.fields]
        self.q = wavenumber_squared(grid.shape, grid.spacing, True)
        self._cache = {}

    def chart_at(self, t: float) -> AsymptoticChart:
        return self.coeff_flow.at(t - self.t0)

    def chart_samples(self, t: float) -> np.ndarray:
        s = t - self.t0
        acc = self.chart_poly[-1]
        for c in reversed(self.chart_poly[:-1]):
            acc = acc * s + c
        return acc

    def _weights(self, tau: float, jmax: int):
        key = (tau, jmax)
        if key not in self._cache:
            a = tau * self.q
            self._cache[key] = (np.exp(-a), _phi_moments(a, jmax))
        return self._cache[key]

    def _source_hat(self, t: float, tau: float, moments) -> np.ndarray:
        """Fourier transform of ``int_0^tau S(tau - s) h(t + s) ds``."""
        s0 = t - self.t0
        acc = 0
        deg = len(self.h_hat) - 1
        # h(s0 + sigma) = sum_i sigma^i sum_{j >= i} C(j, i) s0^(j-i) H_j
        for i in range(deg + 1):
            coef = 0
            for j in range(i, deg + 1):
                coef = coef + math.comb(j, i) * s0 ** (j - i) * self.h_hat[j]
            acc = acc + tau ** (i + 1) * moments[i] * coef
        return acc

    def step(self, f: np.ndarray, t: float, dt: float) -> np.ndarray:
        prob, shape = self.prob, self.grid.shape
        jmax = max(len(self.h_hat) - 1, 0)
        fh = scipy.fft.rfftn(f)
        nonlinear = prob is not None and (np.any(prob.phi.data) or np.any(prob.psi.data))
        e_full, m_full = self._weights(dt, jmax)
        lin_full = e_full * fh
        if self.h_hat:
            lin_full = lin_full + self._source_hat(t, dt, m_full)
        if not nonlinear:
            return scipy.fft.irfftn(lin_full, s=shape)
        e_half, m_half = self._weights(dt / 2, jmax)
        u0 = self.chart_samples(t) + f
        lin_half = e_half * fh
        if self.h_hat:
            lin_half = lin_half + self._source_hat(t, dt / 2, m_half)
        f_half = scipy.fft.irfftn(lin_half + dt / 2 * m_half[0] * scipy.fft.rfftn(nonlinearity(u0, prob)), s=shape)
        u_mid = self.chart_samples(t + dt / 2) + f_half
        return scipy.fft.irfftn(lin_full + dt * m_full[0] * scipy.fft.rfftn(nonlinearity(u_mid, prob)), s=shape)


def semilinear_step(u: AsymptoticFunction, dt: float, prob: SemilinearProblem | None) -> AsymptoticFunction:
    """One step of the semilinear flow from ``u``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if u.chart.n != 1 and prob is not None and u.d == 3:
        raise ValueError("semilinear states live in the n = 1 subspace")
    st = _Stepper(u, prob)
    f = st.step(u.remainder.data, 0.0, dt)
    out = AsymptoticFunction(st.chart_at(dt), u.remainder.like(f), u.cutoff)
    if np.abs(out.remainder.data).max() > BLOWUP:
        raise FloatingPointError("semilinear step exceeded the blow-up guard")
    return out


@dataclass
class FlowResult:
    times: list
    snapshots: list
    monitors: dict
    final: AsymptoticFunction


def flow(v: AsymptoticFunction, prob: SemilinearProblem | None, T: float, dt: float = 0.01,
         p: float = 4.0, delta: float = 0.0, snapshot_every: int = 0, reference: AsymptoticFunction | None = None) -> FlowResult:
    """Integrate to time ``T`` and record ``L^p_delta`` and sup norms and coefficient drift.

    With ``reference`` the sup-distance of the full samples to it is monitored too.
    """
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a positive multiple of dt")
    st = _Stepper(v, prob)
    grid = v.remainder
    wt = (1 + grid.radius() ** 2) ** (delta / 2)
    ref = reference.samples() if reference is not None else None
    f = v.remainder.data
    mon = {"t": [], "lp_norm": [], "sup_norm": [], "drift_a1": [], "drift_a2": []}
    if ref is not None:
        mon["distance"] = []
    snaps, times = [], []

    def record(t, f):
        u = st.chart_samples(t) + f
        chart = st.chart_at(t)
        mon["t"].append(t)
        mon["lp_norm"].append(lp_norm(grid.like(wt * u), p))
        mon["sup_norm"].append(float(np.abs(u).max()))
        for k, key in ((v.chart.n, "drift_a1"), (v.chart.n + 1, "drift_a2")):
            if k <= v.chart.N_star:
                mon[key].append(float(np.max(np.abs(chart[k].coeffs - v.chart[k].coeffs))))
            else:
                mon[key].append(0.0)
        if ref is not None:
            mon["distance"].append(float(np.abs(u - ref).max()))
        return u

    record(0.0, f)
    for i in range(1, steps + 1):
        t = (i - 1) * dt
        f = st.step(f, t, dt)
        if not np.all(np.isfinite(f)) or np.abs(f).max() > BLOWUP:
            raise FloatingPointError(f"flow exceeded the blow-up guard at t={t + dt}")
        record(i * dt, f)
        if snapshot_every and i % snapshot_every == 0:
            times.append(i * dt)
            snaps.append(AsymptoticFunction(st.chart_at(i * dt), grid.like(f.copy()), v.cutoff))
    final = AsymptoticFunction(st.chart_at(steps * dt), grid.like(f), v.cutoff)
    return FlowResult(times, snaps, mon, final)


# --------------------------------------------------------------------------- Picard


@dataclass
class PicardResult:
    times: np.ndarray
    iterates: list
    differences: list
    factors: list
    converged: bool


def picard_iterate(v: AsymptoticFunction, prob: SemilinearProblem, T: float, k_weight: float,
                   dt: float = 0.02, max_iter: int = 30, tol: float = 1e-13, keep: bool = False) -> PicardResult:
    """Picard iteration for the mild form ``u = S(t) v + int_0^t S(t-s) (phi - psi u^3) ds``.

    The Duhamel integral uses product integration with ``F`` linear between grid
    times (exact exponential weights).  Distances are ``sup_t e^{-k t} ||.||_inf``.
    """
    steps = int(round(T / dt))
    times = dt * np.arange(steps + 1)
    lin = _Stepper(v, None)
    grid = v.remainder
    shape = grid.shape
    base = [lin.chart_samples(0.0) + v.remainder.data]
    f = v.remainder.data
    for i in range(steps):
        f = lin.step(f, times[i], dt)
        base.append(lin.chart_samples(times[i + 1]) + f)
    base = np.stack(base)
    q = wavenumber_squared(shape, grid.spacing, True)
    e = np.exp(-dt * q)
    m0, m1 = _phi_moments(dt * q, 1)
    weight = np.exp(-k_weight * times)

    def Phi(u):
        F = [scipy.fft.rfftn(nonlinearity(u[i], prob)) for i in range(len(times))]
        out = np.empty_like(u)
        out[0] = base[0]
        acc = np.zeros_like(F[0])
        for i in range(steps):
            acc = e * acc + dt * (m0 * F[i] + m1 * (F[i + 1] - F[i]))
            out[i + 1] = base[i + 1] + scipy.fft.irfftn(acc, s=shape)
        return out

    u = base.copy()
    iterates = [u] if keep else []
    diffs, factors = [], []
    converged = False
    for _ in range(max_iter):
        un = Phi(u)
        dist = float(np.max(weight * np.abs(un - u).reshape(len(times), -1).max(axis=1)))
        diffs.append(dist)
        if len(diffs) > 1 and diffs[-2] > 0:
            factors.append(dist / diffs[-2])
        u = un
        if keep:
            iterates.append(u)
        if dist < tol:
            converged = True
            break
        if len(factors) >= 3 and all(fc > 1 for fc in factors[-3:]):
            raise FloatingPointError("Picard iteration diverges")
    if not keep:
        iterates = [u]
    return PicardResult(times, iterates, diffs, factors, converged)


# --------------------------------------------------------------------------- genericity


def _perturbation_basis(grid: RemainderField, L: int, width: float) -> np.ndarray:
    """Fields ``exp(-|x|^2 / (2 width^2)) (|x|/width)^l Y_lm`` for ``l <= L``."""
    coords = np.stack([m.ravel() for m in grid.mesh()], axis=1)
    rr = grid.radius().ravel()
    u = coords / np.where(rr > 0, rr, 1.0)[:, None]
    u[rr == 0] = [0.0, 0.0, 1.0]
    B = harmonic_basis(3, L, u)
    deg = mode_degrees(3, L)
    B *= (rr[:, None] / width) ** deg[None, :] * np.exp(-rr**2 / (2 * width**2))[:, None]
    return B.T.reshape((-1,) + grid.shape)


def solid_harmonic_perturbation(grid: RemainderField, rng: np.random.Generator, L: int = 3,
                                width: float = 1.0, basis: np.ndarray | None = None) -> np.ndarray:
    """``exp(-|x|^2 / (2 width^2)) sum_{l <= L, m} c_lm (|x|/width)^l Y_lm`` with normal ``c_lm``."""
    if basis is None:
        basis = _perturbation_basis(grid, L, width)
    c = rng.normal(size=basis.shape[0])
    return np.tensordot(c, basis, axes=(0, 0))


def genericity_sweep(prob: SemilinearProblem, trials: int, scale: float, rng: np.random.Generator,
                     threshold: float = 1e-8, k_max: int = 3, width: float = 1.0) -> dict:
    """Fraction of perturbed problems ``phi + scale * eta`` whose ``a_1 .. a_kmax`` are all nonzero.

    A coefficient counts as vanishing when its norm is at most ``threshold`` times
    the norm of ``a_1`` of the same equilibrium.
    """
    emap = _EquilibriumMap(prob)
    base = equilibrium_solve(prob, _map=emap)
    norms0 = {k: float(np.linalg.norm(base.chart[k].coeffs)) for k in range(1, k_max + 1)}
    a1 = max(norms0[1], 1e-300)
    base_vanishing = [k for k in range(1, k_max + 1) if norms0[k] <= threshold * a1]
    ok = 0
    records = []
    basis = _perturbation_basis(prob.grid, k_max, width)
    for _ in range(trials):
        eta = solid_harmonic_perturbation(prob.grid, rng, basis=basis)
        pert = prob.with_phi(prob.phi.like(prob.phi.data + scale * eta))
        emap.prob = pert
        res = equilibrium_solve(pert, initial=base.u_star, _map=emap)
        norms = {k: float(np.linalg.norm(res.chart[k].coeffs)) for k in range(1, k_max + 1)}
        nz = all(norms[k] > threshold * max(norms[1], 1e-300) for k in norms)
        ok += nz
        records.append({"norms": norms, "nonvanishing": nz, "residual": res.residual})
    emap.prob = prob
    return {
        "base_norms": norms0,
        "base_vanishing": base_vanishing,
        "trials": trials,
        "scale": scale,
        "fraction_nonvanishing": ok / trials if trials else 1.0,
        "records": records,
    }
