"""Acceptance checks shared by the test suite and the ``verify`` subcommand.

Each check builds its own data from a seed, runs the primary path (and the
oracle where one applies), times itself against a budget and returns a
:class:`CheckResult`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import heatflow as hf
from . import oracle
from . import resolvent as rs
from . import semilinear as sl
from .spaces import (
    AsymptoticChart,
    AsymptoticFunction,
    CutoffSpec,
    NormSpec,
    RemainderField,
    n_star,
)
from .sphere import SphereFunction, degree_purity, mode_count

__all__ = ["CheckResult", "CRITERIA", "run_criterion", "run_all", "trivial_suite"]


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    metrics: dict
    runtime: float
    budget: float
    notes: list = field(default_factory=list)

    @property
    def within_budget(self) -> bool:
        return self.runtime < self.budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name} ({self.runtime:.1f}s / {self.budget:.0f}s)"

    def to_dict(self) -> dict:
        return {
            "criterion": self.number,
            "name": self.name,
            "passed": self.passed,
            "runtime_s": self.runtime,
            "budget_s": self.budget,
            "metrics": self.metrics,
            "notes": self.notes,
        }


def _random_chart(rng, d, n, N, p, L, scale=1.0) -> AsymptoticChart:
    Ns = n_star(N, d, p)
    nm = mode_count(d, L)
    return AsymptoticChart(d, n, N, Ns, [SphereFunction(d, L, scale * rng.normal(size=nm))
                                         for _ in range(n, Ns + 1)], p)


def _timed(number, name, budget, fn) -> CheckResult:
    t0 = time.perf_counter()
    passed, metrics, notes = fn()
    runtime = time.perf_counter() - t0
    ok = bool(passed) and runtime < budget
    if passed and not ok:
        notes = list(notes) + [f"runtime {runtime:.1f}s exceeds the {budget:.0f}s budget"]
    return CheckResult(number, name, ok, metrics, runtime, budget, list(notes))


# --------------------------------------------------------------------------- 1-6 heat flow


def criterion_1(seed: int = 0) -> CheckResult:
    """Leading coefficients frozen along the heat flow for random charts."""

    def run():
        rng = np.random.default_rng(seed)
        times = (0.1, 1.0, 10.0)
        drift = 0.0
        for _ in range(20):
            chart = _random_chart(rng, 3, 0, 3, 4.0, 4)
            drift = max(drift, hf.nonsmoothing_check(chart, times)["max_drift"])
        return drift == 0.0, {"max_drift": drift, "charts": 20, "times": list(times)}, []

    return _timed(1, "asymptotic non-smoothing", 10.0, run)


def criterion_2(seed: int = 0) -> CheckResult:
    """Polynomial coefficient flow against RK4, and the ``Y_20`` closed form."""

    def run():
        rng = np.random.default_rng(seed)
        err_rk4 = 0.0
        for _ in range(5):
            chart = _random_chart(rng, 3, 0, 4, 4.0, 4)
            flow = hf.evolve_coefficients(chart)
            for t in (0.5, 2.0):
                ref = oracle.rk4_coefficients(chart, t, steps=200)
                got = flow.at(t)
                for k in (2, 3, 4):
                    err_rk4 = max(err_rk4, float(np.max(np.abs(got[k].coeffs - ref[k]))))
        L = 2
        b0 = SphereFunction.mode(3, L, 2, 0)
        zero = SphereFunction.zeros(3, L)
        chart = AsymptoticChart(3, 0, 4, 4, [b0, zero, zero, zero, zero], 4.0)
        flow = hf.evolve_coefficients(chart)
        err_y20 = max(float(np.max(np.abs(flow.at(t)[4].coeffs - 12 * t**2 * b0.coeffs)))
                      for t in (0.1, 1.0, 3.0))
        ok = err_rk4 < 1e-10 and err_y20 < 1e-10
        return ok, {"rk4_max_error": err_rk4, "y20_max_error": err_y20}, []

    return _timed(2, "coefficient closed forms", 5.0, run)


def criterion_3() -> CheckResult:
    """Spectral heat flow of ``exp(-|x|^2/4)`` against its closed form."""

    def run():
        f = RemainderField.box(3, 128, 12.0)
        r2 = f.radius() ** 2
        out = hf.heat_apply(f.like(np.exp(-r2 / 4)), 1.0)
        exact = 0.5**1.5 * np.exp(-r2 / 8)
        err = float(np.max(np.abs(out.data - exact)))
        return err < 1e-8, {"max_error": err}, []

    return _timed(3, "Gaussian heat evolution", 60.0, run)


def _composition_input(seed):
    rng = np.random.default_rng(seed)
    f = RemainderField.box(2, 512, 20.0)
    x, y = f.mesh()
    g = f.like(np.exp(-((x - 0.5) ** 2 + y**2) / 2) * (1 + 0.3 * x))
    chart = _random_chart(rng, 2, 0, 2, 4.0, 4)
    return f, g, chart


def criterion_4(seed: int = 1) -> CheckResult:
    """``S(t1) S(t2) = S(t1 + t2)`` for chart-free and full inputs."""

    def run():
        f, g, chart = _composition_input(seed)
        free = AsymptoticFunction(AsymptoticChart.zeros(2, 0, 2, 4, 4.0), g)
        e_free = hf.semigroup_property_check(free, 0.25, 0.25)["error"]
        e_full = hf.semigroup_property_check(AsymptoticFunction(chart, g), 0.25, 0.25)["error"]
        ok = e_free < 1e-12 and e_full < 1e-6
        return ok, {"chart_free_error": e_free, "full_error": e_full}, []

    return _timed(4, "semigroup composition", 60.0, run)


def criterion_5(seed: int = 3) -> CheckResult:
    """Primary semigroup against direct Gaussian convolution on a full asymptotic input."""

    def run():
        rng = np.random.default_rng(seed)
        chart = _random_chart(rng, 2, 0, 3, 4.0, 4, scale=0.5)
        grid = RemainderField.box(2, 512, 20.0)
        x, y = grid.mesh()

        def gfn(p):
            return np.exp(-((p[:, 0] - 0.5) ** 2 + p[:, 1] ** 2) / 2) * (1 + 0.3 * p[:, 0])

        g = grid.like(gfn(np.stack([x.ravel(), y.ravel()], 1)).reshape(grid.shape))
        prim = hf.semigroup_apply(AsymptoticFunction(chart, g), 0.5).samples()
        ref = oracle.gaussian_convolve(oracle.asymptotic_direct(chart, gfn), 0.5, grid).data
        err = float(np.linalg.norm(prim - ref) / np.linalg.norm(ref))
        return err < 1e-3, {"relative_l2_error": err}, []

    return _timed(5, "oracle cross-validation", 120.0, run)


def criterion_6(seed: int = 0) -> CheckResult:
    """Large-time growth exponents and the small-time gradient rate."""

    def run():
        rng = np.random.default_rng(seed)
        times = [1.0, 2.0, 4.0, 8.0, 16.0]
        g = RemainderField.box(2, 513, 64.0)
        x, y = g.mesh()
        N, p = 2, 4.0
        Ns = n_star(N, 2, p)
        samples = [
            AsymptoticFunction(_random_chart(rng, 2, 0, N, p, 3),
                               g.like(np.exp(-((x - rng.normal()) ** 2 + y**2) / 2)))
            for _ in range(3)
        ]
        spec_a = NormSpec("A_asymptotic", 1, p, n=0, N=N, N_star=Ns)
        ga = hf.growth_bound_harness(samples, spec_a, times)
        bumps = [g.like(np.exp(-((x - c) ** 2 + y**2) / (2 * s * s))) for c, s in ((0, 1), (3, 0.5), (0, 3))]
        free = [AsymptoticFunction(AsymptoticChart.zeros(2, 0, N, Ns, p), b) for b in bumps]
        delta = 2.0
        gh = hf.growth_bound_harness(free, NormSpec("H_weighted", 1, 2.0, delta), times)
        g2 = RemainderField.box(2, 256, 6.4)
        x2, y2 = g2.mesh()
        waves = [g2.like(np.exp(-(x2**2 + y2**2) / 8) * np.cos(k * x2)) for k in np.geomspace(1, 40, 25)]
        gd = hf.derivative_estimate_harness(waves, np.geomspace(1e-3, 1e-1, 5))
        ok = ga["passed"] and gh["passed"] and 0.4 <= gd["rate"] <= 0.6
        metrics = {
            "asymptotic_exponent": ga["exponent"],
            "asymptotic_reference": ga["reference_exponent"],
            "weighted_exponent": gh["exponent"],
            "weighted_reference": gh["reference_exponent"],
            "gradient_rate": gd["rate"],
        }
        return ok, metrics, []

    return _timed(6, "growth exponents", 120.0, run)


# --------------------------------------------------------------------------- 7 resolvent


def criterion_7(seed: int = 0) -> CheckResult:
    """Hankel kernel vs closed form, resolvent identity, sampled sectorial ratio."""

    def run():
        rng = np.random.default_rng(seed)
        kerr = 0.0
        for _ in range(100):
            lam = np.exp(rng.uniform(-2, 4)) * np.exp(1j * rng.uniform(-3, 3))
            r = np.exp(rng.uniform(-3, 2))
            a = complex(rs.kernel_radial(r, lam, 3)[0])
            b = complex(rs.kernel_closed_form_3d(r, lam))
            kerr = max(kerr, abs(a - b) / abs(b))
        f = RemainderField.box(3, 48, 8.0)
        x, y, z = f.mesh()
        g = f.like(np.exp(-(x**2 + y**2 + z**2)) * (1 + 0.5 * x))
        ident = max(rs.resolvent_identity_residual(g, lam) for lam in (2.0, 2 + 1j, -1 + 3j))
        eps = 0.1
        pts = rs.sector_samples(50, rng, eps=eps)
        ratios = [rs.sectorial_ratio(g, pt) for pt in pts]
        bound = 1 / math.sin(eps / 2) ** 2
        ok = kerr < 1e-12 and ident < 1e-10 and np.isfinite(max(ratios)) and max(ratios) <= bound
        metrics = {
            "kernel_max_relative_error": kerr,
            "identity_residual": ident,
            "sectorial_ratio_max": float(max(ratios)),
            "sectorial_bound": bound,
        }
        return ok, metrics, []

    return _timed(7, "resolvent", 30.0, run)


# --------------------------------------------------------------------------- 8-11 semilinear


def gaussian_problem(n: int = 96, half_width: float = 8.5, psi_amp: float = 0.5) -> sl.SemilinearProblem:
    g = RemainderField.box(3, n, half_width)
    r = g.radius()
    x, y, z = g.mesh()
    phi = g.like(np.exp(-r**2 / 2) * (1 + 0.3 * x + 0.2 * y * z))
    psi = g.like(psi_amp * np.exp(-r**2 / 2))
    return sl.SemilinearProblem(phi, psi)


def criterion_8() -> CheckResult:
    """Equilibrium residual, monopole, eigenfunction purity and the sup bound at 96^3."""

    def run():
        g = RemainderField.box(3, 96, 8.5)
        r = g.radius()
        unit = g.like(np.exp(-r**2 / 2) / (2 * math.pi) ** 1.5)
        lin = sl.equilibrium_solve(sl.SemilinearProblem(unit, g.zeros_like()))
        a1 = float(lin.chart[1].coeffs[0] / math.sqrt(4 * math.pi))
        a1_err = abs(a1 * 4 * math.pi - 1)
        prob = gaussian_problem()
        eq = sl.equilibrium_solve(prob)
        chart_purity = min(v["purity"] for v in eq.purity.values())
        rho = g.like(-sl.nonlinearity(eq.u_star.samples(), prob))
        fit = sl.far_field_fit(rho)
        fit_purity, agreement = 1.0, 0.0
        for k in eq.chart.ks:
            a = eq.chart[k].coeffs
            fk = fit["coeffs"][k]
            fit_purity = min(fit_purity, degree_purity(fk, k - 1))
            agreement = max(agreement, float(np.linalg.norm(fk.coeffs[: len(a)] - a) / np.linalg.norm(a)))
        mp = sl.max_principle_checks(eq, prob)
        ok = (
            eq.residual <= 1e-8
            and lin.residual <= 1e-8
            and a1_err < 0.01
            and chart_purity >= 0.99
            and fit_purity >= 0.99
            and mp["bound_ok"]
        )
        metrics = {
            "residual": eq.residual,
            "newton_iterations": eq.iterations,
            "residual_history": eq.residual_history,
            "a1_relative_error": a1_err,
            "chart_purity_min": chart_purity,
            "far_field_purity_min": fit_purity,
            "far_field_agreement": agreement,
            "u_sup": mp["u_sup"],
            "inverse_laplacian_phi_sup": mp["inverse_laplacian_phi_sup"],
            "nested_balls_ok": all(b["ok"] for b in mp["balls"]),
        }
        return ok, metrics, []

    return _timed(8, "equilibrium", 300.0, run)


def criterion_9(seed: int = 0) -> CheckResult:
    """L^p monotonicity, frozen a_1 and a_2, and stationarity at the equilibrium."""

    def run():
        rng = np.random.default_rng(seed)
        prob = gaussian_problem(72, 8.5)
        g = prob.grid
        r = g.radius()
        x = g.mesh()[0]
        eq = sl.equilibrium_solve(prob)
        stay = sl.flow(eq.u_star, prob, 10.0, 0.1, reference=eq.u_star)
        distance = max(stay.monitors["distance"])
        chart = _random_chart(rng, 3, 1, 3, 4.0, 2, scale=0.3)
        v = AsymptoticFunction(chart, g.like(np.exp(-r**2 / 2) * (1 + 0.5 * x)), prob.cutoff)
        moving = sl.flow(v, prob, 2.0, 0.02)
        drift = max(max(moving.monitors["drift_a1"]), max(moving.monitors["drift_a2"]),
                    max(stay.monitors["drift_a1"]), max(stay.monitors["drift_a2"]))
        free = sl.SemilinearProblem(g.zeros_like(), prob.psi, cutoff=prob.cutoff)
        u0 = AsymptoticFunction(AsymptoticChart.zeros(3, 1, 3, 3, 4.0),
                                g.like(2 * np.exp(-r**2 / 2) * (1 + 0.5 * x)), prob.cutoff)
        mono = sl.flow(u0, free, 2.0, 0.05, p=prob.p)
        increase = float(np.max(np.diff(mono.monitors["lp_norm"])))
        ok = increase <= 1e-8 and drift == 0.0 and distance < 1e-6
        metrics = {
            "lp_max_increase": increase,
            "coefficient_drift": drift,
            "stationary_distance": distance,
        }
        return ok, metrics, []

    return _timed(9, "semilinear flow", 120.0, run)


def picard_problem(n: int = 384, half_width: float = 48.0, width: float = 6.0, amplitude: float = 0.5):
    g = RemainderField.box(2, n, half_width)
    r = g.radius()
    bump = np.exp(-r**2 / (2 * width**2))
    prob = sl.SemilinearProblem(g.zeros_like(), g.like(0.5 * bump))
    v = AsymptoticFunction(AsymptoticChart.zeros(2, 1, 2, 1, 4.0), g.like(amplitude * bump))
    return v, prob


def criterion_10() -> CheckResult:
    """Picard contraction factors scale like ``1/k`` in the ``e^{-kt}`` weighted norm."""

    def run():
        v, prob = picard_problem()
        factors = {}
        for k in (5, 10, 20):
            res = sl.picard_iterate(v, prob, 2.0, k, dt=0.02, max_iter=4)
            factors[k] = float(np.mean(res.factors[:3]))
        r1 = factors[5] / factors[10]
        r2 = factors[10] / factors[20]
        ok = abs(r1 / 2 - 1) <= 0.25 and abs(r2 / 2 - 1) <= 0.25
        return ok, {"factors": {str(k): f for k, f in factors.items()}, "ratio_5_10": r1, "ratio_10_20": r2}, []

    return _timed(10, "Picard contraction", 60.0, run)


def criterion_11(seed: int = 11) -> CheckResult:
    """Radial base is degenerate; perturbed problems have nonvanishing a_1..a_3."""

    def run():
        g = RemainderField.box(3, 72, 8.5)
        r = g.radius()
        prob = sl.SemilinearProblem(g.like(np.exp(-r**2 / 2)), g.like(0.5 * np.exp(-r**2 / 2)))
        out = sl.genericity_sweep(prob, 100, 0.1, np.random.default_rng(seed))
        ok = set(out["base_vanishing"]) >= {2, 3} and out["fraction_nonvanishing"] >= 0.95
        metrics = {
            "base_norms": {str(k): v for k, v in out["base_norms"].items()},
            "base_vanishing": out["base_vanishing"],
            "fraction_nonvanishing": out["fraction_nonvanishing"],
            "max_residual": max(rec["residual"] for rec in out["records"]),
        }
        return ok, metrics, []

    return _timed(11, "genericity", 300.0, run)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_criterion(number: int) -> CheckResult:
    return CRITERIA[number]()


def run_all(numbers=None, echo=None) -> list:
    out = []
    for k in numbers or sorted(CRITERIA):
        res = run_criterion(k)
        if echo:
            echo(res.line())
        out.append(res)
    return out


# --------------------------------------------------------------------------- trivial suite


def trivial_suite() -> list:
    """Identity and zero cases that hold exactly."""
    checks = []
    f = RemainderField.box(2, 32, 4.0)
    r = f.radius()
    g = f.like(np.exp(-(r**2)))
    checks.append(("heat_apply at t=0 is the identity", bool(np.array_equal(hf.heat_apply(g, 0.0).data, g.data))))
    zero = AsymptoticFunction(AsymptoticChart.zeros(2, 0, 2, 4, 4.0), f.zeros_like())
    checks.append(("S(t) 0 = 0", bool(not np.any(hf.semigroup_apply(zero, 1.0).remainder.data))))
    chart = AsymptoticChart.zeros(3, 0, 3, 2, 4.0)
    checks.append(("zero chart stays zero", hf.evolve_coefficients(chart).at(5.0).is_zero()))
    checks.append(("nonsmoothing drift of zero chart", hf.nonsmoothing_check(chart, [1.0])["max_drift"] == 0.0))
    g3 = RemainderField.box(3, 33, 4.0)
    prob = sl.SemilinearProblem(g3.zeros_like(), g3.zeros_like(), cutoff=CutoffSpec(r0=0.5, r1=1.0))
    eq = sl.equilibrium_solve(prob)
    checks.append(("phi = 0 gives u* = 0", eq.iterations == 0 and not np.any(eq.u_star.samples())))
    res = rs.resolvent_identity_residual(g, 2.0)
    checks.append(("resolvent identity on a Gaussian", res < 1e-10))
    return [{"name": n, "passed": bool(p)} for n, p in checks]
