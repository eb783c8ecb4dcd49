import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asympheat import heatflow as hf
from asympheat import oracle
from asympheat.spaces import (
    AsymptoticChart,
    AsymptoticFunction,
    CutoffSpec,
    NormSpec,
    RemainderField,
    n_star,
)
from asympheat.sphere import SphereFunction, sphere_sobolev_norm

from conftest import gaussian_field, random_chart


def _chart(d, n, N, p, L, entries):
    """Chart with the given ``{k: SphereFunction}`` entries and zeros elsewhere."""
    Ns = n_star(N, d, p)
    z = SphereFunction.zeros(d, L)
    return AsymptoticChart(d, n, N, Ns, [entries.get(k, z) for k in range(n, Ns + 1)], p)


# --------------------------------------------------------------------------- coefficient flow


def test_a2_of_dipole():
    y10 = SphereFunction.mode(3, 2, 1, 0)
    flow = hf.evolve_coefficients(_chart(3, 0, 2, 4.0, 2, {0: y10}))
    for t in (0.3, 2.0):
        assert np.array_equal(flow.at(t)[2].coeffs, -2 * t * y10.coeffs)


def test_constant_b0_leaves_a2():
    b0 = SphereFunction.constant(3, 2, 1.0)
    b2 = SphereFunction.mode(3, 2, 2, 1, 0.4)
    flow = hf.evolve_coefficients(_chart(3, 0, 2, 4.0, 2, {0: b0, 2: b2}))
    for t in (0.1, 1.0, 7.0):
        assert np.max(np.abs(flow.at(t)[2].coeffs - b2.coeffs)) == 0


def test_a4_of_quadrupole():
    y20 = SphereFunction.mode(3, 2, 2, 0)
    flow = hf.evolve_coefficients(_chart(3, 0, 4, 4.0, 2, {0: y20}))
    for t in (0.1, 1.0, 3.0):
        assert np.max(np.abs(flow.at(t)[4].coeffs - 12 * t**2 * y20.coeffs)) < 1e-12


@given(st.integers(2, 3), st.integers(0, 2), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_polynomial_degree_bound(d, n, extra, seed):
    chart = random_chart(np.random.default_rng(seed), d, n, n + extra, 4.0, 3)
    flow = hf.evolve_coefficients(chart)
    for k in chart.ks:
        assert flow.degree(k) <= k // 2
        assert flow.degree(k) <= (k - n) // 2
    for k in (n, n + 1):
        if k <= chart.N_star:
            assert flow.degree(k) == 0


@pytest.mark.parametrize("d,n", [(2, 0), (3, 0), (3, 1)])
def test_flow_matches_rk4(d, n):
    chart = random_chart(np.random.default_rng(d + n), d, n, 5, 4.0, 4)
    flow = hf.evolve_coefficients(chart)
    for t in (0.5, 1.5):
        ref = oracle.rk4_coefficients(chart, t, steps=200)
        for k in chart.ks:
            assert np.max(np.abs(flow.at(t)[k].coeffs - ref[k])) < 1e-10 * (1 + np.max(np.abs(ref[k])))


def test_complex_time_coefficients_are_polynomials():
    chart = random_chart(np.random.default_rng(0), 3, 0, 4, 4.0, 3)
    flow = hf.evolve_coefficients(chart)
    z = 0.7 + 0.4j
    for k in chart.ks:
        direct = sum(c.coeffs * z**j for j, c in enumerate(flow.poly[k]))
        assert np.allclose(flow.at(z)[k].coeffs, direct, rtol=1e-14, atol=1e-14)


# --------------------------------------------------------------------------- non-smoothing


def test_nonsmoothing_drift_is_exactly_zero(rng):
    for _ in range(10):
        chart = random_chart(rng, 3, 0, 3, 4.0, 4)
        rep = hf.nonsmoothing_check(chart, (0.1, 1.0, 10.0))
        assert rep["max_drift"] == 0.0 and rep["passed"]


def test_nonsmoothing_shifted_subspace(rng):
    chart = random_chart(rng, 3, 1, 4, 4.0, 3)
    rep = hf.nonsmoothing_check(chart, (0.1, 1.0, 10.0))
    assert rep["frozen"] == [1, 2] and rep["max_drift"] == 0.0


def test_higher_coefficients_drift():
    b0 = SphereFunction.mode(3, 2, 1, 1)
    flow = hf.evolve_coefficients(_chart(3, 0, 2, 4.0, 2, {0: b0}))
    assert not np.array_equal(flow.at(1.0)[2].coeffs, flow.at(0.0)[2].coeffs)


# --------------------------------------------------------------------------- source


def test_source_of_zero_chart_is_zero():
    g = RemainderField.box(3, 25, 3.0)
    chart = AsymptoticChart.zeros(3, 0, 3, 2, 4.0)
    h = hf.assemble_source(hf.evolve_coefficients(chart), CutoffSpec(), g)
    assert h.is_zero()


def test_source_single_top_coefficient():
    # d=3, N*=1: h = chi-tail Delta(a/r) + annulus terms; a constant a is harmonic
    # so only the annulus survives, a dipole adds -2 Y_10 / r^3 outside r=2
    g = RemainderField.box(3, 41, 5.0)
    r = g.radius()
    cut = CutoffSpec()
    const = _chart(3, 0, 1, 4.0, 1, {1: SphereFunction.constant(3, 1, 1.0)})
    assert const.N_star == 1
    h = hf.assemble_source(hf.evolve_coefficients(const), cut, g).at(0.0).data
    assert np.all(h[r <= 1] == 0) and np.max(np.abs(h[r >= 2])) == 0
    chi1, chi2 = cut(r, 1), cut(r, 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.where(r > 1, -2 * chi1 / r**2 + (chi2 + 2 * chi1 / r) / r, 0.0)
    assert np.max(np.abs(h - direct)) < 1e-12
    y10 = SphereFunction.mode(3, 1, 1, 0)
    dip = _chart(3, 0, 1, 4.0, 1, {1: y10})
    h = hf.assemble_source(hf.evolve_coefficients(dip), cut, g).at(0.0).data
    z = g.mesh()[2]
    far = r >= 2
    tail = -2 * math.sqrt(3 / (4 * math.pi)) * z[far] / r[far] / r[far] ** 3
    assert np.all(h[r <= 1] == 0)
    assert np.max(np.abs(h[far] - tail)) < 1e-14


def test_source_degree_generic():
    chart = random_chart(np.random.default_rng(3), 3, 0, 4, 4.0, 3)
    h = hf.assemble_source(hf.evolve_coefficients(chart), CutoffSpec(), RemainderField.box(3, 25, 3.0))
    assert h.degree == chart.N_star // 2 == 2


def test_source_rejects_coarse_grid():
    chart = random_chart(np.random.default_rng(3), 2, 0, 2, 4.0, 2)
    with pytest.raises(ValueError, match="annulus"):
        hf.assemble_source(hf.evolve_coefficients(chart), CutoffSpec(), RemainderField.box(2, 21, 5.0))


# --------------------------------------------------------------------------- heat multiplier


def test_gaussian_self_similarity():
    f = RemainderField.box(3, 64, 12.0)
    r2 = f.radius() ** 2
    out = hf.heat_apply(f.like(np.exp(-r2 / 4)), 1.0)
    assert np.max(np.abs(out.data - 0.5**1.5 * np.exp(-r2 / 8))) < 1e-8


def test_heat_identity_and_errors():
    f = gaussian_field(2, 64, 8.0)
    assert np.array_equal(hf.heat_apply(f, 0.0).data, f.data)
    with pytest.raises(ValueError):
        hf.heat_apply(f, -0.1)
    with pytest.raises(ValueError):
        hf.heat_apply(f, -1 + 1j)


@given(st.floats(0.01, 5.0), st.integers(0, 2**32 - 1))
def test_mass_sup_and_positivity(t, seed):
    rng = np.random.default_rng(seed)
    g = RemainderField.box(2, 64, 10.0)
    X = g.mesh()
    c = rng.uniform(-2, 2, size=(3, 2))
    data = sum(np.exp(-((X[0] - a) ** 2 + (X[1] - b) ** 2)) for a, b in c)
    f = g.like(data)
    out = hf.heat_apply(f, t)
    assert abs(out.data.sum() - data.sum()) <= 1e-12 * data.sum()
    assert out.data.max() <= data.max() + 1e-10
    assert out.data.min() >= -1e-10


def test_complex_time_is_analytic():
    f = gaussian_field(2, 64, 8.0, width=1.2)
    z, h = 0.3 + 0.2j, 1e-6
    cstep = (hf.heat_apply(f, z + 1j * h).data - hf.heat_apply(f, z - 1j * h).data) / (2j * h)
    deriv = hf.spectral_laplacian(hf.heat_apply(f, z)).data
    assert np.max(np.abs(cstep - deriv)) < 1e-10 * np.max(np.abs(deriv)) * 1e3


# --------------------------------------------------------------------------- Duhamel


def test_duhamel_zero_source():
    g = RemainderField.box(2, 16, 4.0)
    h = hf.DuhamelSource((g.zeros_like(),))
    assert not np.any(hf.duhamel_integral(h, 1.3).data)


@pytest.mark.parametrize("method", ["exact", "gauss"])
def test_duhamel_single_mode(method):
    n, hw = 64, 5.0
    g = RemainderField.box(2, n, hw)
    period = n * g.spacing
    xi = 2 * math.pi * 3 / period
    x = g.mesh()[0]
    phi = g.like(np.cos(xi * x))
    t = 0.8
    out = hf.duhamel_integral(hf.DuhamelSource((phi,)), t, method=method)
    exact = phi.data * (1 - math.exp(-t * xi**2)) / xi**2
    assert np.max(np.abs(out.data - exact)) < 1e-13


def test_duhamel_quadrature_converges():
    chart = random_chart(np.random.default_rng(8), 2, 0, 4, 4.0, 3)
    g = RemainderField.box(2, 128, 12.0)
    h = hf.assemble_source(hf.evolve_coefficients(chart), CutoffSpec(), g)
    a = hf.duhamel_integral(h, 0.5, nodes=32, method="gauss").data
    b = hf.duhamel_integral(h, 0.5, nodes=64, method="gauss").data
    c = hf.duhamel_integral(h, 0.5, method="exact").data
    # 32 nodes leave ~1.3e-10 in the highest grid modes (t |xi|^2 ~ 140); 64 nodes resolve them
    assert np.max(np.abs(a - b)) < 2e-10
    assert np.max(np.abs(b - c)) < 1e-13


# --------------------------------------------------------------------------- semigroup


def test_semigroup_zero_time_and_chart_free():
    f = gaussian_field(2, 128, 10.0, shift=0.4)
    v = AsymptoticFunction(random_chart(np.random.default_rng(1), 2, 0, 2, 4.0, 3), f)
    assert hf.semigroup_apply(v, 0.0) is v
    free = AsymptoticFunction(AsymptoticChart.zeros(2, 0, 2, 3, 4.0), f)
    out = hf.semigroup_apply(free, 0.7)
    assert np.array_equal(out.remainder.data, hf.heat_apply(f, 0.7).data)
    assert out.chart.is_zero()


def test_semigroup_against_direct_convolution():
    rng = np.random.default_rng(2)
    chart = random_chart(rng, 2, 0, 2, 4.0, 3, scale=0.5)
    grid = RemainderField.box(2, 256, 12.0)

    def gfn(p):
        return np.exp(-np.sum(p**2, 1) / 2)

    x, y = grid.mesh()
    g = grid.like(gfn(np.stack([x.ravel(), y.ravel()], 1)).reshape(grid.shape))
    prim = hf.semigroup_apply(AsymptoticFunction(chart, g), 0.5).samples()
    ref = oracle.gaussian_convolve(oracle.asymptotic_direct(chart, gfn), 0.5, grid).data
    assert np.linalg.norm(prim - ref) / np.linalg.norm(ref) < 1e-3


def test_semigroup_composition():
    rng = np.random.default_rng(4)
    f = gaussian_field(2, 256, 12.0, shift=0.5)
    free = AsymptoticFunction(AsymptoticChart.zeros(2, 0, 2, 3, 4.0), f)
    assert hf.semigroup_property_check(free, 0.25, 0.25)["error"] < 1e-12
    full = AsymptoticFunction(random_chart(rng, 2, 0, 2, 4.0, 3), f)
    assert hf.semigroup_property_check(full, 0.25, 0.25)["error"] < 1e-6
    rep = hf.semigroup_property_check(full, 0.4, 0.0)
    assert rep["error"] == 0.0


def test_complex_semigroup_composition():
    rng = np.random.default_rng(6)
    f = gaussian_field(2, 256, 12.0, shift=0.5)
    full = AsymptoticFunction(random_chart(rng, 2, 0, 2, 4.0, 3), f)
    z1, z2 = 0.2 + 0.1j, 0.15 - 0.05j
    assert hf.semigroup_property_check(full, z1, z2)["error"] < 1e-6


# --------------------------------------------------------------------------- generator


def test_generator_of_constant_b0():
    g = RemainderField.box(2, 129, 8.0)
    chart = _chart(2, 0, 2, 4.0, 2, {0: SphereFunction.constant(2, 2, 1.0)})
    v = AsymptoticFunction(chart, g.zeros_like())
    out = hf.generator_apply(v)
    assert out.chart.is_zero()
    h0 = hf.assemble_source(hf.evolve_coefficients(chart), v.cutoff, g).at(0.0)
    assert np.array_equal(out.remainder.data, h0.data)
    r = g.radius()
    assert np.all(out.remainder.data[(r < 1) | (r > 2)] == 0)


def test_generator_of_gaussian():
    f = gaussian_field(3, 48, 8.0)
    v = AsymptoticFunction(AsymptoticChart.zeros(3, 0, 2, 2, 4.0), f)
    r2 = f.radius() ** 2
    exact = (r2 - 3) * np.exp(-r2 / 2)
    assert np.max(np.abs(hf.generator_apply(v).remainder.data - exact)) < 1e-10


def test_generator_is_the_time_derivative():
    rng = np.random.default_rng(9)
    f = gaussian_field(2, 128, 10.0, shift=0.3)
    v = AsymptoticFunction(random_chart(rng, 2, 0, 2, 4.0, 3), f)
    lv = hf.generator_apply(v)
    errs = []
    ts = [1e-3 / 2**j for j in range(6)]
    for t in ts:
        st_v = hf.semigroup_apply(v, t)
        diff = (st_v - v) * (1 / t) - lv
        errs.append(np.max(np.abs(diff.samples())))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    # first order, approached from below as the grid-scale part of the error dies out
    assert np.all(orders >= 0.95) and orders[-1] >= 0.99
    assert np.all(np.diff(orders) > 0)


# --------------------------------------------------------------------------- harnesses


def test_contraction_without_weight():
    g = RemainderField.box(2, 128, 16.0)
    X = g.mesh()
    samples = [AsymptoticFunction(AsymptoticChart.zeros(2, 0, 1, 2, 4.0),
                                  g.like(np.exp(-((X[0] - c) ** 2 + X[1] ** 2) / 2)))
               for c in (-1.0, 0.0, 2.0)]
    out = hf.growth_bound_harness(samples, NormSpec("H_weighted", 0, 2.0, 0.0), [0.5, 1, 2, 4])
    assert max(out["worst"]) <= 1.0 + 1e-12


def test_chart_only_growth_degree():
    # a_4(t) is a quadratic in t: large-t growth of the chart norm has exponent N*/2 = 2
    chart = random_chart(np.random.default_rng(0), 3, 0, 4, 4.0, 3)
    flow = hf.evolve_coefficients(chart)
    ts = np.geomspace(100, 1000, 5)
    norms = [sum(sphere_sobolev_norm(flow.at(t)[k], 0) for k in chart.ks) for t in ts]
    slope, _ = hf.fit_exponent(ts, norms)
    assert slope <= chart.N_star / 2 + 0.1
    assert slope > chart.N_star / 2 - 0.1


def test_growth_exponent_asymptotic_norm():
    rng = np.random.default_rng(0)
    N, p = 2, 4.0
    g = RemainderField.box(2, 257, 32.0)
    x, y = g.mesh()
    samples = [AsymptoticFunction(random_chart(rng, 2, 0, N, p, 3), g.like(np.exp(-(x**2 + y**2) / 2)))]
    spec = NormSpec("A_asymptotic", 1, p, n=0, N=N, N_star=n_star(N, 2, p))
    out = hf.growth_bound_harness(samples, spec, [1.0, 2.0, 4.0, 8.0])
    assert out["reference_exponent"] == 3.0
    assert out["passed"]


def test_gradient_bounded_for_smooth_data():
    f = gaussian_field(2, 256, 40.0, width=1.0)
    rep = hf.derivative_estimate_harness([f], np.geomspace(1e-3, 1e2, 11))
    assert np.isfinite(rep["scaled_max"]) and rep["scaled_max"] < 2.0


def test_gradient_small_time_rate():
    g = RemainderField.box(2, 256, 6.4)
    x, y = g.mesh()
    waves = [g.like(np.exp(-(x**2 + y**2) / 8) * np.cos(k * x)) for k in np.geomspace(1, 40, 25)]
    rep = hf.derivative_estimate_harness(waves, np.geomspace(1e-3, 1e-1, 5))
    assert 0.4 <= rep["rate"] <= 0.6
    ray = hf.derivative_estimate_harness(waves, np.geomspace(1e-3, 1e-1, 5), eps=math.pi / 4)
    ratio = np.array(ray["worst"]) / np.array(rep["worst"])
    assert np.all((ratio > 0.2) & (ratio < 5.0))
