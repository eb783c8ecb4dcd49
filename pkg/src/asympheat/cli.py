"""Command line front end: ``asympheat <subcommand> --config run.json --out dir``.

Every run writes ``config_echo.json`` (the config plus seed, threads and suite
under ``_run``, re-runnable as is), its artifacts and ``report.json``.
Wall-clock timings go to ``timings.json`` so that ``report.json`` is
reproducible bit for bit.
Exit status: 0 all checks passed, 1 a check failed, 2 invalid config.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy.fft

from . import checks
from . import heatflow as hf
from . import oracle
from . import resolvent as rs
from . import semilinear as sl
from .fieldio import deserialize_field, save_chart, serialize_field
from .spaces import (
    AsymptoticChart,
    AsymptoticFunction,
    CutoffSpec,
    NormSpec,
    RemainderField,
    asymptotic_norm,
    n_star,
)
from .sphere import SphereFunction, mode_count

SUBCOMMANDS = ("evolve", "equilibrium", "flow", "resolvent", "verify", "sweep")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# --------------------------------------------------------------------------- config helpers


def _get(cfg: dict, path: str, default=None, kind=None, required: bool = False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(path, "missing")
            return default
        node = node[part]
    if kind is not None:
        try:
            if kind is int and (isinstance(node, bool) or float(node) != int(node)):
                raise TypeError
            node = kind(node)
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected {kind.__name__}") from None
    return node


def _positive(cfg, path, default=None, kind=float, strict=True):
    v = _get(cfg, path, default, kind, required=default is None)
    if v < 0 or (strict and v == 0):
        raise ConfigError(path, "must be positive" if strict else "must be >= 0")
    return v


def _grid(cfg: dict) -> RemainderField:
    d = _get(cfg, "grid.d", 3, int)
    if d not in (2, 3):
        raise ConfigError("grid.d", "must be 2 or 3")
    n = _positive(cfg, "grid.n", None, int)
    if n < 8:
        raise ConfigError("grid.n", "must be at least 8")
    hw = _positive(cfg, "grid.half_width", None, float)
    return RemainderField.box(d, n, hw)


def _cutoff(cfg: dict, default: CutoffSpec) -> CutoffSpec:
    if "cutoff" not in cfg:
        return default
    try:
        return CutoffSpec(
            _get(cfg, "cutoff.kind", default.kind, str),
            _get(cfg, "cutoff.r0", default.r0, float),
            _get(cfg, "cutoff.r1", default.r1, float),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("cutoff", str(exc)) from None


def _field(cfg: dict, path: str, grid: RemainderField, base: Path) -> RemainderField:
    spec = _get(cfg, path, {"kind": "zero"})
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    kind = spec.get("kind", "gaussian")
    if kind == "zero":
        return grid.zeros_like()
    if kind == "file":
        if "path" not in spec:
            raise ConfigError(f"{path}.path", "missing")
        f = deserialize_field(base / spec["path"])
        if not f.same_grid(grid):
            raise ConfigError(f"{path}.path", "field grid does not match grid")
        return f
    if kind != "gaussian":
        raise ConfigError(f"{path}.kind", f"unknown field kind {kind!r}")
    amp = _get(spec, "amplitude", 1.0, float)
    width = _get(spec, "width", 1.0, float)
    if width <= 0:
        raise ConfigError(f"{path}.width", "must be positive")
    center = spec.get("center", [0.0] * grid.d)
    linear = spec.get("linear", [0.0] * grid.d)
    for key, vec in (("center", center), ("linear", linear)):
        if not isinstance(vec, list) or len(vec) != grid.d:
            raise ConfigError(f"{path}.{key}", f"expected a list of {grid.d} numbers")
    xs = grid.mesh()
    r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
    poly = 1.0 + sum(a * x for a, x in zip(linear, xs))
    return grid.like(amp * np.exp(-r2 / (2 * width**2)) * poly)


def _chart(cfg: dict, d: int, rng: np.random.Generator, default_n: int) -> AsymptoticChart:
    n = _get(cfg, "chart.n", default_n, int)
    N = _get(cfg, "chart.N", 2, int)
    if n < 0:
        raise ConfigError("chart.n", "must be >= 0")
    if N < 0:
        raise ConfigError("chart.N", "must be >= 0")
    p = _get(cfg, "chart.p", 4.0, float)
    if not p > 1:
        raise ConfigError("chart.p", "must exceed 1")
    L = _get(cfg, "chart.L_max", 2, int)
    if L < 0:
        raise ConfigError("chart.L_max", "must be >= 0")
    Ns = n_star(N, d, p)
    if Ns < n:
        raise ConfigError("chart.N", f"N* = {Ns} is below n = {n}")
    nm = mode_count(d, L)
    coeffs_cfg = _get(cfg, "chart.coeffs")
    scale = _get(cfg, "chart.random_scale", 0.0, float)
    coeffs = []
    for k in range(n, Ns + 1):
        c = np.zeros(nm)
        if coeffs_cfg is not None and str(k) in coeffs_cfg:
            vals = np.asarray(coeffs_cfg[str(k)], dtype=float)
            if vals.shape != (nm,):
                raise ConfigError(f"chart.coeffs.{k}", f"expected {nm} values")
            c = vals
        elif scale:
            c = scale * rng.normal(size=nm)
        coeffs.append(SphereFunction(d, L, c))
    return AsymptoticChart(d, n, N, Ns, coeffs, p)


def _times(cfg: dict, path: str, default):
    ts = _get(cfg, path, default)
    if not isinstance(ts, list) or not ts:
        raise ConfigError(path, "expected a nonempty list")
    try:
        ts = [float(t) for t in ts]
    except (TypeError, ValueError):
        raise ConfigError(path, "expected numbers") from None
    if any(t < 0 for t in ts):
        raise ConfigError(path, "times must be >= 0")
    return ts


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _tag(t: float) -> str:
    return f"{t:.6g}".replace(".", "p")


# --------------------------------------------------------------------------- subcommands


def cmd_evolve(cfg, out: Path, rng, base: Path) -> dict:
    grid = _grid(cfg)
    chart = _chart(cfg, grid.d, rng, 0)
    cutoff = _cutoff(cfg, CutoffSpec())
    rem = _field(cfg, "remainder", grid, base)
    v = AsymptoticFunction(chart, rem, cutoff)
    times = _times(cfg, "times", [0.25, 0.5, 1.0])
    method = _get(cfg, "duhamel.method", "exact", str)
    nodes = _get(cfg, "duhamel.nodes", 32, int)
    if method not in ("exact", "gauss"):
        raise ConfigError("duhamel.method", "must be 'exact' or 'gauss'")
    norm_p = _get(cfg, "norm.p", chart.p or 2.0, float)
    norm_m = _get(cfg, "norm.m", 0, int)
    spec = NormSpec("A_asymptotic", norm_m, norm_p, n=chart.n, N=chart.N, N_star=chart.N_star)
    try:
        n0 = asymptotic_norm(v, spec)
    except ValueError as exc:
        raise ConfigError("norm", str(exc)) from None
    rows, snaps = [], []
    for t in times:
        try:
            s = hf.semigroup_apply(v, t, nodes, method)
        except ValueError as exc:
            raise ConfigError("grid", str(exc)) from None
        tag = _tag(t)
        save_chart(s.chart, out / f"chart_t{tag}.json", {"t": t})
        serialize_field(s.remainder, out / f"remainder_t{tag}")
        drift = hf.nonsmoothing_check(chart, [t])["max_drift"] if t > 0 else 0.0
        nt = asymptotic_norm(s, spec)
        rows.append((t, nt, nt / n0 if n0 else 0.0, drift, float(np.abs(s.samples()).max())))
        snaps.append(tag)
    _write_csv(out / "curves.csv", ["t", "norm", "norm_ratio", "leading_drift", "sup"], rows)
    positive = [(r[0], r[2]) for r in rows if r[0] > 0 and r[2] > 0]
    exponent = hf.fit_exponent(*zip(*positive))[0] if len(positive) >= 2 else None
    drift = max(r[3] for r in rows)
    return {
        "checks": {"leading_coefficients_frozen": drift == 0.0},
        "initial_norm": n0,
        "norms": [r[1] for r in rows],
        "drift": drift,
        "fitted_exponent": exponent,
        "reference_exponent": (chart.N + chart.N_star + 2) / 2,
        "snapshots": snaps,
    }


def _problem(cfg, base: Path) -> sl.SemilinearProblem:
    grid = _grid(cfg)
    phi = _field(cfg, "phi", grid, base)
    psi = _field(cfg, "psi", grid, base)
    N = _get(cfg, "N", 3, int)
    if N < 0:
        raise ConfigError("N", "must be >= 0")
    p = _get(cfg, "p", 4.0, float)
    if not p > 1:
        raise ConfigError("p", "must exceed 1")
    try:
        return sl.SemilinearProblem(
            phi, psi, N, p,
            tol=_positive(cfg, "tol", 1e-8),
            max_newton=_get(cfg, "max_newton", 50, int),
            cutoff=_cutoff(cfg, CutoffSpec(r0=1.0, r1=4.0)),
        )
    except ValueError as exc:
        msg = str(exc)
        field = "psi" if msg.startswith("psi") else "phi" if msg.startswith("phi") else "grid"
        raise ConfigError(field, msg) from None


def _equilibrium_report(eq: sl.EquilibriumResult, prob) -> dict:
    mp = sl.max_principle_checks(eq, prob)
    purity_ok = all(v["purity"] >= 0.99 for v in eq.purity.values() if v["norm"] > 0)
    return {
        "checks": {
            "residual_within_tol": eq.residual <= prob.tol,
            "eigenfunction_purity": purity_ok,
            "sup_bound": mp["bound_ok"],
            "nested_balls": all(b["ok"] for b in mp["balls"]),
        },
        "residual": eq.residual,
        "residual_history": eq.residual_history,
        "newton_iterations": eq.iterations,
        "converged": eq.converged,
        "purity": {str(k): v for k, v in eq.purity.items()},
        "max_principle": mp,
        "chart_norms": {str(k): float(np.linalg.norm(eq.chart[k].coeffs)) for k in eq.chart.ks},
    }


def cmd_equilibrium(cfg, out: Path, rng, base: Path) -> dict:
    if _get(cfg, "grid.d", 3, int) != 3:
        raise ConfigError("grid.d", "equilibrium runs are three-dimensional")
    prob = _problem(cfg, base)
    eq = sl.equilibrium_solve(prob)
    serialize_field(prob.grid.like(eq.u_star.samples()), out / "u_star")
    serialize_field(eq.u_star.remainder, out / "remainder")
    save_chart(eq.chart, out / "chart.json",
               {"cutoff": {"kind": prob.cutoff.kind, "r0": prob.cutoff.r0, "r1": prob.cutoff.r1}})
    return _equilibrium_report(eq, prob)


def cmd_flow(cfg, out: Path, rng, base: Path) -> dict:
    prob = _problem(cfg, base)
    grid = prob.grid
    start = _get(cfg, "initial.kind", "field", str)
    if start == "equilibrium":
        if grid.d != 3:
            raise ConfigError("initial.kind", "equilibrium start needs grid.d = 3")
        v = sl.equilibrium_solve(prob).u_star
    elif start == "field":
        sub = {"chart": _get(cfg, "initial.chart", {"n": 1, "N": prob.N, "p": prob.p})}
        sub["chart"].setdefault("n", 1)
        if sub["chart"]["n"] != 1:
            raise ConfigError("initial.chart.n", "semilinear states have n = 1")
        chart = _chart(sub, grid.d, rng, 1)
        v = AsymptoticFunction(chart, _field(cfg, "initial.remainder", grid, base), prob.cutoff)
    else:
        raise ConfigError("initial.kind", "must be 'field' or 'equilibrium'")
    T = _positive(cfg, "T", 1.0)
    dt = _positive(cfg, "dt", 0.01)
    if abs(round(T / dt) * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigError("dt", "T must be a multiple of dt")
    p = _get(cfg, "monitor.p", prob.p, float)
    delta = _get(cfg, "monitor.delta", 0.0, float)
    ref = v if start == "equilibrium" else None
    res = sl.flow(v, prob, T, dt, p=p, delta=delta, reference=ref)
    m = res.monitors
    header = ["t", "lp_norm", "sup_norm", "drift_a1", "drift_a2"] + (["distance"] if ref else [])
    rows = zip(*[m[h] for h in header])
    _write_csv(out / "monitors.csv", header, rows)
    drift = max(max(m["drift_a1"]), max(m["drift_a2"]))
    checks_ = {"a1_a2_frozen": drift == 0.0}
    if not np.any(prob.phi.data) and delta == 0:
        checks_["lp_non_increasing"] = float(np.max(np.diff(m["lp_norm"]), initial=-np.inf)) <= 1e-8
    if ref is not None:
        checks_["stationary"] = max(m["distance"]) < 1e-6
    return {
        "checks": checks_,
        "steps": len(m["t"]) - 1,
        "final_lp_norm": m["lp_norm"][-1],
        "final_sup_norm": m["sup_norm"][-1],
        "coefficient_drift": drift,
        "max_distance": max(m["distance"]) if ref else None,
    }


def cmd_resolvent(cfg, out: Path, rng, base: Path) -> dict:
    grid = _grid(cfg)
    f = _field(cfg, "f", grid, base)
    if not np.any(f.data):
        raise ConfigError("f", "must be nonzero")
    count = _positive(cfg, "samples", 50, int)
    eps = _positive(cfg, "eps", 0.1)
    omega = _get(cfg, "omega", 1.0, float)
    kappa = _positive(cfg, "kappa", 0.5)
    delta = _get(cfg, "delta", 2.0, float)
    pts = rs.sector_samples(count, rng, eps=eps, omega=omega, kappa=kappa)
    rows, ratios, schur = [], [], []
    for pt in pts:
        I1, I2 = rs.schur_integrals(pt.lam, delta, grid.d, kappa)
        ratio = rs.sectorial_ratio(f, pt)
        ratios.append(ratio)
        schur.append(abs(pt.lam) * (I1 + I2))
        rows.append((pt.lam.real, pt.lam.imag, I1, I2, schur[-1], ratio))
    _write_csv(out / "sector_sweep.csv", ["lam_re", "lam_im", "I1", "I2", "lam_times_schur", "sectorial_ratio"], rows)
    ident = rs.resolvent_identity_residual(f, complex(omega + 1.0))
    return {
        "checks": {
            "identity_residual": ident < 1e-10,
            "sectorial_ratio_finite": bool(np.all(np.isfinite(ratios))),
            "schur_finite": bool(np.all(np.isfinite(schur))),
        },
        "identity_residual": ident,
        "sectorial_ratio_max": max(ratios),
        "lam_times_schur_max": max(schur),
        "samples": count,
    }


def _oracle_suite() -> dict:
    out = {}
    g = RemainderField.box(3, 65, 8.0)
    r = g.radius()
    ball = g.like(np.where(r <= 1.0, 3 / (4 * np.pi), 0.0))
    smooth = g.like(np.exp(-r**2))
    pot = oracle.newtonian_potential(smooth).data
    lap = oracle.fd_laplacian(g.like(pot), order=4).data
    inner = r < 4
    out["newtonian_fd_residual"] = float(np.max(np.abs(lap - smooth.data)[inner]) / smooth.data.max())
    far = r > 3
    ball_pot = oracle.newtonian_potential(ball).data
    exact = oracle.ball_potential(r, 1.0, float(ball.data.sum() * g.spacing**3))
    out["ball_far_error"] = float(np.max(np.abs(ball_pot - exact)[far]))
    g2 = RemainderField.box(2, 385, 6.0)
    f2 = g2.like(np.exp(-g2.radius() ** 2))
    out["l_delta_residual"] = oracle.l_delta_conjugation_check(f2, 2.0, order=4)
    heat = hf.heat_apply(f2, 0.3).data
    ref = oracle.gaussian_convolve(lambda p: np.exp(-(p**2).sum(1)), 0.3, g2).data
    out["gaussian_convolve_error"] = float(np.max(np.abs(heat - ref)))
    out["checks"] = {
        "newtonian_fd": out["newtonian_fd_residual"] < 1e-3,
        "ball_far": out["ball_far_error"] < 1e-4,
        "l_delta": out["l_delta_residual"] < 1e-4,
        "gaussian_convolve": out["gaussian_convolve_error"] < 1e-6,
    }
    return out


def cmd_verify(cfg, out: Path, rng, base: Path, suite: str) -> tuple:
    timings = {}
    if suite == "trivial":
        cases = checks.trivial_suite()
        return {"suite": suite, "cases": cases, "checks": {c["name"]: c["passed"] for c in cases}}, timings
    if suite == "oracle":
        rep = _oracle_suite()
        _write_json(out / "oracle_report.json", rep)
        return {"suite": suite, **rep}, timings
    if suite == "acceptance":
        numbers = _get(cfg, "criteria", sorted(checks.CRITERIA))
        if not isinstance(numbers, list) or any(k not in checks.CRITERIA for k in numbers):
            raise ConfigError("criteria", f"expected a list drawn from {sorted(checks.CRITERIA)}")
        results = checks.run_all(numbers, echo=print)
        timings = {str(r.number): r.runtime for r in results}
        rep = {str(r.number): {k: v for k, v in r.to_dict().items() if k != "runtime_s"} for r in results}
        return {"suite": suite, "criteria": rep, "checks": {str(r.number): r.passed for r in results}}, timings
    raise ConfigError("suite", f"unknown suite {suite!r}")


def cmd_sweep(cfg, out: Path, rng, base: Path) -> dict:
    if _get(cfg, "grid.d", 3, int) != 3:
        raise ConfigError("grid.d", "genericity sweeps are three-dimensional")
    prob = _problem(cfg, base)
    trials = _positive(cfg, "trials", 20, int)
    scale = _positive(cfg, "scale", 0.1, float, strict=False)
    threshold = _positive(cfg, "threshold", 1e-8, float, strict=False)
    k_max = _get(cfg, "k_max", 3, int)
    if not 1 <= k_max <= prob.N_star:
        raise ConfigError("k_max", f"must lie in [1, {prob.N_star}]")
    res = sl.genericity_sweep(prob, trials, scale, rng, threshold=threshold, k_max=k_max)
    rows = [[i] + [rec["norms"][k] for k in range(1, k_max + 1)] + [int(rec["nonvanishing"])]
            for i, rec in enumerate(res["records"])]
    _write_csv(out / "sweep.csv", ["trial"] + [f"a{k}_norm" for k in range(1, k_max + 1)] + ["nonvanishing"], rows)
    target = _get(cfg, "min_fraction", 0.0, float)
    return {
        "checks": {"fraction_nonvanishing": res["fraction_nonvanishing"] >= target},
        "base_norms": res["base_norms"],
        "base_vanishing": res["base_vanishing"],
        "fraction_nonvanishing": res["fraction_nonvanishing"],
        "trials": trials,
        "scale": scale,
    }


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asympheat", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="JSON run config")
    ap.add_argument("--out", type=Path, help="output directory (default $ASYMPHEAT_OUT or ./runs/<command>)")
    ap.add_argument("--seed", type=int, help="seed for randomized inputs (default 0)")
    ap.add_argument("--threads", type=int, help="FFT worker threads (default 1)")
    ap.add_argument("--suite", choices=("trivial", "oracle", "acceptance"),
                    help="suite for the verify command")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg, base = {}, Path.cwd()
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except FileNotFoundError:
            print(f"config error: config: file {args.config} not found", file=sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"config error: config: invalid JSON ({exc})", file=sys.stderr)
            return 2
        if not isinstance(cfg, dict):
            print("config error: config: top level must be an object", file=sys.stderr)
            return 2
        base = args.config.resolve().parent
    elif args.command != "verify":
        print("config error: config: required for this command", file=sys.stderr)
        return 2
    recorded = cfg.get("_run", {}) if isinstance(cfg.get("_run"), dict) else {}
    for key, default in (("seed", 0), ("threads", 1), ("suite", "trivial")):
        if getattr(args, key) is None:
            setattr(args, key, recorded.get(key, default))
    if not isinstance(args.seed, int) or args.seed < 0 or args.seed >= 2**64:
        print("config error: seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if not isinstance(args.threads, int) or args.threads < 1:
        print("config error: threads: must be >= 1", file=sys.stderr)
        return 2
    out = args.out or Path(os.environ.get("ASYMPHEAT_OUT", Path("runs") / args.command))
    out.mkdir(parents=True, exist_ok=True)
    echo = dict(cfg)
    echo["_run"] = {"command": args.command, "seed": args.seed, "threads": args.threads, "suite": args.suite}
    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    timings = {}
    try:
        with scipy.fft.set_workers(args.threads):
            if args.command == "verify":
                report, timings = cmd_verify(cfg, out, rng, base, args.suite)
            else:
                report = globals()[f"cmd_{args.command}"](cfg, out, rng, base)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _write_json(out / "config_echo.json", echo)
    report = {"command": args.command, "seed": args.seed, "threads": args.threads, **report}
    report["passed"] = all(bool(v) for v in report.get("checks", {}).values())
    _write_json(out / "report.json", report)
    timings["total_s"] = time.perf_counter() - t0
    _write_json(out / "timings.json", timings)
    for name, ok in report.get("checks", {}).items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if report["passed"] else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
