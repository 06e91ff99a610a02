"""Experiment drivers shared by the command-line interface and the acceptance suite.

Each ``run_*`` function takes a validated :class:`~fracheat.config.RunConfig`,
writes its artefacts into ``out`` and returns a :class:`RunOutcome`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernel as K
from .config import GridConfig, RunConfig, TargetConfig
from .errors import DomainError
from .hitting import HittingExperiment, Window, bound_comparison, hitting_probability_mc, small_ball_scaling
from .kernel import ParabolicPoint
from .plots import density_plot, holder_plot, ladder_plot
from .potential import CompactSetSpec, capacity, hausdorff_cover
from .spde import ModelSpec, Recording, SolverGrid, batch_solve, final_time, iter_batch_solve
from .spde.io import fmt, write_csv, write_snapshot
from .stats import (Ensemble, exact_gaussian_pair_density, gaussian_bound_check, holder_fit, kde_density,
                    matched_polynomial_constant, normal_pdf_1d, polynomial_bound_check, polynomial_dominates)


@dataclass
class RunOutcome:
    """Files written, overall check status and a short human-readable summary."""

    files: list = field(default_factory=list)
    passed: bool = True
    lines: list = field(default_factory=list)
    seeds: list = field(default_factory=list)


def _csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not serialisable: {type(v)}")


def make_grid(cfg: GridConfig, alpha: float) -> SolverGrid:
    return SolverGrid(alpha, cfg.T, cfg.L, cfg.nt, cfg.nx, cfg.tail_tol)


def make_target(cfg: TargetConfig) -> CompactSetSpec:
    return CompactSetSpec.from_dict(cfg.model_dump(exclude_none=True))


def _spec(cfg: RunConfig) -> ModelSpec:
    m = cfg.model
    return ModelSpec(m.alpha, m.d, m.preset, m.coupling)


# ---------------------------------------------------------------------------
# kernel-check


@dataclass(frozen=True)
class Check:
    alpha: float
    name: str
    value: float
    reference: float
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


SQUARED_MASS_POINTS = ((0.0, 0.5, 1.0), (0.1, 0.9, 1.0), (0.0, 1.0, 2.0), (0.5, 1.5, 3.0), (0.25, 0.3, 0.4))


def kernel_identity_suite(alpha: float, tol: float = 1e-6) -> list[Check]:
    """Scaling, semigroup, unit mass, closed-form, squared-mass, zeta, Psi and tail checks."""
    alpha = K.validate_alpha(alpha)
    out = []
    res = max(K.scaling_residual(alpha, t, x) for t in (0.3, 2.0) for x in (0.0, 0.7, 3.0))
    out.append(Check(alpha, "scaling", res, 0.0, res, tol))
    for t, s, x in ((0.3, 0.7, 0.5), (1.0, 1.0, 2.0)):
        v, ref = K.semigroup_integral(alpha, t, s, x), float(K.green_kernel(alpha, t + s, x))
        out.append(Check(alpha, f"semigroup t={t} s={s} x={x}", v, ref, _rel(v, ref), tol))
    v = K.unit_mass_integral(alpha, 1.0)
    out.append(Check(alpha, "unit mass", v, 1.0, abs(v - 1.0), tol))
    if alpha == 2.0:
        err = max(abs(K.green_kernel_quadrature(2.0, t, x) - math.exp(-x * x / (4 * t)) / math.sqrt(4 * math.pi * t))
                  for t in (0.1, 1.0, 5.0) for x in (0.0, 0.5, 2.0, 6.0))
        out.append(Check(alpha, "gaussian closed form", err, 0.0, err, 1e-8))
        c = K.squared_mass_constant(2.0)
        out.append(Check(alpha, "c_2", c, 1 / math.sqrt(2 * math.pi), abs(c - 1 / math.sqrt(2 * math.pi)), 1e-10))
    for a, b, t in SQUARED_MASS_POINTS:
        v, ref = K.squared_mass_integral(alpha, a, b, t), K.squared_mass_closed_form(alpha, a, b, t)
        out.append(Check(alpha, f"squared mass a={a} b={b} t={t}", v, ref, _rel(v, ref), tol))
    zm = K.zeta_min(alpha)
    xs = np.linspace(0.0, 100.0, 1_000_001)
    brute = float(np.min(K.zeta(alpha, xs)))
    out.append(Check(alpha, "zeta minimum", zm.value, brute, abs(zm.value - brute), 1e-6))
    out.append(Check(alpha, "zeta positive", zm.value, 0.0, 0.0 if zm.value > 0 else math.inf, 0.0))
    for nu, rho, closed in ((1.0, 0.3, math.log((0.3 + 2.0) / 0.3)), (2.0, 0.3, math.atan(2.0 / math.sqrt(0.3)) / math.sqrt(0.3))):
        v = K.psi(2.0, nu, rho)
        out.append(Check(alpha, f"psi nu={nu}", v, closed, _rel(v, closed), tol))
    kt = K.tail_constant(alpha)
    xs = np.array([0.5, 3.0, 20.0, 250.0, 1000.0])
    worst = float(np.max(K.green_kernel(alpha, 1.0, xs) * (1 + xs ** (1 + alpha)) / kt))
    out.append(Check(alpha, "tail bound", worst, 1.0, max(0.0, worst - 1.0), 1e-9))
    return out


def run_kernel_check(cfg: RunConfig, out: Path, tolerance: float | None = None, **_) -> RunOutcome:
    sec = cfg.section
    tol = tolerance or sec.tolerance
    checks = [c for a in sec.alphas for c in kernel_identity_suite(a, tol)]
    path = _csv(out / "kernel_check.csv", ("alpha", "check", "value", "reference", "error", "tolerance", "pass"),
                [(c.alpha, c.name, c.value, c.reference, c.error, c.tolerance, int(c.passed)) for c in checks])
    res = RunOutcome([path], all(c.passed for c in checks))
    res.lines = [f"{'PASS' if c.passed else 'FAIL'} alpha={c.alpha} {c.name}: error {c.error:.3g} (tol {c.tolerance:.3g})"
                 for c in checks]
    return res


# ---------------------------------------------------------------------------
# simulate


def run_simulate(cfg: RunConfig, out: Path, workers: int = 1, **_) -> RunOutcome:
    spec, sec = _spec(cfg), cfg.section
    grid = make_grid(cfg.grid, spec.alpha)
    seeds = list(range(cfg.seed, cfg.seed + sec.n_samples))
    rec = final_time(grid) if sec.record == "final" else Recording()
    samples = batch_solve(spec, grid, seeds, rec, workers=workers)
    res = RunOutcome(seeds=seeds)
    res.files.append(write_csv(samples, out / "samples.csv"))
    if sec.snapshots:
        res.files += [write_snapshot(s, out / f"sample_{s.seed}.frht") for s in samples]
    res.lines.append(f"simulated {len(seeds)} trajectories on {grid.nt}x{grid.nx} grid")
    return res


# ---------------------------------------------------------------------------
# holder


def holder_time_fit(spec: ModelSpec, grid: SolverGrid, seeds, nodes: int = 128, p: float = 2.0, workers: int = 1,
                    min_cells: int = 4):
    """Time-direction fit from all time steps at ``nodes`` evenly spaced positions."""
    stride = max(1, grid.nx // nodes)
    samples = batch_solve(spec, grid, seeds, Recording(None, np.arange(0, grid.nx, stride)), workers=workers)
    return holder_fit(Ensemble.from_samples(samples), "time", p, alpha=spec.alpha, min_cells=min_cells)


def holder_space_fit(spec: ModelSpec, grid: SolverGrid, seeds, p: float = 2.0, workers: int = 1,
                     min_cells: int = 16):
    """Space-direction fit from the final time slice."""
    samples = batch_solve(spec, grid, seeds, final_time(grid), workers=workers)
    return holder_fit(Ensemble.from_samples(samples), "space", p, alpha=spec.alpha, min_cells=min_cells)


def run_holder(cfg: RunConfig, out: Path, workers: int = 1, tolerance: float | None = None, **_) -> RunOutcome:
    spec, sec = _spec(cfg), cfg.section
    tol = tolerance or sec.tolerance
    res = RunOutcome()
    fits = []
    if "time" in sec.directions:
        grid = make_grid(cfg.grid, spec.alpha)
        seeds = list(range(cfg.seed, cfg.seed + sec.n_samples))
        fits.append(holder_time_fit(spec, grid, seeds, sec.time_nodes, sec.p, workers, sec.time_min_cells))
        res.seeds += seeds
    if "space" in sec.directions:
        grid = make_grid(sec.space_grid or cfg.grid, spec.alpha)
        s0 = cfg.seed + sec.n_samples
        seeds = list(range(s0, s0 + sec.space_samples))
        fits.append(holder_space_fit(spec, grid, seeds, sec.p, workers, sec.space_min_cells))
        res.seeds += seeds
    rows = []
    for f in fits:
        ok = abs(f.slope - f.expected) <= tol
        res.passed &= ok
        rows.append((f.direction, spec.alpha, spec.preset, f.p, f.slope, f.stderr, f.r2, f.expected, int(ok)))
        res.lines.append(f"{'PASS' if ok else 'FAIL'} {f.direction} slope {f.slope:.4f} expected {f.expected:.4f}")
    res.files.append(_csv(out / "holder.csv", ("direction", "alpha", "preset", "p", "slope", "stderr", "r2",
                                                "expected", "pass"), rows))
    res.files.append(holder_plot(fits, out / "holder.svg"))
    return res


# ---------------------------------------------------------------------------
# density


def one_point_kde_error(spec: ModelSpec, grid: SolverGrid, seeds, x: float = 0.0, workers: int = 1):
    """KDE of ``u_1(T, x)`` against the exact normal law of the additive field."""
    j = grid.x_index(x)
    vals = np.array([s.values[0, 0, 0] for s in
                     iter_batch_solve(spec, grid, seeds, final_time(grid, np.array([j])), workers=workers)])
    est = kde_density(vals[:, None])
    z = est.axes[0]
    exact = normal_pdf_1d(z, K.squared_mass_constant(spec.alpha) * grid.T ** ((spec.alpha - 1) / spec.alpha))
    return z, est.values, exact, float(np.max(np.abs(est.values - exact)))


def run_density(cfg: RunConfig, out: Path, workers: int = 1, tolerance: float | None = None, **_) -> RunOutcome:
    sec = cfg.section
    res = RunOutcome()
    if sec.kind == "one-point":
        spec = _spec(cfg)
        if spec.preset != "additive":
            raise DomainError("the one-point density check needs the additive preset")
        grid = make_grid(cfg.grid, spec.alpha)
        seeds = list(range(cfg.seed, cfg.seed + sec.n_samples))
        z, kde, exact, err = one_point_kde_error(spec, grid, seeds, sec.x, workers)
        res.seeds = seeds
        tol = tolerance or sec.tolerance
        res.passed = err <= tol
        res.files.append(_csv(out / "density.csv", ("z", "kde", "exact"), zip(z, kde, exact)))
        res.files.append(density_plot(z, kde, exact, out / "density.svg"))
        res.lines.append(f"{'PASS' if res.passed else 'FAIL'} KDE sup error {err:.4f} (tol {tol})")
        return res
    if not sec.pairs:
        raise DomainError("pair-exact density needs at least one pair")
    alpha = cfg.model.alpha if cfg.model else 2.0
    d = cfg.model.d if cfg.model else 1
    dens = []
    for pr in sec.pairs:
        ps, pt = ParabolicPoint(pr.s, pr.y), ParabolicPoint(pr.t, pr.x)
        sd = math.sqrt(K.squared_mass_constant(alpha) * max(pr.s, pr.t) ** ((alpha - 1) / alpha))
        dens.append(exact_gaussian_pair_density(alpha, ps, pt, np.linspace(-4 * sd, 4 * sd, sec.z_points), d))
    g = gaussian_bound_check(dens, alpha, tolerance or 0.2)
    pb = polynomial_bound_check(dens, alpha, sec.poly_p)
    cp = matched_polynomial_constant(g.c, sec.poly_p, d)
    dom = all(polynomial_dominates(g.c, sec.poly_p, d, K.delta_metric(alpha, pd.p_s, pd.p_t), pd.separation())
              for pd in dens)
    res.passed = g.holds and g.stable and dom
    _json(out / "density_bounds.json", {"gaussian": g.to_dict(), "polynomial": pb.to_dict(),
                                        "matched_polynomial_c": cp, "polynomial_dominates": dom})
    res.files.append(out / "density_bounds.json")
    res.lines.append(f"{'PASS' if res.passed else 'FAIL'} gaussian c={g.c:.4g} spread {g.spread:.3f}, "
                     f"polynomial dominates: {dom}")
    return res


# ---------------------------------------------------------------------------
# capacity / hausdorff


def run_capacity(cfg: RunConfig, out: Path, **_) -> RunOutcome:
    sec = cfg.section
    r = capacity(make_target(sec.target), sec.beta, sec.mesh, sec.tol, sec.max_iter)
    path = _json(out / "capacity.json", r.to_dict())
    ok = r.relative_gap <= sec.tol or r.value in (0.0, 1.0)
    return RunOutcome([path], ok, [format(r.value, ".17g")])


def run_hausdorff(cfg: RunConfig, out: Path, **_) -> RunOutcome:
    sec = cfg.section
    A = make_target(sec.target)
    rows, lines = [], []
    for eps in sorted(sec.eps, reverse=True):
        if sec.beta < 0:
            val, n_sets = math.inf, 0
        else:
            cov = hausdorff_cover(A, sec.beta, eps)
            val, n_sets = cov.cost(sec.beta), len(cov.radii)
        rows.append((eps, sec.beta, val, n_sets))
        lines.append(f"eps={eps:g}: {format(val, '.17g')}")
    path = _csv(out / "hausdorff.csv", ("eps", "beta", "premeasure", "n_sets"), rows)
    return RunOutcome([path], True, lines)


# ---------------------------------------------------------------------------
# hitting


def run_hitting(cfg: RunConfig, out: Path, workers: int = 1, **_) -> RunOutcome:
    spec, sec = _spec(cfg), cfg.section
    grid = make_grid(cfg.grid, spec.alpha)
    w = sec.window
    window = Window(tuple(w.I), tuple(w.J), w.mode)
    res = RunOutcome(seeds=list(range(cfg.seed, cfg.seed + sec.n_samples)))
    results = []
    log = out / "hitting.jsonl"
    log.unlink(missing_ok=True)
    for i, tc in enumerate(sec.targets):
        exp = HittingExperiment(spec, grid, window, make_target(tc), sec.n_samples, cfg.seed, sec.delta,
                                sec.capacity_mesh, sec.hausdorff_eps)
        r = hitting_probability_mc(exp, workers=workers)
        results.append(r)
        with log.open("a") as fh:
            fh.write(json.dumps({"target": i, **r.to_dict()}, sort_keys=True, default=_jsonable) + "\n")
        res.lines.append(f"target {i}: p={r.estimate:.4f} CI=[{r.wilson_ci[0]:.4f}, {r.wilson_ci[1]:.4f}]")
    res.files.append(log)
    report = bound_comparison(results)
    res.files.append(_csv(out / "hitting_summary.csv",
                          ("target", "estimate", "ci_lo", "ci_hi", "n", "hits", "delta", "threshold", "capacity",
                           "hausdorff", "c1_hat", "c2_hat"),
                          [(i, r.estimate, r.wilson_ci[0], r.wilson_ci[1], r.n, r.hit_count, r.delta, r.threshold,
                            r.capacity_value, r.hausdorff_value, "" if c1 is None else c1, "" if c2 is None else c2)
                           for i, (r, c1, c2) in enumerate(zip(results, report.c1_hat, report.c2_hat))]))
    res.files.append(_json(out / "bounds.json", report.to_dict()))
    res.passed = report.ordering_ok
    if sec.small_ball is not None:
        sb = sec.small_ball
        fit = small_ball_scaling(spec.alpha, spec.d, sb.z, sb.levels, sb.n_samples, cfg.seed, spec.preset, grid,
                                 sb.t_center, sb.x_center, eta_report=sb.eta_report, workers=workers)
        res.files.append(_json(out / "small_ball.json", fit.to_dict()))
        res.files.append(ladder_plot(fit.levels, fit.frequencies, fit.intervals, fit.exponent,
                                     out / "small_ball.svg"))
        res.passed &= fit.passed
        res.lines.append(f"{'PASS' if fit.passed else 'FAIL'} small-ball exponent {fit.exponent:.3f} "
                         f">= {spec.d - sb.eta_report}")
    return res


RUNNERS = {
    "kernel-check": run_kernel_check,
    "simulate": run_simulate,
    "holder": run_holder,
    "density": run_density,
    "capacity": run_capacity,
    "hausdorff": run_hausdorff,
    "hitting": run_hitting,
}
