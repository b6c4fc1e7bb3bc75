"""Experiment registry, configuration, reporting and serialisation.

Every verification exposed by the laboratory is registered here under a
stable id.  A run takes an ``ExperimentConfig``, produces one ``StatRow`` per
checked statistic (value, standard error where applicable, threshold and
verdict) and wraps them in an ``ExperimentReport``.  Reports serialise to
JSON (canonical) and CSV (a fixed-column projection); identical config and
seed give byte-identical statistics regardless of worker count.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from ._version import __version__
from . import bsde as bsde_mod
from .fbm import CirculantSampler, CholeskySampler, covariance, quadratic_variation
from .formulas import (
    FormulaCase,
    verify_bm_stratonovich_theorem,
    verify_prop43,
    verify_prop45,
    verify_prop54,
    verify_theorem20,
    verify_theorem32,
    verify_theorem50,
)
from .functionals import (
    coordinate,
    resolve_functional,
    squared_coordinate,
)
from .grids import TimeGrid, as_hurst
from .integrals import wis_sum_batch
from .kernel import (
    PhiKernel,
    DerivativeField,
    covariance_phi_integral,
    d_phi_derivative,
    indicator_inner_product,
    indicator_step,
    wis_variance,
)

OUTPUT_DIR_ENV = "FBMLAB_OUT_DIR"

MIN_STATISTICAL_PATHS = 100

Z_GATE = 4.0


@dataclass
class ExperimentConfig:
    experiment: str
    hurst: float = 0.7
    horizon: float = 1.0
    resolutions: tuple = (256, 512, 1024)
    n_paths: int = 1000
    seed: int = 20240901
    functional: str | None = None
    out: str | None = None
    fmt: str = "json"
    workers: int = 1

    def __post_init__(self):
        self.resolutions = tuple(int(n) for n in self.resolutions)

    def finest(self) -> int:
        return self.resolutions[-1]

    def functional_obj(self):
        return resolve_functional(self.functional) if self.functional else None


@dataclass
class StatRow:
    n: int
    statistic: str
    value: float
    se: float | None
    threshold: str
    verdict: str  # pass | fail | info


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list
    passed: bool
    wall_clock_s: float
    version: str

    def to_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "passed": self.passed,
            "wall_clock_s": self.wall_clock_s,
            "version": self.version,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        payload = json.loads(text)
        rows = [StatRow(**r) for r in payload["rows"]]
        return cls(payload["experiment"], payload["config"], rows,
                   payload["passed"], payload["wall_clock_s"], payload["version"])

    CSV_COLUMNS = ("experiment", "n", "M", "H", "statistic", "value", "se",
                   "threshold", "verdict")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([
                self.experiment, r.n, self.config["n_paths"], self.config["hurst"],
                r.statistic, repr(r.value), "" if r.se is None else repr(r.se),
                r.threshold, r.verdict,
            ])
        return buf.getvalue()


def summarize(report: ExperimentReport) -> str:
    """Aligned text table of the report rows."""
    header = ("n", "statistic", "value", "se", "threshold", "verdict")
    cells = [header]
    for r in report.rows:
        cells.append((str(r.n), r.statistic, f"{r.value:.6g}",
                      "" if r.se is None else f"{r.se:.3g}", r.threshold, r.verdict))
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    status = "PASS" if report.passed else "FAIL"
    lines.append(f"[{report.experiment}] overall: {status}  "
                 f"({report.wall_clock_s:.2f} s, v{report.version})")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Row builders
# ---------------------------------------------------------------------------


def _z_row(n, name, value, se, target) -> StatRow:
    ok = se > 0 and abs(value - target) <= Z_GATE * se
    return StatRow(n, name, float(value), float(se),
                   f"within {Z_GATE:g} SE of {target:.8g}", "pass" if ok else "fail")


def _cap_row(n, name, value, cap, se=None) -> StatRow:
    return StatRow(n, name, float(value), se, f"<= {cap:g}",
                   "pass" if value <= cap else "fail")


def _rel_cap_row(n, name, value, target, rel) -> StatRow:
    err = abs(value - target) / abs(target)
    return StatRow(n, name, float(value), None,
                   f"within {rel:.2%} of {target:.8g}", "pass" if err <= rel else "fail")


def _exact_row(n, name, value, tol=0.0) -> StatRow:
    return StatRow(n, name, float(value), None, f"|value| <= {tol:g}",
                   "pass" if abs(value) <= tol else "fail")


def _info_row(n, name, value, se=None) -> StatRow:
    return StatRow(n, name, float(value), se, "", "info")


def _monotone_row(name, values, resolutions, strict=True) -> StatRow:
    pairs = zip(values[:-1], values[1:])
    ok = all((b < a) if strict else (b <= a) for a, b in pairs)
    word = "strictly decreasing" if strict else "nonincreasing"
    return StatRow(resolutions[-1], name, float(values[-1]), None,
                   f"{word} along ladder {list(resolutions)}", "pass" if ok else "fail")


def _mean_se(x: np.ndarray):
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.shape[0]))


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def _run_covariance_check(cfg: ExperimentConfig):
    n = cfg.finest()
    grid = TimeGrid(cfg.horizon, n)
    paths = CirculantSampler(grid, cfg.hurst).batch(cfg.seed, cfg.n_paths, cfg.workers)
    rows = []
    for fa, fb in ((0.5, 1.0), (0.25, 0.75)):
        ia, ib = round(fa * n), round(fb * n)
        sa, tb = grid.times()[ia], grid.times()[ib]
        a, b = paths[:, ia], paths[:, ib]
        prods = (a - a.mean()) * (b - b.mean())
        value = prods.mean() * cfg.n_paths / (cfg.n_paths - 1)
        se = prods.std(ddof=1) / np.sqrt(cfg.n_paths)
        rows.append(_z_row(n, f"empirical_cov({sa:g},{tb:g})", value, se,
                           covariance(sa, tb, cfg.hurst)))
    sq = paths[:, -1] ** 2
    value, se = _mean_se(sq)
    rows.append(_z_row(n, "terminal_second_moment", value, se,
                       cfg.horizon ** as_hurst(cfg.hurst).two_h))
    return rows


def _run_qv_scaling(cfg: ExperimentConfig):
    res = cfg.resolutions
    fine_grid = TimeGrid(cfg.horizon, res[-1])
    fine = CirculantSampler(fine_grid, cfg.hurst).batch(cfg.seed, cfg.n_paths, cfg.workers)
    two_h = as_hurst(cfg.hurst).two_h
    means = {}
    rows = []
    for n in res:
        qv = quadratic_variation(fine[:, :: res[-1] // n])
        value, se = _mean_se(qv)
        means[n] = value
        target = n ** (1.0 - two_h) * cfg.horizon**two_h
        rows.append(_z_row(n, "mean_quadratic_variation", value, se, target))
    for a, b in zip(res[:-1], res[1:]):
        ratio = means[b] / means[a]
        target = (b / a) ** (1.0 - two_h)
        rows.append(_rel_cap_row(b, f"qv_ratio_{b}_over_{a}", ratio, target, 0.10))
    return rows


def _run_kernel_geometry(cfg: ExperimentConfig):
    rng = np.random.default_rng(cfg.seed)
    pairs = rng.uniform(0.0, cfg.horizon, size=(1000, 2))
    worst = 0.0
    for s, t in pairs:
        ip = indicator_inner_product(0.0, min(s, t), 0.0, max(s, t), cfg.hurst)
        cv = covariance(s, t, cfg.hurst)
        scale = max(abs(cv), 1e-300)
        worst = max(worst, abs(ip - cv) / scale)
    rows = [_cap_row(cfg.finest(), "indicator_vs_covariance_max_rel_gap", worst, 1e-12)]
    two_h = as_hurst(cfg.hurst).two_h
    norm_gap = indicator_inner_product(0.0, cfg.horizon, 0.0, cfg.horizon, cfg.hurst) \
        - cfg.horizon**two_h
    rows.append(_exact_row(cfg.finest(), "full_indicator_norm_gap", norm_gap))
    # kernel-smoothed derivative of 1_[0,s] at t = s has the closed value H s^(2H-1)
    grid = TimeGrid(cfg.horizon, cfg.finest())
    s = grid.times()[cfg.finest() // 2]
    fld = DerivativeField(indicator_step(grid, 0.0, s), "path_functional")
    gap = d_phi_derivative(fld, s, cfg.hurst) - as_hurst(cfg.hurst).h * s ** (two_h - 1.0)
    rows.append(_exact_row(cfg.finest(), "kernel_smoothed_indicator_gap", gap, 1e-12))
    return rows


def _run_wis_zero_mean(cfg: ExperimentConfig):
    n = cfg.finest()
    grid = TimeGrid(cfg.horizon, n)
    paths = CirculantSampler(grid, cfg.hurst).batch(cfg.seed, cfg.n_paths, cfg.workers)
    f = cfg.functional_obj() or coordinate()
    sums = wis_sum_batch(f, paths, grid, cfg.hurst)
    value, se = _mean_se(sums)
    return [_z_row(n, f"mean_wis_sum[{f.name}]", value, se, 0.0)]


def _ladder_rows(report, cap, strict=True, cap_name="rms_residual"):
    rows = [_info_row(r.resolution, "rms_residual", r.rms, r.se) for r in report.rows[:-1]]
    last = report.rows[-1]
    rows.append(_cap_row(last.resolution, cap_name, last.rms, cap, last.se))
    rows.append(_monotone_row("rms_ladder", report.rms_values(),
                              [r.resolution for r in report.rows], strict))
    return rows


def _formula_case(cfg: ExperimentConfig, default_functional, hurst=None) -> FormulaCase:
    f = cfg.functional_obj() or default_functional()
    return FormulaCase(
        functional=f,
        hurst=cfg.hurst if hurst is None else hurst,
        horizon=cfg.horizon,
        resolutions=cfg.resolutions,
        n_paths=cfg.n_paths,
        seed=cfg.seed,
        workers=cfg.workers,
    )


def _run_theorem32(cfg: ExperimentConfig):
    report = verify_theorem32(_formula_case(cfg, lambda: resolve_functional("product_integral")))
    return _ladder_rows(report, cap=0.02)


def _run_theorem50(cfg: ExperimentConfig):
    report = verify_theorem50(_formula_case(cfg, squared_coordinate))
    return _ladder_rows(report, cap=0.1)


def _run_wis_closed_form(cfg: ExperimentConfig):
    """Pathwise gap between the Wick sum of the path value and its closed form."""
    res = cfg.resolutions
    fine_grid = TimeGrid(cfg.horizon, res[-1])
    fine = CirculantSampler(fine_grid, cfg.hurst).batch(cfg.seed, cfg.n_paths, cfg.workers)
    two_h = as_hurst(cfg.hurst).two_h
    closed = 0.5 * (fine[:, -1] ** 2 - cfg.horizon**two_h)
    gamma = coordinate()
    rows = []
    rms_ladder = []
    for n in res:
        grid_n = TimeGrid(cfg.horizon, n)
        sums = wis_sum_batch(gamma, fine[:, :: res[-1] // n], grid_n, cfg.hurst)
        rms = float(np.sqrt(np.mean((sums - closed) ** 2)))
        rms_ladder.append(rms)
        if n == res[-1]:
            rows.append(_cap_row(n, "rms_gap_to_closed_form", rms, 0.05))
        else:
            rows.append(_info_row(n, "rms_gap_to_closed_form", rms))
    rows.append(_monotone_row("rms_ladder", rms_ladder, res, strict=True))
    return rows


def _run_prop54(cfg: ExperimentConfig):
    report = verify_prop54(_formula_case(cfg, coordinate))
    rows = _ladder_rows(report, cap=0.05, cap_name="rms_bridge_gap")
    n = cfg.finest()
    z = report.checks["z_expectation_identity"]
    rows.append(StatRow(n, "mean_stratonovich", report.checks["mean_stratonovich"],
                        report.checks["se_stratonovich"],
                        f"paired |z| <= {Z_GATE:g} against predicted mean "
                        f"{report.checks['mean_predicted']:.8g}",
                        "pass" if abs(z) <= Z_GATE else "fail"))
    return rows


def _run_prop45(cfg: ExperimentConfig):
    report = verify_prop45(_formula_case(cfg, coordinate))
    rows = [_info_row(r.resolution, "rms_midpoint_vs_leftpoint", r.rms, r.se)
            for r in report.rows]
    rows.append(_monotone_row("rms_ladder", report.rms_values(),
                              [r.resolution for r in report.rows], strict=True))
    return rows


def _run_prop43(cfg: ExperimentConfig):
    report = verify_prop43(_formula_case(cfg, coordinate, hurst=0.5))
    rows = [_info_row(r.resolution, "rms_residual", r.rms, r.se) for r in report.rows]
    rows.append(_monotone_row("rms_ladder", report.rms_values(),
                              [r.resolution for r in report.rows], strict=False))
    rows.append(_z_row(cfg.finest(), "mean_midpoint_minus_leftpoint",
                       report.checks["mean_gap"], report.checks["se_gap"],
                       report.checks["mean_correction"]))
    return rows


def _run_theorem20(cfg: ExperimentConfig):
    report = verify_theorem20(_formula_case(
        cfg, lambda: resolve_functional("t_gamma_squared"), hurst=0.5))
    return _ladder_rows(report, cap=0.02)


def _run_bm_stratonovich(cfg: ExperimentConfig):
    report = verify_bm_stratonovich_theorem(_formula_case(
        cfg, lambda: resolve_functional("t_gamma_squared"), hurst=0.5))
    rows = [_info_row(r.resolution, "rms_residual", r.rms, r.se) for r in report.rows]
    rows.append(_monotone_row("rms_ladder", report.rms_values(),
                              [r.resolution for r in report.rows], strict=False))
    return rows


def _run_wis_variance_identity(cfg: ExperimentConfig):
    n = cfg.finest()
    grid = TimeGrid(cfg.horizon, n)
    two_h = as_hurst(cfg.hurst).two_h
    target = cfg.horizon ** (2.0 * two_h) / 4.0
    quad = covariance_phi_integral(grid, cfg.hurst)
    rows = [_rel_cap_row(n, "kernel_weighted_covariance_quadrature", quad, target, 0.01)]
    # Monte Carlo self-consistency at desk scale on a coarser grid
    mc_n = min(256, n)
    mc_grid = TimeGrid(cfg.horizon, mc_n)
    paths = CirculantSampler(mc_grid, cfg.hurst).batch(cfg.seed, cfg.n_paths, cfg.workers)
    gamma = coordinate()
    est = wis_variance(gamma, paths, mc_grid, cfg.hurst)
    sums = wis_sum_batch(gamma, paths, mc_grid, cfg.hurst)
    emp = sums**2  # zero-mean integral, so the second moment is the variance
    emp_mean, emp_se = _mean_se(emp)
    diff_se = float(np.hypot(est.se, emp_se))
    ok = abs(est.value - emp_mean) <= Z_GATE * diff_se
    rows.append(StatRow(mc_n, "wis_second_moment_estimate", est.value, est.se,
                        f"within {Z_GATE:g} SE of empirical {emp_mean:.6g}",
                        "pass" if ok else "fail"))
    return rows


def _bsde_setup(cfg: ExperimentConfig, terminal, f):
    grid = TimeGrid(cfg.horizon, cfg.finest())
    paths = CirculantSampler(grid, cfg.hurst).batch(cfg.seed, cfg.n_paths, cfg.workers)
    spec = bsde_mod.BsdeSpec(terminal=terminal, driver_f=f, hurst=cfg.hurst)
    return grid, paths, spec


def _zero_driver(t, prefix, y, z):
    return np.zeros_like(np.asarray(y, dtype=float))


def _run_bsde_residual(cfg: ExperimentConfig):
    from .functionals import constant_functional, cylindrical

    n = cfg.finest()
    two_h = as_hurst(cfg.hurst).two_h
    rows = []
    # terminal value = path endpoint; solution Y = path value, Z = -1
    grid, paths, spec = _bsde_setup(cfg, coordinate(), _zero_driver)
    sol = bsde_mod.bsde_from_pde(coordinate(), paths, grid, spec)
    rep = bsde_mod.bsde_residual(sol, paths, spec)
    rows.append(_exact_row(n, "linear_case_max_abs_residual", rep.max_abs, 1e-9))
    zrep = bsde_mod.z_relation_check(coordinate(), constant_functional(-1.0), paths, grid)
    rows.append(_exact_row(n, "linear_case_z_relation_gap", zrep.max_abs_gap, 1e-12))
    # terminal value = endpoint squared; Y = x^2 + T^2H - t^2H, Z = -2x
    u_sq = cylindrical(
        lambda t, x: x * x + cfg.horizon**two_h - t**two_h,
        ft=lambda t, x: -two_h * t ** (two_h - 1.0),
        fx=lambda t, x: 2.0 * x,
        fxx=lambda t, x: 2.0,
        name="u_quadratic",
    )
    sol2 = bsde_mod.bsde_from_pde(u_sq, paths, grid, spec)
    rep2 = bsde_mod.bsde_residual(sol2, paths, spec)
    rows.append(_cap_row(n, "quadratic_case_rms_residual", rep2.rms, 0.05))
    v_sq = cylindrical(lambda t, x: -2.0 * x, name="minus_two_gamma")
    zrep2 = bsde_mod.z_relation_check(u_sq, v_sq, paths, grid)
    rows.append(_exact_row(n, "quadratic_case_z_relation_gap", zrep2.max_abs_gap, 1e-12))
    return rows


def _run_picard(cfg: ExperimentConfig):
    from .functionals import constant_functional

    n = cfg.finest()
    two_h = as_hurst(cfg.hurst).two_h
    basis = (constant_functional(1.0), coordinate(), squared_coordinate())
    grid, paths, spec = _bsde_setup(cfg, squared_coordinate(), _zero_driver)
    config = bsde_mod.PicardConfig(basis=basis, iterations=2)
    sol = bsde_mod.picard_solve(spec, config, paths, grid)
    y0 = float(sol.y[0, 0])
    target = cfg.horizon**two_h
    rows = [_rel_cap_row(n, "y0_vs_closed_form", y0, target, 0.02)]
    rows.append(_exact_row(n, "fixed_point_reached_after_first_sweep",
                           sol.diagnostics["beta_norm_steps"][-1], 1e-12))
    # linear driver f = -y: iterate distances must decrease sweep over sweep
    spec_decay = bsde_mod.BsdeSpec(terminal=squared_coordinate(),
                                   driver_f=lambda t, prefix, y, z: -np.asarray(y, dtype=float),
                                   hurst=cfg.hurst, lipschitz=1.0)
    config8 = bsde_mod.PicardConfig(basis=basis, iterations=8)
    sol8 = bsde_mod.picard_solve(spec_decay, config8, paths, grid)
    steps = sol8.diagnostics["beta_norm_steps"]
    ok = all(b < a for a, b in zip(steps[:-1], steps[1:]))
    rows.append(StatRow(n, "iterate_distance_final", float(steps[-1]), None,
                        "weighted-norm iterate distances strictly decreasing",
                        "pass" if ok else "fail"))
    return rows


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentEntry:
    id: str
    statement: str
    runner: object
    defaults: dict
    statistical: bool = True


def _entry(id, statement, runner, statistical=True, **defaults):
    return ExperimentEntry(id, statement, runner, defaults, statistical)


_REGISTRY = [
    _entry("covariance_check",
           "sampled paths reproduce the two-time covariance of the driver law",
           _run_covariance_check, resolutions=(256,), n_paths=20000),
    _entry("qv_scaling",
           "quadratic variation vanishes like n^(1-2H) under grid refinement",
           _run_qv_scaling, resolutions=(512, 1024), n_paths=10000),
    _entry("kernel_geometry",
           "closed-form kernel inner products match the driver covariance exactly",
           _run_kernel_geometry, statistical=False, resolutions=(1024,), n_paths=100),
    _entry("prop26",
           "the Wick-corrected Riemann integral has zero mean",
           _run_wis_zero_mean, resolutions=(1024,), n_paths=10000, functional="gamma"),
    _entry("theorem32",
           "change-of-variables for functionals of fractionally driven processes "
           "(midpoint integral form)",
           _run_theorem32, resolutions=(256, 512, 1024, 2048), n_paths=1000,
           functional="product_integral"),
    _entry("theorem50",
           "change-of-variables with the zero-mean integral and the H t^(2H-1) "
           "second-order correction",
           _run_theorem50, resolutions=(512, 1024, 2048, 4096), n_paths=1000,
           functional="gamma_squared"),
    _entry("wis_closed_form",
           "Wick integral of the path value against itself matches its closed form "
           "pathwise",
           _run_wis_closed_form, resolutions=(512, 1024, 2048, 4096), n_paths=1000),
    _entry("prop54",
           "bridge between Wick and midpoint integrals; mean of midpoint sums",
           _run_prop54, resolutions=(256, 512, 1024), n_paths=10000, functional="gamma"),
    _entry("prop45",
           "midpoint and left-point sums coincide in the long-memory regime",
           _run_prop45, resolutions=(512, 1024, 2048), n_paths=1000, functional="gamma"),
    _entry("prop43",
           "Brownian midpoint correction equals half the time integral of the "
           "vertical derivative",
           _run_prop43, resolutions=(256, 512, 1024, 2048), n_paths=1000,
           functional="gamma", hurst=0.5),
    _entry("theorem20",
           "classical Brownian change-of-variables benchmark",
           _run_theorem20, resolutions=(256, 512, 1024, 2048), n_paths=1000,
           functional="t_gamma_squared", hurst=0.5),
    _entry("bm_stratonovich",
           "Brownian change-of-variables in midpoint form",
           _run_bm_stratonovich, resolutions=(256, 512, 1024), n_paths=1000,
           functional="t_gamma_squared", hurst=0.5),
    _entry("wis_variance_identity",
           "second moment of the Wick integral decomposes into kernel norm plus "
           "smoothed-derivative terms",
           _run_wis_variance_identity, resolutions=(1024,), n_paths=4000),
    _entry("bsde_residual",
           "solution pairs built from closed-form PDE solutions satisfy the "
           "backward integral identity",
           _run_bsde_residual, resolutions=(2048,), n_paths=256),
    _entry("picard",
           "dictionary-regression fixed point reproduces the closed-form initial "
           "value and contracts",
           _run_picard, resolutions=(512,), n_paths=10000, seed=42),
]

_BY_ID = {e.id: e for e in _REGISTRY}


def list_experiments():
    """Catalog of registered verifications."""
    return list(_REGISTRY)


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    entry = _BY_ID.get(experiment)
    if entry is None:
        known = ", ".join(sorted(_BY_ID))
        raise ValueError(f"unknown experiment {experiment!r}; known: {known}")
    params = dict(entry.defaults)
    params.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **params)


def validate_config(cfg: ExperimentConfig) -> ExperimentEntry:
    entry = _BY_ID.get(cfg.experiment)
    if entry is None:
        known = ", ".join(sorted(_BY_ID))
        raise ValueError(f"unknown experiment {cfg.experiment!r}; known: {known}")
    if not cfg.resolutions:
        raise ValueError("missing field: resolutions (grid ladder)")
    if sorted(cfg.resolutions) != list(cfg.resolutions):
        raise ValueError("resolutions must be ascending")
    if any(cfg.resolutions[-1] % n != 0 for n in cfg.resolutions):
        raise ValueError("every resolution must divide the finest one")
    if entry.statistical and cfg.n_paths < MIN_STATISTICAL_PATHS:
        raise ValueError(f"statistical experiments need n_paths >= {MIN_STATISTICAL_PATHS}")
    if cfg.fmt not in ("json", "csv"):
        raise ValueError(f"format must be 'json' or 'csv', got {cfg.fmt!r}")
    if cfg.functional:
        resolve_functional(cfg.functional)
    as_hurst(cfg.hurst)
    return entry


def run(cfg: ExperimentConfig) -> ExperimentReport:
    """Dispatch one experiment; identical config and seed give identical rows."""
    entry = validate_config(cfg)
    start = time.perf_counter()
    rows = entry.runner(cfg)
    elapsed = time.perf_counter() - start
    config_echo = {
        "experiment": cfg.experiment, "hurst": cfg.hurst, "horizon": cfg.horizon,
        "resolutions": list(cfg.resolutions), "n_paths": cfg.n_paths,
        "seed": cfg.seed, "functional": cfg.functional, "workers": cfg.workers,
    }
    passed = all(r.verdict != "fail" for r in rows)
    report = ExperimentReport(cfg.experiment, config_echo, rows, passed,
                              elapsed, __version__)
    if cfg.out:
        write_report(report, cfg.out, cfg.fmt)
    return report


def default_output_path(experiment: str, fmt: str) -> str | None:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not base:
        return None
    return os.path.join(base, f"{experiment}.{fmt}")


def write_report(report: ExperimentReport, path: str, fmt: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    text = report.to_json() if fmt == "json" else report.to_csv()
    with open(path, "w") as fh:
        fh.write(text)
