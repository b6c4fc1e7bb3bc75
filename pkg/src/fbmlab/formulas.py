"""Monte Carlo residual checks for the functional change-of-variables formulas.

Each ``verify_*`` engine simulates a batch of driver paths at the finest
requested resolution, views every coarser resolution as a strict subsample of
the same paths (so resolution-to-resolution differences measure
discretisation error, not sampling noise), evaluates both sides of the
identity under test, and reports per-resolution residual statistics.

Residuals are exactly zero, at every resolution, whenever the identity
telescopes (affine functionals); otherwise the reports track how the RMS
residual shrinks along the resolution ladder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fbm import CirculantSampler
from .functionals import Functional
from .grids import TimeGrid, as_hurst
from .integrals import ItoProcessSpec, build_ito_process
from .kernel import constant_step, time_weight_cell_masses, wick_cell_corrections


@dataclass(frozen=True)
class FormulaCase:
    """One verification setup: functional, driver law, ladder, sample size."""

    functional: Functional
    hurst: float = 0.7
    horizon: float = 1.0
    resolutions: tuple = (256, 512, 1024)
    n_paths: int = 1000
    seed: int = 0
    process: ItoProcessSpec | None = None
    workers: int = 1

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolutions)
        if not res or any(n < 1 for n in res):
            raise ValueError("resolution ladder must contain positive step counts")
        if list(res) != sorted(res):
            raise ValueError("resolution ladder must be ascending")
        if any(res[-1] % n != 0 for n in res):
            raise ValueError("every ladder resolution must divide the finest one "
                             "(coupled subsampling)")
        if self.n_paths < 2:
            raise ValueError("need at least 2 paths for residual statistics")
        object.__setattr__(self, "resolutions", res)


@dataclass(frozen=True)
class ResolutionStats:
    resolution: int
    mean: float
    se: float
    rms: float


@dataclass
class ResidualReport:
    """Per-resolution residual statistics on coupled paths."""

    formula: str
    rows: list
    ratios: list
    checks: dict = field(default_factory=dict)

    def rms_values(self):
        return [r.rms for r in self.rows]


def _require(functional: Functional, tag: str, formula: str):
    if not functional.at_least(tag):
        raise ValueError(f"{formula} needs a {tag} functional; "
                         f"{functional.name!r} is {functional.smoothness}")


def _require_fractional(case: FormulaCase, formula: str):
    if as_hurst(case.hurst).is_brownian:
        raise ValueError(f"{formula} is stated for fractional drivers (H > 1/2); "
                         "use the Brownian checks for H = 1/2")


def _require_brownian(case: FormulaCase, formula: str):
    if not as_hurst(case.hurst).is_brownian:
        raise ValueError(f"{formula} drives the process by Brownian motion; set hurst=0.5")


def _require_raw_driver(case: FormulaCase, formula: str):
    if case.process is not None:
        raise ValueError(f"{formula} is restricted to integrands of the driver history "
                         "itself; drop the process spec")


def _simulate(case: FormulaCase, need_midpoints: bool):
    factor = 2 if need_midpoints else 1
    fine_grid = TimeGrid(case.horizon, factor * case.resolutions[-1])
    sampler = CirculantSampler(fine_grid, case.hurst)
    values = sampler.batch(case.seed, case.n_paths, case.workers)
    return values, fine_grid


def _default_process(case: FormulaCase) -> ItoProcessSpec:
    coarse = TimeGrid(case.horizon, case.resolutions[0])
    driver = "brownian" if as_hurst(case.hurst).is_brownian else "fbm"
    return ItoProcessSpec(0.0, constant_step(coarse, 0.0), constant_step(coarse, 1.0), driver)


def _stats(residuals: np.ndarray, n: int) -> ResolutionStats:
    m = residuals.shape[0]
    return ResolutionStats(
        resolution=n,
        mean=float(residuals.mean()),
        se=float(residuals.std(ddof=1) / np.sqrt(m)),
        rms=float(np.sqrt(np.mean(residuals**2))),
    )


def _assemble(formula: str, per_resolution: dict, checks: dict | None = None) -> ResidualReport:
    rows = [_stats(res, n) for n, res in per_resolution.items()]
    rms = [r.rms for r in rows]
    ratios = [rms[i + 1] / rms[i] if rms[i] > 0.0 else float("nan") for i in range(len(rms) - 1)]
    return ResidualReport(formula, rows, ratios, checks or {})


def _dt_sum(functional, x, grid):
    return functional.dt_along(x, grid)[:, :-1].sum(axis=1) * grid.spacing


def verify_theorem32(case: FormulaCase) -> ResidualReport:
    """Change-of-variables for processes driven by a fractional driver.

    residual = [F(X_T) - F(X_0)]
             - [sum dt-derivative dt + sum dx-derivative * drift dt
                + midpoint sum of dx-derivative * volatility dB].
    """
    _require(case.functional, "C12", "theorem32")
    _require_fractional(case, "theorem32")
    spec = case.process or _default_process(case)
    fine, fine_grid = _simulate(case, need_midpoints=True)
    f = case.functional
    per_res = {}
    for n in case.resolutions:
        half_grid = TimeGrid(case.horizon, 2 * n)
        d_half = fine[:, :: fine_grid.steps // (2 * n)]
        x_half = build_ito_process(spec, d_half, half_grid)
        d_c, x_c = d_half[:, ::2], x_half[:, ::2]
        grid_n = TimeGrid(case.horizon, n)
        fser = f.eval_along(x_c, grid_n)
        lhs = fser[:, -1] - fser[:, 0]
        term_dt = _dt_sum(f, x_c, grid_n)
        psi = spec.drift.values_on(grid_n)
        term_drift = (f.dx_along(x_c, grid_n)[:, :-1] * psi).sum(axis=1) * grid_n.spacing
        phi = spec.volatility.values_on(grid_n)
        dx_mid = f.dx_along(x_half, half_grid)[:, 1::2]
        term_strat = (dx_mid * phi * np.diff(d_c, axis=-1)).sum(axis=1)
        per_res[n] = lhs - (term_dt + term_drift + term_strat)
    return _assemble("theorem32", per_res)


def verify_theorem50(case: FormulaCase) -> ResidualReport:
    """Change-of-variables with the zero-mean (Wick) integral.

    residual = [F(B_T) - F(B_0)]
             - [sum dt-derivative dt + Wick sum of dx-derivative
                + second vertical derivative against the exact cell masses of
                H t^(2H-1) dt].
    """
    _require(case.functional, "C12", "theorem50")
    _require_fractional(case, "theorem50")
    _require_raw_driver(case, "theorem50")
    fine, fine_grid = _simulate(case, need_midpoints=False)
    f = case.functional
    per_res = {}
    for n in case.resolutions:
        b = fine[:, :: fine_grid.steps // n]
        grid_n = TimeGrid(case.horizon, n)
        fser = f.eval_along(b, grid_n)
        lhs = fser[:, -1] - fser[:, 0]
        term_dt = _dt_sum(f, b, grid_n)
        dx = f.dx_along(b, grid_n)[:, :-1]
        dxx = f.dxx_along(b, grid_n)[:, :-1]
        wis = (dx * np.diff(b, axis=-1)).sum(axis=1) - dxx @ wick_cell_corrections(grid_n, case.hurst)
        term_xx = dxx @ time_weight_cell_masses(grid_n, case.hurst)
        per_res[n] = lhs - (term_dt + wis + term_xx)
    return _assemble("theorem50", per_res)


def verify_prop54(case: FormulaCase) -> ResidualReport:
    """Bridge between the Wick sum and the midpoint sum.

    residual = Wick sum - [midpoint sum - dx-derivative against the exact
    cell masses of H t^(2H-1) dt].  The checks record the mean of the midpoint
    sum together with the mean the bridge predicts for it, with a paired
    z-score for their difference.
    """
    _require(case.functional, "C11", "prop54")
    _require_fractional(case, "prop54")
    _require_raw_driver(case, "prop54")
    fine, fine_grid = _simulate(case, need_midpoints=True)
    f = case.functional
    per_res = {}
    checks = {}
    for n in case.resolutions:
        half_grid = TimeGrid(case.horizon, 2 * n)
        b_half = fine[:, :: fine_grid.steps // (2 * n)]
        b = b_half[:, ::2]
        grid_n = TimeGrid(case.horizon, n)
        dx = f.dx_along(b, grid_n)[:, :-1]
        fleft = f.eval_along(b, grid_n)[:, :-1]
        wis = (fleft * np.diff(b, axis=-1)).sum(axis=1) - dx @ wick_cell_corrections(grid_n, case.hurst)
        f_mid = f.eval_along(b_half, half_grid)[:, 1::2]
        strat = (f_mid * np.diff(b, axis=-1)).sum(axis=1)
        drift_corr = dx @ time_weight_cell_masses(grid_n, case.hurst)
        per_res[n] = wis - (strat - drift_corr)
        if n == case.resolutions[-1]:
            m = case.n_paths
            diff = strat - drift_corr
            checks["mean_stratonovich"] = float(strat.mean())
            checks["se_stratonovich"] = float(strat.std(ddof=1) / np.sqrt(m))
            checks["mean_predicted"] = float(drift_corr.mean())
            se_diff = float(diff.std(ddof=1) / np.sqrt(m))
            checks["z_expectation_identity"] = float(diff.mean() / se_diff) if se_diff > 0 else 0.0
    return _assemble("prop54", per_res, checks)


def verify_prop45(case: FormulaCase) -> ResidualReport:
    """Midpoint and left-point sums coincide in the limit for H > 1/2.

    The residual is their gap per path; its RMS must shrink along the ladder.
    """
    _require(case.functional, "C11", "prop45")
    _require_fractional(case, "prop45")
    spec = case.process or _default_process(case)
    fine, fine_grid = _simulate(case, need_midpoints=True)
    f = case.functional
    per_res = {}
    for n in case.resolutions:
        half_grid = TimeGrid(case.horizon, 2 * n)
        d_half = fine[:, :: fine_grid.steps // (2 * n)]
        x_half = build_ito_process(spec, d_half, half_grid)
        d_c, x_c = d_half[:, ::2], x_half[:, ::2]
        grid_n = TimeGrid(case.horizon, n)
        inc = np.diff(d_c, axis=-1)
        left = (f.eval_along(x_c, grid_n)[:, :-1] * inc).sum(axis=1)
        mid = (f.eval_along(x_half, half_grid)[:, 1::2] * inc).sum(axis=1)
        per_res[n] = mid - left
    return _assemble("prop45", per_res)


def verify_prop43(case: FormulaCase) -> ResidualReport:
    """Brownian midpoint correction: midpoint sum minus left sum approaches
    half the time integral of the dx-derivative times the volatility.
    """
    _require(case.functional, "C11", "prop43")
    _require_brownian(case, "prop43")
    spec = case.process or _default_process(case)
    fine, fine_grid = _simulate(case, need_midpoints=True)
    f = case.functional
    per_res = {}
    checks = {}
    for n in case.resolutions:
        half_grid = TimeGrid(case.horizon, 2 * n)
        d_half = fine[:, :: fine_grid.steps // (2 * n)]
        x_half = build_ito_process(spec, d_half, half_grid)
        d_c, x_c = d_half[:, ::2], x_half[:, ::2]
        grid_n = TimeGrid(case.horizon, n)
        inc = np.diff(d_c, axis=-1)
        left = (f.eval_along(x_c, grid_n)[:, :-1] * inc).sum(axis=1)
        mid = (f.eval_along(x_half, half_grid)[:, 1::2] * inc).sum(axis=1)
        gap = mid - left
        phi = spec.volatility.values_on(grid_n)
        correction = 0.5 * (f.dx_along(x_c, grid_n)[:, :-1] * phi).sum(axis=1) * grid_n.spacing
        per_res[n] = gap - correction
        if n == case.resolutions[-1]:
            m = case.n_paths
            checks["mean_gap"] = float(gap.mean())
            checks["se_gap"] = float(gap.std(ddof=1) / np.sqrt(m))
            checks["mean_correction"] = float(correction.mean())
    return _assemble("prop43", per_res, checks)


def verify_theorem20(case: FormulaCase) -> ResidualReport:
    """Classical Brownian benchmark with the half second-derivative term.

    residual = [F(X_T) - F(X_0)] - [sum dt dt + sum dx * drift dt
              + left sum of dx * volatility dW
              + (1/2) sum dxx * volatility^2 dt].
    """
    _require(case.functional, "C12", "theorem20")
    _require_brownian(case, "theorem20")
    spec = case.process or _default_process(case)
    fine, fine_grid = _simulate(case, need_midpoints=False)
    f = case.functional
    per_res = {}
    for n in case.resolutions:
        grid_n = TimeGrid(case.horizon, n)
        d_c = fine[:, :: fine_grid.steps // n]
        x_c = build_ito_process(spec, d_c, grid_n)
        fser = f.eval_along(x_c, grid_n)
        lhs = fser[:, -1] - fser[:, 0]
        psi = spec.drift.values_on(grid_n)
        phi = spec.volatility.values_on(grid_n)
        dx = f.dx_along(x_c, grid_n)[:, :-1]
        dxx = f.dxx_along(x_c, grid_n)[:, :-1]
        rhs = (
            _dt_sum(f, x_c, grid_n)
            + (dx * psi).sum(axis=1) * grid_n.spacing
            + (dx * phi * np.diff(d_c, axis=-1)).sum(axis=1)
            + 0.5 * (dxx * phi**2).sum(axis=1) * grid_n.spacing
        )
        per_res[n] = lhs - rhs
    return _assemble("theorem20", per_res)


def verify_bm_stratonovich_theorem(case: FormulaCase) -> ResidualReport:
    """Brownian change-of-variables in midpoint form (no second-order term).

    For step coefficients the midpoint construction of the process coincides
    with the left-point one, so the same driven path feeds both sides.
    """
    _require(case.functional, "C12", "bm_stratonovich")
    _require_brownian(case, "bm_stratonovich")
    spec = case.process or _default_process(case)
    fine, fine_grid = _simulate(case, need_midpoints=True)
    f = case.functional
    per_res = {}
    for n in case.resolutions:
        half_grid = TimeGrid(case.horizon, 2 * n)
        d_half = fine[:, :: fine_grid.steps // (2 * n)]
        x_half = build_ito_process(spec, d_half, half_grid)
        d_c, x_c = d_half[:, ::2], x_half[:, ::2]
        grid_n = TimeGrid(case.horizon, n)
        fser = f.eval_along(x_c, grid_n)
        lhs = fser[:, -1] - fser[:, 0]
        psi = spec.drift.values_on(grid_n)
        phi = spec.volatility.values_on(grid_n)
        dx_mid = f.dx_along(x_half, half_grid)[:, 1::2]
        rhs = (
            _dt_sum(f, x_c, grid_n)
            + (f.dx_along(x_c, grid_n)[:, :-1] * psi).sum(axis=1) * grid_n.spacing
            + (dx_mid * phi * np.diff(d_c, axis=-1)).sum(axis=1)
        )
        per_res[n] = lhs - rhs
    return _assemble("bm_stratonovich", per_res)
