"""Backward equations with path-dependent coefficients and their PDE link.

A solution pair (Y, Z) must satisfy, for every time t on the grid,

    Y(t) = g(B_T) + integral_t^T f(B_s, Y(s), Z(s)) ds
                  + Wick integral_t^T Z(s) dB(s),

with the ds-integral taken as a left-point sum and the Wick integral as the
corrected left-point sum.  The Wick corrections always pair each cell with
the full history [0, t_left], even when the integral starts later: the
derivative-in-the-noise of an adapted integrand still sees everything before
the cell.

Solutions come from two routes: evaluating a classical solution of the
associated path-dependent PDE along the driver (``bsde_from_pde``), or a
regression-based fixed-point iteration over a dictionary of path functionals
(``picard_solve``), the discrete least-squares Monte Carlo realisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import Functional, StoppedPath
from .grids import TimeGrid, as_hurst
from .kernel import time_weight_cell_masses, wick_cell_corrections


def diffusion_coefficient(t, hurst) -> np.ndarray:
    """Time-dependent second-order coefficient H t^(2H-1) of the PDE."""
    hp = as_hurst(hurst)
    return hp.h * np.asarray(t, dtype=float) ** (hp.two_h - 1.0)


@dataclass(frozen=True)
class BsdeSpec:
    """Terminal condition g, driver f(t, prefix values, y, z), and the noise law.

    ``terminal`` is a functional evaluated on the full path; ``driver_f`` must
    broadcast over a leading batch axis.  ``lipschitz`` declares the Lipschitz
    constant of f in (y, z); it is recorded, not checked.
    """

    terminal: Functional
    driver_f: callable
    hurst: float
    lipschitz: float = 0.0


@dataclass
class BsdeSolution:
    """Adapted pair on the grid, per path.

    ``z_vertical`` is the vertical derivative of the Z functional at each
    prefix; the Wick corrections of the residual check need it.
    """

    y: np.ndarray
    z: np.ndarray
    z_vertical: np.ndarray | None
    grid: TimeGrid
    hurst: float
    provenance: str  # from_pde | picard
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# PDE side
# ---------------------------------------------------------------------------


def _require_closed(u: Functional):
    missing = [w for w in ("dt", "dx", "dxx") if not u.has_closed(w)]
    if missing:
        raise ValueError(f"PDE residuals need closed-form derivatives; "
                         f"{u.name!r} lacks {', '.join(missing)}")


def pde_residual_along(u: Functional, values, grid: TimeGrid, hurst, f) -> np.ndarray:
    """Left side of the PDE at every cursor of the sampled path(s).

    residual = dt-derivative + H t^(2H-1) * dxx-derivative
             + f(prefix, u, -dx-derivative).
    """
    _require_closed(u)
    values = np.asarray(values, dtype=float)
    t = grid.times()[: values.shape[-1]]
    uval = u.eval_along(values, grid)
    dxu = u.dx_along(values, grid)
    out = u.dt_along(values, grid) + diffusion_coefficient(t, hurst) * u.dxx_along(values, grid)
    for k in range(values.shape[-1]):
        out[..., k] += f(t[k], values[..., : k + 1], uval[..., k], -dxu[..., k])
    return out


def pde_residual(u: Functional, path: StoppedPath, hurst, f) -> float:
    """PDE residual at one stopped path."""
    return float(pde_residual_along(u, path.prefix(), path.grid, hurst, f)[-1])


def bsde_from_pde(u: Functional, paths: np.ndarray, grid: TimeGrid, spec: BsdeSpec,
                  tol: float = 1e-8) -> BsdeSolution:
    """Turn a classical PDE solution into a solution pair along sampled paths.

    Y = u along the path, Z = -(dx-derivative of u).  The PDE residual is
    checked on all sampled prefixes strictly before the horizon first; the
    worst offender is reported on failure.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    res = pde_residual_along(u, paths, grid, spec.hurst, spec.driver_f)[:, :-1]
    worst = np.unravel_index(np.argmax(np.abs(res)), res.shape)
    if abs(res[worst]) > tol:
        raise ValueError(
            f"candidate {u.name!r} does not solve the PDE: residual {res[worst]:.3e} "
            f"at path {worst[0]}, time index {worst[1]} (tolerance {tol:.1e})"
        )
    y = u.eval_along(paths, grid)
    z = -u.dx_along(paths, grid)
    z_vert = -u.dxx_along(paths, grid) if u.has_closed("dxx") else None
    return BsdeSolution(y, z, z_vert, grid, spec.hurst, "from_pde")


# ---------------------------------------------------------------------------
# Residual of the backward integral identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BsdeResidualReport:
    rms: float
    mean: float
    se: float
    max_abs: float
    per_time_rms: np.ndarray


def _driver_values(spec: BsdeSpec, paths, grid, y, z) -> np.ndarray:
    n = grid.steps
    t = grid.times()
    out = np.empty((paths.shape[0], n))
    for i in range(n):
        out[:, i] = spec.driver_f(t[i], paths[:, : i + 1], y[:, i], z[:, i])
    return out


def bsde_residual(solution: BsdeSolution, paths: np.ndarray, spec: BsdeSpec) -> BsdeResidualReport:
    """Residual of the backward identity at every grid time, per path."""
    if solution.z_vertical is None:
        raise ValueError("residual check needs the vertical derivative of Z for the "
                         "Wick corrections; the solution does not carry it")
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    grid = solution.grid
    g = spec.terminal.eval_along(paths, grid)[:, -1]
    fvals = _driver_values(spec, paths, grid, solution.y, solution.z)
    corr = wick_cell_corrections(grid, solution.hurst)
    wis_cells = solution.z[:, :-1] * np.diff(paths, axis=-1) - solution.z_vertical[:, :-1] * corr
    # suffix sums over cells i > k
    tail_f = np.zeros((paths.shape[0], grid.steps + 1))
    tail_f[:, :-1] = np.cumsum(fvals[:, ::-1], axis=1)[:, ::-1] * grid.spacing
    tail_w = np.zeros_like(tail_f)
    tail_w[:, :-1] = np.cumsum(wis_cells[:, ::-1], axis=1)[:, ::-1]
    residual = solution.y - (g[:, None] + tail_f + tail_w)
    m = residual.size
    return BsdeResidualReport(
        rms=float(np.sqrt(np.mean(residual**2))),
        mean=float(residual.mean()),
        se=float(residual.std(ddof=1) / np.sqrt(m)),
        max_abs=float(np.max(np.abs(residual))),
        per_time_rms=np.sqrt(np.mean(residual**2, axis=0)),
    )


# ---------------------------------------------------------------------------
# Regression-based fixed point (least-squares Monte Carlo)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PicardConfig:
    """Dictionary regression settings for the backward fixed point."""

    basis: tuple
    iterations: int = 4
    beta: float = 0.0
    ridge: float = 0.0

    def __post_init__(self):
        if len(self.basis) == 0:
            raise ValueError("regression basis must be nonempty")
        if self.iterations < 1:
            raise ValueError("need at least one fixed-point iteration")
        if self.beta < 0 or self.ridge < 0:
            raise ValueError("beta and ridge must be nonnegative")


def beta_norm(delta: np.ndarray, beta: float, grid: TimeGrid) -> float:
    """Exponentially weighted L2 norm sqrt(E integral e^(beta t) |delta|^2 dt)."""
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    w = np.exp(beta * grid.times()[:-1]) * grid.spacing
    return float(np.sqrt(np.mean(delta[:, :-1] ** 2 @ w)))


def _fit_slice(design: np.ndarray, target: np.ndarray, ridge: float):
    if ridge > 0.0:
        k = design.shape[1]
        gram = design.T @ design + ridge * np.eye(k)
        try:
            return np.linalg.solve(gram, design.T @ target)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"regression system singular even with ridge={ridge}; increase ridge"
            ) from exc
    coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    if not np.all(np.isfinite(coef)):
        raise np.linalg.LinAlgError("regression produced non-finite coefficients; "
                                    "try a ridge penalty")
    return coef


def picard_solve(spec: BsdeSpec, config: PicardConfig, paths: np.ndarray,
                 grid: TimeGrid) -> BsdeSolution:
    """Fixed-point iteration with cross-sectional dictionary regression.

    Each sweep regresses, at every grid time t_j moving backward, the pathwise
    target g(B_T) + sum_{s >= t_j} f(B_s, Y, Z) ds onto the dictionary
    evaluated at the path prefixes; the fitted combination gives the next Y,
    and minus its vertical derivative gives the next Z.  The report records
    the weighted-norm distance between consecutive iterates.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    n = grid.steps
    for b in config.basis:
        if not b.has_closed("dx"):
            raise ValueError(f"basis functional {b.name!r} needs a closed-form "
                             "vertical derivative for the Z update")
    design = np.stack([b.eval_along(paths, grid) for b in config.basis], axis=-1)  # (M, n+1, B)
    design_dx = np.stack([b.dx_along(paths, grid) for b in config.basis], axis=-1)
    has_dxx = all(b.has_closed("dxx") for b in config.basis)
    design_dxx = (np.stack([b.dxx_along(paths, grid) for b in config.basis], axis=-1)
                  if has_dxx else None)
    g = spec.terminal.eval_along(paths, grid)[:, -1]

    y = np.zeros((paths.shape[0], n + 1))
    z = np.zeros_like(y)
    z_vert = np.zeros_like(y) if has_dxx else None
    norm_history = []
    for _ in range(config.iterations):
        fvals = _driver_values(spec, paths, grid, y, z)
        targets = np.empty_like(y)
        targets[:, -1] = g
        targets[:, :-1] = g[:, None] + np.cumsum(fvals[:, ::-1], axis=1)[:, ::-1] * grid.spacing
        y_next = np.empty_like(y)
        z_next = np.empty_like(y)
        z_vert_next = np.empty_like(y) if has_dxx else None
        for j in range(n, -1, -1):
            coef = _fit_slice(design[:, j, :], targets[:, j], config.ridge)
            y_next[:, j] = design[:, j, :] @ coef
            z_next[:, j] = -(design_dx[:, j, :] @ coef)
            if has_dxx:
                z_vert_next[:, j] = -(design_dxx[:, j, :] @ coef)
        norm_history.append(beta_norm(y_next - y, config.beta, grid))
        y, z, z_vert = y_next, z_next, z_vert_next

    warnings = []
    tail = norm_history[-3:]
    if len(tail) == 3 and tail[-1] > 0.0 and not (tail[0] > tail[1] > tail[2]):
        warnings.append("iterate distances did not decrease over the last 3 sweeps")
    return BsdeSolution(
        y, z, z_vert, grid, spec.hurst, "picard",
        diagnostics={"beta_norm_steps": norm_history, "beta": config.beta,
                     "warnings": warnings},
    )


# ---------------------------------------------------------------------------
# Consistency of the (Y, Z) pair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZRelationReport:
    max_abs_gap: float
    worst_time_index: int
    prefixes_checked: int


def z_relation_check(u: Functional, v: Functional, paths: np.ndarray,
                     grid: TimeGrid) -> ZRelationReport:
    """Largest violation of Z = -(dx-derivative of Y) over sampled prefixes.

    Y = u along the path and Z = v along the path are supplied as functionals;
    the report returns max |v + dx u|.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    gap = np.abs(v.eval_along(paths, grid) + u.dx_along(paths, grid))
    worst_flat = int(np.argmax(gap))
    return ZRelationReport(
        max_abs_gap=float(gap.flat[worst_flat]),
        worst_time_index=int(np.unravel_index(worst_flat, gap.shape)[-1]),
        prefixes_checked=gap.size,
    )
