"""Discrete stochastic integrals of non-anticipative functionals.

Three Riemann-sum schemes against a driver path:

* ``ito_type_sum``: the functional is read at the left endpoint prefix.
* ``stratonovich_sum``: the functional is read at the genuine midpoint prefix
  (which requires path samples on the doubled grid, see ``fbm.refine``),
  while the increment still spans the full cell.
* ``wis_sum``: left-endpoint evaluation with each product replaced by a Wick
  product, computed exactly through the kernel correction terms.  The
  integrand must be a functional of the driver history itself; more general
  integrands are rejected.

By construction ``wis_sum == ito_type_sum - sum of corrections`` holds exactly
at every resolution, which the tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fbm import FbmPath
from .functionals import Functional, StoppedPath, vertical_derivative
from .grids import TimeGrid, as_hurst
from .kernel import StepFunction, wick_cell_corrections


@dataclass(frozen=True)
class IntegralSample:
    """Value of one discrete integral at one grid resolution."""

    value: float
    resolution: int
    kind: str  # ito_type | stratonovich | wis

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("integral sample is not finite")


@dataclass(frozen=True)
class ItoProcessSpec:
    """x0 + time integral of drift + driver integral of volatility.

    Drift and volatility are step functions (elementary coefficients), for
    which the discrete construction below is exact.
    """

    x0: float
    drift: StepFunction
    volatility: StepFunction
    driver: str = "fbm"  # fbm | brownian

    def __post_init__(self):
        if self.driver not in ("fbm", "brownian"):
            raise ValueError(f"driver must be 'fbm' or 'brownian', got {self.driver!r}")


def build_ito_process(spec: ItoProcessSpec, driver_values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """X(t_k) = x0 + sum psi dt + sum phi dB, exact for step coefficients.

    ``driver_values`` may be (n+1,) or batched (M, n+1); the grid must refine
    the grids the coefficients are declared on.
    """
    v = np.asarray(driver_values, dtype=float)
    if v.shape[-1] != grid.steps + 1:
        raise ValueError(f"driver has {v.shape[-1]} samples, grid wants {grid.steps + 1}")
    psi = spec.drift.values_on(grid)
    phi = spec.volatility.values_on(grid)
    out = np.empty_like(v)
    out[..., 0] = spec.x0
    np.cumsum(psi * grid.spacing + phi * np.diff(v, axis=-1), axis=-1, out=out[..., 1:])
    out[..., 1:] += spec.x0
    return out


def _check_shapes(driver_values, x_values, grid):
    d = np.asarray(driver_values, dtype=float)
    x = np.asarray(x_values, dtype=float)
    if d.shape[-1] != grid.steps + 1 or x.shape[-1] != grid.steps + 1:
        raise ValueError(
            f"driver/integrand sampled at {d.shape[-1]}/{x.shape[-1]} points but the "
            f"grid has {grid.steps + 1}; integrators never resample"
        )
    return d, x


def ito_sum_batch(functional: Functional, driver_values, x_values, grid: TimeGrid) -> np.ndarray:
    """Left-endpoint sums for a (batch of) path(s); returns one value per path."""
    d, x = _check_shapes(driver_values, x_values, grid)
    f = functional.eval_along(x, grid)
    return np.sum(f[..., :-1] * np.diff(d, axis=-1), axis=-1)


def stratonovich_sum_batch(functional: Functional, driver_refined, x_refined,
                           refined_grid: TimeGrid) -> np.ndarray:
    """Midpoint sums; inputs live on the doubled grid (2n cells)."""
    if refined_grid.steps % 2 != 0:
        raise ValueError("midpoint sums need paths on a doubled (even-step) grid")
    d, x = _check_shapes(driver_refined, x_refined, refined_grid)
    f_mid = functional.eval_along(x, refined_grid)[..., 1::2]
    coarse = d[..., ::2]
    return np.sum(f_mid * np.diff(coarse, axis=-1), axis=-1)


def wis_sum_batch(functional: Functional, driver_values, grid: TimeGrid, hurst) -> np.ndarray:
    """Wick-corrected left-endpoint sums of F(driver history) against the driver."""
    d = np.asarray(driver_values, dtype=float)
    if d.shape[-1] != grid.steps + 1:
        raise ValueError(f"driver has {d.shape[-1]} samples, grid wants {grid.steps + 1}")
    f = functional.eval_along(d, grid)
    dx = functional.dx_along(d, grid)
    corr = wick_cell_corrections(grid, hurst)
    plain = np.sum(f[..., :-1] * np.diff(d, axis=-1), axis=-1)
    return plain - np.sum(dx[..., :-1] * corr, axis=-1)


# ---------------------------------------------------------------------------
# Single-sample operation surface
# ---------------------------------------------------------------------------


def ito_type_sum(functional: Functional, driver_values, x_values, grid: TimeGrid) -> IntegralSample:
    value = ito_sum_batch(functional, driver_values, x_values, grid)
    return IntegralSample(float(value), grid.steps, "ito_type")


def stratonovich_sum(functional: Functional, driver_refined, x_refined,
                     refined_grid: TimeGrid) -> IntegralSample:
    value = stratonovich_sum_batch(functional, driver_refined, x_refined, refined_grid)
    return IntegralSample(float(value), refined_grid.steps // 2, "stratonovich")


def wis_sum(functional: Functional, path: FbmPath) -> IntegralSample:
    """Wick-Riemann sum of F(B_t) against its own driver path.

    Only integrands that are functionals of the driver history are accepted;
    pass the driver path itself.  The functional must have a vertical
    derivative (closed form preferred, central differences otherwise).
    """
    if not isinstance(path, FbmPath):
        raise TypeError("wis_sum integrates against the driver itself; pass an FbmPath "
                        "(general driven integrands are out of scope)")
    if not functional.at_least("C11"):
        raise ValueError(f"functional {functional.name!r} has no vertical derivative")
    grid = path.grid
    if functional.has_closed("dx"):
        value = wis_sum_batch(functional, path.values, grid, path.hurst)
        return IntegralSample(float(value), grid.steps, "wis")
    # finite-difference fallback, one prefix at a time
    corr = wick_cell_corrections(grid, path.hurst)
    inc = np.diff(path.values)
    total = 0.0
    for i in range(1, grid.steps + 1):
        prefix = StoppedPath(grid, path.values[:i], i - 1)
        f_val = functional.evaluate(prefix)
        dx_val = vertical_derivative(functional, prefix).value
        total += f_val * inc[i - 1] - dx_val * corr[i - 1]
    return IntegralSample(total, grid.steps, "wis")
