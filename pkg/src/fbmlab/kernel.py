"""The singular kernel phi(x) = H(2H-1)|x|^(2H-2) and its exact geometry.

All integrals of phi against indicator and step functions are evaluated
through closed-form antiderivatives, never numerical quadrature: the kernel
is integrably singular at 0 and exactness removes that error source entirely.
Quadrature enters only where a genuinely random or non-polynomial integrand
multiplies the kernel; there, cell-midpoint integrand values are paired with
exact cell kernel masses.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fbm import covariance
from .grids import TimeGrid, as_hurst
from .functionals import Functional, StoppedPath, vertical_derivative


@dataclass(frozen=True)
class PhiKernel:
    """Second mixed derivative of the driver covariance, as a density."""

    hurst: float

    def __post_init__(self):
        object.__setattr__(self, "hurst", as_hurst(self.hurst).h)

    def density(self, x) -> np.ndarray:
        h = self.hurst
        return h * (2.0 * h - 1.0) * np.abs(np.asarray(x, dtype=float)) ** (2.0 * h - 2.0)

    def primitive(self, x) -> np.ndarray:
        """One-fold antiderivative: H sign(x) |x|^(2H-1)."""
        h = self.hurst
        x = np.asarray(x, dtype=float)
        return h * np.sign(x) * np.abs(x) ** (2.0 * h - 1.0)


def indicator_inner_product(a, b, c, d, hurst) -> float:
    """Exact double integral of phi over [a,b] x [c,d].

    Equals (|b-c|^2H + |a-d|^2H - |a-c|^2H - |b-d|^2H) / 2, the second
    antiderivative of the kernel evaluated at the rectangle corners.
    """
    if not (0.0 <= a <= b and 0.0 <= c <= d):
        raise ValueError(f"indicator endpoints must satisfy 0 <= a <= b and 0 <= c <= d, "
                         f"got [{a},{b}] x [{c},{d}]")
    e = as_hurst(hurst).two_h
    return 0.5 * (abs(b - c) ** e + abs(a - d) ** e - abs(a - c) ** e - abs(b - d) ** e)


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on the cells [t_{i-1}, t_i) of a grid."""

    grid: TimeGrid
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.grid.steps,):
            raise ValueError(f"expected {self.grid.steps} cell coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("step function coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    def value_at(self, t: float) -> float:
        if not 0.0 <= t <= self.grid.horizon:
            raise ValueError(f"time {t} outside [0, {self.grid.horizon}]")
        i = min(int(t / self.grid.spacing), self.grid.steps - 1)
        return float(self.coefficients[i])

    def values_on(self, grid: TimeGrid) -> np.ndarray:
        """Cell coefficients re-expressed on a refining grid."""
        if not grid.is_refinement_of(self.grid):
            raise ValueError(f"{grid} does not refine {self.grid}")
        return np.repeat(self.coefficients, grid.steps // self.grid.steps)


def constant_step(grid: TimeGrid, c: float) -> StepFunction:
    return StepFunction(grid, np.full(grid.steps, float(c)))


def indicator_step(grid: TimeGrid, a: float, b: float) -> StepFunction:
    """Indicator of [a, b] as a step function; endpoints must be grid times."""
    i, j = grid.index_of(a), grid.index_of(b)
    coeff = np.zeros(grid.steps)
    coeff[i:j] = 1.0
    return StepFunction(grid, coeff)


@lru_cache(maxsize=32)
def _cell_gram_row(horizon: float, steps: int, h: float) -> np.ndarray:
    """Kernel mass of cell pairs at lag k: <1_cell_i, 1_cell_{i+k}>."""
    grid = TimeGrid(horizon, steps)
    d = grid.spacing
    row = np.empty(steps)
    for k in range(steps):
        row[k] = indicator_inner_product(0.0, d, k * d, (k + 1) * d, h)
    return row


def _common_grid(xi: StepFunction, eta: StepFunction):
    if xi.grid == eta.grid:
        return xi.coefficients, eta.coefficients, xi.grid
    if xi.grid.is_refinement_of(eta.grid):
        return xi.coefficients, eta.values_on(xi.grid), xi.grid
    if eta.grid.is_refinement_of(xi.grid):
        return xi.values_on(eta.grid), eta.coefficients, eta.grid
    raise ValueError(f"step functions on {xi.grid} and {eta.grid} admit no common refinement")


def step_inner_product(xi: StepFunction, eta: StepFunction, hurst) -> float:
    """Exact bilinear kernel inner product of two step functions."""
    a, b, grid = _common_grid(xi, eta)
    g = _cell_gram_row(grid.horizon, grid.steps, as_hurst(hurst).h)
    # sum_{i,j} a_i b_j g(|i-j|) via the cross-correlation of the coefficients
    corr = np.correlate(a, b, mode="full")  # lag = i - j from -(n-1) .. n-1
    n = grid.steps
    lags = np.abs(np.arange(-(n - 1), n))
    return float(np.sum(g[lags] * corr))


def gram_quadratic_batch(rows: np.ndarray, grid: TimeGrid, hurst) -> np.ndarray:
    """Per-row kernel norm^2 of step functions given as a (M, n) coefficient array.

    Uses an FFT circulant embedding of the Gram Toeplitz matrix, O(M n log n).
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    n = grid.steps
    if rows.shape[1] != n:
        raise ValueError(f"expected {n} cell coefficients per row, got {rows.shape[1]}")
    g = _cell_gram_row(grid.horizon, n, as_hurst(hurst).h)
    first_col = np.concatenate([g, [0.0], g[:0:-1]])  # circulant embedding, size 2n
    ghat = np.fft.rfft(first_col)
    padded = np.zeros((rows.shape[0], 2 * n))
    padded[:, :n] = rows
    gv = np.fft.irfft(np.fft.rfft(padded, axis=1) * ghat, n=2 * n, axis=1)[:, :n]
    return np.sum(rows * gv, axis=1)


# ---------------------------------------------------------------------------
# Derivative fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeField:
    """A derivative-in-the-noise profile s -> D_s, stored as a step function."""

    field: StepFunction
    kind: str  # "polynomial" or "path_functional"


@dataclass(frozen=True)
class WeightedPolynomial:
    """f applied to integrals of deterministic step weights against the path.

    ``partials`` are the partial derivatives of f, one per weight; both f and
    the partials take the vector of realised integrals as positional args.
    """

    f: callable
    partials: tuple
    weights: tuple

    def integrals(self, path_values: np.ndarray, grid: TimeGrid) -> np.ndarray:
        inc = np.diff(np.asarray(path_values, dtype=float))
        return np.array([w.values_on(grid) @ inc for w in self.weights])


def malliavin_derivative_polynomial(poly: WeightedPolynomial, path_values, grid: TimeGrid) -> DerivativeField:
    """Derivative field of f(I_1, ..., I_m) along one realised path.

    The field is sum_i d_i f(I) * weight_i(s), a step function in s.
    """
    if poly.partials is None or len(poly.partials) != len(poly.weights):
        raise ValueError("polynomial functional needs one partial derivative per weight")
    ints = poly.integrals(path_values, grid)
    coeff = np.zeros(grid.steps)
    for part, w in zip(poly.partials, poly.weights):
        coeff += float(part(*ints)) * w.values_on(grid)
    return DerivativeField(StepFunction(grid, coeff), "polynomial")


def malliavin_derivative_path(functional: Functional, path: StoppedPath) -> DerivativeField:
    """Derivative field of a path functional at its current time.

    The field is (vertical derivative at the prefix) on [0, t], zero after:
    the bump sensitivity smeared uniformly over the observed history.
    """
    dx = vertical_derivative(functional, path).value
    coeff = np.zeros(path.grid.steps)
    coeff[: path.cursor] = dx
    return DerivativeField(StepFunction(path.grid, coeff), "path_functional")


def d_phi_derivative(field: DerivativeField, t: float, hurst) -> float:
    """Kernel-smoothed derivative: integral of phi(t - s) field(s) ds over [0, T].

    Exact per cell: the integral of phi over [a, b] is the difference of the
    one-fold antiderivative at t-a and t-b.
    """
    kernel = PhiKernel(as_hurst(hurst).h)
    grid = field.field.grid
    edges = grid.times()
    masses = kernel.primitive(t - edges[:-1]) - kernel.primitive(t - edges[1:])
    return float(field.field.coefficients @ masses)


# ---------------------------------------------------------------------------
# Wick correction terms
# ---------------------------------------------------------------------------


def wick_correction(dx_f: float, t_prev: float, t_cur: float, hurst) -> float:
    """Exact term turning an ordinary product into a Wick product.

    For a functional of the driver history up to t_prev multiplied by the
    driver increment over [t_prev, t_cur], the Wick product subtracts the
    vertical derivative times <1_[0,t_prev], 1_[t_prev,t_cur]>.
    """
    if not t_prev < t_cur:
        raise ValueError(f"need t_prev < t_cur, got {t_prev} >= {t_cur}")
    return dx_f * indicator_inner_product(0.0, t_prev, t_prev, t_cur, hurst)


def wick_cell_corrections(grid: TimeGrid, hurst) -> np.ndarray:
    """Per-cell correction masses (t_i^2H - t_{i-1}^2H - dt^2H) / 2."""
    e = as_hurst(hurst).two_h
    t = grid.times()
    return 0.5 * (t[1:] ** e - t[:-1] ** e - grid.spacing**e)


def time_weight_cell_masses(grid: TimeGrid, hurst) -> np.ndarray:
    """Exact cell integrals of H t^(2H-1): (t_i^2H - t_{i-1}^2H) / 2."""
    e = as_hurst(hurst).two_h
    t = grid.times()
    return 0.5 * (t[1:] ** e - t[:-1] ** e)


# ---------------------------------------------------------------------------
# Second-moment machinery for the Wick-Riemann integral
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WisVariance:
    """Monte Carlo estimate of the second moment of a Wick-Riemann integral."""

    value: float
    se: float
    kernel_term: float
    derivative_term: float


def wis_variance(functional: Functional, paths: np.ndarray, grid: TimeGrid, hurst) -> WisVariance:
    """Estimate E|integral of F against the Wick differential|^2.

    Summand per path: the kernel norm^2 of s -> F(B_s) (cell values at left
    endpoints) plus the square of the integral of the kernel-smoothed
    derivative, which for integrands F(B_t) reduces to the vertical derivative
    against the exact cell masses of H t^(2H-1).
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    fvals = functional.eval_along(paths, grid)
    kernel_terms = gram_quadratic_batch(fvals[:, :-1], grid, hurst)
    dx = functional.dx_along(paths, grid)
    derivative_terms = (dx[:, :-1] @ time_weight_cell_masses(grid, hurst)) ** 2
    total = kernel_terms + derivative_terms
    if not np.all(np.isfinite(total)):
        raise ValueError("non-finite variance contributions")
    m = total.shape[0]
    se = float(total.std(ddof=1) / np.sqrt(m)) if m > 1 else float("nan")
    return WisVariance(float(total.mean()), se,
                       float(kernel_terms.mean()), float(derivative_terms.mean()))


def covariance_phi_integral(grid: TimeGrid, hurst) -> float:
    """Quadrature of the double integral of phi(u-v) E[B(u)B(v)] over [0,T]^2.

    Midpoint values of the covariance paired with exact cell kernel masses.
    """
    hp = as_hurst(hurst)
    n = grid.steps
    mids = grid.times()[:-1] + 0.5 * grid.spacing
    r = covariance(mids[:, None], mids[None, :], hp)
    g = _cell_gram_row(grid.horizon, n, hp.h)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    return float(np.sum(r * g[idx]))
