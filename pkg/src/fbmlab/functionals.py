"""Stopped cadlag paths and non-anticipative functionals on them.

A stopped path is a grid-sampled path together with a cursor marking its
current time; between grid points it is read as a cadlag step function.
Functionals are defined through *series* callables that map path samples
(time on the last axis) to the functional value at every cursor, which makes
non-anticipativity structural and lets Monte Carlo loops evaluate a whole
batch of prefixes in one vectorised call.

Horizontal derivatives measure sensitivity to extending the path flat in
time; vertical derivatives measure sensitivity to bumping the current value.
Closed forms are used when a functional carries them, otherwise finite
differences are applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import TimeGrid

_SMOOTHNESS_ORDER = {"C00": 0, "C11": 1, "C12": 2}

DEFAULT_VERTICAL_BUMP = 1e-4


@dataclass(frozen=True)
class StoppedPath:
    """Path samples up to (at least) the cursor; current time is t_cursor."""

    grid: TimeGrid
    values: np.ndarray
    cursor: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if not 0 <= self.cursor <= self.grid.steps:
            raise ValueError(f"cursor {self.cursor} outside grid with {self.grid.steps} steps")
        if v.ndim != 1 or v.shape[0] < self.cursor + 1:
            raise ValueError("values must cover the path at least up to the cursor")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def time(self) -> float:
        return self.cursor * self.grid.spacing

    @property
    def current(self) -> float:
        return float(self.values[self.cursor])

    def prefix(self) -> np.ndarray:
        return self.values[: self.cursor + 1]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.prefix())))


def stopped(grid: TimeGrid, values, cursor: int | None = None) -> StoppedPath:
    """Convenience constructor; cursor defaults to the last sample."""
    v = np.asarray(values, dtype=float)
    return StoppedPath(grid, v, (v.shape[0] - 1) if cursor is None else cursor)


def vertical_bump(path: StoppedPath, h: float) -> StoppedPath:
    """Bump the value at the current time by h, leaving history untouched."""
    v = path.values.copy()
    v[path.cursor] += h
    return StoppedPath(path.grid, v, path.cursor)


def horizontal_extend(path: StoppedPath, s: float) -> StoppedPath:
    """Extend the path flat (at its current value) up to grid time s >= t."""
    idx = path.grid.index_of(s)
    if idx < path.cursor:
        raise ValueError(f"cannot extend backwards: s={s} < current time {path.time}")
    v = np.empty(idx + 1)
    v[: path.cursor + 1] = path.prefix()
    v[path.cursor :] = path.values[path.cursor]
    return StoppedPath(path.grid, v, idx)


def _common_view(a: StoppedPath, b: StoppedPath):
    """Prefixes of both paths on the finer of the two grids."""
    if a.grid == b.grid:
        return a.prefix(), b.prefix(), a.grid
    if a.grid.is_refinement_of(b.grid):
        fine, coarse = a, b
    elif b.grid.is_refinement_of(a.grid):
        fine, coarse = b, a
    else:
        raise ValueError(f"grids {a.grid} and {b.grid} admit no shared refinement")
    factor = fine.grid.steps // coarse.grid.steps
    up = np.repeat(coarse.prefix()[:-1], factor) if coarse.cursor > 0 else np.empty(0)
    up = np.concatenate([up, coarse.prefix()[-1:]])
    if coarse is a:
        return up, fine.prefix(), fine.grid
    return fine.prefix(), up, fine.grid


def d_infty(a: StoppedPath, b: StoppedPath) -> float:
    """Metric: sup distance after flat-extending the shorter path, plus time gap."""
    pa, pb, _ = _common_view(a, b)
    if pa.shape[0] < pb.shape[0]:
        pa = np.concatenate([pa, np.full(pb.shape[0] - pa.shape[0], pa[-1])])
    elif pb.shape[0] < pa.shape[0]:
        pb = np.concatenate([pb, np.full(pa.shape[0] - pb.shape[0], pb[-1])])
    return float(np.max(np.abs(pa - pb))) + abs(a.time - b.time)


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    bump: float
    scheme: str  # closed_form | forward | central


class Functional:
    """Non-anticipative real functional with optional closed-form derivatives.

    ``series(values, grid)`` returns the functional evaluated at every cursor
    of the sampled path(s); the last axis of ``values`` is time and is
    preserved.  ``dt/dx/dxx_series`` are the horizontal, vertical and second
    vertical derivatives in the same layout.  A functional must never read
    samples beyond the cursor it reports; the builtins guarantee this by
    construction and a property test enforces it.
    """

    def __init__(self, name, series, dt_series=None, dx_series=None,
                 dxx_series=None, smoothness="C12"):
        if smoothness not in _SMOOTHNESS_ORDER:
            raise ValueError(f"unknown smoothness tag {smoothness!r}")
        self.name = name
        self.smoothness = smoothness
        self._series = series
        self._dt = dt_series
        self._dx = dx_series
        self._dxx = dxx_series

    def __repr__(self):
        return f"Functional({self.name!r}, smoothness={self.smoothness})"

    def at_least(self, tag: str) -> bool:
        return _SMOOTHNESS_ORDER[self.smoothness] >= _SMOOTHNESS_ORDER[tag]

    # -- batched evaluation ------------------------------------------------

    def eval_along(self, values, grid) -> np.ndarray:
        return np.asarray(self._series(np.asarray(values, dtype=float), grid), dtype=float)

    def _along(self, which, values, grid) -> np.ndarray:
        fn = getattr(self, "_" + which)
        if fn is None:
            raise ValueError(f"functional {self.name!r} has no closed-form {which} series")
        return np.asarray(fn(np.asarray(values, dtype=float), grid), dtype=float)

    def dt_along(self, values, grid):
        return self._along("dt", values, grid)

    def dx_along(self, values, grid):
        return self._along("dx", values, grid)

    def dxx_along(self, values, grid):
        return self._along("dxx", values, grid)

    def has_closed(self, which: str) -> bool:
        return getattr(self, "_" + which) is not None

    # -- single-prefix evaluation -------------------------------------------

    def evaluate(self, path: StoppedPath) -> float:
        return float(self.eval_along(path.prefix(), path.grid)[-1])

    __call__ = evaluate

    def closed(self, which: str, path: StoppedPath) -> float:
        return float(self._along(which, path.prefix(), path.grid)[-1])

    def vertical_functional(self) -> "Functional":
        """The vertical derivative as a functional (its own dx is dxx)."""
        if self._dx is None:
            raise ValueError(f"functional {self.name!r} has no closed-form dx series")
        return Functional(
            f"dx[{self.name}]",
            self._dx,
            dx_series=self._dxx,
            smoothness="C11" if self._dxx is not None else "C00",
        )


def _require_derivative(functional: Functional):
    if not functional.at_least("C11"):
        raise ValueError(
            f"functional {functional.name!r} is {functional.smoothness}; "
            "derivative queries are refused rather than guessed one-sided"
        )


def horizontal_derivative(functional: Functional, path: StoppedPath,
                          refined: StoppedPath | None = None) -> DerivativeEstimate:
    """Forward-difference (or closed-form) sensitivity to flat time extension.

    When ``refined`` is the same prefix on the doubled grid, the half-step
    forward difference is combined with the full-step one (Richardson) to
    cancel the leading bias of the one-sided scheme.
    """
    _require_derivative(functional)
    if functional.has_closed("dt"):
        return DerivativeEstimate(functional.closed("dt", path), 0.0, "closed_form")
    if path.cursor >= path.grid.steps:
        raise ValueError("cursor at the horizon: no room for a forward difference "
                         "and no closed form available")
    h = path.grid.spacing
    base = functional.evaluate(path)
    d_full = (functional.evaluate(horizontal_extend(path, path.time + h)) - base) / h
    if refined is None:
        return DerivativeEstimate(d_full, h, "forward")
    if not refined.grid.is_refinement_of(path.grid) or refined.grid.steps != 2 * path.grid.steps:
        raise ValueError("refined prefix must live on the doubled grid")
    base_r = functional.evaluate(refined)
    d_half = (functional.evaluate(horizontal_extend(refined, refined.time + h / 2)) - base_r) / (h / 2)
    return DerivativeEstimate(2.0 * d_half - d_full, h, "forward")


def _fd_bump(path: StoppedPath, bump: float | None) -> float:
    if bump is not None:
        if bump <= 0:
            raise ValueError("finite-difference bump must be positive")
        return bump
    return DEFAULT_VERTICAL_BUMP * max(1.0, path.sup_norm())


def vertical_derivative(functional: Functional, path: StoppedPath,
                        bump: float | None = None) -> DerivativeEstimate:
    """Central-difference (or closed-form) sensitivity to bumping the endpoint."""
    _require_derivative(functional)
    if functional.has_closed("dx"):
        return DerivativeEstimate(functional.closed("dx", path), 0.0, "closed_form")
    h = _fd_bump(path, bump)
    up = functional.evaluate(vertical_bump(path, h))
    dn = functional.evaluate(vertical_bump(path, -h))
    value = (up - dn) / (2.0 * h)
    if not np.isfinite(value):
        raise ValueError(f"non-finite vertical difference for {functional.name!r}")
    return DerivativeEstimate(value, h, "central")


def vertical_second(functional: Functional, path: StoppedPath,
                    bump: float | None = None) -> DerivativeEstimate:
    """Second central difference in the endpoint bump."""
    if not functional.at_least("C12"):
        raise ValueError(
            f"functional {functional.name!r} is {functional.smoothness}; "
            "second vertical derivatives need C12"
        )
    if functional.has_closed("dxx"):
        return DerivativeEstimate(functional.closed("dxx", path), 0.0, "closed_form")
    h = _fd_bump(path, bump)
    up = functional.evaluate(vertical_bump(path, h))
    mid = functional.evaluate(path)
    dn = functional.evaluate(vertical_bump(path, -h))
    value = (up - 2.0 * mid + dn) / (h * h)
    if not np.isfinite(value):
        raise ValueError(f"non-finite second vertical difference for {functional.name!r}")
    return DerivativeEstimate(value, h, "central")


# ---------------------------------------------------------------------------
# Builtin functionals
# ---------------------------------------------------------------------------


def _match(out, values) -> np.ndarray:
    out = np.asarray(out, dtype=float)
    if out.shape != values.shape:
        out = np.broadcast_to(out, values.shape).copy()
    return out


def cylindrical(f, ft=None, fx=None, fxx=None, name="cylindrical",
                smoothness="C12") -> Functional:
    """F(path) = f(t, current value); derivatives are the classic partials.

    The callables receive (times, values) and must broadcast; constants are
    broadcast automatically.
    """

    def wrap(g):
        if g is None:
            return None

        def series(values, grid):
            t = grid.times()[: values.shape[-1]]
            return _match(g(t, values), values)

        return series

    return Functional(name, wrap(f), wrap(ft), wrap(fx), wrap(fxx), smoothness)


def constant_functional(c: float) -> Functional:
    return cylindrical(
        lambda t, x: np.full_like(x, c),
        ft=lambda t, x: 0.0, fx=lambda t, x: 0.0, fxx=lambda t, x: 0.0,
        name=f"const[{c}]",
    )


def coordinate() -> Functional:
    """F = current value of the path."""
    return cylindrical(lambda t, x: x, ft=lambda t, x: 0.0,
                       fx=lambda t, x: 1.0, fxx=lambda t, x: 0.0, name="gamma")


def squared_coordinate() -> Functional:
    """F = (current value)^2."""
    return cylindrical(lambda t, x: x * x, ft=lambda t, x: 0.0,
                       fx=lambda t, x: 2.0 * x, fxx=lambda t, x: 2.0,
                       name="gamma_squared")


def affine(a: float, b: float) -> Functional:
    return cylindrical(lambda t, x: a + b * x, ft=lambda t, x: 0.0,
                       fx=lambda t, x: b, fxx=lambda t, x: 0.0,
                       name=f"affine[{a},{b}]")


def time_weighted_square() -> Functional:
    """F = t * (current value)^2, a classic smooth benchmark."""
    return cylindrical(lambda t, x: t * x * x, ft=lambda t, x: x * x,
                       fx=lambda t, x: 2.0 * t * x, fxx=lambda t, x: 2.0 * t,
                       name="t_gamma_squared")


def _integral_series(values, grid) -> np.ndarray:
    """Left-endpoint time integral of the cadlag step path, at every cursor."""
    out = np.zeros_like(values)
    np.cumsum(values[..., :-1] * grid.spacing, axis=-1, out=out[..., 1:])
    return out


def running_integral() -> Functional:
    """F = integral of the path over [0, t] (left-endpoint cell sums).

    The cursor value multiplies a zero-width cell, so the vertical derivative
    vanishes while the horizontal derivative is the current value.
    """
    return Functional(
        "running_integral",
        _integral_series,
        dt_series=lambda v, g: v.copy(),
        dx_series=lambda v, g: np.zeros_like(v),
        dxx_series=lambda v, g: np.zeros_like(v),
    )


def product_integral() -> Functional:
    """F = (current value) times the running integral of the path."""
    return Functional(
        "product_integral",
        lambda v, g: v * _integral_series(v, g),
        dt_series=lambda v, g: v * v,
        dx_series=lambda v, g: _integral_series(v, g),
        dxx_series=lambda v, g: np.zeros_like(v),
    )


def weighted_increment_integral(weight) -> Functional:
    """F = sum of weight(t_left) * path increment over cells up to the cursor.

    ``weight`` is a callable of time, evaluated at the left endpoint of each
    cell.  This houses deterministic integrands integrated against the path.
    """

    def cell_weights(grid, k):
        lefts = grid.times()[:k]
        return np.broadcast_to(np.asarray(weight(lefts), dtype=float), (k,))

    def series(values, grid):
        k = values.shape[-1] - 1
        out = np.zeros_like(values)
        if k > 0:
            np.cumsum(np.diff(values, axis=-1) * cell_weights(grid, k), axis=-1, out=out[..., 1:])
        return out

    def dx_series(values, grid):
        k = values.shape[-1] - 1
        out = np.zeros_like(values)
        if k > 0:
            out[..., 1:] = cell_weights(grid, k)
        return out

    return Functional(
        "weighted_increment_integral",
        series,
        dt_series=lambda v, g: np.zeros_like(v),
        dx_series=dx_series,
        dxx_series=lambda v, g: np.zeros_like(v),
    )


def running_max() -> Functional:
    """Running maximum; continuous but not differentiable at ties (C00)."""
    return Functional(
        "running_max",
        lambda v, g: np.maximum.accumulate(v, axis=-1),
        smoothness="C00",
    )


#: Named functionals usable from experiment configs and the CLI.
FUNCTIONAL_REGISTRY = {
    "gamma": coordinate,
    "gamma_squared": squared_coordinate,
    "t_gamma_squared": time_weighted_square,
    "running_integral": running_integral,
    "product_integral": product_integral,
    "running_max": running_max,
    "constant_one": lambda: constant_functional(1.0),
}


def resolve_functional(name: str) -> Functional:
    try:
        return FUNCTIONAL_REGISTRY[name]()
    except KeyError:
        known = ", ".join(sorted(FUNCTIONAL_REGISTRY))
        raise ValueError(f"unknown functional {name!r}; known: {known}") from None
