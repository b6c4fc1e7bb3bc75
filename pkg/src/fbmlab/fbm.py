"""Exact-law fractional Brownian motion sampling on uniform grids.

Two exact generators are provided:

* ``CholeskySampler`` factorises the increment covariance directly, costing
  O(n^3) once and O(n^2) per path.  It is the reference generator.
* ``CirculantSampler`` embeds the stationary increment covariance in a
  circulant matrix and samples through the FFT (Davies and Harte 1987;
  Dieker 2004), costing O(n log n) per path.

Both target the same finite-dimensional Gaussian law, which is pinned by the
covariance function ``covariance``.  Midpoint refinement draws the exact
conditional Gaussian law of the cell midpoints given the coarse samples, so
midpoint-Riemann sums can be evaluated without interpolation bias.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .grids import TimeGrid, as_hurst, path_rng

CHOLESKY_STEP_CAP = 2048

# Paths per FFT block when sampling batches; bounds peak memory.
_BATCH_BLOCK_ENTRIES = 8_000_000


def covariance(s, t, hurst) -> float | np.ndarray:
    """Covariance E[B(s) B(t)] = (s^2H + t^2H - |t - s|^2H) / 2.

    Accepts scalars or broadcasting arrays; times must be nonnegative.
    """
    hp = as_hurst(hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0) or np.any(t < 0.0):
        raise ValueError("covariance requires nonnegative times")
    a = hp.two_h
    out = 0.5 * (s**a + t**a - np.abs(t - s) ** a)
    if out.ndim == 0:
        return float(out)
    return out


def increment_autocovariance(lags, hurst) -> np.ndarray:
    """Autocovariance of unit-spacing increments at integer lags.

    rho(k) = (|k+1|^2H - 2|k|^2H + |k-1|^2H) / 2; multiply by spacing^2H for a
    grid with physical spacing.
    """
    hp = as_hurst(hurst)
    k = np.asarray(lags, dtype=float)
    a = hp.two_h
    return 0.5 * (np.abs(k + 1.0) ** a - 2.0 * np.abs(k) ** a + np.abs(k - 1.0) ** a)


@dataclass(frozen=True)
class FbmPath:
    """One sampled path on a grid, starting at zero."""

    grid: TimeGrid
    values: np.ndarray
    hurst: float
    seed_tag: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.steps + 1,):
            raise ValueError(f"expected {self.grid.steps + 1} values, got shape {v.shape}")
        if v[0] != 0.0:
            raise ValueError("paths must start at zero")
        if not np.all(np.isfinite(v)):
            raise ValueError("path contains non-finite values")
        object.__setattr__(self, "values", v)


def quadratic_variation(values: np.ndarray | FbmPath) -> float | np.ndarray:
    """Sum of squared increments along the last axis."""
    if isinstance(values, FbmPath):
        values = values.values
    inc = np.diff(np.asarray(values, dtype=float), axis=-1)
    out = np.sum(inc * inc, axis=-1)
    if np.ndim(out) == 0:
        return float(out)
    return out


@lru_cache(maxsize=32)
def _increment_cholesky(horizon: float, steps: int, h: float) -> np.ndarray:
    d = horizon / steps
    row = increment_autocovariance(np.arange(steps), h) * d ** (2.0 * h)
    cov = scipy.linalg.toeplitz(row)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            "increment covariance is not numerically positive definite at "
            f"n={steps}, H={h}; use the circulant generator instead"
        ) from exc


@lru_cache(maxsize=32)
def _embedding_spectrum(horizon: float, steps: int, h: float) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the increment covariance."""
    d = horizon / steps
    rho = increment_autocovariance(np.arange(steps + 1), h) * d ** (2.0 * h)
    first_row = np.concatenate([rho, rho[-2:0:-1]])  # length 2n
    eigs = np.fft.fft(first_row).real
    floor = -1e-10 * max(eigs.max(), 1e-300)
    if eigs.min() < floor:
        raise RuntimeError(
            f"circulant embedding has negative eigenvalue {eigs.min():.3e} at "
            f"n={steps}, H={h}"
        )
    return np.clip(eigs, 0.0, None)


class CholeskySampler:
    """Reference exact sampler; factorisation cached per (grid, hurst)."""

    def __init__(self, grid: TimeGrid, hurst, max_steps: int = CHOLESKY_STEP_CAP):
        self.grid = grid
        self.hurst = as_hurst(hurst)
        if grid.steps > max_steps:
            raise ValueError(
                f"Cholesky sampling capped at n={max_steps} (O(n^3) setup); "
                f"got n={grid.steps}"
            )
        self._factor = _increment_cholesky(grid.horizon, grid.steps, self.hurst.h)

    def sample_values(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.grid.steps)
        inc = self._factor @ z
        out = np.empty(self.grid.steps + 1)
        out[0] = 0.0
        np.cumsum(inc, out=out[1:])
        return out

    def path(self, master_seed: int, path_index: int = 0) -> FbmPath:
        values = self.sample_values(path_rng(master_seed, path_index))
        return FbmPath(self.grid, values, self.hurst.h, path_index)

    def batch(self, master_seed: int, n_paths: int, workers: int = 1) -> np.ndarray:
        z = _stacked_normals(master_seed, n_paths, self.grid.steps, workers)
        out = np.zeros((n_paths, self.grid.steps + 1))
        np.cumsum(z @ self._factor.T, axis=1, out=out[:, 1:])
        return out


class CirculantSampler:
    """Fast exact sampler through circulant embedding of the increments."""

    def __init__(self, grid: TimeGrid, hurst):
        self.grid = grid
        self.hurst = as_hurst(hurst)
        self._spectrum = _embedding_spectrum(grid.horizon, grid.steps, self.hurst.h)

    def _increments_from_normals(self, z: np.ndarray) -> np.ndarray:
        """Map 2n standard normals (last axis) to n exact fGn increments."""
        n = self.grid.steps
        m = 2 * n
        w = np.zeros(z.shape[:-1] + (m,), dtype=complex)
        w[..., 0] = z[..., 0]
        w[..., n] = z[..., 1]
        interior = (z[..., 2 : n + 1] + 1j * z[..., n + 1 : 2 * n]) / np.sqrt(2.0)
        w[..., 1:n] = interior
        w[..., n + 1 :] = np.conj(interior[..., ::-1])
        fgn = np.sqrt(m) * np.fft.ifft(np.sqrt(self._spectrum) * w, axis=-1).real
        return fgn[..., :n]

    def sample_values(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(2 * self.grid.steps)
        inc = self._increments_from_normals(z)
        out = np.empty(self.grid.steps + 1)
        out[0] = 0.0
        np.cumsum(inc, out=out[1:])
        return out

    def path(self, master_seed: int, path_index: int = 0) -> FbmPath:
        values = self.sample_values(path_rng(master_seed, path_index))
        return FbmPath(self.grid, values, self.hurst.h, path_index)

    def batch(self, master_seed: int, n_paths: int, workers: int = 1) -> np.ndarray:
        n = self.grid.steps
        out = np.zeros((n_paths, n + 1))
        block = max(1, _BATCH_BLOCK_ENTRIES // (2 * n))
        for start in range(0, n_paths, block):
            stop = min(start + block, n_paths)
            z = _stacked_normals(master_seed, stop - start, 2 * n, workers, first_index=start)
            inc = self._increments_from_normals(z)
            np.cumsum(inc, axis=1, out=out[start:stop, 1:])
        return out


def _stacked_normals(master_seed, n_paths, draws, workers=1, first_index=0, lane=0) -> np.ndarray:
    """(n_paths, draws) normals, row i from the stream of path first_index+i."""
    out = np.empty((n_paths, draws))

    def fill(lo, hi):
        for i in range(lo, hi):
            out[i] = path_rng(master_seed, first_index + i, lane).standard_normal(draws)

    if workers <= 1 or n_paths < 2 * workers:
        fill(0, n_paths)
        return out
    # Chunk boundaries do not affect the draws, only who computes them.
    edges = np.linspace(0, n_paths, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fill, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
        for f in futures:
            f.result()
    return out


def generate_cholesky(grid: TimeGrid, hurst, master_seed: int, path_index: int = 0,
                      max_steps: int = CHOLESKY_STEP_CAP) -> FbmPath:
    """One exact path through the Cholesky factorisation."""
    return CholeskySampler(grid, hurst, max_steps=max_steps).path(master_seed, path_index)


def generate_circulant(grid: TimeGrid, hurst, master_seed: int, path_index: int = 0) -> FbmPath:
    """One exact path through the circulant embedding."""
    return CirculantSampler(grid, hurst).path(master_seed, path_index)


@lru_cache(maxsize=16)
def _midpoint_conditioning(horizon: float, steps: int, h: float):
    """Conditional-law operators for cell midpoints given the coarse samples.

    Returns (A, L) with midpoints | coarse values y distributed as
    N(A @ y, L @ L.T); y excludes the deterministic value at t = 0.
    """
    grid = TimeGrid(horizon, steps)
    t = grid.times()[1:]
    mids = grid.times()[:-1] + 0.5 * grid.spacing
    cov_yy = covariance(t[:, None], t[None, :], h)
    cov_xy = covariance(mids[:, None], t[None, :], h)
    cov_xx = covariance(mids[:, None], mids[None, :], h)
    a = scipy.linalg.solve(cov_yy, cov_xy.T, assume_a="pos").T
    cond = cov_xx - a @ cov_xy.T
    cond = 0.5 * (cond + cond.T)
    return a, np.linalg.cholesky(cond)


def refine_values(values: np.ndarray, grid: TimeGrid, hurst, master_seed: int,
                  workers: int = 1, first_index: int = 0) -> np.ndarray:
    """Insert exact conditional midpoints; even indices reproduce the input.

    ``values`` may be a single path (n+1,) or a batch (M, n+1); row i uses the
    stream of path ``first_index + i``.
    """
    hp = as_hurst(hurst)
    v = np.atleast_2d(np.asarray(values, dtype=float))
    n = grid.steps
    if v.shape[1] != n + 1:
        raise ValueError(f"expected {n + 1} values per path, got {v.shape[1]}")
    if n > CHOLESKY_STEP_CAP:
        raise ValueError(f"midpoint refinement capped at n={CHOLESKY_STEP_CAP}")
    a, factor = _midpoint_conditioning(grid.horizon, n, hp.h)
    # lane 1: keep refinement draws disjoint from the generation draws of the
    # same (seed, path) stream.
    z = _stacked_normals(master_seed, v.shape[0], n, workers, first_index=first_index, lane=1)
    mids = v[:, 1:] @ a.T + z @ factor.T
    out = np.empty((v.shape[0], 2 * n + 1))
    out[:, ::2] = v
    out[:, 1::2] = mids
    if np.asarray(values).ndim == 1:
        return out[0]
    return out


def refine(path: FbmPath, master_seed: int, path_index: int | None = None) -> FbmPath:
    """Exact-law midpoint augmentation of a sampled path onto the doubled grid."""
    idx = path.seed_tag if path_index is None else path_index
    values = refine_values(path.values, path.grid, path.hurst, master_seed, first_index=idx)
    return FbmPath(path.grid.refined(2), values, path.hurst, idx)
