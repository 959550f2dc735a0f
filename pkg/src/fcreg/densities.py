"""
Density front-end: per-period Gaussian KDE on a common support, and the
centered log-ratio (CLR) map between densities and zero-integral functions.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm
from statsmodels.nonparametric.bandwidths import bw_silverman

from .errors import DataError
from .fgrid import Fn, FnSeries, Grid

logger = logging.getLogger(__name__)

DEFAULT_FLOOR_EPS = 1e-10
MASS_TOL = 1e-6


@dataclass(frozen=True)
class SamplePanel:
    """Raw scalar observations, one variable-length sample per period"""

    samples: List[np.ndarray]
    labels: Optional[List[str]] = field(default=None)

    def __post_init__(self):
        cleaned = []
        for t, sample in enumerate(self.samples):
            arr = np.asarray(sample, dtype=float).ravel()
            arr = arr[~np.isnan(arr)]
            if arr.size == 0:
                raise DataError(f"Period {t + 1} has no observations")
            cleaned.append(arr)
        if not cleaned:
            raise DataError("Sample panel has no periods")
        if self.labels is not None and len(self.labels) != len(cleaned):
            raise DataError(f"{len(self.labels)} labels for {len(cleaned)} periods")
        object.__setattr__(self, "samples", cleaned)

    @property
    def periods(self) -> int:
        return len(self.samples)

    def pooled(self) -> np.ndarray:
        return np.concatenate(self.samples)


@dataclass(frozen=True, eq=False)
class DensitySeries(FnSeries):
    """Series of densities: nonnegative rows integrating to one"""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise DataError("Densities must be nonnegative")
        masses = self.values @ self.grid.weights
        bad = np.flatnonzero(np.abs(masses - 1.0) > MASS_TOL)
        if bad.size:
            raise DataError(f"Density row {bad[0] + 1} integrates to {masses[bad[0]]:.8f}, not 1")

    def mean_density(self, start: int = 0, stop: int = None) -> Fn:
        stop = self.T if stop is None else stop
        if not 0 <= start < stop <= self.T:
            raise DataError(f"Period range [{start}, {stop}) is empty or outside 0..{self.T}")
        return Fn(self.grid, self.values[start:stop].mean(axis=0))


def silverman_bandwidth(sample: Sequence[float]) -> float:
    """Robust Silverman rule 0.9 * min(sd, IQR/1.349) * m^(-1/5)"""
    arr = np.asarray(sample, dtype=float).ravel()
    arr = arr[~np.isnan(arr)]
    if arr.size < 2:
        raise DataError(f"Silverman bandwidth needs at least 2 observations, got {arr.size}")
    h = float(bw_silverman(arr))
    if not np.isfinite(h) or h <= 0:
        raise DataError("Silverman bandwidth is zero: the sample has no dispersion")
    return h


def kde(sample: Sequence[float], grid: Grid, bandwidth: float) -> Fn:
    """Gaussian kernel density on the grid nodes, renormalized to unit mass on the grid"""
    if not bandwidth > 0:
        raise DataError(f"Bandwidth must be positive, got {bandwidth}")
    x = np.asarray(sample, dtype=float).ravel()
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise DataError("Cannot estimate a density from an empty sample")
    u = (np.array(grid.nodes)[:, np.newaxis] - x[np.newaxis, :]) / bandwidth
    values = norm.pdf(u).sum(axis=1) / (x.size * bandwidth)
    mass = float(np.dot(grid.weights, values))
    if not mass > 0:
        raise DataError("Density has no mass on the grid support; the sample lies outside [a1, a2]")
    return Fn(grid, values / mass)


def common_support(panel: SamplePanel, mass: float) -> Tuple[float, float]:
    """Central `mass` quantile interval of the pooled sample (linear interpolation)"""
    if not 0 < mass < 1:
        raise DataError(f"Support mass must lie in (0, 1), got {mass}")
    pooled = panel.pooled()
    if pooled.size < 10:
        raise DataError(f"Pooled sample has {pooled.size} observations, need at least 10")
    lo, hi = np.quantile(pooled, [(1 - mass) / 2, (1 + mass) / 2])
    if not hi > lo:
        raise DataError("Pooled sample is degenerate: the support interval is empty")
    return float(lo), float(hi)


def density_series(
    panel: SamplePanel, grid: Grid, bandwidths: Optional[Sequence[float]] = None
) -> Tuple[DensitySeries, np.ndarray]:
    """
    KDE for every period of the panel.

    Args:
        panel: raw samples
        grid: common support grid
        bandwidths: per-period bandwidths; Silverman's rule when omitted

    Returns:
        The density series and the bandwidth used for each period
    """
    if bandwidths is None:
        bandwidths = [silverman_bandwidth(s) for s in panel.samples]
    bandwidths = np.asarray(bandwidths, dtype=float)
    if bandwidths.shape != (panel.periods,):
        raise DataError(f"Expected {panel.periods} bandwidths, got {bandwidths.size}")
    rows = [kde(s, grid, h).values for s, h in zip(panel.samples, bandwidths)]
    logger.info(f"Estimated {panel.periods} densities on [{grid.a1:.4g}, {grid.a2:.4g}] with n={grid.n}")
    return DensitySeries(grid, np.vstack(rows)), bandwidths


def clr(density: Fn, floor_eps: float = DEFAULT_FLOOR_EPS) -> Fn:
    """
    Centered log-ratio: log g - (a2 - a1)^-1 * integral of log g.

    g is floored at floor_eps * max(g) and renormalized first.
    """
    g = np.array(density.values)
    if np.any(g < 0):
        raise DataError("CLR needs a nonnegative density")
    peak = g.max()
    if not peak > 0:
        raise DataError("CLR needs a density with positive mass")
    g = np.maximum(g, floor_eps * peak)
    if np.any(g <= 0):
        raise DataError("Density has zeros; use a positive floor_eps")
    g = g / np.dot(density.grid.weights, g)
    log_g = np.log(g)
    return Fn(density.grid, log_g - np.dot(density.grid.weights, log_g) / density.grid.length)


def inv_clr(h: Fn) -> Fn:
    """exp(h) / integral of exp(h), shifted by max(h) to avoid overflow"""
    e = np.exp(h.values - h.values.max())
    return Fn(h.grid, e / np.dot(h.grid.weights, e))


def clr_series(densities: FnSeries, floor_eps: float = DEFAULT_FLOOR_EPS) -> FnSeries:
    return FnSeries.from_fns([clr(g, floor_eps) for g in densities])


def inv_clr_series(series: FnSeries) -> DensitySeries:
    rows = [inv_clr(h).values for h in series]
    return DensitySeries(series.grid, np.vstack(rows))


def density_moments(density: Fn) -> Tuple[float, float]:
    """Mean and variance of a density under grid quadrature"""
    s = np.array(density.grid.nodes)
    w = density.grid.weights
    mass = float(np.dot(w, density.values))
    mean = float(np.dot(w, s * density.values)) / mass
    variance = float(np.dot(w, (s - mean) ** 2 * density.values)) / mass
    return mean, variance


def reference_clr(densities: DensitySeries, start: int = 0, stop: int = None,
                  floor_eps: float = DEFAULT_FLOOR_EPS) -> Fn:
    """CLR of the average density over periods [start, stop)"""
    return clr(densities.mean_density(start, stop), floor_eps)


def contrast_shock(densities: DensitySeries, early: Tuple[int, int], late: Tuple[int, int],
                   floor_eps: float = DEFAULT_FLOOR_EPS) -> Fn:
    """Shock direction clr(mean density over `late`) - clr(mean density over `early`)"""
    return reference_clr(densities, *late, floor_eps=floor_eps) - reference_clr(densities, *early, floor_eps=floor_eps)


def halves_shock(densities: DensitySeries, break_index: int, floor_eps: float = DEFAULT_FLOOR_EPS) -> Fn:
    """Contrast between the periods before and from `break_index`"""
    return contrast_shock(densities, (0, break_index), (break_index, densities.T), floor_eps)


def endpoints_shock(densities: DensitySeries, width: int, floor_eps: float = DEFAULT_FLOOR_EPS) -> Fn:
    """Contrast between the last and the first `width` periods"""
    if not 0 < width <= densities.T:
        raise DataError(f"Window width {width} outside 1..{densities.T}")
    return contrast_shock(densities, (0, width), (densities.T - width, densities.T), floor_eps)
