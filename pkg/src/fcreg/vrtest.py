"""
Variance-ratio test for the dimension of the stochastic trend

The statistic compares the partial-sum covariance K0 with the covariance C0
inside the span of the ell leading eigenfunctions of C0:

    gamma_j  solve  c phi = gamma k phi   (ell x ell, ascending)
    stat(d0) = T^2 * sum_{j <= d0} gamma_j

and is referred to the Monte Carlo law of tr((int V V')^-1 int W W') with W a
d0-dimensional Brownian motion and V its running integral.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from .config import get_cache_dir, get_n_jobs
from .errors import ConfigError, NumericalError
from .fgrid import FnSeries, LinOp, eig_self_adjoint, series_tensor
from .schemas import VRConfig, VRReport

logger = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.90, 0.95, 0.99)
CACHE_FORMAT_VERSION = 1
BLOCK_SIZE = 500
# Null draws whose int V V' has a condition number above this are redrawn
MAX_CONDITION = 1e12
PENCIL_FLOOR = 1e-12


def c0_hat(series: FnSeries, centered: bool = True) -> LinOp:
    """(1/T) sum_t z_t (x) z_t"""
    z = series.demeaned() if centered else series
    return series_tensor(z, z, 0)


def k0_hat(series: FnSeries, centered: bool = True) -> LinOp:
    """(1/T) sum_t S_t (x) S_t with partial sums S_t = z_1 + ... + z_t"""
    z = series.demeaned() if centered else series
    partial = FnSeries(z.grid, np.cumsum(z.values, axis=0))
    return series_tensor(partial, partial, 0)


def vr_pencil(series: FnSeries, cfg: VRConfig) -> Tuple[np.ndarray, int]:
    """Ascending generalized eigenvalues of (c, k) in the leading ell-dimensional eigenspace of C0"""
    z = series.demeaned() if cfg.centered else series
    T = z.T
    eig = eig_self_adjoint(c0_hat(z, centered=False))
    if eig.rank < cfg.ell:
        logger.warning(f"Covariance has numerical rank {eig.rank} < ell={cfg.ell}; the test may be unreliable")
    scores = z.scores(eig.eigenfns[:cfg.ell])
    partial = np.cumsum(scores, axis=0)
    k = partial.T @ partial / T
    c = scores.T @ scores / T
    k_eigenvalues = linalg.eigvalsh(k)
    if k_eigenvalues[0] <= PENCIL_FLOOR * max(k_eigenvalues[-1], np.finfo(float).tiny):
        raise NumericalError(f"Projected partial-sum covariance is singular in the {cfg.ell}-dimensional space")
    try:
        gamma = linalg.eigh(c, k, eigvals_only=True)
    except linalg.LinAlgError as e:
        raise NumericalError(f"Variance-ratio pencil could not be solved: {e}")
    return np.sort(gamma), T


def vr_stat(series: FnSeries, d0: int, cfg: VRConfig) -> float:
    if not 1 <= d0 <= cfg.ell:
        raise ConfigError(f"d0={d0} must lie in 1..ell={cfg.ell}")
    gamma, T = vr_pencil(series, cfg)
    return float(T ** 2 * gamma[:d0].sum())


def _simulate_block(d0: int, centered: bool, steps: int, size: int, seed: int, block: int) -> Tuple[np.ndarray, int]:
    seed_seq = np.random.SeedSequence(seed, spawn_key=(d0, int(centered), block))
    rng = np.random.Generator(np.random.Philox(seed_seq))
    out = np.empty(size)
    filled, redraws = 0, 0
    while filled < size:
        batch = size - filled
        W = np.cumsum(rng.standard_normal((batch, steps, d0)) / np.sqrt(steps), axis=1)
        if centered:
            W = W - W.mean(axis=1, keepdims=True)
        V = np.cumsum(W, axis=1) / steps
        int_VV = np.einsum("bsi,bsj->bij", V, V) / steps
        int_WW = np.einsum("bsi,bsj->bij", W, W) / steps
        ok = np.linalg.cond(int_VV) < MAX_CONDITION
        redraws += int(batch - ok.sum())
        stats = np.trace(np.linalg.solve(int_VV[ok], int_WW[ok]), axis1=1, axis2=2)
        out[filled:filled + stats.size] = stats
        filled += stats.size
    return out, redraws


@dataclass(frozen=True, eq=False)
class NullTable:
    """Sorted Monte Carlo draws of the null functional for one d0"""

    d0: int
    centered: bool
    draws: int
    steps: int
    seed: int
    values: np.ndarray

    @property
    def quantiles(self) -> Dict[float, float]:
        return {q: float(np.quantile(self.values, q)) for q in QUANTILE_LEVELS}

    def p_value(self, stat: float) -> float:
        """Share of null draws at or above the statistic"""
        above = self.values.size - np.searchsorted(self.values, stat, side="left")
        return float(above / self.values.size)


def null_quantiles(d0: int, draws: int, steps: int, seed: int, centered: bool = False,
                   n_jobs: Optional[int] = None) -> NullTable:
    """Simulate the null law for dimension d0; identical for any number of workers"""
    if d0 < 1:
        raise ConfigError(f"d0 must be at least 1, got {d0}")
    if draws < 1000 or steps < 100:
        raise ConfigError(f"Null simulation needs draws >= 1000 and steps >= 100 (got {draws}, {steps})")
    sizes = [BLOCK_SIZE] * (draws // BLOCK_SIZE)
    if draws % BLOCK_SIZE:
        sizes.append(draws % BLOCK_SIZE)
    results = Parallel(n_jobs=get_n_jobs(n_jobs))(
        delayed(_simulate_block)(d0, centered, steps, size, seed, block) for block, size in enumerate(sizes)
    )
    values = np.sort(np.concatenate([r[0] for r in results]))
    redraws = sum(r[1] for r in results)
    if redraws:
        logger.info(f"Redrew {redraws} near-singular null draws (d0={d0})")
    values.setflags(write=False)
    return NullTable(d0, centered, draws, steps, seed, values)


def _cache_path(cache_dir: Path, d0: int, cfg: VRConfig) -> Path:
    return cache_dir / (
        f"vrnull_d{d0}_c{int(cfg.centered)}_n{cfg.null_draws}_s{cfg.bm_steps}_seed{cfg.null_seed}.npz"
    )


def load_or_simulate_null(d0: int, cfg: VRConfig, cache_dir: Optional[Path] = None,
                          n_jobs: Optional[int] = None) -> NullTable:
    """Null table from the on-disk cache, simulating and storing it on a miss"""
    cache_dir = Path(cache_dir) if cache_dir is not None else get_cache_dir()
    path = _cache_path(cache_dir, d0, cfg)
    key = (d0, int(cfg.centered), cfg.null_draws, cfg.bm_steps, cfg.null_seed)
    if path.exists():
        try:
            with np.load(path) as data:
                stored = tuple(int(data[k]) for k in ("d0", "centered", "draws", "steps", "seed"))
                if int(data["format_version"]) == CACHE_FORMAT_VERSION and stored == key:
                    logger.info(f"Null table cache hit: {path.name}")
                    values = np.array(data["values"])
                    values.setflags(write=False)
                    return NullTable(d0, cfg.centered, cfg.null_draws, cfg.bm_steps, cfg.null_seed, values)
        except (OSError, KeyError, ValueError) as e:
            logger.warning(f"Ignoring unreadable null table cache {path}: {e}")
        logger.info(f"Null table cache at {path.name} is stale; simulating")
    else:
        logger.info(f"Null table cache miss: simulating d0={d0} ({cfg.null_draws} draws, {cfg.bm_steps} steps)")

    table = null_quantiles(d0, cfg.null_draws, cfg.bm_steps, cfg.null_seed, cfg.centered, n_jobs)
    try:
        cache_dir.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path, format_version=CACHE_FORMAT_VERSION, d0=d0, centered=int(cfg.centered),
            draws=cfg.null_draws, steps=cfg.bm_steps, seed=cfg.null_seed, values=table.values,
        )
    except OSError as e:
        logger.warning(f"Could not write null table cache {path}: {e}")
    return table


def sequential_dn(series: FnSeries, cfg: VRConfig, cache_dir: Optional[Path] = None,
                  n_jobs: Optional[int] = None) -> VRReport:
    """
    Test d_N = d0 against d_N < d0 for d0 = d_max, ..., 1.

    All statistics are reported; the estimate is the first d0 (from the top)
    that is not rejected at cfg.level, or 0.
    """
    gamma, T = vr_pencil(series, cfg)
    d0_values = list(range(cfg.d_max, 0, -1))
    stats, p_values, quantile_table = [], [], {}
    for d0 in d0_values:
        stat = float(T ** 2 * gamma[:d0].sum())
        table = load_or_simulate_null(d0, cfg, cache_dir, n_jobs)
        stats.append(stat)
        p_values.append(table.p_value(stat))
        quantile_table[d0] = table.quantiles

    d_hat = next((d0 for d0, p in zip(d0_values, p_values) if p > cfg.level), 0)
    logger.info(f"Variance-ratio test: estimated d_N = {d_hat} at level {cfg.level}")
    return VRReport(
        d0=d0_values, stats=stats, p_values=p_values, d_hat=d_hat, level=cfg.level, quantile_table=quantile_table,
    )
