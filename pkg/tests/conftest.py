"""Shared fixtures for the fcreg test suite"""

import numpy as np
import pytest

from src.fcreg.fgrid import FnSeries, Grid
from src.fcreg.schemas import DgpConfig
from src.fcreg.simlab import draw_dgp


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_grid():
    return Grid(0.0, 1.0, 101)


@pytest.fixture
def small_grid():
    return Grid(-1.0, 2.0, 7)


@pytest.fixture
def random_walk_series(rng, unit_grid):
    """Two trending directions plus stationary noise in three more"""
    T = 120
    u = np.array(unit_grid.nodes)
    directions = np.vstack([np.sin(2 * np.pi * k * u) for k in range(1, 6)])
    trends = np.cumsum(rng.standard_normal((T, 2)), axis=0)
    noise = rng.standard_normal((T, 3))
    coefficients = np.hstack([trends, noise])
    return FnSeries(unit_grid, coefficients @ directions)


@pytest.fixture
def null_cache(tmp_path, monkeypatch):
    """Isolated null-quantile cache directory"""
    cache = tmp_path / "cache"
    monkeypatch.setenv("FCREG_CACHE_DIR", str(cache))
    return cache


@pytest.fixture
def small_dgp_config():
    return DgpConfig(d_N=2, m=7, M=20, design="exponential", T=200, error_scale_pct=0.0,
                     J_trunc=25, grid_n=101, calib_reps=50, burn_in=50, seed=7)


@pytest.fixture
def small_draw(small_dgp_config):
    return draw_dgp(small_dgp_config)
