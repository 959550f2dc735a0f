"""
Monte Carlo laboratory: a cointegrated functional regression with measurement
errors, its error-size calibration, and the replication harness that tabulates
estimation error and confidence-interval coverage.

Coefficients of x on the Fourier basis v_1, v_2, ... follow

    nonstationary (j <= d_N):  delta c_{j,t} = beta_N_j delta c_{j,t-1} + sigma_j eps_{j,t}
    stationary    (j >  d_N):  c_{j,t}       = beta_S_j c_{j,t-1}       + sigma_j eps_{j,t}

and y has coefficients gamma_j c_{j,t} + sigma_u_j eps_u_{j,t} on the same basis.
"""

import logging
from dataclasses import dataclass
from itertools import product
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import get_n_jobs
from .errors import NumericalError
from .fgrid import Fn, FnSeries, Grid, LinOp, basis_matrix, fourier_basis, inner, op_norm, synthesize
from .regress import FitResult, ci_scalar, fit
from .schemas import DgpConfig, TableSpec

logger = logging.getLogger(__name__)

DESIGN_RATES = {"exponential": 0.8, "sparse": 0.1}
SLOPE_DECAY = 0.8
N_MEAN_COEFFICIENTS = 10
TABLE_COLUMNS = ["design", "scale_pct", "T", "kappa", "metric", "value", "mc_se", "reps", "failures"]


@dataclass(frozen=True, eq=False)
class DgpParameters:
    """Random design of one replication"""

    beta_N: np.ndarray
    beta_S: np.ndarray
    sigma_eps: np.ndarray
    gamma: np.ndarray
    sigma_u: np.ndarray
    c_x: np.ndarray
    c_y: np.ndarray


@dataclass(frozen=True, eq=False)
class DgpDraw:
    x_tilde: FnSeries
    y_tilde: FnSeries
    f_true: LinOp
    P_N_true: LinOp
    mu: Fn
    x: FnSeries
    basis: List[Fn]
    params: DgpParameters
    sigma_e: float
    sigma_ey: float


def innovation_scales(d_N: int, m: int, M: int, J: int, rate: float) -> np.ndarray:
    """1 up to d_N+m, geometric up to d_N+M, then sigma_M (j-M)^-2"""
    j = np.arange(1, J + 1)
    geometric = np.where(j <= d_N + m, 1.0, rate ** np.maximum(j - d_N - m, 0).astype(float))
    sigma_M = 1.0 if M <= d_N + m else rate ** (M - d_N - m)
    tail = sigma_M * np.maximum(j - M, 1).astype(float) ** -2.0
    return np.where(j <= d_N + M, geometric, tail)


def slope_scales(d_N: int, m: int, J: int) -> np.ndarray:
    j = np.arange(1, J + 1)
    return np.where(j <= d_N + m, 1.0, SLOPE_DECAY ** np.maximum(j - d_N - m, 0).astype(float))


def draw_parameters(cfg: DgpConfig, rng: np.random.Generator) -> DgpParameters:
    J, d_N = cfg.J_trunc, cfg.d_N
    signs = rng.choice([-1.0, 1.0], size=d_N)
    beta_N = signs * rng.uniform(-0.5, 0.5, size=d_N)
    j_S = np.arange(d_N + 1, J + 1)
    beta_S = np.where(j_S <= cfg.M, rng.uniform(0.5, 0.9, size=j_S.size), rng.uniform(-0.9, 0.9, size=j_S.size))
    sigma = innovation_scales(d_N, cfg.m, cfg.M, J, DESIGN_RATES[cfg.design])
    gamma = slope_scales(d_N, cfg.m, J) * rng.uniform(-1.0, 1.0, size=J)
    n_mean = min(N_MEAN_COEFFICIENTS, J)
    return DgpParameters(
        beta_N=beta_N,
        beta_S=beta_S,
        sigma_eps=sigma,
        gamma=gamma,
        sigma_u=sigma.copy(),
        c_x=rng.standard_normal(n_mean),
        c_y=rng.standard_normal(n_mean),
    )


def _ar1_states(beta: np.ndarray, sigma: np.ndarray, T: int, burn_in: int, rng: np.random.Generator,
                reps: Optional[int] = None) -> Iterator[np.ndarray]:
    """Yield the T post-burn-in states of independent AR(1) processes started at zero"""
    shape = beta.shape if reps is None else (reps,) + beta.shape
    state = np.zeros(shape)
    for t in range(burn_in + T):
        state = beta * state + sigma * rng.standard_normal(shape)
        if t >= burn_in:
            yield state


def _coefficient_paths(cfg: DgpConfig, params: DgpParameters, rng: np.random.Generator) -> np.ndarray:
    d_N = cfg.d_N
    delta = np.array(list(_ar1_states(params.beta_N, params.sigma_eps[:d_N], cfg.T, 0, rng)))
    stationary = np.array(list(_ar1_states(params.beta_S, params.sigma_eps[d_N:], cfg.T, cfg.burn_in, rng)))
    return np.hstack([np.cumsum(delta, axis=0), stationary])


def _mean_sample_variance(states: Iterator[np.ndarray]) -> np.ndarray:
    total, total_sq, count = 0.0, 0.0, 0
    for state in states:
        total = total + state
        total_sq = total_sq + state ** 2
        count += 1
    return (total_sq / count - (total / count) ** 2).sum(axis=-1)


def calibrate_error_scale(cfg: DgpConfig, params: DgpParameters = None,
                          rng: np.random.Generator = None) -> Tuple[float, float]:
    """
    Scales of the measurement errors in x and y.

    The target is the nuclear norm of the covariance of (delta P_N x_t, P_S x_t),
    averaged over cfg.calib_reps simulated samples. The x error gets
    error_scale_pct % of it and the y error the remainder.
    """
    rng = rng if rng is not None else np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    params = params if params is not None else draw_parameters(cfg, rng)
    d_N, reps = cfg.d_N, cfg.calib_reps
    var_N = _mean_sample_variance(_ar1_states(params.beta_N, params.sigma_eps[:d_N], cfg.T, 0, rng, reps))
    var_S = _mean_sample_variance(_ar1_states(params.beta_S, params.sigma_eps[d_N:], cfg.T, cfg.burn_in, rng, reps))
    target = float(np.mean(var_N + var_S))

    pct = cfg.error_scale_pct
    if pct > 100:
        logger.warning(f"Error scale {pct}% exceeds 100%; the response carries no measurement error")
    sigma_e = float(np.sqrt(pct / 100 * target / (d_N + 1)))
    sigma_ey = float(np.sqrt(max(100 - pct, 0) / 100 * target / (d_N + 1)))
    logger.debug(f"Calibrated target nuclear norm {target:.4g}: sigma_e={sigma_e:.4g}, sigma_ey={sigma_ey:.4g}")
    return sigma_e, sigma_ey


def draw_dgp(cfg: DgpConfig, rng: np.random.Generator = None, params: DgpParameters = None,
             error_scales: Tuple[float, float] = None) -> DgpDraw:
    """One sample (x_tilde, y_tilde) with its latent truth"""
    rng = rng if rng is not None else np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    params = params if params is not None else draw_parameters(cfg, rng)
    sigma_e, sigma_ey = error_scales if error_scales is not None else calibrate_error_scale(cfg, params, rng)

    grid = Grid(0.0, 1.0, cfg.grid_n)
    basis = fourier_basis(grid, cfg.J_trunc)
    B = basis_matrix(basis)
    T, J, d_N = cfg.T, cfg.J_trunc, cfg.d_N

    X = _coefficient_paths(cfg, params, rng)
    U = params.sigma_u * rng.standard_normal((T, J))
    Y = params.gamma * X + U

    mu_x = synthesize(grid, params.c_x, basis[:params.c_x.size])
    mu_y = synthesize(grid, params.c_y, basis[:params.c_y.size])
    x = synthesize(grid, X, basis) + mu_x
    y = synthesize(grid, Y, basis) + mu_y

    E_x = sigma_e * rng.standard_normal((T, d_N + 1))
    E_y = sigma_ey * rng.standard_normal((T, d_N + 1))
    x_tilde = x + synthesize(grid, E_x, basis[:d_N + 1])
    y_tilde = y + synthesize(grid, E_y, basis[:d_N + 1])

    f_true = LinOp(grid, grid, (B.T * params.gamma) @ B)
    P_N_true = LinOp(grid, grid, B[:d_N].T @ B[:d_N])
    return DgpDraw(
        x_tilde=x_tilde,
        y_tilde=y_tilde,
        f_true=f_true,
        P_N_true=P_N_true,
        mu=mu_y - f_true(mu_x),
        x=x,
        basis=basis,
        params=params,
        sigma_e=sigma_e,
        sigma_ey=sigma_ey,
    )


def coverage_target(basis: List[Fn]) -> Tuple[Fn, Fn]:
    """zeta = sum_j c_j v_j with c_j = 1 for j <= 9 and (j-8)^-2 after; phi = v_1"""
    j = np.arange(1, len(basis) + 1)
    c = np.where(j <= 9, 1.0, np.maximum(j - 8, 1).astype(float) ** -2.0)
    return synthesize(basis[0].grid, c, basis), basis[0]


def _basis_hs(op: LinOp, basis: List[Fn]) -> float:
    return float(np.sqrt(sum(op(v).norm() ** 2 for v in basis)))


def hs_error(f_hat: LinOp, f_true: LinOp, basis: List[Fn]) -> float:
    """sqrt(sum_j ||(f_hat - f) v_j||^2) over the synthesis basis"""
    return _basis_hs(f_hat - f_true, basis)


def long_run_error(f_N: LinOp, f_true: LinOp, P_N_true: LinOp, basis: List[Fn]) -> float:
    return _basis_hs(f_N - f_true @ P_N_true, basis)


def projection_error(P_hat: LinOp, P_true: LinOp) -> float:
    return op_norm(P_hat - P_true)


def coverage(result: FitResult, draw: DgpDraw, level: float) -> float:
    """1.0 when the interval for <f(zeta), phi> contains the true value"""
    zeta, phi = coverage_target(draw.basis)
    report = ci_scalar(result, zeta, phi, level)
    truth = inner(draw.f_true(zeta), phi)
    return float(report.ci_low <= truth <= report.ci_high)


def metrics(result: FitResult, draw: DgpDraw, names: List[str], level: float = 0.95) -> Dict[str, float]:
    values = {}
    for name in names:
        if name == "hs_error":
            values[name] = hs_error(result.f_total, draw.f_true, draw.basis)
        elif name == "coverage":
            values[name] = coverage(result, draw, level)
        elif name == "projection_error":
            values[name] = projection_error(result.split.P_N, draw.P_N_true)
        elif name == "long_run_error":
            values[name] = long_run_error(result.f_N, draw.f_true, draw.P_N_true, draw.basis)
        else:
            raise ValueError(f"Unknown metric '{name}'")
    return values


def _replicate(spec: TableSpec, cell_index: int, design: str, scale: float, T: int, rep: int) -> Dict:
    seed_seq = np.random.SeedSequence(spec.master_seed, spawn_key=(cell_index, rep))
    rng = np.random.Generator(np.random.Philox(seed_seq))
    draw = draw_dgp(spec.dgp_config(design, scale, T), rng)
    out = {}
    for kappa in spec.kappas:
        try:
            result = fit(draw.x_tilde, draw.y_tilde, spec.fit_config(kappa))
            out[kappa] = metrics(result, draw, list(spec.metrics), spec.level)
        except NumericalError as e:
            logger.debug(f"Replication {rep} of cell {cell_index} failed at kappa={kappa}: {e}")
            out[kappa] = None
    return out


def run_table(spec: TableSpec, n_jobs: Optional[int] = None) -> pd.DataFrame:
    """
    Monte Carlo averages of the requested metrics for every (design, scale, T) cell of the table

    Returns:
        DataFrame with columns (design, scale_pct, T, kappa, metric, value, mc_se, reps, failures)
    """
    cells = list(product(spec.designs, spec.scales, spec.T_values))
    jobs = [(c, design, scale, T, rep) for c, (design, scale, T) in enumerate(cells) for rep in range(spec.reps)]
    logger.info(f"Running {len(cells)} cells x {spec.reps} replications")
    results = Parallel(n_jobs=get_n_jobs(n_jobs))(
        delayed(_replicate)(spec, c, design, scale, T, rep) for c, design, scale, T, rep in jobs
    )

    rows = []
    for c, (design, scale, T) in enumerate(cells):
        cell_results = results[c * spec.reps:(c + 1) * spec.reps]
        for kappa in spec.kappas:
            succeeded = [r[kappa] for r in cell_results if r[kappa] is not None]
            failures = spec.reps - len(succeeded)
            if failures:
                logger.warning(
                    f"Cell design={design}, scale={scale}%, T={T}, kappa={kappa}: "
                    f"{failures} of {spec.reps} replications excluded"
                )
            for metric in spec.metrics:
                values = np.array([r[metric] for r in succeeded])
                mean = float(values.mean()) if values.size else float("nan")
                mc_se = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else float("nan")
                rows.append([design, scale, T, kappa, metric, mean, mc_se, spec.reps, failures])
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)
