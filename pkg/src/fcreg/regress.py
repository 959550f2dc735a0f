"""
Two-step slope estimation for functional regressions with cointegrated,
error-contaminated regressors, and the plug-in inference built on it.

The slope is estimated in two steps. The long-run part uses the first d_N
eigenfunctions of D (the nonstationary directions):

    f_N = [(1/T) sum x_{t-kappa} (x) y_t] o C o sum_{j<=d_N} lambda_j^-1 Pi_j

and the short-run part reuses the same construction on y_t - f_N(x_t) with
the eigen indices d_N+1..K. Using a lag kappa >= 1 keeps serially
uncorrelated measurement errors in x out of the estimator.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm

from .acovfpca import FpcaSplit, autocov, restricted_inverse, select_K, split
from .densities import density_moments, inv_clr
from .errors import DataError, NumericalError
from .fgrid import Fn, FnSeries, LinOp, inner, series_tensor
from .schemas import FitConfig, InferenceReport, VRConfig, VRReport
from .vrtest import sequential_dn

logger = logging.getLogger(__name__)

COMPONENTS = ("total", "long_run", "short_run")


@dataclass(frozen=True, eq=False)
class FitResult:
    config: FitConfig
    T: int
    f_N: LinOp
    f_S: LinOp
    f_total: LinOp
    intercept: Fn
    split: FpcaSplit
    residuals: FnSeries
    C_u_hat: LinOp
    x_mean: Fn
    y_mean: Fn
    x_used: FnSeries

    @property
    def K(self) -> int:
        return self.split.K

    @property
    def K_S(self) -> int:
        return self.split.K_S

    def component(self, name: str) -> LinOp:
        if name not in COMPONENTS:
            raise DataError(f"Unknown component '{name}', expected one of {COMPONENTS}")
        return {"total": self.f_total, "long_run": self.f_N, "short_run": self.f_S}[name]


def fit(x: FnSeries, y: FnSeries, cfg: FitConfig) -> FitResult:
    """
    Estimate f in y_t = mu + f(x_t) + u_t from a regressor observed with error.

    Args:
        x: regressor series (possibly contaminated by measurement error)
        y: response series, same length as x
        cfg: lag, d_N, K rule and centering

    Returns:
        FitResult with the long-run, short-run and total estimates
    """
    if x.T != y.T:
        raise DataError(f"x and y have different lengths: {x.T} vs {y.T}")
    T = x.T
    kappa = cfg.kappa
    if T <= kappa + 2:
        raise DataError(f"T={T} is too short for lag {kappa}")

    xc = x.demeaned() if cfg.centered else x
    yc = y.demeaned() if cfg.centered else y

    acov = autocov(x, kappa, centered=cfg.centered)
    fpca = split(acov, cfg.d_N)
    K = cfg.K if cfg.K is not None else select_K(acov, cfg.d_N, cfg.a1, cfg.a2_exp, T, cfg.k_scaling)
    if K == cfg.d_N:
        threshold = cfg.a1 * T ** (-cfg.a2_exp)
        raise NumericalError(
            f"No stationary component selected (K_S = 0) at threshold {cfg.a1}*T^-{cfg.a2_exp} = {threshold:.4g}; "
            "lower a1 or a2_exp, or set K manually"
        )
    if T <= kappa + K + 2:
        raise DataError(f"T={T} is too short for kappa={kappa} and K={K}")
    fpca = fpca.with_K(K)

    f_N = series_tensor(xc, yc, kappa) @ acov.C @ restricted_inverse(acov, 1, cfg.d_N)
    y_short = yc - xc.map(f_N)
    f_S = series_tensor(xc, y_short, kappa) @ acov.C @ restricted_inverse(acov, cfg.d_N + 1, K)
    f_total = f_N + f_S

    x_mean, y_mean = x.mean(), y.mean()
    if cfg.centered:
        intercept = y_mean - f_total(x_mean)
    else:
        intercept = y.grid.constant(0.0)
    residuals = yc - xc.map(f_total)
    C_u_hat = series_tensor(residuals, residuals, 0)

    logger.info(f"Fitted kappa={kappa}, d_N={cfg.d_N}, K={K} (K_S={K - cfg.d_N}) on T={T}")
    return FitResult(
        config=cfg,
        T=T,
        f_N=f_N,
        f_S=f_S,
        f_total=f_total,
        intercept=intercept,
        split=fpca,
        residuals=residuals,
        C_u_hat=C_u_hat,
        x_mean=x_mean,
        y_mean=y_mean,
        x_used=xc,
    )


def theta_hat(fit: FitResult, zeta: Fn) -> float:
    """
    Plug-in variance scale of the short-run estimate at zeta.

    With g = C P_S (D restricted to d_N+1..K)^-1 zeta the value is
    (1/T) sum_t <P_S x_t, g>^2.
    """
    if not fit.K_S:
        raise NumericalError("theta_hat needs at least one stationary component (K_S >= 1)")
    fpca = fit.split
    inv_S = restricted_inverse(fpca.acov, fpca.d_N + 1, fpca.K)
    g = fpca.acov.C(fpca.P_S(inv_S(zeta)))
    scores = fit.x_used.map(fpca.P_S).scores([g])[:, 0]
    return float(np.mean(scores ** 2))


def partial_effect(fit: FitResult, zeta: Fn, component: str = "total") -> Fn:
    """Response of y to a perturbation zeta of x"""
    return fit.component(component)(zeta)


def _z_value(level: float) -> float:
    if not 0 < level < 1:
        raise DataError(f"Confidence level must lie in (0, 1), got {level}")
    return float(norm.ppf((1 + level) / 2))


def ci_scalar(fit: FitResult, zeta: Fn, phi: Fn, level: float = 0.95, component: str = "total") -> InferenceReport:
    """Confidence interval for <f(zeta), phi>"""
    z = _z_value(level)
    theta = theta_hat(fit, zeta)
    point = inner(partial_effect(fit, zeta, component), phi)
    variance = theta * max(inner(phi, fit.C_u_hat(phi)), 0.0) / fit.T
    half = z * np.sqrt(variance)
    return InferenceReport(
        point=point, theta_hat=theta, variance=variance,
        ci_low=point - half, ci_high=point + half, level=level, zeta=zeta, phi=phi,
    )


def local_band(fit: FitResult, zeta: Fn, breakpoints: Sequence[float], level: float = 0.95,
               component: str = "total") -> List[InferenceReport]:
    """
    Confidence intervals for the local averages of f(zeta) over [b_j, b_{j+1}].

    The averaging functional of each interval is the grid function whose
    inner product with g equals the average of the interpolant of g.
    """
    if component == "long_run":
        raise DataError("Bands are available for the total and short-run responses only")
    b = np.asarray(breakpoints, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise DataError("A band needs at least two breakpoints")
    if np.any(np.diff(b) <= 0):
        raise DataError("Breakpoints must be strictly increasing")

    z = _z_value(level)
    theta = theta_hat(fit, zeta)
    effect = partial_effect(fit, zeta, component)
    grid = effect.grid
    reports = []
    for lo, hi in zip(b[:-1], b[1:]):
        iota = Fn(grid, grid.interval_weights(lo, hi) / ((hi - lo) * grid.weights))
        point = inner(effect, iota)
        variance = theta * max(inner(iota, fit.C_u_hat(iota)), 0.0) / fit.T
        half = z * np.sqrt(variance)
        reports.append(InferenceReport(
            point=point, theta_hat=theta, variance=variance, ci_low=point - half,
            ci_high=point + half, level=level, interval=(float(lo), float(hi)), zeta=zeta, phi=iota,
        ))
    return reports


def pointwise_band(fit: FitResult, zeta: Fn, level: float = 0.95, component: str = "total") -> List[InferenceReport]:
    """Local band with one interval per grid cell of the response"""
    return local_band(fit, zeta, np.array(fit.f_total.codomain.nodes), level, component)


class ShockCurve(NamedTuple):
    q: float
    density: Fn
    mean: float
    variance: float


def shock_curves(f_total: LinOp, y_ref: Fn, zeta: Fn, q_list: Sequence[float]) -> List[ShockCurve]:
    """Densities inv_clr(y_ref + q f(zeta)) and their moments for each scale q"""
    scale = max(1.0, float(np.max(np.abs(y_ref.values))))
    if abs(y_ref.integral()) > 1e-6 * scale * y_ref.grid.length:
        raise DataError(f"Reference is not a CLR function: its integral is {y_ref.integral():.3e}, not 0")
    response = f_total(zeta)
    curves = []
    for q in q_list:
        if q < 0:
            raise DataError(f"Shock scales must be nonnegative, got {q}")
        density = inv_clr(y_ref + response * q)
        mean, variance = density_moments(density)
        curves.append(ShockCurve(float(q), density, mean, variance))
    return curves


def shock_response(fit: FitResult, y_ref: Fn, zeta: Fn, q_list: Sequence[float]) -> List[ShockCurve]:
    return shock_curves(fit.f_total, y_ref, zeta, q_list)


def residual_trend_series(fit: FitResult, x: FnSeries, y: FnSeries) -> FnSeries:
    """y_t - f_N(x_t): carries no stochastic trend when the long-run relation holds"""
    if x.T != y.T:
        raise DataError(f"x and y have different lengths: {x.T} vs {y.T}")
    return y - x.map(fit.f_N)


def diagnostic_trend_check(fit: FitResult, x: FnSeries, y: FnSeries, d_max: int, level: float = 0.05,
                           **vr_options) -> VRReport:
    """Variance-ratio test on the long-run residuals; the check passes when the estimated dimension is 0"""
    options = {"ell": d_max, "centered": fit.config.centered, **vr_options}
    cfg = VRConfig(d_max=d_max, level=level, **options)
    report = sequential_dn(residual_trend_series(fit, x, y), cfg)
    if report.d_hat == 0:
        logger.info("Long-run residuals show no stochastic trend")
    else:
        logger.warning(f"Long-run residuals keep {report.d_hat} stochastic trend(s); the long-run fit may be misspecified")
    return report
