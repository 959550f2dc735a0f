"""
Lag-kappa autocovariance operators and the nonstationary/stationary split

For a (possibly demeaned) series z_1..z_T the lag-kappa operator is

    C h = (1/T) * sum_{t=kappa+1}^{T} <z_t, h> z_{t-kappa}

with D = C* C and E = C C*. The leading d_N eigenfunctions of D span the
estimated nonstationary subspace; the next K - d_N carry the stationary part
kept by the K selection rule.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

from .errors import DataError, NumericalError
from .fgrid import (
    EigenSystem,
    FnSeries,
    LinOp,
    eig_self_adjoint,
    identity,
    op_adjoint,
    series_tensor,
    zero,
)

logger = logging.getLogger(__name__)

DEFAULT_A1 = 0.4
DEFAULT_A2_EXP = 0.2
SCALINGS = ("total", "leading")


@dataclass(frozen=True, eq=False)
class AcovSet:
    kappa: int
    T: int
    centered: bool
    C: LinOp
    D: LinOp
    E: LinOp
    eig_D: EigenSystem
    eig_E: EigenSystem

    @property
    def rank(self) -> int:
        """Numerical rank of D"""
        return self.eig_D.rank


@dataclass(frozen=True, eq=False)
class FpcaSplit:
    """Projections onto the estimated nonstationary (N) and stationary (S) subspaces"""

    d_N: int
    P_N: LinOp
    P_S: LinOp
    Q_N: LinOp
    Q_S: LinOp
    acov: AcovSet
    K: Optional[int] = None

    @property
    def K_S(self) -> Optional[int]:
        return None if self.K is None else self.K - self.d_N

    def with_K(self, K: int) -> "FpcaSplit":
        if K < self.d_N:
            raise DataError(f"K={K} is smaller than d_N={self.d_N}")
        if K > len(self.acov.eig_D):
            raise DataError(f"K={K} exceeds the number of eigenvalues ({len(self.acov.eig_D)})")
        return replace(self, K=K)


def autocov(series: FnSeries, kappa: int, centered: bool = False) -> AcovSet:
    """Lag-kappa sample autocovariance operator with divisor T, plus the D and E eigensystems"""
    if kappa < 0:
        raise DataError(f"Lag must be nonnegative, got {kappa}")
    if series.T <= kappa:
        raise DataError(f"Series of length T={series.T} has no lag-{kappa} pairs")
    z = series.demeaned() if centered else series
    C = op_adjoint(series_tensor(z, z, kappa))
    D = op_adjoint(C) @ C
    E = C @ op_adjoint(C)
    return AcovSet(
        kappa=kappa,
        T=series.T,
        centered=centered,
        C=C,
        D=D,
        E=E,
        eig_D=eig_self_adjoint(D),
        eig_E=eig_self_adjoint(E),
    )


def split(acov: AcovSet, d_N: int) -> FpcaSplit:
    if d_N < 1:
        raise DataError(f"d_N must be at least 1, got {d_N}")
    if d_N > acov.rank:
        raise NumericalError(f"d_N={d_N} exceeds the numerical rank {acov.rank} of D (kappa={acov.kappa})")
    grid = acov.C.domain
    P_N = acov.eig_D.projection(1, d_N)
    Q_N = acov.eig_E.projection(1, d_N)
    return FpcaSplit(
        d_N=d_N,
        P_N=P_N,
        P_S=identity(grid) - P_N,
        Q_N=Q_N,
        Q_S=identity(grid) - Q_N,
        acov=acov,
    )


def scaled_eigenvalues(acov: AcovSet, d_N: int, normalization: str = "total") -> np.ndarray:
    """
    Stationary eigenvalues lambda_j(D), j > d_N, made scale free.

    "total" divides by their sum, "leading" by the largest of them.
    Eigenvalues at or below the floor count as zero.
    """
    if normalization not in SCALINGS:
        raise DataError(f"Unknown eigenvalue normalization '{normalization}'; expected one of {SCALINGS}")
    eigenvalues = np.array(acov.eig_D.eigenvalues)
    eigenvalues[eigenvalues <= acov.eig_D.floor] = 0.0
    tail = eigenvalues[d_N:]
    total = tail.sum() if normalization == "total" else tail.max(initial=0.0)
    if total <= 0:
        return np.zeros_like(tail)
    return tail / total


def select_K(acov: AcovSet, d_N: int, a1: float = DEFAULT_A1, a2_exp: float = DEFAULT_A2_EXP,
             T: int = None, normalization: str = "total") -> int:
    """K = d_N + #{j : scaled eigenvalue > a1 * T^(-a2_exp)}"""
    T = acov.T if T is None else T
    threshold = a1 * T ** (-a2_exp)
    K_S = int(np.count_nonzero(scaled_eigenvalues(acov, d_N, normalization) > threshold))
    if K_S == 0:
        logger.warning(
            f"No stationary eigenvalue passes the threshold {a1}*T^-{a2_exp} = {threshold:.4g} (T={T}); K = d_N"
        )
    else:
        logger.info(f"Selected K={d_N + K_S} (d_N={d_N}, K_S={K_S}, threshold={threshold:.4g})")
    return d_N + K_S


def restricted_inverse(acov: AcovSet, lo: int, hi: int) -> LinOp:
    """sum_{j=lo}^{hi} lambda_j(D)^-1 Pi_j(D), 1-based inclusive"""
    grid = acov.D.domain
    if hi < lo:
        return zero(grid, grid)
    if lo < 1 or hi > len(acov.eig_D):
        raise DataError(f"Eigen index range [{lo}, {hi}] outside 1..{len(acov.eig_D)}")
    eigenvalues = acov.eig_D.eigenvalues[lo - 1:hi]
    below = np.flatnonzero(eigenvalues <= acov.eig_D.floor)
    if below.size:
        j = lo + int(below[0])
        raise NumericalError(
            f"Eigenvalue {j} of D ({eigenvalues[below[0]]:.3e}) is below the floor {acov.eig_D.floor:.3e}; "
            f"cannot invert on indices {lo}..{hi}"
        )
    return acov.eig_D.weighted_projection(1.0 / eigenvalues, lo)


def eigen_table(acov: AcovSet, d_N: int, normalization: str = "total") -> pd.DataFrame:
    """Eigenvalue diagnostics: index, eigenvalue of D, scaled eigenvalue (NaN for j <= d_N)"""
    eigenvalues = np.array(acov.eig_D.eigenvalues)
    scaled = np.full(eigenvalues.size, np.nan)
    scaled[d_N:] = scaled_eigenvalues(acov, d_N, normalization)
    return pd.DataFrame({
        "index": np.arange(1, eigenvalues.size + 1),
        "eigenvalue": eigenvalues,
        "scaled": scaled,
    })
