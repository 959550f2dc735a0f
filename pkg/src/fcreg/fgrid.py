"""
Function-space numerics on a discretized interval

Functions are sampled on a uniform grid over [a1, a2] with trapezoid weights.
A bounded linear operator is stored as a kernel matrix acting through
quadrature:

    (A f)(s_i) = sum_j kernel[i, j] * w_j * f(s_j)

so the adjoint under the grid inner product is the transposed kernel and a
rank-one tensor f (x) g has kernel g f'.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Union

import numpy as np
from scipy import linalg
from sklearn.utils.extmath import svd_flip

from .errors import DataError, GridMismatchError, NumericalError

logger = logging.getLogger(__name__)

# Eigenvalues below EIGEN_FLOOR * lambda_1 count as zero for rank decisions
EIGEN_FLOOR = 1e-12
SELF_ADJOINT_TOL = 1e-8


def _frozen(array, ndim: int) -> np.ndarray:
    out = np.array(array, dtype=float)
    if out.ndim != ndim:
        raise DataError(f"Expected a {ndim}-dimensional array, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on [a1, a2] with trapezoid quadrature weights"""

    a1: float
    a2: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.a2 > self.a1:
            raise DataError(f"Grid needs a2 > a1, got [{self.a1}, {self.a2}]")
        if int(self.n) != self.n or self.n < 2:
            raise DataError(f"Grid needs at least 2 nodes, got n={self.n}")
        object.__setattr__(self, "a1", float(self.a1))
        object.__setattr__(self, "a2", float(self.a2))
        object.__setattr__(self, "n", int(self.n))

        nodes = np.linspace(self.a1, self.a2, self.n)
        h = (self.a2 - self.a1) / (self.n - 1)
        weights = np.full(self.n, h)
        weights[0] = weights[-1] = h / 2
        object.__setattr__(self, "nodes", _frozen(nodes, 1))
        object.__setattr__(self, "weights", _frozen(weights, 1))

    @classmethod
    def from_nodes(cls, nodes: Sequence[float], rtol: float = 1e-8) -> "Grid":
        """Rebuild a grid from its node vector (e.g. the first row of a series CSV)"""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DataError("A grid needs a one-dimensional node vector with at least 2 nodes")
        grid = cls(nodes[0], nodes[-1], nodes.size)
        if not np.allclose(nodes, grid.nodes, rtol=0.0, atol=rtol * (grid.a2 - grid.a1)):
            raise DataError("Grid nodes are not uniformly spaced; only uniform grids are supported")
        return grid

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.a1, self.a2, self.n) == (other.a1, other.a2, other.n)

    def __hash__(self) -> int:
        return hash((self.a1, self.a2, self.n))

    @property
    def length(self) -> float:
        return self.a2 - self.a1

    @property
    def spacing(self) -> float:
        return self.length / (self.n - 1)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def fn(self, values) -> "Fn":
        return Fn(self, values)

    def constant(self, value: float = 1.0) -> "Fn":
        return Fn(self, np.full(self.n, float(value)))

    def evaluate(self, func: Callable[[np.ndarray], np.ndarray]) -> "Fn":
        """Sample a vectorized callable on the nodes"""
        return Fn(self, func(np.array(self.nodes)))

    def interval_weights(self, lo: float, hi: float) -> np.ndarray:
        """
        Quadrature weights c with sum(c * f) equal to the integral over [lo, hi]
        of the piecewise-linear interpolant of f.

        With lo and hi on nodes this is the trapezoid rule on the sub-interval.
        """
        slack = 1e-12 * self.length
        if not (self.a1 - slack <= lo < hi <= self.a2 + slack):
            raise DataError(f"Interval [{lo}, {hi}] is not an increasing sub-interval of [{self.a1}, {self.a2}]")
        left, right = self.nodes[:-1], self.nodes[1:]
        h = right - left
        p = np.clip(lo, left, right)
        q = np.clip(hi, left, right)
        out = np.zeros(self.n)
        out[:-1] += ((right - p) ** 2 - (right - q) ** 2) / (2 * h)
        out[1:] += ((q - left) ** 2 - (p - left) ** 2) / (2 * h)
        return out

    def require_same(self, other: "Grid", what: str = "operands") -> None:
        if self != other:
            raise GridMismatchError(
                f"Grid mismatch between {what}: [{self.a1}, {self.a2}] n={self.n} "
                f"vs [{other.a1}, {other.a2}] n={other.n}"
            )


@dataclass(frozen=True, eq=False)
class Fn:
    """A function sampled on a grid"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, 1)
        if values.shape[0] != self.grid.n:
            raise DataError(f"Function has {values.shape[0]} values but the grid has {self.grid.n} nodes")
        object.__setattr__(self, "values", values)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Fn):
            self.grid.require_same(other.grid, "functions")
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other) -> "Fn":
        return Fn(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> "Fn":
        return Fn(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other) -> "Fn":
        return Fn(self.grid, self._coerce(other) - self.values)

    def __neg__(self) -> "Fn":
        return Fn(self.grid, -self.values)

    def __mul__(self, scalar: float) -> "Fn":
        return Fn(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Fn":
        return Fn(self.grid, self.values / float(scalar))

    def integral(self) -> float:
        return float(np.dot(self.grid.weights, self.values))

    def norm(self) -> float:
        return float(np.sqrt(inner(self, self)))


@dataclass(frozen=True, eq=False)
class FnSeries:
    """Time-indexed functions on a common grid, one row per period"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, 2)
        if values.shape[1] != self.grid.n:
            raise DataError(f"Series rows have {values.shape[1]} values but the grid has {self.grid.n} nodes")
        if values.shape[0] < 1:
            raise DataError("A functional series needs at least one observation")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_fns(cls, fns: Sequence[Fn]) -> "FnSeries":
        if not fns:
            raise DataError("Cannot build a series from an empty list of functions")
        grid = fns[0].grid
        for f in fns[1:]:
            grid.require_same(f.grid, "series rows")
        return cls(grid, np.vstack([f.values for f in fns]))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.T

    def __getitem__(self, t: int) -> Fn:
        return Fn(self.grid, self.values[t])

    def __iter__(self):
        for t in range(self.T):
            yield self[t]

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, (Fn, FnSeries)):
            self.grid.require_same(other.grid, "series")
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other) -> "FnSeries":
        return FnSeries(self.grid, self.values + self._coerce(other))

    def __sub__(self, other) -> "FnSeries":
        return FnSeries(self.grid, self.values - self._coerce(other))

    def __mul__(self, scalar: float) -> "FnSeries":
        return FnSeries(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def mean(self) -> Fn:
        return Fn(self.grid, self.values.mean(axis=0))

    def demeaned(self) -> "FnSeries":
        return FnSeries(self.grid, self.values - self.values.mean(axis=0))

    def diff(self) -> "FnSeries":
        return FnSeries(self.grid, np.diff(self.values, axis=0))

    def slice(self, start: int, stop: int) -> "FnSeries":
        return FnSeries(self.grid, self.values[start:stop])

    def map(self, op: "LinOp") -> "FnSeries":
        """Apply an operator to every observation"""
        self.grid.require_same(op.domain, "series and operator domain")
        return FnSeries(op.codomain, self.values @ op.matrix.T)

    def scores(self, fns: Sequence[Fn]) -> np.ndarray:
        """Inner products of every observation with each of the given functions (T x len(fns))"""
        basis = np.vstack([f.values for f in fns])
        return (self.values * self.grid.weights) @ basis.T


@dataclass(frozen=True, eq=False)
class LinOp:
    """Bounded linear operator between grid spaces, stored as a quadrature kernel"""

    domain: Grid
    codomain: Grid
    kernel: np.ndarray

    def __post_init__(self):
        kernel = _frozen(self.kernel, 2)
        if kernel.shape != (self.codomain.n, self.domain.n):
            raise DataError(
                f"Kernel shape {kernel.shape} does not match codomain x domain "
                f"({self.codomain.n}, {self.domain.n})"
            )
        object.__setattr__(self, "kernel", kernel)

    @property
    def matrix(self) -> np.ndarray:
        """Matrix acting on node values: kernel @ diag(domain weights)"""
        return self.kernel * self.domain.weights[np.newaxis, :]

    @property
    def is_square(self) -> bool:
        return self.domain == self.codomain

    @property
    def adjoint(self) -> "LinOp":
        return op_adjoint(self)

    def __call__(self, f: Fn) -> Fn:
        return op_apply(self, f)

    def __matmul__(self, other: "LinOp") -> "LinOp":
        return op_compose(self, other)

    def __add__(self, other: "LinOp") -> "LinOp":
        return op_add(self, other)

    def __sub__(self, other: "LinOp") -> "LinOp":
        return op_add(self, op_scale(other, -1.0))

    def __neg__(self) -> "LinOp":
        return op_scale(self, -1.0)

    def __mul__(self, scalar: float) -> "LinOp":
        return op_scale(self, scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues (descending) and grid-orthonormal eigenfunctions of a self-adjoint operator"""

    grid: Grid
    eigenvalues: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues, 1))
        object.__setattr__(self, "vectors", _frozen(self.vectors, 2))

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def eigenfns(self) -> List[Fn]:
        return [Fn(self.grid, v) for v in self.vectors]

    def eigenfn(self, j: int) -> Fn:
        """j-th eigenfunction, 1-based"""
        return Fn(self.grid, self.vectors[j - 1])

    @property
    def floor(self) -> float:
        return EIGEN_FLOOR * max(float(self.eigenvalues[0]), 0.0)

    @property
    def rank(self) -> int:
        if self.eigenvalues[0] <= 0:
            return 0
        return int(np.count_nonzero(self.eigenvalues > self.floor))

    def weighted_projection(self, coefficients: Sequence[float], lo: int) -> LinOp:
        """sum_j c_j v_j (x) v_j over j = lo, lo+1, ... (1-based)"""
        coefficients = np.asarray(coefficients, dtype=float)
        vectors = self.vectors[lo - 1:lo - 1 + coefficients.size]
        kernel = (vectors.T * coefficients) @ vectors
        return LinOp(self.grid, self.grid, kernel)

    def projection(self, lo: int, hi: int) -> LinOp:
        """Orthogonal projection onto span{v_lo, ..., v_hi} (1-based, inclusive)"""
        if hi < lo:
            return zero(self.grid, self.grid)
        if lo < 1 or hi > len(self):
            raise DataError(f"Eigen index range [{lo}, {hi}] outside 1..{len(self)}")
        return self.weighted_projection(np.ones(hi - lo + 1), lo)

    def reconstruct(self, rank: int = None) -> LinOp:
        r = len(self) if rank is None else rank
        return self.weighted_projection(self.eigenvalues[:r], 1)


def inner(f: Fn, g: Fn) -> float:
    """Quadrature inner product sum_j w_j f(s_j) g(s_j)"""
    f.grid.require_same(g.grid, "inner product arguments")
    return float(np.dot(f.grid.weights, f.values * g.values))


def tensor(f: Fn, g: Fn) -> LinOp:
    """Rank-one operator h -> <f, h> g"""
    return LinOp(f.grid, g.grid, np.outer(g.values, f.values))


def series_tensor(left: FnSeries, right: FnSeries, lag: int = 0, divisor: float = None) -> LinOp:
    """
    (1/divisor) * sum_{t=lag+1}^{T} left_{t-lag} (x) right_t

    The sum is truncated to available terms; divisor defaults to T.
    """
    if left.T != right.T:
        raise DataError(f"Series lengths differ: {left.T} vs {right.T}")
    if lag < 0 or lag >= left.T:
        raise DataError(f"Lag {lag} not available for a series of length {left.T}")
    T = left.T
    divisor = float(T if divisor is None else divisor)
    kernel = right.values[lag:].T @ left.values[:T - lag] / divisor
    return LinOp(left.grid, right.grid, kernel)


def op_apply(A: LinOp, f: Fn) -> Fn:
    A.domain.require_same(f.grid, "operator domain and argument")
    return Fn(A.codomain, A.matrix @ f.values)


def op_compose(A: LinOp, B: LinOp) -> LinOp:
    """A o B (apply B first)"""
    A.domain.require_same(B.codomain, "composition A o B")
    return LinOp(B.domain, A.codomain, (A.kernel * A.domain.weights) @ B.kernel)


def op_adjoint(A: LinOp) -> LinOp:
    return LinOp(A.codomain, A.domain, A.kernel.T)


def op_add(A: LinOp, B: LinOp) -> LinOp:
    A.domain.require_same(B.domain, "operator domains")
    A.codomain.require_same(B.codomain, "operator codomains")
    return LinOp(A.domain, A.codomain, A.kernel + B.kernel)


def op_scale(A: LinOp, scalar: float) -> LinOp:
    return LinOp(A.domain, A.codomain, A.kernel * float(scalar))


def identity(grid: Grid) -> LinOp:
    return LinOp(grid, grid, np.diag(1.0 / grid.weights))


def zero(domain: Grid, codomain: Grid) -> LinOp:
    return LinOp(domain, codomain, np.zeros((codomain.n, domain.n)))


def _symmetrized(A: LinOp) -> np.ndarray:
    # W_out^{1/2} K W_in^{1/2}: the operator in an orthonormal coordinate system
    return A.codomain.sqrt_weights[:, np.newaxis] * A.kernel * A.domain.sqrt_weights[np.newaxis, :]


def hs_norm(A: LinOp) -> float:
    """Hilbert-Schmidt norm sqrt(sum_j ||A e_j||^2)"""
    return float(np.linalg.norm(_symmetrized(A), "fro"))


def op_norm(A: LinOp) -> float:
    return float(np.linalg.norm(_symmetrized(A), 2))


def trace(A: LinOp) -> float:
    if not A.is_square:
        raise GridMismatchError("Trace needs an operator with equal domain and codomain grids")
    return float(np.dot(A.domain.weights, np.diag(A.kernel)))


def eig_self_adjoint(A: LinOp, tol: float = SELF_ADJOINT_TOL) -> EigenSystem:
    """
    Eigendecomposition of a self-adjoint operator.

    Solves the symmetric problem for S = W^{1/2} K W^{1/2} and maps the
    eigenvectors back with W^{-1/2}, so the eigenfunctions are orthonormal
    under the grid inner product. Each eigenfunction has its
    largest-magnitude coordinate positive.
    """
    if not A.is_square:
        raise GridMismatchError("Eigendecomposition needs equal domain and codomain grids")
    scale = max(hs_norm(A), np.finfo(float).tiny)
    asymmetry = hs_norm(op_add(A, op_scale(op_adjoint(A), -1.0)))
    if asymmetry > tol * scale:
        raise NumericalError(
            f"Operator is not self-adjoint: ||A - A*||_HS = {asymmetry:.3e} (relative {asymmetry / scale:.3e})"
        )

    sw = A.domain.sqrt_weights
    S = _symmetrized(A)
    eigenvalues, U = linalg.eigh((S + S.T) / 2)
    eigenvalues, U = eigenvalues[::-1], U[:, ::-1]
    V = U / sw[:, np.newaxis]
    V, _ = svd_flip(V, V.T.copy())
    return EigenSystem(A.domain, eigenvalues, V.T)


def fourier_basis(grid: Grid, J: int, include_constant: bool = False) -> List[Fn]:
    """
    First J orthonormal Fourier functions on [a1, a2].

    Order: [constant,] sin(2 pi u), cos(2 pi u), sin(4 pi u), cos(4 pi u), ...
    with u = (s - a1) / (a2 - a1).
    """
    if J < 1:
        raise DataError(f"Need J >= 1 Fourier functions, got {J}")
    if J > grid.n / 4:
        raise DataError(f"J={J} Fourier functions exceed the grid resolution (n={grid.n}, need J <= n/4)")
    L = grid.length
    u = (np.array(grid.nodes) - grid.a1) / L
    fns: List[Fn] = []
    if include_constant:
        fns.append(grid.constant(1.0 / np.sqrt(L)))
    k = 1
    while len(fns) < J:
        fns.append(Fn(grid, np.sqrt(2.0 / L) * np.sin(2 * np.pi * k * u)))
        if len(fns) < J:
            fns.append(Fn(grid, np.sqrt(2.0 / L) * np.cos(2 * np.pi * k * u)))
        k += 1
    return fns


def basis_matrix(fns: Sequence[Fn]) -> np.ndarray:
    """Stack functions as rows of a (len(fns) x n) array"""
    return np.vstack([f.values for f in fns])


def synthesize(grid: Grid, coefficients: np.ndarray, fns: Sequence[Fn]) -> Union[Fn, FnSeries]:
    """sum_j c_j b_j for a coefficient vector, or row-wise for a coefficient matrix"""
    coefficients = np.asarray(coefficients, dtype=float)
    values = coefficients @ basis_matrix(fns)
    if values.ndim == 1:
        return Fn(grid, values)
    return FnSeries(grid, values)
