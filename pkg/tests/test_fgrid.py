"""Tests for grids, functions, operators and the self-adjoint eigensolver"""

import numpy as np
import pytest
from scipy import linalg

from src.fcreg.errors import DataError, GridMismatchError, NumericalError
from src.fcreg.fgrid import (
    Fn,
    FnSeries,
    Grid,
    LinOp,
    eig_self_adjoint,
    fourier_basis,
    hs_norm,
    identity,
    inner,
    op_adjoint,
    op_apply,
    op_compose,
    op_norm,
    series_tensor,
    synthesize,
    tensor,
    trace,
    zero,
)


def random_fn(rng, grid):
    return Fn(grid, rng.standard_normal(grid.n))


def random_op(rng, domain, codomain=None):
    codomain = domain if codomain is None else codomain
    return LinOp(domain, codomain, rng.standard_normal((codomain.n, domain.n)))


def psd_op(rng, grid, rank):
    coefficients = rng.standard_normal((rank, grid.n))
    return LinOp(grid, grid, coefficients.T @ coefficients)


class TestGrid:
    def test_nodes_and_weights(self):
        """Endpoints are exact and the weights sum to the interval length"""
        grid = Grid(-0.5, 2.5, 31)
        assert grid.nodes[0] == -0.5 and grid.nodes[-1] == 2.5
        assert np.all(np.diff(grid.nodes) > 0)
        assert abs(grid.weights.sum() - 3.0) < 1e-12 * 3.0
        assert grid.weights[0] == pytest.approx(grid.weights[1] / 2)

    def test_invalid_grids(self):
        with pytest.raises(DataError, match="a2 > a1"):
            Grid(1.0, 1.0, 10)
        with pytest.raises(DataError, match="at least 2 nodes"):
            Grid(0.0, 1.0, 1)

    def test_from_nodes_round_trip(self, unit_grid):
        assert Grid.from_nodes(unit_grid.nodes) == unit_grid
        with pytest.raises(DataError, match="uniformly spaced"):
            Grid.from_nodes([0.0, 0.1, 0.5, 1.0])

    def test_equality_and_hash(self):
        assert Grid(0, 1, 11) == Grid(0.0, 1.0, 11)
        assert hash(Grid(0, 1, 11)) == hash(Grid(0.0, 1.0, 11))
        assert Grid(0, 1, 11) != Grid(0, 1, 12)

    def test_values_are_read_only(self, unit_grid):
        with pytest.raises(ValueError):
            unit_grid.weights[0] = 1.0

    def test_interval_weights_on_nodes_is_trapezoid(self, unit_grid, rng):
        f = random_fn(rng, unit_grid)
        c = unit_grid.interval_weights(unit_grid.nodes[10], unit_grid.nodes[40])
        h = unit_grid.spacing
        expected = h * (f.values[10:41].sum() - (f.values[10] + f.values[40]) / 2)
        assert np.dot(c, f.values) == pytest.approx(expected, abs=1e-12)

    def test_interval_weights_integrate_linear_exactly(self, unit_grid):
        """Off-node endpoints: the interpolant of a linear function is the function itself"""
        f = unit_grid.evaluate(lambda s: 3 * s - 1)
        lo, hi = 0.123, 0.8765
        c = unit_grid.interval_weights(lo, hi)
        analytic = 1.5 * (hi ** 2 - lo ** 2) - (hi - lo)
        assert np.dot(c, f.values) == pytest.approx(analytic, abs=1e-12)

    def test_interval_weights_full_domain(self, unit_grid):
        np.testing.assert_allclose(unit_grid.interval_weights(0.0, 1.0), unit_grid.weights, atol=1e-13)

    def test_interval_weights_rejects_bad_interval(self, unit_grid):
        with pytest.raises(DataError, match="sub-interval"):
            unit_grid.interval_weights(0.5, 0.5)
        with pytest.raises(DataError, match="sub-interval"):
            unit_grid.interval_weights(-0.1, 0.5)


class TestInner:
    def test_constant_measure(self):
        grid = Grid(0.0, 1.0, 101)
        assert inner(grid.constant(), grid.constant()) == pytest.approx(1.0, abs=1e-12)

    def test_sin_cos_orthogonal(self):
        grid = Grid(0.0, 1.0, 401)
        f = grid.evaluate(lambda u: np.sin(2 * np.pi * u))
        g = grid.evaluate(lambda u: np.cos(2 * np.pi * u))
        assert abs(inner(f, g)) < 1e-6

    def test_hand_summed(self, rng):
        grid = Grid(0.0, 2.0, 5)
        f, g = random_fn(rng, grid), random_fn(rng, grid)
        w = [0.25, 0.5, 0.5, 0.5, 0.25]
        expected = sum(w[j] * f.values[j] * g.values[j] for j in range(5))
        assert inner(f, g) == pytest.approx(expected, abs=1e-14)
        assert inner(f, g) == pytest.approx(inner(g, f), abs=1e-14)

    def test_linear_exactness(self):
        grid = Grid(-1.0, 3.0, 17)
        f = grid.evaluate(lambda s: 2 * s + 1)
        # integral of (2s + 1) over [-1, 3] = [s^2 + s] = 12 - 0
        assert inner(f, grid.constant()) == pytest.approx(12.0, abs=1e-10)

    def test_grid_mismatch(self, unit_grid, small_grid):
        with pytest.raises(GridMismatchError):
            inner(unit_grid.constant(), small_grid.constant())


class TestOperators:
    def test_tensor_action(self, rng):
        grid = Grid(0.0, 1.0, 6)
        f, g, h = random_fn(rng, grid), random_fn(rng, grid), random_fn(rng, grid)
        np.testing.assert_allclose(op_apply(tensor(f, g), h).values, inner(f, h) * g.values, atol=1e-12)

    def test_tensor_normalized_and_orthogonal(self, unit_grid):
        f = unit_grid.evaluate(lambda u: np.sqrt(2) * np.sin(2 * np.pi * u))
        g = unit_grid.evaluate(lambda u: u ** 2)
        h = unit_grid.evaluate(lambda u: np.sqrt(2) * np.cos(2 * np.pi * u))
        np.testing.assert_allclose(tensor(f, g)(f).values, g.values, atol=1e-10)
        np.testing.assert_allclose(tensor(f, g)(h).values, 0.0, atol=1e-10)

    def test_identity(self, rng, small_grid):
        f = random_fn(rng, small_grid)
        np.testing.assert_allclose(identity(small_grid)(f).values, f.values, atol=1e-14)

    def test_adjoint_contract(self, rng):
        domain, codomain = Grid(0.0, 1.0, 5), Grid(-2.0, 2.0, 7)
        for _ in range(50):
            A = random_op(rng, domain, codomain)
            f, g = random_fn(rng, domain), random_fn(rng, codomain)
            assert inner(A(f), g) == pytest.approx(inner(f, op_adjoint(A)(g)), abs=1e-10)

    def test_adjoint_involution_and_tensor(self, rng, small_grid):
        A = random_op(rng, small_grid)
        assert np.array_equal(op_adjoint(op_adjoint(A)).kernel, A.kernel)
        f, g = random_fn(rng, small_grid), random_fn(rng, small_grid)
        np.testing.assert_allclose(op_adjoint(tensor(f, g)).kernel, tensor(g, f).kernel, atol=1e-14)

    def test_composition(self, rng):
        grid = Grid(0.0, 1.0, 5)
        A, B, C = random_op(rng, grid), random_op(rng, grid), random_op(rng, grid)
        f = random_fn(rng, grid)
        np.testing.assert_allclose(op_compose(A, B)(f).values, A(B(f)).values, atol=1e-10)
        np.testing.assert_allclose(((A @ B) @ C).kernel, (A @ (B @ C)).kernel, atol=1e-10)

    def test_add_scale(self, rng, small_grid):
        A, B = random_op(rng, small_grid), random_op(rng, small_grid)
        f = random_fn(rng, small_grid)
        np.testing.assert_allclose((A + 2.0 * B)(f).values, A(f).values + 2.0 * B(f).values, atol=1e-12)
        np.testing.assert_allclose((A - A).kernel, 0.0)

    def test_composition_mismatch(self, rng, unit_grid, small_grid):
        with pytest.raises(GridMismatchError):
            random_op(rng, unit_grid) @ random_op(rng, small_grid)

    def test_series_tensor_loop(self, rng):
        grid = Grid(0.0, 1.0, 4)
        a = FnSeries(grid, rng.standard_normal((6, 4)))
        b = FnSeries(grid, rng.standard_normal((6, 4)))
        expected = np.zeros((4, 4))
        for t in range(2, 6):
            expected += tensor(a[t - 2], b[t]).kernel
        np.testing.assert_allclose(series_tensor(a, b, 2).kernel, expected / 6, atol=1e-14)


class TestNorms:
    def test_rank_one_hs(self, rng, unit_grid):
        f, g = random_fn(rng, unit_grid), random_fn(rng, unit_grid)
        assert hs_norm(tensor(f, g)) == pytest.approx(f.norm() * g.norm(), rel=1e-10)
        assert op_norm(tensor(f, g)) == pytest.approx(f.norm() * g.norm(), rel=1e-10)

    def test_zero(self, unit_grid):
        assert hs_norm(zero(unit_grid, unit_grid)) == 0.0

    def test_hs_basis_independent(self, rng):
        """sum_j ||A e_j||^2 over two different orthonormal bases"""
        grid = Grid(0.0, 1.0, 41)
        basis = fourier_basis(grid, 10)
        coefficients = rng.standard_normal((10, 10))
        A = LinOp(grid, grid, (np.vstack([v.values for v in basis]).T @ coefficients)
                  @ np.vstack([v.values for v in basis]))
        eig = eig_self_adjoint(A @ op_adjoint(A))
        first = sum(A(v).norm() ** 2 for v in basis)
        second = sum(A(v).norm() ** 2 for v in eig.eigenfns)
        assert np.sqrt(first) == pytest.approx(hs_norm(A), rel=1e-8)
        assert np.sqrt(second) == pytest.approx(hs_norm(A), rel=1e-8)

    def test_trace(self, unit_grid):
        v = fourier_basis(unit_grid, 3)
        P = tensor(v[0], v[0]) + tensor(v[1], v[1]) + tensor(v[2], v[2])
        assert trace(P) == pytest.approx(3.0, abs=1e-10)


class TestEigen:
    def test_rank_one(self, unit_grid):
        v = fourier_basis(unit_grid, 1)[0]
        eig = eig_self_adjoint(tensor(v, v))
        assert eig.eigenvalues[0] == pytest.approx(1.0, abs=1e-10)
        assert np.all(np.abs(eig.eigenvalues[1:]) < 1e-10)
        assert eig.rank == 1

    def test_two_components(self, unit_grid):
        v1, v2 = fourier_basis(unit_grid, 2)
        eig = eig_self_adjoint(tensor(v1, v1) * 2.0 + tensor(v2, v2))
        np.testing.assert_allclose(eig.eigenvalues[:2], [2.0, 1.0], atol=1e-10)
        assert abs(inner(eig.eigenfn(1), v1)) == pytest.approx(1.0, abs=1e-8)
        assert abs(inner(eig.eigenfn(2), v2)) == pytest.approx(1.0, abs=1e-8)

    def test_matches_symmetrized_dense_solver(self, rng):
        grid = Grid(0.0, 1.0, 8)
        A = psd_op(rng, grid, 8)
        eig = eig_self_adjoint(A)
        sw = np.sqrt(grid.weights)
        expected = linalg.eigvalsh(sw[:, None] * A.kernel * sw[None, :])[::-1]
        np.testing.assert_allclose(eig.eigenvalues, expected, rtol=1e-10, atol=1e-12)

    def test_orthonormal_descending_and_signed(self, rng):
        grid = Grid(0.0, 1.0, 21)
        eig = eig_self_adjoint(psd_op(rng, grid, 6))
        gram = np.array([[inner(a, b) for b in eig.eigenfns] for a in eig.eigenfns])
        np.testing.assert_allclose(gram, np.eye(grid.n), atol=1e-8)
        assert np.all(np.diff(eig.eigenvalues) <= 1e-12)
        for v in eig.vectors:
            assert v[np.argmax(np.abs(v))] > 0

    def test_reconstruction(self, rng):
        grid = Grid(0.0, 1.0, 30)
        for rank in (1, 4, 30):
            A = psd_op(rng, grid, rank)
            eig = eig_self_adjoint(A)
            assert eig.rank == rank
            residual = op_norm(eig.reconstruct(eig.rank) - A)
            assert residual <= 1e-8 * max(1.0, op_norm(A))

    def test_non_self_adjoint(self, rng, small_grid):
        with pytest.raises(NumericalError, match="not self-adjoint"):
            eig_self_adjoint(random_op(rng, small_grid))

    def test_projection(self, rng):
        grid = Grid(0.0, 1.0, 15)
        eig = eig_self_adjoint(psd_op(rng, grid, 5))
        P = eig.projection(1, 3)
        np.testing.assert_allclose((P @ P).kernel, P.kernel, atol=1e-8 * np.abs(P.kernel).max())
        assert trace(P) == pytest.approx(3.0, abs=1e-10)
        assert hs_norm(eig.projection(3, 2)) == 0.0

    def test_parseval(self, rng, unit_grid):
        basis = fourier_basis(unit_grid, 8)
        f = random_fn(rng, unit_grid)
        assert sum(inner(f, v) ** 2 for v in basis) <= f.norm() ** 2
        g = synthesize(unit_grid, rng.standard_normal(8), basis)
        assert sum(inner(g, v) ** 2 for v in basis) == pytest.approx(g.norm() ** 2, rel=1e-10)


class TestFourier:
    def test_first_function(self):
        grid = Grid(0.0, 1.0, 41)
        (b,) = fourier_basis(grid, 1)
        np.testing.assert_allclose(b.values, np.sqrt(2) * np.sin(2 * np.pi * np.array(grid.nodes)), atol=1e-14)

    def test_constant(self):
        grid = Grid(2.0, 6.0, 41)
        (b,) = fourier_basis(grid, 1, include_constant=True)
        np.testing.assert_allclose(b.values, 0.5)

    def test_gram(self):
        grid = Grid(0.0, 1.0, 401)
        basis = fourier_basis(grid, 6)
        gram = np.array([[inner(a, b) for b in basis] for a in basis])
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-6)

    def test_order(self):
        grid = Grid(0.0, 1.0, 101)
        basis = fourier_basis(grid, 3)
        np.testing.assert_allclose(basis[1].values, np.sqrt(2) * np.cos(2 * np.pi * np.array(grid.nodes)), atol=1e-14)
        np.testing.assert_allclose(basis[2].values, np.sqrt(2) * np.sin(4 * np.pi * np.array(grid.nodes)), atol=1e-14)

    def test_too_many(self):
        with pytest.raises(DataError, match="grid resolution"):
            fourier_basis(Grid(0.0, 1.0, 20), 6)


class TestSeries:
    def test_mean_diff_demean(self, rng, small_grid):
        s = FnSeries(small_grid, rng.standard_normal((5, small_grid.n)))
        np.testing.assert_allclose(s.demeaned().mean().values, 0.0, atol=1e-14)
        np.testing.assert_allclose(s.diff().values, np.diff(s.values, axis=0))
        assert s.diff().T == 4

    def test_map(self, rng, small_grid):
        s = FnSeries(small_grid, rng.standard_normal((5, small_grid.n)))
        A = random_op(rng, small_grid)
        mapped = s.map(A)
        for t in range(5):
            np.testing.assert_allclose(mapped[t].values, A(s[t]).values, atol=1e-12)

    def test_wrong_width(self, small_grid):
        with pytest.raises(DataError, match="grid has 7 nodes"):
            FnSeries(small_grid, np.zeros((3, 6)))
