"""
Tests for the dense Gaussian and fast Hadamard design operators
"""
import math

import numpy as np
import pytest
from scipy.linalg import hadamard

from config import settings
from exceptions import DimensionMismatchError, InvalidParameterError, OperatorSizeError
from models.simulation import OperatorKind
from services.design_operator import (
    DenseGaussianOperator,
    FastHadamardOperator,
    fwht,
    new_operator,
    transform_size,
)


def _explicit_hadamard_matrix(op: FastHadamardOperator) -> np.ndarray:
    """Rows ``op.rows`` of H_N, first ML columns, signs applied, scaled by 1/sqrt(n)."""
    H = hadamard(op.N).astype(float)
    return H[op.rows][:, :op.columns] * op.signs[None, :] / math.sqrt(op.n)


class TestFwht:

    def test_matches_sylvester_matrix(self):
        rng = np.random.default_rng(0)
        for N in (1, 2, 8, 64):
            x = rng.standard_normal(N)
            assert np.allclose(fwht(x), hadamard(N) @ x)

    def test_batched(self):
        x = np.random.default_rng(1).standard_normal((3, 16))
        assert np.allclose(fwht(x), x @ hadamard(16).T)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(InvalidParameterError):
            fwht(np.ones(6))

    def test_transform_size(self):
        assert transform_size(16, 32) == 32
        assert transform_size(64, 128) == 128
        assert transform_size(16, 16) == 32


class TestFastHadamard:

    @pytest.mark.parametrize("n, L, M", [(16, 2, 16), (64, 8, 16)])
    def test_matches_dense_materialization(self, n, L, M):
        op = new_operator(OperatorKind.FAST_HADAMARD, n, L, M, seed=5)
        A = _explicit_hadamard_matrix(op)
        assert np.allclose(op.to_dense(), A, rtol=1e-10, atol=1e-12)
        rng = np.random.default_rng(2)
        for _ in range(10):
            z = rng.standard_normal(n)
            assert np.allclose(op.adjoint(z), A.T @ z, rtol=1e-10, atol=1e-12)

    def test_unit_column_norms(self):
        op = new_operator("hadamard", 48, 4, 32, seed=9)
        assert np.allclose(np.linalg.norm(op.to_dense(), axis=0), 1.0)

    def test_columns_keep_hadamard_order_up_to_sign(self):
        op = FastHadamardOperator(64, 8, 16, seed=3)
        H = hadamard(op.N).astype(float)[op.rows][:, :op.columns] / math.sqrt(op.n)
        dense = op.to_dense()
        assert set(np.unique(op.signs).tolist()) == {-1.0, 1.0}
        assert np.allclose(dense / op.signs[None, :], H)

    def test_rows_skip_the_constant_row(self):
        op = FastHadamardOperator(100, 8, 64, seed=1)
        assert 0 not in op.rows.tolist()
        assert len(set(op.rows.tolist())) == 100


class TestOperatorContract:

    @pytest.mark.parametrize("kind", list(OperatorKind))
    def test_transpose_identity(self, kind):
        op = new_operator(kind, 40, 4, 16, seed=3)
        rng = np.random.default_rng(4)
        for _ in range(100):
            u = rng.standard_normal(op.columns)
            v = rng.standard_normal(op.n)
            assert op.forward(u).dot(v) == pytest.approx(u.dot(op.adjoint(v)), rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("kind", list(OperatorKind))
    def test_zero_and_linearity(self, kind):
        op = new_operator(kind, 40, 4, 16, seed=3)
        assert np.all(op.forward(np.zeros(op.columns)) == 0)
        assert np.all(op.adjoint(np.zeros(op.n)) == 0)
        rng = np.random.default_rng(8)
        u, v = rng.standard_normal((2, op.columns))
        assert np.allclose(op.forward(u + v), op.forward(u) + op.forward(v), atol=1e-10)

    @pytest.mark.parametrize("kind", list(OperatorKind))
    def test_same_seed_same_operator(self, kind):
        x = np.random.default_rng(6).standard_normal(64)
        first = new_operator(kind, 32, 4, 16, seed=21).forward(x)
        second = new_operator(kind, 32, 4, 16, seed=21).forward(x)
        other = new_operator(kind, 32, 4, 16, seed=22).forward(x)
        assert np.array_equal(first, second)
        assert not np.array_equal(first, other)

    def test_dimension_checks(self):
        op = new_operator(OperatorKind.FAST_HADAMARD, 16, 2, 8, seed=0)
        with pytest.raises(DimensionMismatchError):
            op.forward(np.zeros(15))
        with pytest.raises(DimensionMismatchError):
            op.adjoint(np.zeros(17))

    def test_unknown_kind(self):
        with pytest.raises(InvalidParameterError):
            new_operator("circulant", 16, 2, 8, seed=0)

    def test_negative_seed(self):
        with pytest.raises(InvalidParameterError):
            new_operator(OperatorKind.DENSE_GAUSSIAN, 16, 2, 8, seed=-1)


class TestDenseGaussian:

    def test_column_norms_near_one(self):
        op = DenseGaussianOperator(4096, 4, 16, seed=12)
        norms = np.linalg.norm(op.matrix, axis=0) ** 2
        assert norms.mean() == pytest.approx(1.0, rel=0.02)

    def test_size_limit(self, monkeypatch):
        monkeypatch.setattr(settings, "dense_operator_max_entries", 100)
        with pytest.raises(OperatorSizeError):
            new_operator(OperatorKind.DENSE_GAUSSIAN, 16, 2, 8, seed=0)

    def test_to_dense_is_a_copy(self):
        op = DenseGaussianOperator(8, 2, 4, seed=0)
        dense = op.to_dense()
        dense[0, 0] = 99.0
        assert op.matrix[0, 0] != 99.0
