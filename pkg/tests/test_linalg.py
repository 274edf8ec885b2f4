import math

import numpy as np
import pytest

from scinc.config import settings
from scinc.oracles.barriers import barrier_logdet
from scinc.utils.errors import DomainError, NumericError, UsageError
from scinc.utils.linalg import (
    Metric, as_metric, as_vec, dual_local_norm, inverse_metric, local_norm, mat_order,
    power_max_eigenvalue, solve_metric, solve_metric_columns, solve_tolerance, sym, sym_mat, sym_vec,
)


def test_as_vec_rejects_non_finite_and_wrong_size():
    with pytest.raises(NumericError):
        as_vec([1.0, math.nan])
    with pytest.raises(UsageError):
        as_vec([1.0, 2.0], 3)
    assert as_vec([[1, 2], [3, 4]]).shape == (4,)


def test_local_and_dual_norms_are_dual_pair(rng, spd):
    H = spd(6)
    m = Metric.from_hessian(H)
    u = rng.standard_normal(6)
    assert local_norm(m, u) == pytest.approx(math.sqrt(u @ H @ u), rel=1e-12)
    assert dual_local_norm(m, H @ u) == pytest.approx(local_norm(m, u), rel=1e-10)
    v = rng.standard_normal(6)
    assert dual_local_norm(m, v) == pytest.approx(math.sqrt(v @ np.linalg.solve(H, v)), rel=1e-10)


def test_diagonal_metric_matches_dense(rng):
    d = rng.uniform(0.5, 3.0, 5)
    diag = Metric.from_diagonal(d)
    dense = Metric.from_hessian(np.diag(d))
    v = rng.standard_normal(5)
    assert diag.is_diagonal and not dense.is_diagonal
    assert dual_local_norm(diag, v) == pytest.approx(dual_local_norm(dense, v), rel=1e-12)
    assert np.allclose(solve_metric(diag, v), solve_metric(dense, v))


def test_non_positive_hessian_is_domain_error():
    with pytest.raises(DomainError):
        Metric.from_hessian(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(DomainError):
        Metric.from_diagonal([1.0, 0.0])


def test_solve_metric_and_columns(rng, spd):
    H = spd(4, cond=100.0)
    m = Metric.from_hessian(H)
    v = rng.standard_normal(4)
    assert np.allclose(H @ solve_metric(m, v), v, atol=1e-10)
    V = rng.standard_normal((4, 3))
    assert np.allclose(H @ solve_metric_columns(m, V), V, atol=1e-10)


def test_solve_metric_accepts_ill_conditioned_logdet_hessian(rng, spd):
    X = spd(3, cond=1e6)
    m = barrier_logdet(3).metric(X.reshape(-1, order="F"))
    assert m.condition_estimate() > 1e6
    v = rng.standard_normal(9)
    w = solve_metric(m, v)
    assert np.linalg.norm(m.hess_apply(w) - v) <= solve_tolerance(m) * np.linalg.norm(v)


def test_inconsistent_factor_is_numeric_error():
    m = Metric(2.0 * np.eye(3), np.eye(3))
    assert solve_tolerance(m) == settings.solve_rtol
    with pytest.raises(NumericError):
        solve_metric(m, np.ones(3))


def test_scaled_metric_and_inverse(rng, spd):
    m = Metric.from_hessian(spd(5))
    u = rng.standard_normal(5)
    assert local_norm(m.scaled(4.0), u) == pytest.approx(2.0 * local_norm(m, u), rel=1e-12)
    assert local_norm(inverse_metric(m), u) == pytest.approx(dual_local_norm(m, u), rel=1e-9)
    with pytest.raises(UsageError):
        m.scaled(0.0)


def test_block_diagonal_keeps_diagonal_structure():
    m = Metric.block_diagonal([Metric.from_diagonal([1.0, 2.0]), Metric.identity(3)])
    assert m.is_diagonal
    assert m.dim == 5
    assert Metric.from_diagonal([1.0, 100.0]).condition_estimate() == pytest.approx(100.0)


def test_symmetric_vectorization():
    M = np.arange(9.0).reshape(3, 3)
    v = sym_vec(M)
    assert v.shape == (9,)
    assert np.allclose(sym_mat(v), sym(M))
    assert mat_order(16) == 4
    with pytest.raises(UsageError):
        mat_order(10)
    with pytest.raises(UsageError):
        sym_mat(v, 4)


def test_power_iteration_finds_dominant_eigenvalue():
    d = np.array([1.0, 2.0, 10.0])
    assert power_max_eigenvalue(lambda u: d * u, 3) == pytest.approx(10.0, rel=1e-8)


def test_as_metric_accepts_scalars_vectors_and_matrices(spd):
    assert np.allclose(as_metric(2.0, 3).diag, 2.0)
    assert as_metric([1.0, 2.0], 2).is_diagonal
    H = spd(3)
    assert np.allclose(as_metric(H, 3).hessian, H)
    with pytest.raises(UsageError):
        as_metric(np.eye(2), 3)
