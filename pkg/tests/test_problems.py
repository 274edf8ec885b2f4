import math

import numpy as np
import pytest
from pydantic import ValidationError

from scinc.models.problems import DualConicProblem, PrimalProblem, SaddleProblem
from scinc.models.schemas import Family, ProblemSpec
from scinc.oracles.barriers import barrier_orthant
from scinc.oracles.prox import WeightedL1
from scinc.services.problem_service import (
    GaussianStream, cluster_stacked_operator, gen_cluster_recovery, gen_linear_orthant, gen_max_eigenvalue,
    gen_sparse_lowrank, generate, lifted_point, planted_feasibility, validate_problem,
)
from scinc.utils.errors import UsageError


def test_gaussian_stream_is_reproducible():
    a = GaussianStream(42).normal((3, 5))
    b = GaussianStream(42).normal((3, 5))
    assert a.shape == (3, 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, GaussianStream(43).normal((3, 5)))
    with pytest.raises(UsageError):
        GaussianStream(-1)
    with pytest.raises(UsageError):
        GaussianStream(2 ** 64)


@pytest.mark.parametrize("spec", [
    ProblemSpec(family=Family.MAX_EIGENVALUE, dims={"n": 4, "p": 6}, seed=7),
    ProblemSpec(family=Family.SPARSE_LOWRANK, dims={"n": 6}, seed=7),
    ProblemSpec(family=Family.CLUSTER_RECOVERY, dims={"k": 3, "clusters": 2}, seed=7),
])
def test_generation_is_deterministic(spec):
    first, second = generate(spec), generate(spec)
    for name, value in first.data.items():
        if isinstance(value, np.ndarray):
            assert np.array_equal(value, second.data[name])
    assert validate_problem(first)


def test_max_eigenvalue_construction():
    P = gen_max_eigenvalue(5, 10, seed=7)
    assert isinstance(P, SaddleProblem)
    C = P.data["C"]
    assert np.allclose(C, C.T)
    assert P.L.shape == (10, 25)
    assert P.barrier().nu == 2 * 10 + 5
    X0 = P.start_point()[:25].reshape(5, 5, order="F")
    assert np.trace(X0) == pytest.approx(1.0)
    assert validate_problem(P)


def test_max_eigenvalue_top_eigenvector_identity():
    P = gen_max_eigenvalue(4, 3, seed=2)
    y = np.array([0.3, -0.5, 0.1])
    M = P.data["C"] + sum(yi * P.L[i].reshape(4, 4, order="F") for i, yi in enumerate(y))
    evals, evecs = np.linalg.eigh(M)
    v = evecs[:, -1]
    x = np.outer(v, v).reshape(-1, order="F")
    # ⟨y, Lx⟩ − g(x) en el vértice del símplex espectral alcanza λ_max
    assert float(y @ (P.L @ x)) - P.g.value(x) == pytest.approx(evals[-1], abs=1e-8)


def test_sparse_lowrank_construction():
    n = 12
    P = gen_sparse_lowrank(n, seed=5)
    assert isinstance(P, PrimalProblem)
    assert np.linalg.matrix_rank(P.data["M0"]) == math.floor(0.25 * n)
    nonzero_rows = np.count_nonzero(np.abs(P.data["M0"]).sum(axis=1))
    assert nonzero_rows <= math.ceil(n / 2)
    assert P.data["lower"] <= 0.0 <= P.data["upper"]
    assert P.data["lower"] <= P.data["M"].min() and P.data["M"].max() <= P.data["upper"]
    assert math.isfinite(P.objective(P.start_point()))
    assert P.f.in_domain(P.start_point())
    with pytest.raises(UsageError):
        gen_sparse_lowrank(1)
    with pytest.raises(UsageError):
        gen_sparse_lowrank(4, rho=1.5)


def test_cluster_recovery_planted_solution_is_feasible():
    P = gen_cluster_recovery([5, 5], seed=9)
    assert isinstance(P, DualConicProblem)
    checks = planted_feasibility(P)
    assert checks["trace"] == pytest.approx(0.0)
    assert checks["sum"] == pytest.approx(0.0)
    assert checks["diag_max"] == pytest.approx(0.0)
    assert 0.0 <= checks["entries_min"] and checks["entries_max"] <= 1.0
    assert checks["lifted_residual"] == pytest.approx(0.0, abs=1e-12)
    assert P.data["s1"] == 10.0 and P.data["s2"] == 50.0


def test_cluster_stacked_operator_codomain():
    n = 4
    assert cluster_stacked_operator(n).shape == (n * (n + 1) + 2, n * n)
    X = np.eye(n)
    lifted = lifted_point(X)
    assert lifted.shape == (n * n + n * (n - 1) // 2,)
    assert np.allclose(lifted[n * n:], 0.0)


def test_cluster_recovery_rejects_bad_input():
    with pytest.raises(UsageError):
        gen_cluster_recovery([5])
    with pytest.raises(UsageError):
        gen_cluster_recovery([1, 4])
    with pytest.raises(UsageError):
        gen_cluster_recovery([3, 3], edge_prob_in=1.5)


def test_linear_orthant_instance():
    P = gen_linear_orthant(3)
    assert P.objective(np.ones(3)) == 3.0
    assert np.array_equal(P.start_point(), np.ones(3))


def test_generate_reports_missing_dimension():
    with pytest.raises(UsageError):
        generate(ProblemSpec(family=Family.MAX_EIGENVALUE, dims={"n": 3}))
    with pytest.raises(UsageError):
        generate(ProblemSpec(family=Family.SPARSE_LOWRANK, dims={"n": 4}, params={"bogus": 1}))


def test_problem_spec_validation():
    with pytest.raises(ValidationError):
        ProblemSpec(family="not_a_family")
    with pytest.raises(ValidationError):
        ProblemSpec(family=Family.LINEAR_ORTHANT, dims={"n": 0})
    with pytest.raises(ValidationError):
        ProblemSpec(family=Family.LINEAR_ORTHANT, dims={"n": 2}, seed=-3)


def test_problem_models_check_dimensions(rng):
    with pytest.raises(ValidationError):
        PrimalProblem(g=WeightedL1(1.0, dim=3), f=barrier_orthant(4))
    with pytest.raises(ValidationError):
        DualConicProblem(c_obj=np.zeros(3), b=np.zeros(2), L=np.ones((2, 3)), g=WeightedL1(1.0, dim=2),
                         f=barrier_orthant(3))
