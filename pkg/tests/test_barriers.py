import math

import numpy as np
import pytest

from scinc.oracles.barriers import (
    ConjugateBarrier, SumBarrier, analytical_center_residual, barrier_box, barrier_from_descriptor,
    barrier_logdet, barrier_lorentz, barrier_orthant, dual_feasible_barrier, minimize_barrier,
)
from scinc.utils.errors import CapabilityError, ConvergenceError, DomainError
from scinc.utils.linalg import dual_local_norm


def _spd_vec(rng, n):
    A = rng.standard_normal((n, n))
    return (A @ A.T + n * np.eye(n)).reshape(-1, order="F")


@pytest.fixture
def points(rng):
    return {
        "orthant": (barrier_orthant(4), rng.uniform(0.5, 2.0, 4)),
        "box": (barrier_box(3), rng.uniform(-0.7, 0.7, 3)),
        "lorentz": (barrier_lorentz(3), np.array([0.3, -0.2, 0.1, 1.5])),
        "logdet": (barrier_logdet(3), _spd_vec(rng, 3)),
    }


@pytest.mark.parametrize("name", ["orthant", "box", "lorentz", "logdet"])
def test_gradient_matches_finite_differences(points, name, fd_grad):
    F, z = points[name]
    assert np.allclose(F.grad(z), fd_grad(F.value, z), rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("name", ["orthant", "box", "lorentz"])
def test_hessian_matches_finite_differences(points, name, fd_jacobian):
    F, z = points[name]
    assert np.allclose(F.hessian(z), fd_jacobian(F.grad, z), rtol=1e-5, atol=1e-6)


def test_logdet_hessian_on_symmetric_directions(rng):
    F = barrier_logdet(3)
    z = _spd_vec(rng, 3)
    U = rng.standard_normal((3, 3))
    u = (U + U.T).reshape(-1, order="F")
    h = 1e-6
    fd = (F.grad(z + h * u) - F.grad(z - h * u)) / (2 * h)
    assert np.allclose(F.hessian(z) @ u, fd, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("name,nu", [("orthant", 4), ("box", 6), ("lorentz", 2), ("logdet", 3)])
def test_barrier_parameters(points, name, nu):
    F, _ = points[name]
    assert F.nu == nu


@pytest.mark.parametrize("name", ["orthant", "lorentz", "logdet"])
def test_log_homogeneous_gradient_norm_is_sqrt_nu(points, name):
    F, z = points[name]
    assert F.kappa == 1.0
    assert dual_local_norm(F.metric(z), F.grad(z)) == pytest.approx(math.sqrt(F.nu), rel=1e-9)
    assert F.grad(z) @ z == pytest.approx(-F.nu, rel=1e-9)


def test_non_homogeneous_kappa():
    F = barrier_box(2)
    assert F.kappa == pytest.approx(4.0 + 2.0 * 2.0)


def test_out_of_domain_raises(points):
    F, _ = points["orthant"]
    with pytest.raises(DomainError):
        F.value(np.array([1.0, -1.0, 1.0, 1.0]))
    B, _ = points["box"]
    assert not B.in_domain(np.array([0.0, 1.0, 0.0]))
    D, _ = points["logdet"]
    assert not D.in_domain(-np.eye(3).reshape(-1))


@pytest.mark.parametrize("name", ["orthant", "lorentz", "logdet"])
def test_conjugate_gradient_inverts_gradient(points, name):
    F, z = points[name]
    assert np.allclose(F.conj_grad(F.grad(z)), z, rtol=1e-8)


def test_conjugate_closed_forms():
    t = 0.25
    assert np.allclose(barrier_orthant(3).conj_grad(-t * np.ones(3)), np.ones(3) / t)
    eye = np.eye(3).reshape(-1, order="F")
    assert np.allclose(barrier_logdet(3).conj_grad(-eye), eye)
    with pytest.raises(CapabilityError):
        ConjugateBarrier(barrier_box(2))


def test_sum_barrier_blocks(points):
    parts = [points["orthant"][0], points["box"][0]]
    F = SumBarrier(parts)
    z = np.concatenate([points["orthant"][1], points["box"][1]])
    assert F.dim == 7
    assert F.nu == 10
    assert not F.log_homogeneous
    assert F.value(z) == pytest.approx(sum(b.value(zi) for b, zi in zip(parts, F.split(z))))
    assert F.metric(z).is_diagonal


def test_dual_feasible_barrier_derivatives(rng, fd_grad, fd_jacobian):
    L = rng.standard_normal((2, 4))
    y0 = rng.standard_normal(2)
    c = L.T @ y0 - 1.0
    phi = dual_feasible_barrier(barrier_orthant(4), L, c)
    assert phi.in_domain(y0)
    assert phi.kappa == pytest.approx(4.0 + 2.0 * 2.0)
    assert np.allclose(phi.grad(y0), fd_grad(phi.value, y0), rtol=1e-5, atol=1e-7)
    assert np.allclose(phi.hessian(y0), fd_jacobian(phi.grad, y0), rtol=1e-5, atol=1e-6)


def test_minimize_barrier_reaches_analytical_center():
    F = barrier_box(3)
    z = minimize_barrier(F, np.array([0.5, -0.3, 0.9]))
    assert np.allclose(z, 0.0, atol=1e-8)
    assert analytical_center_residual(F, z) < 1e-8


def test_minimize_barrier_raises_when_budget_runs_out():
    with pytest.raises(ConvergenceError) as info:
        minimize_barrier(barrier_box(3), np.array([0.5, -0.3, 0.9]), max_iter=1)
    assert info.value.exit_code == 3
    assert info.value.best_delta > 1e-10


def test_descriptor_rebuilds_same_barrier():
    F = SumBarrier([barrier_logdet(2), barrier_orthant(3), barrier_box(1)])
    G = barrier_from_descriptor(F.to_descriptor())
    z = np.concatenate([np.eye(2).reshape(-1), np.ones(3), [0.2]])
    assert G.dim == F.dim and G.nu == F.nu
    assert G.value(z) == pytest.approx(F.value(z))
