import math

import numpy as np
import pytest

from scinc.oracles.prox import (
    AcceleratedProxGradient, AffineIndicator, BoxIndicator, ConjugateFn, LinearFn, LinearShift,
    PiecewiseLinearFn, SeparableSum, TraceAffine, WeightedL1, ZeroFn, inexact_subsolve, prox_from_descriptor,
    prox_psi_from_g,
)
from scinc.utils.errors import CapabilityError, ConvergenceError, DomainError, UsageError
from scinc.utils.linalg import Metric, dual_local_norm


def test_weighted_l1_prox_is_soft_threshold():
    g = WeightedL1(1.0, dim=3)
    w = g.prox(np.array([3.0, -0.2, -4.0]), [2.0, 2.0, 1.0])
    assert np.allclose(w, [2.5, 0.0, -3.0])


def test_box_prox_is_clip_and_value():
    g = BoxIndicator(-1.0, [0.5, 1.0])
    assert np.allclose(g.prox([2.0, -3.0], 5.0), [0.5, -1.0])
    assert g.value([0.0, 0.0]) == 0.0
    assert g.value([0.6, 0.0]) == math.inf
    with pytest.raises(DomainError):
        g.subdiff([2.0, 0.0])


def test_piecewise_prox_satisfies_optimality(rng):
    g = PiecewiseLinearFn(rho=0.7, offset=rng.standard_normal(6), lower=-1.5, upper=1.2)
    x = 3.0 * rng.standard_normal(6)
    d = rng.uniform(0.5, 4.0, 6)
    w = g.prox(x, d)
    dist, exact = g.subdiff_distance(w, d * (x - w))
    assert exact
    assert dist <= 1e-10


def test_inverted_bounds_rejected():
    with pytest.raises(UsageError):
        PiecewiseLinearFn(1.0, lower=1.0, upper=0.0, dim=2)
    with pytest.raises(UsageError):
        WeightedL1(-1.0, dim=2)


def test_affine_prox_with_dense_metric(rng, spd):
    B = rng.standard_normal((2, 5))
    d = rng.standard_normal(2)
    g = AffineIndicator(B, d)
    Q = Metric.from_hessian(spd(5))
    x = rng.standard_normal(5)
    w = g.prox(x, Q)
    assert np.allclose(B @ w, d, atol=1e-10)
    dist, exact = g.subdiff_distance(w, Q.hess_apply(x - w))
    assert exact and dist <= 1e-9


def test_trace_affine_prox_has_unit_trace(rng, spd):
    g = TraceAffine(3)
    w = g.prox(rng.standard_normal(9), Metric.from_hessian(spd(9)))
    assert w.reshape(3, 3, order="F").trace() == pytest.approx(1.0, abs=1e-12)


def test_linear_function_and_shift(rng):
    c = rng.standard_normal(4)
    x = rng.standard_normal(4)
    assert np.allclose(LinearFn(c).prox(x, 2.0), x - c / 2.0)
    shifted = LinearShift(WeightedL1(0.5, dim=4), c)
    base = WeightedL1(0.5, dim=4)
    assert np.allclose(shifted.prox(x, 2.0), base.prox(x - c / 2.0, 2.0))
    assert shifted.value(x) == pytest.approx(base.value(x) + c @ x)


def test_separable_sum_prox_blocks(rng):
    g = SeparableSum([WeightedL1(1.0, dim=2), BoxIndicator(0.0, 1.0, dim=2)])
    x = np.array([3.0, -0.5, 2.0, -1.0])
    assert np.allclose(g.prox(x, 1.0), [2.0, 0.0, 1.0, 0.0])
    with pytest.raises(CapabilityError):
        g.prox(x, Metric.from_hessian(np.eye(4) + 0.1))


def test_conjugate_prox_by_moreau(rng):
    rho = 0.8
    gstar = ConjugateFn(WeightedL1(rho, dim=5))
    x = 2.0 * rng.standard_normal(5)
    assert np.allclose(gstar.prox(x, 1.0), np.clip(x, -rho, rho))
    assert gstar.value(np.full(5, 0.5)) == 0.0
    assert gstar.value(np.full(5, 0.9)) == math.inf


def test_psi_prox_from_g_matches_conjugate_shift(rng):
    g = WeightedL1(0.6, dim=3)
    b = rng.standard_normal(3)
    y = rng.standard_normal(3)
    Q = np.array([1.5, 0.5, 2.0])
    psi = LinearShift(ConjugateFn(g), b)
    # prox_psi_from_g trabaja en la métrica Q⁻¹
    assert np.allclose(prox_psi_from_g(g, b, Q, y), psi.prox(y, 1.0 / Q))


def test_zero_function_conjugate_bounds():
    lo, hi = ZeroFn(2).conj_subdiff_bounds(np.zeros(2))
    assert np.all(np.isneginf(lo)) and np.all(np.isposinf(hi))
    with pytest.raises(DomainError):
        ZeroFn(2).conj_subdiff_bounds(np.ones(2))


def test_descriptor_restores_function(rng):
    g = LinearShift(PiecewiseLinearFn(0.2, rng.standard_normal(4), -1.0, 2.0), rng.standard_normal(4))
    h = prox_from_descriptor(g.to_descriptor())
    x = rng.uniform(-0.9, 1.9, 4)
    assert h.value(x) == pytest.approx(g.value(x))
    assert np.allclose(h.prox(x, 3.0), g.prox(x, 3.0))


def test_closed_form_subsolve_is_exact(rng):
    metric = Metric.from_diagonal(rng.uniform(0.5, 2.0, 4))
    z = rng.standard_normal(4)
    gt = rng.standard_normal(4)
    w, cert = inexact_subsolve(metric, z, gt, WeightedL1(0.3, dim=4), 0.5, 1e-6)
    assert cert.exact and cert.delta_achieved == 0.0
    # 0 ∈ t[gt + H(w − z)] + ∂g(w)
    dist, _ = WeightedL1(0.3, dim=4).subdiff_distance(w, -0.5 * (gt + metric.hess_apply(w - z)))
    assert dist <= 1e-12


@pytest.mark.parametrize("g_kind", ["l1", "box", "l1_box"])
def test_accelerated_subsolve_certificate(rng, spd, g_kind):
    p = 6
    g = {
        "l1": WeightedL1(0.4, dim=p),
        "box": BoxIndicator(-0.3, 0.3, dim=p),
        "l1_box": PiecewiseLinearFn(0.4, rng.standard_normal(p), -1.0, 1.0),
    }[g_kind]
    metric = Metric.from_hessian(spd(p, cond=20.0))
    z = rng.uniform(-0.5, 0.5, p)
    gt = rng.standard_normal(p)
    t = 0.7
    target = 1e-7
    w, cert = inexact_subsolve(metric, z, gt, g, t, target)
    assert not cert.exact
    assert cert.delta_achieved <= target
    assert dual_local_norm(metric, cert.residual) / t == pytest.approx(cert.delta_achieved, rel=1e-9)
    # e − t[gt + H(w − z)] ∈ ∂g(w)
    v = cert.residual - t * (gt + metric.hess_apply(w - z))
    dist, _ = g.subdiff_distance(w, v)
    assert dist <= 1e-8 * (1.0 + np.linalg.norm(cert.residual))


def test_accelerated_subsolve_reports_budget_exhaustion(rng, spd):
    metric = Metric.from_hessian(spd(5, cond=1e4))
    solver = AcceleratedProxGradient(metric, np.zeros(5), rng.standard_normal(5), WeightedL1(0.1, dim=5), 1.0)
    with pytest.raises(ConvergenceError) as info:
        solver.run(0.0, max_iter=3)
    assert info.value.best_delta > 0.0
