import math

import numpy as np
import pytest

from scinc.models.problems import PrimalProblem
from scinc.models.schemas import IterState, Phase, Phase1Strategy
from scinc.oracles.barriers import barrier_box, barrier_orthant
from scinc.oracles.operators import eps_solution_residual, subdiff_operator
from scinc.oracles.prox import BoxIndicator, WeightedL1, ZeroFn
from scinc.services.instance_service import default_schedule, solve_primal
from scinc.services.newton_service import NewtonService, algorithm1, newton_decrement, s_mapping
from scinc.services.problem_service import gen_linear_orthant
from scinc.services.schedule_service import central_path_bound, dgn_rate, fgn_rate, key_estimate
from scinc.utils.errors import BudgetExceededError


def _instance(rng, i):
    """Barrera de ortante o caja con g ∈ {0, ℓ1, caja} y un t aleatorio."""
    p = int(rng.integers(1, 11))
    if i % 2 == 0:
        F = barrier_box(p)
        z0 = np.zeros(p)
        kind = ("zero", "l1", "box")[i % 3]
        g = {
            "zero": ZeroFn(p),
            "l1": WeightedL1(rng.uniform(0.1, 2.0, p), offset=rng.uniform(-0.5, 0.5, p)),
            "box": BoxIndicator(-0.5, rng.uniform(0.1, 0.8, p)),
        }[kind]
    else:
        F = barrier_orthant(p)
        z0 = np.ones(p)
        if i % 3 == 0:
            g = BoxIndicator(-1.0, rng.uniform(1.5, 3.0, p))
        else:
            g = WeightedL1(rng.uniform(0.5, 2.0, p), offset=rng.uniform(0.0, 1.0, p))
    return F, subdiff_operator(g), z0, float(rng.uniform(0.2, 2.0))


def _approach(svc, z0, t, radius):
    """Newton amortiguado hasta λ_t(z) ≤ radius."""
    lam, _ = svc.newton_decrement(z0, t)
    state = IterState(z=z0, t=t, phase=Phase.FIXED, lam=lam)
    for _ in range(200):
        if state.lam <= radius:
            return IterState(z=state.z, t=t, phase=Phase.FIXED, lam=state.lam)
        state = svc.dgn_step(state)
    pytest.fail("Newton amortiguado no entró en la vecindad")


def test_pure_newton_step_when_operator_vanishes():
    F = barrier_box(3)
    z = np.array([0.1, -0.2, 0.05])
    w, cert = s_mapping(F, subdiff_operator(ZeroFn(3)), z, z, 0.7, 0.0)
    assert cert.exact
    assert np.allclose(w, z - np.linalg.solve(F.hessian(z), F.grad(z)))


def test_decrement_on_linear_central_path():
    F = barrier_orthant(1)
    A = subdiff_operator(gen_linear_orthant(1).g)
    # λ_t(x) = |1 − x/t| para min x sobre x ≥ 0
    assert newton_decrement(F, A, np.array([2.0]), 2.0) == pytest.approx(0.0, abs=1e-14)
    assert newton_decrement(F, A, np.array([1.5]), 2.0) == pytest.approx(0.25, rel=1e-12)


def test_key_estimate_holds_on_random_instances(rng):
    checked = 0
    for i in range(120):
        F, A, z0, t = _instance(rng, i)
        svc = NewtonService(F, A, debug_asserts=True)
        state = _approach(svc, z0, t, 0.3)
        for _ in range(3):
            new = svc.fgn_step(state, 1e-12)
            assert new.lam <= key_estimate(state.lam, new.delta_used) + 1e-8
            assert F.in_domain(new.z)
            state = new
            checked += 1
    assert checked >= 300


@pytest.mark.parametrize("scheme,radius,rate", [("fgn", 0.18, fgn_rate(0.18)), ("dgn", 0.21, dgn_rate(0.21))])
def test_quadratic_convergence_at_fixed_t(rng, scheme, radius, rate):
    for i in range(24):
        F, A, z0, t = _instance(rng, i)
        svc = NewtonService(F, A)
        start = _approach(svc, z0, t, radius)
        result = svc.run_fixed(start.z, t, scheme=scheme, tol=1e-10)
        lams = [row.lambda_ for row in result.trace.rows]
        assert lams[-1] <= 1e-10
        for prev, cur in zip(lams, lams[1:]):
            if prev < 1e-6:
                break
            assert cur / (prev * prev) <= rate


def test_path_following_on_linear_central_path():
    P = gen_linear_orthant(1)
    F, A = P.barrier(), P.operator()
    sched = default_schedule(F)
    svc = NewtonService(F, A, debug_asserts=True)
    state = IterState(z=np.array([sched.t0]), t=sched.t0, lam=0.0)
    for _ in range(40):
        state = svc.pfgn_step(state, sched)
        assert state.lam <= sched.beta + 1e-9
        assert abs(state.z[0] - state.t) <= sched.beta * state.t + 1e-12
    assert state.t == pytest.approx(sched.t0 * (1.0 - sched.sigma_bar) ** 40, rel=1e-10)


def _random_primal(rng, i):
    p = int(rng.integers(2, 7))
    if i % 2 == 0:
        return PrimalProblem(g=WeightedL1(rng.uniform(0.5, 2.0, p), offset=rng.uniform(0.0, 2.0, p)),
                             f=barrier_orthant(p), start=rng.uniform(0.5, 3.0, p))
    return PrimalProblem(g=WeightedL1(rng.uniform(0.2, 1.0, p), offset=rng.uniform(-0.5, 0.5, p)),
                         f=barrier_box(p), start=rng.uniform(-0.8, 0.8, p))


def _assert_path_invariants(result, sched, nu):
    two = result.trace.phase_rows(Phase.TWO)
    one = result.trace.phase_rows(Phase.ONE)
    assert all(r.lambda_ <= sched.beta + 1e-6 for r in two)
    assert result.phase2_iters <= result.k_max
    assert all(r.lambda_ <= sched.eta + 1e-6 for r in one if r.k > 0)
    assert result.phase1_iters <= math.ceil(2.0 * max(result.j_max, 1))
    for r in two:
        if r.k > 0:
            assert r.residual_primary <= central_path_bound(r.residual_aux, r.delta_achieved, nu, r.t) + 1e-6
    ts = [r.t for r in two]
    assert all(b < a for a, b in zip(ts, ts[1:]))


@pytest.mark.slow
def test_algorithm1_invariants_and_budget(rng):
    problems = [gen_linear_orthant(1)] + [_random_primal(rng, i) for i in range(5)]
    for P in problems:
        F = P.barrier()
        sched = default_schedule(F)
        x, result = solve_primal(P, sched=sched, eps=1e-5, debug_asserts=True)
        assert F.in_domain(x)
        assert sched.M0 * result.t <= 1e-5
        _assert_path_invariants(result, sched, F.nu)


def test_linear_orthant_final_iterate_tracks_central_path():
    P = gen_linear_orthant(1)
    x, result = solve_primal(P, eps=1e-6)
    assert abs(x[0] - result.t) <= 0.0870 * result.t
    value, exact = eps_solution_residual(P.operator(), P.barrier(), np.array([result.t]))
    assert exact
    assert value <= result.t * math.sqrt(P.barrier().nu) + 1e-6


def test_terminal_eps_needs_no_phase_two_steps():
    P = gen_linear_orthant(2)
    F = P.barrier()
    sched = default_schedule(F)
    result = algorithm1(F, P.operator(), P.start_point(), sched, sched.M0 * sched.t0)
    assert result.phase2_iters == 0
    assert result.t == sched.t0


def test_damped_phase_one_strategy(rng):
    P = _random_primal(rng, 0)
    F = P.barrier()
    sched = default_schedule(F)
    result = algorithm1(F, P.operator(), P.start_point(), sched, 1e-3, phase1=Phase1Strategy.DAMPED_NEWTON)
    fixed = result.trace.phase_rows(Phase.FIXED)
    assert fixed and fixed[-1].lambda_ <= sched.beta
    assert not result.trace.phase_rows(Phase.ONE)


def test_budget_exhaustion_keeps_partial_trace():
    P = gen_linear_orthant(3)
    F = P.barrier()
    sched = default_schedule(F)
    with pytest.raises(BudgetExceededError) as info:
        algorithm1(F, P.operator(), P.start_point(), sched, 1e-8, max_iters=2)
    assert info.value.exit_code == 2
    assert info.value.trace.count(Phase.TWO) == 2
