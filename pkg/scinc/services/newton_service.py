"""Pasos de Newton generalizados y el esquema de seguimiento de camino en dos fases."""
import math
import time
import uuid
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from scinc.config import settings
from scinc.models.schemas import (
    InexactCertificate, IterState, JobStatus, Phase, Phase1Strategy, Schedule, SolveTrace, TraceRow,
)
from scinc.oracles.barriers import BarrierOracle
from scinc.oracles.operators import MonotoneOracle, eps_solution_residual
from scinc.services.schedule_service import (
    adaptive_sigma, complexity_budget, intermediate_bound, key_estimate, phase1_step_size,
)
from scinc.utils.errors import BudgetExceededError, DomainError, NumericError
from scinc.utils.job_manager import job_manager
from scinc.utils.linalg import as_vec, dual_local_norm, local_norm
from scinc.utils.logger import app_logger, log_solve_iteration

RowHook = Callable[[np.ndarray, float, Phase], Dict[str, float]]
# (ancla z, t, paso w, certificado, δ pedido, k)
StepHook = Callable[[np.ndarray, float, np.ndarray, InexactCertificate, float, int], None]


class PathResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: np.ndarray
    t: float
    lam: float
    trace: SolveTrace
    schedule: Optional[Schedule] = None
    phase1_iters: int = 0
    phase2_iters: int = 0
    k_max: int = 0
    j_max: int = 0


class NewtonService:
    def __init__(self, F: BarrierOracle, A: MonotoneOracle, debug_asserts: bool = False,
                 job_id: Optional[str] = None, row_hook: Optional[RowHook] = None,
                 step_hook: Optional[StepHook] = None):
        if F.dim != A.dim:
            raise DomainError(f"Barrera en R^{F.dim} y operador en R^{A.dim}")
        self.F = F
        self.A = A
        self.debug_asserts = debug_asserts
        self.job_id = job_id or str(uuid.uuid4())
        self.row_hook = row_hook
        self.step_hook = step_hook

    # ------------------------------------------------------------------ núcleo

    def s_mapping(self, anchor, z, t: float, delta: float, shift=None,
                  start=None, interior: bool = True) -> Tuple[np.ndarray, InexactCertificate]:
        """Aproximación δ de la solución w de 0 ∈ t[∇F(z) − shift + ∇²F(ẑ)(w − z)] + A(w)."""
        anchor = as_vec(anchor, self.F.dim, name="anchor")
        z = as_vec(z, self.F.dim)
        metric = self.F.metric(anchor)
        gt = self.F.grad(z)
        if shift is not None:
            gt = gt - shift
        w, cert = self.A.solve_linearized(metric, z, gt, t, delta, start=start)
        if interior and not self.F.in_domain(w):
            raise DomainError("El paso de Newton salió del interior del dominio",
                              t=t, delta=cert.delta_achieved)
        return w, cert

    def newton_decrement(self, z, t: float, delta_eval: Optional[float] = None,
                         shift=None) -> Tuple[float, np.ndarray]:
        """λ̃_t(z) = ‖z − s_z(z; t)‖_z con |λ̃ − λ| ≤ δ_eval; devuelve también s_z(z; t)."""
        delta_eval = settings.decrement_tol if delta_eval is None else delta_eval
        z = as_vec(z, self.F.dim)
        metric = self.F.metric(z)
        gt = self.F.grad(z)
        if shift is not None:
            gt = gt - shift
        w, _ = self.A.solve_linearized(metric, z, gt, t, delta_eval)
        return local_norm(metric, w - z), w

    def _intermediate(self, z, w, cert: InexactCertificate, t: float, shift=None) -> float:
        if cert.exact or cert.delta_achieved == 0.0:
            return local_norm(self.F.metric(z), w - z)
        lam, _ = self.newton_decrement(z, t, shift=shift)
        return lam

    def _check(self, name: str, lhs: float, rhs: float) -> bool:
        if lhs <= rhs + settings.assert_slack:
            return True
        msg = f"Cota violada [{name}]: {lhs:.6e} > {rhs:.6e}"
        if self.debug_asserts and self.F.dim <= settings.strict_assert_dim:
            raise NumericError(msg, lhs=lhs, rhs=rhs)
        if self.debug_asserts:
            app_logger.warning(msg)
        else:
            app_logger.debug(msg)
        return False

    # ------------------------------------------------------------------ pasos

    def fgn_step(self, state: IterState, delta: float) -> IterState:
        z, t = state.z, state.t
        lam = state.lam
        if lam is None:
            lam, _ = self.newton_decrement(z, t)
        if lam + delta >= 1.0:
            app_logger.warning(f"Paso completo fuera de la región garantizada: λ+δ = {lam + delta:.4f}")
        w, cert = self.s_mapping(z, z, t, delta)
        lam_new, _ = self.newton_decrement(w, t)
        self._check("paso completo", lam_new, key_estimate(lam, cert.delta_achieved))
        return IterState(z=w, t=t, k=state.k + 1, phase=Phase.FIXED, lam=lam_new, lam_prev=lam,
                         delta_target=delta, delta_used=cert.delta_achieved, sigma=1.0)

    def dgn_step(self, state: IterState, delta: Optional[float] = None, max_tighten: int = 30) -> IterState:
        z, t = state.z, state.t
        metric = self.F.metric(z)
        target = delta if delta is not None else 0.25
        w, cert = self.s_mapping(z, z, t, target, interior=False)
        lam_tilde = local_norm(metric, w - z)
        for _ in range(max_tighten):
            bound = lam_tilde * lam_tilde / (1.0 + lam_tilde)
            if cert.delta_achieved <= bound or lam_tilde <= settings.decrement_tol:
                break
            target = 0.5 * bound
            w, cert = self.s_mapping(z, z, t, target, start=w, interior=False)
            lam_tilde = local_norm(metric, w - z)
        alpha = 1.0 / (1.0 + lam_tilde)
        z_new = (1.0 - alpha) * z + alpha * w
        lam_new, _ = self.newton_decrement(z_new, t)
        return IterState(z=z_new, t=t, k=state.k + 1, phase=Phase.FIXED, lam=lam_new, lam_prev=lam_tilde,
                         delta_target=target, delta_used=cert.delta_achieved, sigma=alpha)

    def pfgn_step(self, state: IterState, sched: Schedule, adaptive: bool = False) -> IterState:
        z, t = state.z, state.t
        lam = state.lam
        if lam is None:
            lam, _ = self.newton_decrement(z, t)
        metric = self.F.metric(z)
        grad_norm = dual_local_norm(metric, self.F.grad(z))
        sigma = adaptive_sigma(sched.c, sched.beta, grad_norm) if adaptive else sched.sigma_bar
        t_new = (1.0 - sigma) * t

        w, cert = self.s_mapping(z, z, t_new, sched.delta_t_bar)
        if self.step_hook is not None:
            self.step_hook(z, t_new, w, cert, sched.delta_t_bar, state.k + 1)
        lam_mid = self._intermediate(z, w, cert, t_new)
        r = sched.c * math.sqrt(sched.beta)
        self._check("decremento intermedio", lam_mid, intermediate_bound(lam, sigma, grad_norm))
        self._check("vecindad intermedia", lam_mid, r / (1.0 + r))

        lam_new, _ = self.newton_decrement(w, t_new)
        self._check("paso completo", lam_new, key_estimate(lam_mid, cert.delta_achieved))
        self._check("vecindad β", lam_new, sched.beta)
        return IterState(z=w, t=t_new, k=state.k + 1, phase=Phase.TWO, lam=lam_new, lam_prev=lam_mid,
                         delta_target=sched.delta_t_bar, delta_used=cert.delta_achieved, sigma=sigma)

    def phase1_step(self, zeta0: np.ndarray, state: IterState, sched: Schedule) -> IterState:
        """Paso en τ sobre el problema auxiliar 0 ∈ t₀∇F(z) − τζ̂⁰ + A(z)."""
        z, tau = state.z, state.t
        t0 = sched.t0
        norm = dual_local_norm(self.F.metric(z), zeta0)
        step = phase1_step_size(sched.c, sched.eta, t0, norm)
        tau_new = max(tau - step, 0.0)
        shift = (tau_new / t0) * zeta0

        w, cert = self.s_mapping(z, z, t0, sched.delta_tau_bar, shift=shift)
        lam_mid = self._intermediate(z, w, cert, t0, shift=shift)
        lam_hat, _ = self.newton_decrement(w, t0, shift=shift)
        self._check("vecindad η", lam_hat, sched.eta)
        return IterState(z=w, t=tau_new, k=state.k + 1, phase=Phase.ONE, lam=lam_hat, lam_prev=lam_mid,
                         delta_target=sched.delta_tau_bar, delta_used=cert.delta_achieved,
                         sigma=min(step, tau))

    # ------------------------------------------------------------------ traza

    def _row(self, state: IterState, started: float, primary: float = math.nan) -> TraceRow:
        values = {
            "residual_primary": primary,
            "residual_aux": math.nan if state.lam_prev is None else state.lam_prev,
        }
        if self.row_hook is not None:
            values.update(self.row_hook(state.z, state.t, state.phase))
        elif state.phase != Phase.ONE and math.isnan(primary):
            values["residual_primary"], _ = eps_solution_residual(self.A, self.F, state.z)
        row = TraceRow(
            phase=state.phase, k=state.k, t=state.t,
            lambda_=math.nan if state.lam is None else state.lam,
            delta_target=state.delta_target, delta_achieved=state.delta_used,
            sigma=math.nan if state.sigma is None else state.sigma,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            **values,
        )
        log_solve_iteration(self.job_id, state.phase.value, state.k, t=f"{state.t:.6e}",
                            lam=f"{row.lambda_:.3e}", delta=f"{state.delta_used:.2e}")
        return row

    # ------------------------------------------------------------------ corridas

    def run_fixed(self, z0, t: float, scheme: str = "fgn", delta: Optional[float] = None,
                  max_iters: int = 50, tol: float = 1e-10) -> PathResult:
        """FGN o DGN a t constante hasta λ_t ≤ tol."""
        started = time.perf_counter()
        z0 = self.F._checked(z0)
        lam0, _ = self.newton_decrement(z0, t)
        state = IterState(z=z0, t=t, k=0, phase=Phase.FIXED, lam=lam0)
        trace = SolveTrace()
        trace.append(self._row(state, started))
        while state.lam > tol:
            if state.k >= max_iters:
                raise BudgetExceededError("Newton a t fijo no convergió en el presupuesto",
                                          trace=trace, lam=state.lam)
            started = time.perf_counter()
            if scheme == "dgn":
                state = self.dgn_step(state, delta)
            else:
                lam = state.lam
                d = lam * lam / (1.0 - lam) if lam < 1.0 else 0.25
                state = self.fgn_step(state, d if delta is None else min(delta, d))
            trace.append(self._row(state, started))
        return PathResult(z=state.z, t=t, lam=state.lam, trace=trace, phase2_iters=state.k)

    def _phase_one(self, z_hat0: np.ndarray, sched: Schedule, strategy: Phase1Strategy,
                   trace: SolveTrace) -> Tuple[np.ndarray, int, int]:
        t0 = sched.t0
        xi0 = self.A.pick_element(z_hat0)
        zeta0 = t0 * self.F.grad(z_hat0) + xi0
        zeta_norm0 = dual_local_norm(self.F.metric(z_hat0), zeta0)
        _, j_max = complexity_budget(sched, sched.nu, t0, 1.0, zeta_norm=zeta_norm0)
        cap = int(math.ceil(settings.phase1_budget_factor * j_max))
        job_manager.update_job(self.job_id, status=JobStatus.PHASE_ONE, message="Fase 1 en curso", progress=0)

        if strategy == Phase1Strategy.DAMPED_NEWTON:
            started = time.perf_counter()
            lam0, _ = self.newton_decrement(z_hat0, t0)
            state = IterState(z=z_hat0, t=t0, k=0, phase=Phase.FIXED, lam=lam0)
            trace.append(self._row(state, started))
            while state.lam > sched.beta:
                if state.k >= cap:
                    raise BudgetExceededError("Fase 1 (Newton amortiguado) agotó el presupuesto",
                                              trace=trace, j_max=j_max)
                started = time.perf_counter()
                state = self.dgn_step(state)
                trace.append(self._row(state, started))
            return state.z, state.k, j_max

        started = time.perf_counter()
        state = IterState(z=z_hat0, t=1.0, k=0, phase=Phase.ONE, lam=0.0)
        trace.append(self._row(state, started, primary=zeta_norm0))
        stop = t0 * (sched.beta - sched.eta)
        measure = zeta_norm0
        while state.t * measure > stop:
            if state.k >= cap:
                raise BudgetExceededError("Fase 1 agotó el presupuesto j_max", trace=trace, j_max=j_max,
                                          tau=state.t)
            started = time.perf_counter()
            state = self.phase1_step(zeta0, state, sched)
            measure = dual_local_norm(self.F.metric(state.z), zeta0)
            trace.append(self._row(state, started, primary=state.t * measure))
            job_manager.update_job(self.job_id, progress=int(100 * (1.0 - state.t)), phase1_iters=state.k)
        return state.z, state.k, j_max

    def algorithm1(self, z_hat0, sched: Schedule, eps: float,
                   phase1: Phase1Strategy = Phase1Strategy.AUXILIARY_PATH, adaptive: bool = False,
                   max_iters: Optional[int] = None, skip_phase_one: bool = False) -> PathResult:
        """Fase 1 hasta λ_{t₀} ≤ β y luego seguimiento del camino hasta M₀t_k ≤ ε."""
        z_hat0 = self.F._checked(z_hat0)
        trace = SolveTrace()
        if job_manager.get_job(self.job_id) is None:
            job_manager.create_job(self.job_id)

        if skip_phase_one:
            z0, j, j_max = z_hat0, 0, 0
        else:
            z0, j, j_max = self._phase_one(z_hat0, sched, phase1, trace)

        t = sched.t0
        k_max, _ = complexity_budget(sched, sched.nu, t, eps)
        cap = k_max if max_iters is None else max_iters
        job_manager.update_job(self.job_id, status=JobStatus.PHASE_TWO, message="Fase 2 en curso",
                               phase1_iters=j)

        started = time.perf_counter()
        lam0, _ = self.newton_decrement(z0, t)
        self._check("entrega de fase 1", lam0, sched.beta)
        state = IterState(z=z0, t=t, k=0, phase=Phase.TWO, lam=lam0)
        trace.append(self._row(state, started))
        total = math.log(max(sched.M0 * sched.t0 / eps, 1.0 + 1e-12))
        while sched.M0 * state.t > eps:
            if state.k >= cap:
                job_manager.update_job(self.job_id, status=JobStatus.BUDGET_EXCEEDED,
                                       message="Presupuesto de iteraciones agotado", phase2_iters=state.k)
                raise BudgetExceededError("Fase 2 agotó el presupuesto de iteraciones", trace=trace,
                                          k=state.k, k_max=k_max, t=state.t)
            started = time.perf_counter()
            state = self.pfgn_step(state, sched, adaptive=adaptive)
            trace.append(self._row(state, started))
            done = math.log(sched.t0 / state.t)
            job_manager.update_job(self.job_id, progress=min(int(100 * done / total), 100),
                                   phase2_iters=state.k)

        job_manager.update_job(self.job_id, status=JobStatus.COMPLETED, message="Terminado",
                               progress=100, phase2_iters=state.k)
        return PathResult(z=state.z, t=state.t, lam=state.lam, trace=trace, schedule=sched,
                          phase1_iters=j, phase2_iters=state.k, k_max=k_max, j_max=j_max)


# Envoltorios funcionales sobre el servicio

def s_mapping(F: BarrierOracle, A: MonotoneOracle, anchor, z, t: float, delta: float):
    return NewtonService(F, A).s_mapping(anchor, z, t, delta)


def newton_decrement(F: BarrierOracle, A: MonotoneOracle, z, t: float, delta_eval: Optional[float] = None) -> float:
    lam, _ = NewtonService(F, A).newton_decrement(z, t, delta_eval)
    return lam


def fgn_step(F: BarrierOracle, A: MonotoneOracle, z, t: float, delta: float) -> IterState:
    return NewtonService(F, A).fgn_step(IterState(z=as_vec(z, F.dim), t=t), delta)


def dgn_step(F: BarrierOracle, A: MonotoneOracle, z, t: float, delta: Optional[float] = None) -> IterState:
    return NewtonService(F, A).dgn_step(IterState(z=as_vec(z, F.dim), t=t), delta)


def pfgn_step(F: BarrierOracle, A: MonotoneOracle, state: IterState, sched: Schedule) -> IterState:
    return NewtonService(F, A).pfgn_step(state, sched)


def phase1_step(F: BarrierOracle, A: MonotoneOracle, zeta0, state: IterState, sched: Schedule) -> IterState:
    return NewtonService(F, A).phase1_step(as_vec(zeta0, F.dim), state, sched)


def algorithm1(F: BarrierOracle, A: MonotoneOracle, z_hat0, sched: Schedule, eps: float, **kwargs) -> PathResult:
    return NewtonService(F, A).algorithm1(z_hat0, sched, eps, **kwargs)


__all__ = [
    "NewtonService", "PathResult", "s_mapping", "newton_decrement", "fgn_step", "dgn_step", "pfgn_step",
    "phase1_step", "algorithm1",
]
