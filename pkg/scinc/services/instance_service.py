"""Especializaciones del esquema de dos fases: punto silla, primal compuesto y cónico dual."""
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg as sla

from scinc.config import settings
from scinc.models.problems import DualConicProblem, PrimalProblem, RecoveredPrimal, SaddleProblem
from scinc.models.schemas import Family, Phase, Schedule
from scinc.oracles.barriers import BarrierOracle
from scinc.oracles.operators import MonotoneOracle
from scinc.services.newton_service import NewtonService, PathResult, RowHook
from scinc.services.schedule_service import build_schedule
from scinc.utils.errors import DomainError, InitializationError, NumericError, SolverError
from scinc.utils.linalg import Metric, as_vec, dual_local_norm, local_norm, sym_mat
from scinc.utils.logger import log_numeric_failure, log_validation

DEFAULT_C = 0.95
DEFAULT_BETA = 0.0870


def default_schedule(F: BarrierOracle, c: float = DEFAULT_C, beta: float = DEFAULT_BETA,
                     eta: Optional[float] = None, t0: Optional[float] = None,
                     m0: Optional[float] = None) -> Schedule:
    eta = 0.5 * beta if eta is None else eta
    return build_schedule(c, beta, eta, F.nu, F.kappa, t0=t0, m0=m0)


def _run(F: BarrierOracle, A: MonotoneOracle, z0, sched: Schedule, eps: float,
         row_hook: Optional[RowHook] = None, **options: Any) -> PathResult:
    service = NewtonService(F, A, debug_asserts=options.pop("debug_asserts", False),
                            job_id=options.pop("job_id", None), row_hook=row_hook,
                            step_hook=options.pop("step_hook", None))
    try:
        return service.algorithm1(z0, sched, eps, **options)
    except SolverError:
        raise
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        log_numeric_failure("seguimiento del camino", e)
        raise NumericError(f"Fallo numérico inesperado: {e}")


# --------------------------------------------------------------------------- punto silla

def _closed_form_core(Hx: np.ndarray, Hy: np.ndarray, Xk: np.ndarray, yk: np.ndarray,
                      gx: np.ndarray, gy: np.ndarray, t: float, vec_c: np.ndarray,
                      Ls: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = math.isqrt(Xk.shape[0])
    vec_i = np.eye(n).reshape(-1, order="F")
    try:
        hy_factor = sla.cho_factor(Hy, lower=True)
    except sla.LinAlgError as e:
        raise NumericError(f"Bloque ∇²φ(y) no factorizable: {e}")
    hy_inv_ls = sla.cho_solve(hy_factor, Ls)
    hy_inv_gy = sla.cho_solve(hy_factor, gy)
    Hk = Hx + (Ls.T @ hy_inv_ls) / (t * t)
    hk = (gx - Hx @ Xk) - Ls.T @ (yk - hy_inv_gy) / t - vec_c / t
    try:
        hk_factor = sla.cho_factor(Hk, lower=True)
    except sla.LinAlgError as e:
        raise NumericError(f"H_k no es definida positiva: {e}")
    u = sla.cho_solve(hk_factor, vec_i)
    v = sla.cho_solve(hk_factor, hk)
    X = ((vec_i @ v + 1.0) / (vec_i @ u)) * u - v
    y = yk - sla.cho_solve(hy_factor, gy + Ls @ X / t)
    return X, y


def saddle_closed_form_step(Xk, yk, t: float, C, Lmat) -> Tuple[np.ndarray, np.ndarray]:
    """Paso de Newton exacto del problema de máximo autovalor con f = −log det y φ = barrera de caja.

    Lmat es n²×p (columnas vec(L_i)); la traza de X queda fijada en 1 por el multiplicador.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    Lmat = np.atleast_2d(np.asarray(Lmat, dtype=float))
    Xk = as_vec(Xk, n * n, name="X")
    yk = as_vec(yk, Lmat.shape[1], name="y")
    Xm = sym_mat(Xk, n)
    try:
        Zi = sla.cho_solve(sla.cho_factor(Xm, lower=True), np.eye(n))
    except sla.LinAlgError:
        raise DomainError("X^k no es definida positiva")
    if np.any(np.abs(yk) >= 1.0):
        raise DomainError("y^k fuera de la caja abierta")
    w = 1.0 - yk * yk
    Hx = np.kron(Zi, Zi)
    Hy = np.diag(2.0 * (1.0 + yk * yk) / (w * w))
    gx = -Zi.reshape(-1, order="F")
    gy = 2.0 * yk / w
    return _closed_form_core(Hx, Hy, Xk, yk, gx, gy, t, C.reshape(-1, order="F"), Lmat.T)


def max_eigenvalue_closed_form(P: SaddleProblem):
    """Adaptador del paso cerrado a la firma del subsolver de SaddleOperator."""
    vec_c = np.asarray(P.data["C"], dtype=float).reshape(-1, order="F")
    Ls = P.L
    N = P.n

    def step(metric: Metric, z: np.ndarray, gt: np.ndarray, t: float) -> np.ndarray:
        H = metric.hessian
        X, y = _closed_form_core(H[:N, :N], H[N:, N:], z[:N], z[N:], gt[:N], gt[N:], t, vec_c, Ls)
        return np.concatenate([X, y])

    return step


def max_eigenvalue_objective(P: SaddleProblem, y) -> float:
    C = np.asarray(P.data["C"], dtype=float)
    n = C.shape[0]
    M = C + sym_mat(P.L.T @ as_vec(y, P.m, name="y"), n)
    return float(np.linalg.eigvalsh(M)[-1])


def solve_saddle(P: SaddleProblem, sched: Optional[Schedule] = None, eps: float = 1e-6,
                 use_closed_form: bool = True, **options: Any) -> Tuple[np.ndarray, np.ndarray, PathResult]:
    F = P.barrier()
    closed = None
    if use_closed_form and P.family == Family.MAX_EIGENVALUE and "C" in P.data:
        closed = max_eigenvalue_closed_form(P)
    A = P.operator(closed_form=closed)
    sched = sched or default_schedule(F)
    result = _run(F, A, P.start_point(), sched, eps, **options)
    x, y = result.z[:P.n], result.z[P.n:]
    return x, y, result


def saddle_objective(P: SaddleProblem, x, y) -> float:
    if P.family == Family.MAX_EIGENVALUE and "C" in P.data:
        return max_eigenvalue_objective(P, y)
    return float(y @ (P.L @ x)) - P.g.value(x) - P.psi.value(y)


# --------------------------------------------------------------------------- primal

class PrimalModelGap:
    """Brecha h_k(x^{k+1}) − h_k(x̄^{k+1}) del modelo proximal de Newton en cada paso de la fase 2.

    h_k(x) = ⟨∇F(x^k), x − x^k⟩ + ½‖x − x^k‖²_{x^k} + g(x)/t_{k+1} es 1-fuertemente convexa en
    ‖·‖_{x^k}; x̄^{k+1} se obtiene con un subproblema resuelto a `reference_delta`.
    """

    def __init__(self, P: PrimalProblem, reference_delta: Optional[float] = None):
        self.g = P.g
        self.F = P.barrier()
        self.A = P.operator()
        self.reference_delta = settings.decrement_tol if reference_delta is None else reference_delta
        self.records: List[Dict[str, float]] = []

    def model_value(self, metric: Metric, z: np.ndarray, gt: np.ndarray, t: float, x: np.ndarray) -> float:
        d = x - z
        return float(gt @ d) + 0.5 * local_norm(metric, d) ** 2 + self.g.value(x) / t

    def __call__(self, z, t: float, w, cert, delta_target: float, k: int) -> None:
        metric = self.F.metric(z)
        gt = self.F.grad(z)
        reference, ref_cert = self.A.solve_linearized(metric, z, gt, t, self.reference_delta)
        h_step = self.model_value(metric, z, gt, t, w)
        h_ref = self.model_value(metric, z, gt, t, reference)
        # la referencia es a su vez inexacta: h(x̄) − h* ≤ ½δ_ref²
        self.records.append({
            "k": k, "t": t,
            "gap": max(h_step - h_ref, 0.0),
            "bound": 0.5 * delta_target ** 2 + 0.5 * ref_cert.delta_achieved ** 2,
            "scale": max(1.0, abs(h_ref)),
        })

    def violations(self, rtol: float = 1e-12) -> List[Dict[str, float]]:
        return [r for r in self.records if r["gap"] > r["bound"] + rtol * r["scale"]]

    @property
    def max_gap(self) -> float:
        return max((r["gap"] for r in self.records), default=0.0)

    def report(self) -> bool:
        failed = self.violations()
        ok = not failed
        details = f"{len(self.records)} pasos, máx h(x) − h(x̄) = {self.max_gap:.3e}"
        if failed:
            worst = max(failed, key=lambda r: r["gap"] - r["bound"])
            details += f", k={int(worst['k'])}: {worst['gap']:.3e} > ½δ² = {worst['bound']:.3e}"
        log_validation("brecha del modelo primal", ok, details)
        return ok


def solve_primal(P: PrimalProblem, sched: Optional[Schedule] = None, eps: float = 1e-6,
                 delta_const: Optional[float] = None, monitor: Optional[PrimalModelGap] = None,
                 **options: Any) -> Tuple[np.ndarray, PathResult]:
    """Camino proximal de Newton; con delta_const termina cuando Δ(β,ν)·t_k ≤ ε."""
    F = P.barrier()
    sched = sched or default_schedule(F, m0=delta_const)
    monitor = monitor if monitor is not None else PrimalModelGap(P)
    result = _run(F, P.operator(), P.start_point(), sched, eps, step_hook=monitor, **options)
    monitor.report()
    return result.z, result


# --------------------------------------------------------------------------- cónico dual

def dual_feasible_start(P: DualConicProblem, max_doublings: int = 60, bisections: int = 60) -> np.ndarray:
    """ŷ⁰ = ρ·L e_K con ρ duplicado y luego bisecado hasta Lᵀŷ⁰ − c ∈ int K*."""
    phi = P.barrier()
    if P.start is not None:
        y0 = as_vec(P.start, phi.dim, name="y0")
        if not phi.in_domain(y0):
            raise InitializationError("El punto dual inicial suministrado no es estrictamente factible")
        return y0
    if phi.in_domain(np.zeros(phi.dim)):
        return np.zeros(phi.dim)
    d = P.L @ P.f.interior_point()
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if phi.in_domain(hi * d):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InitializationError("No se encontró un punto dual estrictamente factible en la dirección L·e_K")
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if phi.in_domain(mid * d):
            hi = mid
        else:
            lo = mid
    y0 = 2.0 * hi * d
    return y0 if phi.in_domain(y0) else hi * d


def recover_primal(y, t: float, P: DualConicProblem) -> RecoveredPrimal:
    """x = ∇f*(t⁻¹(c − Lᵀy)) y s = proyección de Lx − b sobre ∂g*(y)."""
    phi = P.barrier()
    y = as_vec(y, phi.dim, name="y")
    slack = phi.slack(y)
    if not P.f.in_conj_domain(slack / t):
        raise DomainError("c − Lᵀy fuera del dominio de la conjugada")
    x = P.f.conj_grad(slack / t)
    if not P.f.in_domain(x):
        raise DomainError("El primal recuperado no es interior al cono")
    r = P.L @ x - P.b
    lo, hi = P.g.conj_subdiff_bounds(y)
    s = np.clip(r, lo, hi)

    fx = P.f.metric(x)
    try:
        inclusion, _ = P.g.subdiff_distance(s, y)
    except DomainError:
        inclusion = math.inf
    dual_obj = P.dual_objective(y)
    primal_obj = P.primal_objective(x, s)
    residuals = {
        "dual_feasibility": dual_local_norm(fx, P.L.T @ y - P.c_obj),
        "primal_feasibility": dual_local_norm(phi.metric(y), r - s),
        "stationarity": float(np.linalg.norm(slack - t * P.f.grad(x))),
        "subgradient_inclusion": inclusion,
        "duality_gap": dual_obj - primal_obj,
    }
    return RecoveredPrimal(x=x, s=s, t=t, residuals=residuals,
                           primal_objective=primal_obj, dual_objective=dual_obj)


def _recovery_hook(P: DualConicProblem) -> RowHook:
    def hook(y: np.ndarray, t: float, phase: Phase) -> Dict[str, float]:
        if phase != Phase.TWO:
            return {}
        rec = recover_primal(y, t, P)
        return {
            "residual_primary": rec.residuals["dual_feasibility"],
            "residual_aux": rec.residuals["primal_feasibility"],
        }

    return hook


def solve_dual_conic(P: DualConicProblem, sched: Optional[Schedule] = None, eps: float = 1e-6,
                     **options: Any) -> Tuple[RecoveredPrimal, np.ndarray, PathResult]:
    """Termina cuando √ν·t_k ≤ ε y devuelve el primal recuperado en el último iterado."""
    phi = P.barrier()
    sched = sched or default_schedule(phi, m0=math.sqrt(phi.nu))
    y0 = dual_feasible_start(P)
    result = _run(phi, P.operator(), y0, sched, eps, row_hook=_recovery_hook(P), **options)
    recovered = recover_primal(result.z, result.t, P)
    log_validation(
        "factibilidad dual recuperada",
        recovered.residuals["dual_feasibility"] <= math.sqrt(phi.nu) * result.t * (1.0 + 1e-6),
        f"{recovered.residuals['dual_feasibility']:.3e}",
    )
    return recovered, result.z, result


__all__ = [
    "default_schedule", "saddle_closed_form_step", "max_eigenvalue_closed_form", "max_eigenvalue_objective",
    "solve_saddle", "saddle_objective", "PrimalModelGap", "solve_primal", "dual_feasible_start", "recover_primal",
    "solve_dual_conic",
]
