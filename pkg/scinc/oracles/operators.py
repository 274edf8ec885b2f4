"""Operadores maximalmente monótonos y el subproblema linealizado de Newton.

Todo operador resuelve, para un ancla con métrica H = ∇²F(ẑ), la inclusión lineal

    0 ∈ t[gt + H(w − z)] + A(w)

con certificado e ∈ t[gt + H(w − z)] + A(w), ‖e‖*_H ≤ t·δ.
"""
import math
from abc import ABC, abstractmethod
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy import linalg as sla

from scinc.config import settings
from scinc.models.schemas import InexactCertificate
from scinc.oracles.barriers import BarrierOracle
from scinc.oracles.prox import ProxFn, SeparableSum, inexact_subsolve
from scinc.utils.errors import CapabilityError, ConvergenceError, DomainError, UsageError
from scinc.utils.linalg import Metric, as_metric, as_vec, dual_local_norm


class MonotoneOracle(ABC):
    def __init__(self, dim: int):
        self.dim = dim

    @abstractmethod
    def solve_linearized(self, metric: Metric, z, grad_term, t: float, delta: float,
                         start=None) -> Tuple[np.ndarray, InexactCertificate]:
        ...

    @abstractmethod
    def member_residual(self, z, w, metric: Optional[Metric] = None) -> Tuple[float, bool]:
        """Distancia de w a A(z) en ‖·‖*_metric y si es exacta o sólo una cota superior."""

    @abstractmethod
    def pick_element(self, z) -> np.ndarray:
        ...

    def resolvent(self, z, Q, t: float, delta: float = 0.0) -> np.ndarray:
        """w con 0 ∈ tQ(w − z) + A(w)."""
        Qm = as_metric(Q, self.dim)
        w, _ = self.solve_linearized(Qm, z, np.zeros(self.dim), t, delta)
        return w


class SubdifferentialOperator(MonotoneOracle):
    """A = ∂g."""

    def __init__(self, g: ProxFn):
        super().__init__(g.dim)
        self.g = g

    def solve_linearized(self, metric, z, grad_term, t, delta, start=None):
        return inexact_subsolve(metric, z, grad_term, self.g, t, delta, start=start)

    def member_residual(self, z, w, metric=None):
        return self.g.subdiff_distance(z, w, metric)

    def pick_element(self, z):
        return self.g.subgradient(as_vec(z, self.dim))


ClosedFormStep = Callable[[Metric, np.ndarray, np.ndarray, float], np.ndarray]


class SaddleOperator(MonotoneOracle):
    """A(x, y) = [∂g(x) − Lᵀy; ∂ψ(y) + Lx] con L de tamaño m×n."""

    max_fbf_iter_factor = 50

    def __init__(self, g: ProxFn, psi: ProxFn, L, closed_form: Optional[ClosedFormStep] = None):
        L = np.atleast_2d(np.asarray(L, dtype=float))
        if L.shape != (psi.dim, g.dim):
            raise UsageError(f"L debe ser {psi.dim}×{g.dim}, llegó {L.shape[0]}×{L.shape[1]}")
        super().__init__(g.dim + psi.dim)
        self.g = g
        self.psi = psi
        self.L = L
        self.n = g.dim
        self.G = SeparableSum([g, psi])
        self.closed_form = closed_form
        self.S = np.zeros((self.dim, self.dim))
        self.S[:self.n, self.n:] = -L.T
        self.S[self.n:, :self.n] = L

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return z[:self.n], z[self.n:]

    def skew_apply(self, z: np.ndarray) -> np.ndarray:
        x, y = self.split(z)
        return np.concatenate([-self.L.T @ y, self.L @ x])

    def solve_linearized(self, metric, z, grad_term, t, delta, start=None):
        z = as_vec(z, self.dim)
        gt = as_vec(grad_term, self.dim, name="grad_term")
        if self.closed_form is not None:
            w = self.closed_form(metric, z, gt, t)
            return w, self._certify(metric, z, gt, t, w, method="closed_form")
        if not np.any(self.L) and _is_block_diagonal(metric, self.n):
            return self._decoupled(metric, z, gt, t, delta)
        if self.G.affine_form() is not None:
            return self._kkt(metric, z, gt, t)
        return self._forward_backward_forward(metric, z, gt, t, delta, start)

    def _certify(self, metric, z, gt, t, w, method) -> InexactCertificate:
        v = t * (gt + metric.hess_apply(w - z)) + self.skew_apply(w)
        xi, _, _ = self.G.subdiff(w).nearest(-v, metric)
        e = v + xi
        delta = dual_local_norm(metric, e) / t
        return InexactCertificate(residual=e, delta_achieved=delta, exact=True, method=method)

    def _decoupled(self, metric, z, gt, t, delta):
        parts = []
        residuals = []
        iters = 0
        for fn, s in ((self.g, slice(0, self.n)), (self.psi, slice(self.n, self.dim))):
            w_s, cert = inexact_subsolve(_sub_metric(metric, s), z[s], gt[s], fn, t, delta / math.sqrt(2.0))
            parts.append(w_s)
            residuals.append(cert.residual)
            iters += cert.inner_iterations
        e = np.concatenate(residuals)
        return np.concatenate(parts), InexactCertificate(
            residual=e, delta_achieved=dual_local_norm(metric, e) / t,
            inner_iterations=iters, exact=bool(not np.any(e)), method="decoupled")

    def _kkt(self, metric, z, gt, t):
        # t[gt + H(w − z)] + c + Sw + Bᵀλ = 0,  Bw = d
        form = self.G.affine_form()
        K = t * metric.hessian + self.S
        rhs = t * (metric.hess_apply(z) - gt) - form.c
        if form.B is None:
            w = sla.solve(K, rhs)
        else:
            r = form.B.shape[0]
            KKT = np.block([[K, form.B.T], [form.B, np.zeros((r, r))]])
            sol = sla.solve(KKT, np.concatenate([rhs, form.d]))
            w = sol[:self.dim]
        return w, InexactCertificate(residual=np.zeros(self.dim), delta_achieved=0.0, exact=True, method="kkt")

    def _forward_backward_forward(self, metric, z, gt, t, delta, start):
        """Tseng con métrica de Jacobi D = diag(tH) sobre T(w) = t[gt + H(w−z)] + Sw + ∂G(w)."""
        if not self.G.separable:
            raise CapabilityError("El subsolver de punto silla requiere g y ψ separables")
        D = t * np.array(np.diag(metric.hessian))
        scale = 1.0 / np.sqrt(D)
        K = t * metric.hessian + self.S
        lip = np.linalg.norm(scale[:, None] * K * scale[None, :], 2)
        gamma = 0.9 / lip

        def forward(w):
            return t * (gt + metric.hess_apply(w - z)) + self.skew_apply(w)

        w = self.G.domain_projection(z.copy() if start is None else as_vec(start, self.dim))
        cap = self.max_fbf_iter_factor * (settings.inner_iter_factor * self.dim + settings.inner_iter_base)
        best = math.inf
        Dmetric = Metric.from_diagonal(D / gamma)
        for k in range(1, cap + 1):
            bw = forward(w)
            w_bar = self.G.prox(w - gamma * bw / D, Dmetric)
            bw_bar = forward(w_bar)
            e = bw_bar - bw + D * (w - w_bar) / gamma
            achieved = dual_local_norm(metric, e) / t
            best = min(best, achieved)
            if achieved <= delta:
                return w_bar, InexactCertificate(residual=e, delta_achieved=achieved,
                                                 inner_iterations=k, method="fbf")
            w = w_bar - gamma * (bw_bar - bw) / D
        raise ConvergenceError("Forward-backward-forward sin certificado", best_delta=best, target=delta)

    def member_residual(self, z, w, metric=None):
        z = as_vec(z, self.dim)
        return self.G.subdiff_distance(z, as_vec(w, self.dim, name="w") - self.skew_apply(z), metric)

    def pick_element(self, z):
        z = as_vec(z, self.dim)
        return self.G.subgradient(z) + self.skew_apply(z)


def _is_block_diagonal(metric: Metric, n: int) -> bool:
    return metric.is_diagonal or not np.any(metric.hessian[:n, n:])


def _sub_metric(metric: Metric, s: slice) -> Metric:
    if metric.is_diagonal:
        return Metric.from_diagonal(metric.diag[s])
    return Metric.from_hessian(metric.hessian[s, s])


def subdiff_operator(g: ProxFn) -> SubdifferentialOperator:
    return SubdifferentialOperator(g)


def saddle_operator(g: ProxFn, psi: ProxFn, L, closed_form: Optional[ClosedFormStep] = None) -> SaddleOperator:
    return SaddleOperator(g, psi, L, closed_form=closed_form)


def eps_solution_residual(A: MonotoneOracle, F: BarrierOracle, z) -> Tuple[float, bool]:
    """min_{e ∈ A(z)} ‖e‖*_z; el segundo valor indica si es exacto o una cota superior."""
    z = as_vec(z, F.dim)
    if not F.in_domain(z):
        raise DomainError("eps_solution_residual requiere un punto interior")
    metric = F.metric(z)
    try:
        return A.member_residual(z, np.zeros(F.dim), metric)
    except CapabilityError:
        return dual_local_norm(metric, A.pick_element(z)), False


def monotonicity_gap(A: MonotoneOracle, points: Iterable[np.ndarray]) -> float:
    """min ⟨ξ − ξ̂, z − ẑ⟩ sobre pares de puntos con ξ = pick_element(z)."""
    pts = [as_vec(p, A.dim) for p in points]
    elems = [A.pick_element(p) for p in pts]
    gap = math.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            gap = min(gap, float((elems[i] - elems[j]) @ (pts[i] - pts[j])))
    return gap


__all__ = [
    "MonotoneOracle", "SubdifferentialOperator", "SaddleOperator", "subdiff_operator", "saddle_operator",
    "eps_solution_residual", "monotonicity_gap",
]
