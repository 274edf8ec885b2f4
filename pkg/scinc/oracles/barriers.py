"""Barreras autoconcordantes, sus conjugadas y composiciones.

Cada oráculo es puro: no guarda estado entre evaluaciones.
"""
import math
from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict, List, Optional

import numpy as np
from scipy import linalg as sla

from scinc.utils.errors import CapabilityError, ConvergenceError, DomainError, UsageError
from scinc.utils.linalg import Metric, as_vec, dual_local_norm, solve_metric, sym_mat


class BarrierOracle(ABC):
    kind: ClassVar[str] = "abstract"

    def __init__(self, dim: int, nu: float, log_homogeneous: bool):
        if dim < 1:
            raise UsageError(f"Dimensión de barrera inválida: {dim}")
        self.dim = dim
        self.nu = float(nu)
        self.log_homogeneous = log_homogeneous

    @property
    def kappa(self) -> float:
        if self.log_homogeneous:
            return 1.0
        return self.nu + 2.0 * math.sqrt(self.nu)

    @abstractmethod
    def in_domain(self, z: np.ndarray) -> bool:
        ...

    @abstractmethod
    def _value(self, z: np.ndarray) -> float:
        ...

    @abstractmethod
    def _grad(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _metric(self, z: np.ndarray) -> Metric:
        ...

    def _checked(self, z) -> np.ndarray:
        z = as_vec(z, self.dim)
        if not self.in_domain(z):
            raise DomainError(f"Punto fuera del dominio de la barrera {self.kind}")
        return z

    def value(self, z) -> float:
        return self._value(self._checked(z))

    def grad(self, z) -> np.ndarray:
        return self._grad(self._checked(z))

    def metric(self, z) -> Metric:
        return self._metric(self._checked(z))

    def hessian(self, z) -> np.ndarray:
        return np.array(self.metric(z).hessian)

    def interior_point(self) -> np.ndarray:
        """Un punto interior canónico (centro analítico o rayo central del cono)."""
        raise CapabilityError(f"La barrera {self.kind} no define punto interior canónico")

    # Conjugada de Fenchel, sólo para barreras logarítmicamente homogéneas con forma cerrada
    supports_conjugate: ClassVar[bool] = False

    def in_conj_domain(self, s: np.ndarray) -> bool:
        raise CapabilityError(f"La barrera {self.kind} no tiene conjugada en forma cerrada")

    def conj_value(self, s: np.ndarray) -> float:
        raise CapabilityError(f"La barrera {self.kind} no tiene conjugada en forma cerrada")

    def conj_grad(self, s: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"La barrera {self.kind} no tiene conjugada en forma cerrada")

    def conj_metric(self, s: np.ndarray) -> Metric:
        raise CapabilityError(f"La barrera {self.kind} no tiene conjugada en forma cerrada")

    def to_descriptor(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dim": self.dim}


class OrthantBarrier(BarrierOracle):
    """F(z) = −Σ log z_i sobre el ortante positivo."""

    kind = "orthant"
    supports_conjugate = True

    def __init__(self, p: int):
        super().__init__(p, p, log_homogeneous=True)

    def in_domain(self, z):
        return bool(np.all(z > 0.0))

    def _value(self, z):
        return float(-np.sum(np.log(z)))

    def _grad(self, z):
        return -1.0 / z

    def _metric(self, z):
        return Metric.from_diagonal(1.0 / (z * z))

    def interior_point(self):
        return np.ones(self.dim)

    def in_conj_domain(self, s):
        return bool(np.all(s < 0.0))

    def conj_value(self, s):
        return float(-np.sum(np.log(-s)) - self.dim)

    def conj_grad(self, s):
        return -1.0 / s

    def conj_metric(self, s):
        return Metric.from_diagonal(1.0 / (s * s))


class LogDetBarrier(BarrierOracle):
    """F(Z) = −log det Z sobre S^n_+, con Z vectorizada por columnas en R^{n²}."""

    kind = "logdet"
    supports_conjugate = True

    def __init__(self, n: int):
        if n < 1:
            raise UsageError(f"Orden de matriz inválido: {n}")
        super().__init__(n * n, n, log_homogeneous=True)
        self.n = n

    @staticmethod
    def _cholesky(M: np.ndarray) -> Optional[np.ndarray]:
        try:
            return sla.cholesky(M, lower=True)
        except sla.LinAlgError:
            return None

    def _inverse(self, M: np.ndarray) -> np.ndarray:
        chol = self._cholesky(M)
        if chol is None:
            raise DomainError("Matriz no definida positiva")
        return sla.cho_solve((chol, True), np.eye(self.n))

    def in_domain(self, z):
        return self._cholesky(sym_mat(z, self.n)) is not None

    def _value(self, z):
        chol = self._cholesky(sym_mat(z, self.n))
        return float(-2.0 * np.sum(np.log(np.diag(chol))))

    def _grad(self, z):
        Zi = self._inverse(sym_mat(z, self.n))
        return -_vec(Zi)

    def _metric(self, z):
        Zi = self._inverse(sym_mat(z, self.n))
        # vec(Z⁻¹UZ⁻¹) = (Z⁻¹ ⊗ Z⁻¹) vec(U)
        return Metric.from_hessian(np.kron(Zi, Zi))

    def interior_point(self):
        return _vec(np.eye(self.n))

    def in_conj_domain(self, s):
        return self._cholesky(-sym_mat(s, self.n)) is not None

    def conj_value(self, s):
        chol = self._cholesky(-sym_mat(s, self.n))
        if chol is None:
            raise DomainError("Argumento fuera de −int S^n_+")
        return float(-2.0 * np.sum(np.log(np.diag(chol))) - self.n)

    def conj_grad(self, s):
        # ∇f*(W) = −W⁻¹ = (−W)⁻¹
        return _vec(self._inverse(-sym_mat(s, self.n)))

    def conj_metric(self, s):
        Wi = self._inverse(-sym_mat(s, self.n))
        return Metric.from_hessian(np.kron(Wi, Wi))

    def to_descriptor(self):
        return {"kind": self.kind, "n": self.n}


class BoxBarrier(BarrierOracle):
    """φ(y) = −Σ log(1 − y_i²) sobre la bola unitaria de ‖·‖∞."""

    kind = "box"

    def __init__(self, p: int):
        super().__init__(p, 2 * p, log_homogeneous=False)

    def in_domain(self, z):
        return bool(np.all(np.abs(z) < 1.0))

    def _value(self, z):
        return float(-np.sum(np.log1p(-z * z)))

    def _grad(self, z):
        return 2.0 * z / (1.0 - z * z)

    def _metric(self, z):
        w = 1.0 - z * z
        return Metric.from_diagonal(2.0 * (1.0 + z * z) / (w * w))

    def interior_point(self):
        return np.zeros(self.dim)


class LorentzBarrier(BarrierOracle):
    """F(z, t) = −log(t² − ‖z‖²); el último componente es t."""

    kind = "lorentz"
    supports_conjugate = True

    def __init__(self, p: int):
        super().__init__(p + 1, 2, log_homogeneous=True)
        self.p = p
        self._J = np.ones(p + 1)
        self._J[:p] = -1.0

    def _quad(self, w):
        return float(np.sum(self._J * w * w))

    def in_domain(self, z):
        return bool(z[-1] > 0.0 and self._quad(z) > 0.0)

    def _value(self, z):
        return -math.log(self._quad(z))

    def _grad(self, z):
        return -2.0 * self._J * z / self._quad(z)

    def _hess(self, w):
        q = self._quad(w)
        Jw = self._J * w
        return -2.0 * np.diag(self._J) / q + 4.0 * np.outer(Jw, Jw) / (q * q)

    def _metric(self, z):
        return Metric.from_hessian(self._hess(z))

    def interior_point(self):
        e = np.zeros(self.dim)
        e[-1] = 1.0
        return e

    def in_conj_domain(self, s):
        return bool(s[-1] < 0.0 and self._quad(s) > 0.0)

    def conj_value(self, s):
        return -math.log(self._quad(s)) + 2.0 * math.log(2.0) - 2.0

    def conj_grad(self, s):
        return -2.0 * self._J * s / self._quad(s)

    def conj_metric(self, s):
        return Metric.from_hessian(self._hess(s))

    def to_descriptor(self):
        return {"kind": self.kind, "p": self.p}


class SumBarrier(BarrierOracle):
    """Barrera separable F(z₁, …, z_m) = Σ F_i(z_i) sobre bloques disjuntos."""

    kind = "sum"

    def __init__(self, parts: List[BarrierOracle]):
        if not parts:
            raise UsageError("La suma de barreras requiere al menos un bloque")
        self.parts = list(parts)
        super().__init__(sum(b.dim for b in parts), sum(b.nu for b in parts),
                         log_homogeneous=all(b.log_homogeneous for b in parts))
        offsets = np.cumsum([0] + [b.dim for b in parts])
        self.slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]

    @property
    def supports_conjugate(self):
        return all(b.supports_conjugate for b in self.parts)

    def split(self, z: np.ndarray) -> List[np.ndarray]:
        return [z[s] for s in self.slices]

    def in_domain(self, z):
        return all(b.in_domain(zi) for b, zi in zip(self.parts, self.split(z)))

    def _value(self, z):
        return float(sum(b._value(zi) for b, zi in zip(self.parts, self.split(z))))

    def _grad(self, z):
        return np.concatenate([b._grad(zi) for b, zi in zip(self.parts, self.split(z))])

    def _metric(self, z):
        return Metric.block_diagonal(b._metric(zi) for b, zi in zip(self.parts, self.split(z)))

    def interior_point(self):
        return np.concatenate([b.interior_point() for b in self.parts])

    def in_conj_domain(self, s):
        return all(b.in_conj_domain(si) for b, si in zip(self.parts, self.split(s)))

    def conj_value(self, s):
        return float(sum(b.conj_value(si) for b, si in zip(self.parts, self.split(s))))

    def conj_grad(self, s):
        return np.concatenate([b.conj_grad(si) for b, si in zip(self.parts, self.split(s))])

    def conj_metric(self, s):
        return Metric.block_diagonal(b.conj_metric(si) for b, si in zip(self.parts, self.split(s)))

    def to_descriptor(self):
        return {"kind": self.kind, "parts": [b.to_descriptor() for b in self.parts]}


class ConjugateBarrier(BarrierOracle):
    """f* sobre −int K* para una barrera base f logarítmicamente homogénea."""

    kind = "conjugate"

    def __init__(self, base: BarrierOracle):
        if not base.log_homogeneous or not base.supports_conjugate:
            raise CapabilityError(f"La barrera {base.kind} no admite conjugada en forma cerrada")
        super().__init__(base.dim, base.nu, log_homogeneous=True)
        self.base = base

    def in_domain(self, z):
        return self.base.in_conj_domain(z)

    def _value(self, z):
        return self.base.conj_value(z)

    def _grad(self, z):
        return self.base.conj_grad(z)

    def _metric(self, z):
        return self.base.conj_metric(z)

    def interior_point(self):
        return -self.base.interior_point()

    def to_descriptor(self):
        return {"kind": self.kind, "base": self.base.to_descriptor()}


class DualFeasibleBarrier(BarrierOracle):
    """φ(y) = f*(c − L*y) sobre el conjunto dual factible {y : L*y − c ∈ int K*}.

    L se guarda como matriz p×n (x ∈ R^n ↦ Lx ∈ R^p), de modo que L* = Lᵀ.
    """

    kind = "dual_feasible"

    def __init__(self, f: BarrierOracle, L: np.ndarray, c_obj: np.ndarray):
        self.conj = ConjugateBarrier(f)
        L = np.atleast_2d(np.asarray(L, dtype=float))
        if L.shape[1] != f.dim:
            raise UsageError(f"L tiene {L.shape[1]} columnas pero la barrera vive en R^{f.dim}")
        super().__init__(L.shape[0], f.nu, log_homogeneous=False)
        self.f = f
        self.L = L
        self.c_obj = as_vec(c_obj, f.dim, name="c")

    @property
    def kappa(self) -> float:
        # φ hereda el parámetro de f*; su conjunto no es un cono
        return self.nu + 2.0 * math.sqrt(self.nu)

    def slack(self, y: np.ndarray) -> np.ndarray:
        return self.c_obj - self.L.T @ y

    def in_domain(self, z):
        return self.conj.in_domain(self.slack(z))

    def _value(self, z):
        return self.conj._value(self.slack(z))

    def _grad(self, z):
        return -self.L @ self.conj._grad(self.slack(z))

    def _metric(self, z):
        Hs = self.conj._metric(self.slack(z))
        if Hs.is_diagonal:
            H = (self.L * Hs.diag) @ self.L.T
        else:
            H = self.L @ Hs.hessian @ self.L.T
        return Metric.from_hessian(H)

    def to_descriptor(self):
        return {"kind": self.kind, "base": self.f.to_descriptor()}


def _vec(M: np.ndarray) -> np.ndarray:
    M = 0.5 * (M + M.T)
    return M.reshape(-1, order="F")


def barrier_orthant(p: int) -> OrthantBarrier:
    return OrthantBarrier(p)


def barrier_logdet(n: int) -> LogDetBarrier:
    return LogDetBarrier(n)


def barrier_box(p: int) -> BoxBarrier:
    return BoxBarrier(p)


def barrier_lorentz(p: int) -> LorentzBarrier:
    return LorentzBarrier(p)


def barrier_sum(f: BarrierOracle, g: BarrierOracle) -> SumBarrier:
    return SumBarrier([f, g])


def conjugate_of(f: BarrierOracle) -> ConjugateBarrier:
    return ConjugateBarrier(f)


def dual_feasible_barrier(f: BarrierOracle, L, c_obj) -> DualFeasibleBarrier:
    return DualFeasibleBarrier(f, L, c_obj)


def analytical_center_residual(f: BarrierOracle, z) -> float:
    return dual_local_norm(f.metric(z), f.grad(z))


def minimize_barrier(f: BarrierOracle, z0, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Newton amortiguado z ← z − (1+λ)⁻¹∇²F(z)⁻¹∇F(z) hacia el centro analítico."""
    z = f._checked(z0)
    lam = math.inf
    for _ in range(max_iter):
        m = f.metric(z)
        step = solve_metric(m, f.grad(z))
        lam = math.sqrt(max(float(step @ m.hess_apply(step)), 0.0))
        if lam <= tol:
            return z
        z = z - step / (1.0 + lam)
    raise ConvergenceError("Newton amortiguado sin alcanzar el centro analítico",
                           best_delta=lam, tol=tol, max_iter=max_iter)


def barrier_from_descriptor(desc: Dict[str, Any]) -> BarrierOracle:
    kind = desc.get("kind")
    if kind == "orthant":
        return OrthantBarrier(int(desc["dim"]))
    if kind == "logdet":
        return LogDetBarrier(int(desc["n"]))
    if kind == "box":
        return BoxBarrier(int(desc["dim"]))
    if kind == "lorentz":
        return LorentzBarrier(int(desc["p"]))
    if kind == "sum":
        return SumBarrier([barrier_from_descriptor(d) for d in desc["parts"]])
    raise UsageError(f"Descriptor de barrera desconocido: {kind!r}")


__all__ = [
    "BarrierOracle", "OrthantBarrier", "LogDetBarrier", "BoxBarrier", "LorentzBarrier", "SumBarrier",
    "ConjugateBarrier", "DualFeasibleBarrier", "barrier_orthant", "barrier_logdet", "barrier_box",
    "barrier_lorentz", "barrier_sum", "conjugate_of", "dual_feasible_barrier",
    "analytical_center_residual", "minimize_barrier", "barrier_from_descriptor",
]
