"""Álgebra lineal densa y utilidades de métrica local compartidas por todo el paquete.

Las matrices simétricas se vectorizan por columnas en R^{n²} (sin svec escalado):
el Hessiano de −log det queda como U ↦ Z⁻¹UZ⁻¹ sin factores √2.
"""
import math
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import linalg as sla

from scinc.config import settings
from scinc.utils.errors import DomainError, NumericError, UsageError


def as_vec(x, p: Optional[int] = None, name: str = "z") -> np.ndarray:
    """Convierte a vector float64 1-D y rechaza NaN/Inf."""
    v = np.asarray(x, dtype=float).reshape(-1)
    if p is not None and v.shape[0] != p:
        raise UsageError(f"Dimensión incorrecta para {name}: se esperaba {p}, llegó {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NumericError(f"El vector {name} contiene valores no finitos")
    return v


def sym(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


class Metric:
    """Hessiano ∇²F(z) en un punto fijo junto con su factor de Cholesky inferior."""

    __slots__ = ("hessian", "chol", "diag")

    def __init__(self, hessian: np.ndarray, chol: np.ndarray, diag: Optional[np.ndarray] = None):
        self.hessian = hessian
        self.chol = chol
        self.diag = diag
        for arr in (hessian, chol, diag):
            if arr is not None:
                arr.flags.writeable = False

    @classmethod
    def from_hessian(cls, hessian) -> "Metric":
        H = sym(np.atleast_2d(hessian))
        if not np.all(np.isfinite(H)):
            raise NumericError("Hessiano con valores no finitos")
        try:
            L = sla.cholesky(H, lower=True)
        except sla.LinAlgError as e:
            raise DomainError(f"Hessiano no definido positivo: {e}")
        scale = max(np.linalg.norm(H), np.finfo(float).tiny)
        residual = np.linalg.norm(L @ L.T - H) / scale
        if residual > settings.factor_rtol:
            raise NumericError("Factor de Cholesky impreciso", condition=_cond_from_chol(np.diag(L)),
                               residual=residual)
        return cls(H, L)

    @classmethod
    def from_diagonal(cls, d) -> "Metric":
        d = as_vec(d, name="diagonal")
        if np.any(d <= 0.0):
            raise DomainError("Métrica diagonal con entradas no positivas")
        return cls(np.diag(d), np.diag(np.sqrt(d)), d.copy())

    @classmethod
    def identity(cls, p: int) -> "Metric":
        return cls.from_diagonal(np.ones(p))

    @classmethod
    def block_diagonal(cls, blocks: Iterable["Metric"]) -> "Metric":
        blocks = list(blocks)
        if all(b.is_diagonal for b in blocks):
            return cls.from_diagonal(np.concatenate([b.diag for b in blocks]))
        return cls(sla.block_diag(*[b.hessian for b in blocks]),
                   sla.block_diag(*[b.chol for b in blocks]))

    @property
    def dim(self) -> int:
        return self.hessian.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.diag is not None

    def hess_apply(self, u: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return self.diag * u
        return self.hessian @ u

    def scaled(self, factor: float) -> "Metric":
        """Métrica factor·H (factor > 0), reutilizando el factor de Cholesky."""
        if factor <= 0:
            raise UsageError("El factor de escala de la métrica debe ser positivo")
        diag = None if self.diag is None else factor * self.diag
        return Metric(factor * self.hessian, math.sqrt(factor) * self.chol, diag)

    def condition_estimate(self) -> float:
        return _cond_from_chol(np.diag(self.chol))


def _cond_from_chol(d: np.ndarray) -> float:
    d = np.abs(d)
    return float((d.max() / max(d.min(), np.finfo(float).tiny)) ** 2)


def _check_dim(m: Metric, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != m.dim:
        raise UsageError(f"Dimensión incompatible con la métrica: {u.shape[0]} != {m.dim}")
    return u


def local_norm(m: Metric, u) -> float:
    u = _check_dim(m, u)
    return math.sqrt(max(float(u @ m.hess_apply(u)), 0.0))


def dual_local_norm(m: Metric, v) -> float:
    v = _check_dim(m, v)
    if m.diag is not None:
        return math.sqrt(float(np.sum(v * v / m.diag)))
    w = sla.solve_triangular(m.chol, v, lower=True)
    return float(np.linalg.norm(w))


def solve_tolerance(m: Metric) -> float:
    """Residuo relativo admisible: el de un Cholesky estable, ~ n·eps·cond, nunca por debajo de solve_rtol."""
    return max(settings.solve_rtol, 10.0 * m.dim * np.finfo(float).eps * m.condition_estimate())


def solve_metric(m: Metric, v) -> np.ndarray:
    v = _check_dim(m, v)
    if m.diag is not None:
        return v / m.diag
    w = sla.cho_solve((m.chol, True), v)
    v_norm = np.linalg.norm(v)
    if v_norm == 0.0:
        return w
    # un paso de refinamiento iterativo
    w = w + sla.cho_solve((m.chol, True), v - m.hess_apply(w))
    residual = np.linalg.norm(m.hess_apply(w) - v) / v_norm
    if residual > solve_tolerance(m):
        raise NumericError("Sistema con la métrica singular a precisión de trabajo",
                           condition=m.condition_estimate(), residual=residual)
    return w


def sym_vec(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise UsageError("sym_vec requiere una matriz cuadrada")
    return sym(M).reshape(-1, order="F")


def sym_mat(v, n: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    p = v.shape[0]
    root = math.isqrt(p)
    if root * root != p:
        raise UsageError(f"La longitud {p} no es un cuadrado perfecto")
    if n is not None and n != root:
        raise UsageError(f"Orden incompatible: n={n} pero la longitud es {p}")
    return sym(v.reshape((root, root), order="F"))


def mat_order(p: int) -> int:
    root = math.isqrt(p)
    if root * root != p:
        raise UsageError(f"La longitud {p} no es un cuadrado perfecto")
    return root


def power_max_eigenvalue(apply: Callable[[np.ndarray], np.ndarray], p: int, iterations: int = None) -> float:
    """Estimación de λ_max de un operador SPD por el método de la potencia."""
    iterations = settings.power_iterations if iterations is None else iterations
    # Arranque determinista no alineado con ejes coordenados
    x = np.linspace(1.0, 2.0, p)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(iterations):
        y = apply(x)
        estimate = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
    return max(estimate, float(x @ apply(x)))


def solve_metric_columns(m: Metric, V: np.ndarray) -> np.ndarray:
    """∇²F(z)⁻¹ aplicado a cada columna de V."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        return solve_metric(m, V)
    if m.diag is not None:
        return V / m.diag[:, None]
    return sla.cho_solve((m.chol, True), V)


def inverse_metric(m: Metric) -> Metric:
    if m.diag is not None:
        return Metric.from_diagonal(1.0 / m.diag)
    return Metric.from_hessian(sla.cho_solve((m.chol, True), np.eye(m.dim)))


def as_metric(q, dim: int) -> Metric:
    """Acepta una Metric, un escalar positivo, una diagonal positiva o una matriz SPD."""
    if isinstance(q, Metric):
        if q.dim != dim:
            raise UsageError(f"Métrica de dimensión {q.dim}, se esperaba {dim}")
        return q
    arr = np.asarray(q, dtype=float)
    if arr.ndim == 0:
        return Metric.from_diagonal(np.full(dim, float(arr)))
    if arr.ndim == 1:
        return Metric.from_diagonal(as_vec(arr, dim, name="Q"))
    if arr.shape != (dim, dim):
        raise UsageError(f"Matriz de escala {arr.shape} incompatible con dimensión {dim}")
    return Metric.from_hessian(arr)
