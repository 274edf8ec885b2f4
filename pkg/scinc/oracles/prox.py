"""Operadores proximales escalados y el subsolver certificado de los subproblemas de Newton.

Convención: prox(x, Q) = argmin_u g(u) + ½‖u − x‖²_Q, donde Q es una Metric,
un escalar positivo o una diagonal positiva.
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

from scinc.config import settings
from scinc.models.schemas import InexactCertificate
from scinc.utils.errors import CapabilityError, ConvergenceError, DomainError, UsageError
from scinc.utils.linalg import (
    Metric, as_metric, as_vec, dual_local_norm, inverse_metric, power_max_eigenvalue,
    solve_metric, solve_metric_columns,
)

FEASIBILITY_TOL = 1e-9


class AffineForm(NamedTuple):
    """g(u) = ⟨c,u⟩ + δ_{Bu=d}(u); B es None cuando no hay restricción."""
    B: Optional[np.ndarray]
    d: Optional[np.ndarray]
    c: np.ndarray


@dataclass
class ActivePattern:
    fixed: np.ndarray   # máscara de coordenadas fijas (pliegue o cota)
    values: np.ndarray  # valor fijado (o el actual en las libres)
    slope: np.ndarray   # gradiente local de g en las coordenadas libres


@dataclass
class SubdiffSet:
    """∂g(x) = {offset + Pθ : lo ≤ θ ≤ hi}; P=None significa identidad."""
    offset: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    P: Optional[np.ndarray] = None

    def nearest(self, w: np.ndarray, metric: Optional[Metric] = None) -> Tuple[np.ndarray, float, bool]:
        """Elemento de ∂g(x) más cercano a w en ‖·‖*_metric (euclídea si metric es None).

        Devuelve (ξ, distancia, exacto).
        """
        r = w - self.offset
        if self.P is not None and self.P.shape[1] == 0:
            return self.offset.copy(), _dual_norm(metric, r), True

        unbounded = np.all(np.isneginf(self.lo)) and np.all(np.isposinf(self.hi))
        if self.P is None and (metric is None or metric.is_diagonal):
            theta = np.clip(r, self.lo, self.hi)
            return self.offset + theta, _dual_norm(metric, r - theta), True
        if unbounded:
            P = np.eye(r.shape[0]) if self.P is None else self.P
            theta = _metric_least_squares(metric, P, r)
            res = r - P @ theta
            return w - res, _dual_norm(metric, res), True
        return self._bounded_projection(r, metric)

    def _bounded_projection(self, r: np.ndarray, metric: Optional[Metric]):
        P = np.eye(r.shape[0]) if self.P is None else self.P
        if np.all(self.lo == self.hi):
            theta = self.lo.copy()
            return self.offset + P @ theta, _dual_norm(metric, r - P @ theta), True
        apply_inv = (lambda v: v) if metric is None else (lambda v: solve_metric_columns(metric, v))

        def objective(theta):
            res = r - P @ theta
            hres = apply_inv(res)
            return 0.5 * float(res @ hres), -(P.T @ hres)

        theta0 = np.clip(P.T @ r if self.P is None else np.zeros(P.shape[1]), self.lo, self.hi)
        bounds = [(None if np.isneginf(a) else a, None if np.isposinf(b) else b)
                  for a, b in zip(self.lo, self.hi)]
        result = minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                          options={"maxiter": 5000, "ftol": 1e-20, "gtol": 1e-14})
        theta = np.clip(result.x, self.lo, self.hi)
        res = r - P @ theta
        # L-BFGS-B sólo acota la distancia por arriba
        return self.offset + P @ theta, _dual_norm(metric, res), False


def _dual_norm(metric: Optional[Metric], v: np.ndarray) -> float:
    if metric is None:
        return float(np.linalg.norm(v))
    return dual_local_norm(metric, v)


def _metric_least_squares(metric: Optional[Metric], P: np.ndarray, r: np.ndarray) -> np.ndarray:
    # min_θ ‖r − Pθ‖*_H con H = RRᵀ  ⟺  min ‖R⁻¹(r − Pθ)‖₂
    if metric is None:
        A, b = P, r
    elif metric.is_diagonal:
        s = 1.0 / np.sqrt(metric.diag)
        A, b = P * s[:, None], r * s
    else:
        A = sla.solve_triangular(metric.chol, P, lower=True)
        b = sla.solve_triangular(metric.chol, r, lower=True)
    theta, *_ = np.linalg.lstsq(A, b, rcond=None)
    return theta


def _affine_linear_prox(x: np.ndarray, Q: Metric, form: AffineForm) -> np.ndarray:
    v = x - solve_metric(Q, form.c)
    if form.B is None:
        return v
    QiBt = solve_metric_columns(Q, form.B.T)
    S = form.B @ QiBt
    lam = sla.solve(S, form.B @ v - form.d, assume_a="pos")
    return v - QiBt @ lam


class ProxFn(ABC):
    """Función convexa propia y cerrada con prox escalado y consulta de subdiferencial."""

    kind: ClassVar[str] = "abstract"
    separable: ClassVar[bool] = False

    def __init__(self, dim: int):
        if dim < 1:
            raise UsageError(f"Dimensión inválida para la función prox: {dim}")
        self.dim = dim

    @abstractmethod
    def value(self, x) -> float:
        ...

    @abstractmethod
    def subdiff(self, x) -> SubdiffSet:
        ...

    def affine_form(self) -> Optional[AffineForm]:
        return None

    def _prox_diag(self, x: np.ndarray, d: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{self.kind} no tiene prox en forma cerrada con escala diagonal")

    def supports_prox(self, q: Metric) -> bool:
        return self.affine_form() is not None or (q.is_diagonal and self.separable)

    def prox(self, x, q) -> np.ndarray:
        x = as_vec(x, self.dim, name="x")
        Q = as_metric(q, self.dim)
        form = self.affine_form()
        if form is not None:
            return _affine_linear_prox(x, Q, form)
        if not Q.is_diagonal:
            raise CapabilityError(f"{self.kind} requiere escala diagonal; usar inexact_subsolve")
        return self._prox_diag(x, Q.diag)

    def subgradient(self, x) -> np.ndarray:
        """Subgradiente de norma mínima."""
        xi, _, _ = self.subdiff(x).nearest(np.zeros(self.dim))
        return xi

    def subdiff_distance(self, x, w, metric: Optional[Metric] = None) -> Tuple[float, bool]:
        _, dist, exact = self.subdiff(x).nearest(as_vec(w, self.dim, name="w"), metric)
        return dist, exact

    def domain_projection(self, x: np.ndarray) -> np.ndarray:
        return x

    def active_pattern(self, x: np.ndarray) -> Optional[ActivePattern]:
        return None

    # Conjugada: sólo lo que necesita la recuperación primal
    def conj_value(self, y) -> float:
        raise CapabilityError(f"{self.kind} no expone conjugada")

    def conj_subdiff_bounds(self, y) -> Tuple[np.ndarray, np.ndarray]:
        raise CapabilityError(f"∂g* de {self.kind} no es una caja; no se puede proyectar")

    @abstractmethod
    def to_descriptor(self) -> Dict[str, Any]:
        ...


class ZeroFn(ProxFn):
    kind = "zero"
    separable = True

    def value(self, x):
        return 0.0

    def affine_form(self):
        return AffineForm(None, None, np.zeros(self.dim))

    def _prox_diag(self, x, d):
        return x.copy()

    def subdiff(self, x):
        z = np.zeros(self.dim)
        return SubdiffSet(z, np.zeros(0), np.zeros(0), P=np.zeros((self.dim, 0)))

    def active_pattern(self, x):
        return ActivePattern(np.zeros(self.dim, dtype=bool), x.copy(), np.zeros(self.dim))

    def conj_value(self, y):
        return 0.0 if np.all(y == 0.0) else math.inf

    def conj_subdiff_bounds(self, y):
        if np.any(y != 0.0):
            raise DomainError("y fuera del dominio de g* = δ_{0}")
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def to_descriptor(self):
        return {"kind": self.kind, "dim": self.dim}


class LinearFn(ProxFn):
    """g(x) = ⟨c, x⟩."""

    kind = "linear"
    separable = True

    def __init__(self, c):
        c = as_vec(c, name="c")
        super().__init__(c.shape[0])
        self.c = c

    def value(self, x):
        return float(self.c @ as_vec(x, self.dim))

    def affine_form(self):
        return AffineForm(None, None, self.c)

    def _prox_diag(self, x, d):
        return x - self.c / d

    def subdiff(self, x):
        return SubdiffSet(self.c.copy(), np.zeros(0), np.zeros(0), P=np.zeros((self.dim, 0)))

    def active_pattern(self, x):
        return ActivePattern(np.zeros(self.dim, dtype=bool), x.copy(), self.c.copy())

    def conj_subdiff_bounds(self, y):
        if not np.allclose(y, self.c, rtol=0.0, atol=FEASIBILITY_TOL):
            raise DomainError("y fuera del dominio de g* = δ_{c}")
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)

    def to_descriptor(self):
        return {"kind": self.kind, "c": self.c.tolist()}


class PiecewiseLinearFn(ProxFn):
    """g(x) = Σ ρ_i|x_i − m_i| + δ_{[l,u]}(x): cubre ℓ1 ponderada con offset y cajas."""

    kind = "l1_box"
    separable = True

    def __init__(self, rho, offset=None, lower=None, upper=None, dim: Optional[int] = None):
        rho_arr = np.asarray(rho, dtype=float)
        if dim is None:
            sizes = [np.size(a) for a in (rho, offset, lower, upper) if a is not None and np.ndim(a) > 0]
            dim = max(sizes) if sizes else 1
        super().__init__(dim)
        self.rho = np.broadcast_to(rho_arr, (dim,)).astype(float)
        self.offset = np.zeros(dim) if offset is None else np.broadcast_to(np.asarray(offset, float), (dim,)).astype(float)
        self.lower = np.full(dim, -np.inf) if lower is None else np.broadcast_to(np.asarray(lower, float), (dim,)).astype(float)
        self.upper = np.full(dim, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, float), (dim,)).astype(float)
        if np.any(self.rho < 0.0):
            raise UsageError("Pesos ρ negativos en la norma ℓ1")
        if np.any(self.lower > self.upper):
            raise UsageError("Cotas inconsistentes: lower > upper")

    def _in_bounds(self, x):
        return bool(np.all(x >= self.lower - FEASIBILITY_TOL) and np.all(x <= self.upper + FEASIBILITY_TOL))

    def value(self, x):
        x = as_vec(x, self.dim)
        if not self._in_bounds(x):
            return math.inf
        return float(np.sum(self.rho * np.abs(x - self.offset)))

    def affine_form(self):
        # caja degenerada l = u: g es la indicatriz de un punto
        if np.all(self.lower == self.upper):
            return AffineForm(np.eye(self.dim), self.lower.copy(), np.zeros(self.dim))
        return None

    def _prox_diag(self, x, d):
        r = x - self.offset
        shrunk = np.sign(r) * np.maximum(np.abs(r) - self.rho / d, 0.0)
        return np.clip(self.offset + shrunk, self.lower, self.upper)

    def domain_projection(self, x):
        return np.clip(x, self.lower, self.upper)

    def subdiff(self, x):
        x = as_vec(x, self.dim)
        if not self._in_bounds(x):
            raise DomainError(f"{self.kind}: punto fuera de las cotas, ∂g vacío")
        diff = x - self.offset
        lo = np.where(diff > 0.0, self.rho, -self.rho)
        hi = np.where(diff < 0.0, -self.rho, self.rho)
        at_lo = x <= self.lower
        at_hi = x >= self.upper
        lo = np.where(at_lo, -np.inf, lo)
        hi = np.where(at_hi, np.inf, hi)
        return SubdiffSet(np.zeros(self.dim), lo, hi)

    def active_pattern(self, x):
        tol = 1e-12 * (1.0 + np.abs(x))
        kink = (self.rho > 0.0) & (np.abs(x - self.offset) <= tol)
        at_lo = x <= self.lower + tol
        at_hi = x >= self.upper - tol
        values = np.where(at_lo, self.lower, np.where(at_hi, self.upper, np.where(kink, self.offset, x)))
        return ActivePattern(kink | at_lo | at_hi, values, self.rho * np.sign(x - self.offset))

    def conj_value(self, y):
        y = as_vec(y, self.dim)
        # g*(y) = −min_{w∈[l,u]} ρ|w−m| − yw, mínimo en un extremo o en clip(m)
        total = 0.0
        for yi, ri, mi, li, ui in zip(y, self.rho, self.offset, self.lower, self.upper):
            if (np.isposinf(ui) and yi > ri) or (np.isneginf(li) and yi < -ri):
                return math.inf
            cands = [min(max(mi, li), ui)] + [b for b in (li, ui) if np.isfinite(b)]
            total += max(yi * w - ri * abs(w - mi) for w in cands)
        return float(total)

    def conj_subdiff_bounds(self, y):
        # ∂g*(y) = argmin_{w∈[l,u]} ρ|w−m| − yw, un intervalo por coordenada
        y = as_vec(y, self.dim)
        cm = np.clip(self.offset, self.lower, self.upper)
        lo, hi = cm.copy(), cm.copy()
        below, above = y < -self.rho, y > self.rho
        lo[below], hi[below] = self.lower[below], self.lower[below]
        lo[above], hi[above] = self.upper[above], self.upper[above]
        flat_left = (y == -self.rho) & ~(self.rho == 0.0)
        flat_right = (y == self.rho) & ~(self.rho == 0.0)
        both = (self.rho == 0.0) & (y == 0.0)
        lo[flat_left] = self.lower[flat_left]
        hi[flat_right] = self.upper[flat_right]
        lo[both], hi[both] = self.lower[both], self.upper[both]
        if np.any(np.isinf(lo) & np.isinf(hi) & (lo == hi)):
            raise DomainError("y fuera del dominio de g*: ∂g*(y) vacío")
        return lo, hi

    def to_descriptor(self):
        return {
            "kind": self.kind,
            "rho": self.rho.tolist(),
            "offset": self.offset.tolist(),
            "lower": _encode_bounds(self.lower),
            "upper": _encode_bounds(self.upper),
        }


class WeightedL1(PiecewiseLinearFn):
    kind = "l1"

    def __init__(self, rho, offset=None, dim: Optional[int] = None):
        super().__init__(rho, offset=offset, dim=dim)


class BoxIndicator(PiecewiseLinearFn):
    kind = "box"

    def __init__(self, lower, upper, dim: Optional[int] = None):
        super().__init__(0.0, lower=lower, upper=upper, dim=dim)


class AffineIndicator(ProxFn):
    """δ_{x : Bx = d}; B de rango completo por filas."""

    kind = "affine"

    def __init__(self, B, d):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        super().__init__(B.shape[1])
        self.B = B
        self.d = as_vec(d, B.shape[0], name="d")
        if np.linalg.matrix_rank(B) < B.shape[0]:
            raise UsageError("La matriz B de la restricción afín no tiene rango completo por filas")

    def value(self, x):
        x = as_vec(x, self.dim)
        gap = np.linalg.norm(self.B @ x - self.d)
        return 0.0 if gap <= FEASIBILITY_TOL * (1.0 + np.linalg.norm(self.d)) else math.inf

    def affine_form(self):
        return AffineForm(self.B, self.d, np.zeros(self.dim))

    def subdiff(self, x):
        if not math.isfinite(self.value(x)):
            raise DomainError("Punto fuera del subespacio afín, ∂g vacío")
        r = self.B.shape[0]
        return SubdiffSet(np.zeros(self.dim), np.full(r, -np.inf), np.full(r, np.inf), P=self.B.T.copy())

    def domain_projection(self, x):
        return _affine_linear_prox(x, Metric.identity(self.dim), self.affine_form())

    def to_descriptor(self):
        return {"kind": self.kind, "B": self.B.tolist(), "d": self.d.tolist()}


class TraceAffine(AffineIndicator):
    """Parte afín {X : trace(X) = 1} del símplex espectral, sobre vec(X) ∈ R^{n²}."""

    kind = "trace_affine"

    def __init__(self, n: int):
        self.n = n
        super().__init__(np.eye(n).reshape(1, -1, order="F"), [1.0])

    def to_descriptor(self):
        return {"kind": self.kind, "n": self.n}


class LinearShift(ProxFn):
    """g(x) + ⟨c, x⟩."""

    kind = "shift"

    def __init__(self, base: ProxFn, c):
        super().__init__(base.dim)
        self.base = base
        self.c = as_vec(c, base.dim, name="c")
        self.separable = base.separable

    def value(self, x):
        return self.base.value(x) + float(self.c @ as_vec(x, self.dim))

    def affine_form(self):
        form = self.base.affine_form()
        if form is None:
            return None
        return AffineForm(form.B, form.d, form.c + self.c)

    def prox(self, x, q):
        Q = as_metric(q, self.dim)
        return self.base.prox(as_vec(x, self.dim) - solve_metric(Q, self.c), Q)

    def supports_prox(self, q):
        return self.base.supports_prox(q)

    def subdiff(self, x):
        s = self.base.subdiff(x)
        return SubdiffSet(s.offset + self.c, s.lo, s.hi, s.P)

    def domain_projection(self, x):
        return self.base.domain_projection(x)

    def active_pattern(self, x):
        pat = self.base.active_pattern(x)
        if pat is None:
            return None
        return ActivePattern(pat.fixed, pat.values, pat.slope + self.c)

    def conj_value(self, y):
        return self.base.conj_value(as_vec(y, self.dim) - self.c)

    def conj_subdiff_bounds(self, y):
        return self.base.conj_subdiff_bounds(as_vec(y, self.dim) - self.c)

    def to_descriptor(self):
        return {"kind": self.kind, "base": self.base.to_descriptor(), "c": self.c.tolist()}


class SeparableSum(ProxFn):
    """g(x₁, …, x_m) = Σ g_i(x_i) sobre bloques contiguos."""

    kind = "separable_sum"

    def __init__(self, parts: List[ProxFn]):
        if not parts:
            raise UsageError("La suma separable requiere al menos un bloque")
        super().__init__(sum(p.dim for p in parts))
        self.parts = list(parts)
        offsets = np.cumsum([0] + [p.dim for p in parts])
        self.slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
        self.separable = all(p.separable for p in parts)

    def value(self, x):
        x = as_vec(x, self.dim)
        return float(sum(p.value(x[s]) for p, s in zip(self.parts, self.slices)))

    def affine_form(self):
        forms = [p.affine_form() for p in self.parts]
        if any(f is None for f in forms):
            return None
        c = np.concatenate([f.c for f in forms])
        rows = [(f.B, f.d, p.dim) for f, p in zip(forms, self.parts)]
        if all(B is None for B, _, _ in rows):
            return AffineForm(None, None, c)
        blocks = [B if B is not None else np.zeros((0, n)) for B, _, n in rows]
        B = sla.block_diag(*blocks)
        d = np.concatenate([dd for B_, dd, _ in rows if B_ is not None])
        return AffineForm(B, d, c)

    def supports_prox(self, q):
        if self.affine_form() is not None:
            return True
        return q.is_diagonal and all(p.supports_prox(Metric.from_diagonal(q.diag[s]))
                                     for p, s in zip(self.parts, self.slices))

    def prox(self, x, q):
        x = as_vec(x, self.dim, name="x")
        Q = as_metric(q, self.dim)
        form = self.affine_form()
        if form is not None:
            return _affine_linear_prox(x, Q, form)
        if not Q.is_diagonal:
            raise CapabilityError("Suma separable con escala densa: usar inexact_subsolve")
        return np.concatenate([p.prox(x[s], Q.diag[s]) for p, s in zip(self.parts, self.slices)])

    def subdiff(self, x):
        x = as_vec(x, self.dim)
        sets = [p.subdiff(x[s]) for p, s in zip(self.parts, self.slices)]
        offset = np.concatenate([s.offset for s in sets])
        lo = np.concatenate([s.lo for s in sets])
        hi = np.concatenate([s.hi for s in sets])
        if all(s.P is None for s in sets):
            return SubdiffSet(offset, lo, hi)
        blocks = [np.eye(p.dim) if s.P is None else s.P for s, p in zip(sets, self.parts)]
        return SubdiffSet(offset, lo, hi, P=sla.block_diag(*blocks))

    def domain_projection(self, x):
        return np.concatenate([p.domain_projection(x[s]) for p, s in zip(self.parts, self.slices)])

    def active_pattern(self, x):
        pats = [p.active_pattern(x[s]) for p, s in zip(self.parts, self.slices)]
        if any(p is None for p in pats):
            return None
        return ActivePattern(np.concatenate([p.fixed for p in pats]),
                             np.concatenate([p.values for p in pats]),
                             np.concatenate([p.slope for p in pats]))

    def conj_value(self, y):
        y = as_vec(y, self.dim)
        return float(sum(p.conj_value(y[s]) for p, s in zip(self.parts, self.slices)))

    def conj_subdiff_bounds(self, y):
        y = as_vec(y, self.dim)
        pairs = [p.conj_subdiff_bounds(y[s]) for p, s in zip(self.parts, self.slices)]
        return np.concatenate([a for a, _ in pairs]), np.concatenate([b for _, b in pairs])

    def to_descriptor(self):
        return {"kind": self.kind, "parts": [p.to_descriptor() for p in self.parts]}


class ConjugateFn(ProxFn):
    """g*(y) para g separable; el prox usa la descomposición de Moreau escalada."""

    kind = "conjugate"

    def __init__(self, base: ProxFn):
        super().__init__(base.dim)
        self.base = base
        self.separable = base.separable

    def value(self, y):
        return self.base.conj_value(y)

    def supports_prox(self, q):
        return self.base.supports_prox(inverse_metric(q))

    def prox(self, x, q):
        # prox^Q_{g*}(x) = x − Q⁻¹ prox^{Q⁻¹}_g(Qx)
        x = as_vec(x, self.dim, name="x")
        Q = as_metric(q, self.dim)
        w = self.base.prox(Q.hess_apply(x), inverse_metric(Q))
        return x - solve_metric(Q, w)

    def subdiff(self, y):
        lo, hi = self.base.conj_subdiff_bounds(y)
        return SubdiffSet(np.zeros(self.dim), lo, hi)

    def to_descriptor(self):
        return {"kind": self.kind, "base": self.base.to_descriptor()}


def _encode_bounds(a: np.ndarray) -> List[Any]:
    return [None if not np.isfinite(v) else float(v) for v in a]


def _decode_bounds(values: List[Any], sign: float) -> np.ndarray:
    return np.array([sign * np.inf if v is None else float(v) for v in values])


def prox_from_descriptor(desc: Dict[str, Any]) -> ProxFn:
    kind = desc.get("kind")
    if kind == "zero":
        return ZeroFn(int(desc["dim"]))
    if kind == "linear":
        return LinearFn(desc["c"])
    if kind in ("l1_box", "l1", "box"):
        rho = np.asarray(desc["rho"], dtype=float)
        lower = _decode_bounds(desc["lower"], -1.0)
        upper = _decode_bounds(desc["upper"], 1.0)
        if kind == "l1":
            return WeightedL1(rho, offset=desc["offset"])
        if kind == "box":
            return BoxIndicator(lower, upper)
        return PiecewiseLinearFn(rho, desc["offset"], lower, upper)
    if kind == "affine":
        return AffineIndicator(desc["B"], desc["d"])
    if kind == "trace_affine":
        return TraceAffine(int(desc["n"]))
    if kind == "shift":
        return LinearShift(prox_from_descriptor(desc["base"]), desc["c"])
    if kind == "separable_sum":
        return SeparableSum([prox_from_descriptor(d) for d in desc["parts"]])
    if kind == "conjugate":
        return ConjugateFn(prox_from_descriptor(desc["base"]))
    raise UsageError(f"Descriptor de función prox desconocido: {kind!r}")


def prox_scaled(g: ProxFn, Q, x) -> np.ndarray:
    return g.prox(x, Q)


def prox_psi_from_g(g: ProxFn, b, Q, y) -> np.ndarray:
    """prox de ψ = g* + ⟨b,·⟩ en la métrica Q⁻¹: y − Qb − Q·prox_{Q⁻¹g}(Q⁻¹y − b)."""
    y = as_vec(y, g.dim, name="y")
    b = as_vec(b, g.dim, name="b")
    Qm = as_metric(Q, g.dim)
    w = g.prox(solve_metric(Qm, y) - b, Qm)
    return y - Qm.hess_apply(b + w)


def inexact_subsolve(metric: Metric, z, grad_term, g: ProxFn, t: float, delta_target: float,
                     start=None, max_iter: Optional[int] = None) -> Tuple[np.ndarray, InexactCertificate]:
    """Resuelve 0 ∈ t[grad_term + H(w − z)] + ∂g(w) con certificado dist_z(0, Â_t(w; z)) ≤ t·δ."""
    if not t > 0.0:
        raise UsageError(f"t debe ser positivo, llegó {t}")
    if delta_target < 0.0:
        raise UsageError("delta_target debe ser no negativo")
    p = metric.dim
    z = as_vec(z, p)
    gt = as_vec(grad_term, p, name="grad_term")

    if g.supports_prox(metric):
        # w = prox^{tH}_g(z − H⁻¹gt); por optimalidad tH(x − w) ∈ ∂g(w) y e = 0
        w = g.prox(z - solve_metric(metric, gt), metric.scaled(t))
        return w, InexactCertificate(residual=np.zeros(p), delta_achieved=0.0, exact=True)

    solver = AcceleratedProxGradient(metric, z, gt, g, t)
    return solver.run(delta_target, start=start, max_iter=max_iter)


class AcceleratedProxGradient:
    """FISTA con precondicionador de Jacobi, reinicio por mapa gradiente y pulido por conjunto activo.

    Modelo: s(w) = ⟨gt, w − z⟩ + ½‖w − z‖²_H, objetivo s(w) + t⁻¹g(w).
    Con D = diag(H) y paso 1/Λ en la métrica D:
        w⁺ = prox^{tΛD}_g(y − (ΛD)⁻¹∇s(y))
    y la optimalidad del prox da ΛD(y − w⁺) − ∇s(y) ∈ t⁻¹∂g(w⁺). Sumando ∇s(w⁺):
        e := t[∇s(w⁺) − ∇s(y) + ΛD(y − w⁺)] = t(ΛD − H)(y − w⁺) ∈ t[gt + H(w⁺ − z)] + ∂g(w⁺),
    que es el residuo certificado; δ = ‖e‖*_H / t.
    """

    polish_every = 10

    def __init__(self, metric: Metric, z: np.ndarray, gt: np.ndarray, g: ProxFn, t: float):
        self.H = metric
        self.z = z
        self.gt = gt
        self.g = g
        self.t = t
        self.D = np.array(np.diag(metric.hessian))
        scale = 1.0 / np.sqrt(self.D)
        self.lam = power_max_eigenvalue(lambda u: scale * metric.hess_apply(scale * u), metric.dim)

    def _grad(self, w):
        return self.gt + self.H.hess_apply(w - self.z)

    def _smooth(self, w):
        u = w - self.z
        return float(self.gt @ u + 0.5 * u @ self.H.hess_apply(u))

    def _step(self, y, gy):
        sy = self._smooth(y)
        while True:
            scale = self.lam * self.D
            w = self.g.prox(y - gy / scale, Metric.from_diagonal(self.t * scale))
            dw = w - y
            bound = sy + gy @ dw + 0.5 * float(dw @ (scale * dw))
            if self._smooth(w) <= bound + 1e-12 * (1.0 + abs(bound)):
                return w, scale
            self.lam *= 2.0

    def _delta(self, e):
        return dual_local_norm(self.H, e) / self.t

    def polish(self, w: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
        """Resuelve el sistema lineal del patrón activo de w y certifica el candidato."""
        pat = self.g.active_pattern(w)
        if pat is None:
            return None
        cand = pat.values.copy()
        free = ~pat.fixed
        if np.any(free):
            Hm = self.H.hessian
            fixed = pat.fixed
            # estacionariedad en las libres: gt_F + [H(w − z)]_F + t⁻¹·pendiente_F = 0
            rhs = (Hm[np.ix_(free, free)] @ self.z[free]
                   - Hm[np.ix_(free, fixed)] @ (cand[fixed] - self.z[fixed])
                   - self.gt[free] - pat.slope[free] / self.t)
            try:
                cand[free] = sla.cho_solve(sla.cho_factor(Hm[np.ix_(free, free)], lower=True), rhs)
            except sla.LinAlgError:
                return None
        cand = self.g.domain_projection(cand)
        v = self.t * self._grad(cand)
        xi, _, _ = self.g.subdiff(cand).nearest(-v)
        e = v + xi
        return cand, e, self._delta(e)

    def run(self, delta_target: float, start=None, max_iter: Optional[int] = None):
        p = self.H.dim
        cap = max_iter or settings.inner_iter_factor * p + settings.inner_iter_base
        w = self.z.copy() if start is None else as_vec(start, p, name="start")
        w = self.g.domain_projection(w)
        y = w.copy()
        theta = 1.0
        best_delta = math.inf

        for k in range(1, cap + 1):
            gy = self._grad(y)
            w_new, scale = self._step(y, gy)
            e = self.t * (scale * (y - w_new) - self.H.hess_apply(y - w_new))
            delta = self._delta(e)
            best_delta = min(best_delta, delta)
            if delta <= delta_target:
                return w_new, InexactCertificate(residual=e, delta_achieved=delta,
                                                 inner_iterations=k, method="apg")

            if k % self.polish_every == 0:
                polished = self.polish(w_new)
                if polished is not None:
                    cand, e_c, delta_c = polished
                    best_delta = min(best_delta, delta_c)
                    if delta_c <= delta_target:
                        return cand, InexactCertificate(residual=e_c, delta_achieved=delta_c,
                                                        inner_iterations=k, method="polish")

            # reinicio si el paso de momento deja de ser descenso
            if float((y - w_new) @ (self.D * (w_new - w))) > 0.0:
                theta = 1.0
                y = w_new.copy()
            else:
                theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
                y = w_new + ((theta - 1.0) / theta_next) * (w_new - w)
                theta = theta_next
            w = w_new

        raise ConvergenceError("El subsolver acelerado agotó las iteraciones sin certificado",
                               best_delta=best_delta, target=delta_target, iterations=cap)


__all__ = [
    "AffineForm", "ActivePattern", "SubdiffSet", "ProxFn", "ZeroFn", "LinearFn", "PiecewiseLinearFn",
    "WeightedL1", "BoxIndicator", "AffineIndicator", "TraceAffine", "LinearShift", "SeparableSum",
    "ConjugateFn", "prox_from_descriptor", "prox_scaled", "prox_psi_from_g", "inexact_subsolve",
    "AcceleratedProxGradient",
]
