from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from scinc.models.schemas import Family
from scinc.oracles.barriers import BarrierOracle, DualFeasibleBarrier, SumBarrier
from scinc.oracles.operators import (
    ClosedFormStep, MonotoneOracle, SaddleOperator, SubdifferentialOperator,
)
from scinc.oracles.prox import ConjugateFn, LinearShift, ProxFn


class SaddleProblem(BaseModel):
    """min_y max_x ⟨y, Lx⟩ − g(x) − ψ(y) sobre X × Y, con barreras f en X y φ en Y."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    family: Optional[Family] = None
    g: ProxFn
    psi: ProxFn
    f: BarrierOracle
    phi: BarrierOracle
    L: np.ndarray = Field(..., description="Matriz m×n: x ∈ R^n ↦ Lx ∈ R^m")
    start: Optional[np.ndarray] = None
    data: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode='after')
    def check_dimensions(self):
        if self.g.dim != self.f.dim or self.psi.dim != self.phi.dim:
            raise ValueError("Dimensiones de g/f o ψ/φ inconsistentes")
        if self.L.shape != (self.psi.dim, self.g.dim):
            raise ValueError(f"L debe ser {self.psi.dim}×{self.g.dim}")
        return self

    @property
    def n(self) -> int:
        return self.g.dim

    @property
    def m(self) -> int:
        return self.psi.dim

    def barrier(self) -> SumBarrier:
        return SumBarrier([self.f, self.phi])

    def operator(self, closed_form: Optional[ClosedFormStep] = None) -> SaddleOperator:
        return SaddleOperator(self.g, self.psi, self.L, closed_form=closed_form)

    def start_point(self) -> np.ndarray:
        if self.start is not None:
            return self.start.copy()
        return self.barrier().interior_point()


class PrimalProblem(BaseModel):
    """min g(x) sobre x ∈ X, con f barrera de X."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    family: Optional[Family] = None
    g: ProxFn
    f: BarrierOracle
    start: Optional[np.ndarray] = None
    data: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode='after')
    def check_dimensions(self):
        if self.g.dim != self.f.dim:
            raise ValueError(f"g vive en R^{self.g.dim} pero f en R^{self.f.dim}")
        return self

    def barrier(self) -> BarrierOracle:
        return self.f

    def operator(self) -> SubdifferentialOperator:
        return SubdifferentialOperator(self.g)

    def start_point(self) -> np.ndarray:
        if self.start is not None:
            return self.start.copy()
        return self.f.interior_point()

    def objective(self, x) -> float:
        return self.g.value(x)


class DualConicProblem(BaseModel):
    """max ⟨c, x⟩ − g(s) s.t. Lx − s = b, x ∈ K; resuelto por su dual min g*(y) + ⟨b, y⟩, Lᵀy − c ∈ K*."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    family: Optional[Family] = None
    c_obj: np.ndarray
    b: np.ndarray
    L: np.ndarray = Field(..., description="Matriz p×n")
    g: ProxFn
    f: BarrierOracle
    start: Optional[np.ndarray] = Field(None, description="ŷ⁰ estrictamente dual factible")
    data: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode='after')
    def check_dimensions(self):
        p, n = self.L.shape
        if self.c_obj.shape != (n,) or self.f.dim != n:
            raise ValueError("c y la barrera f deben vivir en R^n con n = columnas de L")
        if self.b.shape != (p,) or self.g.dim != p:
            raise ValueError("b y g deben vivir en R^p con p = filas de L")
        if not self.f.log_homogeneous:
            raise ValueError("f debe ser logarítmicamente homogénea")
        if p > n or np.linalg.matrix_rank(self.L) < p:
            raise ValueError("L debe tener rango completo por filas con p ≤ n")
        return self

    def barrier(self) -> DualFeasibleBarrier:
        return DualFeasibleBarrier(self.f, self.L, self.c_obj)

    def psi(self) -> ProxFn:
        """ψ(y) = g*(y) + ⟨b, y⟩."""
        return LinearShift(ConjugateFn(self.g), self.b)

    def operator(self) -> SubdifferentialOperator:
        return SubdifferentialOperator(self.psi())

    def dual_objective(self, y) -> float:
        return self.psi().value(y)

    def primal_objective(self, x, s) -> float:
        return float(self.c_obj @ x) - self.g.value(s)


class RecoveredPrimal(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    s: np.ndarray
    t: float
    residuals: Dict[str, float] = Field(default_factory=dict)
    primal_objective: float
    dual_objective: float

    def to_document(self) -> Dict[str, Any]:
        return {
            "x": self.x.tolist(),
            "s": self.s.tolist(),
            "t": self.t,
            "residuals": dict(self.residuals),
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
        }


__all__ = ["SaddleProblem", "PrimalProblem", "DualConicProblem", "RecoveredPrimal"]
