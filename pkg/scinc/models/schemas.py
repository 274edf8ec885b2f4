import math
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from scinc.utils.errors import UsageError

TRACE_COLUMNS = [
    "phase", "k", "t", "lambda", "delta_target", "delta_achieved",
    "sigma", "residual_primary", "residual_aux", "wall_ms",
]


def beta_upper(c: float) -> float:
    """Extremo superior del intervalo admisible de β para un c dado."""
    return 0.5 * (1.0 + 2.0 * c * c - math.sqrt(1.0 + 4.0 * c * c))


class JobStatus(str, Enum):
    PENDING = "pending"
    PHASE_ONE = "phase_one"
    PHASE_TWO = "phase_two"
    COMPLETED = "completed"
    FAILED = "failed"
    BUDGET_EXCEEDED = "budget_exceeded"


class Phase(str, Enum):
    ONE = "one"
    TWO = "two"
    FIXED = "fixed"  # fgn/dgn con t constante


class Scheme(str, Enum):
    FGN = "fgn"
    DGN = "dgn"
    PFGN = "pfgn"
    ALGORITHM1 = "algorithm1"
    SADDLE = "saddle"
    PRIMAL = "primal"
    DUAL = "dual"


class Phase1Strategy(str, Enum):
    AUXILIARY_PATH = "auxiliary_path"
    DAMPED_NEWTON = "damped_newton"


class Termination(str, Enum):
    M0 = "m0"
    DELTA = "delta"


class Family(str, Enum):
    MAX_EIGENVALUE = "max_eigenvalue"
    SPARSE_LOWRANK = "sparse_lowrank"
    CLUSTER_RECOVERY = "cluster_recovery"
    LINEAR_ORTHANT = "linear_orthant"


class InexactCertificate(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    residual: np.ndarray = Field(..., description="e ∈ Â_t(z₊; z)")
    delta_achieved: float = Field(..., ge=0.0, description="‖e‖*_z / t")
    inner_iterations: int = Field(0, ge=0)
    exact: bool = Field(False, description="Solución en forma cerrada")
    method: str = Field("closed_form", description="closed_form | apg | polish | kkt | fbf")


class Schedule(BaseModel):
    c: float = Field(..., gt=0.0, le=1.0, description="Factor de contracción c")
    beta: float = Field(..., gt=0.0, description="Radio de la vecindad del camino central")
    eta: float = Field(..., gt=0.0, description="Radio de la vecindad en la fase 1")
    nu: float = Field(..., gt=0.0)
    kappa: float = Field(..., gt=0.0)
    t0: float = Field(..., gt=0.0)
    sigma_bar: float
    delta_t_bar: float = Field(..., ge=0.0)
    delta_tau_bar: float = Field(..., ge=0.0)
    M0: float = Field(..., gt=0.0)
    theta: float = Field(..., ge=0.0)

    @field_validator('sigma_bar')
    @classmethod
    def sigma_in_unit_interval(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f"sigma_bar fuera de (0,1): {v}")
        return v

    @model_validator(mode='after')
    def check_admissible(self):
        upper = beta_upper(self.c)
        if not self.beta < upper:
            raise ValueError(f"beta={self.beta} fuera del intervalo admisible (0, {upper:.5f})")
        if not self.eta < self.beta:
            raise ValueError("eta debe ser menor que beta")
        return self


class IterState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: np.ndarray
    t: float = Field(..., ge=0.0, description="t_k en fase dos, τ_j en fase uno")
    k: int = 0
    phase: Phase = Phase.TWO
    lam: Optional[float] = Field(None, description="λ_t(z) del estado guardado")
    lam_prev: Optional[float] = Field(None, description="λ_t(z_anterior) con el t nuevo")
    delta_target: float = 0.0
    delta_used: float = 0.0
    sigma: Optional[float] = Field(None, description="σ_k, α_k (dgn) o Δ_j (fase 1)")


class TraceRow(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    phase: Phase
    k: int
    t: float
    lambda_: float = Field(math.nan, alias="lambda")
    delta_target: float = math.nan
    delta_achieved: float = math.nan
    sigma: float = math.nan
    residual_primary: float = math.nan
    residual_aux: float = math.nan
    wall_ms: float = 0.0


class SolveTrace(BaseModel):
    rows: List[TraceRow] = Field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def phase_rows(self, phase: Phase) -> List[TraceRow]:
        return [r for r in self.rows if r.phase == phase]

    def count(self, phase: Phase) -> int:
        # la fila k=0 registra el punto inicial, no una iteración
        return sum(1 for r in self.rows if r.phase == phase and r.k > 0)

    def is_monotone(self) -> bool:
        for phase in (Phase.ONE, Phase.TWO):
            ts = [r.t for r in self.phase_rows(phase)]
            if any(b >= a for a, b in zip(ts, ts[1:]) if b > 0.0):
                return False
        return True

    def to_frame(self) -> pd.DataFrame:
        records = [
            {**r.model_dump(by_alias=True), "phase": r.phase.value}
            for r in self.rows
        ]
        return pd.DataFrame.from_records(records, columns=TRACE_COLUMNS)


class RunConfig(BaseModel):
    problem_path: str
    scheme: Scheme = Scheme.ALGORITHM1
    c: float = Field(0.95, gt=0.0, le=1.0)
    beta: float = Field(0.0870, gt=0.0)
    eta: Optional[float] = Field(None, gt=0.0, description="Por defecto 0.5·beta")
    t0: Optional[float] = Field(None, gt=0.0, description="Por defecto κ")
    eps: float = Field(1e-6, gt=0.0)
    max_iters: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    trace_path: Optional[str] = None
    out_path: Optional[str] = None
    adaptive_sigma: bool = False
    debug_asserts: bool = False
    phase1: Phase1Strategy = Phase1Strategy.AUXILIARY_PATH
    termination: Termination = Termination.M0
    delta_const: Optional[float] = Field(None, gt=0.0, description="Δ(β,ν) para --termination delta")

    @model_validator(mode='after')
    def check_parameters(self):
        upper = beta_upper(self.c)
        if not self.beta < upper:
            raise ValueError(f"beta={self.beta} fuera de (0, {upper:.5f}) para c={self.c}")
        if self.eta is None:
            self.eta = 0.5 * self.beta
        if not self.eta < self.beta:
            raise ValueError("eta debe ser menor que beta")
        if self.termination == Termination.DELTA and self.delta_const is None:
            raise ValueError("--termination delta requiere --delta-const")
        return self


class ProblemSpec(BaseModel):
    family: Family
    dims: Dict[str, int] = Field(default_factory=dict)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator('dims')
    @classmethod
    def positive_dims(cls, v):
        for name, value in v.items():
            if value < 1:
                raise ValueError(f"La dimensión {name} debe ser positiva")
        return v


class SolveJobStatus(BaseModel):
    job_id: str
    status: JobStatus
    message: str
    progress: int = 0
    phase1_iters: int = 0
    phase2_iters: int = 0
    errors: list = Field(default_factory=list)
    result: Optional[Any] = None
    created_at: str
    updated_at: str
    started_at: Optional[str] = None
    completed_at: Optional[str] = None


class SolutionDocument(BaseModel):
    format_version: Literal[1] = 1
    scheme: Scheme
    problem_path: str
    status: JobStatus
    z: List[float]
    t_final: float
    eps: float
    nu: float
    schedule: Schedule
    k_max: int
    j_max: int
    phase1_iters: int
    phase2_iters: int
    objective: Optional[float] = None
    residuals: Dict[str, float] = Field(default_factory=dict)
    recovered: Optional[Dict[str, Any]] = None
    trace_path: Optional[str] = None
    adaptive_sigma: bool = False


class VerifyCheck(BaseModel):
    name: str
    row: Optional[int] = None
    passed: bool
    lhs: float = math.nan
    rhs: float = math.nan
    detail: str = ""


class VerifyReport(BaseModel):
    passed: bool
    checks_run: int
    failures: List[VerifyCheck] = Field(default_factory=list)
    summary: Dict[str, Dict[str, int]] = Field(default_factory=dict)


def validation_to_usage(error: Exception) -> UsageError:
    """Traduce un ValidationError de pydantic a error de uso de la CLI."""
    return UsageError(f"Parámetros inválidos: {error}")
