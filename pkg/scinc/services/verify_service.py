"""Reproducción offline de las cotas teóricas sobre una traza ya escrita."""
import math
from collections import defaultdict
from typing import Dict, List, Optional

from scinc.config import settings
from scinc.models.schemas import Phase, SolutionDocument, SolveTrace, TraceRow, VerifyCheck, VerifyReport
from scinc.services.schedule_service import central_path_bound, intermediate_bound, key_estimate
from scinc.utils.logger import app_logger, log_validation

REL_T_TOL = 1e-10


class TraceVerifier:
    """Recorre la traza fila a fila y evalúa cada desigualdad comprobable."""

    def __init__(self, solution: SolutionDocument, slack: Optional[float] = None):
        self.solution = solution
        self.sched = solution.schedule
        self.slack = settings.verify_slack if slack is None else slack
        self.checks: List[VerifyCheck] = []

    def _record(self, name: str, row: Optional[int], lhs: float, rhs: float, detail: str = "") -> None:
        if math.isnan(lhs):
            return
        passed = lhs <= rhs + self.slack * max(1.0, abs(rhs)) if math.isfinite(rhs) else True
        self.checks.append(VerifyCheck(name=name, row=row, passed=passed, lhs=lhs, rhs=rhs, detail=detail))

    # ------------------------------------------------------------------ fases

    def _phase_two(self, idx: int, row: TraceRow, prev: Optional[TraceRow]) -> None:
        s = self.sched
        dual = self.solution.recovered is not None
        self._record("vecindad_beta", idx, row.lambda_, s.beta)
        if dual:
            self._record("factibilidad_dual", idx, row.residual_primary, math.sqrt(s.nu) * row.t)
            self._record("factibilidad_primal", idx, row.residual_aux, s.theta * row.t)
        if prev is None or row.k == 0:
            return

        self._record("contraccion_t", idx, abs(row.t - (1.0 - row.sigma) * prev.t),
                     REL_T_TOL * prev.t, f"σ={row.sigma:.6e}")
        if not self.solution.adaptive_sigma:
            self._record("sigma_fijo", idx, abs(row.sigma - s.sigma_bar), REL_T_TOL * s.sigma_bar)
        self._record("exactitud_delta", idx, row.delta_achieved, row.delta_target)
        if dual:
            return

        r = s.c * math.sqrt(s.beta)
        mid = row.residual_aux
        self._record("vecindad_intermedia", idx, mid, r / (1.0 + r))
        if not math.isnan(prev.lambda_):
            self._record("decremento_intermedio", idx, mid,
                         intermediate_bound(prev.lambda_, row.sigma, math.sqrt(s.nu)))
        if not math.isnan(mid):
            self._record("estimacion_clave", idx, row.lambda_, key_estimate(mid, row.delta_achieved))
            self._record("cota_camino_central", idx, row.residual_primary,
                         central_path_bound(mid, row.delta_achieved, s.nu, row.t))

    def _phase_one(self, idx: int, row: TraceRow, prev: Optional[TraceRow]) -> None:
        if row.k == 0:
            return
        self._record("vecindad_eta", idx, row.lambda_, self.sched.eta)
        if prev is not None:
            self._record("tau_decreciente", idx, row.t, prev.t)
        self._record("exactitud_delta_fase1", idx, row.delta_achieved, row.delta_target)

    def _fixed(self, idx: int, row: TraceRow) -> None:
        # sigma = 1 marca un paso completo; los amortiguados no tienen estimación cuadrática
        if row.k == 0 or row.sigma != 1.0 or math.isnan(row.residual_aux):
            return
        self._record("estimacion_clave_fija", idx, row.lambda_, key_estimate(row.residual_aux, row.delta_achieved))

    def _budgets(self, trace: SolveTrace) -> None:
        sol = self.solution
        self._record("presupuesto_k_max", None, float(trace.count(Phase.TWO)), float(sol.k_max))
        if sol.j_max > 0 and trace.phase_rows(Phase.ONE):
            cap = math.ceil(settings.phase1_budget_factor * sol.j_max)
            self._record("presupuesto_j_max", None, float(trace.count(Phase.ONE)), float(cap))

    # ------------------------------------------------------------------ entrada

    def run(self, trace: SolveTrace) -> VerifyReport:
        last: Dict[Phase, TraceRow] = {}
        for idx, row in enumerate(trace.rows):
            prev = last.get(row.phase)
            if row.phase == Phase.TWO:
                self._phase_two(idx, row, prev)
            elif row.phase == Phase.ONE:
                self._phase_one(idx, row, prev)
            else:
                self._fixed(idx, row)
            last[row.phase] = row
        self._budgets(trace)

        summary: Dict[str, Dict[str, int]] = defaultdict(lambda: {"passed": 0, "failed": 0})
        for check in self.checks:
            summary[check.name]["passed" if check.passed else "failed"] += 1
        failures = [c for c in self.checks if not c.passed]
        return VerifyReport(passed=not failures, checks_run=len(self.checks), failures=failures,
                            summary=dict(summary))


def verify_trace(solution: SolutionDocument, trace: SolveTrace, slack: Optional[float] = None) -> VerifyReport:
    report = TraceVerifier(solution, slack).run(trace)
    log_validation("traza", report.passed, f"{report.checks_run} comprobaciones, {len(report.failures)} fallos")
    for failure in report.failures[:20]:
        app_logger.warning(f"Fila {failure.row}: {failure.name} {failure.lhs:.6e} > {failure.rhs:.6e}")
    return report


__all__ = ["TraceVerifier", "verify_trace"]
