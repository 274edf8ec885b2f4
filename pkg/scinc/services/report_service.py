"""Tablas resumen de corridas: iteraciones por fase, objetivo, tiempo y presupuesto."""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from scinc.models.schemas import Phase, SolutionDocument, SolveTrace, beta_upper
from scinc.repositories.problem_repository import ProblemRepository
from scinc.repositories.trace_repository import TraceRepository
from scinc.services.schedule_service import schedule_curve
from scinc.utils.errors import SolverError, UsageError
from scinc.utils.logger import app_logger

REPORT_COLUMNS = [
    "trace", "scheme", "phase1_iters", "phase2_iters", "fixed_iters", "k_max", "j_max",
    "within_budget", "t_final", "lambda_final", "objective", "time_ms",
]


def sibling_solution_paths(trace_path: str) -> List[str]:
    """Candidatos para la solución que acompaña a una traza: X.trace.csv → X.solution.json, X.json."""
    stem = trace_path[:-4] if trace_path.endswith(".csv") else trace_path
    bases = [stem]
    if stem.endswith(".trace"):
        bases.insert(0, stem[: -len(".trace")])
    candidates = []
    for base in bases:
        candidates += [base + ".solution.json", base + ".json"]
    return candidates


class ReportService:
    def __init__(self, max_workers: int = 4):
        self.traces = TraceRepository()
        self.problems = ProblemRepository()
        self.max_workers = max_workers

    def _solution_for(self, trace_path: str) -> Optional[SolutionDocument]:
        for candidate in sibling_solution_paths(trace_path):
            if os.path.exists(candidate):
                try:
                    return self.problems.load_solution(candidate)
                except SolverError as e:
                    app_logger.warning(f"Solución {candidate} ignorada: {e}")
        return None

    def _summarize(self, trace_path: str, trace: SolveTrace) -> Dict:
        solution = self._solution_for(trace_path)
        rows = trace.rows
        two = trace.phase_rows(Phase.TWO)
        final = two[-1] if two else (rows[-1] if rows else None)
        phase2 = trace.count(Phase.TWO)
        k_max = solution.k_max if solution else None
        return {
            "trace": trace_path,
            "scheme": solution.scheme.value if solution else "",
            "phase1_iters": trace.count(Phase.ONE),
            "phase2_iters": phase2,
            "fixed_iters": trace.count(Phase.FIXED),
            "k_max": k_max,
            "j_max": solution.j_max if solution else None,
            "within_budget": None if k_max is None else bool(phase2 <= k_max),
            "t_final": final.t if final else math.nan,
            "lambda_final": final.lambda_ if final else math.nan,
            "objective": solution.objective if solution and solution.objective is not None else math.nan,
            "time_ms": float(sum(r.wall_ms for r in rows)),
        }

    def build_report(self, trace_paths: Sequence[str]) -> pd.DataFrame:
        """Una fila por traza, ordenadas por ruta; la lectura es concurrente."""
        paths = sorted(set(trace_paths))
        if not paths:
            return pd.DataFrame(columns=REPORT_COLUMNS)
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            traces = list(pool.map(self.traces.read_trace, paths))
        records = [self._summarize(p, tr) for p, tr in zip(paths, traces)]
        app_logger.info(f"Reporte con {len(records)} corridas")
        return pd.DataFrame.from_records(records, columns=REPORT_COLUMNS)

    def export(self, frame: pd.DataFrame, out_path: Optional[str] = None,
               xlsx_path: Optional[str] = None) -> str:
        text = frame.to_csv(index=False)
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(text)
        if xlsx_path:
            try:
                frame.to_excel(xlsx_path, index=False, engine="openpyxl")
            except (ImportError, ValueError) as e:
                raise UsageError(f"No se pudo exportar a Excel: {e}")
            app_logger.info(f"Reporte exportado a {xlsx_path}")
        return text

    def schedule_curve_table(self, c: float, nu: float, points: int = 199) -> pd.DataFrame:
        betas = np.linspace(0.0, beta_upper(c), points + 2)[1:-1]
        return schedule_curve(c, nu, betas)


__all__ = ["REPORT_COLUMNS", "ReportService", "sibling_solution_paths"]
