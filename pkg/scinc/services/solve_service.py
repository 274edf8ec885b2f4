"""Orquesta una corrida completa: carga, despacho por esquema, traza y documento de solución."""
import math
import os
import uuid
from typing import Dict, Tuple, Union

import numpy as np

from scinc.models.problems import DualConicProblem, PrimalProblem, SaddleProblem
from scinc.models.schemas import (
    JobStatus, Phase, RunConfig, Scheme, Schedule, SolutionDocument, SolveTrace, Termination,
)
from scinc.oracles.operators import eps_solution_residual
from scinc.repositories.problem_repository import ProblemRepository
from scinc.repositories.trace_repository import TraceRepository
from scinc.services.instance_service import (
    default_schedule, dual_feasible_start, saddle_objective, solve_dual_conic, solve_primal, solve_saddle,
)
from scinc.services.newton_service import NewtonService, PathResult
from scinc.utils.errors import BudgetExceededError, SolverError, UsageError
from scinc.utils.job_manager import job_manager
from scinc.utils.logger import app_logger

Problem = Union[SaddleProblem, PrimalProblem, DualConicProblem]

_REQUIRED = {
    Scheme.SADDLE: SaddleProblem,
    Scheme.PRIMAL: PrimalProblem,
    Scheme.DUAL: DualConicProblem,
}


def default_output_paths(problem_path: str) -> Tuple[str, str]:
    stem = problem_path[:-5] if problem_path.endswith(".json") else problem_path
    return stem + ".solution.json", stem + ".trace.csv"


def _finite(values: Dict[str, float]) -> Dict[str, float]:
    # JSON estricto: los residuos no finitos se omiten del documento
    return {k: float(v) for k, v in values.items() if math.isfinite(v)}


class SolveService:
    def __init__(self):
        self.problems = ProblemRepository()
        self.traces = TraceRepository()

    def schedule_for(self, problem: Problem, config: RunConfig) -> Schedule:
        F = problem.barrier()
        m0 = None
        if config.termination == Termination.DELTA:
            m0 = config.delta_const
        elif isinstance(problem, DualConicProblem):
            m0 = math.sqrt(F.nu)
        return default_schedule(F, c=config.c, beta=config.beta, eta=config.eta, t0=config.t0, m0=m0)

    def _fixed(self, problem: Problem, sched: Schedule, config: RunConfig, job_id: str) -> PathResult:
        """fgn / dgn a t = t₀ desde el punto inicial del problema."""
        if isinstance(problem, DualConicProblem):
            F, A, z0 = problem.barrier(), problem.operator(), dual_feasible_start(problem)
        else:
            F, A, z0 = problem.barrier(), problem.operator(), problem.start_point()
        service = NewtonService(F, A, debug_asserts=config.debug_asserts, job_id=job_id)
        result = service.run_fixed(z0, sched.t0, scheme=config.scheme.value,
                                   max_iters=config.max_iters or 50)
        result.schedule = sched
        return result

    def _dispatch(self, problem: Problem, sched: Schedule, config: RunConfig, job_id: str):
        """Devuelve (PathResult, objetivo, residuos, primal recuperado)."""
        required = _REQUIRED.get(config.scheme)
        if required is not None and not isinstance(problem, required):
            raise UsageError(f"El esquema {config.scheme.value} requiere un {required.__name__}, "
                             f"el archivo contiene un {type(problem).__name__}")
        if config.scheme in (Scheme.FGN, Scheme.DGN):
            result = self._fixed(problem, sched, config, job_id)
            return result, None, {}, None

        options = {
            "debug_asserts": config.debug_asserts, "job_id": job_id, "phase1": config.phase1,
            "adaptive": config.adaptive_sigma, "max_iters": config.max_iters,
            "skip_phase_one": config.scheme == Scheme.PFGN,
        }
        if isinstance(problem, SaddleProblem):
            x, y, result = solve_saddle(problem, sched, config.eps, **options)
            residual, _ = eps_solution_residual(problem.operator(), problem.barrier(), result.z)
            return result, saddle_objective(problem, x, y), {"eps_residual": residual}, None
        if isinstance(problem, PrimalProblem):
            x, result = solve_primal(problem, sched, config.eps, **options)
            residual, _ = eps_solution_residual(problem.operator(), problem.barrier(), x)
            return result, problem.objective(x), {"eps_residual": residual}, None
        recovered, _, result = solve_dual_conic(problem, sched, config.eps, **options)
        document = recovered.to_document()
        document["residuals"] = _finite(document["residuals"])
        return result, recovered.primal_objective, dict(recovered.residuals), document

    def run(self, config: RunConfig) -> Tuple[SolutionDocument, SolveTrace]:
        problem, _ = self.problems.load_problem(config.problem_path)
        out_path, trace_default = default_output_paths(config.problem_path)
        out_path = config.out_path or out_path
        trace_path = config.trace_path or trace_default
        sched = self.schedule_for(problem, config)
        job_id = str(uuid.uuid4())
        job_manager.create_job(job_id)
        app_logger.info(f"Resolviendo {config.problem_path} con {config.scheme.value} "
                        f"(ν={sched.nu:g}, σ̄={sched.sigma_bar:.3e}, t₀={sched.t0:g}, seed={config.seed})")

        try:
            result, objective, residuals, recovered = self._dispatch(problem, sched, config, job_id)
        except BudgetExceededError as e:
            if isinstance(e.trace, SolveTrace):
                self.traces.write_trace(trace_path, e.trace)
            job_manager.update_job(job_id, status=JobStatus.BUDGET_EXCEEDED, message=e.detail)
            raise
        except SolverError as e:
            app_logger.error(f"Error al resolver {config.problem_path}: {e}")
            job_manager.update_job(job_id, status=JobStatus.FAILED, message=e.detail, errors=[str(e)])
            raise

        self.traces.write_trace(trace_path, result.trace)
        solution = SolutionDocument(
            scheme=config.scheme,
            problem_path=config.problem_path,
            status=JobStatus.COMPLETED,
            z=np.asarray(result.z, dtype=float).tolist(),
            t_final=result.t,
            eps=config.eps,
            nu=sched.nu,
            schedule=sched,
            k_max=result.k_max,
            j_max=result.j_max,
            phase1_iters=result.trace.count(Phase.ONE),
            phase2_iters=result.phase2_iters,
            objective=objective,
            residuals=_finite(residuals),
            recovered=recovered,
            trace_path=os.path.relpath(trace_path, os.path.dirname(os.path.abspath(out_path))),
            adaptive_sigma=config.adaptive_sigma,
        )
        self.problems.save_solution(out_path, solution)
        job_manager.update_job(job_id, status=JobStatus.COMPLETED, message="Solución escrita", result=out_path)
        return solution, result.trace


__all__ = ["SolveService", "default_output_paths"]
