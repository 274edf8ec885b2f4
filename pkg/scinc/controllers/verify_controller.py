import argparse
import os

from scinc.repositories.problem_repository import ProblemRepository
from scinc.repositories.trace_repository import TraceRepository
from scinc.services.verify_service import verify_trace
from scinc.utils.errors import UsageError, VerificationError

problem_repository = ProblemRepository()
trace_repository = TraceRepository()


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="Comprueba las cotas teóricas sobre una traza")
    parser.add_argument("solution", help="JSON de la solución")
    parser.add_argument("--trace", default=None, help="CSV de la traza (por defecto el indicado en la solución)")
    parser.add_argument("--slack", type=float, default=None)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    solution = problem_repository.load_solution(args.solution)
    trace_path = args.trace
    if trace_path is None:
        if not solution.trace_path:
            raise UsageError("La solución no indica su traza; use --trace")
        trace_path = os.path.join(os.path.dirname(os.path.abspath(args.solution)), solution.trace_path)
    trace = trace_repository.read_trace(trace_path)

    report = verify_trace(solution, trace, slack=args.slack)
    print(report.model_dump_json(indent=1))
    if not report.passed:
        raise VerificationError(f"{len(report.failures)} comprobaciones fallaron de {report.checks_run}")
    return 0
