import argparse
import json

from pydantic import ValidationError

from scinc.models.schemas import Phase1Strategy, RunConfig, Scheme, Termination, validation_to_usage
from scinc.services.solve_service import SolveService

solve_service = SolveService()


def register(subparsers) -> None:
    parser = subparsers.add_parser("solve", help="Resuelve un problema y escribe solución y traza")
    parser.add_argument("problem", help="Archivo JSON del problema")
    parser.add_argument("--scheme", default=Scheme.ALGORITHM1.value, choices=[s.value for s in Scheme])
    parser.add_argument("--c", type=float, default=0.95)
    parser.add_argument("--beta", type=float, default=0.0870)
    parser.add_argument("--eta", type=float, default=None)
    parser.add_argument("--t0", type=float, default=None)
    parser.add_argument("--eps", type=float, default=1e-6)
    parser.add_argument("--max-iters", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trace", default=None, help="CSV de la traza (por defecto <problema>.trace.csv)")
    parser.add_argument("--out", default=None, help="JSON de la solución (por defecto <problema>.solution.json)")
    parser.add_argument("--adaptive-sigma", action="store_true")
    parser.add_argument("--debug-asserts", action="store_true")
    parser.add_argument("--phase1", default=Phase1Strategy.AUXILIARY_PATH.value,
                        choices=[s.value for s in Phase1Strategy])
    parser.add_argument("--termination", default=Termination.M0.value, choices=[t.value for t in Termination])
    parser.add_argument("--delta-const", type=float, default=None)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    try:
        config = RunConfig(
            problem_path=args.problem, scheme=args.scheme, c=args.c, beta=args.beta, eta=args.eta,
            t0=args.t0, eps=args.eps, max_iters=args.max_iters, seed=args.seed, trace_path=args.trace,
            out_path=args.out, adaptive_sigma=args.adaptive_sigma, debug_asserts=args.debug_asserts,
            phase1=args.phase1, termination=args.termination, delta_const=args.delta_const,
        )
    except ValidationError as e:
        raise validation_to_usage(e)

    solution, _ = solve_service.run(config)
    print(json.dumps({
        "status": solution.status.value,
        "phase1_iters": solution.phase1_iters,
        "phase2_iters": solution.phase2_iters,
        "k_max": solution.k_max,
        "t_final": solution.t_final,
        "objective": solution.objective,
    }))
    return 0
