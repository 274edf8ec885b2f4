import argparse
import os

from pydantic import ValidationError

from scinc.models.schemas import Family, ProblemSpec, validation_to_usage
from scinc.repositories.problem_repository import ProblemRepository
from scinc.services.problem_service import generate, validate_problem
from scinc.utils.errors import InitializationError
from scinc.utils.logger import app_logger

problem_repository = ProblemRepository()


def _sizes(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Tamaños de grupo inválidos: {text!r}")


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate", help="Genera un problema de prueba con semilla")
    parser.add_argument("--family", required=True, choices=[f.value for f in Family])
    parser.add_argument("--n", type=int, help="Orden de la matriz / dimensión")
    parser.add_argument("--p", type=int, help="Número de matrices L_i (max_eigenvalue)")
    parser.add_argument("--k", type=int, help="Tamaño de cada grupo (cluster_recovery)")
    parser.add_argument("--clusters", type=int, help="Número de grupos (cluster_recovery)")
    parser.add_argument("--cluster-sizes", type=_sizes, help="Tamaños explícitos, p. ej. 5,5")
    parser.add_argument("--edge-prob-in", type=float)
    parser.add_argument("--edge-prob-out", type=float)
    parser.add_argument("--rho", type=float)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="Archivo JSON del problema")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    dims = {name: getattr(args, name) for name in ("n", "p", "k", "clusters") if getattr(args, name) is not None}
    params = {}
    if args.cluster_sizes:
        params["cluster_sizes"] = args.cluster_sizes
    if args.edge_prob_in is not None:
        params["edge_prob_in"] = args.edge_prob_in
    if args.edge_prob_out is not None:
        params["edge_prob_out"] = args.edge_prob_out
    if args.rho is not None:
        params["rho"] = args.rho
    try:
        spec = ProblemSpec(family=args.family, dims=dims, seed=args.seed, params=params)
    except ValidationError as e:
        raise validation_to_usage(e)

    problem = generate(spec)
    if not validate_problem(problem):
        raise InitializationError(f"El problema generado no tiene punto interior válido ({spec.family.value})")
    problem_repository.save_problem(args.out, problem, spec)
    app_logger.info(f"Problema {spec.family.value} listo en {os.path.abspath(args.out)}")
    print(args.out)
    return 0
