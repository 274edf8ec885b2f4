"""Generadores con semilla de las familias de prueba y sus validadores."""
import math
from typing import List, Sequence, Union

import numpy as np

from scinc.models.problems import DualConicProblem, PrimalProblem, SaddleProblem
from scinc.models.schemas import Family, ProblemSpec
from scinc.oracles.barriers import SumBarrier, barrier_box, barrier_logdet, barrier_orthant
from scinc.oracles.prox import BoxIndicator, LinearFn, LinearShift, PiecewiseLinearFn, TraceAffine, ZeroFn
from scinc.services.instance_service import dual_feasible_start
from scinc.utils.errors import SolverError, UsageError
from scinc.utils.linalg import sym
from scinc.utils.logger import app_logger, log_validation

Problem = Union[SaddleProblem, PrimalProblem, DualConicProblem]


class GaussianStream:
    """Normales estándar por Box–Muller sobre uniformes PCG64, en orden de llamada fijo."""

    def __init__(self, seed: int):
        if not 0 <= seed < 2 ** 64:
            raise UsageError(f"La semilla debe ser un entero de 64 bits sin signo, llegó {seed}")
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, size) -> np.ndarray:
        return self._rng.random(size)

    def normal(self, size) -> np.ndarray:
        count = int(np.prod(size))
        pairs = (count + 1) // 2
        u1 = 1.0 - self._rng.random(pairs)  # (0, 1]
        u2 = self._rng.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(2.0 * math.pi * u2)
        out[1::2] = radius * np.sin(2.0 * math.pi * u2)
        return out[:count].reshape(size)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self._rng.random(n), kind="stable")


def _vec(M: np.ndarray) -> np.ndarray:
    return np.asarray(M, dtype=float).reshape(-1, order="F")


# --------------------------------------------------------------------------- familias

def gen_max_eigenvalue(n: int, p: int, seed: int = 0) -> SaddleProblem:
    """min_{‖y‖∞≤1} λ_max(C + Σ y_i L_i) escrito como punto silla sobre el símplex espectral."""
    if n < 1 or p < 1:
        raise UsageError("max_eigenvalue requiere n ≥ 1 y p ≥ 1")
    stream = GaussianStream(seed)
    C = sym(stream.normal((n, n)))
    mats = [sym(stream.normal((n, n))) for _ in range(p)]
    Lmat = np.column_stack([_vec(Li) for Li in mats])
    g = LinearShift(TraceAffine(n), -_vec(C))
    start = np.concatenate([_vec(np.eye(n) / n), np.zeros(p)])
    return SaddleProblem(
        family=Family.MAX_EIGENVALUE, g=g, psi=ZeroFn(p), f=barrier_logdet(n), phi=barrier_box(p),
        L=Lmat.T.copy(), start=start, data={"C": C, "Lmat": Lmat, "n": n, "p": p},
    )


def gen_sparse_lowrank(n: int, seed: int = 0, rho: float = 0.2, rank_fraction: float = 0.25,
                       noise_variance: float = 1e-4, noise_density: float = 0.1) -> PrimalProblem:
    """min ρ‖vec(X − M)‖₁ + (1−ρ)trace(X) s.t. X ⪰ 0, l ≤ X_ij ≤ u."""
    if n < 2:
        raise UsageError("sparse_lowrank requiere n ≥ 2")
    if not 0.0 < rho < 1.0:
        raise UsageError("rho debe estar en (0, 1)")
    stream = GaussianStream(seed)
    rank = int(math.floor(rank_fraction * n))
    support = stream.permutation(n)[: int(math.ceil(n / 2))]
    U = np.zeros((n, rank))
    if rank > 0:
        U[support, :] = stream.normal((support.shape[0], rank))
    M0 = U @ U.T

    mask = np.triu(stream.uniform((n, n)) < noise_density)
    E = np.where(mask, math.sqrt(noise_variance) * stream.normal((n, n)), 0.0)
    E = np.triu(E) + np.triu(E, 1).T
    M = M0 + E

    lo_m, hi_m = float(M.min()), float(M.max())
    lower = min(lo_m - 0.1 * abs(lo_m), 0.0)
    upper = max(hi_m + 0.1 * abs(hi_m), 1e-2)
    base = PiecewiseLinearFn(rho, offset=_vec(M), lower=lower, upper=upper, dim=n * n)
    g = LinearShift(base, (1.0 - rho) * _vec(np.eye(n)))
    start = _vec(0.5 * upper * np.eye(n))
    return PrimalProblem(
        family=Family.SPARSE_LOWRANK, g=g, f=barrier_logdet(n), start=start,
        data={"M": M, "M0": M0, "rank": rank, "rho": rho, "lower": lower, "upper": upper, "n": n},
    )


def _pairs(n: int) -> List[tuple]:
    return [(i, j) for j in range(n) for i in range(j)]


def gen_cluster_recovery(cluster_sizes: Sequence[int], edge_prob_in: float = 0.9,
                         edge_prob_out: float = 0.1, seed: int = 0) -> DualConicProblem:
    """Relajación SDP de agrupamiento con partición plantada, en forma cónica con L de rango completo.

    Variables x = (vec X, u) con u_ij ≥ 0 la parte simétrica de X_ij (i < j); filas:
    X_ii = 1, ⟨E, X⟩ = s₂ y ½(X_ij + X_ji) − u_ij = 0. La fila trace(X) = s₁ queda implícita.
    """
    sizes = [int(k) for k in cluster_sizes]
    if len(sizes) < 2 or any(k < 2 for k in sizes):
        raise UsageError("Se requieren al menos 2 grupos de tamaño ≥ 2")
    if not (0.0 <= edge_prob_out <= 1.0 and 0.0 <= edge_prob_in <= 1.0):
        raise UsageError("Las probabilidades de arista deben estar en [0, 1]")
    n = sum(sizes)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    stream = GaussianStream(seed)
    draws = stream.uniform((n, n))
    same = labels[:, None] == labels[None, :]
    adjacency = np.where(same, draws < edge_prob_in, draws < edge_prob_out).astype(float)
    adjacency = np.triu(adjacency, 1)
    adjacency = adjacency + adjacency.T

    pairs = _pairs(n)
    m, N = len(pairs), n * n
    p = n + 1 + m
    L = np.zeros((p, N + m))
    for i in range(n):
        L[i, i + i * n] = 1.0
    L[n, :N] = 1.0
    for k, (i, j) in enumerate(pairs):
        row = n + 1 + k
        L[row, i + j * n] = 0.5
        L[row, j + i * n] = 0.5
        L[row, N + k] = -1.0

    s1 = float(n)
    s2 = float(sum(k * k for k in sizes))
    b = np.concatenate([np.ones(n), [s2], np.zeros(m)])
    c_obj = np.concatenate([_vec(adjacency), np.zeros(m)])
    planted = same.astype(float)
    return DualConicProblem(
        family=Family.CLUSTER_RECOVERY, c_obj=c_obj, b=b, L=L,
        g=BoxIndicator(np.zeros(p), np.zeros(p)),
        f=SumBarrier([barrier_logdet(n), barrier_orthant(m)]),
        data={"A": adjacency, "labels": labels, "planted": planted, "cluster_sizes": sizes,
              "s1": s1, "s2": s2, "n": n},
    )


def gen_linear_orthant(n: int) -> PrimalProblem:
    """min ⟨1, x⟩ sobre x ≥ 0: camino central x*_t = t·1."""
    if n < 1:
        raise UsageError("linear_orthant requiere n ≥ 1")
    return PrimalProblem(family=Family.LINEAR_ORTHANT, g=LinearFn(np.ones(n)), f=barrier_orthant(n),
                         data={"n": n})


def cluster_stacked_operator(n: int) -> np.ndarray:
    """LX = [trace(X), ⟨E, X⟩, X_ii, X_ij] como matriz (n(n+1)+2)×n²."""
    N = n * n
    rows = [_vec(np.eye(n)), np.ones(N)]
    rows += [np.eye(N)[i + i * n] for i in range(n)]
    stacked = np.vstack([np.vstack(rows), np.eye(N)])
    return stacked


def lifted_point(X: np.ndarray) -> np.ndarray:
    """(vec X, u) con u_ij = ½(X_ij + X_ji) en el orden de pares de la formulación elevada."""
    n = X.shape[0]
    u = np.array([0.5 * (X[i, j] + X[j, i]) for i, j in _pairs(n)])
    return np.concatenate([_vec(X), u])


def recovered_matrix(P: DualConicProblem, x: np.ndarray) -> np.ndarray:
    n = int(P.data["n"])
    return x[: n * n].reshape((n, n), order="F")


# --------------------------------------------------------------------------- despacho

def generate(spec: ProblemSpec) -> Problem:
    dims, params = spec.dims, spec.params
    app_logger.info(f"Generando problema {spec.family.value} dims={dims} seed={spec.seed}")
    try:
        if spec.family == Family.MAX_EIGENVALUE:
            return gen_max_eigenvalue(dims["n"], dims["p"], spec.seed)
        if spec.family == Family.SPARSE_LOWRANK:
            return gen_sparse_lowrank(dims["n"], spec.seed, **params)
        if spec.family == Family.CLUSTER_RECOVERY:
            sizes = params.get("cluster_sizes") or [dims["k"]] * dims.get("clusters", 2)
            return gen_cluster_recovery(sizes, params.get("edge_prob_in", 0.9),
                                        params.get("edge_prob_out", 0.1), spec.seed)
        if spec.family == Family.LINEAR_ORTHANT:
            return gen_linear_orthant(dims["n"])
    except KeyError as e:
        raise UsageError(f"Falta la dimensión {e} para la familia {spec.family.value}")
    except TypeError as e:
        raise UsageError(f"Parámetros inválidos para {spec.family.value}: {e}")
    raise UsageError(f"Familia desconocida: {spec.family}")


def validate_problem(P: Problem) -> bool:
    """Comprueba que el punto interior de arranque existe y está en el dominio de g."""
    if isinstance(P, SaddleProblem):
        z0 = P.start_point()
        F = P.barrier()
        ok = F.in_domain(z0) and math.isfinite(P.g.value(z0[:P.n])) and math.isfinite(P.psi.value(z0[P.n:]))
    elif isinstance(P, PrimalProblem):
        x0 = P.start_point()
        ok = P.f.in_domain(x0) and math.isfinite(P.g.value(x0))
    else:
        try:
            y0 = dual_feasible_start(P)
            ok = P.barrier().in_domain(y0)
        except SolverError as e:
            app_logger.warning(f"Sin punto dual factible: {e}")
            ok = False
    log_validation("problema", ok, type(P).__name__)
    return bool(ok)


def planted_feasibility(P: DualConicProblem) -> dict:
    """Residuos de la solución plantada en la formulación original y en la elevada."""
    X = np.asarray(P.data["planted"], dtype=float)
    n = X.shape[0]
    stacked = cluster_stacked_operator(n) @ _vec(X)
    lifted = lifted_point(X)
    return {
        "trace": float(stacked[0] - P.data["s1"]),
        "sum": float(stacked[1] - P.data["s2"]),
        "diag_max": float(np.max(np.abs(stacked[2:2 + n] - 1.0))),
        "entries_min": float(stacked[2 + n:].min()),
        "entries_max": float(stacked[2 + n:].max()),
        "lifted_residual": float(np.linalg.norm(P.L @ lifted - P.b)),
        "objective": float(P.c_obj @ lifted),
    }


__all__ = [
    "GaussianStream", "gen_max_eigenvalue", "gen_sparse_lowrank", "gen_cluster_recovery", "gen_linear_orthant",
    "cluster_stacked_operator", "lifted_point", "recovered_matrix", "generate", "validate_problem",
    "planted_feasibility",
]
