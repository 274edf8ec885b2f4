"""Fórmulas cerradas de parámetros, tolerancias y presupuestos de iteración."""
import math
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from scinc.models.schemas import Schedule, beta_upper
from scinc.utils.errors import UsageError

FGN_BETA_LIMIT = 0.5 * (3.0 - math.sqrt(5.0))


def _check_beta(c: float, beta: float) -> None:
    if not 0.0 < c <= 1.0:
        raise UsageError(f"c debe estar en (0, 1], llegó {c}")
    upper = beta_upper(c)
    if not 0.0 < beta < upper:
        raise UsageError(f"beta={beta} fuera del intervalo admisible (0, {upper:.5f}) para c={c}")


def sigma_bar(c: float, beta: float, nu: float) -> float:
    _check_beta(c, beta)
    r = c * math.sqrt(beta)
    return (r - beta * (1.0 + r)) / ((1.0 + r) * math.sqrt(nu) + r)


def adaptive_sigma(c: float, beta: float, grad_norm: float) -> float:
    """σ_k con √ν sustituido por ‖∇F(z^k)‖*_{z^k} (siempre ≥ σ̄_β)."""
    _check_beta(c, beta)
    r = c * math.sqrt(beta)
    return (r - beta * (1.0 + r)) / ((1.0 + r) * grad_norm + r)


def delta_t_bar(c: float, beta: float) -> float:
    _check_beta(c, beta)
    return _delta_formula(c, beta)


def _delta_formula(c: float, x: float) -> float:
    r = c * math.sqrt(x)
    return (1.0 - c * c) * x / ((1.0 + r) ** 3 * (3.0 * r + c * c * x + (1.0 + r) ** 3))


def delta_tau_bar(c: float, eta: float) -> float:
    if not 0.0 < eta < beta_upper(c):
        raise UsageError(f"eta={eta} fuera del intervalo admisible")
    return _delta_formula(c, eta)


def theta(c: float, beta: float) -> float:
    """Constante del residuo de factibilidad primal recuperado."""
    _check_beta(c, beta)
    r = c * math.sqrt(beta)
    num = (1.0 - c * c) * beta
    return num / ((1.0 + r) ** 2 * (3.0 * r + c * c * beta + (1.0 + r) ** 3) - num)


def m0_constant(c: float, beta: float, nu: float) -> float:
    dt = delta_t_bar(c, beta)
    r = c * math.sqrt(beta)
    q = r / (1.0 + r)
    return (math.sqrt(nu) + q + 2.0 * dt) / (1.0 - q - dt)


def phase1_step_size(c: float, eta: float, t0: float, norm: float) -> float:
    """Δ_j = t₀(c√η/(1+c√η) − η) / ‖ζ̂⁰‖*_{ẑ^j}."""
    if norm <= 0.0:
        return math.inf
    r = c * math.sqrt(eta)
    return t0 * (r / (1.0 + r) - eta) / norm


def key_estimate(lam: float, delta: float) -> float:
    """Cota de λ_t(z₊) tras un paso completo con decremento λ y exactitud δ."""
    s = lam + delta
    if s >= 1.0:
        return math.inf
    return (s / (1.0 - s)) ** 2 + delta / (1.0 - s) ** 3


def intermediate_bound(lam: float, sigma: float, grad_norm: float) -> float:
    """Cota de λ_{t₊}(z) a partir de λ_t(z) cuando t₊ = (1−σ)t."""
    return lam + sigma / (1.0 - sigma) * (grad_norm + lam)


def central_path_bound(lam: float, delta: float, nu: float, t: float) -> float:
    """Cota computable de dist_{z₊}(0, A(z₊)) tras un paso con (λ_t(z), δ)."""
    s = lam + delta
    if s >= 1.0:
        return math.inf
    return (math.sqrt(nu) + lam + 2.0 * delta) * t / (1.0 - s)


def fgn_delta_bar(beta: float) -> float:
    """Mayor tolerancia constante que conserva λ ≤ β con pasos completos."""
    if not 0.0 < beta < FGN_BETA_LIMIT:
        raise UsageError(f"beta={beta} fuera de (0, {FGN_BETA_LIMIT:.5f})")
    num = beta * (1.0 - 3.0 * beta + beta * beta) * (1.0 - beta) ** 4
    den = 2.0 * beta ** 3 - 5.0 * beta ** 2 + 3.0 * beta + 1.0
    return num / den


def fgn_optimal_beta() -> Tuple[float, float]:
    res = minimize_scalar(lambda b: -fgn_delta_bar(b), bounds=(1e-6, FGN_BETA_LIMIT - 1e-6),
                          method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(-res.fun)


def fgn_rate(beta: float) -> float:
    return (2.0 - 4.0 * beta + beta * beta) / (1.0 - 2.0 * beta) ** 3


def dgn_rate(beta: float) -> float:
    q = 2.0 * beta * beta + 4.0 * beta + 3.0
    return q / (1.0 - beta * beta * q)


def optimal_sigma_beta(c: float, nu: float) -> Tuple[float, float]:
    upper = beta_upper(c)
    res = minimize_scalar(lambda b: -sigma_bar(c, b, nu), bounds=(1e-9, upper * (1.0 - 1e-9)),
                          method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(-res.fun)


def schedule_curve(c: float, nu: float, betas: Optional[Iterable[float]] = None) -> pd.DataFrame:
    if betas is None:
        betas = np.linspace(0.0, beta_upper(c), 201)[1:-1]
    rows = [
        {"beta": float(b), "delta_t_bar": delta_t_bar(c, b), "sigma_bar": sigma_bar(c, b, nu)}
        for b in betas
    ]
    return pd.DataFrame.from_records(rows, columns=["beta", "delta_t_bar", "sigma_bar"])


def build_schedule(c: float, beta: float, eta: float, nu: float, kappa: float,
                   t0: Optional[float] = None, m0: Optional[float] = None) -> Schedule:
    _check_beta(c, beta)
    if not 0.0 < eta < beta:
        raise UsageError(f"eta={eta} debe cumplir 0 < eta < beta={beta}")
    return Schedule(
        c=c, beta=beta, eta=eta, nu=nu, kappa=kappa,
        t0=kappa if t0 is None else t0,
        sigma_bar=sigma_bar(c, beta, nu),
        delta_t_bar=delta_t_bar(c, beta),
        delta_tau_bar=delta_tau_bar(c, eta),
        M0=m0_constant(c, beta, nu) if m0 is None else m0,
        theta=theta(c, beta),
    )


def complexity_budget(sched: Schedule, nu: float, t0: float, eps: float,
                      zeta_norm: float = 0.0) -> Tuple[int, int]:
    """(k_max, j_max); j_max usa ‖ζ̂⁰‖*_{ẑ⁰} como sustituto heurístico del valor en el centro analítico."""
    c, beta, eta = sched.c, sched.beta, sched.eta
    r = c * math.sqrt(beta)
    ratio = ((1.0 + r) * math.sqrt(nu) + r) / (r - beta * (1.0 + r))
    log_term = math.log(max(sched.M0 * t0 / eps, 1.0))
    k_max = int(math.floor(ratio * log_term)) + 1

    re = c * math.sqrt(eta)
    gap = re - eta * (1.0 + re)
    j_raw = (sched.kappa * (1.0 + re) * zeta_norm / (t0 * gap)
             - (beta - eta) * (1.0 + re) / gap)
    j_max = max(int(math.floor(j_raw)) + 1, 1)
    return k_max, j_max


__all__ = [
    "sigma_bar", "adaptive_sigma", "delta_t_bar", "delta_tau_bar", "theta", "m0_constant",
    "phase1_step_size", "key_estimate", "intermediate_bound", "central_path_bound", "fgn_delta_bar",
    "fgn_optimal_beta", "fgn_rate", "dgn_rate", "optimal_sigma_beta", "schedule_curve", "build_schedule",
    "complexity_budget", "beta_upper",
]
