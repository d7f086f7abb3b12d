"""Run-time witnesses for the convergence theory.

The stationarity bound is the norm of an explicit element of the Frechet
subdifferential of F at theta_{t+1}, read off the optimality condition of the
prox subproblem:

    grad f(theta_{t+1}) - (1 - rho_t) g_t - rho_t m_{t-1}
        - (1/alpha_t) (C_t + delta I) (theta_{t+1} - center_t)

where ``center_t`` is theta_t (theta_bar_t under decoupled weight decay).
Its norm upper-bounds dist(0, subdiff F(theta_{t+1})).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np


@dataclass
class RunRecord:
    t: int
    objective: float
    stationarity_bound: float
    sparsity: float
    momentum_norm: float
    grad_norm: float
    grad_norm_max: float
    c4_min_eig: float
    step_norm: float
    grad_variance: float
    lam: float
    alpha: float
    support_precision: float | None = None
    support_recall: float | None = None
    support_f1: float | None = None

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def witness(outcome, full_grad_next: np.ndarray, rho_t: float | None = None, alpha_t: float | None = None) -> np.ndarray:
    rho = outcome.rho if rho_t is None else rho_t
    alpha = outcome.alpha if alpha_t is None else alpha_t
    return (
        full_grad_next
        - (1.0 - rho) * outcome.g
        - rho * outcome.m_prev
        - outcome.diag * (outcome.theta_next - outcome.center) / alpha
    )


def stationarity_bound(outcome, problem, rho_t: float | None = None, alpha_t: float | None = None) -> float:
    """Norm of the subdifferential witness, using the full gradient at theta_{t+1}."""
    grad = problem.full_gradient(outcome.theta_next)
    return float(np.linalg.norm(witness(outcome, grad, rho_t, alpha_t)))


def support_metrics(theta, true_support) -> tuple[float, float, float]:
    """Precision, recall and F1 of the exact-nonzero pattern of `theta`."""
    pred = set(np.flatnonzero(np.asarray(theta) != 0.0).tolist())
    true = set(int(i) for i in np.asarray(true_support).ravel())
    hit = len(pred & true)
    if pred:
        precision = hit / len(pred)
    else:
        precision = 1.0 if not true else 0.0
    recall = hit / len(true) if true else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def sparsity(theta) -> float:
    theta = np.asarray(theta)
    return float(np.count_nonzero(theta == 0.0)) / theta.size


@dataclass
class ConditionReport:
    records: int
    max_step_norm: float
    step_norm_ok: bool
    max_grad_norm: float
    grad_norm_ok: bool
    min_c4_min_eig: float
    c4_ok: bool
    max_grad_variance: float
    mean_grad_variance: float
    momentum_bound_violations: int
    smoothness: str
    lipschitz: float | None = None


def monitor_conditions(
    history: list[RunRecord],
    gamma_target: float,
    D_target: float,
    G_target: float,
    lipschitz: float | None = None,
) -> ConditionReport:
    """Summarize the recorded witnesses against target constants. Never raises on violations."""
    if not history:
        raise ValueError("monitor_conditions needs at least one record")
    steps = [r.step_norm for r in history]
    grads = [r.grad_norm for r in history]
    eigs = [r.c4_min_eig for r in history]
    var = [r.grad_variance for r in history]
    over = sum(1 for r in history if r.momentum_norm > r.grad_norm_max + 1e-12)
    return ConditionReport(
        records=len(history),
        max_step_norm=max(steps),
        step_norm_ok=max(steps) <= D_target,
        max_grad_norm=max(grads),
        grad_norm_ok=max(grads) <= G_target,
        min_c4_min_eig=min(eigs),
        c4_ok=min(eigs) >= gamma_target,
        max_grad_variance=max(var),
        mean_grad_variance=float(np.mean(var)),
        momentum_bound_violations=over,
        smoothness="monitored" if lipschitz is not None else "not applicable",
        lipschitz=lipschitz,
    )


@dataclass
class RateTrend:
    ratio: np.ndarray
    slope: float
    doubling_ratio: float
    verdict: str


def rate_trend(bounds) -> RateTrend:
    """Compare the running mean of squared bounds with a 1/T reference.

    ``ratio[T-1] = T * mean(bounds[:T]**2)`` stays bounded when the squared
    bounds average out at rate O(1/T). The slope is the log-log growth of the
    ratio over the second half of the series (about 1 for a constant sequence,
    about 0 for a summable one); ``doubling_ratio`` is ratio(T) / ratio(T/2).
    """
    b = np.asarray(bounds, dtype=np.float64)
    if b.size < 10:
        raise ValueError("rate_trend needs at least 10 values")
    ratio = np.cumsum(b * b)
    T = b.size
    half = T // 2
    ts = np.arange(half, T + 1)
    r = ratio[half - 1:]
    if r[0] <= 0.0:
        slope = 0.0 if r[-1] <= 0.0 else math.inf
    else:
        slope = float(np.polyfit(np.log(ts), np.log(r), 1)[0])
    doubling = float(ratio[-1] / ratio[half - 1]) if ratio[half - 1] > 0 else (1.0 if ratio[-1] == 0 else math.inf)
    if slope <= 0.05:
        verdict = "consistent with O(1/T)"
    elif slope >= 0.75:
        verdict = "non-convergent"
    else:
        verdict = "borderline"
    return RateTrend(ratio, slope, doubling, verdict)
