"""First-order momentum and diagonal preconditioner state.

States are small immutable records; every update returns a new state so a
stepper can keep the previous momentum around for the stationarity witness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigurationError

PRECOND_KINDS = ("identity", "adagrad", "adam-ema")


def _check_len(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ConfigurationError(f"length mismatch: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class MomentumState:
    m: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, p: int) -> "MomentumState":
        return cls(np.zeros(p))


def update_momentum(state: MomentumState, g, rho_t: float) -> MomentumState:
    """m_t = rho_t * m_{t-1} + (1 - rho_t) * g_t."""
    g = np.asarray(g, dtype=np.float64)
    _check_len(state.m, g)
    if not 0.0 <= rho_t < 1.0:
        raise ConfigurationError(f"momentum parameter must lie in [0, 1), got {rho_t}")
    return MomentumState(rho_t * state.m + (1.0 - rho_t) * g, state.t + 1)


@dataclass(frozen=True)
class PrecondState:
    """Diagonal preconditioner C_t.

    ``accum`` holds the running sum of g^2 (adagrad) or its EMA (adam-ema);
    ``C`` is derived from it on every update. The identity kind keeps C = 1.
    """

    kind: str
    C: np.ndarray
    accum: np.ndarray
    beta: float = 0.999
    delta: float = 1e-8
    t: int = 0

    def __post_init__(self):
        if self.kind not in PRECOND_KINDS:
            raise ConfigurationError(f"unknown preconditioner kind {self.kind!r}")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigurationError("beta must lie in [0, 1)")
        if not self.delta > 0.0:
            raise ConfigurationError("delta must be positive")

    @classmethod
    def fresh(cls, kind: str, p: int, beta: float = 0.999, delta: float = 1e-8) -> "PrecondState":
        C = np.ones(p) if kind == "identity" else np.zeros(p)
        return cls(kind, C, np.zeros(p), beta, delta)


def update_preconditioner(state: PrecondState, g) -> PrecondState:
    g = np.asarray(g, dtype=np.float64)
    _check_len(state.C, g)
    if state.kind == "identity":
        return replace(state, t=state.t + 1)
    t = state.t + 1
    if state.kind == "adagrad":
        # time-normalized: C_t = sqrt((1/t) sum g^2)
        accum = state.accum + g * g
        C = np.sqrt(accum / t)
    else:
        accum = state.beta * state.accum + (1.0 - state.beta) * (g * g)
        C = np.sqrt(accum)
    return PrecondState(state.kind, C, accum, state.beta, state.delta, t)


def effective_diag(state: PrecondState) -> np.ndarray:
    return state.C + state.delta


def check_c4(state: PrecondState, alpha_t: float, gamma_target: float) -> tuple[bool, float]:
    """Smallest eigenvalue of alpha_t (C_t + delta I)^{-1} against a target gamma.

    Returns ``(observed >= gamma_target, observed)``.
    """
    observed = float(alpha_t / np.max(effective_diag(state)))
    return observed >= gamma_target, observed
