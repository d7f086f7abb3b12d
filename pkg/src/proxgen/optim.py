"""Stochastic proximal steppers and the run loop.

Every method shares the same per-iteration front half: draw a minibatch,
take its gradient, update the momentum, then the preconditioner. They differ
only in how the next iterate is formed:

* ``proxgen``: exact prox in the metric C_t + delta I after a preconditioned step.
* ``proxgen-w``: the same, centered at the decayed point (1 - alpha zeta) theta_t.
* ``prox-sgd``: prox subproblem without stepsize, then interpolation by alpha_t.
* ``subgradient``: preconditioned step along m_t + lambda * (sub)gradient of R.
* ``proxquant-original``: preconditioned step followed by a Euclidean prox.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    BatchSampler,
    ConfigurationError,
    LambdaSchedule,
    MomentumSchedule,
    RngStream,
    StepSchedule,
    as_param_vector,
)
from .diagnostics import RunRecord, sparsity, support_metrics, witness
from .precond import (
    PRECOND_KINDS,
    MomentumState,
    PrecondState,
    effective_diag,
    update_momentum,
    update_preconditioner,
)
from .prox import RegularizerSpec, prox_vector

METHODS = ("proxgen", "proxgen-w", "prox-sgd", "subgradient", "proxquant-original")


class DivergenceError(RuntimeError):
    """A run produced a non-finite gradient or iterate. Carries the records made so far."""

    def __init__(self, message: str, records=None, t: int | None = None):
        super().__init__(message)
        self.records = records if records is not None else []
        self.t = t


@dataclass(frozen=True)
class StepperConfig:
    method: str = "proxgen"
    step_schedule: StepSchedule = StepSchedule()
    momentum_schedule: MomentumSchedule = MomentumSchedule("constant", 0.9)
    regularizer: RegularizerSpec = RegularizerSpec("sparse", 1.0, LambdaSchedule())
    precond_kind: str = "adam-ema"
    beta: float = 0.999
    delta: float = 1e-8
    zeta: float = 0.0
    batch_size: int = 10
    max_iters: int = 1000
    hard_quantize_at: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.precond_kind not in PRECOND_KINDS:
            raise ConfigurationError(f"unknown preconditioner {self.precond_kind!r}")
        if self.zeta < 0:
            raise ConfigurationError("weight decay must be non-negative")
        if self.zeta > 0 and self.method not in ("proxgen-w", "subgradient"):
            raise ConfigurationError("decoupled weight decay is only available to proxgen-w and subgradient")
        if self.hard_quantize_at is not None and self.regularizer.family != "quant":
            raise ConfigurationError("hard quantization requires a quantization regularizer")
        if self.method == "subgradient" and self.regularizer.q == 0.0:
            raise ConfigurationError("the l0 penalty cannot be optimized by subgradients")
        if self.method == "proxquant-original" and self.regularizer.family != "quant":
            raise ConfigurationError("proxquant-original needs a quantization regularizer")
        if self.batch_size < 1 or self.max_iters < 0:
            raise ConfigurationError("batch size must be positive and max_iters non-negative")


@dataclass
class StepOutcome:
    t: int
    theta: np.ndarray
    center: np.ndarray
    theta_next: np.ndarray
    g: np.ndarray
    m_prev: np.ndarray
    m: np.ndarray
    diag: np.ndarray
    alpha: float
    rho: float
    lam: float


def _front(theta, problem, cfg: StepperConfig, mom: MomentumState, pre: PrecondState, t: int, sampler: BatchSampler):
    idx = sampler.next()
    g = problem.minibatch_gradient(theta, idx)
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"non-finite gradient at iteration {t}", t=t)
    rho = cfg.momentum_schedule(t)
    mom_next = update_momentum(mom, g, rho)
    pre_next = update_preconditioner(pre, g)
    return g, rho, mom_next, pre_next


def _finish(t, theta, center, theta_next, g, mom, mom_next, pre_next, alpha, rho, lam):
    if not np.all(np.isfinite(theta_next)):
        raise DivergenceError(f"non-finite iterate at iteration {t}", t=t)
    return StepOutcome(t, theta, center, theta_next, g, mom.m, mom_next.m, effective_diag(pre_next), alpha, rho, lam)


def _step(theta, problem, cfg, mom, pre, t, sampler):
    g, rho, mom_next, pre_next = _front(theta, problem, cfg, mom, pre, t, sampler)
    kappa = effective_diag(pre_next)
    alpha = cfg.step_schedule(t)
    reg = cfg.regularizer
    lam = reg.lam(t)
    m = mom_next.m
    method = cfg.method

    if method in ("proxgen", "proxgen-w", "proxquant-original"):
        center = (1.0 - alpha * cfg.zeta) * theta if method == "proxgen-w" else theta
        theta_hat = center - alpha * m / kappa
        metric = np.ones_like(kappa) if method == "proxquant-original" else kappa
        theta_next = prox_vector(theta_hat, metric, alpha, reg, t)
    elif method == "prox-sgd":
        center = theta
        theta_hat = prox_vector(theta - m / kappa, kappa, 1.0, reg, t)
        theta_next = theta + alpha * (theta_hat - theta)
    else:
        center = (1.0 - alpha * cfg.zeta) * theta if cfg.zeta > 0 else theta
        direction = m + lam * reg.subgradient(theta) if lam > 0 else m
        theta_next = center - alpha * direction / kappa

    out = _finish(t, theta, center, theta_next, g, mom, mom_next, pre_next, alpha, rho, lam)
    return out, mom_next, pre_next


def step_proxgen(theta, problem, cfg, mom, pre, t, sampler):
    """theta_{t+1} = prox^{C+delta}_{alpha lam R}(theta_t - alpha (C+delta)^{-1} m_t)."""
    return _step(theta, problem, _with_method(cfg, "proxgen"), mom, pre, t, sampler)


def step_proxgen_w(theta, problem, cfg, mom, pre, t, sampler):
    return _step(theta, problem, _with_method(cfg, "proxgen-w"), mom, pre, t, sampler)


def step_prox_sgd(theta, problem, cfg, mom, pre, t, sampler):
    return _step(theta, problem, _with_method(cfg, "prox-sgd"), mom, pre, t, sampler)


def step_subgradient(theta, problem, cfg, mom, pre, t, sampler):
    return _step(theta, problem, _with_method(cfg, "subgradient"), mom, pre, t, sampler)


def step_proxquant_original(theta, problem, cfg, mom, pre, t, sampler):
    return _step(theta, problem, _with_method(cfg, "proxquant-original"), mom, pre, t, sampler)


def _with_method(cfg: StepperConfig, method: str) -> StepperConfig:
    if cfg.method == method:
        return cfg
    from dataclasses import replace

    return replace(cfg, method=method)


def hard_quantize(theta) -> np.ndarray:
    """Snap every coordinate to +-1; zero goes to +1."""
    return np.where(np.asarray(theta) < 0.0, -1.0, 1.0)


@dataclass
class RunResult:
    records: list[RunRecord]
    theta: np.ndarray
    status: str = "ok"
    message: str = ""
    quantized_at: int | None = None
    iterations: int = 0
    extras: dict = field(default_factory=dict)


def make_record(outcome: StepOutcome, problem, reg: RegularizerSpec, grad_max: float, grad_variance: float = 0.0) -> RunRecord:
    grad_next = problem.full_gradient(outcome.theta_next)
    theta_next = outcome.theta_next
    rec = RunRecord(
        t=outcome.t,
        objective=problem.loss_value(theta_next) + outcome.lam * reg.value(theta_next),
        stationarity_bound=float(np.linalg.norm(witness(outcome, grad_next))),
        sparsity=sparsity(theta_next),
        momentum_norm=float(np.linalg.norm(outcome.m)),
        grad_norm=float(np.linalg.norm(outcome.g)),
        grad_norm_max=grad_max,
        c4_min_eig=float(outcome.alpha / np.max(outcome.diag)),
        step_norm=float(np.linalg.norm(theta_next - outcome.theta)),
        grad_variance=grad_variance,
        lam=outcome.lam,
        alpha=outcome.alpha,
    )
    if getattr(problem, "support", None) is not None:
        rec.support_precision, rec.support_recall, rec.support_f1 = support_metrics(theta_next, problem.support)
    return rec


def _probe_variance(problem, theta, sampler: BatchSampler, probes: int) -> float:
    # mean squared deviation of minibatch gradients from the full gradient
    if probes <= 0 or sampler.full_batch:
        return 0.0
    full = problem.full_gradient(theta)
    dev = [np.sum((problem.minibatch_gradient(theta, sampler.next()) - full) ** 2) for _ in range(probes)]
    return float(np.mean(dev))


def run(
    problem,
    cfg: StepperConfig,
    rng: RngStream,
    diagnostics_every: int = 100,
    theta0=None,
    variance_probes: int = 0,
    callback=None,
) -> RunResult:
    """Execute `cfg.max_iters` iterations of the configured method.

    Records diagnostics every `diagnostics_every` iterations and at the last
    one. Minibatches come from `rng`; variance probes use a separate stream
    so they never perturb the trajectory. With ``hard_quantize_at`` set, the
    iterate is snapped to +-1 after that iteration and the run stops there.
    Raises :class:`DivergenceError` (records attached) on non-finite values.
    """
    if diagnostics_every < 1:
        raise ConfigurationError("diagnostics_every must be positive")
    theta = np.zeros(problem.dim) if theta0 is None else as_param_vector(theta0)
    if theta.shape != (problem.dim,):
        raise ConfigurationError(f"initial point has {theta.shape[0]} coordinates, problem has {problem.dim}")
    sampler = BatchSampler(problem.n, cfg.batch_size, rng)
    probe_sampler = BatchSampler(problem.n, cfg.batch_size, RngStream(rng.seed, rng.stream + 0x9E3779B9))
    mom = MomentumState.zeros(problem.dim)
    pre = PrecondState.fresh(cfg.precond_kind, problem.dim, cfg.beta, cfg.delta)
    records: list[RunRecord] = []
    grad_max = 0.0
    T = cfg.max_iters
    result = RunResult(records, theta)
    for t in range(1, T + 1):
        try:
            # overflow shows up as non-finite values, which _step reports itself
            with np.errstate(over="ignore", invalid="ignore"):
                outcome, mom, pre = _step(theta, problem, cfg, mom, pre, t, sampler)
        except DivergenceError as err:
            err.records = records
            raise
        grad_max = max(grad_max, float(np.linalg.norm(outcome.g)))
        quantize = cfg.hard_quantize_at is not None and t == cfg.hard_quantize_at
        if quantize:
            outcome.theta_next = hard_quantize(outcome.theta_next)
        if t % diagnostics_every == 0 or t == T or quantize:
            var = _probe_variance(problem, outcome.theta_next, probe_sampler, variance_probes)
            with np.errstate(over="ignore", invalid="ignore"):
                records.append(make_record(outcome, problem, cfg.regularizer, grad_max, var))
        if callback is not None:
            callback(outcome)
        theta = outcome.theta_next
        result.iterations = t
        if quantize:
            result.quantized_at = t
            break
    result.theta = theta
    return result
