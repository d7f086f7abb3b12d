"""Stochastic proximal gradient methods with diagonal preconditioners.

The hot per-coordinate kernels come from a compiled extension when it was
built, and from a numpy fallback otherwise; ``proxgen.BACKEND`` says which.
"""

from ._backend import BACKEND
from .core import (
    BatchSampler,
    ConfigurationError,
    LambdaSchedule,
    MomentumSchedule,
    ProxDomainError,
    RngStream,
    StepSchedule,
    as_param_vector,
    schedule_lambda,
    schedule_momentum,
    schedule_stepsize,
)
from .diagnostics import RunRecord, monitor_conditions, rate_trend, stationarity_bound, support_metrics
from .optim import DivergenceError, RunResult, StepperConfig, run
from .precond import MomentumState, PrecondState, check_c4, update_momentum, update_preconditioner
from .problems import MlpSpec, generate_blobs, generate_lasso
from .prox import (
    Penalty,
    RegularizerSpec,
    prox_l0,
    prox_l1,
    prox_l_half,
    prox_l_two_thirds,
    prox_oracle_1d,
    prox_quant_lq,
    prox_sparse_lq,
    prox_vector,
)

__version__ = "0.1.0"
