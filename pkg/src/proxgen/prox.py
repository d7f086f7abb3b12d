"""Closed-form proximal maps for lq penalties under a diagonal metric.

Every operator solves, coordinate by coordinate,

    argmin_x  (kappa/2) (x - z)^2 + alpha * lam * pen(x)

which is the same program as ``(x - z)^2 + lambda_eff * pen(x)`` with
``lambda_eff = 2 * alpha * lam / kappa``. ``pen`` is ``|x|^q`` for the sparse
family and ``|x - sign(x)|^q`` (W-shaped, sign(0) = 0) for the quantization
family. Exponents are restricted to q in {0, 1/2, 2/3, 1}, the values with
closed forms.

Inputs are scalars or arrays (broadcast together); scalars come back as float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels_py
from ._backend import kernels
from .core import ConfigurationError, LambdaSchedule

SUPPORTED_Q = (0.0, 0.5, 2.0 / 3.0, 1.0)
FAMILIES = ("sparse", "quant")


def q_code(q: float) -> int:
    for code, value in enumerate(SUPPORTED_Q):
        if math.isclose(float(q), value, rel_tol=0.0, abs_tol=1e-12):
            # codes follow the kernel convention: 0 -> l0, 1 -> l1/2, 2 -> l2/3, 3 -> l1
            return code
    raise ConfigurationError(f"q must be one of 0, 1/2, 2/3, 1; got {q!r}")


def parse_q(text: str) -> float:
    """Parse '0', '1/2', '0.5', '2/3', '1' into a supported exponent."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/")
        value = float(num) / float(den)
    else:
        value = float(text)
    return SUPPORTED_Q[q_code(value)]


def q_label(q: float) -> str:
    return ("0", "1/2", "2/3", "1")[q_code(q)]


def _family(name: str) -> str:
    name = name.strip().lower()
    if name in ("sparse", "sparse-lq"):
        return "sparse"
    if name in ("quant", "quant-lq"):
        return "quant"
    raise ConfigurationError(f"unknown regularizer family {name!r}")


@dataclass(frozen=True)
class Penalty:
    """Scalar penalty with a kernel code, usable by the compiled oracle."""

    family: str
    q: float
    code: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "family", _family(self.family))
        object.__setattr__(self, "q", SUPPORTED_Q[q_code(self.q)])
        object.__setattr__(self, "code", q_code(self.q) + (4 if self.family == "quant" else 0))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return kernels.penalty(x.ravel(), self.code).reshape(x.shape)


@dataclass(frozen=True)
class RegularizerSpec:
    family: str = "sparse"
    q: float = 1.0
    lambda_schedule: LambdaSchedule = LambdaSchedule()

    def __post_init__(self):
        object.__setattr__(self, "family", _family(self.family))
        object.__setattr__(self, "q", SUPPORTED_Q[q_code(self.q)])

    @property
    def code(self) -> int:
        return q_code(self.q)

    @property
    def penalty(self) -> Penalty:
        return Penalty(self.family, self.q)

    def lam(self, t: int) -> float:
        return self.lambda_schedule(t)

    def value(self, theta) -> float:
        """R(theta) without the lambda factor."""
        return float(np.sum(self.penalty(np.asarray(theta, dtype=np.float64))))

    def subgradient(self, theta) -> np.ndarray:
        """Minimal-norm (formal) subgradient; 0 at every kink, undefined for q = 0."""
        if self.q == 0.0:
            raise ConfigurationError("the l0 penalty has no usable subgradient")
        theta = np.asarray(theta, dtype=np.float64)
        d = theta - np.sign(theta) if self.family == "quant" else theta
        if self.q == 1.0:
            return np.sign(d)
        a = np.abs(d)
        out = np.zeros_like(d)
        nz = a > 0
        out[nz] = self.q * np.sign(d[nz]) / a[nz] ** (1.0 - self.q)
        return out


def _apply(fn, z, kappa, alpha, lam, code):
    z, kappa, alpha, lam = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (z, kappa, alpha, lam)))
    if np.any(kappa <= 0) or np.any(alpha <= 0) or np.any(lam < 0):
        raise ConfigurationError("prox requires kappa > 0, alpha > 0, lambda >= 0")
    shape = z.shape
    out = fn(z.ravel(), kappa.ravel(), alpha.ravel(), lam.ravel(), code).reshape(shape)
    return float(out) if out.ndim == 0 else out


def prox_l1(z, kappa=1.0, alpha=1.0, lam=0.0):
    """Soft threshold at alpha*lam/kappa (with the positive-part clamp)."""
    return _apply(kernels.prox_sparse, z, kappa, alpha, lam, 3)


def prox_l0(z, kappa=1.0, alpha=1.0, lam=0.0):
    """Hard threshold at sqrt(2*alpha*lam/kappa); a tie returns 0."""
    return _apply(kernels.prox_sparse, z, kappa, alpha, lam, 0)


def prox_l_half(z, kappa=1.0, alpha=1.0, lam=0.0):
    return _apply(kernels.prox_sparse, z, kappa, alpha, lam, 1)


def prox_l_two_thirds(z, kappa=1.0, alpha=1.0, lam=0.0):
    return _apply(kernels.prox_sparse, z, kappa, alpha, lam, 2)


def prox_sparse_lq(z, kappa=1.0, alpha=1.0, lam=0.0, q=1.0):
    return _apply(kernels.prox_sparse, z, kappa, alpha, lam, q_code(q))


def prox_quant_lq(z, kappa=1.0, alpha=1.0, lam=0.0, q=1.0):
    """Prox of the W-shaped penalty |x - sign(x)|^q pulling coordinates toward +-1."""
    return _apply(kernels.prox_quant, z, kappa, alpha, lam, q_code(q))


def prox_vector(theta_hat, kappa_diag, alpha: float, spec: RegularizerSpec, t: int) -> np.ndarray:
    """Apply the scalar prox of `spec` to every coordinate of `theta_hat`.

    A diagonal metric makes the program separable, so this is exact.
    """
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    kappa_diag = np.asarray(kappa_diag, dtype=np.float64)
    if kappa_diag.shape != theta_hat.shape:
        raise ConfigurationError(f"metric length {kappa_diag.shape} does not match parameters {theta_hat.shape}")
    if not np.all(kappa_diag > 0):
        raise ConfigurationError("metric diagonal must be strictly positive")
    lam = spec.lam(t)
    if lam == 0.0:
        return theta_hat.copy()
    fn = kernels.prox_quant if spec.family == "quant" else kernels.prox_sparse
    return fn(theta_hat, kappa_diag, alpha, lam, spec.code)


def dead_zone_threshold(q: float, lambda_eff) -> np.ndarray:
    """Largest |z| that the sparse-family prox maps to exactly zero."""
    le = np.asarray(lambda_eff, dtype=np.float64)
    code = q_code(q)
    if code == 3:
        return 0.5 * le
    if code == 0:
        return np.sqrt(le)
    if code == 1:
        return np.cbrt(54.0) / 4.0 * le ** (2.0 / 3.0)
    return (2.0 / 3.0) * (3.0 * le**3) ** 0.25


def scalar_objective(x, z, lambda_eff, penalty: Callable) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (x - z) ** 2 + lambda_eff * penalty(x)


def prox_oracle_1d(z, lambda_eff, penalty: Callable, npts: int = 200_001):
    """Brute-force minimizer of (x - z)^2 + lambda_eff * penalty(x).

    Scans a uniform grid of `npts` points on [-(|z|+2), |z|+2] plus the
    points {0, z}, then refines the best grid bracket by golden-section
    search down to width 1e-12. `penalty` may be a :class:`Penalty` (fast
    path through the kernels) or any vectorized callable.
    """
    if npts < 200_001:
        raise ConfigurationError("the oracle grid needs at least 2e5 points")
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64))
    le = np.broadcast_to(np.asarray(lambda_eff, dtype=np.float64), z_arr.shape)
    if np.any(le < 0):
        raise ConfigurationError("lambda_eff must be non-negative")
    if isinstance(penalty, Penalty):
        out = kernels.oracle_min(z_arr, np.ascontiguousarray(le), penalty.code, npts)
    else:
        out = np.array([_kernels_py.oracle_min_one(zi, float(li), penalty, npts) for zi, li in zip(z_arr, le)])
    return float(out[0]) if np.ndim(z) == 0 else out
