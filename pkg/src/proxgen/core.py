"""Shared numeric types: schedules, parameter vectors and seeded randomness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a schedule, regularizer or stepper is configured inconsistently."""


class ProxDomainError(ArithmeticError):
    """A closed-form prox left its mathematical domain; signals a kernel bug, not bad input."""


def as_param_vector(values, copy: bool = True) -> np.ndarray:
    """Return `values` as a finite 1-D float64 array.

    Raises
    ------
    ConfigurationError
        If the input is not one-dimensional, empty, or holds NaN/Inf.
    """
    arr = np.array(values, dtype=np.float64, copy=copy)
    if arr.ndim != 1 or arr.size < 1:
        raise ConfigurationError(f"parameter vector must be 1-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("parameter vector contains non-finite entries")
    return arr


@dataclass(frozen=True)
class StepSchedule:
    """Non-increasing stepsize: constant, or multiplied by `decay_factor` at each milestone."""

    kind: str = "constant"
    alpha0: float = 1e-3
    decay_factor: float = 1.0
    milestones: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "step-decay"):
            raise ConfigurationError(f"unknown step schedule kind {self.kind!r}")
        if not (self.alpha0 > 0 and math.isfinite(self.alpha0)):
            raise ConfigurationError("alpha0 must be positive and finite")
        if not (0 < self.decay_factor <= 1):
            raise ConfigurationError("decay_factor must lie in (0, 1]")
        ms = tuple(int(m) for m in self.milestones)
        if list(ms) != sorted(ms):
            raise ConfigurationError("milestones must be sorted")
        object.__setattr__(self, "milestones", ms)

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.alpha0
        passed = sum(1 for m in self.milestones if m <= t)
        return self.alpha0 * self.decay_factor**passed


@dataclass(frozen=True)
class MomentumSchedule:
    kind: str = "constant"
    rho0: float = 0.9
    mu: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "exponential"):
            raise ConfigurationError(f"unknown momentum schedule kind {self.kind!r}")
        if not (0 <= self.rho0 < 1):
            raise ConfigurationError("rho0 must lie in [0, 1)")
        if self.kind == "exponential" and not (0 <= self.mu < 1):
            raise ConfigurationError("mu must lie in [0, 1) for the exponential kind")

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.rho0
        return self.rho0 * self.mu ** (t - 1)


@dataclass(frozen=True)
class LambdaSchedule:
    """Regularization strength; the homotopy kind multiplies the base value by the epoch index."""

    kind: str = "constant"
    lambda_base: float = 0.0
    epoch_length: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "homotopy"):
            raise ConfigurationError(f"unknown lambda schedule kind {self.kind!r}")
        if not (self.lambda_base >= 0 and math.isfinite(self.lambda_base)):
            raise ConfigurationError("lambda_base must be non-negative and finite")
        if int(self.epoch_length) < 1:
            raise ConfigurationError("epoch_length must be a positive integer")

    def epoch(self, t: int) -> int:
        # iterations 1..epoch_length belong to epoch 1
        return -(-t // self.epoch_length)

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.lambda_base
        return self.lambda_base * self.epoch(t)


def schedule_stepsize(sched: StepSchedule, t: int) -> float:
    return sched(t)


def schedule_momentum(sched: MomentumSchedule, t: int) -> float:
    return sched(t)


def schedule_lambda(sched: LambdaSchedule, t: int) -> float:
    return sched(t)


@dataclass(frozen=True)
class RngStream:
    """Seeded PCG64 stream; equal (seed, stream) pairs replay identical draws."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)


@dataclass
class BatchSampler:
    """Epoch-wise shuffled minibatches of `batch_size` indices out of `n`.

    Any remainder smaller than a batch is dropped each epoch. With
    ``batch_size >= n`` every call returns the full index set, in order.
    """

    n: int
    batch_size: int
    rng: RngStream
    _gen: np.random.Generator = field(init=False, repr=False)
    _perm: np.ndarray = field(init=False, repr=False)
    _pos: int = field(init=False, default=0)

    def __post_init__(self):
        if self.n < 1 or self.batch_size < 1:
            raise ConfigurationError("sample count and batch size must be positive")
        self._gen = self.rng.generator()
        self._full = np.arange(self.n)
        self._perm = self._full
        self._pos = self.n  # forces a shuffle on first draw

    @property
    def full_batch(self) -> bool:
        return self.batch_size >= self.n

    @property
    def batches_per_epoch(self) -> int:
        return 1 if self.full_batch else self.n // self.batch_size

    def next(self) -> np.ndarray:
        if self.full_batch:
            return self._full
        if self._pos + self.batch_size > self.n:
            self._perm = self._gen.permutation(self.n)
            self._pos = 0
        idx = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return idx


def log_uniform(gen: np.random.Generator, low: float, high: float, size) -> np.ndarray:
    return np.exp(gen.uniform(np.log(low), np.log(high), size))


def one_two_five_grid(low: float = 1e-3, high: float = 5.0) -> list[float]:
    """The 1-2-5 ladder of values between `low` and `high` inclusive."""
    out = []
    decade = 10.0 ** math.floor(math.log10(low))
    while decade <= high:
        for m in (1, 2, 5):
            v = float(f"{m * decade:.12g}")
            if low <= v <= high:
                out.append(v)
        decade *= 10
    return out


def norm(x: Sequence[float]) -> float:
    return float(np.linalg.norm(x))
