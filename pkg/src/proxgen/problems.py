"""Desk-scale smooth losses with exact minibatch gradients.

Each problem is a finite sum over ``n`` samples. ``minibatch_gradient`` and
``loss_value`` average over the given index set, so the full index set
reproduces the full-batch quantities exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigurationError, RngStream


class Problem:
    """Finite-sum objective f(theta) = (1/n) sum_i f_i(theta)."""

    n: int
    dim: int
    support: np.ndarray | None = None
    lipschitz: float | None = None

    def minibatch_gradient(self, theta: np.ndarray, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loss_value(self, theta: np.ndarray, idx: np.ndarray | None = None) -> float:
        raise NotImplementedError

    def full_gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.minibatch_gradient(theta, np.arange(self.n))

    def per_sample_gradients(self, theta: np.ndarray) -> np.ndarray:
        return np.stack([self.minibatch_gradient(theta, np.array([i])) for i in range(self.n)])


class LeastSquaresProblem(Problem):
    """f(theta) = (1/2n) ||X theta - y||^2."""

    def __init__(self, X, y):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.n, self.dim = self.X.shape
        if self.y.shape != (self.n,):
            raise ConfigurationError("response length does not match the design matrix")
        self.lipschitz = lipschitz_estimate(self.X)

    def minibatch_gradient(self, theta, idx):
        Xb = self.X[idx]
        return Xb.T @ (Xb @ theta - self.y[idx]) / len(idx)

    def full_gradient(self, theta):
        return self.X.T @ (self.X @ theta - self.y) / self.n

    def loss_value(self, theta, idx=None):
        if idx is None:
            r = self.X @ theta - self.y
        else:
            r = self.X[idx] @ theta - self.y[idx]
        return 0.5 * float(r @ r) / len(r)

    def per_sample_gradients(self, theta):
        return self.X * (self.X @ theta - self.y)[:, None]


def lipschitz_estimate(X: np.ndarray, iters: int = 20000, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of X^T X / n.

    Iterates on whichever of X^T X and X X^T is smaller (same top eigenvalue)
    and stops once the Rayleigh quotient settles to 1e-13 relative.
    """
    n, p = X.shape
    A = (X.T @ X if p <= n else X @ X.T) / n
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= 1e-13 * lam_new:
            return lam_new
        lam = lam_new
    return lam


@dataclass(frozen=True)
class LassoInstance:
    X: np.ndarray
    y: np.ndarray
    theta_star: np.ndarray
    support: np.ndarray
    noise_sigma: float


def generate_lasso(p: int, n: int, k: int, noise: float, rng: RngStream):
    """Sparse linear model y = X theta* + eps with +-1 entries on a random support.

    X has i.i.d. N(0, 1) entries and eps ~ N(0, noise^2). Returns the
    instance and its least-squares :class:`Problem`.
    """
    if not 1 <= k <= p:
        raise ConfigurationError(f"sparsity k={k} must lie in [1, p={p}]")
    if n < 1:
        raise ConfigurationError("need at least one sample")
    if noise < 0:
        raise ConfigurationError("noise level must be non-negative")
    gen = rng.generator()
    X = gen.standard_normal((n, p))
    support = np.sort(gen.choice(p, size=k, replace=False))
    theta_star = np.zeros(p)
    theta_star[support] = gen.choice([-1.0, 1.0], size=k)
    y = X @ theta_star + noise * gen.standard_normal(n)
    problem = LeastSquaresProblem(X, y)
    problem.support = support
    return LassoInstance(X, y, theta_star, support, float(noise)), problem


class LogisticProblem(Problem):
    """Binary logistic regression with labels in {0, 1} and optional l2 term."""

    def __init__(self, X, y, l2: float = 0.0):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.n, self.dim = self.X.shape
        self.l2 = float(l2)

    def _margins(self, theta, idx):
        X = self.X if idx is None else self.X[idx]
        y = self.y if idx is None else self.y[idx]
        return X, y, X @ theta

    def minibatch_gradient(self, theta, idx):
        X, y, s = self._margins(theta, idx)
        prob = 0.5 * (1.0 + np.tanh(0.5 * s))
        return X.T @ (prob - y) / len(y) + self.l2 * theta

    def loss_value(self, theta, idx=None):
        X, y, s = self._margins(theta, idx)
        # log(1 + e^s) - y s, computed stably
        return float(np.mean(np.logaddexp(0.0, s) - y * s)) + 0.5 * self.l2 * float(theta @ theta)


@dataclass(frozen=True)
class MlpSpec:
    """One-hidden-layer network.

    Parameter layout (row-major, weights then bias per layer)::

        W1 (hidden_dim x input_dim) | b1 (hidden_dim) | W2 (output_dim x hidden_dim) | b2 (output_dim)
    """

    input_dim: int
    hidden_dim: int
    output_dim: int
    activation: str = "tanh"
    loss: str = "softmax-cross-entropy"

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.output_dim) < 1:
            raise ConfigurationError("layer sizes must be positive")
        if self.activation not in ("relu", "tanh"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.loss not in ("softmax-cross-entropy", "squared"):
            raise ConfigurationError(f"unknown loss {self.loss!r}")

    @property
    def n_params(self) -> int:
        return self.hidden_dim * (self.input_dim + 1) + self.output_dim * (self.hidden_dim + 1)

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ConfigurationError(f"expected {self.n_params} parameters, got {theta.shape}")
        d, h, o = self.input_dim, self.hidden_dim, self.output_dim
        i = 0
        W1 = theta[i:i + h * d].reshape(h, d)
        i += h * d
        b1 = theta[i:i + h]
        i += h
        W2 = theta[i:i + o * h].reshape(o, h)
        i += o * h
        b2 = theta[i:i + o]
        return W1, b1, W2, b2

    def init(self, rng: RngStream, scale: float | None = None) -> np.ndarray:
        gen = rng.generator()
        W1 = gen.standard_normal((self.hidden_dim, self.input_dim)) * (scale or 1.0 / np.sqrt(self.input_dim))
        W2 = gen.standard_normal((self.output_dim, self.hidden_dim)) * (scale or 1.0 / np.sqrt(self.hidden_dim))
        return np.concatenate([W1.ravel(), np.zeros(self.hidden_dim), W2.ravel(), np.zeros(self.output_dim)])


def _targets(spec: MlpSpec, Y) -> np.ndarray:
    Y = np.asarray(Y)
    if Y.ndim == 1 and spec.loss == "softmax-cross-entropy":
        return Y.astype(np.intp)
    if Y.ndim == 1:
        return np.eye(spec.output_dim)[Y.astype(np.intp)]
    return Y.astype(np.float64)


def mlp_forward(spec: MlpSpec, theta, X):
    W1, b1, W2, b2 = spec.unpack(theta)
    pre = X @ W1.T + b1
    hid = np.tanh(pre) if spec.activation == "tanh" else np.maximum(pre, 0.0)
    return pre, hid, hid @ W2.T + b2


def mlp_loss(spec: MlpSpec, theta, X, Y) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _, _, out = mlp_forward(spec, theta, X)
    T = _targets(spec, Y)
    if spec.loss == "squared":
        return 0.5 * float(np.sum((out - T) ** 2)) / len(X)
    lse = np.logaddexp.reduce(out, axis=1)
    return float(np.mean(lse - out[np.arange(len(X)), T]))


def mlp_gradient(spec: MlpSpec, theta, X, Y) -> np.ndarray:
    """Backpropagated gradient of the mean minibatch loss, in the flat layout."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.input_dim:
        raise ConfigurationError(f"inputs have {X.shape[1]} features, network expects {spec.input_dim}")
    W1, b1, W2, b2 = spec.unpack(theta)
    pre, hid, out = mlp_forward(spec, theta, X)
    T = _targets(spec, Y)
    b = len(X)
    if spec.loss == "squared":
        d_out = (out - T) / b
    else:
        d_out = np.exp(out - np.logaddexp.reduce(out, axis=1, keepdims=True))
        d_out[np.arange(b), T] -= 1.0
        d_out /= b
    gW2 = d_out.T @ hid
    gb2 = d_out.sum(axis=0)
    d_hid = d_out @ W2
    if spec.activation == "tanh":
        d_pre = d_hid * (1.0 - hid * hid)
    else:
        d_pre = d_hid * (pre > 0.0)
    gW1 = d_pre.T @ X
    gb1 = d_pre.sum(axis=0)
    return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])


def mlp_predict(spec: MlpSpec, theta, X) -> np.ndarray:
    _, _, out = mlp_forward(spec, theta, np.atleast_2d(X))
    return np.argmax(out, axis=1)


class MlpProblem(Problem):
    def __init__(self, spec: MlpSpec, X, Y):
        self.spec = spec
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.Y = np.asarray(Y)
        self.n = len(self.X)
        self.dim = spec.n_params

    def minibatch_gradient(self, theta, idx):
        return mlp_gradient(self.spec, theta, self.X[idx], self.Y[idx])

    def loss_value(self, theta, idx=None):
        if idx is None:
            return mlp_loss(self.spec, theta, self.X, self.Y)
        return mlp_loss(self.spec, theta, self.X[idx], self.Y[idx])

    def accuracy(self, theta, X=None, y=None) -> float:
        X = self.X if X is None else X
        y = self.Y if y is None else y
        return float(np.mean(mlp_predict(self.spec, theta, X) == y))


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def split(self, n_first: int) -> tuple["Dataset", "Dataset"]:
        return Dataset(self.X[:n_first], self.y[:n_first]), Dataset(self.X[n_first:], self.y[n_first:])


def generate_blobs(n: int, input_dim: int, classes: int, separation: float, rng: RngStream) -> Dataset:
    """Unit-variance Gaussian clusters, one per class.

    Centers sit at ``separation`` along distinct coordinate axes when
    ``classes <= input_dim``, else at Gaussian directions scaled to that norm.
    """
    if n < 1:
        raise ConfigurationError("a dataset needs at least one sample")
    if classes < 2:
        raise ConfigurationError("need at least two classes")
    gen = rng.generator()
    if classes <= input_dim:
        centers = separation * np.eye(classes, input_dim)
    else:
        dirs = gen.standard_normal((classes, input_dim))
        centers = separation * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    y = gen.integers(0, classes, size=n)
    X = centers[y] + gen.standard_normal((n, input_dim))
    return Dataset(X, y)


def save_dataset_csv(path, data: Dataset) -> None:
    """One row per sample, features then the label in the last column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(data.X.shape[1])] + ["label"])
        for row, label in zip(data.X, data.y):
            w.writerow([f"{v:.17g}" for v in row] + [str(label)])


def load_dataset_csv(path) -> Dataset:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    X = np.array([[float(v) for v in r[:-1]] for r in body])
    labels = [r[-1] for r in body]
    try:
        y = np.array([int(v) for v in labels])
    except ValueError:
        y = np.array([float(v) for v in labels])
    return Dataset(X, y)
