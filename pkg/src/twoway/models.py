"""Squared and logistic losses evaluated on one machine's data shard."""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError

LOSS_KINDS = ("squared", "logistic")


@dataclass(frozen=True, eq=False)
class Shard:
    """One machine's local data: ``X`` is n x d (row-major), ``y`` has length n."""

    X: np.ndarray
    y: np.ndarray
    loss: str = "squared"

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ConfigError(f"shard design must be a non-empty 2-d array, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise ConfigError(f"{X.shape[0]} rows but {y.shape[0]} responses")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ConfigError("shard has non-finite entries")
        if self.loss == "logistic" and not np.all(np.abs(y) == 1.0):
            raise ConfigError("logistic responses must be -1 or +1")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class LossConstants:
    smoothness_L: float
    third_deriv_M: float


def concat_shards(shards):
    """Pool all shards into one (the centralized baseline's view of the data)."""
    if not shards:
        raise ConfigError("no shards to pool")
    if any(s.d != shards[0].d or s.loss != shards[0].loss for s in shards):
        raise ConfigError("shards differ in dimension or loss")
    return Shard(np.vstack([s.X for s in shards]), np.concatenate([s.y for s in shards]), shards[0].loss)


def _check(shard, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (shard.d,):
        raise ConfigError(f"dimension mismatch: shard has d={shard.d}, theta has shape {theta.shape}")
    return theta


def loss_from_margins(shard, u):
    if shard.loss == "squared":
        r = shard.y - u
        return 0.5 * float(np.dot(r, r)) / shard.n
    # log(1 + exp(-y u)) without overflow
    return float(np.mean(np.logaddexp(0.0, -shard.y * u)))


def grad_from_margins(shard, u):
    if shard.loss == "squared":
        w = u - shard.y
    else:
        w = -shard.y * expit(-shard.y * u)
    return shard.X.T @ w / shard.n


def loss_value(shard, theta):
    theta = _check(shard, theta)
    return loss_from_margins(shard, shard.X @ theta)


def loss_gradient(shard, theta):
    theta = _check(shard, theta)
    return grad_from_margins(shard, shard.X @ theta)


def scalar_derivative(loss, y, u):
    """d/du of the per-sample loss l(y, u); used by smoothness checks."""
    if loss == "squared":
        return u - y
    return -y * expit(-y * u)


# max of s(1-s)(1-2s) over the sigmoid range, attained at s = 1/2 - 1/(2*sqrt(3))
_LOGISTIC_M = 1.0 / (6.0 * np.sqrt(3.0))


def loss_constants(loss):
    if loss == "squared":
        return LossConstants(1.0, 0.0)
    if loss == "logistic":
        return LossConstants(0.25, _LOGISTIC_M)
    raise ConfigError(f"unknown loss {loss!r}")
