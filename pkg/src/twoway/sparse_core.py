"""Vector primitives: hard thresholding, support projection and norms.

Dense vectors are plain 1-d float64 numpy arrays. Supports and support-aligned
slices are small immutable wrappers so that message payloads carry their
index set with them.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "SupportSet",
    "SparseSlice",
    "as_dense",
    "hard_threshold",
    "support_of",
    "project",
    "norm",
]


def as_dense(v, d=None):
    """Coerce ``v`` to a finite float64 vector (optionally of length ``d``)."""
    out = np.asarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ConfigError(f"expected a 1-d vector, got shape {out.shape}")
    if d is not None and out.shape[0] != d:
        raise ConfigError(f"dimension mismatch: expected {d}, got {out.shape[0]}")
    if not np.all(np.isfinite(out)):
        raise ConfigError("vector has non-finite entries")
    return out


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Strictly increasing 0-based coordinate indices inside ``[0, ambient_dim)``."""

    indices: np.ndarray
    ambient_dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.ambient_dim:
                raise ConfigError(f"support index out of range [0, {self.ambient_dim})")
            if np.any(np.diff(idx) <= 0):
                raise ConfigError("support indices must be strictly increasing")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "ambient_dim", int(self.ambient_dim))

    @classmethod
    def full(cls, d):
        return cls(np.arange(d), d)

    @classmethod
    def empty(cls, d):
        return cls(np.empty(0, dtype=np.int64), d)

    def __len__(self):
        return int(self.indices.size)

    def __eq__(self, other):
        if not isinstance(other, SupportSet):
            return NotImplemented
        return self.ambient_dim == other.ambient_dim and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.ambient_dim, self.indices.tobytes()))

    def mask(self):
        m = np.zeros(self.ambient_dim, dtype=bool)
        m[self.indices] = True
        return m

    def difference(self, other):
        """Indices in ``self`` but not in ``other``."""
        return SupportSet(np.setdiff1d(self.indices, other.indices, assume_unique=True), self.ambient_dim)


@dataclass(frozen=True, eq=False)
class SparseSlice:
    """Values positionally aligned with ``support.indices``."""

    support: SupportSet
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if vals.shape[0] != len(self.support):
            raise ConfigError(
                f"slice has {vals.shape[0]} values for a support of size {len(self.support)}"
            )
        if not np.all(np.isfinite(vals)):
            raise ConfigError("slice has non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def densify(self):
        out = np.zeros(self.support.ambient_dim)
        out[self.support.indices] = self.values
        return out

    def __eq__(self, other):
        if not isinstance(other, SparseSlice):
            return NotImplemented
        return self.support == other.support and np.array_equal(self.values, other.values)


def hard_threshold(v, k):
    """Keep the ``k`` largest-magnitude entries of ``v``; ties keep the lower index."""
    v = np.asarray(v, dtype=np.float64)
    if k < 0:
        raise ConfigError("k must be non-negative")
    d = v.shape[0]
    if k >= d:
        return v.copy()
    out = np.zeros(d)
    if k == 0:
        return out
    # stable sort on -|v| keeps lower indices first among equal magnitudes
    keep = np.argsort(-np.abs(v), kind="stable")[:k]
    out[keep] = v[keep]
    return out


def support_of(v):
    v = np.asarray(v)
    return SupportSet(np.flatnonzero(v), v.shape[0])


def project(v, S):
    """Restrict ``v`` to the coordinates in ``S``."""
    v = np.asarray(v, dtype=np.float64)
    if S.ambient_dim != v.shape[0]:
        raise ConfigError(f"dimension mismatch: support over {S.ambient_dim}, vector of {v.shape[0]}")
    return SparseSlice(S, v[S.indices])


def norm(v, p="l2"):
    v = np.asarray(v, dtype=np.float64)
    if p == "l1":
        return float(np.sum(np.abs(v)))
    if p == "l2":
        return float(np.linalg.norm(v))
    if p == "linf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p == "l0":
        return int(np.count_nonzero(v))
    raise ConfigError(f"unknown norm {p!r}")
