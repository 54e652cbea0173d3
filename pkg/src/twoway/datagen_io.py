"""Synthetic sparse regression/classification data, LIBSVM ingestion, splits."""
import io
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from .errors import ConfigError, ParseError
from .models import Shard

COV_RHO = {"ar1_half": 0.5, "ar1_half_fifth": 0.5 ** 0.2}


@dataclass(frozen=True)
class SynthSpec:
    m: int
    n: int
    d: int
    s: int
    cov_kind: str = "ar1_half"
    model: str = "linear"
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.cov_kind not in COV_RHO:
            raise ConfigError(f"unknown cov_kind {self.cov_kind!r}")
        if self.model not in ("linear", "logistic"):
            raise ConfigError(f"unknown model {self.model!r}")
        if min(self.m, self.n, self.d) < 1 or not 0 <= self.s <= self.d:
            raise ConfigError("need m, n, d >= 1 and 0 <= s <= d")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def to_manifest(self):
        return "".join(f"{k.replace('_', '-')}={v}\n" for k, v in asdict(self).items())


def ar1_rows(rng, n, d, rho):
    """n rows of a stationary AR(1) sequence: cov(x_i, x_j) = rho**|i - j|, unit variance."""
    z = rng.standard_normal((n, d))
    c = np.sqrt(1.0 - rho * rho)
    # x_0 = z_0, x_t = rho * x_{t-1} + c * z_t
    z[:, 0] /= c
    return lfilter([c], [1.0, -rho], z, axis=1)


def _theta_star(spec):
    rng = np.random.default_rng([spec.seed, 2 ** 32])
    theta = np.zeros(spec.d)
    vals = rng.uniform(0.0, 1.0, spec.s)
    while np.any(vals == 0.0):
        zero = vals == 0.0
        vals[zero] = rng.uniform(0.0, 1.0, int(zero.sum()))
    theta[: spec.s] = vals
    return theta


def gen_shard(spec, j, theta_star=None):
    """Machine j's shard alone; independent of every other shard's generation."""
    if theta_star is None:
        theta_star = _theta_star(spec)
    rng = np.random.default_rng(spec.seed ^ j)
    X = ar1_rows(rng, spec.n, spec.d, COV_RHO[spec.cov_kind])
    u = X @ theta_star
    if spec.model == "linear":
        y = u + spec.noise_sigma * rng.standard_normal(spec.n) if spec.noise_sigma > 0 else u
        return Shard(X, y, "squared")
    y = np.where(rng.uniform(size=spec.n) < expit(u), 1.0, -1.0)
    return Shard(X, y, "logistic")


def gen_synthetic(spec):
    theta_star = _theta_star(spec)
    return [gen_shard(spec, j, theta_star) for j in range(spec.m)], theta_star


@dataclass
class LibsvmData:
    X: np.ndarray
    y: np.ndarray


def parse_libsvm(stream, task="auto", n_features=None):
    """Read LIBSVM text ("label idx:val ...", 1-based increasing indices).

    ``task`` is "classification", "regression" or "auto" (two distinct labels
    means classification). Classification labels become -1/+1, smaller label
    negative. ``n_features`` pads the dense matrix beyond the largest index seen.
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream.decode() if isinstance(stream, bytes) else stream)
    labels, rows, cols, vals = [], [], [], []
    max_idx = 0
    r = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed token {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed token {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} < 1", lineno)
            if idx <= prev:
                raise ParseError(f"feature index {idx} not increasing", lineno)
            if not np.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", lineno)
            prev = idx
            rows.append(r)
            cols.append(idx - 1)
            vals.append(val)
        max_idx = max(max_idx, prev)
        r += 1
    d = max_idx if n_features is None else int(n_features)
    if d < max_idx:
        raise ConfigError(f"n_features={d} but the file uses index {max_idx}")
    X = np.zeros((r, d))
    X[rows, cols] = vals
    y = np.asarray(labels, dtype=np.float64)
    uniq = np.unique(y)
    if task == "auto":
        task = "classification" if uniq.size == 2 else "regression"
    if task == "classification":
        if uniq.size > 2:
            raise ConfigError(f"classification file has {uniq.size} distinct labels")
        if uniq.size == 2:
            y = np.where(y == uniq[1], 1.0, -1.0)
        elif uniq.size == 1 and uniq[0] not in (-1.0, 1.0):
            raise ConfigError("cannot map a single non +/-1 label to a class")
    elif task != "regression":
        raise ConfigError(f"unknown task {task!r}")
    return LibsvmData(X, y)


def load_libsvm(path, task="auto", n_features=None):
    if str(path).endswith(".gz"):
        import gzip

        with gzip.open(path, "rt", encoding="utf-8") as fh:
            return parse_libsvm(fh, task, n_features)
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, task, n_features)


def split_and_shard(X, y, m, seed, fractions=(0.6, 0.2, 0.2), loss="squared"):
    """Permute rows, carve validation/test, and deal the train rows round-robin to m shards.

    Validation and test get floor(fraction * N) rows each; the remainder is train.
    Returns (shards, validation Shard, test Shard); empty holdouts are None.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ConfigError("fractions must be three non-negative numbers summing to 1")
    N = X.shape[0]
    n_val = int(np.floor(fractions[1] * N + 1e-9))
    n_test = int(np.floor(fractions[2] * N + 1e-9))
    n_train = N - n_val - n_test
    if m < 1 or n_train < m:
        raise ConfigError(f"{n_train} training rows cannot fill {m} shards")
    perm = np.random.default_rng(seed).permutation(N)
    train, val, test = perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]
    shards = [Shard(X[train[j::m]], y[train[j::m]], loss) for j in range(m)]
    hold = [Shard(X[idx], y[idx], loss) if idx.size else None for idx in (val, test)]
    return shards, hold[0], hold[1]
