"""Run configuration shared by the engine and the command line."""
from dataclasses import asdict, dataclass, fields
from typing import Optional

from .errors import ConfigError

ALGOS = ("twoway", "edsl", "centralized", "local")
MODELS = {"linear": "squared", "logistic": "logistic"}
COV_KINDS = ("ar1_half", "ar1_half_fifth")
TRANSPORTS = ("inproc", "tcp")


@dataclass
class RunConfig:
    algo: str = "twoway"
    model: str = "linear"
    m: int = 4
    n: int = 200
    d: int = 500
    s: int = 5
    k: Optional[int] = None          # None -> 2 * s
    rounds: int = 10
    mu0: Optional[float] = None      # None -> entry point of the k-th lasso coordinate
    mu_alpha: float = 0.5
    mu_min: Optional[float] = None   # None -> sigma_hat * sqrt(2 log d / (m n))
    cov_kind: str = "ar1_half"
    noise_sigma: float = 1.0
    seed: int = 0
    transport: str = "inproc"
    listen: Optional[str] = None
    connect: Optional[str] = None
    data: Optional[str] = None
    output: Optional[str] = None
    tol: float = 1e-8
    max_inner_iters: int = 10_000
    project_gradients: bool = True
    timing: bool = True

    @property
    def loss(self):
        return MODELS[self.model]

    @property
    def effective_k(self):
        return 2 * self.s if self.k is None else self.k

    def validate(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {tuple(MODELS)}, got {self.model!r}")
        if self.cov_kind not in COV_KINDS:
            raise ConfigError(f"cov-kind must be one of {COV_KINDS}, got {self.cov_kind!r}")
        if self.transport not in TRANSPORTS:
            raise ConfigError(f"transport must be one of {TRANSPORTS}, got {self.transport!r}")
        for name in ("m", "n", "d"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.s <= self.d:
            raise ConfigError("s must lie in [0, d]")
        if self.effective_k < 1:
            raise ConfigError("k must be >= 1")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if not 0 < self.mu_alpha <= 1:
            raise ConfigError("mu-alpha must lie in (0, 1]")
        for name in ("mu0", "mu_min"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name.replace('_', '-')} must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise-sigma must be >= 0")
        if self.transport == "tcp" and not self.listen:
            raise ConfigError("tcp transport requires --listen")
        return self

    def replace(self, **changes):
        out = RunConfig(**{**asdict(self), **changes})
        return out.validate()


def field_names():
    return [f.name for f in fields(RunConfig)]
