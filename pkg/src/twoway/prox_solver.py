"""Master-side solver for the (shifted) l1-regularized local problem.

Minimizes  F(theta) = loss(shard, theta) + <shift, theta> + mu * ||theta||_1
with accelerated proximal gradient, backtracking on the step, and momentum
restarts (on objective increase, and on the gradient-mapping test). Accepted
iterates never increase the objective beyond round-off.
"""
from dataclasses import dataclass, field

import numpy as np

from . import models
from .errors import ConfigError, SolverError


@dataclass(frozen=True)
class SolveSettings:
    tol: float = 1e-8
    max_inner_iters: int = 10_000
    step_backtrack_factor: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_inner_iters < 1:
            raise ConfigError("max_inner_iters must be >= 1")
        if not 0 < self.step_backtrack_factor < 1:
            raise ConfigError("step_backtrack_factor must lie in (0, 1)")


@dataclass
class SolveResult:
    theta: np.ndarray
    residual: float
    iterations: int
    objective: float
    history: list = field(default_factory=list)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def objective(shard, shift, mu, theta):
    theta = np.asarray(theta, dtype=np.float64)
    lin = 0.0 if shift is None else float(np.dot(shift, theta))
    return models.loss_value(shard, theta) + lin + mu * float(np.sum(np.abs(theta)))


def _slack(f):
    # objective differences below this are round-off
    return 1e-14 * max(1.0, abs(f))


def _kkt(g, mu, theta):
    # g already includes the shift
    nz = theta != 0
    r = np.where(nz, np.abs(g + mu * np.sign(theta)), np.maximum(np.abs(g) - mu, 0.0))
    return float(np.max(r)) if r.size else 0.0


def optimality_residual(shard, shift, mu, theta):
    """l-inf distance of -grad F's smooth part from mu * subdifferential of ||theta||_1."""
    theta = np.asarray(theta, dtype=np.float64)
    g = models.loss_gradient(shard, theta)
    if shift is not None:
        g = g + shift
    return _kkt(g, mu, theta)


def _lipschitz_estimate(shard, iters=20):
    # power iteration for ||X||_2^2 / n from a fixed start, so runs stay deterministic
    X = shard.X
    v = np.full(shard.d, 1.0 / np.sqrt(shard.d))
    sq = 0.0
    for _ in range(iters):
        w = X.T @ (X @ v)
        sq = float(np.linalg.norm(w))
        if sq == 0.0:
            break
        v = w / sq
    return max(models.loss_constants(shard.loss).smoothness_L * sq / shard.n, 1e-12)


def solve(shard, shift, mu, warm, settings=SolveSettings(), lipschitz=None, keep_history=False):
    """Run the solver and return a :class:`SolveResult` (raises SolverError on budget exhaustion)."""
    d = shard.d
    shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=np.float64)
    x = np.zeros(d) if warm is None else np.array(warm, dtype=np.float64)
    if shift.shape != (d,) or x.shape != (d,):
        raise ConfigError("shift/warm dimension mismatch")
    if mu < 0:
        raise ConfigError("mu must be non-negative")
    if not np.all(np.isfinite(x)):
        raise ConfigError("warm start has non-finite entries")

    X = shard.X
    L = _lipschitz_estimate(shard) if lipschitz is None else float(lipschitz)
    grow = 1.0 / settings.step_backtrack_factor

    ux = X @ x
    fx = models.loss_from_margins(shard, ux) + float(shift @ x)
    gx = models.grad_from_margins(shard, ux) + shift
    Fx = fx + mu * float(np.sum(np.abs(x)))
    history = [Fx] if keep_history else []
    res = _kkt(gx, mu, x)
    if res <= settings.tol:
        return SolveResult(x, res, 0, Fx, history)

    y, uy, fy, gy = x, ux, fx, gx
    t = 1.0
    for it in range(1, settings.max_inner_iters + 1):
        while True:
            z = soft_threshold(y - gy / L, mu / L)
            dz = z - y
            uz = X @ z
            fz = models.loss_from_margins(shard, uz) + float(shift @ z)
            if fz <= fy + float(gy @ dz) + 0.5 * L * float(dz @ dz) + _slack(fy):
                break
            L *= grow
        Fz = fz + mu * float(np.sum(np.abs(z)))
        if Fz > Fx + _slack(Fx):
            if t > 1.0:
                # momentum overshot: drop it and retake the step from the last accepted point
                y, uy, fy, gy, t = x, ux, fx, gx, 1.0
            else:
                L *= grow
            continue
        gz = models.grad_from_margins(shard, uz) + shift
        x_prev, ux_prev = x, ux
        x, ux, fx, gx, Fx = z, uz, fz, gz, Fz
        if keep_history:
            history.append(Fx)
        res = _kkt(gx, mu, x)
        if res <= settings.tol:
            return SolveResult(x, res, it, Fx, history)
        if float((y - z) @ (z - x_prev)) > 0.0:
            # gradient-mapping restart test, robust where objective values no longer resolve
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        t = t_next
        if beta > 0.0:
            y = x + beta * (x - x_prev)
            uy = ux + beta * (ux - ux_prev)
            fy = models.loss_from_margins(shard, uy) + float(shift @ y)
            gy = models.grad_from_margins(shard, uy) + shift
        else:
            y, uy, fy, gy = x, ux, fx, gx
    raise SolverError(
        f"no convergence in {settings.max_inner_iters} iterations (residual {res:.3e} > tol {settings.tol:.1e})",
        residual=res,
        iterations=settings.max_inner_iters,
    )


def solve_shifted_l1(shard, shift, mu, warm, settings=SolveSettings()):
    """Minimizer of loss + <shift, theta> + mu*||theta||_1; ``shift=None`` gives the plain lasso."""
    return solve(shard, shift, mu, warm, settings).theta


def critical_mu(shard, shift):
    """Smallest l1 weight for which the shifted problem is bounded below.

    The loss depends on theta only through X @ theta, so along the null space
    of X only the linear and l1 terms remain; the problem is bounded iff
    mu >= max{-<shift, v> : X v = 0, ||v||_1 <= 1} = min_z ||shift - X^T z||_inf.
    Solved as a linear program over v = p - q with p, q >= 0. Costs far more
    than a solve at large n * d, so callers use it only after a failure.
    """
    from scipy.optimize import linprog

    if shift is None:
        return 0.0
    shift = np.asarray(shift, dtype=np.float64)
    X = shard.X
    if shard.n >= shard.d and np.linalg.matrix_rank(X) >= shard.d:
        return 0.0
    res = linprog(np.r_[shift, -shift], A_eq=np.hstack([X, -X]), b_eq=np.zeros(shard.n),
                  A_ub=np.ones((1, 2 * shard.d)), b_ub=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"critical-mu program failed: {res.message}", residual=np.inf, iterations=0)
    return max(0.0, -float(res.fun))
