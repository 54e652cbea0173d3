"""Round loop of the two-way truncation algorithm and its baselines.

Machine 0 is the master and owns shard 0. Every round the master broadcasts
its thresholded iterate, workers answer with their local gradients restricted
to the iterate's support, and the master solves one shifted l1 problem on its
own data:

    gamma = argmin  L_0(theta) + mu * ||theta||_1
                    + < P_S[avg_j grad L_j(theta_h)] - grad L_0(theta_h), theta >
    theta_{h+1} = H_k(gamma)
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import models, prox_solver
from .cluster import BroadcastMsg, CommLedger, InProcessTransport, RoundComm, gather_round
from .config import RunConfig
from .diagnostics import support_leak_ratios
from .errors import ConfigError, ProtocolError, SolverError, TwowayError
from .prox_solver import SolveSettings
from .sparse_core import SparseSlice, SupportSet, hard_threshold, norm, project, support_of

log = logging.getLogger(__name__)

LIFT = 2.0  # multiple of the critical l1 weight used when the schedule falls below it


@dataclass(frozen=True)
class MuSchedule:
    """Geometric decay of the l1 weight to a floor: max(mu_min, mu0 * alpha**h)."""

    mu0: float
    alpha: float = 0.5
    mu_min: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.mu_min < 0 or self.mu0 < self.mu_min:
            raise ConfigError("need 0 <= mu_min <= mu0")


def mu_at(schedule, h):
    if h < 0:
        raise ConfigError("round index must be >= 0")
    return max(schedule.mu_min, schedule.mu0 * schedule.alpha ** h)


def entry_mu(shard, k, ratio=0.7, floor_ratio=1e-4, tol=1e-6):
    """Largest l1 weight on the grid lambda_max * ratio**i whose lasso solution has >= k nonzeros.

    Walks the path with warm starts and stops at lambda_max * floor_ratio
    (reached e.g. on noiseless data, where fewer than k coordinates ever enter).
    """
    lam_max = norm(models.loss_gradient(shard, np.zeros(shard.d)), "linf")
    if lam_max == 0.0:
        return 0.0
    settings = SolveSettings(tol=min(tol, 1e-3 * lam_max))
    mu, warm = lam_max, np.zeros(shard.d)
    while mu * ratio >= lam_max * floor_ratio:
        mu *= ratio
        warm = prox_solver.solve(shard, None, mu, warm, settings).theta
        if norm(warm, "l0") >= k:
            break
    return mu


def noise_scale(shard, mu, settings=SolveSettings()):
    """Residual scale of the lasso fit at ``mu`` (squared loss); 1/2 bounds the logistic score."""
    if shard.loss == "logistic":
        return 0.5
    theta = prox_solver.solve(shard, None, mu, None, settings).theta
    r = shard.y - shard.X @ theta
    dof = max(shard.n - norm(theta, "l0"), 1)
    return float(np.sqrt(r @ r / dof))


def default_schedule(config, shard0, m=None):
    """Fill unset schedule fields from the master's data.

    mu0 defaults to the entry point of the k-th coordinate on the lasso path
    (so the initial iterate uses its whole sparsity budget); mu_min defaults
    to the pooled-sample rate sigma_hat * sqrt(2 log d / (m n)).
    """
    m = config.m if m is None else m
    k = config.effective_k
    mu0 = config.mu0
    if mu0 is None:
        mu0 = entry_mu(shard0, k)
    mu_min = config.mu_min
    if mu_min is None:
        settings = SolveSettings(config.tol, config.max_inner_iters)
        sigma = noise_scale(shard0, mu0, settings)
        mu_min = sigma * np.sqrt(2.0 * np.log(shard0.d) / (m * shard0.n))
    return MuSchedule(max(mu0, mu_min), config.mu_alpha, mu_min)


@dataclass(frozen=True, eq=False)
class AlgoState:
    h: int
    theta: np.ndarray
    support: SupportSet
    mu: float
    gamma: np.ndarray
    inner_iters: int = 0


@dataclass
class TraceRow:
    round: int
    algo: str
    l1_error: Optional[float] = None
    l2_error: Optional[float] = None
    holdout_loss: Optional[float] = None
    mu: Optional[float] = None
    upstream_scalars: int = 0
    downstream_scalars: int = 0
    inner_iters: int = 0
    wall_ms: Optional[float] = None
    holdout_misclass: Optional[float] = None
    support_size: int = 0
    tau1_hat: Optional[float] = None
    tau2_hat: Optional[float] = None


@dataclass
class IterationTrace:
    algo: str
    rows: list = field(default_factory=list)
    ledger: CommLedger = field(default_factory=CommLedger)
    thetas: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    supports: list = field(default_factory=list)
    error: Optional[TwowayError] = None

    @property
    def final_theta(self):
        return self.thetas[-1]


def init_estimate(shard1, mu0, k, settings=SolveSettings(), truncate=True):
    """Local lasso on the master's shard, then keep its k largest entries."""
    if mu0 < 0 or k < 1:
        raise ConfigError("need mu0 >= 0 and k >= 1")
    res = prox_solver.solve(shard1, None, mu0, None, settings)
    theta = hard_threshold(res.theta, k) if truncate else res.theta
    return AlgoState(0, theta, support_of(theta), mu0, res.theta, res.iterations)


def aggregate_gradients(slices, support, m):
    """Positionwise mean of the m support-aligned gradient slices (master's own included)."""
    if len(slices) != m:
        raise ProtocolError(f"expected {m} gradient slices, got {len(slices)}")
    total = np.zeros(len(support))
    # fixed summation order (by machine id) keeps every transport bitwise identical
    for sl in slices:
        if sl.support != support:
            raise ProtocolError("gradient slice support differs from the broadcast support")
        total = total + sl.values
    return SparseSlice(support, total / m)


def master_round(state, avg_grad, shard1, mu_next, k, settings=SolveSettings(), truncate=True,
                 local_grad=None):
    """One master update: shifted l1 solve warm-started at the previous gamma, then H_k."""
    if avg_grad.support.ambient_dim != shard1.d:
        raise ProtocolError("aggregated gradient has the wrong dimension", round=state.h)
    if local_grad is None:
        local_grad = models.loss_gradient(shard1, state.theta)
    shift = avg_grad.densify() - local_grad
    try:
        res = prox_solver.solve(shard1, shift, mu_next, state.gamma, settings)
    except SolverError:
        # below the critical weight the objective falls without bound along
        # the null space of X; lift mu clear of it and retry once
        crit = prox_solver.critical_mu(shard1, shift)
        if mu_next >= crit:
            raise
        log.warning("round %d: mu %.3g below the boundedness limit %.3g; lifted to %.3g",
                    state.h + 1, mu_next, crit, LIFT * crit)
        mu_next = LIFT * crit
        res = prox_solver.solve(shard1, shift, mu_next, state.gamma, settings)
    theta = hard_threshold(res.theta, k) if truncate else res.theta
    return AlgoState(state.h + 1, theta, support_of(theta), mu_next, res.theta, res.iterations)


class _Metrics:
    def __init__(self, theta_star, holdout):
        self.theta_star = None if theta_star is None else np.asarray(theta_star, dtype=np.float64)
        self.holdout = holdout

    def fill(self, row, theta):
        if self.theta_star is not None:
            diff = theta - self.theta_star
            row.l1_error = norm(diff, "l1")
            row.l2_error = norm(diff, "l2")
        if self.holdout is not None:
            row.holdout_loss = models.loss_value(self.holdout, theta)
            if self.holdout.loss == "logistic":
                pred = np.where(self.holdout.X @ theta >= 0.0, 1.0, -1.0)
                row.holdout_misclass = float(np.mean(pred != self.holdout.y))
        row.support_size = norm(theta, "l0")
        return row


def _elapsed_ms(t0, timing):
    return (time.perf_counter() - t0) * 1e3 if timing else None


def _run_baseline(config, shards, schedule, settings, metrics):
    trace = IterationTrace(config.algo)
    t0 = time.perf_counter()
    if config.algo == "centralized":
        data, mu = models.concat_shards(shards), schedule.mu_min
        shipped = sum(s.n * (s.d + 1) for s in shards[1:])
    else:
        data, mu = shards[0], schedule.mu_min * np.sqrt(len(shards))
        shipped = 0
    res = prox_solver.solve(data, None, mu, None, settings)
    wall = _elapsed_ms(t0, config.timing)
    trace.ledger.record(RoundComm(0, upstream_scalars=shipped, upstream_msgs=len(shards) - 1 if shipped else 0))
    for h in range(config.rounds + 1):
        row = TraceRow(h, config.algo, mu=mu,
                       upstream_scalars=shipped if h == 0 else 0,
                       inner_iters=res.iterations if h == 0 else 0,
                       wall_ms=wall if h == 0 else (0.0 if config.timing else None))
        trace.rows.append(metrics.fill(row, res.theta))
        trace.thetas.append(res.theta)
        trace.gammas.append(res.theta)
        trace.supports.append(support_of(res.theta))
    return trace


def run(config: RunConfig, shards, theta_star=None, holdout=None, transport=None):
    """Execute one configured algorithm and return its per-round trace.

    ``shards[0]`` is the master's data. ``transport`` defaults to an
    in-process channel over ``shards[1:]``; a TCP transport must already
    know the worker ids ``1..m-1``. Solver or protocol failures are raised
    after being stamped with the failing round; the partial trace travels
    on the exception as ``exc.trace``.
    """
    config.validate()
    if not shards:
        raise ConfigError("need at least one shard")
    m, d = len(shards), shards[0].d
    if any(s.d != d for s in shards):
        raise ConfigError("all shards must share the dimension")
    settings = SolveSettings(config.tol, config.max_inner_iters)
    schedule = default_schedule(config, shards[0], m)
    metrics = _Metrics(theta_star, holdout)
    if config.algo in ("centralized", "local"):
        return _run_baseline(config, shards, schedule, settings, metrics)

    twoway = config.algo == "twoway"
    truncate = twoway
    sparse_msgs = twoway and config.project_gradients
    k = config.effective_k if twoway else d
    trace = IterationTrace(config.algo)
    own_transport = transport is None
    if own_transport:
        transport = InProcessTransport({j: shards[j] for j in range(1, m)})
    master = shards[0]
    try:
        t0 = time.perf_counter()
        state = init_estimate(master, mu_at(schedule, 0), k, settings, truncate=truncate)
        row = TraceRow(0, config.algo, mu=state.mu, inner_iters=state.inner_iters,
                       wall_ms=_elapsed_ms(t0, config.timing))
        trace.rows.append(metrics.fill(row, state.theta))
        trace.thetas.append(state.theta)
        trace.gammas.append(state.gamma)
        trace.supports.append(state.support)

        for h in range(config.rounds):
            t0 = time.perf_counter()
            bsupport = state.support if sparse_msgs else SupportSet.full(d)
            bcast = BroadcastMsg(h, bsupport.indices, state.theta[bsupport.indices])
            replies, comm = gather_round(transport, bcast, m, d, dense=not sparse_msgs)
            local_grad = models.loss_gradient(master, state.theta)
            slices = [project(local_grad, bsupport)]
            slices += [SparseSlice(bsupport, r.values) for r in replies]
            avg = aggregate_gradients(slices, bsupport, m)
            prev = state
            state = master_round(state, avg, master, mu_at(schedule, h + 1), k, settings,
                                 truncate=truncate, local_grad=local_grad)
            trace.ledger.record(comm)
            row = TraceRow(h + 1, config.algo, mu=state.mu,
                           upstream_scalars=comm.upstream_scalars,
                           downstream_scalars=comm.downstream_scalars,
                           inner_iters=state.inner_iters,
                           wall_ms=_elapsed_ms(t0, config.timing))
            metrics.fill(row, state.theta)
            if metrics.theta_star is not None:
                row.tau1_hat, _ = support_leak_ratios(state.gamma, state.gamma, state.support,
                                                     state.support, metrics.theta_star)
                _, row.tau2_hat = support_leak_ratios(prev.gamma, state.gamma, prev.support,
                                                     state.support, metrics.theta_star)
            trace.rows.append(row)
            trace.thetas.append(state.theta)
            trace.gammas.append(state.gamma)
            trace.supports.append(state.support)
            log.debug("%s round %d: support %d, mu %.3g", config.algo, h + 1, len(state.support), state.mu)
    except TwowayError as exc:
        if exc.round is None:
            exc.round = len(trace.rows)
        exc.trace = trace
        trace.error = exc
        raise
    finally:
        if own_transport:
            transport.close()
    return trace
