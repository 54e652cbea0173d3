"""Evaluators for the convergence theory: error-bound constants, contraction
factors, the theoretical l1 weight, and measured support-leakage ratios.

None of these feed back into the algorithm; they are read off runs where the
true parameter is known.
"""
from dataclasses import dataclass

import numpy as np

from . import models
from .errors import ConfigError
from .sparse_core import norm


@dataclass(frozen=True)
class TheoryParams:
    kappa: float
    L: float
    M: float
    C1: float
    tau1: float = 0.0
    tau2: float = 0.0
    delta: float = 0.05
    sigma: float = 1.0
    sigma_X: float = 1.0
    onset_H: int = 0  # annotation only: first round where the leakage ratios are expected to hold

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not self.C1 > 1:
            raise ConfigError("C1 must exceed 1")
        if self.tau1 < 0 or self.tau2 < 0:
            raise ConfigError("tau1, tau2 must be non-negative")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")

    @property
    def rho(self):
        return self.tau1 + self.tau2


def bound_constants(C1):
    """(C2, C3) of the one-step error bound for thresholding level k = C1 * s."""
    if not C1 > 1:
        raise ConfigError("C1 must exceed 1")
    C3 = 24.0 * np.sqrt(1.0 + 2.0 / np.sqrt(C1 - 1.0))
    return C3 * np.sqrt(C1 + 1.0), C3


def _bracket(tp, d, n):
    return 2.0 * np.sqrt(np.log(2.0 * d / tp.delta) / n) + tp.rho


def contraction_factors(tp, s, d, n, xmax):
    """Return (a_n, b_n, C2, C3); a_n < 1 means linear convergence of the l1 error."""
    if min(s, d, n) < 1:
        raise ConfigError("s, d, n must be >= 1")
    C2, C3 = bound_constants(tp.C1)
    common = tp.L * xmax ** 2 * _bracket(tp, d, n) / tp.kappa
    return C2 * s * common, C3 * np.sqrt(s) * common, C2, C3


def mu_theory(tp, grad_star_inf, xmax, err_l1, n, d):
    """l1 weight that makes the one-step bound valid, given the current l1 error."""
    return (4.0 * grad_star_inf
            + 2.0 * tp.L * xmax ** 2 * _bracket(tp, d, n) * err_l1
            + 2.0 * tp.M * xmax ** 3 * err_l1 ** 2)


def one_step_bounds(tp, grad_star_inf, xmax, err_l1, s, n, d):
    """(l1, l2) bounds on the next iterate's error from the current l1 error."""
    C2, C3 = bound_constants(tp.C1)
    tail = (tp.L * xmax ** 2 * _bracket(tp, d, n) * err_l1 / 2.0
            + tp.M * xmax ** 3 * err_l1 ** 2 / 2.0 + grad_star_inf)
    return C2 * s / tp.kappa * tail, C3 * np.sqrt(s) / tp.kappa * tail


def linear_rate_condition(tp, xmax, err_l1, n, d):
    """True when the cubic term is dominated by the quadratic one at this error level."""
    return tp.M * xmax ** 3 * err_l1 <= tp.L * xmax ** 2 * _bracket(tp, d, n)


def unrolled_bounds(tp, grad_star_inf, xmax, err0_l1, s, n, d, h):
    """(l1, l2) bounds on the error after round h + 1, unrolled from the initial l1 error."""
    a, b, C2, C3 = contraction_factors(tp, s, d, n, xmax)
    geo = (h + 1) if a == 1.0 else (1.0 - a ** (h + 1)) / (1.0 - a)
    l1 = geo * C2 * s / tp.kappa * grad_star_inf + a ** (h + 1) * err0_l1
    l2 = geo * C3 * np.sqrt(s) / tp.kappa * grad_star_inf + a ** h * b * err0_l1
    return l1, l2


def linear_model_bounds(tp, s, m, n, d, h):
    """Rate-form (l1, l2) bounds for the sparse linear model, constants dropped."""
    C2, C3 = bound_constants(tp.C1)
    scale = tp.sigma_X ** 2 * np.log(m * n * d / tp.delta) * _bracket(tp, d, n) / tp.kappa
    a, b = C2 * s * scale, C3 * np.sqrt(s) * scale
    geo = (h + 1) if a == 1.0 else (1.0 - a ** (h + 1)) / (1.0 - a)
    init = s * tp.sigma * tp.sigma_X / tp.kappa * np.sqrt(np.log(n * d / tp.delta) / n)
    pooled = tp.sigma * tp.sigma_X / tp.kappa * np.sqrt(np.log(d / tp.delta) / (m * n))
    l1 = geo * C2 * s * pooled + a ** (h + 1) * init
    l2 = geo * C3 * np.sqrt(s) * pooled + a ** h * b * init
    return l1, l2


def support_leak_ratios(gamma_h, gamma_h1, S_h, S_h1, theta_star):
    """Measured (tau1, tau2): l1 share of the error of gamma_h outside S_h, and
    the share of gamma_{h+1}'s error on the newly entered coordinates S_{h+1} minus S_h."""
    e_h = np.asarray(gamma_h, dtype=np.float64) - theta_star
    e_h1 = np.asarray(gamma_h1, dtype=np.float64) - theta_star
    tot_h, tot_h1 = norm(e_h, "l1"), norm(e_h1, "l1")
    tau1 = 0.0 if tot_h == 0 else float(np.sum(np.abs(e_h[~S_h.mask()]))) / tot_h
    new = S_h1.difference(S_h).indices
    tau2 = 0.0 if tot_h1 == 0 else float(np.sum(np.abs(e_h1[new]))) / tot_h1
    return tau1, tau2


def max_abs_feature(shards):
    """max over machines and rows of ||x_ji||_inf."""
    return max(float(np.max(np.abs(s.X))) for s in shards)


def avg_grad_inf(shards, theta):
    """||(1/m) sum_j grad L_j(theta)||_inf."""
    g = sum(models.loss_gradient(s, theta) for s in shards) / len(shards)
    return norm(g, "linf")
