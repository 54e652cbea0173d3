import numpy as np
import pytest

from twoway import diagnostics as dg
from twoway.errors import ConfigError
from twoway.sparse_core import SupportSet


def test_bound_constants_at_c1_5():
    # 1 + 2 / sqrt(4) = 2, so C3 = 24 sqrt(2) and C2 = C3 sqrt(6)
    C2, C3 = dg.bound_constants(5.0)
    assert C3 == pytest.approx(33.941125, abs=1e-6)
    assert C2 == pytest.approx(83.138439, abs=1e-6)
    with pytest.raises(ConfigError):
        dg.bound_constants(1.0)


def test_contraction_factors_closed_form():
    tp = dg.TheoryParams(kappa=0.5, L=1.0, M=0.0, C1=5.0, tau1=0.01, tau2=0.02, delta=0.1)
    a, b, C2, C3 = dg.contraction_factors(tp, s=2, d=100, n=10_000, xmax=1.0)
    bracket = 2 * np.sqrt(np.log(2000.0) / 10_000) + 0.03
    assert a == pytest.approx(C2 * 2 * bracket / 0.5)
    assert b == pytest.approx(C3 * np.sqrt(2) * bracket / 0.5)
    # more data shrinks the factor
    a2, *_ = dg.contraction_factors(tp, s=2, d=100, n=100_000, xmax=1.0)
    assert a2 < a


def test_mu_theory_and_one_step_bound():
    tp = dg.TheoryParams(kappa=1.0, L=0.25, M=dg.models.loss_constants("logistic").third_deriv_M, C1=3.0)
    mu = dg.mu_theory(tp, grad_star_inf=0.01, xmax=2.0, err_l1=0.5, n=400, d=50)
    br = 2 * np.sqrt(np.log(2 * 50 / 0.05) / 400)
    assert mu == pytest.approx(0.04 + 2 * 0.25 * 4 * br * 0.5 + 2 * tp.M * 8 * 0.25)
    l1, l2 = dg.one_step_bounds(tp, 0.01, 2.0, 0.5, s=3, n=400, d=50)
    C2, C3 = dg.bound_constants(3.0)
    assert l1 / l2 == pytest.approx(C2 * 3 / (C3 * np.sqrt(3)))


def test_unrolled_bound_reduces_to_one_step_at_h0():
    tp = dg.TheoryParams(kappa=1.0, L=1.0, M=0.0, C1=5.0)
    g, x, e0 = 0.001, 1.0, 2.0
    l1, _ = dg.unrolled_bounds(tp, g, x, e0, s=2, n=10**6, d=100, h=0)
    a, *_ = dg.contraction_factors(tp, 2, 100, 10**6, x)
    C2, _ = dg.bound_constants(5.0)
    assert l1 == pytest.approx(C2 * 2 * g + a * e0)


def test_linear_rate_condition():
    tp = dg.TheoryParams(kappa=1.0, L=1.0, M=1.0, C1=2.0)
    assert dg.linear_rate_condition(tp, xmax=1.0, err_l1=1e-6, n=100, d=10)
    assert not dg.linear_rate_condition(tp, xmax=1.0, err_l1=1e3, n=100, d=10)


def test_support_leak_ratios_hand_example():
    theta_star = np.array([1.0, 0.0, 0.0, 0.0])
    g0 = np.array([0.5, 0.25, 0.25, 0.0])      # error (-0.5, .25, .25, 0): 1/2 outside S0 = {0}
    g1 = np.array([1.0, 0.0, 0.5, 0.5])        # error (0, 0, .5, .5): index 2 newly entered
    S0, S1 = SupportSet([0], 4), SupportSet([0, 2], 4)
    tau1, tau2 = dg.support_leak_ratios(g0, g1, S0, S1, theta_star)
    assert tau1 == pytest.approx(0.5)
    assert tau2 == pytest.approx(0.5)
    assert dg.support_leak_ratios(theta_star, theta_star, S0, S0, theta_star) == (0.0, 0.0)


def test_params_validation():
    for bad in (dict(kappa=0.0), dict(C1=1.0), dict(tau1=-0.1), dict(delta=1.0)):
        kw = dict(kappa=1.0, L=1.0, M=0.0, C1=2.0) | bad
        with pytest.raises(ConfigError):
            dg.TheoryParams(**kw)
    assert dg.TheoryParams(1.0, 1.0, 0.0, 2.0, tau1=0.1, tau2=0.2).rho == pytest.approx(0.3)
