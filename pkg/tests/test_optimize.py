import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waitpoll import (
    PollingConfig,
    asymmetric_optimal_credit,
    asymmetric_worth_waiting,
    exhaustive_delay,
    optimal_credits_general,
    optimal_credits_two_station,
    stationarity_residual,
    symmetric_optimal_credit,
    symmetric_worth_waiting,
    wait_and_see_delay,
)
from waitpoll._minimize import MinimizeOptions, RationalQuadratic, minimize, projected_gradient_norm
from waitpoll.errors import NotAsymmetric, NotDeterministic, NotSymmetric, NotWorthWaiting, WrongArity
from waitpoll.optimize import NO_GAIN_BOTH, delay_form

from helpers import ASYM_DET, SYMMETRIC_DET, SYMMETRIC_EXP, T1_ASYM, T_SYM, random_config, rel_err


def _delay_grid(cfg: PollingConfig, grids: list[np.ndarray]) -> np.ndarray:
    """Closed-form delay on a 2-D slab of credits, written out independently of delay_form."""
    rho = cfg.rho
    rho0 = rho.sum()
    r0 = cfg.r.sum()
    r0_2 = cfg.r2.sum() + r0**2 - (cfg.r**2).sum()
    mg1 = float(cfg.lam @ cfg.b2) / (2 * (1 - rho0))
    T0 = sum(grids)
    idle = r0 + T0
    out = mg1 + idle * (rho0**2 - rho @ rho) / (2 * rho0 * (1 - rho0))
    num = 0.5 * rho0 * r0_2 + r0 * sum(t * (rho0 - p) for t, p in zip(grids, rho))
    for i, ti in enumerate(grids):
        num = num + ti * ti * (1 - 2 * rho[i]) * (rho0 - rho[i]) / (2 * (1 - rho[i]))
        for j in range(i + 1, len(grids)):
            num = num + ti * grids[j] * (rho0 - rho[i] - rho[j])
    return out + num / (rho0 * idle)


def test_grid_helper_matches_library():
    cfg = random_config(np.random.default_rng(3), 3)
    T = cfg.T
    val = _delay_grid(cfg, [np.array(t) for t in T])
    assert rel_err(float(val), wait_and_see_delay(cfg).weighted_mean) < 1e-13


# -- symmetric two-station model ----------------------------------------------

def test_symmetric_deterministic_not_worth_waiting():
    v = symmetric_worth_waiting(SYMMETRIC_DET)
    assert not v.worth_waiting
    with pytest.raises(NotWorthWaiting):
        symmetric_optimal_credit(SYMMETRIC_DET)


@given(st.floats(0.01, 0.49), st.floats(0.05, 5.0), st.floats(0.05, 5.0))
@settings(max_examples=200, deadline=None)
def test_deterministic_switchovers_never_worth_waiting(rho, r1, r2):
    cfg = PollingConfig.from_arrays(lam=[rho, rho], b=[1, 1], b2=[1.5, 1.5], r=[r1, r2])
    assert not symmetric_worth_waiting(cfg).worth_waiting


def test_symmetric_exponential_condition_value():
    v = symmetric_worth_waiting(SYMMETRIC_EXP)
    assert v.worth_waiting
    assert v.lhs == pytest.approx(0.4)
    assert v.rhs == pytest.approx(1 - 4 / (6 + 4 * 0.2 / 0.6), rel=1e-14)
    assert v.rhs == pytest.approx(0.4545454545, abs=1e-9)
    assert v.rhs_variance_form == pytest.approx(v.rhs, rel=1e-12)


def test_symmetric_exponential_optimal_credit():
    t = symmetric_optimal_credit(SYMMETRIC_EXP)
    assert t == pytest.approx(0.1489, abs=1e-4)
    assert t == pytest.approx(T_SYM, rel=1e-12)
    num = optimal_credits_general(SYMMETRIC_EXP)
    assert num.t_opt == pytest.approx((t, t), abs=1e-6)


def test_symmetric_condition_boundary():
    # rho = 1/4 with exponential r=(1,1) makes the condition an equality
    cfg = PollingConfig.from_arrays(lam=[0.25, 0.25], b=[1, 1], b2=[2, 2], r=[1, 1], r2=[2, 2])
    v = symmetric_worth_waiting(cfg)
    assert v.lhs == pytest.approx(v.rhs, abs=1e-14)
    assert symmetric_optimal_credit(cfg) == pytest.approx(0.0, abs=1e-7)


def test_symmetric_variance_drives_verdict():
    low = PollingConfig.from_arrays(lam=[0.45, 0.45], b=[1, 1], b2=[2, 2], r=[1, 1], r2=[2, 2])
    high = PollingConfig.from_arrays(lam=[0.45, 0.45], b=[1, 1], b2=[2, 2], r=[1, 1], r2=[20, 20])
    assert not symmetric_worth_waiting(low).worth_waiting
    assert symmetric_worth_waiting(high).worth_waiting
    assert symmetric_optimal_credit(high) > 0


def test_symmetric_needs_equal_loads():
    with pytest.raises(NotSymmetric):
        symmetric_worth_waiting(ASYM_DET)


# -- asymmetric two-station model ---------------------------------------------

def test_asymmetric_margin_examples():
    v = asymmetric_worth_waiting(ASYM_DET)
    assert v.margin == pytest.approx(0.07, abs=1e-14)
    assert v.worth_waiting == (True, False)
    cfg = PollingConfig.from_arrays(lam=[0.6, 0.5], b=[0.5, 0.5], b2=[0.5, 0.5], r=[0.5, 0.5])
    v = asymmetric_worth_waiting(cfg)
    assert v.margin == pytest.approx(-0.1275, abs=1e-14)
    assert v.worth_waiting == (False, False)


def test_asymmetric_optimal_credit_example():
    t1, t2 = asymmetric_optimal_credit(ASYM_DET)
    assert t2 == 0.0
    assert t1 == pytest.approx(0.3131, abs=1e-4)
    assert t1 == pytest.approx(-1 + math.sqrt(1 + 0.07 / 0.0966666666666667), rel=1e-12)
    num = optimal_credits_general(ASYM_DET)
    assert num.t_opt == pytest.approx((t1, 0.0), abs=1e-6)


def test_asymmetric_boundary():
    rho1 = (0.8 + math.sqrt(0.28)) / 2  # margin == 0 with rho2 = 0.1
    cfg = PollingConfig.from_arrays(lam=[rho1, 0.1], b=[1, 1], b2=[1, 1], r=[0.5, 0.5])
    assert abs(asymmetric_worth_waiting(cfg).margin) < 1e-14
    with pytest.raises(NotWorthWaiting):
        # on the boundary the closed form is 0 up to rounding; just past it, negative
        cfg2 = PollingConfig.from_arrays(lam=[rho1 + 0.01, 0.1], b=[1, 1], b2=[1, 1], r=[0.5, 0.5])
        asymmetric_optimal_credit(cfg2)
    assert asymmetric_optimal_credit(cfg)[0] == pytest.approx(0.0, abs=1e-6)


def test_asymmetric_preconditions():
    with pytest.raises(NotDeterministic):
        asymmetric_worth_waiting(SYMMETRIC_EXP)
    with pytest.raises(NotAsymmetric):
        asymmetric_worth_waiting(SYMMETRIC_DET)
    with pytest.raises(NotAsymmetric):
        asymmetric_worth_waiting(ASYM_DET.rotated(1))


# -- stationarity relation ----------------------------------------------------

def test_stationarity_symmetric():
    assert stationarity_residual(SYMMETRIC_EXP, 0.7, 0.7) == pytest.approx(0.0, abs=1e-15)
    assert abs(stationarity_residual(SYMMETRIC_EXP, T_SYM, T_SYM)) <= 1e-10
    assert abs(stationarity_residual(ASYM_DET, 0.3, 1.7)) > 1e-3


# -- two-station dispatcher ---------------------------------------------------

def test_dispatch_symmetric_deterministic():
    d = optimal_credits_two_station(SYMMETRIC_DET)
    assert d.t_opt == (0.0, 0.0)
    assert d.delay_opt == exhaustive_delay(SYMMETRIC_DET).weighted_mean
    assert d.message == NO_GAIN_BOTH
    assert d.method == "symmetric_closed_form"


def test_dispatch_asymmetric_both_orders():
    d = optimal_credits_two_station(ASYM_DET)
    assert d.t_opt[0] == pytest.approx(T1_ASYM, rel=1e-12)
    assert d.t_opt[1] == 0.0
    assert d.worth_waiting == (True, False)
    swapped = optimal_credits_two_station(ASYM_DET.rotated(1))
    assert swapped.t_opt == pytest.approx((0.0, T1_ASYM), rel=1e-12)
    assert swapped.delay_opt == pytest.approx(d.delay_opt, rel=1e-12)
    assert "station 2" in swapped.message


def test_dispatch_numerical_matches_general():
    cfg = PollingConfig.from_arrays(lam=[0.3, 0.15], b=[1, 1], b2=[2, 2], r=[1, 0.5], r2=[4, 1])
    d = optimal_credits_two_station(cfg)
    g = optimal_credits_general(cfg)
    assert d.method == "numerical"
    assert d.t_opt == pytest.approx(g.t_opt, abs=1e-4)
    assert d.delay_opt <= exhaustive_delay(cfg).weighted_mean


def test_dispatch_arity():
    with pytest.raises(WrongArity):
        optimal_credits_two_station(PollingConfig.from_arrays(lam=[0.1], b=[1], b2=[1], r=[1]))


# -- general N ----------------------------------------------------------------

def test_delay_form_matches_closed_form():
    rng = np.random.default_rng(11)
    for n in range(1, 6):
        cfg = random_config(rng, n)
        form = delay_form(cfg)
        for _ in range(5):
            T = rng.uniform(0, 3, n)
            assert rel_err(form.value(T), wait_and_see_delay(cfg.with_credits(T)).weighted_mean) < 1e-12


def test_three_station_symmetric_deterministic_grid_oracle():
    cfg = PollingConfig.from_arrays(lam=[0.2] * 3, b=[1] * 3, b2=[1.5] * 3, r=[0.4, 0.6, 0.5])
    r0 = 1.5
    res = optimal_credits_general(cfg)
    assert max(res.t_opt) <= 1e-6 * r0
    axis = np.arange(0, 401) * (r0 / 200)
    t2, t3 = np.meshgrid(axis, axis, indexing="ij")
    at_zero = exhaustive_delay(cfg).weighted_mean
    best = math.inf
    for t1 in axis:
        best = min(best, float(_delay_grid(cfg, [np.full_like(t2, t1), t2, t3]).min()))
    assert best >= at_zero - 1e-12


def test_single_station_unbounded():
    cfg = PollingConfig.from_arrays(lam=[0.5], b=[1], b2=[2], r=[1], r2=[3])
    res = optimal_credits_general(cfg)
    assert res.unbounded
    assert "unbounded" in res.flags
    assert res.infimum == pytest.approx(1.0, rel=1e-9)  # M/G/1 delay 0.5*2/(2*0.5)


@pytest.mark.parametrize("seed", range(5))
def test_general_optimum_is_kkt_point(seed):
    cfg = random_config(np.random.default_rng(seed), 4)
    res = optimal_credits_general(cfg)
    assert res.converged
    assert res.delay_opt <= exhaustive_delay(cfg).weighted_mean + 1e-12
    rng = np.random.default_rng(100 + seed)
    for T in rng.uniform(0, 5, (200, 4)):
        assert res.delay_opt <= wait_and_see_delay(cfg.with_credits(T)).weighted_mean + 1e-10


def test_minimizer_deterministic():
    cfg = random_config(np.random.default_rng(7), 3)
    a = optimal_credits_general(cfg, MinimizeOptions(seed=3))
    b = optimal_credits_general(cfg, MinimizeOptions(seed=3))
    assert a == b


def test_minimizer_on_plain_quadratic():
    # with zero linear denominator weight the form is c + (xAx + bx + a)/r0
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    form = RationalQuadratic(c=0.0, A=A, b=np.array([-2.0, 1.0]), a=0.0, r0=1.0)
    res = minimize(form)
    assert projected_gradient_norm(form, res.x) <= 1e-9
    assert res.x[1] == 0.0 or res.x[1] < 1e-9
