import math

import numpy as np
import pytest

from waitpoll import (
    PollingConfig,
    exhaustive_delay,
    mean_cycle_time,
    wait_and_see_delay,
    workload_while_switching,
    workload_while_waiting,
)
from waitpoll.errors import MomentMismatch
from waitpoll.simulation import (
    Deterministic,
    Exponential,
    SimConfig,
    Strategy,
    sample_state_workload,
    simulate,
    strategy_ii_heuristic_credit,
)
from waitpoll.simulation.engine import workload_at

from helpers import ASYM_DET, SYMMETRIC_DET, T1_ASYM

SMALL = dict(measured_arrivals=200_000, batches=30)
MIXED = PollingConfig.from_arrays(lam=[0.3, 0.15, 0.1], b=[1, 1, 0.5], b2=[2, 1.5, 0.5], r=[0.5, 0.8, 0.3],
                                  r2=[0.5, 1.28, 0.27], T=[0.6, 0.0, 0.4])


@pytest.fixture(scope="module")
def mixed_run():
    return simulate(MIXED, SimConfig(seed=21, measured_arrivals=400_000, record_trace=True))


def test_exhaustive_symmetric_example():
    est = simulate(SYMMETRIC_DET, SimConfig(strategy="exhaustive", seed=1))
    assert est.measured_arrivals >= 1_000_000
    assert abs(est.weighted_delay.mean - 1.75) / 1.75 < 0.02


def test_wait_and_see_covers_closed_form(mixed_run):
    assert mixed_run.weighted_delay.contains(wait_and_see_delay(MIXED).weighted_mean)
    assert mixed_run.weighted_delay.half_width > 0


def test_mean_cycle(mixed_run):
    assert mixed_run.mean_cycle.contains(mean_cycle_time(MIXED))


def test_state_fractions(mixed_run):
    fr = mixed_run.state_fractions
    assert sum(fr.values()) == pytest.approx(1.0, abs=1e-9)
    ec = mean_cycle_time(MIXED)
    for i in range(3):
        assert mixed_run.switching_fraction[i].contains(MIXED.switchovers[i].r / ec)
        assert mixed_run.waiting_fraction[i].contains(MIXED.stations[i].T / ec)
    work = sum(x.mean for x in mixed_run.working_fraction)
    assert work == pytest.approx(float(MIXED.rho.sum()), rel=0.01)


def test_credit_spent_exactly_each_visit(mixed_run):
    assert mixed_run.max_wait_deviation <= 1e-12


def test_littles_law(mixed_run):
    for i, (q, d) in enumerate(zip(mixed_run.mean_queue_length, mixed_run.per_station_delay)):
        lam = MIXED.stations[i].lam
        # both sides are estimated; compare within the combined half-widths
        assert abs(q.mean - lam * d.mean) <= q.half_width + lam * d.half_width


def test_workload_by_state(mixed_run):
    tr = mixed_run.trace
    for i in range(3):
        assert sample_state_workload(tr, "switching", i, seed=i).contains(workload_while_switching(MIXED, i))
    for i in (0, 2):
        assert sample_state_workload(tr, "waiting", i, seed=i).contains(workload_while_waiting(MIXED, i))


def test_workload_path_simple():
    cfg = PollingConfig.from_arrays(lam=[0.2], b=[1], b2=[1], r=[1])
    est = simulate(cfg, SimConfig(seed=3, measured_arrivals=2000, batches=10, warmup_arrivals=100,
                                  warmup_cycles=10, record_trace=True))
    tr = est.trace
    a, s, x = tr.arrivals[0], tr.starts[0], tr.service[0]
    k = 100
    # just after the k-th arrival, before its service starts
    t = a[k] + 1e-9
    direct = sum(x[j] for j in range(len(a)) if a[j] <= t and s[j] > t)
    direct += sum(max(s[j] + x[j] - t, 0.0) for j in range(len(a)) if s[j] <= t)
    assert workload_at(tr, np.array([t]))[0] == pytest.approx(direct, rel=1e-12)


def test_determinism():
    sim = SimConfig(seed=99, **SMALL)
    a = simulate(MIXED, sim)
    b = simulate(MIXED, sim)
    assert a == b
    c = simulate(MIXED, SimConfig(seed=100, **SMALL))
    assert c.weighted_delay != a.weighted_delay


@pytest.mark.parametrize("strategy", ["total_timer", "boxma_timer", "wait_and_see"])
def test_zero_credits_same_path_as_exhaustive(strategy):
    cfg = MIXED.with_credits([0, 0, 0])
    ref = simulate(cfg, SimConfig(strategy="exhaustive", seed=5, **SMALL))
    est = simulate(cfg, SimConfig(strategy=strategy, seed=5, **SMALL))
    assert est.weighted_delay == ref.weighted_delay


def test_boxma_timer_only_at_first_station_by_default():
    cfg = MIXED.with_credits([0, 2.0, 1.0])
    ref = simulate(cfg, SimConfig(strategy="exhaustive", seed=5, **SMALL))
    est = simulate(cfg, SimConfig(strategy="boxma_timer", seed=5, **SMALL))
    assert est.weighted_delay == ref.weighted_delay
    both = simulate(cfg, SimConfig(strategy="boxma_timer", seed=5, boxma_all_stations=True, **SMALL))
    assert both.state_fractions["waiting"] > 0


def test_boxma_waits_at_most_once_per_visit():
    cfg = PollingConfig.from_arrays(lam=[0.2, 0.2], b=[1, 1], b2=[2, 2], r=[0.5, 0.5], T=[3.0, 0.0])
    est = simulate(cfg, SimConfig(strategy="boxma_timer", seed=4, **SMALL))
    ec = est.mean_cycle.mean
    assert est.waiting_fraction[0].mean * ec <= 3.0
    assert est.waiting_fraction[1].mean == 0.0


def test_total_timer_presence():
    cfg = PollingConfig.from_arrays(lam=[0.2, 0.2], b=[1, 1], b2=[2, 2], r=[0.5, 0.5], T=[1.5, 0.5])
    est = simulate(cfg, SimConfig(strategy="total_timer", seed=4, **SMALL))
    ec = est.mean_cycle.mean
    for i, T in enumerate((1.5, 0.5)):
        present = (est.waiting_fraction[i].mean + est.working_fraction[i].mean) * ec
        assert present >= T
        assert est.waiting_fraction[i].mean * ec <= T


def test_exhaustive_ignores_credits():
    est = simulate(MIXED, SimConfig(strategy=Strategy.EXHAUSTIVE, seed=8, **SMALL))
    assert est.state_fractions["waiting"] == 0.0
    assert est.weighted_delay.contains(exhaustive_delay(MIXED).weighted_mean)


def test_moment_mismatch():
    with pytest.raises(MomentMismatch):
        simulate(SYMMETRIC_DET, SimConfig(switchover_dists=(Exponential(1.0), Exponential(1.0)), **SMALL))
    with pytest.raises(MomentMismatch):
        simulate(SYMMETRIC_DET, SimConfig(service_dists=(Exponential(4.0),), **SMALL))


def test_explicit_laws_accepted():
    sim = SimConfig(service_dists=(Exponential(4.0),) * 2, switchover_dists=(Deterministic(1.0),) * 2, seed=2, **SMALL)
    assert simulate(SYMMETRIC_DET, sim).batches == 30


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(batches=5)
    with pytest.raises(ValueError):
        SimConfig(batches=30, measured_arrivals=100)
    with pytest.raises(ValueError):
        SimConfig(strategy="greedy")


def test_queue_guard_flags_instability():
    cfg = PollingConfig.from_arrays(lam=[0.49, 0.49], b=[1, 1], b2=[2, 2], r=[5, 5], r2=[25, 25])
    est = simulate(cfg, SimConfig(seed=1, queue_guard=5, **SMALL))
    assert "unstable_detected" in est.flags


def test_heuristic_credit_examples():
    assert strategy_ii_heuristic_credit(SYMMETRIC_DET) == pytest.approx(0.25 * 2 / 0.5, rel=1e-14)
    val = strategy_ii_heuristic_credit(ASYM_DET)
    assert val == pytest.approx(T1_ASYM + 0.4 * (1 + T1_ASYM) / 0.5, rel=1e-12)
    assert val == pytest.approx(1.3636, abs=1e-3)


def test_ci_half_widths_positive():
    est = simulate(SYMMETRIC_DET, SimConfig(seed=3, **SMALL))
    assert all(d.half_width > 0 and math.isfinite(d.half_width) for d in est.per_station_delay)
    assert est.batches == 30
