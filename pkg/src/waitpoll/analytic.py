"""Closed-form mean delay of the cyclic polling model with wait-and-see credits.

Two independent evaluation routes are provided:

* :func:`wait_and_see_delay` evaluates the four-term closed form directly
  (vectorised, from per-station loads and credits);
* :func:`delay_via_workload_decomposition` rebuilds the same number from the
  workload decomposition: M/G/1 workload plus the mean workload seen while the
  server is switching or waiting, mixed by the time fractions of those states.

The second route shares nothing with the first beyond :mod:`waitpoll.model`, so
agreement between them is a genuine check of both transcriptions.

Station indices are 0-based throughout the library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, NoWaitingState, WrongArity
from .model import PollingConfig, derive_loads, validate

NO_IDLE = "no_idle"  # r0 + T0 == 0: no switching and no waiting
NO_SWITCHOVER = "no_switchover"  # some r_i == 0 (or r0 == 0 for the exhaustive formula)


@dataclass(frozen=True)
class DelayReport:
    weighted_mean: float
    terms: dict[str, float]
    per_station: tuple[float, ...] | None = None
    flags: tuple[str, ...] = ()

    def term_sum(self) -> float:
        return math.fsum(self.terms.values())


@dataclass(frozen=True)
class WorkloadBreakdown:
    ev_mg1: float
    ev_switching: tuple[float, ...]
    ev_waiting: tuple[float | None, ...]  # None where T_i == 0
    p: tuple[float, ...]
    q_i: tuple[float, ...]
    q: float
    ec: float
    ez: tuple[float, ...]
    flags: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class TwoStationCoefficients:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7)


def _report(terms: dict[str, float], per_station=None, flags=()) -> DelayReport:
    return DelayReport(math.fsum(terms.values()), terms, per_station, tuple(flags))


def mean_cycle_time(config: PollingConfig) -> float:
    d = derive_loads(validate(config))
    return (d.r0 + d.T0) / (1.0 - d.rho0)


def mg1_workload(config: PollingConfig) -> float:
    """Mean workload of the M/G/1 queue fed by all stations' traffic."""
    validate(config)
    d = derive_loads(config)
    return float(np.dot(config.lam, config.b2)) / (2.0 * (1.0 - d.rho0))


def _cross_load(rho, rho0: float) -> float:
    # rho0^2 - sum rho_i^2, written so that a single station gives exactly 0
    return float(np.dot(rho, rho0 - np.asarray(rho)))


def exhaustive_delay(config: PollingConfig) -> DelayReport:
    """Mean weighted delay under plain exhaustive service; credits are ignored."""
    validate(config)
    d = derive_loads(config)
    rho = config.rho
    one_minus = 1.0 - d.rho0
    terms = {
        "mg1": float(np.dot(config.lam, config.b2)) / (2.0 * one_minus),
        "cycle": d.r0 * _cross_load(rho, d.rho0) / (2.0 * d.rho0 * one_minus),
    }
    flags = []
    if d.r0 > 0:
        terms["switchover"] = d.r0_2 / (2.0 * d.r0)
    else:
        terms["switchover"] = 0.0
        flags.append(NO_SWITCHOVER)
    per_station = (math.fsum(terms.values()),) if config.n == 1 else None
    return _report(terms, per_station, flags)


def wait_and_see_delay(config: PollingConfig) -> DelayReport:
    """Mean weighted delay with per-station wait-and-see credits ``T_i``.

    Terms: ``mg1`` (M/G/1 delay), ``cycle`` (grows linearly with the idle time
    per cycle), ``switchover`` (residual switchover plus linear credit part) and
    ``credit_quadratic`` (pairwise credit interactions).
    """
    validate(config)
    d = derive_loads(config)
    rho, T = config.rho, config.T
    rho0, r0 = d.rho0, d.r0
    idle = r0 + d.T0
    one_minus = 1.0 - rho0
    terms = {
        "mg1": float(np.dot(config.lam, config.b2)) / (2.0 * one_minus),
        "cycle": idle * _cross_load(rho, rho0) / (2.0 * rho0 * one_minus),
    }
    if idle == 0.0:
        terms["switchover"] = 0.0
        terms["credit_quadratic"] = 0.0
        return _report(terms, _single(config, terms), [NO_IDLE])

    terms["switchover"] = (0.5 * rho0 * d.r0_2 + r0 * float(np.dot(T, rho0 - rho))) / (rho0 * idle)
    diag = float(np.sum(T * T * (1.0 - 2.0 * rho) * (rho0 - rho) / (2.0 * (1.0 - rho))))
    pair = rho0 - rho[:, None] - rho[None, :]
    off = float(np.sum(np.triu(np.outer(T, T) * pair, k=1)))
    terms["credit_quadratic"] = (diag + off) / (idle * rho0)
    return _report(terms, _single(config, terms))


def _single(config: PollingConfig, terms: dict[str, float]):
    return (math.fsum(terms.values()),) if config.n == 1 else None


def _require_n(config: PollingConfig, n: int) -> None:
    if config.n != n:
        raise WrongArity(f"operation needs N={n} stations, config has N={config.n}")


def two_station_delay(config: PollingConfig) -> DelayReport:
    """Two-station specialisation of the closed form."""
    _require_n(config, 2)
    validate(config)
    d = derive_loads(config)
    l1, l2 = map(float, config.lam)
    r1, r2 = map(float, config.rho)
    T1, T2 = map(float, config.T)
    rho0, r0 = d.rho0, d.r0
    idle = r0 + T1 + T2
    terms = {"mg1": (l1 * float(config.b2[0]) + l2 * float(config.b2[1])) / (2.0 * (1.0 - rho0))}
    if idle == 0.0:
        terms.update(switchover=0.0, cross_load=0.0, credit_1=0.0, credit_2=0.0)
        return _report(terms, flags=[NO_IDLE])
    scale = rho0 * idle
    terms["switchover"] = d.r0_2 * rho0 / 2.0 / scale
    terms["cross_load"] = r1 * r2 / (1.0 - rho0) * idle**2 / scale
    terms["credit_1"] = r2 * T1 * (r0 + T1 * (1.0 - 2.0 * r1) / (2.0 * (1.0 - r1))) / scale
    terms["credit_2"] = r1 * T2 * (r0 + T2 * (1.0 - 2.0 * r2) / (2.0 * (1.0 - r2))) / scale
    return _report(terms)


def coefficients_two_station(config: PollingConfig) -> TwoStationCoefficients:
    _require_n(config, 2)
    validate(config)
    d = derive_loads(config)
    p1, p2 = map(float, config.rho)
    rho0, r0 = d.rho0, d.r0
    om = 1.0 - rho0
    c5 = 2.0 * p2 * p1 / om
    return TwoStationCoefficients(
        c1=float(np.dot(config.lam, config.b2)) / (2.0 * om),
        c2=p1 * p2 * r0**2 / om + rho0 * d.r0_2 / 2.0,
        c3=r0 * p2 + 2.0 * p2 * p1 * r0 / om,
        c4=r0 * p1 + 2.0 * p1 * p2 * r0 / om,
        c5=c5,
        c6=c5 / 2.0 + p2 / 2.0 * (1.0 - p1 / (1.0 - p1)),
        c7=c5 / 2.0 + p1 / 2.0 * (1.0 - p2 / (1.0 - p2)),
    )


def delay_via_cs(config: PollingConfig) -> DelayReport:
    c = coefficients_two_station(config)
    d = derive_loads(config)
    T1, T2 = map(float, config.T)
    idle = d.r0 + T1 + T2
    if idle == 0.0:
        return _report({"c1": c.c1, "rational": 0.0}, flags=[NO_IDLE])
    num = c.c2 + c.c3 * T1 + c.c4 * T2 + c.c5 * T1 * T2 + c.c6 * T1**2 + c.c7 * T2**2
    return _report({"c1": c.c1, "rational": num / (d.rho0 * idle)})


def single_station_delay(config: PollingConfig) -> DelayReport:
    """Single queue with vacations taken after a total idle time ``T_1``."""
    _require_n(config, 1)
    validate(config)
    (s,), (w,) = config.stations, config.switchovers
    terms = {"mg1": s.lam * s.b2 / (2.0 * (1.0 - s.rho))}
    flags = []
    if w.r + s.T > 0:
        terms["vacation"] = w.r2 / (2.0 * (w.r + s.T))
    else:
        terms["vacation"] = 0.0
        flags.append(NO_IDLE)
    value = math.fsum(terms.values())
    return DelayReport(value, terms, (value,), tuple(flags))


# -- workload decomposition route ---------------------------------------------
#
# The sums below follow the displayed formulas literally with 1-based l, j and
# the wrap-around index sets {i+1..N} U {1..j}. Nothing here is shared with
# wait_and_see_delay.

def _rho_sum(rho, lo: int, hi: int) -> float:
    """sum_{l=lo}^{hi} rho_l with 1-based inclusive bounds; empty if lo > hi."""
    return math.fsum(rho[l - 1] for l in range(lo, hi + 1))


def _accumulated_elsewhere(rho, r, T, ec: float, i: int) -> float:
    """First three lines of both conditional-workload displays (1-based ``i``).

    Work generated during switchovers ``j -> j+1`` and during visits (working
    and waiting) at stations ``j != i`` that is still waiting, observed while
    the server is at or just leaving station ``i``.
    """
    n = len(rho)
    total = []
    for j in range(1, n + 1):
        if j < i:
            sw = _rho_sum(rho, i + 1, n) + _rho_sum(rho, 1, j)
            visit = _rho_sum(rho, i + 1, n) + _rho_sum(rho, 1, j - 1)
        elif j > i:
            sw = _rho_sum(rho, i + 1, j)
            visit = _rho_sum(rho, i + 1, j - 1)
        else:
            continue
        total.append(r[j - 1] * sw)
        total.append(rho[j - 1] * ec * visit)
        total.append(T[j - 1] * visit)
    return math.fsum(total)


def _check_index(config: PollingConfig, i: int) -> None:
    if not 0 <= i < config.n:
        raise IndexOutOfRange(f"station index {i} outside 0..{config.n - 1}")


def _ev_switching(config: PollingConfig, i: int, ec: float) -> tuple[float, bool]:
    rho = list(config.rho)
    rho0 = math.fsum(rho)
    r, r2, T = list(config.r), list(config.r2), list(config.T)
    own = rho[i] * ec * (rho0 - rho[i]) + (rho0 - rho[i]) * T[i]
    degenerate = r[i] == 0.0
    residual = 0.0 if degenerate else rho0 * r2[i] / (2.0 * r[i])
    return _accumulated_elsewhere(rho, r, T, ec, i + 1) + own + residual, degenerate


def first_busy_period(config: PollingConfig, i: int, ec: float | None = None) -> float:
    """Mean length of the busy period that starts the visit to station ``i``.

    Work done per visit is ``rho_i * EC``; the ``lam_i * T_i`` later busy
    periods of mean ``b_i / (1 - rho_i)`` are subtracted.
    """
    _check_index(config, i)
    if ec is None:
        ec = mean_cycle_time(config)
    s = config.stations[i]
    return s.rho * ec - s.lam * s.T * s.b / (1.0 - s.rho)


def _ev_waiting(config: PollingConfig, i: int, ec: float) -> float:
    rho = list(config.rho)
    rho0 = math.fsum(rho)
    s = config.stations[i]
    others = rho0 - s.rho
    busy_len = s.b / (1.0 - s.rho)
    first = first_busy_period(config, i, ec) * others
    later = s.lam * s.T / 2.0 * busy_len * others
    waiting = s.T / 2.0 * others
    rest = _accumulated_elsewhere(rho, list(config.r), list(config.T), ec, i + 1)
    return rest + first + later + waiting


def workload_while_switching(config: PollingConfig, i: int) -> float:
    """Mean workload at a random instant while the server switches from ``i``.

    When ``r_i == 0`` the residual-switchover term is 0/0; it is taken as 0
    (the state then has zero probability). :func:`workload_breakdown` reports
    this case in its ``flags``.
    """
    validate(config)
    _check_index(config, i)
    return _ev_switching(config, i, mean_cycle_time(config))[0]


def workload_while_waiting(config: PollingConfig, i: int) -> float:
    """Mean workload at a random instant while the server waits at ``i``."""
    validate(config)
    _check_index(config, i)
    if config.stations[i].T == 0.0:
        raise NoWaitingState(f"station {i} has T=0; the server never waits there")
    return _ev_waiting(config, i, mean_cycle_time(config))


def workload_breakdown(config: PollingConfig) -> WorkloadBreakdown:
    validate(config)
    n = config.n
    rho0 = math.fsum(config.rho)
    idle = math.fsum(config.r) + math.fsum(config.T)
    ec = idle / (1.0 - rho0)
    ev_mg1 = math.fsum(config.lam * config.b2) / (2.0 * (1.0 - rho0))
    flags = []
    if idle == 0.0:
        zeros = (0.0,) * n
        return WorkloadBreakdown(ev_mg1, zeros, (None,) * n, zeros, zeros, 1.0, 0.0, zeros, (NO_IDLE,))
    ev_sw, ev_w = [], []
    for i in range(n):
        v, degenerate = _ev_switching(config, i, ec)
        ev_sw.append(v)
        if degenerate and NO_SWITCHOVER not in flags:
            flags.append(NO_SWITCHOVER)
        ev_w.append(_ev_waiting(config, i, ec) if config.stations[i].T > 0 else None)
    p = tuple(float(x) / ec for x in config.r)
    qi = tuple(float(x) / ec for x in config.T)
    switching = math.fsum(p)
    q = switching / (switching + math.fsum(qi))
    ez = tuple(first_busy_period(config, i, ec) for i in range(n))
    return WorkloadBreakdown(ev_mg1, tuple(ev_sw), tuple(ev_w), p, qi, q, ec, ez, tuple(flags))


def delay_via_workload_decomposition(config: PollingConfig) -> DelayReport:
    """Mean weighted delay rebuilt from the workload decomposition.

    ``rho0 * D = E V_mg1 + q E V_switching + (1 - q) E V_waiting - sum rho_i b2_i / (2 b_i)``
    where the conditional workloads are time-fraction mixtures of the
    per-station values.
    """
    wb = workload_breakdown(config)
    rho0 = math.fsum(config.rho)
    in_service = math.fsum(s.rho * s.b2 / (2.0 * s.b) for s in config.stations)
    terms = {"mg1": wb.ev_mg1 / rho0, "in_service": -in_service / rho0}
    if NO_IDLE in wb.flags:
        terms.update(switching=0.0, waiting=0.0)
        return _report(terms, _single(config, terms), wb.flags)

    p_switching = math.fsum(wb.p)
    p_waiting = math.fsum(wb.q_i)
    # q / P(switching) and (1 - q) / P(waiting) both equal 1 / P(idle)
    p_idle = p_switching + p_waiting
    ev_switching = math.fsum(pi * v for pi, v in zip(wb.p, wb.ev_switching)) / p_switching if p_switching > 0 else 0.0
    if p_waiting > 0:
        ev_waiting = math.fsum(qi * v for qi, v in zip(wb.q_i, wb.ev_waiting) if v is not None) / p_waiting
    else:
        ev_waiting = 0.0
    terms["switching"] = wb.q * ev_switching / rho0
    terms["waiting"] = (1.0 - wb.q) * ev_waiting / rho0
    assert abs(p_idle - (1.0 - rho0)) <= 1e-9 * max(1.0, p_idle)
    return _report(terms, _single(config, terms), wb.flags)
