"""Choosing wait-and-see credits that minimise the mean weighted delay.

For two stations there are closed forms in two regimes: equal loads (where
only switchover variability can make waiting pay off) and unequal loads with
deterministic switchovers (where only the busier station may profit). Every
other case, and every ``N != 2``, goes through the numerical minimiser in
:mod:`waitpoll._minimize`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from ._minimize import MinimizeOptions, RationalQuadratic, minimize
from .errors import NotAsymmetric, NotDeterministic, NotSymmetric, NotWorthWaiting
from .model import PollingConfig, derive_loads, validate

SYMMETRY_TOL = 1e-12

NO_GAIN_BOTH = "no gain from waiting at either station"


@dataclass(frozen=True)
class SymmetricVerdict:
    worth_waiting: bool
    lhs: float  # 2 * rho_1
    rhs: float  # 1 - r0^2 / (r0_2 + r0^2 rho/(1 - 2 rho))
    rhs_variance_form: float  # same, written with var[R1 + R2]


@dataclass(frozen=True)
class AsymmetricVerdict:
    worth_waiting: tuple[bool, bool]
    margin: float  # rho1 - rho1^2 + rho2^2 - rho2 - 2 rho1 rho2


@dataclass(frozen=True)
class TwoStationDecision:
    symmetric: bool
    worth_waiting: tuple[bool, bool]
    t_opt: tuple[float, float]
    delay_opt: float
    condition_values: dict[str, float]
    method: str
    message: str = ""


@dataclass(frozen=True)
class GeneralOptimum:
    t_opt: tuple[float, ...]
    delay_opt: float
    converged: bool
    unbounded: bool
    kkt_residual: float
    infimum: float
    flags: tuple[str, ...] = field(default=())


def delay_form(config: PollingConfig) -> RationalQuadratic:
    """The mean delay as ``c + (T A T' + b T' + a) / (r0 + T0)``.

    Credits in ``config`` are ignored; the form is a function of ``T``.
    """
    validate(config)
    d = derive_loads(config)
    rho = config.rho
    rho0, r0 = d.rho0, d.r0
    K = (rho0**2 - float(rho @ rho)) / (2.0 * rho0 * (1.0 - rho0))
    M = rho0 - rho[:, None] - rho[None, :]
    np.fill_diagonal(M, (1.0 - 2.0 * rho) * (rho0 - rho) / (1.0 - rho))
    n = config.n
    A = K * np.ones((n, n)) + M / (2.0 * rho0)
    b = 2.0 * K * r0 * np.ones(n) + r0 * (rho0 - rho) / rho0
    a = K * r0**2 + d.r0_2 / 2.0
    c = float(config.lam @ config.b2) / (2.0 * (1.0 - rho0))
    return RationalQuadratic(c=c, A=A, b=b, a=a, r0=r0)


def _is_symmetric(config: PollingConfig) -> bool:
    return abs(config.stations[0].rho - config.stations[1].rho) <= SYMMETRY_TOL


def symmetric_worth_waiting(config: PollingConfig) -> SymmetricVerdict:
    analytic._require_n(config, 2)
    validate(config)
    if not _is_symmetric(config):
        raise NotSymmetric(f"loads differ: {tuple(config.rho)}")
    d = derive_loads(config)
    rho = config.stations[0].rho
    lhs = 2.0 * rho
    if rho >= 0.5:
        # the condition's denominator uses 1 - 2 rho; it fails in the limit
        return SymmetricVerdict(False, lhs, float("-inf"), float("-inf"))
    r0sq = d.r0**2
    rhs = 1.0 - r0sq / (d.r0_2 + r0sq * rho / (1.0 - 2.0 * rho))
    var = d.r0_2 - r0sq
    rhs_var = 1.0 - r0sq / (var + r0sq * (1.0 - rho) / (1.0 - 2.0 * rho))
    if not math.isclose(rhs, rhs_var, rel_tol=1e-12, abs_tol=1e-12):
        raise ArithmeticError(f"equivalent condition forms disagree: {rhs} vs {rhs_var}")
    return SymmetricVerdict(lhs < rhs, lhs, rhs, rhs_var)


def symmetric_optimal_credit(config: PollingConfig) -> float:
    """Common optimal credit ``T* = T1* = T2*`` for equal loads.

    Raises :class:`NotWorthWaiting` when the closed form is negative, i.e.
    the optimum is ``T = 0``. On the boundary of the condition it returns 0.
    """
    verdict = symmetric_worth_waiting(config)
    d = derive_loads(config)
    rho, r0 = config.stations[0].rho, d.r0
    if rho >= 0.5:
        raise NotWorthWaiting("load per station >= 1/2: no gain from waiting")
    a = d.r0_2 + r0**2 * rho / (1.0 - 2.0 * rho)
    radicand = 4.0 * r0**2 * rho - 3.0 * r0**2 + a * (4.0 - 12.0 * rho + 8.0 * rho**2)
    t = -0.5 * r0 + 0.5 * math.sqrt(max(radicand, 0.0))
    if t < -1e-12 * max(r0, 1.0) or (not verdict.worth_waiting and t > 1e-12 * max(r0, 1.0)):
        raise NotWorthWaiting(f"{NO_GAIN_BOTH} (closed form gives {t})")
    return max(t, 0.0)


def asymmetric_worth_waiting(config: PollingConfig) -> AsymmetricVerdict:
    """Verdict for unequal loads ``rho_1 > rho_2`` and deterministic switchovers.

    Station 2 (the lighter one) never profits from waiting.
    """
    analytic._require_n(config, 2)
    validate(config)
    if not config.all_deterministic:
        raise NotDeterministic("closed form needs deterministic switchover times")
    p1, p2 = config.stations[0].rho, config.stations[1].rho
    if not p1 > p2 + SYMMETRY_TOL:
        raise NotAsymmetric(f"needs rho_1 > rho_2, got {p1}, {p2}")
    margin = p1 - p1**2 + p2**2 - p2 - 2.0 * p1 * p2
    return AsymmetricVerdict((margin > 0.0, False), margin)


def asymmetric_optimal_credit(config: PollingConfig) -> tuple[float, float]:
    verdict = asymmetric_worth_waiting(config)
    c = analytic.coefficients_two_station(config)
    r0 = derive_loads(config).r0
    t1 = -r0 + math.sqrt(max(r0**2 + (c.c2 - c.c3 * r0) / c.c6, 0.0))
    if t1 < -1e-12 * max(r0, 1.0) or (not verdict.worth_waiting[0] and t1 > 1e-12 * max(r0, 1.0)):
        raise NotWorthWaiting(f"no gain from waiting at station 1 (closed form gives {t1})")
    return max(t1, 0.0), 0.0


def stationarity_residual(config: PollingConfig, T1: float, T2: float) -> float:
    """Signed residual of the linear relation interior minimisers satisfy."""
    c = analytic.coefficients_two_station(config)
    return (c.c5 - 2.0 * c.c6) * T1 - (c.c3 - c.c4) - (c.c5 - 2.0 * c.c7) * T2


def stationarity_scale(config: PollingConfig) -> float:
    c = analytic.coefficients_two_station(config)
    return abs(c.c3) + abs(c.c4) + 1.0


def _delay_at(config: PollingConfig, T) -> float:
    return analytic.wait_and_see_delay(config.with_credits(T)).weighted_mean


def optimal_credits_general(config: PollingConfig, opts: MinimizeOptions | None = None) -> GeneralOptimum:
    """Numerically minimise the mean delay over credits ``T >= 0``."""
    opts = opts or MinimizeOptions()
    form = delay_form(config)
    res = minimize(form, opts)
    flags = []
    if not res.converged:
        flags.append("did_not_converge")
    if res.unbounded:
        flags.append("unbounded")
    return GeneralOptimum(
        t_opt=tuple(float(x) for x in res.x),
        delay_opt=res.value,
        converged=res.converged,
        unbounded=res.unbounded,
        kkt_residual=res.kkt_residual,
        infimum=res.infimum,
        flags=tuple(flags),
    )


def _message(worth: tuple[bool, bool]) -> str:
    if not any(worth):
        return NO_GAIN_BOTH
    if all(worth):
        return "worth waiting at both stations"
    i = worth.index(True) + 1
    return f"worth waiting at station {i}, no gain from waiting at station {3 - i}"


def optimal_credits_two_station(config: PollingConfig, opts: MinimizeOptions | None = None) -> TwoStationDecision:
    analytic._require_n(config, 2)
    validate(config)
    symmetric = _is_symmetric(config)
    conditions: dict[str, float] = {}
    if symmetric:
        v = symmetric_worth_waiting(config)
        conditions.update(lhs=v.lhs, rhs=v.rhs)
        t = symmetric_optimal_credit(config) if v.worth_waiting else 0.0
        t_opt = (t, t)
        method = "symmetric_closed_form"
    elif config.all_deterministic:
        swap = config.stations[0].rho < config.stations[1].rho
        work = config.rotated(1) if swap else config
        v = asymmetric_worth_waiting(work)
        conditions["margin"] = v.margin
        t1, t2 = asymmetric_optimal_credit(work) if v.worth_waiting[0] else (0.0, 0.0)
        t_opt = (t2, t1) if swap else (t1, t2)
        method = "asymmetric_closed_form"
    else:
        res = optimal_credits_general(config, opts)
        t_opt = (res.t_opt[0], res.t_opt[1])
        conditions["kkt_residual"] = res.kkt_residual
        method = "numerical"

    delay = _delay_at(config, t_opt)
    exhaustive = analytic.exhaustive_delay(config).weighted_mean
    if delay > exhaustive * (1.0 + 1e-12):
        raise ArithmeticError(f"optimum {t_opt} is worse than T=0: {delay} > {exhaustive}")
    if t_opt[0] > 0 and t_opt[1] > 0:
        res_lin = stationarity_residual(config, *t_opt)
        conditions["stationarity_residual"] = res_lin
        if abs(res_lin) > 1e-6 * stationarity_scale(config):
            raise ArithmeticError(f"interior optimum {t_opt} violates stationarity (residual {res_lin})")
    worth = (t_opt[0] > 0, t_opt[1] > 0)
    return TwoStationDecision(
        symmetric=symmetric,
        worth_waiting=worth,
        t_opt=t_opt,
        delay_opt=delay,
        condition_values=conditions,
        method=method,
        message=_message(worth),
    )
