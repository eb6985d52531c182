"""Lower bound on the mean delay of any strategy that idles based on local history.

The bound is a function of ``f_i``, the mean time per cycle the server spends
waiting at station ``i``, minimised over ``f >= 0``. It drops the
first-busy-period terms that the exact credit strategy incurs and replaces the
second moment of the waiting time by its squared mean, so evaluating it at
``f = T`` never exceeds the exact delay with credits ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._minimize import MinimizeOptions, RationalQuadratic, minimize
from .analytic import NO_IDLE
from .errors import NegativeAllocation
from .model import PollingConfig, derive_loads, validate


@dataclass(frozen=True)
class LowerBoundPoint:
    f: tuple[float, ...]
    f0: float
    alpha: tuple[float, ...]
    objective: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class LowerBound:
    f_opt: tuple[float, ...]
    bound: float
    unbounded: bool
    converged: bool
    kkt_residual: float
    flags: tuple[str, ...] = ()


def _constant_part(config: PollingConfig) -> float:
    d = derive_loads(config)
    rho = config.rho
    om = 1.0 - d.rho0
    return (
        math.fsum(config.lam * config.b2) / (2.0 * om)
        + d.r0 * (d.rho0**2 - math.fsum(rho * rho)) / (2.0 * d.rho0 * om)
    )


def lb_objective(config: PollingConfig, f) -> LowerBoundPoint:
    """Bound objective at the waiting allocation ``f`` (loops mirror the formula)."""
    validate(config)
    f = [float(x) for x in f]
    n = config.n
    if len(f) != n:
        raise ValueError(f"expected {n} allocations, got {len(f)}")
    if any(x < 0 for x in f):
        raise NegativeAllocation(f"waiting allocations must be >= 0, got {f}")
    d = derive_loads(config)
    rho = list(config.rho)
    rho0, r0 = d.rho0, d.r0
    f0 = math.fsum(f)
    alpha = [rho[j] * (r0 + f0) / (1.0 - rho0) + f[j] for j in range(n)]
    first = _constant_part(config)
    if r0 + f0 == 0.0:
        return LowerBoundPoint(tuple(f), f0, tuple(alpha), first, (NO_IDLE,))

    def rsum(lo, hi):  # 1-based inclusive
        return math.fsum(rho[l - 1] for l in range(lo, hi + 1))

    bracket = [rho0 * d.r0_2 / 2.0]
    for i in range(1, n + 1):
        fi = f[i - 1]
        bracket.append((r0 * fi + fi * fi / 2.0) * (rho0 - rho[i - 1]))
        inner = [alpha[j - 1] * (rsum(i + 1, n) + rsum(1, j - 1)) for j in range(1, i)]
        inner += [alpha[j - 1] * rsum(i + 1, j - 1) for j in range(i + 1, n + 1)]
        bracket.append(fi * math.fsum(inner))
    objective = first + math.fsum(bracket) / (rho0 * (r0 + f0))
    return LowerBoundPoint(tuple(f), f0, tuple(alpha), objective)


def _between_loads(rho: np.ndarray) -> np.ndarray:
    """W[i, j] = total load of stations strictly between i and j in cyclic order."""
    n = len(rho)
    W = np.zeros((n, n))
    for i in range(n):
        acc = 0.0
        for step in range(1, n):
            j = (i + step) % n
            W[i, j] = acc
            acc += rho[j]
    return W


def bound_form(config: PollingConfig) -> RationalQuadratic:
    """The bound objective as ``c + (f A f' + b f' + a) / (r0 + f0)``."""
    validate(config)
    d = derive_loads(config)
    rho = config.rho
    rho0, r0 = d.rho0, d.r0
    om = 1.0 - rho0
    W = _between_loads(rho)
    Wrho = W @ rho
    Q = np.diag((rho0 - rho) / 2.0) + W + np.outer(Wrho, np.ones(config.n)) / om
    A = (Q + Q.T) / 2.0 / rho0
    b = (r0 * (rho0 - rho) + Wrho * r0 / om) / rho0
    return RationalQuadratic(c=_constant_part(config), A=A, b=b, a=d.r0_2 / 2.0, r0=r0)


def delay_lower_bound(config: PollingConfig, opts: MinimizeOptions | None = None) -> LowerBound:
    """Minimise the bound objective over ``f >= 0``.

    If the objective keeps decreasing along a ray (as for a single station,
    where waiting forever recovers the M/G/1 queue) the infimum is reported
    and ``unbounded`` is set; ``f_opt`` is then the last point on that ray.
    """
    opts = opts or MinimizeOptions()
    res = minimize(bound_form(config), opts)
    flags = []
    if res.unbounded:
        flags.append("unbounded")
        value = res.infimum
    else:
        value = lb_objective(config, np.maximum(res.x, 0.0)).objective
    if not res.converged:
        flags.append("did_not_converge")
    return LowerBound(
        f_opt=tuple(float(x) for x in res.x),
        bound=float(value),
        unbounded=res.unbounded,
        converged=res.converged,
        kkt_residual=res.kkt_residual,
        flags=tuple(flags),
    )
