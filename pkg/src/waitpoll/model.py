"""System parameters, derived loads and validation.

A :class:`PollingConfig` holds only first and second moments; the formulas in
:mod:`waitpoll.analytic` need nothing else. Station ``i`` is followed by the
switchover ``i -> i+1`` (cyclically), so ``config.switchovers[i]`` is the
switch away from ``config.stations[i]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import EmptySystem, InvalidMoment, NegativeParameter, Unstable, ValidationError

REL_TOL = 1e-12
ABS_TOL = 1e-15


def close(a: float, b: float, rel: float = REL_TOL, abs_: float = ABS_TOL) -> bool:
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_)


def _below(m2: float, m1: float) -> bool:
    """True if a second moment undercuts the squared mean beyond rounding."""
    sq = m1 * m1
    return m2 < sq and not close(m2, sq)


@dataclass(frozen=True)
class StationParams:
    lam: float
    b: float
    b2: float
    T: float = 0.0

    @property
    def rho(self) -> float:
        return self.lam * self.b


@dataclass(frozen=True)
class SwitchoverMoments:
    r: float
    r2: float

    @classmethod
    def deterministic_of(cls, r: float) -> SwitchoverMoments:
        return cls(r, r * r)

    @classmethod
    def exponential_of(cls, r: float) -> SwitchoverMoments:
        return cls(r, 2.0 * r * r)

    @property
    def deterministic(self) -> bool:
        return close(self.r2, self.r * self.r)

    @property
    def variance(self) -> float:
        return self.r2 - self.r * self.r


@dataclass(frozen=True)
class PollingConfig:
    stations: tuple[StationParams, ...]
    switchovers: tuple[SwitchoverMoments, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "stations", tuple(self.stations))
        object.__setattr__(self, "switchovers", tuple(self.switchovers))

    @classmethod
    def from_arrays(
        cls,
        lam: Sequence[float],
        b: Sequence[float],
        b2: Sequence[float],
        r: Sequence[float],
        r2: Sequence[float] | None = None,
        T: Sequence[float] | None = None,
    ) -> PollingConfig:
        """Build a config from parallel sequences; ``r2=None`` means deterministic."""
        n = len(lam)
        if T is None:
            T = [0.0] * n
        if r2 is None:
            r2 = [float(x) * float(x) for x in r]
        stations = tuple(
            StationParams(float(l_), float(b_), float(s_), float(t_))
            for l_, b_, s_, t_ in zip(lam, b, b2, T, strict=True)
        )
        switches = tuple(SwitchoverMoments(float(x), float(y)) for x, y in zip(r, r2, strict=True))
        return cls(stations, switches)

    @property
    def n(self) -> int:
        return len(self.stations)

    # numpy views; cached because analytic code reads them repeatedly
    @cached_property
    def lam(self) -> np.ndarray:
        return np.array([s.lam for s in self.stations], dtype=float)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([s.b for s in self.stations], dtype=float)

    @cached_property
    def b2(self) -> np.ndarray:
        return np.array([s.b2 for s in self.stations], dtype=float)

    @cached_property
    def T(self) -> np.ndarray:
        return np.array([s.T for s in self.stations], dtype=float)

    @cached_property
    def r(self) -> np.ndarray:
        return np.array([s.r for s in self.switchovers], dtype=float)

    @cached_property
    def r2(self) -> np.ndarray:
        return np.array([s.r2 for s in self.switchovers], dtype=float)

    @cached_property
    def rho(self) -> np.ndarray:
        return self.lam * self.b

    @property
    def all_deterministic(self) -> bool:
        return all(s.deterministic for s in self.switchovers)

    def with_credits(self, T: Iterable[float]) -> PollingConfig:
        T = [float(t) for t in T]
        if len(T) != self.n:
            raise ValidationError(f"expected {self.n} credits, got {len(T)}")
        return replace(self, stations=tuple(replace(s, T=t) for s, t in zip(self.stations, T)))

    def rotated(self, k: int) -> PollingConfig:
        """Relabel stations cyclically so that old station ``k`` becomes station 0."""
        k %= self.n
        return PollingConfig(self.stations[k:] + self.stations[:k], self.switchovers[k:] + self.switchovers[:k])


@dataclass(frozen=True)
class DerivedLoads:
    rho: tuple[float, ...]
    rho0: float
    r0: float
    r0_2: float
    T0: float
    stable: bool = field(default=True)


def validate(config: PollingConfig) -> PollingConfig:
    """Check every invariant of ``config`` and return it unchanged.

    Raises
    ------
    EmptySystem
        No stations.
    NegativeParameter
        Non-positive arrival rate or service mean, negative credit or
        switchover mean, or a non-finite value anywhere.
    InvalidMoment
        A second moment below the squared mean, or mismatched list lengths.
    Unstable
        Total load ``rho0 >= 1``.
    """
    if config.n == 0:
        raise EmptySystem("a polling system needs at least one station")
    if len(config.switchovers) != config.n:
        raise ValidationError(
            f"{config.n} stations but {len(config.switchovers)} switchovers; lengths must match"
        )
    for i, s in enumerate(config.stations):
        vals = (s.lam, s.b, s.b2, s.T)
        if not all(math.isfinite(v) for v in vals):
            raise NegativeParameter(f"station {i}: non-finite parameter in {vals}")
        if s.lam <= 0 or s.b <= 0:
            raise NegativeParameter(f"station {i}: lambda and b must be positive (got {s.lam}, {s.b})")
        if s.T < 0:
            raise NegativeParameter(f"station {i}: credit T must be >= 0 (got {s.T})")
    for i, w in enumerate(config.switchovers):
        if not (math.isfinite(w.r) and math.isfinite(w.r2)):
            raise NegativeParameter(f"switchover {i}: non-finite moment")
        if w.r < 0:
            raise NegativeParameter(f"switchover {i}: mean must be >= 0 (got {w.r})")
    for i, s in enumerate(config.stations):
        if _below(s.b2, s.b):
            raise InvalidMoment(f"station {i}: b2={s.b2} < b^2={s.b * s.b}")
    for i, w in enumerate(config.switchovers):
        if _below(w.r2, w.r):
            raise InvalidMoment(f"switchover {i}: r2={w.r2} < r^2={w.r * w.r}")
    rho0 = math.fsum(s.rho for s in config.stations)
    if not rho0 < 1.0:
        raise Unstable(f"total load rho0={rho0} must be < 1")
    return config


def derive_loads(config: PollingConfig) -> DerivedLoads:
    rho = tuple(s.lam * s.b for s in config.stations)
    r = [w.r for w in config.switchovers]
    cross = math.fsum(r[i] * r[j] for i in range(len(r)) for j in range(len(r)) if i != j)
    rho0 = math.fsum(rho)
    return DerivedLoads(
        rho=rho,
        rho0=rho0,
        r0=math.fsum(r),
        r0_2=math.fsum(w.r2 for w in config.switchovers) + cross,
        T0=math.fsum(s.T for s in config.stations),
        stable=rho0 < 1.0,
    )


# -- JSON document ------------------------------------------------------------

def config_from_dict(doc: dict[str, Any]) -> PollingConfig:
    try:
        st_docs = doc["stations"]
        sw_docs = doc["switchovers"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"config document needs 'stations' and 'switchovers': {exc}") from None
    stations = []
    for i, s in enumerate(st_docs):
        try:
            stations.append(StationParams(float(s["lambda"]), float(s["b"]), float(s["b2"]), float(s.get("T", 0.0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"station {i}: bad or missing field ({exc})") from None
    switches = []
    for i, w in enumerate(sw_docs):
        try:
            r = float(w["r"])
            det = bool(w.get("deterministic", False))
            if "r2" in w:
                r2 = float(w["r2"])
                if det and not close(r2, r * r):
                    raise InvalidMoment(f"switchover {i}: deterministic but r2={r2} != r^2={r * r}")
            elif det:
                r2 = r * r
            else:
                raise ValidationError(f"switchover {i}: 'r2' missing and 'deterministic' not set")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"switchover {i}: bad or missing field ({exc})") from None
        switches.append(SwitchoverMoments(r, r2))
    return PollingConfig(tuple(stations), tuple(switches))


def config_to_dict(config: PollingConfig) -> dict[str, Any]:
    return {
        "stations": [{"lambda": s.lam, "b": s.b, "b2": s.b2, "T": s.T} for s in config.stations],
        "switchovers": [
            {"r": w.r, "r2": w.r2, **({"deterministic": True} if w.deterministic else {})}
            for w in config.switchovers
        ],
    }


def load_document(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_config(path: str | Path) -> PollingConfig:
    return config_from_dict(load_document(path))
