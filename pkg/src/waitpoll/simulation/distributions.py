"""Service and switchover time laws for the simulator.

The analytic side only sees first and second moments; the simulator needs an
actual law with exactly those moments. :func:`fit_two_moment` picks one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, ClassVar

import numpy as np

from ..errors import InvalidMoment
from ..model import close


class DistributionSpec:
    kind: ClassVar[str]

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def second_moment(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def scv(self) -> float:
        m = self.mean
        return self.second_moment / (m * m) - 1.0 if m > 0 else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class Deterministic(DistributionSpec):
    value: float
    kind: ClassVar[str] = "deterministic"

    @property
    def mean(self) -> float:
        return self.value

    @property
    def second_moment(self) -> float:
        return self.value * self.value

    def sample(self, rng, size):
        return np.full(size, self.value)


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    rate: float
    kind: ClassVar[str] = "exponential"

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def second_moment(self) -> float:
        return 2.0 / (self.rate * self.rate)

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Erlang(DistributionSpec):
    k: int
    rate: float
    kind: ClassVar[str] = "erlang"

    @property
    def mean(self) -> float:
        return self.k / self.rate

    @property
    def second_moment(self) -> float:
        return self.k * (self.k + 1) / (self.rate * self.rate)

    def sample(self, rng, size):
        return rng.gamma(self.k, 1.0 / self.rate, size)


@dataclass(frozen=True)
class HyperExponential2(DistributionSpec):
    """Exponential with rate ``mu1`` w.p. ``p``, else rate ``mu2``."""

    p: float
    mu1: float
    mu2: float
    kind: ClassVar[str] = "hyperexponential2"

    @property
    def mean(self) -> float:
        return self.p / self.mu1 + (1.0 - self.p) / self.mu2

    @property
    def second_moment(self) -> float:
        return 2.0 * self.p / self.mu1**2 + 2.0 * (1.0 - self.p) / self.mu2**2

    def sample(self, rng, size):
        branch = rng.random(size) < self.p
        scale = np.where(branch, 1.0 / self.mu1, 1.0 / self.mu2)
        return rng.exponential(1.0, size) * scale


@dataclass(frozen=True)
class Gamma(DistributionSpec):
    shape: float
    scale: float
    kind: ClassVar[str] = "gamma"

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def second_moment(self) -> float:
        return self.shape * (self.shape + 1.0) * self.scale**2

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)


_KINDS = {cls.kind: cls for cls in (Deterministic, Exponential, Erlang, HyperExponential2, Gamma)}


def distribution_from_dict(doc: dict[str, Any]) -> DistributionSpec:
    doc = dict(doc)
    kind = doc.pop("kind", None)
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}") from None
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None


def fit_two_moment(mean: float, m2: float) -> DistributionSpec:
    """A law with first moment ``mean`` and second moment ``m2``.

    Zero variance gives a point mass, squared coefficient of variation 1 an
    exponential, below 1 a gamma with shape ``1/scv`` and above 1 a
    balanced-means two-phase hyperexponential.
    """
    if not (mean > 0 and math.isfinite(mean) and math.isfinite(m2)):
        raise InvalidMoment(f"mean must be positive and finite, got {mean}")
    if m2 < mean * mean and not close(m2, mean * mean):
        raise InvalidMoment(f"m2={m2} below mean^2={mean * mean}")
    if close(m2, mean * mean):
        return Deterministic(mean)
    scv = m2 / (mean * mean) - 1.0
    if close(scv, 1.0):
        return Exponential(1.0 / mean)
    if scv < 1.0:
        return Gamma(1.0 / scv, mean * scv)
    p = 0.5 * (1.0 + math.sqrt((scv - 1.0) / (scv + 1.0)))
    return HyperExponential2(p, 2.0 * p / mean, 2.0 * (1.0 - p) / mean)


def matches_moments(dist: DistributionSpec, mean: float, m2: float, rel: float = 1e-9) -> bool:
    return close(dist.mean, mean, rel, 1e-15) and close(dist.second_moment, m2, rel, 1e-15)
