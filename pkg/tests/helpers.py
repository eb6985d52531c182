"""Random configuration generators shared by the test modules."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from waitpoll import PollingConfig


def random_config(rng: np.random.Generator, n: int, rho0_max: float = 0.9, credits: bool = True,
                  deterministic: bool | None = None) -> PollingConfig:
    rho0 = rng.uniform(0.05, rho0_max)
    w = rng.uniform(0.1, 1.0, n)
    rho = rho0 * w / w.sum()
    b = rng.uniform(0.1, 2.0, n)
    b2 = b * b * rng.uniform(1.0, 4.0, n)
    r = rng.uniform(0.05, 2.0, n)
    det = rng.random() < 0.3 if deterministic is None else deterministic
    r2 = r * r if det else r * r * rng.uniform(1.0, 4.0, n)
    T = rng.uniform(0.0, 3.0, n) * (rng.random(n) < 0.8) if credits else np.zeros(n)
    return PollingConfig.from_arrays(lam=rho / b, b=b, b2=b2, r=r, r2=r2, T=T)


@st.composite
def configs(draw, n_min: int = 1, n_max: int = 6, rho0_max: float = 0.9, credits: bool = True):
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_config(np.random.default_rng(seed), n, rho0_max, credits)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


SYMMETRIC_DET = PollingConfig.from_arrays(lam=[1, 1], b=[0.25, 0.25], b2=[0.125, 0.125], r=[1, 1])
SYMMETRIC_EXP = PollingConfig.from_arrays(lam=[1, 1], b=[0.2, 0.2], b2=[0.08, 0.08], r=[1, 1], r2=[2, 2])
ASYM_DET = PollingConfig.from_arrays(lam=[0.8, 0.2], b=[0.5, 0.5], b2=[0.5, 0.5], r=[0.5, 0.5])
T_SYM = 0.14891252930760546
T1_ASYM = 0.31306432859722544
