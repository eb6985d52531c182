"""Parameter sweeps producing one row per grid point and one column per evaluator."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import analytic
from .bound import delay_lower_bound
from .errors import PollingError
from .model import PollingConfig, validate
from .simulation import SimConfig, simulate

ANALYTIC_COLUMNS = ("analytic_ws", "exhaustive", "lower_bound")

_VARIABLE = re.compile(r"^(T|lambda|r|rho)(\d+)$")


@dataclass(frozen=True)
class SweepSpec:
    variable: str  # "T1", "lambda2", "r1", "rho1"; stations are numbered from 1
    start: float
    stop: float
    steps: int
    outputs: tuple[str, ...] = ANALYTIC_COLUMNS
    sim: SimConfig | None = None
    strategies: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ValueError(f"a sweep needs at least 2 steps, got {self.steps}")
        if not _VARIABLE.match(self.variable):
            raise ValueError(f"unknown sweep variable {self.variable!r}; use T<i>, lambda<i>, r<i> or rho<i>")
        unknown = set(self.outputs) - set(ANALYTIC_COLUMNS)
        if unknown:
            raise ValueError(f"unknown outputs {sorted(unknown)}")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    @property
    def columns(self) -> list[str]:
        cols = ["point", *self.outputs]
        for s in self.strategies:
            cols += [f"sim_{s}", f"sim_{s}_ci"]
        return cols


def parse_range(text: str) -> tuple[float, float, int]:
    """``"start:stop:steps"`` -> ``(start, stop, steps)``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must look like start:stop:steps, got {text!r}")
    start, stop = float(parts[0]), float(parts[1])
    steps = int(parts[2])
    return start, stop, steps


def apply_variable(config: PollingConfig, variable: str, value: float) -> PollingConfig:
    """Copy of ``config`` with one parameter replaced; ``rho<i>`` moves ``lambda_i``."""
    m = _VARIABLE.match(variable)
    if not m:
        raise ValueError(f"unknown sweep variable {variable!r}")
    name, idx = m.group(1), int(m.group(2)) - 1
    if not 0 <= idx < config.n:
        raise ValueError(f"{variable}: station index out of range 1..{config.n}")
    stations = list(config.stations)
    switches = list(config.switchovers)
    st = stations[idx]
    if name == "T":
        stations[idx] = replace(st, T=value)
    elif name == "lambda":
        stations[idx] = replace(st, lam=value)
    elif name == "rho":
        stations[idx] = replace(st, lam=value / st.b)
    else:
        # keep the shape of the law: the squared coefficient of variation is preserved
        w = switches[idx]
        ratio = w.r2 / (w.r * w.r) if w.r > 0 else 1.0
        switches[idx] = replace(w, r=value, r2=ratio * value * value)
    return PollingConfig(tuple(stations), tuple(switches))


def _evaluators(spec: SweepSpec) -> dict[str, Callable[[PollingConfig], float]]:
    table = {
        "analytic_ws": lambda c: analytic.wait_and_see_delay(c).weighted_mean,
        "exhaustive": lambda c: analytic.exhaustive_delay(c).weighted_mean,
        "lower_bound": lambda c: delay_lower_bound(c).bound,
    }
    return {k: table[k] for k in spec.outputs}


def evaluate_point(config: PollingConfig, spec: SweepSpec, value: float) -> dict[str, float | None]:
    """One sweep row; an invalid point yields ``None`` in every value column."""
    row: dict[str, float | None] = {"point": float(value)}
    try:
        cfg = validate(apply_variable(config, spec.variable, value))
    except PollingError:
        cfg = None
    for name, fn in _evaluators(spec).items():
        row[name] = fn(cfg) if cfg is not None else None
    for strategy in spec.strategies:
        if cfg is None:
            row[f"sim_{strategy}"] = row[f"sim_{strategy}_ci"] = None
            continue
        # same seed at every point: common random numbers across the grid
        est = simulate(cfg, replace(spec.sim or SimConfig(), strategy=strategy))
        row[f"sim_{strategy}"] = est.weighted_delay.mean
        row[f"sim_{strategy}_ci"] = est.weighted_delay.half_width
    return row


def run_sweep(config: PollingConfig, spec: SweepSpec, jobs: int = 1) -> list[dict[str, float | None]]:
    """Evaluate every grid point; rows come back in grid order whatever ``jobs`` is."""
    grid = spec.grid
    if jobs <= 1:
        return [evaluate_point(config, spec, v) for v in grid]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(evaluate_point, [config] * len(grid), [spec] * len(grid), grid))


def format_value(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.17g}"


def rows_to_csv(rows: Sequence[dict[str, float | None]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def grid_argmin(rows: Sequence[dict[str, float | None]], column: str) -> float | None:
    best = None
    for row in rows:
        v = row.get(column)
        if v is not None and (best is None or v < best[1]):
            best = (row["point"], v)
    return None if best is None else best[0]
