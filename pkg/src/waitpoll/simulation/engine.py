"""Event-driven simulation of the cyclic polling server.

The only active entity is the server, so the event calendar reduces to "the
server's next decision time" plus, per station, the sorted stream of future
Poisson arrivals. A station queue under FCFS is then just the index range
``[served, arrived)`` of its arrival stream, and the simulation advances from
one decision to the next: service completion, next arrival while waiting,
credit or timer expiry, end of switchover.

Ties at equal timestamps (possible only with degenerate laws) resolve as
service completion, then credit expiry, then arrival.

Warm-up is discarded, and measurement then runs over whole cycles; cycles
are grouped into batches of roughly equal message counts for batch-means
confidence intervals.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from ..errors import MomentMismatch
from ..model import PollingConfig, validate
from .distributions import Deterministic, DistributionSpec, fit_two_moment, matches_moments

INF = math.inf


class Strategy(str, Enum):
    WAIT_AND_SEE = "wait_and_see"
    TOTAL_TIMER = "total_timer"
    BOXMA_TIMER = "boxma_timer"
    EXHAUSTIVE = "exhaustive"


class Interval(NamedTuple):
    mean: float
    half_width: float

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def contains(self, x: float) -> bool:
        return self.low <= x <= self.high


@dataclass(frozen=True)
class SimConfig:
    strategy: Strategy = Strategy.WAIT_AND_SEE
    service_dists: tuple[DistributionSpec, ...] | None = None
    switchover_dists: tuple[DistributionSpec, ...] | None = None
    seed: int = 0
    warmup_arrivals: int = 10_000
    warmup_cycles: int = 1_000
    measured_arrivals: int = 1_000_000
    batches: int = 30
    confidence: float = 0.99
    boxma_all_stations: bool = False
    queue_guard: int = 1_000_000
    record_trace: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.batches < 10:
            raise ValueError(f"need at least 10 batches, got {self.batches}")
        if self.measured_arrivals < 10 * self.batches:
            raise ValueError("measured_arrivals must be at least 10 * batches")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class SimTrace:
    """Raw sample path of the measured window, for workload and queue checks."""

    t_start: float
    t_end: float
    arrivals: list[np.ndarray]
    starts: list[np.ndarray]  # inf where not yet served at t_end
    service: list[np.ndarray]
    switching: np.ndarray  # rows: start, end, station
    waiting: np.ndarray  # rows: start, end, station


@dataclass(frozen=True)
class SimEstimate:
    per_station_delay: tuple[Interval, ...]
    weighted_delay: Interval
    mean_cycle: Interval
    state_fractions: dict[str, float]
    switching_fraction: tuple[Interval, ...]
    waiting_fraction: tuple[Interval, ...]
    working_fraction: tuple[Interval, ...]
    mean_queue_length: tuple[Interval, ...]
    measured_arrivals: int
    cycles: int
    batches: int
    sim_time: float
    max_wait_deviation: float
    flags: tuple[str, ...] = ()
    trace: SimTrace | None = field(default=None, repr=False)


def _batch_interval(values: Sequence[float], confidence: float) -> Interval:
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if len(v) == 0:
        return Interval(math.nan, math.nan)
    if len(v) == 1:
        return Interval(float(v[0]), math.inf)
    q = stats.t.ppf(0.5 + confidence / 2.0, len(v) - 1)
    return Interval(float(v.mean()), float(q * v.std(ddof=1) / math.sqrt(len(v))))


def _bind_laws(config: PollingConfig, sim: SimConfig):
    if sim.service_dists is None:
        service = [fit_two_moment(s.b, s.b2) for s in config.stations]
    else:
        service = list(sim.service_dists)
    if sim.switchover_dists is None:
        switch = [Deterministic(0.0) if w.r == 0 else fit_two_moment(w.r, w.r2) for w in config.switchovers]
    else:
        switch = list(sim.switchover_dists)
    if len(service) != config.n or len(switch) != config.n:
        raise MomentMismatch("need one service and one switchover law per station")
    for i, (d, s) in enumerate(zip(service, config.stations)):
        if not matches_moments(d, s.b, s.b2):
            raise MomentMismatch(f"station {i}: law {d} has moments ({d.mean}, {d.second_moment}), config ({s.b}, {s.b2})")
    for i, (d, w) in enumerate(zip(switch, config.switchovers)):
        if not matches_moments(d, w.r, w.r2):
            raise MomentMismatch(f"switchover {i}: law {d} has moments ({d.mean}, {d.second_moment}), config ({w.r}, {w.r2})")
    return service, switch


class _Streams:
    """Per-station arrival/service streams and per-edge switchover streams.

    Each stream has its own Philox generator spawned from one seed, so a
    stream's values do not depend on how far the others were consumed.
    """

    SWITCH_CHUNK = 1 << 14

    def __init__(self, config: PollingConfig, service, switch, seed: int, expected_arrivals: int):
        n = config.n
        children = np.random.SeedSequence(seed).spawn(3 * n)
        self.gen_arr = [np.random.Generator(np.random.Philox(children[3 * j])) for j in range(n)]
        self.gen_svc = [np.random.Generator(np.random.Philox(children[3 * j + 1])) for j in range(n)]
        self.gen_sw = [np.random.Generator(np.random.Philox(children[3 * j + 2])) for j in range(n)]
        self.lam = [s.lam for s in config.stations]
        self.service = service
        self.switch = switch
        total = sum(self.lam)
        self.first_chunk = [int(expected_arrivals * l / total * 1.05) + 1024 for l in self.lam]
        self.arr: list[list[float]] = [[INF] for _ in range(n)]
        self.svc: list[list[float]] = [[] for _ in range(n)]
        self.last = [0.0] * n
        for j in range(n):
            self.extend(j, self.first_chunk[j])
        self.sw: list[list[float]] = [[] for _ in range(n)]
        self.sw_pos = [0] * n

    def extend(self, j: int, size: int | None = None) -> None:
        size = size or max(self.first_chunk[j] // 4, 4096)
        gaps = self.gen_arr[j].exponential(1.0 / self.lam[j], size)
        times = self.last[j] + np.cumsum(gaps)
        self.last[j] = float(times[-1])
        a = self.arr[j]
        a.pop()  # sentinel
        a.extend(times.tolist())
        a.append(INF)
        self.svc[j].extend(self.service[j].sample(self.gen_svc[j], size).tolist())

    def switchover(self, j: int) -> float:
        pos = self.sw_pos[j]
        buf = self.sw[j]
        if pos >= len(buf):
            buf = self.switch[j].sample(self.gen_sw[j], self.SWITCH_CHUNK).tolist()
            self.sw[j] = buf
            pos = 0
        self.sw_pos[j] = pos + 1
        return buf[pos]


def simulate(config: PollingConfig, sim: SimConfig | None = None) -> SimEstimate:
    """Simulate ``config`` under ``sim.strategy``; credits/timers are ``config``'s ``T``.

    Strategies:

    * ``WAIT_AND_SEE``: the server idles at an empty station until a total of
      ``T_i`` idle time has been spent there during the visit, serving every
      arrival in the meantime.
    * ``TOTAL_TIMER``: ``T_i`` caps the time since the server's arrival at the
      station; after it, the server empties the queue and leaves without
      idling again.
    * ``BOXMA_TIMER``: only if the server finds station ``i`` empty on arrival
      does it wait up to ``T_i`` for a message; it leaves once that first busy
      period ends or the timer runs out. Applied at the first station unless
      ``sim.boxma_all_stations``.
    * ``EXHAUSTIVE``: credits ignored.
    """
    sim = sim or SimConfig()
    validate(config)
    service, switch = _bind_laws(config, sim)
    n = config.n
    strategy = sim.strategy
    T = [s.T for s in config.stations]
    if strategy is Strategy.EXHAUSTIVE:
        T = [0.0] * n
    boxma = [strategy is Strategy.BOXMA_TIMER and (sim.boxma_all_stations or j == 0) for j in range(n)]
    if strategy is Strategy.BOXMA_TIMER:
        # stations without a timer are served plainly exhaustively
        T = [T[j] if boxma[j] else 0.0 for j in range(n)]
    total_timer = strategy is Strategy.TOTAL_TIMER

    streams = _Streams(config, service, switch, sim.seed, sim.warmup_arrivals + sim.measured_arrivals)
    arr, svc = streams.arr, streams.svc
    k = [0] * n
    starts: list[list[float]] = [[] for _ in range(n)]
    trace = sim.record_trace
    sw_log: list[tuple[float, float, int]] = []
    wait_log: list[tuple[float, float, int]] = []

    # per-batch accumulators
    acc_sw = [0.0] * n
    acc_wait = [0.0] * n
    acc_work = [0.0] * n
    batch_rows = []  # (t_end, cycles, k snapshot, sw, wait, work)

    measuring = False
    done = False
    flags: list[str] = []
    t = 0.0
    cycles = 0
    cycles_in_batch = 0
    t_measure = 0.0
    k_measure = [0] * n
    per_batch = sim.measured_arrivals / sim.batches
    max_dev = 0.0
    check_ws = strategy is Strategy.WAIT_AND_SEE

    while not done:
        # cycle boundary: server is about to arrive at station 0
        served = sum(k)
        if not measuring:
            if served >= sim.warmup_arrivals and cycles >= sim.warmup_cycles:
                measuring = True
                t_measure = t
                k_measure = list(k)
                acc_sw, acc_wait, acc_work = [0.0] * n, [0.0] * n, [0.0] * n
                cycles_in_batch = 0
                max_dev = 0.0
                sw_log.clear()
                wait_log.clear()
        else:
            measured = served - sum(k_measure)
            if measured >= (len(batch_rows) + 1) * per_batch:
                batch_rows.append((t, cycles_in_batch, list(k), acc_sw, acc_wait, acc_work))
                acc_sw, acc_wait, acc_work = [0.0] * n, [0.0] * n, [0.0] * n
                cycles_in_batch = 0
                if len(batch_rows) == sim.batches:
                    break
        if cycles & 1023 == 0 and cycles:
            if any(bisect_right(arr[j], t) - k[j] > sim.queue_guard for j in range(n)):
                flags.append("unstable_detected")
                break

        for j in range(n):
            a = arr[j]
            s = svc[j]
            st = starts[j]
            push = st.append
            kk = k[j]
            t_arrive = t
            waited = 0.0
            credit = T[j]
            if boxma[j]:
                if a[kk] > t and credit > 0:
                    while a[kk] == INF:
                        streams.extend(j)
                    gap = a[kk] - t
                    if gap < credit:
                        if trace:
                            wait_log.append((t, a[kk], j))
                        waited = gap
                        t = a[kk]
                    else:
                        if trace:
                            wait_log.append((t, t + credit, j))
                        waited = credit
                        t += credit
                        credit = -1.0
                # the timer fired on an empty queue: switch at once; otherwise
                # serve exhaustively (the first busy period) and leave
                while credit >= 0.0:
                    while a[kk] <= t:
                        push(t)
                        t += s[kk]
                        kk += 1
                    if a[kk] == INF:
                        streams.extend(j)
                        continue
                    break
            elif total_timer:
                deadline = t + credit
                while True:
                    while a[kk] <= t:
                        push(t)
                        t += s[kk]
                        kk += 1
                    nxt = a[kk]
                    if nxt == INF:
                        streams.extend(j)
                        continue
                    if t < deadline:
                        end = nxt if nxt < deadline else deadline
                        if trace:
                            wait_log.append((t, end, j))
                        waited += end - t
                        t = end
                        if end == deadline:
                            break
                        continue
                    break
            else:
                while True:
                    while a[kk] <= t:
                        push(t)
                        t += s[kk]
                        kk += 1
                    nxt = a[kk]
                    if nxt == INF:
                        streams.extend(j)
                        continue
                    if credit <= 0.0:
                        break
                    gap = nxt - t
                    if gap < credit:
                        if trace:
                            wait_log.append((t, nxt, j))
                        credit -= gap
                        waited += gap
                        t = nxt
                    else:
                        if trace:
                            wait_log.append((t, t + credit, j))
                        waited += credit
                        t += credit
                        break
                if check_ws:
                    dev = abs(waited - T[j])
                    if dev > max_dev:
                        max_dev = dev
            k[j] = kk
            acc_wait[j] += waited
            acc_work[j] += t - t_arrive - waited
            x = streams.switchover(j)
            if trace:
                sw_log.append((t, t + x, j))
            acc_sw[j] += x
            t += x
        cycles += 1
        cycles_in_batch += 1

    return _summarise(config, sim, streams, starts, k, batch_rows, t_measure, k_measure,
                      cycles, max_dev, flags, sw_log, wait_log)


def _summarise(config, sim, streams, starts, k, batch_rows, t_measure, k_measure,
               cycles, max_dev, flags, sw_log, wait_log) -> SimEstimate:
    n = config.n
    conf = sim.confidence
    nan = Interval(math.nan, math.nan)
    if not batch_rows:
        flags = list(flags) + ["no_complete_batch"]
        return SimEstimate((nan,) * n, nan, nan, {}, (nan,) * n, (nan,) * n, (nan,) * n, (nan,) * n,
                           0, 0, 0, 0.0, max_dev, tuple(flags))

    t_end = batch_rows[-1][0]
    arr_np = [np.asarray(streams.arr[j][: k[j]]) for j in range(n)]
    st_np = [np.asarray(starts[j]) for j in range(n)]
    delays = [st_np[j] - arr_np[j] for j in range(n)]
    b = [s.b for s in config.stations]

    station_batches = [[] for _ in range(n)]
    weighted_batches, cycle_batches = [], []
    sw_frac = [[] for _ in range(n)]
    wait_frac = [[] for _ in range(n)]
    work_frac = [[] for _ in range(n)]
    queue_len = [[] for _ in range(n)]
    totals = {"working": 0.0, "switching": 0.0, "waiting": 0.0}

    # full arrival/start arrays up to t_end for queue-length integrals
    full_arr, full_start = [], []
    for j in range(n):
        m = bisect_right(streams.arr[j], t_end)
        fa = np.asarray(streams.arr[j][:m])
        fs = np.full(m, math.inf)
        fs[: len(starts[j])] = st_np[j][:m] if len(starts[j]) >= m else st_np[j]
        full_arr.append(fa)
        full_start.append(fs)

    prev_t, prev_k = t_measure, k_measure
    for t_b, ncyc, k_b, sw, wait, work in batch_rows:
        span = t_b - prev_t
        num = den = 0.0
        for j in range(n):
            dj = delays[j][prev_k[j]: k_b[j]]
            station_batches[j].append(float(dj.mean()) if len(dj) else math.nan)
            num += b[j] * float(dj.sum())
            den += b[j] * len(dj)
            sw_frac[j].append(sw[j] / span)
            wait_frac[j].append(wait[j] / span)
            work_frac[j].append(work[j] / span)
            lo = int(np.searchsorted(full_start[j], prev_t, side="right"))
            hi = int(np.searchsorted(full_arr[j], t_b, side="left"))
            if hi > lo:
                ov = np.minimum(full_start[j][lo:hi], t_b) - np.maximum(full_arr[j][lo:hi], prev_t)
                queue_len[j].append(float(np.clip(ov, 0.0, None).sum()) / span)
            else:
                queue_len[j].append(0.0)
        weighted_batches.append(num / den if den > 0 else math.nan)
        cycle_batches.append(span / ncyc if ncyc else math.nan)
        totals["working"] += sum(work)
        totals["switching"] += sum(sw)
        totals["waiting"] += sum(wait)
        prev_t, prev_k = t_b, k_b

    elapsed = t_end - t_measure
    fractions = {key: v / elapsed for key, v in totals.items()}
    measured = sum(batch_rows[-1][2]) - sum(k_measure)

    trace = None
    if sim.record_trace:
        trace = SimTrace(
            t_start=t_measure,
            t_end=t_end,
            arrivals=full_arr,
            starts=full_start,
            service=[np.asarray(streams.svc[j][: len(full_arr[j])]) for j in range(n)],
            switching=np.asarray([row for row in sw_log if row[1] <= t_end], dtype=float).reshape(-1, 3),
            waiting=np.asarray([row for row in wait_log if row[1] <= t_end], dtype=float).reshape(-1, 3),
        )

    return SimEstimate(
        per_station_delay=tuple(_batch_interval(v, conf) for v in station_batches),
        weighted_delay=_batch_interval(weighted_batches, conf),
        mean_cycle=_batch_interval(cycle_batches, conf),
        state_fractions=fractions,
        switching_fraction=tuple(_batch_interval(v, conf) for v in sw_frac),
        waiting_fraction=tuple(_batch_interval(v, conf) for v in wait_frac),
        working_fraction=tuple(_batch_interval(v, conf) for v in work_frac),
        mean_queue_length=tuple(_batch_interval(v, conf) for v in queue_len),
        measured_arrivals=measured,
        cycles=sum(row[1] for row in batch_rows),
        batches=len(batch_rows),
        sim_time=elapsed,
        max_wait_deviation=max_dev,
        flags=tuple(flags),
        trace=trace,
    )


def workload_at(trace: SimTrace, times: np.ndarray) -> np.ndarray:
    """Total unfinished work in the system at each of ``times``."""
    times = np.asarray(times, dtype=float)
    total = np.zeros_like(times)
    for a, s, x in zip(trace.arrivals, trace.starts, trace.service):
        cx = np.concatenate(([0.0], np.cumsum(x)))
        arrived = np.searchsorted(a, times, side="right")
        begun = np.searchsorted(s, times, side="right")
        total += cx[arrived] - cx[begun]
        idx = begun - 1
        ok = idx >= 0
        rem = np.zeros_like(times)
        rem[ok] = s[idx[ok]] + x[idx[ok]] - times[ok]
        total += np.clip(rem, 0.0, None)
    return total


def sample_state_workload(trace: SimTrace, state: str, station: int, samples: int = 200_000,
                          seed: int = 0, batches: int = 30, confidence: float = 0.99) -> Interval:
    """Time-average workload while the server is switching from / waiting at ``station``.

    Observation instants are uniform over the union of the matching state
    intervals; their workloads are batched in time order for the interval.
    """
    table = {"switching": trace.switching, "waiting": trace.waiting}[state]
    rows = table[table[:, 2] == station]
    if len(rows) == 0:
        return Interval(math.nan, math.nan)
    lengths = rows[:, 1] - rows[:, 0]
    rng = np.random.default_rng(seed)
    cum = np.cumsum(lengths)
    u = np.sort(rng.uniform(0.0, cum[-1], samples))
    which = np.searchsorted(cum, u, side="right")
    which = np.minimum(which, len(rows) - 1)
    offset = u - (cum[which] - lengths[which])
    times = rows[which, 0] + offset
    w = workload_at(trace, times)
    return _batch_interval([chunk.mean() for chunk in np.array_split(w, batches)], confidence)


def strategy_ii_heuristic_credit(config: PollingConfig) -> float:
    """Suggested total-timer value at station 1 for two stations.

    The optimal wait-and-see credit at station 1 plus the work that arrives
    there during an average cycle run at the wait-and-see optimum.
    """
    from ..optimize import optimal_credits_two_station

    decision = optimal_credits_two_station(config)
    t1, t2 = decision.t_opt
    d = config.stations[0]
    rho0 = float(config.rho.sum())
    r0 = float(config.r.sum())
    return t1 + d.rho * (r0 + t1 + t2) / (1.0 - rho0)
