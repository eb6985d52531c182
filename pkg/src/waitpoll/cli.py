"""Command-line front end.

    waitpoll evaluate --config cfg.json
    waitpoll optimize --config cfg.json --json
    waitpoll sweep --config cfg.json --variable T1 --range 0:2:101 --strategy wait_and_see

Exit status: 0 ok, 2 invalid configuration, 3 a result carries a convergence
or instability flag, 64 usage error, 74 file I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from enum import Enum
from typing import Any, Sequence

import numpy as np

from . import analytic
from .bound import delay_lower_bound
from .errors import PollingError
from .model import PollingConfig, config_from_dict, load_document, validate
from .optimize import optimal_credits_general, optimal_credits_two_station
from .simulation import SimConfig, Strategy, distribution_from_dict, simulate, strategy_ii_heuristic_credit
from .sweep import ANALYTIC_COLUMNS, SweepSpec, parse_range, rows_to_csv, run_sweep

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FLAGGED = 3
EXIT_USAGE = 64
EXIT_IO = 74

FLAG_WORDS = ("did_not_converge", "unstable_detected", "no_complete_batch")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve
        raise UsageError(message)


def jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.name != "trace"}
    if isinstance(obj, tuple) and hasattr(obj, "_fields"):
        return {k: jsonable(v) for k, v in zip(obj._fields, obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _num(x: float) -> str:
    return f"{x:.10g}"


def _vec(xs) -> str:
    return "(" + ",".join(_num(float(x)) for x in xs) + ")"


def _report_lines(name: str, rep: analytic.DelayReport) -> list[str]:
    lines = [f"{name:<26} {_num(rep.weighted_mean)}"]
    for term, v in rep.terms.items():
        lines.append(f"  {term:<24} {_num(v)}")
    if rep.per_station is not None:
        lines.append(f"  {'per_station':<24} {_vec(rep.per_station)}")
    if rep.flags:
        lines.append(f"  flags: {', '.join(rep.flags)}")
    return lines


def _sim_config(doc: dict, args, config: PollingConfig, default_strategy: str) -> SimConfig:
    sim_doc = doc.get("sim", {}) or {}
    kw: dict[str, Any] = {}
    strategy = args.strategy[0] if getattr(args, "strategy", None) else sim_doc.get("strategy", default_strategy)
    kw["strategy"] = strategy
    seed = args.seed if args.seed is not None else sim_doc.get("seed", 0)
    kw["seed"] = int(seed)
    if args.arrivals is not None or "arrivals" in sim_doc:
        kw["measured_arrivals"] = int(args.arrivals if args.arrivals is not None else sim_doc["arrivals"])
    if args.batches is not None or "batches" in sim_doc:
        kw["batches"] = int(args.batches if args.batches is not None else sim_doc["batches"])
    if "warmup" in sim_doc:
        kw["warmup_arrivals"] = int(sim_doc["warmup"])
    if "service_dists" in sim_doc:
        kw["service_dists"] = tuple(distribution_from_dict(d) for d in sim_doc["service_dists"])
    if "switchover_dists" in sim_doc:
        kw["switchover_dists"] = tuple(distribution_from_dict(d) for d in sim_doc["switchover_dists"])
    return SimConfig(**kw)


def cmd_evaluate(config, doc, args):
    reports = {
        "wait_and_see": analytic.wait_and_see_delay(config),
        "exhaustive": analytic.exhaustive_delay(config),
    }
    if config.n == 1:
        reports["single_station"] = analytic.single_station_delay(config)
    if config.n == 2:
        reports["two_station"] = analytic.two_station_delay(config)
        reports["two_station_coefficients"] = analytic.delay_via_cs(config)
    extra = {"mean_cycle": analytic.mean_cycle_time(config)}
    if args.json:
        return {**reports, **extra}, ()
    lines = []
    for name, rep in reports.items():
        lines += _report_lines(name, rep)
    lines.append(f"{'mean_cycle':<26} {_num(extra['mean_cycle'])}")
    return "\n".join(lines), ()


def cmd_optimize(config, doc, args):
    if config.n == 2:
        res = optimal_credits_two_station(config)
        if args.json:
            return res, ()
        lines = [
            f"T*={_vec(res.t_opt)}",
            f"delay at T*: {_num(res.delay_opt)}",
            f"exhaustive:  {_num(analytic.exhaustive_delay(config).weighted_mean)}",
            f"method: {res.method}",
            res.message,
        ]
        lines += [f"  {k}: {_num(v)}" for k, v in res.condition_values.items()]
        return "\n".join(lines), ()
    res = optimal_credits_general(config)
    if args.json:
        return res, res.flags
    lines = [
        f"T*={_vec(res.t_opt)}",
        f"delay at T*: {_num(res.delay_opt)}",
        f"kkt residual: {res.kkt_residual:.3g}",
    ]
    if res.unbounded:
        lines.append(f"unbounded: delay decreases without limit along T*, infimum {_num(res.infimum)}")
    if res.flags:
        lines.append(f"flags: {', '.join(res.flags)}")
    return "\n".join(lines), res.flags


def cmd_bound(config, doc, args):
    res = delay_lower_bound(config)
    if args.json:
        return res, res.flags
    lines = [f"lower bound: {_num(res.bound)}", f"f*={_vec(res.f_opt)}", f"kkt residual: {res.kkt_residual:.3g}"]
    if res.flags:
        lines.append(f"flags: {', '.join(res.flags)}")
    return "\n".join(lines), res.flags


def cmd_simulate(config, doc, args):
    sim = _sim_config(doc, args, config, Strategy.WAIT_AND_SEE.value)
    est = simulate(config, sim)
    if args.json:
        return est, est.flags
    w = est.weighted_delay
    lines = [
        f"strategy: {sim.strategy.value}  seed: {sim.seed}",
        f"weighted delay: {_num(w.mean)} +- {_num(w.half_width)} (99% CI)",
        f"mean cycle:     {_num(est.mean_cycle.mean)} +- {_num(est.mean_cycle.half_width)}",
    ]
    for i, d in enumerate(est.per_station_delay, 1):
        lines.append(f"  station {i}: {_num(d.mean)} +- {_num(d.half_width)}")
    lines.append("state fractions: " + ", ".join(f"{k}={v:.6f}" for k, v in est.state_fractions.items()))
    if sim.strategy in (Strategy.WAIT_AND_SEE, Strategy.EXHAUSTIVE):
        ref = analytic.wait_and_see_delay(config if sim.strategy is Strategy.WAIT_AND_SEE else config.with_credits([0.0] * config.n))
        lines.append(f"closed form:    {_num(ref.weighted_mean)}")
    if est.flags:
        lines.append(f"flags: {', '.join(est.flags)}")
    return "\n".join(lines), est.flags


def cmd_sweep(config, doc, args):
    if not args.variable or not args.range:
        raise UsageError("sweep needs --variable and --range")
    try:
        start, stop, steps = parse_range(args.range)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.center_heuristic:
        c = strategy_ii_heuristic_credit(config)
        start, stop = c + start, c + stop
    strategies = tuple(Strategy(s).value for s in (args.strategy or ()))
    sim = _sim_config(doc, args, config, Strategy.WAIT_AND_SEE.value) if strategies else None
    try:
        spec = SweepSpec(args.variable, start, stop, steps, ANALYTIC_COLUMNS, sim, strategies)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = run_sweep(config, spec, jobs=args.jobs)
    if args.json:
        return {"columns": spec.columns, "rows": rows}, ()
    return rows_to_csv(rows, spec.columns).rstrip("\n"), ()


COMMANDS = {
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="JSON configuration document")
    common.add_argument("--json", action="store_true", help="emit JSON instead of text/CSV")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--seed", type=int, help="simulation seed (unsigned 64-bit)")
    common.add_argument("--strategy", action="append", choices=[s.value for s in Strategy],
                        help="simulation strategy; repeat in sweep for several columns")
    common.add_argument("--arrivals", type=int, help="measured arrivals per simulation")
    common.add_argument("--batches", type=int, help="batches for batch means")

    p = _Parser(prog="waitpoll", description="Polling with wait-and-see credits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "sweep":
            sp.add_argument("--variable", help="T<i>, lambda<i>, r<i> or rho<i> (stations numbered from 1)")
            sp.add_argument("--range", help="start:stop:steps")
            sp.add_argument("--jobs", type=int, default=1, help="worker processes")
            sp.add_argument("--center-heuristic", action="store_true",
                            help="read --range as offsets from the suggested total-timer value at station 1 "
                                 "(write negative offsets as --range=-0.5:0.5:11)")
    return p


def run_command(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    try:
        doc = load_document(args.config)
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid JSON in {args.config}: {exc}", file=stderr)
        return EXIT_INVALID
    try:
        config = validate(config_from_dict(doc))
        out, flags = COMMANDS[args.command](config, doc, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except (PollingError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=stderr)
        return EXIT_INVALID
    except ArithmeticError as exc:
        print(f"numerical check failed: {exc}", file=stderr)
        return EXIT_FLAGGED

    text = json.dumps(jsonable(out), indent=2) if args.json else out
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text, file=stdout)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=stderr)
        return EXIT_IO
    if any(f in FLAG_WORDS for f in flags):
        return EXIT_FLAGGED
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
