"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, default_scenario, load_scenario
from .core import Horizon
from .orchestrator import DEFAULT_TOU, run_day, run_tou_benchmark, summarize

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
OUT_ENV = "SCPA_OUT_DIR"

log = logging.getLogger("scpa")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario JSON (default: packaged scenario)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./scpa_out)")
    common.add_argument("--days", type=int, help="override the number of simulated days")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    parser = argparse.ArgumentParser(prog="scpa", description="Staggered clock-proxy auction simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run-day", parents=[common], help="simulate full days; write CSVs and figures")
    sub.add_parser("run-tou", parents=[common], help="time-of-use benchmark; write tou.csv")
    demo = sub.add_parser("run-clock-demo", parents=[common], help="one bootstrap clock session, printed")
    demo.add_argument("--slot", type=int, default=0, help="horizon position to trace (default 0)")
    chk = sub.add_parser("oracle-check", parents=[common], help="tiny-instance oracle comparisons")
    chk.set_defaults(out=None)
    return parser


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV, "scpa_out"))


def _load(args):
    cfg = load_scenario(args.config) if args.config is not None else default_scenario()
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    if args.days is not None:
        if args.days < 1:
            raise ConfigError([("days", "days must be an integer >= 1")])
        cfg = cfg.with_overrides(days=args.days)
    return cfg


def cmd_run_day(args, cfg) -> int:
    from .io import write_run, write_tou
    from .plots import emit_plots

    out = _out_dir(args)
    say = (lambda *a: None) if args.quiet else print

    def progress(c):
        if c.slot % 12 == 0:
            log.info("slot %d cleared at %.4f", c.slot, c.price)

    run = run_day(cfg, on_clearing=progress)
    paths = write_run(run, out)
    tou = run_tou_benchmark(cfg)
    paths["tou"] = write_tou(tou, out)
    figures = emit_plots(run, out, tou)
    totals = summarize(run)["totals"]
    say(f"cleared {totals['slots_cleared']} slots, mean price {totals['mean_price']:.4f} $/kWh, "
        f"mean clock iterations {totals['mean_clock_iterations']:.1f}, "
        f"forced closes {totals['forced_close_count']}, wall {run.wall_seconds:.0f}s")
    for p in list(paths.values()) + figures:
        say(f"  wrote {p}")
    return EXIT_OK


def cmd_run_tou(args, cfg) -> int:
    from .io import write_tou

    tou = run_tou_benchmark(cfg)
    path = write_tou(tou, _out_dir(args))
    if not args.quiet:
        d = tou.deficit
        print(f"ToU: {int((d > 0).sum())} slots under-recover cost, {int((d < 0).sum())} over-recover; "
              f"net shortfall {tou.shortfall.sum():.2f} $")
        print(f"  wrote {path}")
    return EXIT_OK


def cmd_clock_demo(args, cfg) -> int:
    from .orchestrator import SimState, SimulationLog, _setup, run_clock

    h = args.slot
    if not 0 <= h < cfg.horizon:
        raise ConfigError([("slot", f"must lie in [0, {cfg.horizon - 1}]")])
    cfg, streams, pop = _setup(cfg, None, None)
    try:
        state = SimState(cfg, pop, streams, SimulationLog(cfg.seed, 1, cfg.horizon),
                         Horizon(1, cfg.horizon, cfg.slot_duration),
                         np.full(cfg.horizon, cfg.clock.initial_price), cfg.horizon)
        run_clock(state)
    finally:
        pop.shutdown()
    rec = state.log.sessions[0]
    if not args.quiet:
        print(f"{'iter':>4} {'price':>8} {'demand':>9} {'revenue':>9} {'cost':>9} {'deficit':>9}")
        for k in range(rec.iterations):
            p, x, rd = rec.prices[k, h], rec.demand[k, h], rec.deficits[k, h]
            print(f"{k + 1:>4} {p:8.4f} {x:9.2f} {p * x:9.2f} {(rd + p) * x:9.2f} {rd:9.5f}")
        print(f"terminated after {rec.iterations} iterations"
              f"{' (forced close)' if rec.forced else ''}; slot {h + 1} closes at {rec.prices[-1, h]:.4f}")
    return EXIT_OK


def cmd_oracle_check(args, cfg) -> int:
    from .checks import run_oracle_checks

    results = run_oracle_checks(seed=args.seed or 0)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


COMMANDS = {
    "run-day": cmd_run_day,
    "run-tou": cmd_run_tou,
    "run-clock-demo": cmd_clock_demo,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for path, msg in exc.violations:
            print(f"  {path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure of the run maps to exit code 2
        log.debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
