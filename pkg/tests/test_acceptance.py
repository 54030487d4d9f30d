"""Acceptance suite at demonstration scale: 1000 agents, 48 slots, default scenario.

Each test records one PASS/FAIL line, repeated in the terminal summary.
The full-day runs are shared through module fixtures.
"""

from collections import defaultdict

import numpy as np
import pytest

from scpa import io as sio
from scpa.checks import (
    bid_device_check,
    bid_log_check,
    bid_quad_check,
    bnb_enumeration_check,
    mce_oracle_check,
)
from scpa.clock import BidLedger, ClockState, check_rp_constraints, clock_round
from scpa.config import default_scenario
from scpa.cost import CostModel
from scpa.orchestrator import run_day, run_tou_benchmark

pytestmark = pytest.mark.slow

CSV_FILES = ("clearings.csv", "clock_rounds.csv", "summary.csv")

# slot-of-day windows (0 = 00:00-00:30)
PRE_DAWN = range(2, 10)
MORNING = range(12, 18)
MIDDAY = range(20, 31)
EVENING = range(33, 41)
LATE = range(42, 48)


@pytest.fixture(scope="module")
def cfg():
    return default_scenario()


@pytest.fixture(scope="module")
def day(cfg):
    return run_day(cfg)


@pytest.fixture(scope="module")
def day_files(day, tmp_path_factory):
    out = tmp_path_factory.mktemp("run_serial")
    sio.write_run(day, out)
    return out


@pytest.fixture(scope="module")
def threaded_files(cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("run_threaded")
    sio.write_run(run_day(cfg.with_overrides(workers=2)), out)
    return out


@pytest.fixture(scope="module")
def tou(cfg):
    return run_tou_benchmark(cfg)


def _window_mean(prices_by_sod, window):
    return float(np.mean([prices_by_sod[s] for s in window]))


def test_criterion_01_bootstrap_convergence(day, report):
    boot = day.sessions[0]
    final = boot.deficits[-1]
    closing = float(boot.prices[-1, 0])
    ok = (boot.iterations <= 20 and not boot.forced and bool(np.all(final <= 1e-12))
          and 0.40 <= closing <= 0.50)
    report(1, "bootstrap clock convergence", ok,
           f"{boot.iterations} iterations, max final deficit {final.max():.2e}, slot 1 closes at {closing:.4f}")
    assert ok


def test_criterion_02_zero_profit_clearing(day, report):
    worst = max(abs(c.revenue - c.cost) / max(1.0, c.quantity) for c in day.clearings)
    ok = len(day.clearings) == 48 and worst <= 1e-6
    report(2, "zero-profit clearing", ok, f"{len(day.clearings)} clearings, worst |profit|/max(1,x) {worst:.2e}")
    assert ok


def test_criterion_03_oracle_equivalence(report):
    result = mce_oracle_check(instances=20, seed=0)
    ok = result.passed and result.instances >= 20 and result.seconds < 10.0
    report(3, "solve_mce vs brute-force oracle", ok, result.line())
    assert ok


def test_criterion_04_bid_solvers(report):
    results = [bid_quad_check(100), bid_log_check(100), bid_device_check(100), bnb_enumeration_check()]
    ok = all(r.passed for r in results) and all(r.instances >= 100 for r in results)
    report(4, "bid solvers vs numeric oracles", ok, "; ".join(r.line() for r in results))
    assert ok


def test_criterion_05_activity_rule(day, report):
    # straightforward bidders over the whole day
    sincere = day.rp_rejections == 0 and day.proxy_rejections == 0
    # a parking bidder props up a cheap slot, then moves to the slot whose price rose most
    ledger = BidLedger()
    ledger.append([0.40, 0.40], [4.0, 0.0])
    ledger.append([0.41, 0.40], [4.0, 0.0])
    caught = check_rp_constraints(ledger, [0.0, 4.0], [0.45, 0.48]) is not None
    state = ClockState.open([0.40, 0.40], 2)
    clock_round(state, np.array([[4.0, 0.0], [1.0, 1.0]]), CostModel(0.002), np.zeros(2))
    state.prices = np.array([0.45, 0.48])
    rejected = clock_round(state, np.array([[0.0, 4.0], [1.0, 1.0]]), CostModel(0.002), np.zeros(2))
    enforced = bool(rejected[0]) and not bool(rejected[1]) and np.allclose(state.last_bids[0], [4.0, 0.0])
    ok = sincere and caught and enforced
    report(5, "activity rule", ok,
           f"{day.rp_rejections} clock / {day.proxy_rejections} proxy rejections of sincere bids; "
           f"parking bid {'rejected' if caught and enforced else 'ACCEPTED'}")
    assert ok


def test_criterion_06_price_monotonicity(day_files, report):
    rows = sio.read_clock_rounds(day_files / "clock_rounds.csv")
    series = defaultdict(list)
    for r in rows:
        series[(r["session"], r["slot"])].append((r["iteration"], r["price"]))
    drops = 0
    for points in series.values():
        prices = [p for _, p in sorted(points)]
        drops += sum(b < a for a, b in zip(prices, prices[1:]))
    ok = drops == 0 and len(series) == 48 * 48
    report(6, "per-session price monotonicity", ok, f"{len(rows)} rows, {len(series)} session-slot series, {drops} drops")
    assert ok


def test_criterion_07_iteration_regime(day, report):
    mean = day.mean_iterations
    ok = 5.0 <= mean <= 25.0
    report(7, "mean clock iterations", ok, f"mean {mean:.2f} over {len(day.sessions)} sessions, "
                                           f"{day.forced_close_count} forced closes")
    assert ok


def test_criterion_08_performance(day, report):
    wall, per_agent = day.wall_seconds, day.mean_bid_seconds
    ok = wall <= 1800.0 and per_agent <= 0.058
    report(8, "performance", ok, f"day in {wall:.1f}s, mean bid {per_agent:.2e}s per agent")
    assert ok


def test_criterion_09_day_shape_and_tou(day, tou, report):
    by_sod = {(c.slot - 1) % 48: c.price for c in day.clearings}
    pre, morn, mid = (_window_mean(by_sod, w) for w in (PRE_DAWN, MORNING, MIDDAY))
    eve, late = _window_mean(by_sod, EVENING), _window_mean(by_sod, LATE)
    shape = morn > mid and morn > pre and eve > mid and late < eve
    d = tou.deficit
    tou_ok = bool(np.all(d != 0)) and bool(np.any(d > 0)) and bool(np.any(d < 0)) and bool(np.any(d[list(MORNING)] > 0))
    ok = shape and tou_ok
    report(9, "day shape and ToU deficits", ok,
           f"window means pre {pre:.3f} morning {morn:.3f} midday {mid:.3f} evening {eve:.3f} late {late:.3f}; "
           f"ToU deficits {int((d > 0).sum())} positive / {int((d < 0).sum())} negative, "
           f"max morning {d[list(MORNING)].max():+.3f}")
    assert ok


def test_criterion_10_determinism(day_files, threaded_files, report):
    same = {name: (day_files / name).read_bytes() == (threaded_files / name).read_bytes() for name in CSV_FILES}
    ok = all(same.values())
    report(10, "byte-identical CSVs, 1 vs 2 workers", ok, ", ".join(f"{k} {'==' if v else '!='}" for k, v in same.items()))
    assert ok
