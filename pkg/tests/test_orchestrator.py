import numpy as np
import pytest

from scpa.clock import restart_prices
from scpa.config import default_scenario
from scpa.core import SLOTS_PER_DAY, Horizon
from scpa.orchestrator import (
    DEFAULT_TOU,
    SimState,
    SimulationLog,
    TouTariff,
    _setup,
    run_clock,
    run_day,
    run_scpa_cycle,
    run_tou_benchmark,
    summarize,
)

H = 6


@pytest.fixture(scope="module")
def small_cfg():
    return default_scenario().with_overrides(
        agents={"quad_total": 20, "log_per_slot": 20, "device_milp": 20}, horizon=H, seed=5)


@pytest.fixture(scope="module")
def small_day(small_cfg):
    return run_day(small_cfg)


def test_one_clearing_per_slot_in_order(small_day):
    assert [c.slot for c in small_day.clearings] == list(range(1, SLOTS_PER_DAY + 1))


def test_one_session_per_cleared_slot(small_day):
    assert len(small_day.sessions) == SLOTS_PER_DAY
    assert [s.start_slot for s in small_day.sessions] == list(range(1, SLOTS_PER_DAY + 1))


def test_horizon_always_holds_h_live_slots(small_day):
    for prev, nxt in zip(small_day.sessions, small_day.sessions[1:]):
        assert prev.prices.shape[1] == H == nxt.prices.shape[1]
        # the front slot left and slot t+H joined
        assert nxt.slots[-1] == prev.slots[0] + H
        np.testing.assert_array_equal(nxt.slots[:-1], prev.slots[1:])


def test_restart_from_discounted_closing_prices(small_cfg, small_day):
    c = small_cfg.clock
    for k in range(1, len(small_day.sessions)):
        expected = restart_prices(small_day.closing_prices[k - 1], c.discount, c.initial_price)
        np.testing.assert_allclose(small_day.sessions[k].prices[0], expected)
        assert small_day.sessions[k].prices[0, -1] == c.initial_price


def test_zero_profit_and_feasible_allocation(small_day):
    for c in small_day.clearings:
        assert abs(c.revenue - c.cost) <= 1e-6 * max(1.0, c.quantity)
        assert c.allocations.sum() + c.uncontrolled == pytest.approx(c.quantity, abs=1e-6)
        assert np.all(c.allocations >= -1e-12)


def test_group_subtotals_sum_to_allocations(small_day):
    for c in small_day.clearings:
        assert sum(c.subtotals.values()) == pytest.approx(c.allocations.sum())


def test_clock_prices_never_fall_within_a_session(small_day):
    for s in small_day.sessions:
        assert np.all(np.diff(s.prices, axis=0) >= -1e-12)


def test_sincere_bidders_trigger_no_rp_rejections(small_day):
    assert small_day.rp_rejections == 0
    assert small_day.proxy_rejections == 0


def test_deterministic_replay(small_cfg, small_day):
    again = run_day(small_cfg)
    np.testing.assert_array_equal(again.prices(), small_day.prices())
    np.testing.assert_array_equal(again.quantities(), small_day.quantities())


def test_thread_count_does_not_change_results(small_cfg, small_day):
    threaded = run_day(small_cfg.with_overrides(workers=3))
    np.testing.assert_array_equal(threaded.prices(), small_day.prices())


def test_each_session_starts_with_empty_ledger(small_cfg):
    cfg, streams, pop = _setup(small_cfg, None, None)
    log = SimulationLog(cfg.seed, 1, H)
    state = SimState(cfg, pop, streams, log, Horizon(1, H), np.full(H, 0.40), last_slot=SLOTS_PER_DAY)
    first = run_clock(state)
    for _ in range(3):
        run_scpa_cycle(state)
        assert state.clock is not first
        # one ledger entry per round of the new session only
        assert len(state.clock.ledger) == log.sessions[-1].iterations
        first = state.clock
    pop.shutdown()


def test_summary_totals_are_column_sums(small_day):
    s = summarize(small_day)
    rows, totals = s["slots"], s["totals"]
    assert totals["slots_cleared"] == len(rows) == SLOTS_PER_DAY
    assert totals["total_revenue"] == pytest.approx(sum(r["revenue"] for r in rows))
    assert totals["total_cost"] == pytest.approx(sum(r["cost"] for r in rows))
    assert totals["total_quantity_kwh"] == pytest.approx(sum(r["quantity_kwh"] for r in rows))


def test_summary_of_empty_log():
    s = summarize(SimulationLog(seed=0, days=1, horizon=H))
    assert s["slots"] == []
    assert s["totals"]["slots_cleared"] == 0
    assert s["totals"]["total_revenue"] == 0.0
    assert s["totals"]["mean_clock_iterations"] == 0.0


def test_tariff_must_partition_the_day():
    with pytest.raises(ValueError):
        TouTariff(((0, 20, 0.4), (24, 48, 0.4)))
    with pytest.raises(ValueError):
        TouTariff(((0, 30, 0.4), (20, 48, 0.4)))
    with pytest.raises(ValueError):
        TouTariff(((0, 48, -0.1),))


def test_default_tariff_levels():
    daily = DEFAULT_TOU.daily()
    assert set(np.round(daily, 3)) == {0.445, 0.460, 0.468}
    assert daily[0] == 0.445 and daily[12] == 0.460 and daily[35] == 0.468 and daily[47] == 0.445


def test_tou_accounting_identity(small_cfg):
    tou = run_tou_benchmark(small_cfg)
    assert tou.slots.size == SLOTS_PER_DAY
    np.testing.assert_allclose(tou.shortfall, tou.cost - tou.revenue)
    np.testing.assert_allclose(tou.deficit * tou.demand, tou.shortfall, atol=1e-9)
    assert tou.shortfall.sum() == pytest.approx(tou.cost.sum() - tou.revenue.sum())
    subtotal = sum(tou.subtotals.values())
    np.testing.assert_allclose(subtotal + tou.uncontrolled, tou.demand)
