import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scpa.agents.devices import (
    DeviceAgent,
    DeviceSpec,
    InterruptibleJob,
    ProgramJob,
    bid_device_milp,
    load_catalog,
    solve_interruptible_bnb,
    solve_jobs,
    solve_program,
)
from scpa.agents.logslot import LogPerSlotAgent, bid_log_per_slot, log_bids, log_value
from scpa.agents.population import Population, apply_agent_shocks, proxy_schedule, sample_portfolio
from scpa.agents.quad import QuadTotalAgent, bid_quad_total, waterfill, waterfill_rows
from scpa.checks import bid_device_check, bid_log_check, bid_quad_check
from scpa.config import default_scenario
from scpa.oracles import numeric_bid_oracle


# -- quad-total


def test_quad_buys_cheapest_slot_to_first_order_condition():
    agent = QuadTotalAgent(0.5, 0.1, [0, 0], [4, 4])
    np.testing.assert_allclose(bid_quad_total(agent, [0.40, 0.45]), [1.0, 0.0])


def test_quad_zero_when_prices_above_omega():
    agent = QuadTotalAgent(0.5, 0.1, [0, 0, 0], [4, 4, 4])
    np.testing.assert_allclose(bid_quad_total(agent, [0.5, 0.6, 0.9]), 0.0)


def test_quad_capped_cheap_slot_spills_only_if_worthwhile():
    agent = QuadTotalAgent(0.5, 0.1, [0, 0], [0.5, 4])
    bid = bid_quad_total(agent, [0.40, 0.45])
    np.testing.assert_allclose(bid, [0.5, 0.0])
    ref = numeric_bid_oracle(agent, [0.40, 0.45], step=0.01)
    assert np.max(np.abs(bid - ref)) <= 0.01 + 1e-12


def test_quad_spills_into_second_slot():
    agent = QuadTotalAgent(0.5, 0.1, [0, 0], [0.5, 4])
    np.testing.assert_allclose(bid_quad_total(agent, [0.20, 0.25]), [0.5, 2.0])


def test_quad_minimums_bought_first():
    agent = QuadTotalAgent(0.5, 0.1, [0.3, 0.2], [4, 4])
    np.testing.assert_allclose(bid_quad_total(agent, [0.9, 0.9]), [0.3, 0.2])


def test_quad_infeasible_bounds_rejected():
    with pytest.raises(ValueError):
        QuadTotalAgent(0.5, 0.1, [1.0], [0.5])
    with pytest.raises(ValueError):
        waterfill([0.4], 0.5, 0.1, [[1.0]], [[0.5]])


def test_waterfill_rows_matches_shared_prices():
    rng = np.random.default_rng(3)
    prices = rng.uniform(0.3, 0.6, 6)
    lower = rng.uniform(0, 0.1, (4, 6))
    upper = lower + rng.uniform(0.5, 3, (4, 6))
    omega, alpha = rng.uniform(0.45, 0.55, 4), rng.uniform(0.08, 0.12, 4)
    a = waterfill(prices, omega, alpha, lower, upper)
    b = waterfill_rows(np.tile(prices, (4, 1)), omega, alpha, lower, upper)
    np.testing.assert_allclose(a, b, atol=1e-12)


# -- log per slot


def test_log_capped_at_upper():
    agent = LogPerSlotAgent(3.0, [0], [4])
    np.testing.assert_allclose(bid_log_per_slot(agent, [0.45]), [4.0])


def test_log_interior():
    agent = LogPerSlotAgent(3.0, [0], [4])
    np.testing.assert_allclose(bid_log_per_slot(agent, [1.0]), [3.0])


def test_log_drops_out_at_high_price():
    agent = LogPerSlotAgent(3.0, [0], [4])
    assert bid_log_per_slot(agent, [10.0])[0] == 0.0


def test_log_switch_point_matches_grid():
    # with a slack cap the bidder leaves at p = alpha/e
    alpha = 3.0
    switch = alpha / np.e
    agent = LogPerSlotAgent(alpha, [0], [4])
    below, above = switch * 0.98, switch * 1.02
    assert bid_log_per_slot(agent, [below])[0] > 0
    assert bid_log_per_slot(agent, [above])[0] == 0
    for p in (below, above):
        ref = numeric_bid_oracle(agent, [p], step=0.001)
        assert abs(bid_log_per_slot(agent, [p])[0] - ref[0]) <= 0.001 + 1e-12


def test_log_zero_price_bids_upper():
    np.testing.assert_allclose(log_bids([0.0], 3.0, [0.0], [2.5]), [2.5])


def test_log_value_floor_at_zero():
    np.testing.assert_allclose(log_value([0.0, 0.5, 1.0], 3.0), [0.0, 0.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.1, 5.0),
    prices=st.lists(st.floats(0.0, 4.0), min_size=1, max_size=6),
    lo=st.floats(0.0, 1.0),
    width=st.floats(0.0, 3.0),
)
def test_log_bids_respect_bounds(alpha, prices, lo, width):
    n = len(prices)
    agent = LogPerSlotAgent(alpha, [lo] * n, [lo + width] * n)
    bid = bid_log_per_slot(agent, prices)
    assert np.all(bid >= lo - 1e-12) and np.all(bid <= lo + width + 1e-12)


@settings(max_examples=60, deadline=None)
@given(
    omega=st.floats(0.3, 0.7),
    alpha=st.floats(0.02, 0.3),
    prices=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6),
    lo=st.floats(0.0, 0.5),
    width=st.floats(0.0, 4.0),
)
def test_quad_bids_respect_bounds(omega, alpha, prices, lo, width):
    n = len(prices)
    agent = QuadTotalAgent(omega, alpha, [lo] * n, [lo + width] * n)
    bid = bid_quad_total(agent, prices)
    assert np.all(bid >= lo - 1e-12) and np.all(bid <= lo + width + 1e-12)


# -- devices


def _cheap_at(positions, horizon=12, base=0.5, dip=0.3):
    p = np.full(horizon, base)
    p[list(positions)] = dip
    return p


def test_program_moves_to_cheapest_pair():
    job = ProgramJob(np.array([1.0, 1.0]), earliest=2, latest=8, end=9)
    prices = _cheap_at([6, 7])
    assert solve_program(job, prices) == 6


def test_device_household_program_example():
    # window slots 3-10, cheapest prices in slots 7-8
    spec = DeviceSpec("p", "program", (2, 9), profile=(1.0, 1.0))
    agent = DeviceAgent([spec], np.zeros(1, dtype=int), np.zeros(48), {1: np.zeros(1, dtype=int)})
    bid = bid_device_milp(agent, _cheap_at([6, 7]), start_slot=1)
    expected = np.zeros(12)
    expected[[6, 7]] = 1.0
    np.testing.assert_allclose(bid, expected)


def test_interruptible_takes_cheapest_slots():
    prices = np.array([0.5, 0.2, 0.6, 0.1, 0.4, 0.3, 0.05, 0.05])
    job = InterruptibleJob(lo=0, hi=5, need=3, power=1.0)
    on = solve_interruptible_bnb(job, prices)
    assert sorted(np.nonzero(on)[0].tolist()) == [1, 3, 5]


def test_interruptible_min_up_forces_pairs():
    prices = np.array([0.1, 0.9, 0.1, 0.9, 0.1, 0.9])
    job = InterruptibleJob(lo=0, hi=5, need=2, power=1.0, min_up=2)
    on = solve_interruptible_bnb(job, prices)
    idx = np.nonzero(on)[0]
    assert idx.size == 2 and idx[1] == idx[0] + 1


def test_dryer_follows_washer():
    washer = ProgramJob(np.array([0.6, 0.4]), 0, 6, 7)
    dryer = ProgramJob(np.array([1.0, 1.0]), 0, 10, 11, after=0)
    prices = _cheap_at([0, 1])  # dryer would like the same cheap pair
    bid = solve_jobs([washer, dryer], [], prices)
    assert bid.sum() == pytest.approx(3.0)
    np.testing.assert_allclose(bid[:2], [0.6, 0.4])
    assert bid[2:4].sum() == pytest.approx(2.0)


def test_device_spec_validation():
    with pytest.raises(ValueError):
        DeviceSpec("x", "program", (0, 0), profile=(1.0, 1.0))
    with pytest.raises(ValueError):
        DeviceSpec("x", "interruptible", (0, 5), energy=0.0, power=1.0)
    with pytest.raises(ValueError):
        DeviceSpec("x", "teleport", (0, 5))


def test_catalog_loads_and_portfolios_keep_predecessors():
    catalog = load_catalog()
    rng = np.random.default_rng(0)
    for _ in range(200):
        names = [d.name for d in sample_portfolio(rng, catalog)]
        assert 3 <= len(names) <= 5
        if "dryer" in names:
            assert "washer" in names


def test_device_relocation_switch():
    # a one-slot job that can run now or next slot; next slot is fixed at 0.45
    job = ProgramJob(np.array([1.0]), 0, 1, 1)
    breakpoints = [0.43, 0.44, 0.45, 0.46, 0.47]
    now = [solve_jobs([job], [], [p, 0.45])[0] for p in breakpoints]
    assert now == [1.0, 1.0, 1.0, 0.0, 0.0]


# -- shocks and proxy schedules


def test_shock_scales_both_bounds():
    lo, up = apply_agent_shocks(1.0, 4.0, 0.5)
    assert (lo, up) == (0.5, 2.0)


def test_shock_caps_upper_bound():
    lo, up = apply_agent_shocks(1.0, 4.0, 2.0)
    assert (lo, up) == (2.0, 4.0)


@pytest.fixture(scope="module")
def small_session():
    cfg = default_scenario().with_overrides(agents={"quad_total": 30, "log_per_slot": 30, "device_milp": 0},
                                            horizon=6)
    pop = Population(cfg)
    return pop.session(1)


def test_proxy_schedules_monotone_for_quad_and_log(small_session):
    closing = np.full(6, 0.45)
    bps = np.linspace(0.40, 0.50, 5)
    sched = proxy_schedule(small_session, bps, closing)
    assert sched.shape == (60, 5)
    assert np.all(np.diff(sched, axis=1) <= 1e-12)


def test_log_schedule_is_separable(small_session):
    bps = np.linspace(0.40, 0.50, 5)
    a = proxy_schedule(small_session, bps, np.full(6, 0.45))[30:]
    b = proxy_schedule(small_session, bps, np.full(6, 0.60))[30:]
    np.testing.assert_allclose(a, b)


def test_session_bids_within_shocked_bounds(small_session):
    s = small_session
    bids = s.bid(np.full(6, 0.42))
    lo = np.vstack([s.q_lower, s.l_lower])
    up = np.vstack([s.q_upper, s.l_upper])
    assert np.all(bids >= lo - 1e-12) and np.all(bids <= up + 1e-12)


# -- randomised oracle comparisons


@pytest.mark.parametrize("check", [bid_quad_check, bid_log_check, bid_device_check])
def test_bid_solvers_match_oracle(check):
    result = check(instances=100, seed=11)
    assert result.passed, result.line()
