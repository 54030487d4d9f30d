import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scpa.clock import BidLedger, PopulationLedger
from scpa.cost import CostModel, PowerCost
from scpa.proxy import (
    NoCrossingError,
    ProxyParams,
    aggregate_demand,
    allocate,
    build_breakpoints,
    expand_interval,
    monotonize,
    run_proxy,
    solve_mce,
    validate_demand_schedule,
)


def test_breakpoints_even_spacing():
    np.testing.assert_allclose(build_breakpoints(0.44, 0.45, 5), [0.44, 0.4425, 0.445, 0.4475, 0.45])
    np.testing.assert_allclose(build_breakpoints(0.44, 0.45, 2), [0.44, 0.45])


def test_degenerate_interval_widened():
    bp = build_breakpoints(0.45, 0.45, 5, min_half_width=0.01)
    assert bp[0] == pytest.approx(0.44) and bp[-1] == pytest.approx(0.46)
    assert build_breakpoints(0.0, 0.0, 3)[0] == 0.0


def test_breakpoints_reject_bad_input():
    with pytest.raises(ValueError):
        build_breakpoints(0.4, 0.5, 1)
    with pytest.raises(ValueError):
        build_breakpoints(0.5, 0.4)


def test_expand_interval():
    bp = np.linspace(0.40, 0.41, 5)
    assert expand_interval(bp, "up") == pytest.approx((0.40, 0.42))
    assert expand_interval(bp, "down") == pytest.approx((0.39, 0.41))
    assert expand_interval(np.array([0.0, 0.01]), "down")[0] == 0.0


def test_schedule_validation():
    bp = np.linspace(0.4, 0.44, 5)
    assert validate_demand_schedule([3, 3, 3, 3, 3], bp) is None
    assert validate_demand_schedule([4, 3, 3, 2, 0], bp) is None
    bad = validate_demand_schedule([2, 3, 3, 2, 0], bp)
    assert str(bad) == "not downward sloping at index 1"
    with pytest.raises(ValueError):
        validate_demand_schedule([1, 2], bp)


def test_schedule_validation_checks_activity_rule():
    led = BidLedger()
    led.append([0.40, 0.40], [0.0, 4.0])
    bp = np.linspace(0.40, 0.44, 5)
    # moving demand into slot 0 as its price rises, slot 1 unchanged
    bad = validate_demand_schedule([4, 4, 4, 4, 4], bp, led, [0.40, 0.40], [0.0, 0.0], slot=0)
    assert bad is not None and bad.index == 1
    # the same move is consistent when slot 1 became dearer still
    assert validate_demand_schedule([4, 4, 4, 4, 4], bp, led, [0.40, 0.45], [0.0, 0.0], slot=0) is None


def test_monotonize_running_min():
    fixed, changed = monotonize([[3, 4, 2, 2, 3], [4, 3, 2, 1, 0]])
    np.testing.assert_allclose(fixed[0], [3, 3, 2, 2, 2])
    assert changed.tolist() == [True, False]


def test_aggregate_demand():
    bp = [0.4, 0.5]
    curve = aggregate_demand([[2, 1], [3, 3]], bp)
    np.testing.assert_allclose(curve.quantities, [5, 4])
    np.testing.assert_allclose(aggregate_demand(np.zeros((0, 2)), bp, 10.0).quantities, [10, 10])


@given(st.integers(1, 6), st.integers(0, 1000))
def test_sum_of_decreasing_is_decreasing(n, seed):
    rng = np.random.default_rng(seed)
    s = -np.sort(-rng.uniform(0, 4, (n, 5)), axis=1)
    q = aggregate_demand(s, np.linspace(0.4, 0.5, 5)).quantities
    assert np.all(np.diff(q) <= 1e-12)


def test_solve_constant_demand():
    curve = aggregate_demand([[200.0] * 5], np.linspace(0.38, 0.42, 5))
    p, x = solve_mce(curve, CostModel(0.002))
    assert p == pytest.approx(0.4) and x == pytest.approx(200.0)


def test_solve_segment_by_hand():
    curve = aggregate_demand([[250.0, 150.0]], [0.40, 0.45])
    p, x = solve_mce(curve, CostModel(0.002))
    # x = 250 - 2000 (p - 0.40) and p = 0.002 x  =>  p = 0.4 * 1.5 / 5 ... solved exactly:
    x_hand = (250 + 2000 * 0.40) / (1 + 2000 * 0.002)
    assert x == pytest.approx(x_hand) and p == pytest.approx(0.002 * x_hand)
    assert 0.40 <= p <= 0.45
    assert abs(p * x - CostModel(0.002).total_cost(x)) <= 1e-9 * x


def test_solve_nonlinear_atc():
    cost = PowerCost(1e-4, exponent=3.0)
    curve = aggregate_demand([[80.0, 40.0]], [0.0, 1.0])
    p, x = solve_mce(curve, cost)
    assert cost.atc_or_zero(x) == pytest.approx(p, abs=1e-8)


def test_solve_no_crossing():
    curve = aggregate_demand([[400.0, 390.0]], [0.40, 0.41])
    with pytest.raises(NoCrossingError) as err:
        solve_mce(curve, CostModel(0.002))
    assert err.value.direction == "up" and "expand" in str(err.value)
    curve = aggregate_demand([[10.0, 9.0]], [0.40, 0.41])
    with pytest.raises(NoCrossingError) as err:
        solve_mce(curve, CostModel(0.002))
    assert err.value.direction == "down"


def test_solve_zero_demand():
    curve = aggregate_demand([[0.0, 0.0]], [0.40, 0.41])
    assert solve_mce(curve, CostModel(0.002)) == (0.40, 0.0)


def test_allocate_interpolates():
    bp = np.array([0.40, 0.42, 0.44])
    sched = np.array([[4.0, 2.0, 0.0], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(allocate(0.42, sched, bp), [2.0, 0.0])
    np.testing.assert_allclose(allocate(0.43, sched, bp), [1.0, 0.0])
    assert allocate(0.41, [[4.0, 2.0, 0.0]], bp)[0] == pytest.approx(3.0)


def test_run_proxy_zero_profit_and_feasibility():
    n = 4
    query = lambda bp: np.stack([np.full((n, 1), 60.0 - 50 * p) for p in bp])  # noqa: E731
    out = run_proxy(1, (0.35, 0.36), query, CostModel(0.002), 10.0, np.array([0.36]))
    r = out.result
    assert abs(r.revenue - r.cost) <= 1e-6 * max(1.0, r.quantity)
    assert r.allocations.sum() + r.uncontrolled == pytest.approx(r.quantity)
    assert r.expansions == 0


def test_run_proxy_expands_both_ways():
    n = 2
    query = lambda bp: np.stack([np.full((n, 1), 100.0 - 100 * p) for p in bp])  # noqa: E731
    # crossing near 0.36: far below the interval
    out = run_proxy(1, (0.45, 0.46), query, CostModel(0.002), 0.0, np.array([0.46]),
                    params=ProxyParams(max_expansions=8))
    assert out.result.expansions > 0 and out.result.price < 0.45
    with pytest.raises(NoCrossingError):
        run_proxy(1, (0.45, 0.46), query, CostModel(0.002), 0.0, np.array([0.46]),
                  params=ProxyParams(max_expansions=0))


def test_run_proxy_rejects_inconsistent_schedules():
    led = PopulationLedger(1, 2)
    led.append([0.40, 0.40], [[0.0, 4.0]])
    led.append([0.41, 0.40], [[0.0, 4.0]])

    def query(bp):
        # at every breakpoint the agent claims slot 0, whose price went up, and abandons slot 1
        return np.stack([np.array([[4.0, 0.0]]) for _ in bp])

    out = run_proxy(1, (0.41, 0.42), query, CostModel(0.002), 200.0, np.array([0.42, 0.40]), led,
                    fallback=np.array([0.0]), params=ProxyParams(max_expansions=10))
    assert out.rejected.tolist() == [True]
    np.testing.assert_allclose(out.schedules, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_zero_profit_property(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.001, 0.01)
    n = int(rng.integers(1, 20))
    base = rng.uniform(1, 30, n)
    slope = rng.uniform(0, 40, n)
    lo = rng.uniform(0.1, 0.6)
    query = lambda bp: np.stack([np.maximum(base - slope * (p - lo), 0)[:, None] for p in bp])  # noqa: E731
    out = run_proxy(1, (lo, lo + 0.01), query, CostModel(a), rng.uniform(0, 50), np.array([lo]),
                    params=ProxyParams(max_expansions=40))
    r = out.result
    assert abs(r.revenue - r.cost) <= 1e-6 * max(1.0, r.quantity)
    assert r.allocations.sum() + r.uncontrolled == pytest.approx(r.quantity, abs=1e-9)
