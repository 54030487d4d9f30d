import numpy as np
import pytest
from hypothesis import given, strategies as st

from scpa.core import Horizon, RngStreams, advance_horizon, as_demand_bid, as_price_vector, day_of_slot, slot_label, slot_of_day
from scpa.cost import CostModel, PowerCost, apply_cost_shock, draw_cost_shock


def test_advance_moves_start_and_keeps_length():
    assert advance_horizon(Horizon(1, 48)) == Horizon(2, 48)
    assert advance_horizon(Horizon(48, 48)).start_slot == 49


def test_advance_h_times():
    h = Horizon(5, 48)
    for _ in range(48):
        h = advance_horizon(h)
    assert h.start_slot == 53 and h.length == 48


def test_horizon_rejects_empty():
    with pytest.raises(ValueError):
        Horizon(1, 0)


def test_slot_of_day_and_day():
    assert slot_of_day(1) == 0
    assert slot_of_day(48) == 47
    assert slot_of_day(49) == 0
    assert day_of_slot(48) == 1 and day_of_slot(49) == 2
    assert slot_label(42) == "21:00"


def test_horizon_position():
    h = Horizon(10, 4)
    assert h.position(12) == 2
    with pytest.raises(IndexError):
        h.position(14)


def test_vector_validation():
    assert as_price_vector([0.4, 0.5]).dtype == float
    with pytest.raises(ValueError):
        as_demand_bid([1.0, -0.1])
    with pytest.raises(ValueError):
        as_price_vector([[0.4]])
    with pytest.raises(ValueError):
        as_price_vector([np.nan])


def test_streams_are_order_independent():
    a = RngStreams(3)
    first = a.stream("x", 1).random(3)
    a.stream("y", 2).random(100)
    assert np.array_equal(first, RngStreams(3).stream("x", 1).random(3))
    assert not np.array_equal(first, RngStreams(3).stream("x", 2).random(3))
    assert not np.array_equal(first, RngStreams(4).stream("x", 1).random(3))


# cost


def test_total_cost_values():
    c = CostModel(0.002)
    assert c.total_cost(100) == pytest.approx(20.0)
    assert c.total_cost(0) == 0.0
    assert c.total_cost(185.5) == pytest.approx(68.8205)


def test_atc_values():
    c = CostModel(0.002)
    assert c.average_total_cost(100) == pytest.approx(0.2)
    assert c.average_total_cost(185.5) == pytest.approx(0.371)
    with pytest.raises(ValueError):
        c.average_total_cost(0)


def test_revenue_deficit_values():
    c = CostModel(0.002)
    assert c.revenue_deficit(0.15, 100) == pytest.approx(0.05)
    assert c.revenue_deficit(0.2, 100) == pytest.approx(0.0)
    assert c.revenue_deficit(0.7, 0) == 0.0


@given(st.floats(1e-3, 1e4), st.floats(1e-4, 1.0))
def test_atc_price_gives_zero_profit(x, a):
    c = CostModel(a)
    p = c.average_total_cost(x)
    assert abs(p * x - c.total_cost(x)) <= 1e-9 * max(1.0, c.total_cost(x))


def test_cost_rejects_bad_inputs():
    with pytest.raises(ValueError):
        CostModel(0.0)
    with pytest.raises(ValueError):
        CostModel(0.002).total_cost(-1.0)


def test_shock_scales_cost_per_slot():
    c = CostModel(0.002).with_shock([1.0, 2.0])
    np.testing.assert_allclose(c.total_cost(np.array([10.0, 10.0])), [0.2, 0.4])


def test_shock_median_and_mean():
    rng = np.random.default_rng(0)
    draws = rng.lognormal(0.0, 0.05, 100_000)
    assert 0.999 <= draws.mean() <= 1.004
    assert abs(np.median(draws) - 1.0) < 2e-3
    assert draw_cost_shock(np.random.default_rng(5)) == draw_cost_shock(np.random.default_rng(5))


def test_apply_cost_shock_keeps_base():
    c = apply_cost_shock(CostModel(0.002), np.random.default_rng(1))
    assert c.a == 0.002 and c.shock != 1.0


def test_power_cost_is_monotone_and_nonlinear():
    c = PowerCost(0.001, exponent=3.0)
    assert c.atc_slope is None
    x = np.linspace(1, 100, 50)
    assert np.all(np.diff(c.atc_or_zero(x)) > 0)
    with pytest.raises(ValueError):
        PowerCost(0.001, exponent=0.5)
