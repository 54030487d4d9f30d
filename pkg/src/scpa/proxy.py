"""Proxy phase: demand schedules over a price interval and the uniform clearing price.

For the next-closing slot the aggregator fixes every other slot at its
closing clock price, asks each bidder for its demand at a handful of
breakpoint prices, interpolates the aggregate linearly and intersects it
with average total cost. The intersection is the minimum competitive
equilibrium: revenue exactly covers cost.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .clock import BidLedger, PopulationLedger, check_rp_constraints
from .cost import CostModel

log = logging.getLogger(__name__)


class NoCrossingError(RuntimeError):
    """Average total cost does not meet the demand curve inside the interval."""

    def __init__(self, direction: str, interval):
        self.direction = direction
        self.interval = tuple(float(v) for v in interval)
        super().__init__(
            f"no ATC/demand crossing in [{self.interval[0]:.6f}, {self.interval[1]:.6f}]; "
            f"expand the breakpoint interval {'upward' if direction == 'up' else 'downward'}"
        )


def build_breakpoints(lo: float, hi: float, count: int = 5, min_half_width: float = 0.01) -> np.ndarray:
    """``count`` evenly spaced prices over ``[lo, hi]``.

    A degenerate interval (``lo == hi``) is widened symmetrically by
    ``max(min_half_width, 1% of the price)``, floored at zero.
    """
    if count < 2:
        raise ValueError("need at least two breakpoints")
    if hi < lo:
        raise ValueError(f"interval upper end {hi} below lower end {lo}")
    if hi == lo:
        w = max(min_half_width, 0.01 * hi)
        lo, hi = max(0.0, lo - w), hi + w
    return np.linspace(lo, hi, count)


def expand_interval(breakpoints, direction: str) -> tuple[float, float]:
    """Grow the interval by its own width on one side."""
    lo, hi = float(breakpoints[0]), float(breakpoints[-1])
    width = hi - lo
    if direction == "up":
        return lo, hi + width
    if direction == "down":
        return max(0.0, lo - width), hi
    raise ValueError(direction)


@dataclass(frozen=True)
class ScheduleViolation:
    index: int
    reason: str

    def __str__(self):
        return self.reason


def monotonize(schedules) -> tuple[np.ndarray, np.ndarray]:
    """Running minimum over increasing price; returns (repaired, changed-mask)."""
    s = np.atleast_2d(np.asarray(schedules, dtype=float))
    fixed = np.minimum.accumulate(s, axis=1)
    return fixed, np.any(fixed != s, axis=1)


def implied_bids(schedule, breakpoints, fixed_prices, other_quantities, slot: int = 0):
    """Full-horizon (prices, bid) pairs a schedule stands for.

    ``other_quantities`` is either one H vector (the last clock bid) or an
    L x H array of the bidder's complete bid at each breakpoint.
    """
    schedule = np.asarray(schedule, dtype=float)
    fixed_prices = np.asarray(fixed_prices, dtype=float)
    other = np.asarray(other_quantities, dtype=float)
    if other.ndim == 1:
        other = np.tile(other, (schedule.size, 1))
    prices = np.tile(fixed_prices, (schedule.size, 1))
    prices[:, slot] = breakpoints
    bids = other.copy()
    bids[:, slot] = schedule
    return prices, bids


def validate_demand_schedule(schedule, breakpoints, ledger: BidLedger | None = None,
                             fixed_prices=None, other_quantities=None, slot: int = 0,
                             tol: float = 1e-9, rule: str = "summed") -> ScheduleViolation | None:
    """``None`` if the schedule is weakly decreasing and activity-rule consistent."""
    schedule = np.asarray(schedule, dtype=float)
    breakpoints = np.asarray(breakpoints, dtype=float)
    if schedule.shape != breakpoints.shape:
        raise ValueError(f"schedule has {schedule.size} entries for {breakpoints.size} breakpoints")
    if np.any(schedule < 0):
        return ScheduleViolation(int(np.argmax(schedule < 0)), "negative quantity")
    rises = np.nonzero(np.diff(schedule) > tol)[0]
    if rises.size:
        i = int(rises[0]) + 1
        return ScheduleViolation(i, f"not downward sloping at index {i}")
    if ledger is None or not len(ledger):
        return None
    prices, bids = implied_bids(schedule, breakpoints, fixed_prices, other_quantities, slot)
    for i in range(schedule.size):
        bad = check_rp_constraints(ledger, bids[i], prices[i], tol, rule)
        if bad is not None:
            return ScheduleViolation(i, f"breakpoint {i}: {bad}")
    return None


def population_schedule_violations(ledger: PopulationLedger, breakpoints, fixed_prices,
                                   full_bids, slot: int = 0, tol: float = 1e-9,
                                   rule: str = "summed") -> np.ndarray:
    """Activity-rule check of every agent's L full bids; N boolean mask."""
    full_bids = np.asarray(full_bids, dtype=float)  # L x N x H
    bad = np.zeros(full_bids.shape[1], dtype=bool)
    if not len(ledger):
        return bad
    for i, price in enumerate(breakpoints):
        prices = np.array(fixed_prices, dtype=float)
        prices[slot] = price
        bad |= ledger.violations(prices, full_bids[i], tol, rule)
    return bad


@dataclass(frozen=True)
class AggregateDemandCurve:
    """Piecewise-linear aggregate demand through ``(prices[j], quantities[j])``."""

    prices: np.ndarray
    quantities: np.ndarray

    def __call__(self, p):
        return np.interp(p, self.prices, self.quantities)


def aggregate_demand(schedules, breakpoints, uncontrolled: float = 0.0) -> AggregateDemandCurve:
    schedules = np.asarray(schedules, dtype=float).reshape(-1, len(breakpoints))
    total = schedules.sum(axis=0) + float(uncontrolled)
    return AggregateDemandCurve(np.asarray(breakpoints, dtype=float), total)


def solve_mce(curve: AggregateDemandCurve, cost: CostModel, tol: float = 1e-9) -> tuple[float, float]:
    """Price where ATC meets the interpolated demand curve, and the quantity there.

    Segments are tried in increasing price order; with a linear ATC each
    segment is a 2 x 2 linear system, otherwise a bracketed root search.
    Raises :class:`NoCrossingError` when the interval misses the crossing.
    """
    P, D = curve.prices, curve.quantities
    if D[0] <= 0:
        return float(P[0]), 0.0
    gap = cost.atc_or_zero(D) - P  # decreasing in price
    if gap[-1] > tol:
        raise NoCrossingError("up", (P[0], P[-1]))
    if gap[0] < -tol:
        raise NoCrossingError("down", (P[0], P[-1]))
    j = int(np.argmax(gap <= 0))
    if j == 0 or gap[j] == 0:
        return float(P[j]), float(D[j])
    p0, p1, d0, d1 = P[j - 1], P[j], D[j - 1], D[j]
    slope = (d1 - d0) / (p1 - p0)
    c = cost.atc_slope
    if c is not None:
        p = (c * (d0 - slope * p0)) / (1.0 - c * slope)
    else:
        p = brentq(lambda q: cost.atc_or_zero(d0 + slope * (q - p0)) - q, p0, p1, xtol=tol * 1e-3)
    p = float(min(max(p, p0), p1))
    return p, float(d0 + slope * (p - p0))


def allocate(price: float, schedules, breakpoints) -> np.ndarray:
    """Each bidder's demand at ``price`` by interpolating its own schedule."""
    schedules = np.atleast_2d(np.asarray(schedules, dtype=float))
    bp = np.asarray(breakpoints, dtype=float)
    j = int(np.clip(np.searchsorted(bp, price, side="right") - 1, 0, bp.size - 2))
    w = (price - bp[j]) / (bp[j + 1] - bp[j])
    w = min(max(w, 0.0), 1.0)
    return (1.0 - w) * schedules[:, j] + w * schedules[:, j + 1]


@dataclass
class ClearingResult:
    slot: int
    price: float
    quantity: float
    allocations: np.ndarray
    revenue: float
    cost: float
    uncontrolled: float = 0.0
    breakpoints: np.ndarray | None = None
    expansions: int = 0
    subtotals: dict = field(default_factory=dict)

    @property
    def profit(self) -> float:
        return self.revenue - self.cost


@dataclass(frozen=True)
class ProxyParams:
    breakpoints: int = 5
    min_half_width: float = 0.01
    max_expansions: int = 6
    tolerance: float = 1e-9
    rp_tolerance: float = 1e-9
    rp_rule: str = "summed"


@dataclass
class ProxyOutcome:
    result: ClearingResult
    schedules: np.ndarray
    rejected: np.ndarray
    monotonized: np.ndarray


def run_proxy(slot: int, interval: tuple[float, float], query: Callable[[np.ndarray], np.ndarray],
              cost: CostModel, uncontrolled: float, closing_prices, ledger: PopulationLedger | None = None,
              fallback=None, params: ProxyParams = ProxyParams(), slot_pos: int = 0) -> ProxyOutcome:
    """Clear one slot.

    ``query(breakpoints)`` returns the L x N x H full bids of every agent with
    the clearing slot priced at each breakpoint and the rest at
    ``closing_prices``. Schedules failing the activity rule are replaced by
    the constant ``fallback`` quantity (the agent's last clock bid for the
    slot). Non-monotone schedules are repaired by a running minimum.
    """
    bp = build_breakpoints(interval[0], interval[1], params.breakpoints, params.min_half_width)
    expansions = 0
    while True:
        full = np.asarray(query(bp), dtype=float)
        schedules = full[:, :, slot_pos].T.copy()  # N x L
        if ledger is not None and len(ledger):
            rejected = population_schedule_violations(ledger, bp, closing_prices, full, slot_pos,
                                                      params.rp_tolerance, params.rp_rule)
        else:
            rejected = np.zeros(schedules.shape[0], dtype=bool)
        if rejected.any():
            log.warning("slot %d: %d proxy schedules rejected by the activity rule", slot, int(rejected.sum()))
            schedules[rejected] = np.asarray(fallback, dtype=float)[rejected, None]
        schedules, changed = monotonize(schedules)
        if changed.any():
            log.info("slot %d: monotonized %d schedules", slot, int(changed.sum()))
        curve = aggregate_demand(schedules, bp, uncontrolled)
        try:
            price, quantity = solve_mce(curve, cost, params.tolerance)
            break
        except NoCrossingError as exc:
            if expansions >= params.max_expansions:
                raise
            expansions += 1
            log.info("slot %d: %s (expansion %d)", slot, exc, expansions)
            bp = np.linspace(*expand_interval(bp, exc.direction), params.breakpoints)
    alloc = allocate(price, schedules, bp)
    result = ClearingResult(
        slot=slot,
        price=price,
        quantity=quantity,
        allocations=alloc,
        revenue=price * quantity,
        cost=float(cost.total_cost(quantity)),
        uncontrolled=float(uncontrolled),
        breakpoints=bp,
        expansions=expansions,
    )
    return ProxyOutcome(result, schedules, rejected, changed)
