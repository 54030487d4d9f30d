"""Rolling-horizon driver: clock sessions, staggered proxy closes and restarts.

A day starts with one clock session over the first H slots. Each cycle then
clears the slot at the front of the horizon through the proxy, fixes the
device decisions for that slot, moves the horizon one slot forward and runs
the next clock session from discounted closing prices.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .agents.population import GROUPS, Population, Session
from .clock import ClockParams, ClockState, last_distinct_prices, restart_prices, run_clock_session
from .config import ScenarioConfig
from .core import SLOTS_PER_DAY, Horizon, RngStreams, advance_horizon, day_of_slot, slot_of_day
from .cost import CostModel
from .proxy import ClearingResult, ProxyParams, run_proxy

log = logging.getLogger(__name__)


@dataclass
class SessionRecord:
    session: int
    start_slot: int
    prices: np.ndarray  # k x H, price announced at each iteration
    demand: np.ndarray  # k x H
    deficits: np.ndarray  # k x H
    forced: bool
    rejected: int
    closing_subtotals: dict = field(default_factory=dict)  # group -> demand per slot at the close

    @property
    def iterations(self) -> int:
        return self.prices.shape[0]

    @property
    def slots(self) -> np.ndarray:
        return np.arange(self.start_slot, self.start_slot + self.prices.shape[1])


@dataclass
class SimulationLog:
    seed: int
    days: int
    horizon: int
    sessions: list = field(default_factory=list)
    clearings: list = field(default_factory=list)
    closing_prices: list = field(default_factory=list)
    shocks: list = field(default_factory=list)
    monotonized: int = 0
    proxy_rejections: int = 0
    infeasible_devices: int = 0
    bid_seconds: float = 0.0
    bid_agent_calls: int = 0
    wall_seconds: float = 0.0

    @property
    def forced_close_count(self) -> int:
        return sum(s.forced for s in self.sessions)

    @property
    def rp_rejections(self) -> int:
        return sum(s.rejected for s in self.sessions)

    @property
    def mean_iterations(self) -> float:
        return float(np.mean([s.iterations for s in self.sessions])) if self.sessions else 0.0

    @property
    def mean_bid_seconds(self) -> float:
        """Wall time of one agent's straightforward bid, averaged."""
        return self.bid_seconds / self.bid_agent_calls if self.bid_agent_calls else 0.0

    def prices(self) -> np.ndarray:
        return np.array([c.price for c in self.clearings])

    def quantities(self) -> np.ndarray:
        return np.array([c.quantity for c in self.clearings])


@dataclass
class SimState:
    cfg: ScenarioConfig
    pop: Population
    streams: RngStreams
    log: SimulationLog
    horizon: Horizon
    opening: np.ndarray
    last_slot: int
    clock: ClockState | None = None
    session: Session | None = None
    cost: CostModel | None = None
    uncontrolled: np.ndarray | None = None


def slot_shocks(cfg: ScenarioConfig, streams: RngStreams, slot: int) -> tuple[float, float]:
    """Realised (cost multiplier, uncontrolled-load multiplier) of ``slot``."""
    if not cfg.shocks.enabled:
        return 1.0, 1.0
    cost = float(np.exp(cfg.shocks.cost_log_sd * streams.stream("cost-shock", slot).standard_normal()))
    load = 1.0 + cfg.shocks.uncontrolled_cv * float(streams.stream("uncontrolled", slot).standard_normal())
    return cost, max(load, 0.0)


def session_environment(cfg: ScenarioConfig, streams: RngStreams, horizon: Horizon, shock_all: bool = False):
    """Cost model and uncontrolled load over the live slots.

    Only the first slot carries its realised shocks unless ``shock_all``.
    """
    profile = np.asarray(cfg.uncontrolled_profile(), dtype=float)
    load = profile[horizon.slot_of_day()].copy()
    shock = np.ones(horizon.length)
    count = horizon.length if shock_all else 1
    for i in range(count):
        c, u = slot_shocks(cfg, streams, horizon.start_slot + i)
        shock[i] = c
        load[i] *= u
    return CostModel(cfg.cost_a, shock), load


def clock_params(cfg: ScenarioConfig) -> ClockParams:
    c = cfg.clock
    return ClockParams(max_step=c.max_step, min_step=c.min_step, max_iterations=c.max_iterations,
                       tolerance=c.tolerance, rp_rule=c.rp_rule)


def proxy_params(cfg: ScenarioConfig) -> ProxyParams:
    p = cfg.proxy
    return ProxyParams(breakpoints=p.breakpoints, min_half_width=max(p.min_half_width, cfg.clock.max_step),
                       max_expansions=p.max_expansions, rp_rule=cfg.clock.rp_rule)


def _timed_bidder(state: SimState):
    session, n = state.session, state.pop.n

    def bid(prices):
        t0 = time.perf_counter()
        out = session.bid(prices)
        state.log.bid_seconds += time.perf_counter() - t0
        state.log.bid_agent_calls += n
        return out

    return bid


def run_clock(state: SimState) -> ClockState:
    """One clock session over the current horizon from ``state.opening``."""
    cfg, h = state.cfg, state.horizon
    state.session = state.pop.session(h.start_slot, h.length)
    state.cost, state.uncontrolled = session_environment(cfg, state.streams, h)
    state.clock = run_clock_session(state.opening, _timed_bidder(state), state.cost, state.uncontrolled,
                                    state.pop.n, clock_params(cfg))
    ck = state.clock
    last = ck.ledger.last_bids
    groups = {g: last[sl].sum(axis=0) for g, sl in state.pop.slices.items()} if last is not None else {}
    state.log.sessions.append(SessionRecord(
        session=len(state.log.sessions) + 1,
        start_slot=h.start_slot,
        prices=ck.price_matrix,
        demand=np.array(ck.history_demand),
        deficits=ck.deficit_matrix,
        forced=ck.forced,
        rejected=ck.rejected,
        closing_subtotals=groups,
    ))
    state.log.closing_prices.append(ck.prices.copy())
    return ck


def clear_front_slot(state: SimState) -> ClearingResult:
    """Proxy phase for the first live slot, then commit device decisions."""
    cfg, ck, h = state.cfg, state.clock, state.horizon
    slot = h.start_slot
    closing = ck.prices.copy()
    interval = last_distinct_prices(ck.price_matrix, 0)
    cost_t = CostModel(cfg.cost_a, float(np.atleast_1d(state.cost.shock)[0]))
    fallback = ck.ledger.last_bids[:, 0] if ck.ledger.last_bids is not None else np.zeros(state.pop.n)
    t0 = time.perf_counter()
    out = run_proxy(slot, interval, state.session.proxy_query(closing), cost_t, float(state.uncontrolled[0]),
                    closing, ck.ledger, fallback, proxy_params(cfg))
    calls = out.result.breakpoints.size * (out.result.expansions + 1)
    state.log.bid_seconds += time.perf_counter() - t0
    state.log.bid_agent_calls += calls * state.pop.n
    res = out.result
    res.subtotals = state.pop.subtotals(res.allocations)
    state.log.monotonized += int(out.monotonized.sum())
    state.log.proxy_rejections += int(out.rejected.sum())
    final = closing.copy()
    final[0] = res.price
    state.session.commit(final)
    c, u = slot_shocks(cfg, state.streams, slot)
    state.log.shocks.append({"slot": slot, "cost": c, "uncontrolled": u})
    state.log.clearings.append(res)
    return res


def run_scpa_cycle(state: SimState) -> SimState:
    """Clear slot t, reset ledgers, roll the horizon and run the next clock session.

    The session ledger lives in the clock state, so opening a new session
    starts every agent with an empty ledger.
    """
    clear_front_slot(state)
    closing = state.clock.prices
    state.horizon = advance_horizon(state.horizon)
    state.opening = restart_prices(closing, state.cfg.clock.discount, state.cfg.clock.initial_price)
    if state.horizon.start_slot <= state.last_slot:
        run_clock(state)
    return state


def _setup(cfg: ScenarioConfig, seed: int | None, days: int | None):
    if seed is not None:
        cfg = cfg.with_overrides(seed=int(seed))
    if days is not None:
        cfg = cfg.with_overrides(days=int(days))
    streams = RngStreams(cfg.seed)
    pop = Population(cfg, streams)
    return cfg, streams, pop


def run_day(cfg: ScenarioConfig, seed: int | None = None, days: int | None = None,
            on_clearing=None) -> SimulationLog:
    """Bootstrap session over slots 1..H, then one cycle per slot of every day."""
    cfg, streams, pop = _setup(cfg, seed, days)
    t0 = time.perf_counter()
    horizon = Horizon(start_slot=1, length=cfg.horizon, slot_duration=cfg.slot_duration)
    log_ = SimulationLog(seed=cfg.seed, days=cfg.days, horizon=cfg.horizon)
    state = SimState(cfg, pop, streams, log_, horizon, np.full(cfg.horizon, cfg.clock.initial_price),
                     last_slot=cfg.days * SLOTS_PER_DAY)
    try:
        run_clock(state)
        while state.horizon.start_slot <= state.last_slot:
            run_scpa_cycle(state)
            if on_clearing is not None:
                on_clearing(log_.clearings[-1])
    finally:
        pop.shutdown()
    log_.infeasible_devices = sum(a.infeasible for a in pop.device_agents)
    log_.wall_seconds = time.perf_counter() - t0
    return log_


# ---------------------------------------------------------------------------
# time-of-use benchmark


@dataclass(frozen=True)
class TouTariff:
    """Fixed prices on slot-of-day windows ``[start, end)`` that cover the day once."""

    windows: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        cover = np.zeros(SLOTS_PER_DAY, dtype=int)
        for start, end, price in self.windows:
            if not (0 <= start < end <= SLOTS_PER_DAY):
                raise ValueError(f"bad tariff window [{start}, {end})")
            if price < 0:
                raise ValueError("tariff prices must be >= 0")
            cover[start:end] += 1
        if np.any(cover != 1):
            raise ValueError("tariff windows must partition the 48 slots of a day")

    def daily(self) -> np.ndarray:
        out = np.empty(SLOTS_PER_DAY)
        for start, end, price in self.windows:
            out[start:end] = price
        return out

    def prices(self, slots) -> np.ndarray:
        return self.daily()[slot_of_day(np.asarray(slots))]

    @classmethod
    def constant(cls, price: float) -> "TouTariff":
        return cls(((0, SLOTS_PER_DAY, float(price)),))


# 22:00-06:00 low, 06:00-16:30 and 20:00-22:00 mid, 16:30-20:00 high
DEFAULT_TOU = TouTariff(((0, 12, 0.445), (12, 33, 0.460), (33, 40, 0.468), (40, 44, 0.460), (44, 48, 0.445)))


@dataclass
class TouResult:
    slots: np.ndarray
    prices: np.ndarray
    demand: np.ndarray
    uncontrolled: np.ndarray
    revenue: np.ndarray
    cost: np.ndarray
    subtotals: dict

    @property
    def deficit(self) -> np.ndarray:
        """Per-unit revenue deficit ATC - p."""
        return np.where(self.demand > 0, self.cost / np.where(self.demand > 0, self.demand, 1.0) - self.prices, 0.0)

    @property
    def shortfall(self) -> np.ndarray:
        """Cost minus revenue per slot (currency)."""
        return self.cost - self.revenue


def run_tou_benchmark(cfg: ScenarioConfig, tariff: TouTariff = DEFAULT_TOU, seed: int | None = None,
                      days: int | None = None) -> TouResult:
    """One-shot best responses to a fixed tariff, costed at realised shocks.

    Quad-total and log agents respond to each day's tariff over that day;
    device households see the whole run at once, which for cost-minimising
    devices is the same as answering every device instance separately.
    """
    cfg, streams, pop = _setup(cfg, seed, days)
    n_slots = cfg.days * SLOTS_PER_DAY
    slots = np.arange(1, n_slots + 1)
    prices = tariff.prices(slots)
    demand = np.zeros((pop.n, n_slots))
    try:
        for d in range(cfg.days):
            s0 = d * SLOTS_PER_DAY + 1
            sess = pop.session(s0, SLOTS_PER_DAY, shock_all=True)
            p = prices[d * SLOTS_PER_DAY:(d + 1) * SLOTS_PER_DAY]
            demand[pop.slices["quad_total"], s0 - 1:s0 - 1 + SLOTS_PER_DAY] = sess.bid_quad(p)
            demand[pop.slices["log_per_slot"], s0 - 1:s0 - 1 + SLOTS_PER_DAY] = sess.bid_log(p)
        span = n_slots + SLOTS_PER_DAY
        whole = pop.session(1, span, shock_all=False)
        demand[pop.slices["device_milp"]] = whole.bid_devices(tariff.prices(np.arange(1, span + 1)))[:, :n_slots]
    finally:
        pop.shutdown()
    h = Horizon(1, n_slots)
    cost_model, load = session_environment(cfg, streams, h, shock_all=True)
    x = demand.sum(axis=0) + load
    return TouResult(slots=slots, prices=prices, demand=x, uncontrolled=load, revenue=prices * x,
                     cost=np.asarray(cost_model.total_cost(x)),
                     subtotals={g: demand[pop.slices[g]].sum(axis=0) for g in GROUPS})


# ---------------------------------------------------------------------------
# summaries


def summarize(log_: SimulationLog) -> dict:
    """Per-slot table plus daily totals and run statistics."""
    rows = [{
        "day": day_of_slot(c.slot),
        "slot": c.slot,
        "price": c.price,
        "quantity_kwh": c.quantity,
        "revenue": c.revenue,
        "cost": c.cost,
        "profit": c.profit,
    } for c in log_.clearings]
    prices = log_.prices()
    qty = log_.quantities()
    corr = float(np.corrcoef(prices, qty)[0, 1]) if len(rows) > 2 and prices.std() > 0 and qty.std() > 0 else 0.0
    totals = {
        "slots_cleared": len(rows),
        "total_quantity_kwh": float(qty.sum()) if rows else 0.0,
        "total_revenue": float(sum(r["revenue"] for r in rows)),
        "total_cost": float(sum(r["cost"] for r in rows)),
        "total_profit": float(sum(r["profit"] for r in rows)),
        "mean_price": float(prices.mean()) if rows else 0.0,
        "price_quantity_correlation": corr,
        "sessions": len(log_.sessions),
        "mean_clock_iterations": log_.mean_iterations,
        "max_clock_iterations": max((s.iterations for s in log_.sessions), default=0),
        "forced_close_count": log_.forced_close_count,
        "rp_rejections": log_.rp_rejections,
        "proxy_rejections": log_.proxy_rejections,
        "monotonization_count": log_.monotonized,
        "infeasible_devices": log_.infeasible_devices,
    }
    return {"slots": rows, "totals": totals,
            "timing": {"wall_seconds": log_.wall_seconds, "mean_bid_seconds_per_agent": log_.mean_bid_seconds}}
