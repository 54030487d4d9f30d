"""Brute-force ground truth for tiny instances.

Nothing here is fast. These functions re-derive clearing prices, coalition
worths and best responses by scanning grids or enumerating schedules, and
are used to check the fast solvers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .agents.devices import DeviceAgent, InterruptibleJob, ProgramJob
from .agents.logslot import LogPerSlotAgent, log_value
from .agents.quad import QuadTotalAgent, quad_value
from .cost import CostModel


@dataclass(frozen=True)
class SlotValuation:
    """Single-slot valuation closure ``value(d)`` with quantity bounds."""

    value: Callable[[np.ndarray], np.ndarray]
    lower: float = 0.0
    upper: float = 4.0

    def grid(self, step: float) -> np.ndarray:
        n = max(int(round((self.upper - self.lower) / step)), 1)
        return np.linspace(self.lower, self.upper, n + 1)

    def best_response(self, prices, step: float = 1e-3) -> np.ndarray:
        """Grid argmax of ``value(d) - p*d`` for every price in ``prices``."""
        q = self.grid(step)
        v = np.asarray(self.value(q), dtype=float)
        p = np.atleast_1d(np.asarray(prices, dtype=float))
        surplus = v[None, :] - p[:, None] * q[None, :]
        return q[np.argmax(surplus, axis=1)]


def quad_valuation(omega: float, alpha: float, lower: float = 0.0, upper: float = 4.0) -> SlotValuation:
    return SlotValuation(lambda d: quad_value(d, omega, alpha), lower, upper)


def log_valuation(alpha: float, lower: float = 0.0, upper: float = 4.0) -> SlotValuation:
    return SlotValuation(lambda d: log_value(d, alpha), lower, upper)


def brute_force_mce_oracle(valuations, cost: CostModel, price_grid, uncontrolled: float = 0.0,
                           quantity_step: float = 1e-3) -> tuple[float, float]:
    """Scan ``price_grid`` for the price closest to average-cost clearing.

    Demand at each grid price is the sum of every agent's grid best
    response. Without any demand the first grid price and zero are returned.
    """
    grid = np.asarray(price_grid, dtype=float)
    demand = np.full(grid.shape, float(uncontrolled))
    for v in valuations:
        demand += v.best_response(grid, quantity_step)
    if not np.any(demand > 0):
        return float(grid[0]), 0.0
    gap = np.abs(cost.atc_or_zero(demand) - grid)
    j = int(np.argmin(gap))
    return float(grid[j]), float(demand[j])


def _best_by_total(valuations, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Max-plus convolution: best summed value for every grid total."""
    best = np.zeros(1)
    for v in valuations:
        hi = int(round(v.upper / step))
        lo = int(round(v.lower / step))
        own = np.full(hi + 1, -np.inf)
        own[lo:] = np.asarray(v.value(np.arange(lo, hi + 1) * step), dtype=float)
        nxt = np.full(best.size + own.size - 1, -np.inf)
        for k, val in enumerate(own):
            if np.isfinite(val):
                np.maximum(nxt[k:k + best.size], best + val, out=nxt[k:k + best.size])
        best = nxt
    return np.arange(best.size) * step, best


def coalition_worth(coalition, valuations, cost: CostModel, step: float = 0.01,
                    uncontrolled: float = 0.0) -> float:
    """Maximal joint surplus of a coalition on a quantity grid.

    Member 0 is the aggregator and users are numbered from 1, so
    ``valuations[i - 1]`` belongs to user ``i``. A coalition without the
    aggregator is worth nothing.
    """
    members = set(coalition)
    if 0 not in members:
        return 0.0
    users = [valuations[i - 1] for i in sorted(members - {0})]
    totals, values = _best_by_total(users, step)
    welfare = values - np.asarray(cost.total_cost(totals + uncontrolled), dtype=float)
    if uncontrolled:
        welfare = welfare + float(cost.total_cost(uncontrolled))
    return float(np.max(welfare))


def welfare_at_price(price: float, valuations, cost: CostModel, quantity_step: float = 1e-3,
                     uncontrolled: float = 0.0) -> float:
    """Joint surplus when every user buys its best response at ``price``.

    Supply cost is the increment over serving ``uncontrolled`` alone.
    """
    q = np.array([v.best_response([price], quantity_step)[0] for v in valuations])
    values = sum(float(v.value(np.array([x]))[0]) for v, x in zip(valuations, q))
    return values - float(cost.total_cost(q.sum() + uncontrolled)) + float(cost.total_cost(uncontrolled))


# ---------------------------------------------------------------------------
# bid oracle


def _axis_grid(lo: float, hi: float, step: float) -> np.ndarray:
    pts = np.arange(lo, hi + 1e-12, step)
    return np.unique(np.append(pts, hi))


def _oracle_log(agent: LogPerSlotAgent, prices, step):
    out = np.empty(len(prices))
    for h, p in enumerate(prices):
        q = _axis_grid(agent.lower[h], agent.upper[h], step)
        out[h] = q[np.argmax(log_value(q, agent.alpha) - p * q)]
    return out


def _oracle_quad(agent: QuadTotalAgent, prices, step, max_points):
    axes = [_axis_grid(lo, hi, step) for lo, hi in zip(agent.lower, agent.upper)]
    if np.prod([a.size for a in axes], dtype=float) > max_points:
        raise ValueError("grid too large for exhaustive search; use fewer slots or a coarser step")
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    obj = quad_value(mesh.sum(axis=1), agent.omega, agent.alpha) - mesh @ np.asarray(prices, dtype=float)
    return mesh[int(np.argmax(obj))]


def _min_up_ok(on, min_up: int, carry: int) -> bool:
    run = carry
    for x in on:
        if x:
            run += 1
        else:
            if 0 < run < min_up:
                return False
            run = 0
    return not 0 < run < min_up


def _enumerate_interruptible(job: InterruptibleJob, horizon: int):
    span = list(range(job.lo, job.hi + 1))
    for chosen in itertools.combinations(span, job.need):
        on = np.zeros(horizon, dtype=bool)
        on[list(chosen)] = True
        if _min_up_ok(on, job.min_up, job.carry):
            yield on


def _program_vector(job: ProgramJob, start: int, horizon: int) -> np.ndarray:
    out = np.zeros(horizon)
    for j, kwh in enumerate(job.profile):
        pos = start + j
        if 0 <= pos < horizon and pos <= job.end:
            out[pos] += kwh
    return out


def _oracle_devices(agent: DeviceAgent, prices, start_slot: int):
    prices = np.asarray(prices, dtype=float)
    H = prices.size
    programs, interrupts = agent.jobs(start_slot, H)
    prices = prices + agent.live_tiebreak(start_slot, H)
    bid = np.zeros(H)
    # programs: enumerate joint starts so precedence links are honoured
    if programs:
        ranges = [range(j.earliest, j.latest + 1) if j.feasible else [j.earliest] for j in programs]
        best, best_cost = None, np.inf
        for starts in itertools.product(*ranges):
            ok = all(j.after is None or s >= starts[j.after] + programs[j.after].length
                     for j, s in zip(programs, starts))
            if not ok:
                continue
            draw = sum(_program_vector(j, s, H) for j, s in zip(programs, starts))
            c = float(draw @ prices)
            if c < best_cost - 1e-12:
                best, best_cost = draw, c
        if best is None:
            best = sum(_program_vector(j, j.earliest, H) for j in programs)
        bid += best
    for job in interrupts:
        best, best_cost = None, np.inf
        for on in _enumerate_interruptible(job, H):
            c = float(prices[on].sum())
            if c < best_cost - 1e-12:
                best, best_cost = on, c
        if best is not None:
            bid += job.power * best
    return bid


def numeric_bid_oracle(agent, prices, step: float = 0.01, start_slot: int = 1,
                       max_points: int = 2_000_000) -> np.ndarray:
    """Exhaustive best response on a quantity grid (or schedule enumeration for devices)."""
    prices = np.asarray(prices, dtype=float)
    if isinstance(agent, LogPerSlotAgent):
        return _oracle_log(agent, prices, step)
    if isinstance(agent, QuadTotalAgent):
        return _oracle_quad(agent, prices, step, max_points)
    if isinstance(agent, DeviceAgent):
        return _oracle_devices(agent, prices, start_slot)
    raise TypeError(f"no oracle for {type(agent).__name__}")
