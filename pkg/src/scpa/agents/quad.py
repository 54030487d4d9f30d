"""Quadratic/linear value of total energy over the horizon.

``v(d) = omega*d - alpha/2*d**2`` up to the satiation point ``omega/alpha``,
flat afterwards, where ``d`` is the agent's total use across live slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QuadTotalAgent:
    omega: float
    alpha: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if np.any(self.lower > self.upper) or np.any(self.lower < 0):
            raise ValueError("per-slot bounds must satisfy 0 <= lower <= upper")

    def value(self, bid) -> float:
        return float(quad_value(np.sum(bid), self.omega, self.alpha))


def quad_value(total, omega, alpha):
    total = np.asarray(total, dtype=float)
    sat = omega / alpha
    return np.where(total < sat, omega * total - 0.5 * alpha * total**2, omega**2 / (2 * alpha))


def waterfill(prices, omega, alpha, lower, upper, atol: float = 1e-12) -> np.ndarray:
    """Straightforward bids of N quad-total agents, shape N x H.

    Minimums are bought first; further energy goes to the cheapest slots
    while the marginal value ``omega - alpha*d`` exceeds the slot price.
    Slots tied on price share the purchase in proportion to their headroom.
    """
    prices = np.asarray(prices, dtype=float)
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any(lower > upper + atol):
        raise ValueError("infeasible bounds: lower > upper")
    bids = lower.copy()
    total = bids.sum(axis=1)
    room = np.maximum(upper - lower, 0.0)
    for q in np.unique(prices):
        target = (omega - q) / alpha
        want = target - total
        if not np.any(want > atol):
            break
        level = prices == q
        cap = room[:, level]
        cap_sum = cap.sum(axis=1)
        extra = np.clip(want, 0.0, cap_sum)
        share = np.divide(extra, cap_sum, out=np.zeros_like(extra), where=cap_sum > 0)
        bids[:, level] += cap * share[:, None]
        total += extra
    return bids


def waterfill_rows(prices, omega, alpha, lower, upper) -> np.ndarray:
    """Waterfill when every agent faces its own price row (N x H).

    Slots are visited in each row's ascending price order; exact ties are
    filled in slot order rather than split.
    """
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), prices.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), prices.shape)
    omega = np.asarray(omega, dtype=float).reshape(-1, 1)
    alpha = np.asarray(alpha, dtype=float).reshape(-1, 1)
    if np.any(lower > upper):
        raise ValueError("infeasible bounds: lower > upper")
    order = np.argsort(prices, axis=1, kind="stable")
    q = np.take_along_axis(prices, order, axis=1)
    cap = np.take_along_axis(upper - lower, order, axis=1)
    before = np.cumsum(cap, axis=1) - cap
    target = (omega - q) / alpha - lower.sum(axis=1, keepdims=True)
    extra = np.clip(target - before, 0.0, cap)
    bids = lower.copy()
    np.put_along_axis(bids, order, np.take_along_axis(bids, order, axis=1) + extra, axis=1)
    return bids


def bid_quad_total(agent: QuadTotalAgent, prices) -> np.ndarray:
    prices = np.asarray(prices, dtype=float)
    if prices.shape != agent.lower.shape:
        raise ValueError("price vector and bounds differ in length")
    return waterfill(prices, agent.omega, agent.alpha, agent.lower, agent.upper)[0]
