"""Per-slot logarithmic value ``sum_h max(alpha*log d_h, 0)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LogPerSlotAgent:
    alpha: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if np.any(np.asarray(self.alpha) <= 0):
            raise ValueError("alpha must be > 0")
        if np.any(self.lower > self.upper) or np.any(self.lower < 0):
            raise ValueError("per-slot bounds must satisfy 0 <= lower <= upper")

    def value(self, bid) -> float:
        return float(np.sum(log_value(bid, self.alpha)))


def log_value(d, alpha):
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(alpha * np.log(np.where(d > 0, d, 1.0)), 0.0)


def log_bids(prices, alpha, lower, upper) -> np.ndarray:
    """Exact per-slot optimum of ``max(alpha*log d, 0) - p*d`` on ``[l, u]``.

    Below one kWh the value is zero, so the choice is between the minimum
    ``l`` and the interior optimum ``clamp(alpha/p, max(l, 1), u)``.
    Broadcasts over N x H; ``alpha`` may be per agent (N x 1) or per slot.
    """
    p = np.asarray(prices, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        foc = np.where(p > 0, alpha / np.where(p > 0, p, 1.0), np.inf)
    interior = np.clip(foc, np.maximum(lower, 1.0), upper)
    gain_interior = log_value(interior, alpha) - p * interior
    gain_lower = log_value(lower, alpha) - p * lower
    use_interior = (upper > 1.0) & (gain_interior > gain_lower)
    return np.where(use_interior, interior, np.broadcast_to(lower, interior.shape))


def bid_log_per_slot(agent: LogPerSlotAgent, prices) -> np.ndarray:
    prices = np.asarray(prices, dtype=float)
    if prices.shape != agent.lower.shape:
        raise ValueError("price vector and bounds differ in length")
    return log_bids(prices, agent.alpha, agent.lower, agent.upper)
