"""Ascending-price clock phase over the live horizon.

A session repeats two steps until every slot's revenue deficit is
non-positive: bidders respond to the announced price vector, then the
aggregator raises the price of each slot still running a deficit.
Bid changes are policed by a revealed-preference activity rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import CostModel

log = logging.getLogger(__name__)

RP_RULES = ("summed", "literal")


# ---------------------------------------------------------------------------
# price adjustment


def price_step(history_prices, history_deficits, max_step: float, min_step: float = 0.0) -> float:
    """Step for one slot from its (price, deficit) history.

    Uses the zero of the line through the last two history points, capped
    at ``max_step``. Falls back to ``max_step`` with fewer than two points
    or when the line does not slope downwards.
    """
    steps = price_steps(
        np.asarray(history_prices, dtype=float).reshape(-1, 1),
        np.asarray(history_deficits, dtype=float).reshape(-1, 1),
        max_step,
        min_step,
    )
    return float(steps[0])


def price_steps(history_prices: np.ndarray, history_deficits: np.ndarray, max_step: float,
                min_step: float = 0.0) -> np.ndarray:
    """Vectorised :func:`price_step` over the columns (slots) of k x H histories."""
    if max_step <= 0:
        raise ValueError("max_step must be > 0")
    hp = np.atleast_2d(history_prices)
    hd = np.atleast_2d(history_deficits)
    n_slots = hp.shape[1]
    steps = np.full(n_slots, float(max_step))
    if hp.shape[0] < 2:
        return steps
    p1, p2 = hp[-2], hp[-1]
    r1, r2 = hd[-2], hd[-1]
    ok = (p2 > p1) & (r2 < r1)
    with np.errstate(divide="ignore", invalid="ignore"):
        zero = p2 - r2 * (p2 - p1) / (r2 - r1)
    secant = np.where(ok, zero - p2, max_step)
    steps = np.minimum(secant, max_step)
    # non-positive secant steps mean the deficit is already closed on the line
    steps = np.where(steps > 0, steps, max_step)
    return np.maximum(steps, min_step)


def update_prices(prices, deficits, steps) -> np.ndarray:
    """``p + step`` where the deficit is positive, ``p`` elsewhere."""
    prices = np.asarray(prices, dtype=float)
    deficits = np.asarray(deficits, dtype=float)
    return np.where(deficits > 0, prices + np.asarray(steps, dtype=float), prices)


def restart_prices(closing, discount: float, initial_price: float) -> np.ndarray:
    """Opening prices after the horizon advances by one slot.

    ``closing`` covers the old horizon; its first slot has just been cleared.
    Surviving slots reopen at a discount, the new last slot at ``initial_price``.
    """
    if not 0 <= discount < 1:
        raise ValueError(f"discount must lie in [0, 1), got {discount}")
    closing = np.asarray(closing, dtype=float)
    return np.append((1.0 - discount) * closing[1:], initial_price)


# ---------------------------------------------------------------------------
# activity rule


@dataclass(frozen=True)
class RPViolation:
    """Which prior accepted bid a candidate conflicts with, and by how much."""

    iteration: int
    inequality: str
    margin: float

    def __str__(self):
        return f"RP violation vs iteration {self.iteration} ({self.inequality}): margin {self.margin:.3g}"


def rp_margins(ledger_prices, ledger_bids, prices, bids, rule: str = "summed"):
    """Constraint slack of candidate bids against every ledger entry.

    ``ledger_prices`` is k x H, ``ledger_bids`` k x N x H, ``prices`` H and
    ``bids`` N x H. Returns a dict of k x N slack arrays; negative slack is a
    violation.

    ``summed`` is the implementable revealed-preference rule
    ``(p_l - p_k) . (d_l - d_k) <= 0``; ``literal`` evaluates the two
    expenditure inequalities ``p_k.d_k - p_k.d_l >= 0`` and
    ``p_l.d_l - p_l.d_k >= 0`` separately.
    """
    lp = np.asarray(ledger_prices, dtype=float)
    lb = np.asarray(ledger_bids, dtype=float)
    p = np.asarray(prices, dtype=float)
    d = np.asarray(bids, dtype=float)
    if lp.shape[0] == 0:
        return {}
    if lp.shape[-1] != p.shape[-1] or lb.shape[-1] != d.shape[-1] or p.shape[-1] != d.shape[-1]:
        raise ValueError("ledger and candidate vectors differ in horizon length")
    diff = d[None, :, :] - lb  # k x N x H
    if rule == "summed":
        dp = p[None, :] - lp  # k x H
        return {"summed": -np.einsum("kh,knh->kn", dp, diff)}
    if rule == "literal":
        old = -np.einsum("kh,knh->kn", lp, diff)  # p_k.d_k - p_k.d_l
        new = diff @ p  # p_l.d_l - p_l.d_k
        return {"eq4": old, "eq5": new}
    raise ValueError(f"unknown RP rule {rule!r}; expected one of {RP_RULES}")


def rp_violating(ledger_prices, ledger_bids, prices, bids, tol: float = 1e-9,
                 rule: str = "summed") -> np.ndarray:
    """Boolean mask over the N candidates that break the activity rule."""
    margins = rp_margins(ledger_prices, ledger_bids, prices, bids, rule)
    bad = np.zeros(np.asarray(bids).shape[0], dtype=bool)
    for slack in margins.values():
        bad |= np.any(slack < -tol, axis=0)
    return bad


class BidLedger:
    """Accepted (price vector, bid) pairs of one agent in the current session."""

    def __init__(self):
        self.prices: list[np.ndarray] = []
        self.bids: list[np.ndarray] = []

    def __len__(self):
        return len(self.prices)

    def append(self, prices, bid):
        self.prices.append(np.asarray(prices, dtype=float).copy())
        self.bids.append(np.asarray(bid, dtype=float).copy())

    def clear(self):
        self.prices.clear()
        self.bids.clear()

    @property
    def last_bid(self):
        return self.bids[-1] if self.bids else None


def check_rp_constraints(ledger: BidLedger, bid, prices, tol: float = 1e-9,
                         rule: str = "summed") -> RPViolation | None:
    """``None`` when ``bid`` at ``prices`` is consistent with the ledger."""
    bid = np.asarray(bid, dtype=float)
    prices = np.asarray(prices, dtype=float)
    if bid.shape != prices.shape:
        raise ValueError("bid and price vectors differ in length")
    if not len(ledger):
        return None
    margins = rp_margins(np.stack(ledger.prices), np.stack(ledger.bids)[:, None, :],
                         prices, bid[None, :], rule)
    worst = None
    for name, slack in margins.items():
        slack = slack[:, 0]
        k = int(np.argmin(slack))
        if slack[k] < -tol and (worst is None or slack[k] < worst.margin):
            worst = RPViolation(iteration=k + 1, inequality=name, margin=float(slack[k]))
    return worst


class PopulationLedger:
    """Session ledger for all agents at once: prices k x H, bids k x N x H."""

    def __init__(self, n_agents: int, n_slots: int):
        self.n_agents = n_agents
        self.n_slots = n_slots
        self._prices: list[np.ndarray] = []
        self._bids: list[np.ndarray] = []

    def __len__(self):
        return len(self._prices)

    @property
    def prices(self) -> np.ndarray:
        if not self._prices:
            return np.empty((0, self.n_slots))
        return np.stack(self._prices)

    @property
    def bids(self) -> np.ndarray:
        if not self._bids:
            return np.empty((0, self.n_agents, self.n_slots))
        return np.stack(self._bids)

    @property
    def last_bids(self) -> np.ndarray | None:
        return self._bids[-1] if self._bids else None

    def append(self, prices, bids):
        self._prices.append(np.array(prices, dtype=float))
        self._bids.append(np.array(bids, dtype=float))

    def clear(self):
        self._prices.clear()
        self._bids.clear()

    def agent(self, i: int) -> BidLedger:
        led = BidLedger()
        for p, b in zip(self._prices, self._bids):
            led.append(p, b[i])
        return led

    def violations(self, prices, bids, tol: float = 1e-9, rule: str = "summed") -> np.ndarray:
        if not self._prices:
            return np.zeros(np.asarray(bids).shape[0], dtype=bool)
        return rp_violating(self.prices, self.bids, prices, bids, tol, rule)


# ---------------------------------------------------------------------------
# rounds and sessions


@dataclass
class ClockState:
    """Mutable state of one clock session over H live slots."""

    prices: np.ndarray
    ledger: PopulationLedger
    k: int = 0
    history_prices: list = field(default_factory=list)
    history_deficits: list = field(default_factory=list)
    history_demand: list = field(default_factory=list)
    last_bids: np.ndarray | None = None
    rejected: int = 0
    terminated: bool = False
    forced: bool = False

    @classmethod
    def open(cls, prices, n_agents: int) -> "ClockState":
        prices = np.asarray(prices, dtype=float).copy()
        return cls(prices=prices, ledger=PopulationLedger(n_agents, prices.size))

    @property
    def deficits(self) -> np.ndarray | None:
        return self.history_deficits[-1] if self.history_deficits else None

    @property
    def frozen(self) -> np.ndarray:
        """Slots whose price is currently not ascending."""
        if not self.history_deficits:
            return np.zeros(self.prices.size, dtype=bool)
        return self.history_deficits[-1] <= 0

    @property
    def price_matrix(self) -> np.ndarray:
        return np.array(self.history_prices)

    @property
    def deficit_matrix(self) -> np.ndarray:
        return np.array(self.history_deficits)


@dataclass(frozen=True)
class ClockParams:
    max_step: float = 0.01
    min_step: float = 1e-4
    max_iterations: int = 50
    tolerance: float = 0.0
    rp_tolerance: float = 1e-9
    rp_rule: str = "summed"


def clock_round(state: ClockState, bids: np.ndarray, cost: CostModel, uncontrolled,
                params: ClockParams = ClockParams()) -> np.ndarray:
    """Commit one round: screen bids, aggregate, compute deficits, move prices.

    ``bids`` is N x H at ``state.prices``. Bids failing the activity rule are
    replaced by the agent's previously accepted bid. Returns the mask of
    rejected agents.
    """
    bids = np.asarray(bids, dtype=float)
    prices = state.prices
    rejected = state.ledger.violations(prices, bids, params.rp_tolerance, params.rp_rule)
    if rejected.any():
        log.warning("round %d: %d bids rejected by the activity rule", state.k + 1, int(rejected.sum()))
        bids = bids.copy()
        bids[rejected] = state.last_bids[rejected]
        state.rejected += int(rejected.sum())
    state.ledger.append(prices, bids)
    state.last_bids = bids

    demand = bids.sum(axis=0) + np.asarray(uncontrolled, dtype=float)
    deficits = cost.revenue_deficit(prices, demand)
    state.history_prices.append(prices.copy())
    state.history_deficits.append(np.asarray(deficits, dtype=float))
    state.history_demand.append(demand)
    state.k += 1

    if is_terminated(state, params.tolerance, params.max_iterations):
        return rejected
    steps = price_steps(state.price_matrix, state.deficit_matrix, params.max_step, params.min_step)
    state.prices = update_prices(prices, deficits, steps)
    return rejected


def is_terminated(state: ClockState, tolerance: float = 0.0, max_iterations: int | None = None) -> bool:
    """All deficits at most ``tolerance``, or the iteration cap reached.

    Sets ``state.terminated`` and, for the cap, ``state.forced``.
    """
    if not state.history_deficits:
        return False
    if np.all(state.history_deficits[-1] <= tolerance):
        state.terminated = True
    elif max_iterations is not None and state.k >= max_iterations:
        state.terminated = True
        state.forced = True
        log.warning("clock session force-closed after %d iterations", state.k)
    return state.terminated


def run_clock_session(prices, bidder: Callable[[np.ndarray], np.ndarray], cost: CostModel,
                      uncontrolled, n_agents: int, params: ClockParams = ClockParams(),
                      on_round: Callable[[ClockState], None] | None = None) -> ClockState:
    """Iterate rounds until termination. ``bidder`` maps prices to N x H bids."""
    state = ClockState.open(prices, n_agents)
    while not state.terminated:
        bids = bidder(state.prices)
        clock_round(state, bids, cost, uncontrolled, params)
        if on_round is not None:
            on_round(state)
    return state


def last_distinct_prices(history_prices, slot: int = 0) -> tuple[float, float]:
    """Final two distinct clock prices of ``slot``; equal if it never moved."""
    col = np.asarray(history_prices, dtype=float)[:, slot]
    hi = col[-1]
    lower = col[col < hi]
    lo = lower[-1] if lower.size else hi
    return float(lo), float(hi)
