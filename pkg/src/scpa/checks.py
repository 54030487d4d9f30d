"""Randomised comparisons of the fast solvers against the brute-force oracles.

Each check returns a :class:`CheckResult`; ``run_oracle_checks`` runs the
whole suite and is what ``scpa oracle-check`` prints.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .agents.devices import (
    DeviceAgent,
    DeviceSpec,
    InterruptibleJob,
    batch_interruptible_on,
    bid_device_milp,
    solve_interruptible_bnb,
)
from .agents.logslot import LogPerSlotAgent, bid_log_per_slot, log_bids, log_value
from .agents.quad import QuadTotalAgent, bid_quad_total, quad_value, waterfill
from .clock import ClockParams, last_distinct_prices, run_clock_session
from .cost import CostModel
from .oracles import (
    _enumerate_interruptible,
    _min_up_ok,
    brute_force_mce_oracle,
    coalition_worth,
    log_valuation,
    numeric_bid_oracle,
    quad_valuation,
)
from .proxy import ProxyParams, run_proxy


@dataclass
class CheckResult:
    name: str
    instances: int
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.instances > 0 and not self.failures

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"; first failure: {self.failures[0]}" if self.failures else ""
        return f"{status}  {self.name}: {self.instances - len(self.failures)}/{self.instances} ok " \
               f"in {self.seconds:.2f}s{extra}"


# ---------------------------------------------------------------------------
# tiny single-slot markets


@dataclass
class TinyMarket:
    """At most five single-slot bidders, each quad-total or logarithmic."""

    kinds: list
    params: list
    cost: CostModel
    uncontrolled: float

    @classmethod
    def draw(cls, rng: np.random.Generator, max_agents: int = 5) -> "TinyMarket":
        n = int(rng.integers(1, max_agents + 1))
        kinds, params = [], []
        for _ in range(n):
            if rng.random() < 0.5:
                kinds.append("quad")
                params.append((rng.uniform(0.3, 1.0), rng.uniform(0.05, 0.3), rng.uniform(1.0, 4.0)))
            else:
                kinds.append("log")
                params.append((rng.uniform(0.5, 4.0), rng.uniform(1.5, 4.0)))
        return cls(kinds, params, CostModel(rng.uniform(0.01, 0.08)), float(rng.uniform(0.0, 3.0)))

    def valuations(self):
        out = []
        for kind, par in zip(self.kinds, self.params):
            if kind == "quad":
                out.append(quad_valuation(par[0], par[1], 0.0, par[2]))
            else:
                out.append(log_valuation(par[0], 0.0, par[1]))
        return out

    def bids(self, price: float) -> np.ndarray:
        out = np.empty(len(self.kinds))
        for i, (kind, par) in enumerate(zip(self.kinds, self.params)):
            if kind == "quad":
                out[i] = waterfill([price], par[0], par[1], [[0.0]], [[par[2]]])[0, 0]
            else:
                out[i] = log_bids(price, par[0], 0.0, par[1])
        return out

    def clear(self, start_price: float = 0.01):
        """Single-slot clock from ``start_price`` followed by the proxy close."""
        n = len(self.kinds)
        unc = np.array([self.uncontrolled])
        ck = run_clock_session(np.array([start_price]), lambda p: self.bids(float(p[0]))[:, None], self.cost,
                               unc, n, ClockParams(max_iterations=2000))
        interval = last_distinct_prices(ck.price_matrix, 0)
        query = lambda bp: np.stack([self.bids(float(p))[:, None] for p in bp])  # noqa: E731
        out = run_proxy(1, interval, query, self.cost, self.uncontrolled, ck.prices, ck.ledger,
                        ck.ledger.last_bids[:, 0], ProxyParams())
        return out.result, ck


def mce_oracle_check(instances: int = 20, seed: int = 0, grid_step: float = 1e-3) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("solve_mce vs brute-force MCE oracle", instances)
    t0 = time.perf_counter()
    grid = np.arange(0.0, 2.0 + grid_step, grid_step)
    for k in range(instances):
        m = TinyMarket.draw(rng)
        cleared, _ = m.clear()
        p_or, x_or = brute_force_mce_oracle(m.valuations(), m.cost, grid, m.uncontrolled)
        if abs(cleared.price - p_or) > 2 * grid_step + 1e-12:
            res.failures.append(f"instance {k}: solve_mce {cleared.price:.5f} vs oracle {p_or:.5f}")
    res.seconds = time.perf_counter() - t0
    return res


def bsm_check(instances: int = 20, seed: int = 0, step: float = 0.02) -> CheckResult:
    """Adding a second identical log bidder adds no more worth than the first did."""
    rng = np.random.default_rng(seed)
    res = CheckResult("bidder submodularity, identical log bidders", instances)
    t0 = time.perf_counter()
    for k in range(instances):
        alpha, upper = rng.uniform(0.5, 4.0), rng.uniform(1.5, 4.0)
        vals = [log_valuation(alpha, 0.0, upper)] * 2
        cost = CostModel(rng.uniform(0.01, 0.3))
        w0 = coalition_worth({0}, vals, cost, step)
        w1 = coalition_worth({0, 1}, vals, cost, step)
        w2 = coalition_worth({0, 1, 2}, vals, cost, step)
        if w2 - w1 > w1 - w0 + 1e-9:
            res.failures.append(f"instance {k}: marginal {w2 - w1:.6f} > {w1 - w0:.6f}")
    res.seconds = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# bid solvers


def _agrees(bid, ref, objective, step, tol=1e-9) -> bool:
    """Within one grid step everywhere, or an exact tie in the objective."""
    if np.max(np.abs(bid - ref)) <= step + tol:
        return True
    return abs(objective(bid) - objective(ref)) <= 1e-9


def _random_bounds(rng, h, upper_hi=4.0):
    lower = np.where(rng.random(h) < 0.5, 0.0, rng.uniform(0.0, 0.3, h))
    upper = lower + rng.uniform(0.2, upper_hi - 0.3, h)
    return lower, upper


def bid_quad_check(instances: int = 100, seed: int = 0, step: float = 0.05) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("bid_quad_total vs grid oracle", instances)
    t0 = time.perf_counter()
    for k in range(instances):
        h = int(rng.integers(1, 4))
        lower, upper = _random_bounds(rng, h)
        agent = QuadTotalAgent(rng.normal(0.5, 0.02), max(rng.normal(0.1, 0.02), 0.02), lower, upper)
        prices = rng.uniform(0.05, 0.6, h)
        bid = bid_quad_total(agent, prices)
        ref = numeric_bid_oracle(agent, prices, step)

        def obj(d):
            return float(quad_value(d.sum(), agent.omega, agent.alpha) - d @ prices)

        if np.any(bid < lower - 1e-12) or np.any(bid > upper + 1e-12):
            res.failures.append(f"instance {k}: bounds violated")
        elif obj(bid) < obj(ref) - 1e-9 or not _agrees(bid, ref, obj, step):
            res.failures.append(f"instance {k}: bid {np.round(bid, 4)} vs oracle {np.round(ref, 4)}")
    res.seconds = time.perf_counter() - t0
    return res


def bid_log_check(instances: int = 100, seed: int = 0, step: float = 0.01) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("bid_log_per_slot vs grid oracle", instances)
    t0 = time.perf_counter()
    for k in range(instances):
        h = int(rng.integers(1, 7))
        lower, upper = _random_bounds(rng, h)
        agent = LogPerSlotAgent(rng.uniform(0.3, 5.0), lower, upper)
        prices = rng.uniform(0.05, 3.0, h)
        bid = bid_log_per_slot(agent, prices)
        ref = numeric_bid_oracle(agent, prices, step)

        def obj(d):
            return float(np.sum(log_value(d, agent.alpha) - prices * d))

        if np.any(bid < lower - 1e-12) or np.any(bid > upper + 1e-12):
            res.failures.append(f"instance {k}: bounds violated")
        elif obj(bid) < obj(ref) - 1e-9 or not _agrees(bid, ref, obj, step):
            res.failures.append(f"instance {k}: bid {np.round(bid, 4)} vs oracle {np.round(ref, 4)}")
    res.seconds = time.perf_counter() - t0
    return res


TOY_HORIZON = 12
TOY_DEVICES = (
    DeviceSpec("heater", "interruptible", (0, 9), energy=3.0, power=1.0, min_up=2),
    DeviceSpec("pump", "interruptible", (2, 11), energy=2.0, power=0.5, min_up=1),
    DeviceSpec("dish", "program", (1, 10), profile=(0.9, 0.6)),
    DeviceSpec("washer", "program", (0, 7), profile=(0.6, 0.4)),
    DeviceSpec("dryer", "program", (2, 11), profile=(1.0, 1.0), after="washer"),
)


def toy_device_agent(rng: np.random.Generator, catalog=TOY_DEVICES) -> DeviceAgent:
    """A household owning a random subset of the toy devices, windows shifted by at most one slot."""
    keep = set(rng.choice(len(catalog), size=int(rng.integers(1, len(catalog) + 1)), replace=False).tolist())
    names = [d.name for d in catalog]
    for i in list(keep):
        if catalog[i].after is not None:
            keep.add(names.index(catalog[i].after))
    devices = [catalog[i] for i in sorted(keep)]
    shifts = {1: rng.integers(-1, 1, len(devices))}  # -1 or 0 keeps every window inside the toy day
    return DeviceAgent(devices, np.zeros(len(devices), dtype=int), rng.normal(0.0, 0.02, 48), shifts)


def bid_device_check(instances: int = 100, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    res = CheckResult("bid_device_milp vs schedule enumeration", instances)
    t0 = time.perf_counter()
    for k in range(instances):
        agent = toy_device_agent(rng)
        prices = rng.uniform(0.3, 0.6, TOY_HORIZON)
        bid = bid_device_milp(agent, prices)
        ref = numeric_bid_oracle(agent, prices)
        own = prices + agent.live_tiebreak(1, TOY_HORIZON)
        if not np.allclose(bid, ref, atol=1e-9) and abs(bid @ own - ref @ own) > 1e-9:
            res.failures.append(f"instance {k}: cost {bid @ own:.6f} vs {ref @ own:.6f}")
    res.seconds = time.perf_counter() - t0
    return res


def toy_interruptible_jobs(horizon: int = TOY_HORIZON):
    """Every small interruptible configuration: window, need, up-time and carried run."""
    for lo, hi in itertools.product(range(0, 3), range(3, horizon)):
        for need, min_up, carry in itertools.product(range(1, 6), range(1, 4), range(0, 2)):
            if need <= hi - lo + 1 and (carry == 0 or lo == 0):
                yield InterruptibleJob(lo, hi, need, 1.0, min_up, carry)


def bnb_enumeration_check(seed: int = 0, price_draws: int = 2) -> CheckResult:
    """Branch-and-bound and the batched DP against exhaustive on/off enumeration."""
    rng = np.random.default_rng(seed)
    jobs = [j for j in toy_interruptible_jobs() if next(_enumerate_interruptible(j, TOY_HORIZON), None) is not None]
    res = CheckResult("interruptible branch-and-bound vs enumeration", 0)
    t0 = time.perf_counter()
    for _ in range(price_draws):
        prices = rng.uniform(0.3, 0.6, TOY_HORIZON)
        batch = batch_interruptible_on(jobs, np.tile(prices, (len(jobs), 1)))
        for j, job in enumerate(jobs):
            best = min(float(prices[on].sum()) for on in _enumerate_interruptible(job, TOY_HORIZON))
            res.instances += 1
            for label, on in (("bnb", solve_interruptible_bnb(job, prices)), ("dp", batch[j])):
                on = np.asarray(on, dtype=bool)
                ok = (on.sum() == job.need and _min_up_ok(on, job.min_up, job.carry)
                      and not on[:job.lo].any() and not on[job.hi + 1:].any()
                      and abs(float(prices[on].sum()) - best) <= 1e-9)
                if not ok:
                    res.failures.append(f"{label} {job}: cost {float(prices[on].sum()):.6f} vs {best:.6f}")
    res.seconds = time.perf_counter() - t0
    return res


def run_oracle_checks(seed: int = 0) -> list[CheckResult]:
    return [
        mce_oracle_check(seed=seed),
        bsm_check(seed=seed),
        bid_quad_check(seed=seed),
        bid_log_check(seed=seed),
        bid_device_check(seed=seed),
        bnb_enumeration_check(seed=seed),
    ]
