"""The bidder population: parameter draws, shocks and vectorised bidding.

Agents are stacked in model order (quad-total, log-per-slot, devices). Every
agent draws its parameters and its shock series from its own named random
stream, so results do not depend on evaluation order or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core import SLOTS_PER_DAY, RngStreams, day_of_slot
from .devices import (
    DeviceAgent,
    batch_interruptible_on,
    batch_program_draws,
    batch_program_starts,
    load_catalog,
)
from .logslot import log_bids
from .quad import waterfill_rows

GROUPS = ("quad_total", "log_per_slot", "device_milp")


def apply_agent_shocks(lower, upper, multiplier, cap: float = 4.0):
    """Scale a bound pair by one multiplier; the upper bound is capped at ``cap``."""
    upper = np.minimum(np.asarray(upper, dtype=float) * multiplier, cap)
    lower = np.minimum(np.asarray(lower, dtype=float) * multiplier, upper)
    return lower, upper


def draw_window_shifts(rng: np.random.Generator, n_devices: int, shift_max: int = 3) -> np.ndarray:
    return rng.integers(-shift_max, shift_max + 1, size=n_devices)


def sample_portfolio(rng: np.random.Generator, catalog, lo: int = 3, hi: int = 5):
    """3-5 distinct devices in catalog order; a dependent device brings its predecessor."""
    names = [d.name for d in catalog]
    k = min(int(rng.integers(lo, hi + 1)), len(catalog))
    chosen = set(rng.choice(len(catalog), size=k, replace=False).tolist())
    for i in sorted(chosen):
        after = catalog[i].after
        if after is not None and names.index(after) not in chosen:
            chosen.add(names.index(after))
            if len(chosen) > hi:
                chosen.discard(i)
    return [catalog[i] for i in sorted(chosen)]


class Population:
    def __init__(self, cfg, streams: RngStreams | None = None, catalog=None):
        self.cfg = cfg
        self.streams = streams or RngStreams(cfg.seed)
        counts = [cfg.agents.get(g, 0) for g in GROUPS]
        edges = np.cumsum([0] + counts)
        self.slices = {g: slice(int(edges[i]), int(edges[i + 1])) for i, g in enumerate(GROUPS)}
        self.n = int(edges[-1])
        self.n1, self.n2, self.n3 = counts
        n_slots = (cfg.days + 2) * SLOTS_PER_DAY + cfg.horizon
        self._draw_quad(n_slots)
        self._draw_log(n_slots)
        self._draw_devices(catalog)
        self.pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None

    # -- parameter draws

    def _agent_rng(self, label, i, *keys):
        return self.streams.stream(label, i, *keys)

    def _shock_series(self, i, n_slots, columns):
        sh = self.cfg.shocks
        if not sh.enabled:
            return np.ones((n_slots, len(columns)))
        rng = self._agent_rng("agent-shock", i)
        return np.exp(rng.standard_normal((n_slots, len(columns))) * np.asarray(columns))

    def _draw_quad(self, n_slots):
        q, sh = self.cfg.quad, self.cfg.shocks
        n, off = self.n1, self.slices["quad_total"].start
        self.q_omega = np.empty(n)
        self.q_alpha = np.empty(n)
        self.q_lower = np.empty((n, SLOTS_PER_DAY))
        self.q_upper = np.empty((n, SLOTS_PER_DAY))
        self.q_pref = np.empty((n, SLOTS_PER_DAY))
        self.q_shock = np.empty((n, n_slots))
        for j in range(n):
            rng = self._agent_rng("agent", off + j)
            self.q_omega[j] = rng.normal(q.omega_mean, q.omega_sd)
            self.q_alpha[j] = max(rng.normal(q.alpha_mean, q.alpha_sd), 1e-3)
            self.q_lower[j] = rng.uniform(*q.lower_range, SLOTS_PER_DAY)
            self.q_upper[j] = rng.uniform(*q.upper_range, SLOTS_PER_DAY)
            self.q_pref[j] = rng.normal(0.0, self.cfg.time_preference_sd, SLOTS_PER_DAY)
            self.q_shock[j] = self._shock_series(off + j, n_slots, [sh.bound_log_sd])[:, 0]

    def _draw_log(self, n_slots):
        p, sh = self.cfg.log, self.cfg.shocks
        n, off = self.n2, self.slices["log_per_slot"].start
        self.l_alpha = np.empty(n)
        self.l_lower = np.empty((n, SLOTS_PER_DAY))
        self.l_upper = np.empty((n, SLOTS_PER_DAY))
        self.l_bound_shock = np.empty((n, n_slots))
        self.l_alpha_shock = np.empty((n, n_slots))
        for j in range(n):
            rng = self._agent_rng("agent", off + j)
            self.l_alpha[j] = max(rng.normal(p.alpha_mean, np.sqrt(p.alpha_var)), 1e-3)
            self.l_lower[j] = rng.uniform(*p.lower_range, SLOTS_PER_DAY)
            self.l_upper[j] = np.maximum(rng.uniform(*p.upper_range, SLOTS_PER_DAY), self.l_lower[j])
            both = self._shock_series(off + j, n_slots, [sh.bound_log_sd, sh.alpha_log_sd])
            self.l_bound_shock[j], self.l_alpha_shock[j] = both[:, 0], both[:, 1]

    def _draw_devices(self, catalog):
        d = self.cfg.devices
        catalog = catalog if catalog is not None else load_catalog(d.catalog)
        off = self.slices["device_milp"].start
        self.device_agents: list[DeviceAgent] = []
        for j in range(self.n3):
            rng = self._agent_rng("agent", off + j)
            devices = sample_portfolio(rng, catalog, d.min_devices, d.max_devices)
            offset = int(rng.integers(-d.offset_max, d.offset_max + 1))
            pref = rng.normal(0.0, self.cfg.time_preference_sd, SLOTS_PER_DAY)
            agent = DeviceAgent(devices, np.full(len(devices), offset), pref)
            for day in range(0, self.cfg.days + 3):
                shift_rng = self._agent_rng("device-shift", off + j, day)
                agent.shifts[day] = draw_window_shifts(shift_rng, len(devices), d.shift_max)
            self.device_agents.append(agent)

    # -- sessions

    def session(self, start_slot: int, horizon: int | None = None, shock_all: bool = False) -> "Session":
        return Session(self, start_slot, horizon or self.cfg.horizon, shock_all)

    def mean_multipliers(self) -> tuple[float, float]:
        """Expected lognormal bound and alpha multipliers, ``exp(sd**2 / 2)``."""
        sh = self.cfg.shocks
        if not sh.enabled:
            return 1.0, 1.0
        return float(np.exp(sh.bound_log_sd**2 / 2)), float(np.exp(sh.alpha_log_sd**2 / 2))

    def group_of(self) -> np.ndarray:
        out = np.empty(self.n, dtype=object)
        for g, s in self.slices.items():
            out[s] = g
        return out

    def subtotals(self, allocations) -> dict:
        allocations = np.asarray(allocations, dtype=float)
        return {g: float(allocations[s].sum()) for g, s in self.slices.items()}

    def shutdown(self):
        if self.pool is not None:
            self.pool.shutdown()


@dataclass
class _DeviceJobs:
    programs: list
    interrupts: list
    prog_owner: np.ndarray
    int_owner: np.ndarray
    per_agent: list


class Session:
    """Bidding view of the population for one clock session.

    Every session is the final one for its first slot, so that slot carries
    the realised shocks and every later slot uses mean values. With
    ``shock_all`` every slot carries its realised shock (one-shot responses).
    """

    def __init__(self, pop: Population, start_slot: int, horizon: int, shock_all: bool = False):
        self.pop, self.t, self.h = pop, start_slot, horizon
        cfg = pop.cfg
        slots = np.arange(start_slot, start_slot + horizon)
        sod = (slots - 1) % SLOTS_PER_DAY
        cols = slots - 1 if shock_all else slots[:1] - 1
        live = slice(None) if shock_all else slice(0, 1)
        sh = cfg.shocks
        cap = sh.bound_cap
        # slots not yet in their final session use the expected multiplier
        m_bound, m_alpha = pop.mean_multipliers()
        q_mult = np.full((pop.n1, horizon), m_bound)
        q_mult[:, live] = pop.q_shock[:, cols]
        self.q_lower, self.q_upper = apply_agent_shocks(pop.q_lower[:, sod], pop.q_upper[:, sod], q_mult, cap)
        self.q_pref = pop.q_pref[:, sod]
        l_mult = np.full((pop.n2, horizon), m_bound)
        l_mult[:, live] = pop.l_bound_shock[:, cols]
        self.l_lower, self.l_upper = apply_agent_shocks(pop.l_lower[:, sod], pop.l_upper[:, sod], l_mult, cap)
        a_mult = np.full((pop.n2, horizon), m_alpha)
        a_mult[:, live] = pop.l_alpha_shock[:, cols]
        self.l_alpha = pop.l_alpha[:, None] * a_mult
        self.jobs = self._device_jobs()
        self.d_pref = np.array([a.live_tiebreak(start_slot, horizon) for a in pop.device_agents]).reshape(
            pop.n3, horizon)

    def _device_jobs(self) -> _DeviceJobs:
        programs, interrupts, p_owner, i_owner, per_agent = [], [], [], [], []
        for j, agent in enumerate(self.pop.device_agents):
            progs, ints = agent.jobs(self.t, self.h, agent=j)
            base = len(programs)
            for job in progs:
                if job.after is not None:
                    job.after += base
            per_agent.append((range(base, base + len(progs)), range(len(interrupts), len(interrupts) + len(ints))))
            programs += progs
            interrupts += ints
            p_owner += [j] * len(progs)
            i_owner += [j] * len(ints)
        return _DeviceJobs(programs, interrupts, np.array(p_owner, dtype=int), np.array(i_owner, dtype=int), per_agent)

    # -- per-group bids

    def bid_quad(self, prices) -> np.ndarray:
        if self.pop.n1 == 0:
            return np.zeros((0, self.h))
        return waterfill_rows(prices[None, :] + self.q_pref, self.pop.q_omega, self.pop.q_alpha,
                              self.q_lower, self.q_upper)

    def bid_log(self, prices) -> np.ndarray:
        if self.pop.n2 == 0:
            return np.zeros((0, self.h))
        return log_bids(prices[None, :], self.l_alpha, self.l_lower, self.l_upper)

    def solve_devices(self, prices):
        rows = prices[None, :] + self.d_pref
        jobs = self.jobs
        starts = batch_program_starts(jobs.programs, rows[jobs.prog_owner]) if jobs.programs else np.zeros(0, int)
        on = batch_interruptible_on(jobs.interrupts, rows[jobs.int_owner]) if jobs.interrupts else \
            np.zeros((0, self.h), dtype=bool)
        return starts, on

    def bid_devices(self, prices) -> np.ndarray:
        out = np.zeros((self.pop.n3, self.h))
        if self.pop.n3 == 0:
            return out
        starts, on = self.solve_devices(prices)
        jobs = self.jobs
        if jobs.programs:
            np.add.at(out, jobs.prog_owner, batch_program_draws(jobs.programs, starts, self.h))
        if jobs.interrupts:
            power = np.array([j.power for j in jobs.interrupts])
            np.add.at(out, jobs.int_owner, power[:, None] * on)
        return out

    def bid(self, prices) -> np.ndarray:
        """Straightforward bids of every agent at announced ``prices`` (N x H)."""
        prices = np.asarray(prices, dtype=float)
        parts = (self.bid_quad, self.bid_log, self.bid_devices)
        if self.pop.pool is not None:
            futures = [self.pop.pool.submit(f, prices) for f in parts]
            blocks = [f.result() for f in futures]
        else:
            blocks = [f(prices) for f in parts]
        return np.vstack(blocks)

    def proxy_query(self, closing_prices, slot_pos: int = 0):
        """Callable for the proxy: full bids (L x N x H) at each breakpoint price."""
        closing = np.asarray(closing_prices, dtype=float)

        def query(breakpoints):
            out = []
            for price in breakpoints:
                p = closing.copy()
                p[slot_pos] = price
                out.append(self.bid(p))
            return np.stack(out)

        return query

    def commit(self, prices):
        """Fix what devices do in the clearing slot, solved exactly at ``prices``."""
        if self.pop.n3 == 0:
            return
        starts, on = self.solve_devices(np.asarray(prices, dtype=float))
        jobs = self.jobs
        for j, agent in enumerate(self.pop.device_agents):
            pr, ir = jobs.per_agent[j]
            agent.commit(self.t, [jobs.programs[k] for k in pr], [int(starts[k]) for k in pr],
                         [jobs.interrupts[k] for k in ir], [on[k] for k in ir])

    @property
    def day(self) -> int:
        return day_of_slot(self.t)


def proxy_schedule(session: Session, breakpoints, closing_prices, slot_pos: int = 0) -> np.ndarray:
    """Every agent's clearing-slot demand at each breakpoint (N x L), before repair."""
    full = session.proxy_query(closing_prices, slot_pos)(np.asarray(breakpoints, dtype=float))
    return full[:, :, slot_pos].T
