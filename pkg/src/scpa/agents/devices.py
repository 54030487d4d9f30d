"""Appliance-scheduling households: minimise energy cost subject to device constraints.

Two device modes are modelled:

* ``program`` -- a fixed per-slot power profile whose start slot is chosen
  inside a window (dishwasher, washer, dryer). A program may be required to
  start only after another program of the same day has finished.
* ``interruptible`` -- a number of on-slots at a discrete power level inside
  a window, with a minimum up-time per run (hot-water cylinder, pool pump).

Each device of each day becomes a *job* expressed in live-horizon positions
(0 is the next slot to clear). Jobs are solved exactly: programs by
enumerating start slots, interruptible jobs by branch-and-bound for single
agents and by a batched dynamic program for the whole fleet.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..core import SLOTS_PER_DAY

log = logging.getLogger(__name__)
_warned: set = set()

MODES = ("program", "interruptible")


@dataclass(frozen=True)
class DeviceSpec:
    """A device and its daily requirement; windows are slot-of-day, ends inclusive.

    ``window[1]`` may exceed 47 for windows running past midnight.
    """

    name: str
    mode: str
    window: tuple[int, int]
    profile: tuple[float, ...] = ()
    energy: float = 0.0
    power: float = 0.0
    min_up: int = 1
    after: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"{self.name}: unknown device mode {self.mode!r}")
        start, end = self.window
        if end < start:
            raise ValueError(f"{self.name}: empty window {self.window}")
        if self.mode == "program":
            if not self.profile or min(self.profile) < 0 or sum(self.profile) <= 0:
                raise ValueError(f"{self.name}: program needs a non-negative profile with energy > 0")
        else:
            if self.energy <= 0 or self.power <= 0:
                raise ValueError(f"{self.name}: energy and power must be > 0")
            if self.min_up < 1:
                raise ValueError(f"{self.name}: min_up must be >= 1")
        if self.slots_needed > end - start + 1:
            raise ValueError(f"{self.name}: needs {self.slots_needed} slots, window has {end - start + 1}")

    @property
    def slots_needed(self) -> int:
        if self.mode == "program":
            return len(self.profile)
        return int(round(self.energy / self.power))

    @property
    def daily_energy(self) -> float:
        if self.mode == "program":
            return float(sum(self.profile))
        return self.slots_needed * self.power

    @classmethod
    def from_dict(cls, raw: dict) -> "DeviceSpec":
        raw = dict(raw)
        raw["window"] = tuple(raw["window"])
        if "profile" in raw:
            raw["profile"] = tuple(float(v) for v in raw["profile"])
        return cls(**raw)


def load_catalog(path=None) -> list[DeviceSpec]:
    """Device fixtures from a JSON file (``{"devices": [...]}``); packaged default if ``path`` is None."""
    if path is None:
        text = resources.files("scpa.data").joinpath("device_catalog.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = json.loads(text)
    devices = [DeviceSpec.from_dict(d) for d in raw["devices"]]
    names = {d.name for d in devices}
    for d in devices:
        if d.after is not None and d.after not in names:
            raise ValueError(f"{d.name}: predecessor {d.after!r} not in catalog")
    return devices


def _warn_once(msg: str, *args):
    # the same infeasible job is re-solved every clock round; report it once per process
    token = (msg, repr(args))
    if token not in _warned:
        _warned.add(token)
        log.warning(msg, *args)


# ---------------------------------------------------------------------------
# jobs


@dataclass
class ProgramJob:
    """A program in horizon positions; ``earliest..latest`` are allowed starts.

    A program that has already started has ``earliest == latest`` (possibly
    negative). ``end`` is the last position the program may draw in.
    """

    profile: np.ndarray
    earliest: int
    latest: int
    end: int
    agent: int = 0
    after: int | None = None
    key: tuple = ()

    @property
    def length(self) -> int:
        return len(self.profile)

    @property
    def feasible(self) -> bool:
        return self.earliest <= self.latest


@dataclass
class InterruptibleJob:
    """``need`` on-slots at ``power`` inside positions ``lo..hi``.

    ``carry`` is the length of an on-run that ended in the slot just before
    position 0; it counts towards that run's minimum up-time.
    """

    lo: int
    hi: int
    need: int
    power: float
    min_up: int = 1
    carry: int = 0
    agent: int = 0
    key: tuple = ()


def run_lengths(on) -> list[tuple[int, int]]:
    """(start, length) of the maximal runs of True in a boolean vector."""
    on = np.asarray(on, dtype=bool)
    runs, i, n = [], 0, on.size
    while i < n:
        if on[i]:
            j = i
            while j < n and on[j]:
                j += 1
            runs.append((i, j - i))
            i = j
        else:
            i += 1
    return runs


def interruptible_feasible(job: InterruptibleJob, on, horizon: int) -> bool:
    on = np.asarray(on, dtype=bool)
    if on.size != horizon or on.sum() != job.need:
        return False
    idx = np.nonzero(on)[0]
    if idx.size and (idx[0] < job.lo or idx[-1] > job.hi):
        return False
    if 0 < job.carry < job.min_up and not (on.size and on[0]):
        return False
    for start, length in run_lengths(on):
        if start == 0:
            length += job.carry
        if length < job.min_up:
            return False
    return True


def program_cost(job: ProgramJob, prices, start: int) -> float:
    total = 0.0
    for j, kwh in enumerate(job.profile):
        pos = start + j
        if 0 <= pos < len(prices):
            total += kwh * prices[pos]
    return total


def program_draws(job: ProgramJob, start: int, horizon: int) -> np.ndarray:
    out = np.zeros(horizon)
    for j, kwh in enumerate(job.profile):
        pos = start + j
        if 0 <= pos < horizon and pos <= job.end:
            out[pos] += kwh
    return out


def solve_program(job: ProgramJob, prices, earliest: int | None = None) -> int:
    """Cheapest start by enumeration; the earliest start if none is feasible."""
    lo = job.earliest if earliest is None else max(job.earliest, earliest)
    if lo > job.latest:
        _warn_once("program %s infeasible; truncated at earliest start", job.key)
        return lo
    costs = [program_cost(job, prices, s) for s in range(lo, job.latest + 1)]
    return lo + int(np.argmin(costs))


def solve_program_pair(first: ProgramJob, second: ProgramJob, prices) -> tuple[int, int]:
    """Jointly cheapest starts with ``second`` starting after ``first`` ends."""
    best, choice = np.inf, None
    for s1 in range(first.earliest, first.latest + 1):
        c1 = program_cost(first, prices, s1)
        for s2 in range(max(second.earliest, s1 + first.length), second.latest + 1):
            c = c1 + program_cost(second, prices, s2)
            if c < best:
                best, choice = c, (s1, s2)
    if choice is None:
        _warn_once("program pair %s/%s infeasible; truncated", first.key, second.key)
        s1 = first.earliest
        return s1, max(second.earliest, s1 + first.length)
    return choice


def truncated_on(job: InterruptibleJob, horizon: int) -> np.ndarray:
    """Fallback for an infeasible job: the earliest window slots up to the need."""
    on = np.zeros(horizon, dtype=bool)
    lo, hi = max(job.lo, 0), min(job.hi, horizon - 1)
    on[lo:min(hi + 1, lo + job.need)] = True
    return on


def solve_interruptible_bnb(job: InterruptibleJob, prices) -> np.ndarray:
    """Exact on/off schedule by depth-first branch-and-bound.

    The bound at each node adds the cheapest remaining on-slot costs to the
    cost so far, which is the continuous relaxation with the up-time
    constraints dropped.
    """
    prices = np.asarray(prices, dtype=float)
    horizon = prices.size
    cost = job.power * prices
    lo, hi, need, up = job.lo, job.hi, job.need, job.min_up
    if need <= 0:
        return np.zeros(horizon, dtype=bool)
    # suffix_cheapest[i][m] = sum of the m cheapest costs in positions i..hi
    suffix_cheapest = [np.concatenate(([0.0], np.cumsum(np.sort(cost[i:hi + 1])))) for i in range(hi + 2)]

    best_cost = np.inf
    best_on: list[int] | None = None
    chosen: list[int] = []
    start_run = min(job.carry, up) if job.carry > 0 else 0

    def search(i: int, count: int, run: int, acc: float):
        nonlocal best_cost, best_on
        left = need - count
        if i > hi:
            if left == 0 and (run == 0 or run >= up):
                if acc < best_cost:
                    best_cost, best_on = acc, list(chosen)
            return
        if left > hi - i + 1:
            return
        if acc + suffix_cheapest[i][left] >= best_cost:
            return
        can_on = left > 0 and i >= lo
        can_off = run == 0 or run >= up
        order = [True, False]
        if can_on and left < hi - i + 1 and cost[i] > np.sort(cost[i:hi + 1])[left - 1]:
            order = [False, True]
        for on in order:
            if on and can_on:
                chosen.append(i)
                search(i + 1, count + 1, min(run + 1, up), acc + cost[i])
                chosen.pop()
            elif not on and can_off:
                search(i + 1, count, 0, acc)

    search(min(lo, 0) if job.carry else lo, 0, start_run, 0.0)
    on = np.zeros(horizon, dtype=bool)
    if best_on is None:
        _warn_once("interruptible job %s infeasible; truncated", job.key)
        return truncated_on(job, horizon)
    on[best_on] = True
    return on


def solve_jobs(programs: list[ProgramJob], interruptibles: list[InterruptibleJob], prices) -> np.ndarray:
    """Total draw of one agent's jobs at ``prices`` using the single-agent solvers."""
    prices = np.asarray(prices, dtype=float)
    horizon = prices.size
    total = np.zeros(horizon)
    followers = {p.after for p in programs if p.after is not None}
    for i, job in enumerate(programs):
        if job.after is not None:
            s1, s2 = solve_program_pair(programs[job.after], job, prices)
            total += program_draws(programs[job.after], s1, horizon)
            total += program_draws(job, s2, horizon)
        elif i not in followers:
            total += program_draws(job, solve_program(job, prices), horizon)
    for job in interruptibles:
        total += job.power * solve_interruptible_bnb(job, prices)
    return total


# ---------------------------------------------------------------------------
# batched solvers


def _masked_program_costs(jobs: list[ProgramJob], rows: np.ndarray, pad: int, lmax: int):
    """Start costs (M x S) with disallowed starts set to inf; start s sits at column s + pad."""
    m, horizon = rows.shape
    ext = np.zeros((m, pad + horizon + lmax))
    ext[:, pad:pad + horizon] = rows
    prof = np.zeros((m, lmax))
    for k, job in enumerate(jobs):
        prof[k, :job.length] = job.profile
    n_starts = pad + horizon
    cost = np.zeros((m, n_starts))
    for j in range(lmax):
        cost += prof[:, j, None] * ext[:, j:j + n_starts]
    starts = np.arange(n_starts) - pad
    earliest = np.array([j.earliest for j in jobs])[:, None]
    latest = np.array([j.latest for j in jobs])[:, None]
    allowed = (starts >= earliest) & (starts <= latest)
    return np.where(allowed, cost, np.inf), prof


def batch_program_starts(jobs: list[ProgramJob], rows: np.ndarray) -> np.ndarray:
    """Optimal start per program job; ``rows`` holds each job's own price vector."""
    if not jobs:
        return np.zeros(0, dtype=int)
    lmax = max(j.length for j in jobs)
    pad = lmax
    cost, _ = _masked_program_costs(jobs, rows, pad, lmax)
    starts = np.argmin(cost, axis=1) - pad
    feasible = np.isfinite(cost.min(axis=1))
    if not feasible.all():
        for k in np.nonzero(~feasible)[0]:
            _warn_once("program %s infeasible; truncated at earliest start", jobs[k].key)
            starts[k] = jobs[k].earliest
    pairs = [(k, j.after) for k, j in enumerate(jobs) if j.after is not None]
    if pairs:
        second = np.array([k for k, _ in pairs])
        first = np.array([a for _, a in pairs])
        c1, c2 = cost[first], cost[second]
        n_starts = cost.shape[1]
        suffix = np.minimum.accumulate(c2[:, ::-1], axis=1)[:, ::-1]
        suffix = np.concatenate([suffix, np.full((len(pairs), lmax + 1), np.inf)], axis=1)
        length1 = np.array([jobs[a].length for a in first])
        cols = np.arange(n_starts)[None, :] + length1[:, None]
        joint = c1 + np.take_along_axis(suffix, cols, axis=1)
        e1 = np.argmin(joint, axis=1)
        ok = np.isfinite(joint[np.arange(len(pairs)), e1])
        later = np.arange(n_starts)[None, :] >= (e1 + length1)[:, None]
        e2 = np.argmin(np.where(later, c2, np.inf), axis=1)
        for q, (k, a) in enumerate(pairs):
            if ok[q]:
                starts[a], starts[k] = e1[q] - pad, e2[q] - pad
            else:
                _warn_once("program pair %s/%s infeasible; truncated", jobs[a].key, jobs[k].key)
                starts[a] = jobs[a].earliest
                starts[k] = max(jobs[k].earliest, starts[a] + jobs[a].length)
    return starts


def batch_program_draws(jobs: list[ProgramJob], starts: np.ndarray, horizon: int) -> np.ndarray:
    out = np.zeros((len(jobs), horizon))
    for k, (job, s) in enumerate(zip(jobs, starts)):
        for j, kwh in enumerate(job.profile):
            pos = s + j
            if 0 <= pos < horizon and pos <= job.end:
                out[k, pos] += kwh
    return out


def batch_interruptible_on(jobs: list[InterruptibleJob], rows: np.ndarray) -> np.ndarray:
    """Exact on/off schedules (M x H) for many interruptible jobs at once.

    Dynamic program over positions with state (on-slots used, current run
    length capped at the job's minimum up-time). Equivalent to
    :func:`solve_interruptible_bnb` job by job.
    """
    m, horizon = rows.shape
    if m == 0:
        return np.zeros((0, horizon), dtype=bool)
    need = np.array([j.need for j in jobs])
    up = np.array([j.min_up for j in jobs])
    lo = np.array([j.lo for j in jobs])
    hi = np.array([j.hi for j in jobs])
    carry = np.array([j.carry for j in jobs])
    power = np.array([j.power for j in jobs])
    cost = power[:, None] * rows
    nmax, umax = int(need.max()), int(up.max())
    ar = np.arange(m)
    counts = np.arange(1, nmax + 1)
    runs = np.arange(umax + 1)
    can_off = (runs[None, :] == 0) | (runs[None, :] >= up[:, None])
    pos = np.arange(horizon)
    inwin = (pos[None, :] >= lo[:, None]) & (pos[None, :] <= hi[:, None])

    value = np.full((m, nmax + 1, umax + 1), np.inf)
    value[ar, 0, np.where(carry > 0, np.minimum(carry, up), 0)] = 0.0
    via_on = np.zeros((horizon, m, nmax + 1, umax + 1), dtype=bool)
    prev_run = np.zeros((horizon, m, nmax + 1, umax + 1), dtype=np.int16)
    for h in range(horizon):
        new = np.full_like(value, np.inf)
        off = np.where(can_off[:, None, :], value, np.inf)
        r_best = np.argmin(off, axis=2)
        new[:, :, 0] = np.take_along_axis(off, r_best[:, :, None], axis=2)[:, :, 0]
        prev_run[h, :, :, 0] = r_best
        step = np.where(inwin[:, h], cost[:, h], np.inf)
        for r in range(umax + 1):
            r_next = np.minimum(r + 1, up)
            cand = value[:, :-1, r] + step[:, None]
            cur = new[ar[:, None], counts[None, :], r_next[:, None]]
            better = cand < cur
            new[ar[:, None], counts[None, :], r_next[:, None]] = np.where(better, cand, cur)
            old_prev = prev_run[h, ar[:, None], counts[None, :], r_next[:, None]]
            prev_run[h, ar[:, None], counts[None, :], r_next[:, None]] = np.where(better, r, old_prev)
            old_on = via_on[h, ar[:, None], counts[None, :], r_next[:, None]]
            via_on[h, ar[:, None], counts[None, :], r_next[:, None]] = better | old_on
        value = new

    final = np.where(can_off, value[ar, need, :], np.inf)
    r = np.argmin(final, axis=1)
    feasible = np.isfinite(final[ar, r])
    c = need.copy()
    on = np.zeros((m, horizon), dtype=bool)
    for h in range(horizon - 1, -1, -1):
        took = via_on[h, ar, c, r]
        on[:, h] = took
        r = prev_run[h, ar, c, r].astype(int)
        c = c - took
    for k in np.nonzero(~feasible)[0]:
        _warn_once("interruptible job %s infeasible; truncated", jobs[k].key)
        on[k] = truncated_on(jobs[k], horizon)
    return on


# ---------------------------------------------------------------------------
# households


@dataclass
class InstanceState:
    """Progress of one device on one day, in absolute slots."""

    window: tuple[int, int]
    fixed_start: int | None = None
    delivered: int = 0
    carry: int = 0
    done: bool = False


@dataclass
class DeviceAgent:
    """A household with a device portfolio.

    ``offsets`` are fixed per-device window displacements (household habit);
    ``shifts[day]`` are the day-start random window shifts; ``tiebreak`` is a
    per-slot-of-day time preference ($/kWh) added to announced prices.
    """

    devices: list[DeviceSpec]
    offsets: np.ndarray
    tiebreak: np.ndarray
    shifts: dict = field(default_factory=dict)
    state: dict = field(default_factory=dict)
    infeasible: int = 0

    def window(self, day: int, k: int) -> tuple[int, int] | None:
        spec = self.devices[k]
        shift = int(self.shifts.get(day, np.zeros(len(self.devices), dtype=int))[k])
        start = spec.window[0] + int(self.offsets[k]) + shift
        end = spec.window[1] + int(self.offsets[k]) + shift
        start, end = max(start, 0), min(end, 2 * SLOTS_PER_DAY - 1)
        base = (day - 1) * SLOTS_PER_DAY + 1
        # day 0 only contributes the part of its windows that reaches slot 1;
        # if that part is too short the device finished before the run began
        start, end = max(base + start, 1), base + end
        if end < start or (day == 0 and end - start + 1 < spec.slots_needed):
            return None
        return start, end

    def instance(self, day: int, k: int) -> InstanceState | None:
        key = (day, k)
        if key not in self.state:
            win = self.window(day, k)
            if win is None:
                return None
            self.state[key] = InstanceState(window=win)
        return self.state[key]

    def jobs(self, start_slot: int, horizon: int, agent: int = 0):
        """Programs and interruptible jobs visible in the live window."""
        end_slot = start_slot + horizon - 1
        first_day = max(0, (start_slot - 1) // SLOTS_PER_DAY - 1)
        last_day = (end_slot - 1) // SLOTS_PER_DAY + 1
        programs: list[ProgramJob] = []
        interrupts: list[InterruptibleJob] = []
        for day in range(first_day, last_day + 1):
            placed: dict[str, int] = {}
            for k, spec in enumerate(self.devices):
                inst = self.instance(day, k)
                if inst is None or inst.done:
                    continue
                ws, we = inst.window
                if we > end_slot or we < start_slot:
                    continue
                key = (agent, day, spec.name)
                if spec.mode == "program":
                    prof = np.asarray(spec.profile, dtype=float)
                    if inst.fixed_start is not None:
                        f = inst.fixed_start - start_slot
                        job = ProgramJob(prof, f, f, we - start_slot, agent, key=key)
                    else:
                        job = ProgramJob(prof, max(ws, start_slot) - start_slot,
                                         we - len(prof) + 1 - start_slot, we - start_slot, agent, key=key)
                    if spec.after is not None:
                        pred = self._predecessor(day, spec.after)
                        if pred is not None and pred[1].done:
                            if pred[1].fixed_start is not None and inst.fixed_start is None:
                                end_pred = pred[1].fixed_start + len(pred[0].profile) - start_slot
                                job.earliest = max(job.earliest, end_pred)
                        elif pred is not None and spec.after in placed:
                            job.after = placed[spec.after]
                        elif pred is not None:
                            continue  # predecessor not visible yet
                    placed[spec.name] = len(programs)
                    programs.append(job)
                else:
                    need = spec.slots_needed - inst.delivered
                    carry = inst.carry if ws < start_slot else 0
                    interrupts.append(InterruptibleJob(max(ws, start_slot) - start_slot, we - start_slot, need,
                                                       spec.power, spec.min_up, carry, agent, key=key))
        return programs, interrupts

    def _predecessor(self, day, name):
        for k, spec in enumerate(self.devices):
            if spec.name == name:
                inst = self.instance(day, k)
                return (spec, inst) if inst is not None else None
        return None

    def live_tiebreak(self, start_slot: int, horizon: int) -> np.ndarray:
        slots = np.arange(start_slot, start_slot + horizon)
        return self.tiebreak[(slots - 1) % SLOTS_PER_DAY]

    def commit(self, slot: int, programs, starts, interrupts, on):
        """Record what ran in ``slot`` (horizon position 0)."""
        for job, s in zip(programs, starts):
            inst = self._state_for(job.key)
            if inst.fixed_start is None and s <= 0:
                inst.fixed_start = slot + int(s)
            if inst.fixed_start is not None and inst.fixed_start + job.length - 1 <= slot:
                inst.done = True
            elif inst.window[1] <= slot:
                inst.done = True
                self.infeasible += 1
        for job, run in zip(interrupts, on):
            inst = self._state_for(job.key)
            if run[0]:
                inst.delivered += 1
                inst.carry += 1
            else:
                inst.carry = 0
            spec = self._spec(job.key[2])
            if inst.delivered >= spec.slots_needed:
                inst.done = True
            elif inst.window[1] <= slot:
                inst.done = True
                self.infeasible += 1

    def _spec(self, name) -> DeviceSpec:
        for spec in self.devices:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def _state_for(self, key) -> InstanceState:
        _, day, name = key
        for k, spec in enumerate(self.devices):
            if spec.name == name:
                return self.state[(day, k)]
        raise KeyError(key)


def bid_device_milp(agent: DeviceAgent, prices, start_slot: int = 1) -> np.ndarray:
    """Cost-minimising draw of every visible device job at ``prices``."""
    prices = np.asarray(prices, dtype=float)
    programs, interrupts = agent.jobs(start_slot, prices.size)
    own = prices + agent.live_tiebreak(start_slot, prices.size)
    return solve_jobs(programs, interrupts, own)
