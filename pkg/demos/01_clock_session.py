"""
One clock session over a day-ahead horizon
==========================================

The aggregator announces a price for each of the 48 half-hour slots, every
household answers with its straightforward demand, and any slot whose
revenue does not cover average supply cost has its price raised.
"""

# %%
import matplotlib.pyplot as plt
import numpy as np

from scpa import default_scenario
from scpa.core import Horizon
from scpa.orchestrator import SimState, SimulationLog, _setup, run_clock

cfg = default_scenario()
print(cfg.agents, "cost a =", cfg.cost_a, "opening price", cfg.clock.initial_price)

# %%
# Build the 1000-agent population and run the bootstrap session from $0.40 everywhere.

cfg, streams, pop = _setup(cfg, seed=0, days=1)
state = SimState(cfg, pop, streams, SimulationLog(cfg.seed, 1, cfg.horizon), Horizon(1, cfg.horizon),
                 np.full(cfg.horizon, cfg.clock.initial_price), last_slot=48)
ck = run_clock(state)
pop.shutdown()
rec = state.log.sessions[0]
print(f"{rec.iterations} iterations, forced close: {rec.forced}")

# %%
# Slot 1 step by step. The deficit is ATC - p; the step shrinks as the secant
# closes in on the zero crossing.

p, x, rd = rec.prices[:, 0], rec.demand[:, 0], rec.deficits[:, 0]
for k in range(rec.iterations):
    print(f"{k + 1:3d}  p={p[k]:.4f}  demand={x[k]:7.1f} kWh  deficit={rd[k]:+.5f}")

# %%
fig, ax = plt.subplots()
ax.plot(p * x, "o-", label="revenue")
ax.plot((rd + p) * x, "s--", label="cost")
ax.set_xlabel("iteration")
ax.set_ylabel("$ in slot 1")
ax.legend()

# %%
# Closing prices across the horizon: the uncontrolled-load peaks show through.

hours = np.arange(48) / 2
plt.figure()
plt.step(hours, ck.prices, where="post")
plt.xlabel("hour of day")
plt.ylabel("closing price ($/kWh)")
plt.show()
