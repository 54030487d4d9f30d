"""
Proxy clearing on a tiny market
===============================

After the clock stops, the front slot is cleared by the proxy: each bidder
reports demand at five breakpoints spanning the final clock step, the
schedules are summed, and the price where average total cost meets the
interpolated demand is the clearing price. Revenue equals cost there.
"""

# %%
import numpy as np

from scpa.checks import TinyMarket
from scpa.oracles import brute_force_mce_oracle

rng = np.random.default_rng(7)
market = TinyMarket.draw(rng)
for kind, par in zip(market.kinds, market.params):
    print(kind, np.round(par, 3))
print("cost a:", round(market.cost.a, 4), " uncontrolled:", round(market.uncontrolled, 3), "kWh")

# %%
result, clock = market.clear()
print("clock iterations:", clock.price_matrix.shape[0])
print("breakpoints:", np.round(result.breakpoints, 4))
print(f"clearing price {result.price:.5f}  quantity {result.quantity:.4f}")
print(f"revenue {result.revenue:.6f}  cost {result.cost:.6f}")
print("allocations:", np.round(result.allocations, 4))

# %%
# The brute-force oracle scans a price grid with exact best responses.
# Near a logarithmic bidder's drop-out price demand jumps, so agreement is
# within a couple of grid steps rather than exact.

grid = np.arange(0.0, 2.0, 1e-3)
p_oracle, x_oracle = brute_force_mce_oracle(market.valuations(), market.cost, grid, market.uncontrolled)
print(f"oracle price {p_oracle:.4f}  quantity {x_oracle:.4f}  gap {abs(p_oracle - result.price):.4f}")

# %%
from scpa.checks import mce_oracle_check

print(mce_oracle_check(instances=20).line())
