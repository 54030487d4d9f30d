"""
The revealed-preference activity rule
=====================================

Within a clock session every agent's new bid is checked against the bids
it already made. A sincere bidder passes automatically; a bidder that
props up demand in one slot and later moves it to a slot whose price rose
more is caught.
"""

# %%
import numpy as np

from scpa.clock import BidLedger, check_rp_constraints

ledger = BidLedger()
ledger.append([1.0, 1.0], [2.0, 0.0])

# %%
# Two candidates. The default rule checks (p_l - p_k).(d_l - d_k) <= 0; the
# literal rule checks the two expenditure inequalities one at a time.

for prices, bid in (([1.0, 2.0], [0.0, 2.0]), ([1.0, 2.0], [3.0, 0.0])):
    summed = check_rp_constraints(ledger, bid, prices)
    literal = check_rp_constraints(ledger, bid, prices, rule="literal")
    print(f"bid {bid} at {prices}:  summed -> {summed or 'ok'};  literal -> {literal or 'ok'}")

# %%
# Parking: overbid on slot 1 while it is cheap, then jump to slot 2.

park = BidLedger()
park.append([0.40, 0.40], [4.0, 0.0])
park.append([0.41, 0.40], [4.0, 0.0])
print(check_rp_constraints(park, [0.0, 4.0], [0.45, 0.48]))

# %%
# A sincere quad-total bidder facing rising prices never trips the rule.

from scpa.agents.quad import QuadTotalAgent, bid_quad_total

agent = QuadTotalAgent(0.5, 0.1, [0.0, 0.0, 0.0], [2.0, 2.0, 2.0])
sincere = BidLedger()
prices = np.array([0.30, 0.32, 0.35])
rng = np.random.default_rng(1)
for _ in range(30):
    bid = bid_quad_total(agent, prices)
    assert check_rp_constraints(sincere, bid, prices) is None
    sincere.append(prices, bid)
    prices = prices + rng.uniform(0, 0.01, 3)
print("30 rounds, no violations; final bid", np.round(bid, 3))
