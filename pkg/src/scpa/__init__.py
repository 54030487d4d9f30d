"""Staggered clock-proxy auction simulator for demand-side electricity scheduling."""

from .clock import BidLedger, ClockParams, check_rp_constraints, price_step, restart_prices, update_prices
from .config import ConfigError, ScenarioConfig, default_scenario, load_scenario, validate_scenario
from .core import Horizon, RngStreams, advance_horizon
from .cost import CostModel, apply_cost_shock, average_total_cost, revenue_deficit, total_cost
from .oracles import brute_force_mce_oracle, coalition_worth, numeric_bid_oracle
from .orchestrator import DEFAULT_TOU, SimulationLog, TouTariff, run_day, run_scpa_cycle, run_tou_benchmark, summarize
from .proxy import ClearingResult, NoCrossingError, aggregate_demand, allocate, build_breakpoints, solve_mce

__version__ = "0.1.0"
