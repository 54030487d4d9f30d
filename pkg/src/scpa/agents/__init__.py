"""Bidder valuation models and the simulated population."""

from .devices import DeviceAgent, DeviceSpec, InterruptibleJob, ProgramJob, bid_device_milp, load_catalog
from .logslot import LogPerSlotAgent, bid_log_per_slot
from .population import Population, Session, apply_agent_shocks, proxy_schedule
from .quad import QuadTotalAgent, bid_quad_total

__all__ = [
    "DeviceAgent",
    "DeviceSpec",
    "InterruptibleJob",
    "LogPerSlotAgent",
    "Population",
    "ProgramJob",
    "QuadTotalAgent",
    "Session",
    "apply_agent_shocks",
    "bid_device_milp",
    "bid_log_per_slot",
    "bid_quad_total",
    "load_catalog",
    "proxy_schedule",
]
