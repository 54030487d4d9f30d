"""Static SVG figures of a simulated day."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import slot_of_day  # noqa: E402
from .orchestrator import SimulationLog, TouResult  # noqa: E402

log = logging.getLogger(__name__)

_GROUP_LABELS = {"quad_total": "model 1 (total energy)", "log_per_slot": "model 2 (per slot)",
                 "device_milp": "model 3 (devices)"}
# keep SVG output stable between runs
matplotlib.rcParams["svg.hashsalt"] = "scpa"
matplotlib.rcParams["svg.fonttype"] = "none"


def _hours(slots) -> np.ndarray:
    return slot_of_day(np.asarray(slots)) / 2.0 + 0.25


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_clock_convergence(log_: SimulationLog, path, slot_pos: int = 0) -> Path:
    """Revenue and cost of one slot across the bootstrap session's iterations."""
    s = log_.sessions[0]
    p, x, rd = s.prices[:, slot_pos], s.demand[:, slot_pos], s.deficits[:, slot_pos]
    revenue, cost = p * x, (rd + p) * x
    it = np.arange(1, s.iterations + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(it, revenue, "o-", label="revenue")
    ax.plot(it, cost, "s--", label="cost")
    ax.set_xlabel("clock iteration")
    ax.set_ylabel("$ in slot %d" % s.slots[slot_pos])
    ax2 = ax.twinx()
    ax2.plot(it, p, color="grey", lw=0.8, label="price")
    ax2.set_ylabel("price ($/kWh)")
    ax.legend(loc="upper left")
    ax.set_title("Bootstrap clock session")
    return _save(fig, Path(path))


def plot_closing_demand(log_: SimulationLog, path) -> Path:
    """Bootstrap closing prices over the horizon and the stacked demand beneath them."""
    s = log_.sessions[0]
    closing = s.prices[-1]
    hours = _hours(s.slots)
    total = s.demand[-1]
    groups = s.closing_subtotals
    base = total - sum(groups.values()) if groups else total
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    top.step(hours, closing, where="mid")
    top.set_ylabel("closing price ($/kWh)")
    layers = [np.maximum(base, 0.0)] + [groups[g] for g in _GROUP_LABELS if g in groups]
    labels = ["uncontrolled"] + [_GROUP_LABELS[g] for g in _GROUP_LABELS if g in groups]
    colors = ["#222222", "#4c72b0", "#dd8452", "#55a868"][:len(layers)]
    bottom.stackplot(hours, *layers, labels=labels, colors=colors, step="mid")
    bottom.set_ylabel("demand (kWh)")
    bottom.set_xlabel("hour of day")
    bottom.legend(loc="upper left", fontsize="small")
    return _save(fig, Path(path))


def plot_day_prices(log_: SimulationLog, path) -> Path:
    """Proxy clearing prices and quantities slot by slot."""
    slots = np.array([c.slot for c in log_.clearings])
    x = np.arange(len(slots)) / 2.0 + 0.25
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(x, log_.prices(), where="mid", label="clearing price")
    ax.set_xlabel("hours since start")
    ax.set_ylabel("price ($/kWh)")
    ax2 = ax.twinx()
    ax2.bar(x, log_.quantities(), width=0.45, alpha=0.3, color="grey", label="quantity")
    ax2.set_ylabel("quantity (kWh)")
    ax.set_zorder(ax2.get_zorder() + 1)
    ax.patch.set_visible(False)
    ax.legend(loc="upper left")
    return _save(fig, Path(path))


def plot_tou_comparison(log_: SimulationLog, tou: TouResult, path) -> Path:
    """Clearing prices against the tariff, and the tariff's per-slot revenue deficit."""
    n = min(len(log_.clearings), len(tou.slots))
    x = np.arange(n) / 2.0 + 0.25
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    top.step(x, log_.prices()[:n], where="mid", label="auction")
    top.step(x, tou.prices[:n], where="mid", label="time-of-use")
    top.set_ylabel("price ($/kWh)")
    top.legend(loc="upper left")
    d = tou.deficit[:n]
    bottom.bar(x, d, width=0.45, color=np.where(d > 0, "#c44e52", "#4c72b0"))
    bottom.axhline(0.0, color="black", lw=0.6)
    bottom.set_ylabel("ToU deficit ATC - p ($/kWh)")
    bottom.set_xlabel("hours since start")
    return _save(fig, Path(path))


def emit_plots(log_: SimulationLog, out_dir, tou: TouResult | None = None) -> list[Path]:
    """Write the figures for ``log_`` (and the tariff comparison when ``tou`` is given)."""
    if not log_.sessions or not log_.clearings:
        log.warning("empty simulation log; no figures written")
        return []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        plot_clock_convergence(log_, out / "clock_convergence.svg"),
        plot_closing_demand(log_, out / "closing_demand.svg"),
        plot_day_prices(log_, out / "day_prices.svg"),
    ]
    if tou is not None:
        paths.append(plot_tou_comparison(log_, tou, out / "tou_comparison.svg"))
    return paths
