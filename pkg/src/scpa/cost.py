"""Aggregator supply cost, average total cost and per-unit revenue deficit."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class CostModel:
    """Monotone supply cost with a multiplicative shock on its scale.

    Subclasses override :meth:`_base_cost`; the default is the quadratic
    ``a * x**2`` used in the demonstration scenario.
    """

    a: float = 0.002
    shock: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"cost parameter a must be > 0, got {self.a}")
        if not np.all(np.asarray(self.shock) > 0):
            raise ValueError(f"cost shock must be > 0, got {self.shock}")

    @property
    def scale(self) -> float:
        return self.a * self.shock

    def _base_cost(self, x):
        return x * x

    def _base_atc(self, x):
        return x

    def total_cost(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("supply quantity must be >= 0")
        out = self.scale * self._base_cost(x)
        return float(out) if out.ndim == 0 else out

    def average_total_cost(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("average total cost is undefined for x <= 0")
        out = self.scale * self._base_atc(x)
        return float(out) if out.ndim == 0 else out

    def atc_or_zero(self, x):
        """ATC with the zero-demand convention ATC(0) := 0, vectorised."""
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, 1.0)
        out = np.where(x > 0, self.scale * self._base_atc(safe), 0.0)
        return float(out) if out.ndim == 0 else out

    def revenue_deficit(self, p, x):
        """Per-unit deficit ``c(x)/x - p``; zero where nothing is sold."""
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("supply quantity must be >= 0")
        out = np.where(x > 0, self.atc_or_zero(x) - p, 0.0)
        return float(out) if out.ndim == 0 else out

    def with_shock(self, shock) -> "CostModel":
        """Copy with a new shock; an array gives one shock per slot."""
        shock = np.asarray(shock, dtype=float)
        return replace(self, shock=float(shock) if shock.ndim == 0 else shock)

    # Linear-ATC fast path used by the clearing solver: ATC(x) = slope * x.
    @property
    def atc_slope(self) -> float | None:
        return self.scale


@dataclass(frozen=True)
class QuadraticCost(CostModel):
    """``c(x) = a * shock * x**2``; ATC is the line ``a * shock * x``."""


@dataclass(frozen=True)
class PowerCost(CostModel):
    """``c(x) = a * shock * x**k`` for ``k >= 1``; a non-linear-ATC example."""

    exponent: float = 2.0

    def __post_init__(self):
        super().__post_init__()
        if self.exponent < 1:
            raise ValueError("exponent must be >= 1 for a monotone ATC")

    def _base_cost(self, x):
        return np.power(x, self.exponent)

    def _base_atc(self, x):
        return np.power(x, self.exponent - 1.0)

    @property
    def atc_slope(self):
        return self.scale if self.exponent == 2.0 else None


def total_cost(model: CostModel, x):
    return model.total_cost(x)


def average_total_cost(model: CostModel, x):
    return model.average_total_cost(x)


def revenue_deficit(model: CostModel, p, x):
    return model.revenue_deficit(p, x)


def draw_cost_shock(rng: np.random.Generator, log_sd: float = 0.05) -> float:
    return float(rng.lognormal(mean=0.0, sigma=log_sd))


def apply_cost_shock(model: CostModel, rng: np.random.Generator, log_sd: float = 0.05) -> CostModel:
    """Return ``model`` carrying a fresh lognormal shock; the base ``a`` is kept."""
    return model.with_shock(draw_cost_shock(rng, log_sd))
