"""Horizon bookkeeping, vector validation and named random streams."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

SLOTS_PER_DAY = 48


@dataclass(frozen=True)
class Horizon:
    """Rolling window of live slots ``start_slot .. start_slot + length - 1``.

    Slots are numbered from 1; slot 1 is 00:00-00:30 of day 1.
    """

    start_slot: int = 1
    length: int = SLOTS_PER_DAY
    slot_duration: int = 30

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"horizon length must be >= 1, got {self.length}")
        if self.slot_duration <= 0:
            raise ValueError("slot_duration must be positive")

    @property
    def end_slot(self) -> int:
        return self.start_slot + self.length - 1

    @property
    def slots(self) -> np.ndarray:
        return np.arange(self.start_slot, self.start_slot + self.length)

    def slot_of_day(self) -> np.ndarray:
        return slot_of_day(self.slots)

    def position(self, slot: int) -> int:
        """Index of an absolute slot inside the live window."""
        pos = slot - self.start_slot
        if not 0 <= pos < self.length:
            raise IndexError(f"slot {slot} is not live in {self}")
        return pos


def advance_horizon(horizon: Horizon) -> Horizon:
    return replace(horizon, start_slot=horizon.start_slot + 1)


def slot_of_day(slot):
    """Zero-based slot-of-day for 1-based absolute slot numbers."""
    return (np.asarray(slot) - 1) % SLOTS_PER_DAY


def day_of_slot(slot):
    """1-based simulated day containing an absolute slot."""
    return (np.asarray(slot) - 1) // SLOTS_PER_DAY + 1


def slot_label(slot_index: int, slot_duration: int = 30) -> str:
    minutes = int(slot_index) * slot_duration
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def _as_nonneg_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} entries must be finite")
    if np.any(arr < 0):
        raise ValueError(f"{what} entries must be >= 0")
    return arr


def as_price_vector(values) -> np.ndarray:
    """Validate per-slot prices ($/kWh)."""
    return _as_nonneg_vector(values, "price vector")


def as_demand_bid(values) -> np.ndarray:
    """Validate per-slot quantities (kWh)."""
    return _as_nonneg_vector(values, "demand bid")


class RngStreams:
    """Independent generators addressed by ``(label, *keys)``.

    The same seed, label and keys always produce the same generator, no
    matter how many other streams were created before it or in what order.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, label: str, *keys: int) -> np.random.Generator:
        key = (zlib.crc32(label.encode()),) + tuple(int(k) for k in keys)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))

    def __repr__(self):
        return f"RngStreams(seed={self.seed})"
