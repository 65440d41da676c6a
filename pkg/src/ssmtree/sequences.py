"""Decoration sequences: the state space of splitting events.

A decoration sequence is a followed coordinate y0 > 0 together with a
non-increasing list of non-negative offspring coordinates y1 >= y2 >= ...
Offspring below the configured fragment cutoff are dropped rather than
stored as explicit zeros, and at most MAX_OFFSPRING entries are kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_OFFSPRING = 64


@dataclass(frozen=True)
class DecorationSequence:
    followed: float
    offspring: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        off = np.asarray(self.offspring, dtype=float).ravel()
        if off.size > MAX_OFFSPRING:
            off = off[:MAX_OFFSPRING]
        object.__setattr__(self, "offspring", off)
        if not self.followed > 0:
            raise ValueError(f"followed coordinate must be positive, got {self.followed}")
        if off.size and (np.any(off < 0) or np.any(np.diff(off) > 1e-12)):
            raise ValueError("offspring must be non-negative and sorted non-increasing")

    @staticmethod
    def binary(s: float) -> "DecorationSequence":
        """Conservative binary split (s, 1-s)."""
        return DecorationSequence(s, np.array([1.0 - s]))

    @staticmethod
    def make(followed: float, offspring, cutoff: float = 0.0) -> "DecorationSequence":
        off = np.sort(np.asarray(offspring, dtype=float).ravel())[::-1]
        if cutoff > 0:
            off = off[off >= cutoff]
        return DecorationSequence(followed, off[:MAX_OFFSPRING])

    @property
    def y1(self) -> float:
        """Largest offspring coordinate (0 for a childless split)."""
        return float(self.offspring[0]) if self.offspring.size else 0.0

    def total(self) -> float:
        return float(self.followed + self.offspring.sum())

    def as_array(self, n: int | None = None) -> np.ndarray:
        """Dense vector (y0, y1, ..., y_{n-1}), zero padded."""
        m = self.offspring.size
        if n is None:
            n = 1 + m
        out = np.zeros(n)
        out[0] = self.followed
        k = min(m, n - 1)
        out[1 : 1 + k] = self.offspring[:k]
        return out

    def ordered(self) -> np.ndarray:
        """All coordinates (followed included) ranked non-increasing."""
        return np.sort(np.append(self.offspring, self.followed))[::-1]

    def scale(self, c: float) -> "DecorationSequence":
        return DecorationSequence(c * self.followed, c * self.offspring)

    def conservation_deficit(self) -> float:
        """total() - 1; zero for conservative splits."""
        return self.total() - 1.0

    def leq(self, other: "DecorationSequence", slack: float = 0.0) -> bool:
        """Coordinate-wise self <= other (missing entries read as 0)."""
        if self.followed > other.followed + slack:
            return False
        n = max(self.offspring.size, other.offspring.size)
        a = np.zeros(n)
        b = np.zeros(n)
        a[: self.offspring.size] = self.offspring
        b[: other.offspring.size] = other.offspring
        return bool(np.all(a <= b + slack))
