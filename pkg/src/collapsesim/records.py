"""Trajectory bookkeeping shared by the field-localization and relativistic models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class HitEvent:
    """One localization event.

    ``pre`` and ``post`` are the squared norm (exact representations) or total
    branch weight (branch tier) immediately before and after the hit operator,
    taken before any renormalization, so ``post / pre`` is the hit's factor in
    the joint density of all realized Z values.
    """

    time: float
    location: Any
    z: float
    r: float
    pre: float
    post: float
    weights: np.ndarray | None = None


@dataclass
class TrajectoryRecord:
    initial_weights: np.ndarray
    hits: list[HitEvent] = field(default_factory=list)
    final_state: Any = None
    flags: dict = field(default_factory=dict)

    @property
    def final_weights(self) -> np.ndarray:
        if self.hits and self.hits[-1].weights is not None:
            return self.hits[-1].weights
        return self.initial_weights

    def outcome(self, threshold: float = 0.99) -> int | None:
        """Index of the dominant branch at the end, or None if not reduced."""
        w = self.final_weights
        k = int(np.argmax(w))
        return k if w[k] >= threshold else None
