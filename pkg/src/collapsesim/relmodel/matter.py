"""Classical matter-density branches coupled to the mediating field."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError
from .lattice import Cell, SpacetimeLattice


@dataclass(frozen=True, eq=False)
class MatterBranchSet:
    """K branches with amplitudes ``c_k`` and source profiles ``J_k`` over lattice cells.

    ``profiles`` has shape ``(K, n_t, n_x)``; it may be a read-only broadcast
    view for profiles that are constant in time.
    """

    amplitudes: np.ndarray
    profiles: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", c)
        p = np.asarray(self.profiles, dtype=float)
        object.__setattr__(self, "profiles", p)
        if p.ndim != 3 or p.shape[0] != c.size:
            raise ConfigurationError("profiles must have shape (K, n_t, n_x) with K = len(amplitudes)")
        if not np.isclose(np.sum(np.abs(c) ** 2), 1.0, atol=1e-9):
            raise ConfigurationError("branch amplitudes must satisfy sum |c_k|^2 = 1")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ConfigurationError("matter profiles must be finite and >= 0")

    @property
    def n_branches(self) -> int:
        return self.amplitudes.size

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def sources(self, cell: Cell) -> np.ndarray:
        return self.profiles[:, cell[0], cell[1]]

    def support(self) -> list[Cell]:
        ks, ts, js = np.nonzero(self.profiles)
        return sorted({(int(t), int(j)) for t, j in zip(ts, js)})

    @property
    def is_static(self) -> bool:
        p = self.profiles
        return bool(np.all(p == p[:, :1, :]))

    def delta_volume(self, lattice: SpacetimeLattice, row: int = 0) -> float:
        """Spatial volume where exactly one of two branches carries matter."""
        if self.n_branches != 2:
            raise ConfigurationError("V_delta is defined for two branches")
        occupied = self.profiles[:, row, :] > 0
        return float(np.count_nonzero(occupied[0] ^ occupied[1]) * lattice.a_x)


def static_branches(
    lattice: SpacetimeLattice,
    amplitudes: Sequence[complex],
    columns: Sequence[dict[int, float] | Sequence[int]],
    J: float | Sequence[float] = 1.0,
) -> MatterBranchSet:
    """Branches whose matter sits at fixed columns for all times.

    ``columns[k]`` is either a list of occupied columns (all carrying ``J``)
    or a ``{column: J}`` map.
    """
    k = len(amplitudes)
    j_vals = np.broadcast_to(np.asarray(J, dtype=float), (k,))
    rows = np.zeros((k, lattice.n_x))
    for b, cols in enumerate(columns):
        items = cols.items() if isinstance(cols, dict) else ((c, j_vals[b]) for c in cols)
        for c, val in items:
            if not 0 <= c < lattice.n_x:
                raise ConfigurationError(f"column {c} outside lattice of width {lattice.n_x}")
            rows[b, c] = val
    profiles = np.broadcast_to(rows[:, None, :], (k, lattice.n_t, lattice.n_x))
    return MatterBranchSet(np.asarray(amplitudes, dtype=complex), profiles)


def cell_branches(
    lattice: SpacetimeLattice, amplitudes: Sequence[complex], sources: Sequence[dict[Cell, float]]
) -> MatterBranchSet:
    """Branches with matter on individual cells, ``sources[k] = {cell: J}``."""
    profiles = np.zeros((len(amplitudes), lattice.n_t, lattice.n_x))
    for b, cells in enumerate(sources):
        for cell, val in cells.items():
            if not lattice.contains(cell):
                raise ConfigurationError(f"source cell {cell} outside lattice")
            profiles[b, cell[0], cell[1]] = val
    return MatterBranchSet(np.asarray(amplitudes, dtype=complex), profiles)
