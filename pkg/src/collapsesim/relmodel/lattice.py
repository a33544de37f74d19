"""1+1D spacetime cell lattice, causal order and hypersurface cuts.

Cells are ``(t, j)`` index pairs; light speed is 1, so cell ``y`` lies in the
causal past of ``x`` when ``t_y <= t_x`` and ``|j_x - j_y| a_x <= (t_x - t_y) a_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import ConfigurationError, OrderingError, UsageError

Cell = tuple[int, int]

_EPS = 1e-12


@dataclass(frozen=True)
class SpacetimeLattice:
    n_t: int
    n_x: int
    a_t: float = 1.0
    a_x: float = 1.0

    def __post_init__(self):
        if self.n_t < 1 or self.n_x < 1:
            raise ConfigurationError("lattice extents must be >= 1")
        if self.a_t <= 0 or self.a_x <= 0:
            raise ConfigurationError("lattice spacings must be > 0")

    @property
    def cell_volume(self) -> float:
        return self.a_t * self.a_x

    @property
    def cone_slope(self) -> int:
        """Columns reachable per time step along the light cone."""
        return int(math.floor(self.a_t / self.a_x + _EPS))

    def contains(self, cell: Cell) -> bool:
        t, j = cell
        return 0 <= t < self.n_t and 0 <= j < self.n_x

    def cells(self) -> Iterator[Cell]:
        for t in range(self.n_t):
            for j in range(self.n_x):
                yield (t, j)

    def time_of(self, cell: Cell) -> float:
        return cell[0] * self.a_t

    def cell_of(self, t: float, x: float) -> Cell:
        """Cell containing the continuous point ``(t, x)``."""
        return (
            min(int(math.floor(t / self.a_t)), self.n_t - 1),
            min(int(math.floor(x / self.a_x)), self.n_x - 1),
        )

    def in_cone(self, dt: int, dj: int) -> bool:
        """True when offset ``(dt, dj)`` with ``dt >= 0`` is inside or on the future light cone."""
        return dt >= 0 and abs(dj) * self.a_x <= dt * self.a_t + _EPS


def causal_relation(lattice: SpacetimeLattice, x: Cell, y: Cell) -> str:
    """Where ``y`` sits relative to ``x``: 'equal', 'past', 'future' or 'spacelike'."""
    if not (lattice.contains(x) and lattice.contains(y)):
        raise UsageError(f"cells {x}, {y} not both inside the lattice")
    if x == y:
        return "equal"
    dt, dj = x[0] - y[0], x[1] - y[1]
    if lattice.in_cone(dt, dj):
        return "past"
    if lattice.in_cone(-dt, dj):
        return "future"
    return "spacelike"


class Hypersurface:
    """Staircase cut: ``cut[j]`` is the number of cells already absorbed in column ``j``."""

    def __init__(self, lattice: SpacetimeLattice, cut=None):
        self.lattice = lattice
        self.cut = np.zeros(lattice.n_x, dtype=int) if cut is None else np.array(cut, dtype=int)
        self._depth = None

    def copy(self) -> Hypersurface:
        return Hypersurface(self.lattice, self.cut)

    def absorbed(self, cell: Cell) -> bool:
        return cell[0] < self.cut[cell[1]]

    def next_cell(self, j: int) -> Cell:
        return (int(self.cut[j]), j)

    def is_admissible(self, cell: Cell) -> bool:
        t, j = cell
        if not self.lattice.contains(cell) or self.cut[j] != t:
            return False
        # the latest past cell in column j' sits d_min rows down; it must be absorbed
        return bool(np.all(self.cut >= t + 1 - self._past_depth[j]))

    @property
    def _past_depth(self) -> np.ndarray:
        lat = self.lattice
        if getattr(self, "_depth", None) is None:
            dj = np.abs(np.arange(lat.n_x)[:, None] - np.arange(lat.n_x)[None, :])
            self._depth = np.maximum(1, np.ceil(dj * lat.a_x / lat.a_t - _EPS)).astype(int)
        return self._depth

    def admissible_cells(self) -> list[Cell]:
        return [self.next_cell(j) for j in range(self.lattice.n_x) if self.is_admissible(self.next_cell(j))]

    def advance(self, cell: Cell) -> None:
        if not self.is_admissible(cell):
            raise OrderingError(f"cell {cell} is not admissible on cut {self.cut.tolist()}")
        self.cut[cell[1]] += 1

    @property
    def complete(self) -> bool:
        return bool(np.all(self.cut == self.lattice.n_t))


def time_major_order(lattice: SpacetimeLattice) -> list[Cell]:
    """Default sweep: every row in time, left to right."""
    return list(lattice.cells())


def greedy_order(lattice: SpacetimeLattice, prefer: str = "left") -> list[Cell]:
    """Always absorb the leftmost (or rightmost) admissible cell."""
    surface = Hypersurface(lattice)
    order = []
    while not surface.complete:
        cells = surface.admissible_cells()
        cell = cells[0] if prefer == "left" else cells[-1]
        surface.advance(cell)
        order.append(cell)
    return order


def random_admissible_order(lattice: SpacetimeLattice, rng: np.random.Generator, tilt: float = 0.0) -> list[Cell]:
    """Random sweep; admissible cells are drawn with weight ``exp(tilt * column)``.

    ``tilt = 0`` is uniform over the admissible set; a large ``|tilt|`` drives
    the cut into a steep staircase leaning one way.
    """
    surface = Hypersurface(lattice)
    order = []
    while not surface.complete:
        cells = surface.admissible_cells()
        w = np.exp(tilt * (np.array([c[1] for c in cells], dtype=float) - cells[-1][1]))
        cell = cells[min(int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right")), len(cells) - 1)]
        surface.advance(cell)
        order.append(cell)
    return order
