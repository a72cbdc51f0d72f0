"""Toroidal classification habitat: grid geometry, occupancy, pheromone storage.

Coordinates are (x, y) tuples with 0 <= x < width, 0 <= y < height, always
stored wrapped. The grid is the only spatial index: occupancy and pheromone
live in dense arrays indexed by flat cell id y * width + x.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import ConfigError, InternalError

GridCoord = tuple[int, int]

# Moore ring offsets as (dy, dx), row-major. This fixed order defines the
# deterministic neighbor sequence used by counting, voting and rendering.
MOORE_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)

# The 8 lattice headings, 45 degrees apart, indexed counterclockwise from
# east with y growing downward: 0=E 1=NE 2=N 3=NW 4=W 5=SW 6=S 7=SE.
DIRECTIONS = (
    (1, 0), (1, -1), (0, -1), (-1, -1),
    (-1, 0), (-1, 1), (0, 1), (1, 1),
)

# Moore-ring slot (row-major order above) holding each direction's neighbor.
SLOT_OF_DIRECTION = tuple(
    MOORE_OFFSETS.index((dy, dx)) for (dx, dy) in DIRECTIONS
)


class Grid:
    """Toroidal lattice holding at most one item and one agent per cell.

    Mutation is single-writer: one simulation run owns the grid at a time.
    The occupancy arrays use -1 for "empty"; pheromone is a dense float field.
    """

    def __init__(self, width: int, height: int):
        if width <= 0 or height <= 0:
            raise ConfigError(f"grid dimensions must be positive, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        self.area = self.width * self.height
        self.item_grid = np.full(self.area, -1, dtype=np.int32)
        self.agent_grid = np.full(self.area, -1, dtype=np.int32)
        self.pheromone = np.zeros(self.area, dtype=np.float64)
        self._neighbors = None

    # -- geometry ----------------------------------------------------------

    def wrap(self, x: int, y: int) -> GridCoord:
        return (x % self.width, y % self.height)

    def flat(self, r: GridCoord) -> int:
        x, y = r
        return (y % self.height) * self.width + (x % self.width)

    def coord(self, idx: int) -> GridCoord:
        return (idx % self.width, idx // self.width)

    @property
    def neighbor_table(self) -> np.ndarray:
        """(area, 8) flat indices of every cell's Moore ring, row-major slots."""
        if self._neighbors is None:
            ys, xs = np.divmod(np.arange(self.area, dtype=np.int64), self.width)
            cols = []
            for dy, dx in MOORE_OFFSETS:
                cols.append(((ys + dy) % self.height) * self.width + (xs + dx) % self.width)
            self._neighbors = np.stack(cols, axis=1).astype(np.int32)
        return self._neighbors

    # -- occupancy ---------------------------------------------------------

    def item_at(self, r: GridCoord) -> Optional[int]:
        v = self.item_grid[self.flat(r)]
        return None if v < 0 else int(v)

    def agent_at(self, r: GridCoord) -> Optional[int]:
        v = self.agent_grid[self.flat(r)]
        return None if v < 0 else int(v)

    def place_item(self, item_id: int, r: GridCoord) -> None:
        idx = self.flat(r)
        if self.item_grid[idx] >= 0:
            raise InternalError(f"cell {self.coord(idx)} already holds item {self.item_grid[idx]}")
        self.item_grid[idx] = item_id

    def remove_item(self, r: GridCoord) -> int:
        idx = self.flat(r)
        if self.item_grid[idx] < 0:
            raise InternalError(f"no item at {self.coord(idx)}")
        item_id = int(self.item_grid[idx])
        self.item_grid[idx] = -1
        return item_id

    def place_agent(self, agent_id: int, r: GridCoord) -> None:
        idx = self.flat(r)
        if self.agent_grid[idx] >= 0:
            raise InternalError(f"cell {self.coord(idx)} already holds agent {self.agent_grid[idx]}")
        self.agent_grid[idx] = agent_id

    def move_agent(self, agent_id: int, src: GridCoord, dst: GridCoord) -> None:
        i, j = self.flat(src), self.flat(dst)
        if self.agent_grid[i] != agent_id:
            raise InternalError(f"agent {agent_id} is not at {src}")
        if self.agent_grid[j] >= 0:
            raise InternalError(f"cell {dst} already holds agent {self.agent_grid[j]}")
        self.agent_grid[i] = -1
        self.agent_grid[j] = agent_id

    def pheromone_at(self, r: GridCoord) -> float:
        return float(self.pheromone[self.flat(r)])


def create_grid(n_items: int, override: Optional[tuple[int, int]] = None) -> Grid:
    """Create the clustering habitat, auto-sized to ~4 cells per item.

    Without an override the grid is square with side ceil(sqrt(4 * n_items)),
    e.g. 800 items -> 57x57, 11982 items -> 219x219.
    """
    if n_items < 1:
        raise ConfigError(f"n_items must be >= 1, got {n_items}")
    if override is not None:
        w, h = override
        return Grid(w, h)
    side = math.isqrt(4 * n_items)
    if side * side < 4 * n_items:
        side += 1
    return Grid(side, side)


def neighborhood_items(grid: Grid, r: GridCoord) -> list[tuple[GridCoord, int]]:
    """Items in the 8 Moore cells around r, center excluded, row-major order.

    The length of the result is the crowding count n used by the pick/drop
    response thresholds.
    """
    idx = grid.flat(r)
    out = []
    row = grid.neighbor_table[idx]
    for s in range(8):
        j = int(row[s])
        item = grid.item_grid[j]
        if item >= 0:
            out.append((grid.coord(j), int(item)))
    return out


def toroidal_distance(a: GridCoord, b: GridCoord, dims: tuple[int, int]) -> float:
    """Minimal wrapped Euclidean distance between two cells.

    Per-axis displacement is min(|delta|, size - |delta|), which equals the
    minimum over the 3x3 tiling of virtual grid copies.
    """
    w, h = dims
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    dx = min(dx, w - dx)
    dy = min(dy, h - dy)
    return math.sqrt(dx * dx + dy * dy)
