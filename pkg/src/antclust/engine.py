"""Simulation loop: seeded initialization, pick/drop voting, pheromone-guided
movement, deposit and evaporation, snapshots.

Random-draw contract (one seeded stream, consumed in a fixed order):
  1. at init: zoned item coordinates if a placer is given, then uniform item
     cells, then ant cells, then ant headings;
  2. per step, per ant in ascending id: one uniform per neighbor item voted
     on (row-major neighbor order), then one uniform for the move when at
     least one cell is free.
Uniforms are pre-generated in blocks from a single PCG64 generator; block
boundaries do not alter the sequence, so a (config, seed) pair fully
determines the trajectory.

`step` and the vote/move/deposit operations below are the reference
semantics. `run` delegates to a compiled loop (_fastloop) that reproduces
them bit for bit; tests assert the equivalence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _fastloop
from .classifier import spatial_entropy
from .errors import ConfigError, InternalError
from .habitat import DIRECTIONS, SLOT_OF_DIRECTION, Grid, GridCoord
from .kernels import (
    KernelParams,
    crowding,
    drop_probability,
    normalized_distance,
    pick_probability,
    pheromone_weight,
)

ROLE_MARKER = 0
ROLE_TEST = 1
ROLE_NAMES = ("marker", "test")

VOTE_RULES = ("strict", "lenient")

# w(turn) by |turn| in 45-degree units, filled from KernelParams at init.
_TURN_UNITS = 5


@dataclass
class SimParams:
    """Everything that parameterizes one run besides the data itself."""

    kernel: KernelParams = field(default_factory=KernelParams)
    t_max: int = 1_000_000
    vote_rule: str = "strict"

    def validate(self) -> None:
        self.kernel.validate()
        if self.t_max < 0:
            raise ConfigError(f"t_max must be >= 0, got {self.t_max}")
        if self.vote_rule not in VOTE_RULES:
            raise ConfigError(f"vote_rule must be one of {VOTE_RULES}, got {self.vote_rule!r}")


@dataclass
class Item:
    """One data object: feature vector in [0,1]^F plus bookkeeping."""

    id: int
    features: Sequence[float]
    role: str = "marker"
    true_class: Optional[int] = None


@dataclass
class Snapshot:
    """Frozen view of item placements at one step."""

    t: int
    width: int
    height: int
    placements: list  # (item_id, x|None, y|None, role, true_class|None)
    entropy: float
    pheromone_stats: tuple  # (min, max, mean)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "width": self.width,
            "height": self.height,
            "placements": [list(p) for p in self.placements],
            "entropy": self.entropy,
            "pheromone_stats": list(self.pheromone_stats),
        }


class SimState:
    """Mutable simulation state. Never share one instance across executors;
    independent runs (fresh seeds) are safe to run concurrently."""

    def __init__(self, grid: Grid, items: list[Item], params: SimParams,
                 seed: int, n_ants: int):
        self.grid = grid
        self.items = items
        self.params = params
        self.seed = seed
        self.t = 0

        n = len(items)
        f_len = len(items[0].features)
        self.features = np.empty((n, f_len), dtype=np.float64)
        self.ids = np.empty(n, dtype=np.int64)
        self.roles = np.empty(n, dtype=np.int8)
        self.classes = np.full(n, -1, dtype=np.int32)
        for i, it in enumerate(items):
            if len(it.features) != f_len:
                raise ConfigError(f"item {it.id}: feature length {len(it.features)} != {f_len}")
            self.features[i] = np.asarray(it.features, dtype=np.float64)
            self.ids[i] = it.id
            if it.role not in ROLE_NAMES:
                raise ConfigError(f"item {it.id}: unknown role {it.role!r}")
            self.roles[i] = ROLE_NAMES.index(it.role)
            if it.true_class is not None:
                self.classes[i] = it.true_class
        if np.any(self.features < 0.0) or np.any(self.features > 1.0):
            raise ConfigError("item features must lie in [0, 1]")
        if len(set(self.ids.tolist())) != n:
            raise ConfigError("item ids must be unique")
        self.index_of_id = {int(v): i for i, v in enumerate(self.ids)}

        self.item_cell = np.full(n, -1, dtype=np.int32)
        self.ant_cell = np.full(n_ants, -1, dtype=np.int32)
        self.ant_heading = np.zeros(n_ants, dtype=np.int8)
        self.ant_item = np.full(n_ants, -1, dtype=np.int32)

        # direction-weight lookup by |turn| in 45-degree units
        c = params.kernel.direction_falloff
        self.turn_weights = np.array(
            [math.exp(-c * u * 45.0 / 90.0) for u in range(_TURN_UNITS)], dtype=np.float64)

        self.gen = np.random.Generator(np.random.PCG64(seed))
        self._cap = max(1 << 16, 16 * 9 * max(1, n_ants))
        self._uniforms = np.empty(0, dtype=np.float64)
        self._upos = 0

    # -- random stream -----------------------------------------------------

    def _refill(self) -> None:
        rest = self._uniforms[self._upos:]
        fresh = self.gen.random(self._cap - rest.size)
        self._uniforms = np.concatenate((rest, fresh))
        self._upos = 0

    def _draw(self) -> float:
        if self._upos >= self._uniforms.size:
            self._refill()
        u = float(self._uniforms[self._upos])
        self._upos += 1
        return u

    # -- introspection -----------------------------------------------------

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_ants(self) -> int:
        return len(self.ant_cell)

    def carried_count(self) -> int:
        return int(np.count_nonzero(self.ant_item >= 0))

    def on_grid_count(self) -> int:
        return int(np.count_nonzero(self.item_cell >= 0))

    def pheromone_bound(self) -> float:
        """Stationary per-cell ceiling A*(eta + 8/alpha)/evap."""
        k = self.params.kernel
        return self.n_ants * (k.eta + 8.0 / k.alpha) / k.evap

    def check_invariants(self) -> None:
        """Item conservation plus occupancy consistency; raises on breach."""
        if self.on_grid_count() + self.carried_count() != self.n_items:
            raise InternalError("item conservation violated")
        on_grid = np.flatnonzero(self.item_cell >= 0)
        cells = self.item_cell[on_grid]
        if len(set(cells.tolist())) != len(cells):
            raise InternalError("two items share a cell")
        if not np.array_equal(np.sort(self.grid.item_grid[cells]), np.sort(on_grid)):
            raise InternalError("item occupancy tables disagree")
        acells = self.ant_cell
        if len(set(acells.tolist())) != len(acells):
            raise InternalError("two agents share a cell")
        for a in range(self.n_ants):
            if self.grid.agent_grid[self.ant_cell[a]] != a:
                raise InternalError(f"agent {a} occupancy table disagrees")
        ph = self.grid.pheromone
        if not np.all(np.isfinite(ph)) or np.any(ph < 0):
            raise InternalError("pheromone field is negative or non-finite")

    def snapshot(self, patch_side: int = 8) -> Snapshot:
        placements = []
        for i in range(self.n_items):
            cell = int(self.item_cell[i])
            if cell >= 0:
                x, y = self.grid.coord(cell)
            else:
                x = y = None
            cls = int(self.classes[i]) if self.classes[i] >= 0 else None
            placements.append((int(self.ids[i]), x, y, ROLE_NAMES[self.roles[i]], cls))
        snap = Snapshot(
            t=self.t,
            width=self.grid.width,
            height=self.grid.height,
            placements=placements,
            entropy=0.0,
            pheromone_stats=(float(self.grid.pheromone.min()),
                             float(self.grid.pheromone.max()),
                             float(self.grid.pheromone.mean())),
        )
        snap.entropy = spatial_entropy(snap, patch_side=patch_side)
        return snap


def init_run(items: list[Item], grid: Grid, seed: int,
             n_ants: Optional[int] = None,
             params: Optional[SimParams] = None,
             place_items: Optional[Callable] = None) -> SimState:
    """Seeded initial state: items on distinct empty cells, ants on distinct
    cells with random headings, pheromone 0, t=0.

    `place_items(rng, grid, items) -> {item_id: (x, y)}` may pre-assign
    coordinates for a subset (zoned marker layouts); the rest are uniform.
    Ant count defaults to one tenth of the item count.
    """
    params = params or SimParams()
    params.validate()
    n = len(items)
    if n == 0:
        raise ConfigError("need at least one item")
    if n_ants is None:
        n_ants = max(1, round(n / 10))
    if n_ants < 0:
        raise ConfigError(f"n_ants must be >= 0, got {n_ants}")
    if grid.area < n + n_ants:
        raise ConfigError(
            f"grid {grid.width}x{grid.height} too small for {n} items + {n_ants} ants")

    state = SimState(grid, items, params, seed, n_ants)

    fixed = place_items(state.gen, grid, items) if place_items is not None else {}
    for item_id, coord in fixed.items():
        if item_id not in state.index_of_id:
            raise ConfigError(f"placer returned unknown item id {item_id}")
        i = state.index_of_id[item_id]
        grid.place_item(i, coord)
        state.item_cell[i] = grid.flat(coord)

    remaining = [i for i in range(n) if state.item_cell[i] < 0]
    if remaining:
        empty = np.flatnonzero(grid.item_grid < 0)
        chosen = state.gen.choice(empty, size=len(remaining), replace=False)
        for i, cell in zip(remaining, chosen):
            grid.item_grid[cell] = i
            state.item_cell[i] = cell

    if n_ants:
        cells = state.gen.choice(grid.area, size=n_ants, replace=False)
        headings = state.gen.integers(0, 8, size=n_ants)
        for a in range(n_ants):
            grid.agent_grid[cells[a]] = a
            state.ant_cell[a] = cells[a]
            state.ant_heading[a] = headings[a]

    return state


# -- per-ant operations (reference semantics) ------------------------------

def _neighbor_vote(state: SimState, cell: int, cand_index: int,
                   prob_fn) -> tuple[int, int]:
    """Count ring items and run one Bernoulli vote per neighbor, row-major.

    prob_fn(n, d) gives the per-neighbor success probability; a vote succeeds
    when the uniform draw is strictly below it (so probability 0 never fires).
    """
    nbr = state.grid.neighbor_table[cell]
    neigh = [int(state.grid.item_grid[nbr[s]]) for s in range(8)]
    present = [j for j in neigh if j >= 0]
    n = len(present)
    votes = 0
    if n:
        fi = state.features[cand_index]
        for j in present:
            d = normalized_distance(fi, state.features[j])
            p = prob_fn(n, d)
            if state._draw() < p:
                votes += 1
    return n, votes


def _majority(votes: int, n: int, rule: str) -> bool:
    if rule == "strict":
        return 2 * votes > n
    return 2 * votes >= n


def vote_pick(state: SimState, ant: int) -> bool:
    """Pick-up decision for an unladen ant standing on an item.

    Picks when the ring is empty, or when a majority of per-neighbor
    dissimilarity votes succeeds. On success the item leaves the grid.
    """
    cell = int(state.ant_cell[ant])
    if state.ant_item[ant] >= 0:
        raise InternalError(f"vote_pick called on laden ant {ant}")
    oi = int(state.grid.item_grid[cell])
    if oi < 0:
        raise InternalError(f"vote_pick called on empty cell for ant {ant}")
    k = state.params.kernel
    n, votes = _neighbor_vote(state, cell, oi,
                              lambda n_, d: pick_probability(n_, d, k))
    ok = n == 0 or _majority(votes, n, state.params.vote_rule)
    if ok:
        state.grid.item_grid[cell] = -1
        state.item_cell[oi] = -1
        state.ant_item[ant] = oi
    return ok


def vote_drop(state: SimState, ant: int) -> bool:
    """Drop decision for a laden ant on an item-free cell.

    Needs a majority of per-neighbor similarity votes; with the strict rule
    an empty ring never drops (0 votes of 0 is no majority).
    """
    cell = int(state.ant_cell[ant])
    oi = int(state.ant_item[ant])
    if oi < 0:
        raise InternalError(f"vote_drop called on unladen ant {ant}")
    if state.grid.item_grid[cell] >= 0:
        raise InternalError(f"vote_drop called on occupied cell for ant {ant}")
    k = state.params.kernel
    n, votes = _neighbor_vote(state, cell, oi,
                              lambda n_, d: drop_probability(n_, d, k))
    ok = _majority(votes, n, state.params.vote_rule)
    if ok:
        state.grid.item_grid[cell] = oi
        state.item_cell[oi] = cell
        state.ant_item[ant] = -1
    return ok


def move_agent(state: SimState, ant: int) -> GridCoord:
    """Move one cell, biased by pheromone and turn inertia.

    Candidates are the 8 Moore neighbors free of other agents (items do not
    block). Selection walks the unnormalized weights against one uniform
    draw; no free neighbor means the ant stays and keeps its heading.
    """
    grid = state.grid
    cell = int(state.ant_cell[ant])
    h = int(state.ant_heading[ant])
    nbr = grid.neighbor_table[cell]
    k = state.params.kernel
    tw = state.turn_weights

    weights = [-1.0] * 8
    total = 0.0
    count = 0
    for d8 in range(8):
        j = int(nbr[SLOT_OF_DIRECTION[d8]])
        if grid.agent_grid[j] >= 0:
            continue
        sigma = float(grid.pheromone[j])
        diff = (d8 - h) % 8
        units = diff if diff <= 4 else 8 - diff
        w = pheromone_weight(sigma, k) * tw[units]
        weights[d8] = w
        total += w
        count += 1

    if count == 0:
        return grid.coord(cell)

    threshold = state._draw() * total
    acc = 0.0
    chosen = -1
    last = -1
    for d8 in range(8):
        w = weights[d8]
        if w >= 0.0:
            acc += w
            last = d8
            if acc > threshold:
                chosen = d8
                break
    if chosen < 0:
        chosen = last

    new_cell = int(nbr[SLOT_OF_DIRECTION[chosen]])
    grid.agent_grid[cell] = -1
    grid.agent_grid[new_cell] = ant
    state.ant_cell[ant] = new_cell
    state.ant_heading[ant] = chosen
    return grid.coord(new_cell)


def deposit(state: SimState, r: GridCoord) -> None:
    """Add eta + n/alpha pheromone at r, n = ring item count there."""
    grid = state.grid
    cell = grid.flat(r)
    nbr = grid.neighbor_table[cell]
    n = 0
    for s in range(8):
        if grid.item_grid[nbr[s]] >= 0:
            n += 1
    k = state.params.kernel
    grid.pheromone[cell] += k.eta + n / k.alpha


def evaporate(state: SimState) -> None:
    """Multiply the whole field by (1 - evap); never goes negative."""
    keep = 1.0 - state.params.kernel.evap
    state.grid.pheromone *= keep


def step(state: SimState) -> SimState:
    """One sweep: per ant (ascending id) vote, move, deposit; then evaporate."""
    if state.t >= state.params.t_max:
        raise InternalError(f"step past t_max={state.params.t_max}")
    grid = state.grid
    for a in range(state.n_ants):
        cell = int(state.ant_cell[a])
        if state.ant_item[a] < 0:
            if grid.item_grid[cell] >= 0:
                vote_pick(state, a)
        elif grid.item_grid[cell] < 0:
            vote_drop(state, a)
        new_pos = move_agent(state, a)
        deposit(state, new_pos)
    evaporate(state)
    ph = grid.pheromone
    if not np.all(np.isfinite(ph)) or np.any(ph < 0):
        raise InternalError("pheromone field became negative or non-finite")
    state.t += 1
    return state


# -- whole-run driver -------------------------------------------------------

def geometric_schedule(t_max: int) -> list[int]:
    """0, 1, 10, 100, ... capped and completed by t_max itself."""
    points = {0, t_max}
    t = 1
    while t <= t_max:
        points.add(t)
        t *= 10
    return sorted(points)


def _advance_fast(state: SimState, t_target: int) -> None:
    grid = state.grid
    need = 9 * state.n_ants
    while state.t < t_target:
        if state._uniforms.size - state._upos < max(need, 1):
            state._refill()
        k = state.params.kernel
        t_new, upos, status = _fastloop.run_chunk(
            state.t, t_target, need,
            grid.item_grid, grid.agent_grid, grid.pheromone,
            grid.neighbor_table, np.array(SLOT_OF_DIRECTION, dtype=np.int64),
            state.turn_weights, state.features,
            state.item_cell, state.ant_cell, state.ant_heading, state.ant_item,
            k.beta, k.sensory, k.k1, k.k2, k.theta_items, k.steepness,
            k.eta, k.alpha, 1.0 - k.evap,
            1 if state.params.vote_rule == "strict" else 0,
            state._uniforms, state._upos,
        )
        state.t = int(t_new)
        state._upos = int(upos)
        if status == 2:
            raise InternalError("pheromone field became negative or non-finite")


def run(state: SimState,
        snapshot_schedule: Optional[Sequence[int]] = None,
        use_fast: bool = True,
        patch_side: int = 8) -> tuple[SimState, list[Snapshot]]:
    """Advance a fresh state to t_max, recording scheduled snapshots.

    The default schedule is geometric (0, 1, 10, ...) plus t_max. The run
    always reaches t_max even if the schedule stops earlier.
    """
    t_max = state.params.t_max
    if snapshot_schedule is None:
        schedule = geometric_schedule(t_max)
    else:
        schedule = sorted({int(t) for t in snapshot_schedule if 0 <= t <= t_max})
    snapshots = []
    for target in schedule:
        if target < state.t:
            continue
        _advance(state, target, use_fast)
        snapshots.append(state.snapshot(patch_side=patch_side))
    _advance(state, t_max, use_fast)
    return state, snapshots


def _advance(state: SimState, t_target: int, use_fast: bool) -> None:
    if use_fast:
        _advance_fast(state, t_target)
    else:
        while state.t < t_target:
            step(state)


def finalize_positions(state: SimState) -> SimState:
    """Force-drop items still carried at t_max onto the nearest free cells.

    Search expands Chebyshev rings around each carrier, scanning each ring's
    offsets row-major; ants are processed in ascending id order.
    """
    if state.t != state.params.t_max:
        raise InternalError(f"finalize at t={state.t}, expected t_max={state.params.t_max}")
    grid = state.grid
    for a in range(state.n_ants):
        oi = int(state.ant_item[a])
        if oi < 0:
            continue
        cx, cy = grid.coord(int(state.ant_cell[a]))
        target = None
        max_r = max(grid.width, grid.height)
        for r in range(max_r + 1):
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    if max(abs(dx), abs(dy)) != r:
                        continue
                    idx = grid.flat((cx + dx, cy + dy))
                    if grid.item_grid[idx] < 0:
                        target = idx
                        break
                if target is not None:
                    break
            if target is not None:
                break
        if target is None:
            raise InternalError("no free cell found for carried item")
        grid.item_grid[target] = oi
        state.item_cell[oi] = target
        state.ant_item[a] = -1
    return state
