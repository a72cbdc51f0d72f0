import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antclust.errors import ConfigError, InternalError
from antclust.habitat import (
    Grid,
    create_grid,
    neighborhood_items,
    toroidal_distance,
)

from helpers import tiled_distance

coords = st.tuples(st.integers(0, 80), st.integers(0, 80))
grid_dims = st.tuples(st.integers(3, 81), st.integers(3, 81))


class TestCreateGrid:
    def test_paper_sizing_800_items(self):
        grid = create_grid(800, override=(57, 57))
        assert (grid.width, grid.height) == (57, 57)
        # the auto heuristic lands on the same size
        auto = create_grid(800)
        assert (auto.width, auto.height) == (57, 57)

    def test_smallest_case(self):
        grid = create_grid(1)
        assert (grid.width, grid.height) == (2, 2)

    def test_full_ids_sizing(self):
        assert create_grid(11982).width == 219

    def test_starts_empty(self):
        grid = create_grid(10)
        assert np.all(grid.item_grid == -1)
        assert np.all(grid.agent_grid == -1)
        assert np.all(grid.pheromone == 0.0)

    @pytest.mark.parametrize("bad", [(0, 5), (5, 0), (-3, 4)])
    def test_bad_dimensions(self, bad):
        with pytest.raises(ConfigError):
            create_grid(10, override=bad)

    def test_zero_items(self):
        with pytest.raises(ConfigError):
            create_grid(0)


class TestNeighborhood:
    def test_empty_grid(self):
        grid = Grid(5, 5)
        assert neighborhood_items(grid, (2, 2)) == []

    def test_all_eight_neighbors(self):
        grid = Grid(5, 5)
        n = 0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx or dy:
                    grid.place_item(n, (2 + dx, 2 + dy))
                    n += 1
        found = neighborhood_items(grid, (2, 2))
        assert len(found) == 8

    def test_center_excluded(self):
        grid = Grid(5, 5)
        grid.place_item(0, (2, 2))
        assert neighborhood_items(grid, (2, 2)) == []

    def test_row_major_order_and_wrapping(self):
        grid = Grid(4, 4)
        grid.place_item(7, (3, 3))   # wraps to the NW of (0, 0)
        grid.place_item(9, (1, 0))   # E of (0, 0)
        found = neighborhood_items(grid, (0, 0))
        assert found == [((3, 3), 7), ((1, 0), 9)]


class TestToroidalDistance:
    def test_identical_points(self):
        assert toroidal_distance((3, 4), (3, 4), (57, 57)) == 0.0

    def test_wrap_across_edge(self):
        assert toroidal_distance((0, 0), (56, 0), (57, 57)) == 1.0

    def test_furthest_point(self):
        expected = math.sqrt(28 ** 2 + 28 ** 2)
        assert toroidal_distance((0, 0), (28, 28), (57, 57)) == pytest.approx(expected, abs=1e-12)

    @given(a=coords, b=coords, dims=grid_dims)
    def test_symmetry(self, a, b, dims):
        w, h = dims
        a = (a[0] % w, a[1] % h)
        b = (b[0] % w, b[1] % h)
        assert toroidal_distance(a, b, dims) == toroidal_distance(b, a, dims)

    @given(a=coords, b=coords, c=coords, dims=grid_dims)
    @settings(max_examples=300)
    def test_triangle_inequality(self, a, b, c, dims):
        w, h = dims
        a, b, c = [(p[0] % w, p[1] % h) for p in (a, b, c)]
        ab = toroidal_distance(a, b, dims)
        bc = toroidal_distance(b, c, dims)
        ac = toroidal_distance(a, c, dims)
        assert ac <= ab + bc + 1e-9

    def test_matches_virtual_window_oracle(self, rng):
        for _ in range(1000):
            w = int(rng.integers(2, 90))
            h = int(rng.integers(2, 90))
            a = (int(rng.integers(w)), int(rng.integers(h)))
            b = (int(rng.integers(w)), int(rng.integers(h)))
            assert toroidal_distance(a, b, (w, h)) == tiled_distance(a, b, (w, h))


class TestOccupancy:
    def test_single_item_per_cell(self):
        grid = Grid(3, 3)
        grid.place_item(0, (1, 1))
        with pytest.raises(InternalError):
            grid.place_item(1, (1, 1))

    def test_single_agent_per_cell(self):
        grid = Grid(3, 3)
        grid.place_agent(0, (1, 1))
        with pytest.raises(InternalError):
            grid.place_agent(1, (1, 1))
        grid.place_item(5, (1, 1))  # an item may share with an agent

    def test_place_remove_roundtrip(self, rng):
        grid = Grid(6, 6)
        occupied = {}
        for step in range(500):
            x, y = int(rng.integers(6)), int(rng.integers(6))
            if (x, y) in occupied:
                assert grid.remove_item((x, y)) == occupied.pop((x, y))
            else:
                grid.place_item(step, (x, y))
                occupied[(x, y)] = step
        on_grid = {int(v) for v in grid.item_grid if v >= 0}
        assert on_grid == set(occupied.values())

    def test_wrap_closure(self):
        grid = Grid(7, 5)
        assert grid.wrap(-1, -1) == (6, 4)
        assert grid.wrap(7, 5) == (0, 0)
        assert grid.coord(grid.flat((9, 9))) == (2, 4)
