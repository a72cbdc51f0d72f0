"""Compiled inner loop for long runs.

This is a mechanical transliteration of the reference operations in engine.py
(vote_pick / vote_drop / move_agent / deposit / evaporate) over flat arrays.
Formula shapes, neighbor iteration order and uniform-draw order match the
reference exactly so that both paths yield bit-identical trajectories; the
test suite asserts that equivalence. Keep the two files in lockstep.

Status codes: 0 = reached t_stop, 1 = uniform buffer exhausted (refill and
call again), 2 = pheromone field went negative or non-finite.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def run_chunk(t, t_stop, need,
              item_grid, agent_grid, pheromone,
              neighbor_table, slot_of_dir, turn_weights, features,
              item_cell, ant_cell, ant_heading, ant_item,
              beta, sensory, k1, k2, theta_items, steepness,
              eta, alpha, keep, strict,
              uniforms, upos):
    n_ants = ant_cell.shape[0]
    n_feat = features.shape[1]
    n_cells = pheromone.shape[0]
    theta_pow = theta_items ** steepness
    weights = np.empty(8, dtype=np.float64)

    while t < t_stop:
        if uniforms.shape[0] - upos < need:
            return t, upos, 1

        for a in range(n_ants):
            cell = ant_cell[a]
            carrying = ant_item[a]

            if carrying < 0 and item_grid[cell] >= 0:
                # pick-up vote for the item underfoot
                oi = item_grid[cell]
                n = 0
                for s in range(8):
                    if item_grid[neighbor_table[cell, s]] >= 0:
                        n += 1
                if n == 0:
                    picked = True
                else:
                    sn = (n * 1.0) ** steepness
                    chi = sn / (sn + theta_pow)
                    votes = 0
                    for s in range(8):
                        oj = item_grid[neighbor_table[cell, s]]
                        if oj >= 0:
                            acc = 0.0
                            for f in range(n_feat):
                                diff = features[oi, f] - features[oj, f]
                                acc += diff * diff
                            d = np.sqrt(acc / n_feat)
                            p = (1.0 - chi) * (d / (k2 + d)) ** 2.0
                            u = uniforms[upos]
                            upos += 1
                            if u < p:
                                votes += 1
                    if strict == 1:
                        picked = 2 * votes > n
                    else:
                        picked = 2 * votes >= n
                if picked:
                    item_grid[cell] = -1
                    item_cell[oi] = -1
                    ant_item[a] = oi

            elif carrying >= 0 and item_grid[cell] < 0:
                # drop vote for the carried item
                n = 0
                for s in range(8):
                    if item_grid[neighbor_table[cell, s]] >= 0:
                        n += 1
                votes = 0
                if n > 0:
                    sn = (n * 1.0) ** steepness
                    chi = sn / (sn + theta_pow)
                    for s in range(8):
                        oj = item_grid[neighbor_table[cell, s]]
                        if oj >= 0:
                            acc = 0.0
                            for f in range(n_feat):
                                diff = features[carrying, f] - features[oj, f]
                                acc += diff * diff
                            d = np.sqrt(acc / n_feat)
                            p = chi * (k1 / (k1 + d)) ** 2.0
                            u = uniforms[upos]
                            upos += 1
                            if u < p:
                                votes += 1
                if strict == 1:
                    dropped = 2 * votes > n
                else:
                    dropped = 2 * votes >= n
                if dropped:
                    item_grid[cell] = carrying
                    item_cell[carrying] = cell
                    ant_item[a] = -1

            # movement over agent-free Moore neighbors
            h = ant_heading[a]
            total = 0.0
            count = 0
            for d8 in range(8):
                j = neighbor_table[cell, slot_of_dir[d8]]
                if agent_grid[j] >= 0:
                    weights[d8] = -1.0
                else:
                    sigma = pheromone[j]
                    diff8 = (d8 - h) % 8
                    units = diff8 if diff8 <= 4 else 8 - diff8
                    w = (1.0 + sigma / (1.0 + sensory * sigma)) ** beta * turn_weights[units]
                    weights[d8] = w
                    total += w
                    count += 1
            if count > 0:
                threshold = uniforms[upos] * total
                upos += 1
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
                new_cell = neighbor_table[cell, slot_of_dir[chosen]]
                agent_grid[cell] = -1
                agent_grid[new_cell] = a
                ant_cell[a] = new_cell
                ant_heading[a] = np.int8(chosen)
                cell = new_cell

            # deposit at the post-move cell
            n2 = 0
            for s in range(8):
                if item_grid[neighbor_table[cell, s]] >= 0:
                    n2 += 1
            pheromone[cell] += eta + n2 / alpha

        # global evaporation with field sanity check
        for i in range(n_cells):
            p = pheromone[i] * keep
            if not np.isfinite(p) or p < 0.0:
                return t, upos, 2
            pheromone[i] = p
        t += 1

    return t, upos, 0
