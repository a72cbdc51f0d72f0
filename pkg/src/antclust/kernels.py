"""Pure closed-form kernels: movement weights, response thresholds, distances.

Every function here is deterministic and side-effect free; identical inputs
give bit-identical outputs. The fast simulation loop inlines these exact
formulas, so any change here must be mirrored in _fastloop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError
from .habitat import GridCoord

LATTICE_TURNS = (0, 45, 90, 135, 180, -45, -90, -135, -180)


@dataclass(frozen=True)
class KernelParams:
    """Movement and pick/drop constants.

    Defaults are the experiment values: k1=0.1, k2=0.3, evaporation 0.015,
    base deposit 0.07, deposit divisor 400, osmotropotaxic sensitivity 3.5,
    sensory capacity parameter 0.2. The direction falloff and the crowding
    threshold/steepness are interpretation knobs with stated defaults.
    """

    beta: float = 3.5            # osmotropotaxic sensitivity b
    sensory: float = 0.2         # sensory capacity parameter (1/sensory saturates perception)
    k1: float = 0.1              # drop similarity scale
    k2: float = 0.3              # pick similarity scale
    theta_items: float = 5.0     # crowding threshold (item count at half response)
    steepness: float = 2.0       # threshold exponent, must stay > 1
    eta: float = 0.07            # base pheromone deposit per step
    alpha: float = 400.0         # deposit divisor for the item-count bonus
    evap: float = 0.015          # multiplicative evaporation rate per step
    direction_falloff: float = 1.0  # decay constant of the turn-angle weight

    def validate(self) -> None:
        for name in ("beta", "sensory", "k1", "k2", "theta_items",
                     "steepness", "eta", "alpha", "evap", "direction_falloff"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"kernel parameter {name} must be finite and > 0, got {v!r}")
        if not 0.0 < self.evap < 1.0:
            raise ConfigError(f"evap must lie in (0,1), got {self.evap}")
        if self.steepness <= 1.0:
            raise ConfigError(f"steepness must exceed 1, got {self.steepness}")


@dataclass(frozen=True)
class MoveCandidate:
    """One admissible move: target cell, its pheromone level, turn angle."""

    target: GridCoord
    pheromone: float
    turn: int  # degrees, one of 0, +-45, +-90, +-135, +-180

    def __post_init__(self):
        if self.turn not in LATTICE_TURNS:
            raise ConfigError(f"turn {self.turn} is not a lattice angle")


def pheromone_weight(sigma: float, params: KernelParams) -> float:
    """Relative appeal of a cell with pheromone density sigma.

    W(sigma) = (1 + sigma/(1 + sensory*sigma))^beta. Equals 1 at sigma=0 and
    saturates at (1 + 1/sensory)^beta: perception dulls at high concentration.
    """
    if sigma < 0:
        raise ConfigError(f"pheromone density must be >= 0, got {sigma}")
    return (1.0 + sigma / (1.0 + params.sensory * sigma)) ** params.beta


def direction_weight(turn: int, params: KernelParams) -> float:
    """Inertia weight for a change of heading, 1 at 0 degrees, decreasing.

    Stand-in kernel exp(-falloff * |turn| / 90); any strictly decreasing
    symmetric form preserves the qualitative motion, so the falloff is a
    parameter rather than a constant.
    """
    if turn not in LATTICE_TURNS:
        raise ConfigError(f"turn {turn} is not a lattice angle")
    return math.exp(-params.direction_falloff * abs(turn) / 90.0)


def transition_distribution(candidates: Sequence[MoveCandidate],
                            params: KernelParams) -> list[float]:
    """Normalized move probabilities over the candidate cells.

    P_i = W(sigma_i) w(turn_i) / sum_j W(sigma_j) w(turn_j).
    """
    if not candidates:
        raise ConfigError("transition_distribution requires at least one candidate")
    weights = [pheromone_weight(c.pheromone, params) * direction_weight(c.turn, params)
               for c in candidates]
    total = 0.0
    for w in weights:
        total += w
    return [w / total for w in weights]


def threshold_response(s: float, theta: float, steepness: float = 2.0) -> float:
    """Probability of engaging a task under stimulus s: s^n / (s^n + theta^n)."""
    if theta <= 0:
        raise ConfigError(f"theta must be > 0, got {theta}")
    if s < 0:
        raise ConfigError(f"stimulus must be >= 0, got {s}")
    sn = s ** steepness
    return sn / (sn + theta ** steepness)


def crowding(n: int, params: KernelParams) -> float:
    """Response to the count of items in the Moore ring; 0.5 at n = theta_items."""
    if n < 0:
        raise ConfigError(f"item count must be >= 0, got {n}")
    return threshold_response(float(n), params.theta_items, params.steepness)


def normalized_distance(fa: Sequence[float], fb: Sequence[float],
                        d_max: float = 1.0) -> float:
    """Dimension-normalized Euclidean feature distance in [0, 1].

    d = (1/d_max) * sqrt(mean((fa_i - fb_i)^2)). With unit-interval features
    and d_max=1 the value cannot exceed 1. Accumulation is plain left-to-right
    so the fast loop reproduces it bit for bit.
    """
    nf = len(fa)
    if len(fb) != nf:
        raise ConfigError(f"feature length mismatch: {nf} vs {len(fb)}")
    if d_max <= 0:
        raise ConfigError(f"d_max must be > 0, got {d_max}")
    acc = 0.0
    for i in range(nf):
        diff = fa[i] - fb[i]
        acc += diff * diff
    return math.sqrt(acc / nf) / d_max


def _pick_similarity(d: float, params: KernelParams) -> float:
    return (d / (params.k2 + d)) ** 2


def _drop_similarity(d: float, params: KernelParams) -> float:
    return (params.k1 / (params.k1 + d)) ** 2


def pick_probability(n: int, d: float, params: KernelParams) -> float:
    """Chance one neighbor votes to pick up: sparse and dissimilar favor picking.

    P_p = (1 - crowding(n)) * (d/(k2+d))^2. Zero at d=0, so an item identical
    to its neighborhood is never lifted.
    """
    if not 0.0 <= d <= 1.0:
        raise ConfigError(f"normalized distance must lie in [0,1], got {d}")
    return (1.0 - crowding(n, params)) * _pick_similarity(d, params)


def drop_probability(n: int, d: float, params: KernelParams) -> float:
    """Chance one neighbor votes to drop: crowded and similar favor dropping.

    P_d = crowding(n) * (k1/(k1+d))^2. Zero when the ring is empty.
    """
    if not 0.0 <= d <= 1.0:
        raise ConfigError(f"normalized distance must lie in [0,1], got {d}")
    return crowding(n, params) * _drop_similarity(d, params)
