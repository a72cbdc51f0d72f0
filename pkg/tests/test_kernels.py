import math

import pytest
from hypothesis import given, settings, strategies as st

from antclust.errors import ConfigError
from antclust.kernels import (
    KernelParams,
    MoveCandidate,
    crowding,
    direction_weight,
    drop_probability,
    normalized_distance,
    pheromone_weight,
    pick_probability,
    threshold_response,
    transition_distribution,
)

P = KernelParams()

unit = st.floats(0.0, 1.0, allow_nan=False)
sigmas = st.floats(0.0, 1e6, allow_nan=False)
counts = st.integers(0, 8)


class TestParams:
    def test_defaults_valid(self):
        P.validate()

    @pytest.mark.parametrize("field,value", [
        ("evap", 0.0), ("evap", 1.0), ("evap", -0.1),
        ("steepness", 1.0), ("steepness", 0.5),
        ("beta", 0.0), ("k1", -1.0), ("alpha", 0.0),
    ])
    def test_rejects_bad_values(self, field, value):
        with pytest.raises(ConfigError):
            KernelParams(**{field: value}).validate()


class TestPheromoneWeight:
    def test_zero_density(self):
        assert pheromone_weight(0.0, P) == 1.0

    def test_unit_density(self):
        expected = (1.0 + 1.0 / 1.2) ** 3.5  # direct evaluation
        assert pheromone_weight(1.0, P) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(8.34344, abs=5e-6)

    def test_saturation_limit(self):
        ceiling = (1.0 + 1.0 / P.sensory) ** P.beta  # analytic sigma -> inf limit
        assert ceiling == pytest.approx(6.0 ** 3.5, abs=1e-9)
        assert pheromone_weight(1e12, P) == pytest.approx(ceiling, rel=1e-9)
        assert pheromone_weight(1e12, P) <= ceiling

    @given(a=sigmas, b=sigmas)
    def test_monotone_nondecreasing(self, a, b):
        lo, hi = sorted((a, b))
        assert pheromone_weight(lo, P) <= pheromone_weight(hi, P)

    def test_rejects_negative(self):
        with pytest.raises(ConfigError):
            pheromone_weight(-0.1, P)


class TestDirectionWeight:
    def test_forward_is_unweighted(self):
        assert direction_weight(0, P) == 1.0

    def test_right_angle(self):
        assert direction_weight(90, P) == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_reversal(self):
        assert direction_weight(180, P) == pytest.approx(math.exp(-2.0), abs=1e-15)

    def test_symmetric_and_decreasing(self):
        mags = [0, 45, 90, 135, 180]
        values = [direction_weight(t, P) for t in mags]
        assert all(a > b for a, b in zip(values, values[1:]))
        for t in mags[1:]:
            assert direction_weight(-t, P) == direction_weight(t, P)

    def test_rejects_off_lattice(self):
        with pytest.raises(ConfigError):
            direction_weight(30, P)


class TestTransitionDistribution:
    def test_single_candidate(self):
        probs = transition_distribution([MoveCandidate((0, 0), 2.0, 45)], P)
        assert probs == [1.0]

    def test_symmetric_candidates_uniform(self):
        cands = [MoveCandidate((i, 0), 0.7, 90) for i in range(5)]
        probs = transition_distribution(cands, P)
        assert all(p == pytest.approx(0.2, abs=1e-12) for p in probs)

    def test_pheromone_biases_choice(self):
        cands = [MoveCandidate((0, 0), 0.0, 0), MoveCandidate((1, 0), 1.0, 0)]
        w1 = pheromone_weight(1.0, P)
        p0, p1 = transition_distribution(cands, P)
        assert p0 == pytest.approx(1.0 / (1.0 + w1), abs=1e-12)
        assert p1 == pytest.approx(w1 / (1.0 + w1), abs=1e-12)
        assert p0 == pytest.approx(0.107, abs=5e-4)

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            transition_distribution([], P)

    @given(st.lists(st.tuples(sigmas, st.sampled_from([0, 45, 90, 135, 180])),
                    min_size=1, max_size=8))
    @settings(max_examples=300)
    def test_sums_to_one(self, raw):
        cands = [MoveCandidate((i, 0), s, t) for i, (s, t) in enumerate(raw)]
        probs = transition_distribution(cands, P)
        assert abs(sum(probs) - 1.0) < 1e-12
        assert all(0.0 < p <= 1.0 for p in probs)


class TestThresholdResponse:
    def test_zero_stimulus(self):
        assert threshold_response(0.0, 5.0) == 0.0

    def test_half_response_at_theta(self):
        assert threshold_response(5.0, 5.0) == pytest.approx(0.5, abs=1e-12)
        assert threshold_response(0.37, 0.37) == pytest.approx(0.5, abs=1e-12)

    def test_double_theta(self):
        assert threshold_response(2.0, 1.0, steepness=2.0) == pytest.approx(0.8, abs=1e-12)

    def test_rejects_nonpositive_theta(self):
        with pytest.raises(ConfigError):
            threshold_response(1.0, 0.0)


class TestCrowding:
    def test_empty_ring(self):
        assert crowding(0, P) == 0.0

    def test_half_at_five(self):
        assert crowding(5, P) == pytest.approx(0.5, abs=1e-12)

    def test_full_ring(self):
        assert crowding(8, P) == pytest.approx(64.0 / 89.0, abs=1e-12)

    def test_strictly_increasing(self):
        vals = [crowding(n, P) for n in range(9)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert all(0.0 <= v < 1.0 for v in vals)

    def test_rejects_negative(self):
        with pytest.raises(ConfigError):
            crowding(-1, P)

    def test_matches_general_threshold(self):
        for n in range(9):
            assert crowding(n, P) == threshold_response(float(n), 5.0, 2.0)


class TestNormalizedDistance:
    def test_identical_vectors(self):
        assert normalized_distance((0.2, 0.9), (0.2, 0.9)) == 0.0

    def test_maximal_separation(self):
        assert normalized_distance((0.0, 0.0), (1.0, 1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_three_feature_example(self):
        d = normalized_distance((0.2, 0.4, 0.6), (0.2, 0.1, 0.6))
        assert d == pytest.approx(math.sqrt(0.09 / 3.0), abs=1e-12)
        assert d == pytest.approx(0.17321, abs=5e-6)

    @given(st.lists(unit, min_size=1, max_size=41), st.data())
    def test_stays_in_unit_interval(self, fa, data):
        fb = data.draw(st.lists(unit, min_size=len(fa), max_size=len(fa)))
        d = normalized_distance(fa, fb)
        assert 0.0 <= d <= 1.0
        assert d == normalized_distance(fb, fa)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ConfigError):
            normalized_distance((0.1,), (0.1, 0.2))


class TestPickDropProbabilities:
    def test_pick_zero_distance_never(self):
        for n in range(9):
            assert pick_probability(n, 0.0, P) == 0.0

    def test_pick_empty_ring(self):
        assert pick_probability(0, 0.3, P) == pytest.approx(0.25, abs=1e-12)

    def test_pick_crowded_far(self):
        expected = 0.5 * (1.0 / 1.3) ** 2
        assert pick_probability(5, 1.0, P) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.2959, abs=5e-5)

    def test_drop_empty_ring_never(self):
        for d in (0.0, 0.3, 1.0):
            assert drop_probability(0, d, P) == 0.0

    def test_drop_identical_at_half_crowding(self):
        assert drop_probability(5, 0.0, P) == pytest.approx(0.5, abs=1e-12)

    def test_drop_at_k1(self):
        assert drop_probability(5, 0.1, P) == pytest.approx(0.125, abs=1e-12)

    def test_similarity_anchors(self):
        # delta(k1) and epsilon(k2) both equal 1/4 by construction
        assert 2.0 * drop_probability(5, P.k1, P) == pytest.approx(0.25, abs=1e-12)
        assert pick_probability(0, P.k2, P) == pytest.approx(0.25, abs=1e-12)

    @given(n=counts, d=unit)
    def test_ranges(self, n, d):
        assert 0.0 <= pick_probability(n, d, P) <= 1.0
        assert 0.0 <= drop_probability(n, d, P) <= 1.0

    @given(d=unit)
    def test_pick_decreasing_in_crowding(self, d):
        vals = [pick_probability(n, d, P) for n in range(9)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    @given(n=counts, a=unit, b=unit)
    def test_monotone_in_distance(self, n, a, b):
        lo, hi = sorted((a, b))
        assert pick_probability(n, lo, P) <= pick_probability(n, hi, P)
        assert drop_probability(n, lo, P) >= drop_probability(n, hi, P)

    def test_rejects_out_of_range_distance(self):
        with pytest.raises(ConfigError):
            pick_probability(1, 1.5, P)
        with pytest.raises(ConfigError):
            drop_probability(1, -0.1, P)

    def test_purity(self):
        args = (3, 0.377)
        assert pick_probability(*args, P) == pick_probability(*args, P)
        assert drop_probability(*args, P) == drop_probability(*args, P)
        assert pheromone_weight(2.71, P) == pheromone_weight(2.71, P)
