#!/usr/bin/env python3
"""
Tests for the dynamics service on the tent map, the identity and the branch rotation
"""

import math

import pytest

from src.services.dendrite import DPoint, random_dendrite
from src.services.dynamics import (
    DendriteMap, classify_pair, compose, entropy_estimate, fixed_points, nested_arc_search,
    omega_limit, orbit, periodic_points, power, preimages, random_map, trajectory,
)
from src.services.errors import ConfigurationError, DomainError


class TestMaps:

    def test_tent_midpoint(self, tent):
        X = tent.dendrite
        assert tent(X.point(0, 0.5)) == DPoint.at(1)
        assert tent(DPoint.at(1)) == DPoint.at(2)

    def test_tent_is_linear_on_laps(self, tent):
        X = tent.dendrite
        # distance from v0 doubles on the left half
        p = X.point(0, 0.3)
        assert X.distance(DPoint.at(0), tent(p)) == pytest.approx(2 * X.distance(DPoint.at(0), p))

    def test_lipschitz(self, tent, rotation, identity):
        assert tent.lipschitz() == pytest.approx(2.0)
        assert rotation.lipschitz() == pytest.approx(1.0)
        assert identity.lipschitz() == pytest.approx(1.0)

    def test_compose_and_power(self, tent, rotation):
        assert compose(tent, tent).lipschitz() == pytest.approx(4.0)
        cube = power(rotation, 3)
        assert list(cube.vertex_images) == [DPoint.at(v) for v in range(4)]
        X = rotation.dendrite
        p = X.point(1, 0.25)
        assert X.same_point(cube(p), p)

    def test_power_rejects_negative(self, tent):
        with pytest.raises(DomainError):
            power(tent, -1)

    def test_image_of_left_half(self, tent):
        X = tent.dendrite
        left, _ = X.arc(DPoint.at(0), DPoint.at(1))
        assert tent.image(left) == X.whole()

    def test_missing_vertex_image(self, star3):
        with pytest.raises(DomainError):
            DendriteMap(star3, [DPoint.at(0)])

    def test_subdivision_position(self, star3):
        images = [DPoint.at(v) for v in range(4)]
        with pytest.raises(DomainError):
            DendriteMap(star3, images, [(0, 1.0, DPoint.at(0))])

    def test_to_dict_roundtrip_shape(self, rotation):
        data = rotation.to_dict()
        assert data["vertex_images"]["1"] == [2]
        assert data["subdivisions"] == []


class TestFixedAndPeriodic:

    def test_tent_fixed_points(self, tent):
        result = fixed_points(tent)
        assert result.points[0] == DPoint.at(0)
        assert result.points[1].edge == 1
        assert result.points[1].t == pytest.approx(1 / 3)
        assert len(result.points) == 2
        assert not result.entire_space

    def test_identity_fixes_everything(self, identity):
        assert fixed_points(identity).entire_space

    def test_rotation_fixes_hub_only(self, rotation):
        assert fixed_points(rotation).points == [DPoint.at(0)]

    def test_tent_periods(self, tent):
        periods = [period for _, period in periodic_points(tent, 2)]
        assert periods == [1, 1, 2, 2]

    def test_rotation_periods(self, rotation):
        found = periodic_points(rotation, 3)
        assert (DPoint.at(0), 1) in found
        assert all(period == 3 for p, period in found if p != DPoint.at(0))

    def test_max_period_validation(self, tent):
        with pytest.raises(DomainError):
            periodic_points(tent, 0)

    def test_tent_preimages(self, tent):
        assert preimages(tent, DPoint.at(0), 1).points == [DPoint.at(0), DPoint.at(2)]
        deeper = preimages(tent, DPoint.at(0), 2).points
        assert DPoint.at(1) in deeper

    def test_preimage_depth_validation(self, tent):
        with pytest.raises(DomainError):
            preimages(tent, DPoint.at(0), -1)

    @pytest.mark.parametrize("size", [2, 5, 9])
    def test_random_maps_have_fixed_points(self, size):
        X = random_dendrite(size, seed=size)
        for seed in range(200):
            f = random_map(X, seed=seed)
            result = fixed_points(f)
            assert result.entire_space or result.points or result.segments, f"seed {seed}"
            for p in result.points:
                assert X.distance(f.eval(p), p) < 1e-6

    def test_depth_zero_preimages(self, tent):
        assert preimages(tent, DPoint.at(1), 0).points == [DPoint.at(1)]

    def test_preimages_of_midpoint(self, tent):
        X = tent.dendrite
        found = preimages(tent, DPoint.at(1), 1).points
        assert len(found) == 3
        for expected in (X.point(0, 0.5), DPoint.at(1), X.point(1, 0.5)):
            assert any(X.same_point(p, expected) for p in found)

    def test_preimages_grow_with_depth(self, tent):
        X = tent.dendrite
        previous = preimages(tent, DPoint.at(1), 0).points
        for depth in range(1, 5):
            current = preimages(tent, DPoint.at(1), depth).points
            assert all(any(X.same_point(p, q) for q in current) for p in previous)
            assert len(current) > len(previous)
            previous = current


class TestOrbits:

    def test_rotation_orbit(self, rotation):
        assert orbit(rotation, DPoint.at(1), 3) == [DPoint.at(1), DPoint.at(2), DPoint.at(3), DPoint.at(1)]

    def test_trajectory_stores_one_cycle(self, rotation):
        path = trajectory(rotation, DPoint.at(1), 1000)
        assert (path.preperiod, path.period) == (0, 3)
        assert len(path.points) == 3
        assert path.point(1000) == DPoint.at(2)
        assert list(path.indices(5)) == [0, 1, 2, 0, 1, 2]

    def test_tent_preperiod(self, tent):
        path = trajectory(tent, DPoint.at(1), 50)
        assert (path.preperiod, path.period) == (2, 1)
        assert path.point(50) == DPoint.at(0)

    def test_negative_N(self, tent):
        with pytest.raises(DomainError):
            trajectory(tent, DPoint.at(0), -1)

    def test_orbit_matches_iterated_eval(self, tent):
        X = tent.dendrite
        p = X.point(0, 0.3)
        expected = [p]
        for _ in range(12):
            expected.append(tent.eval(expected[-1]))
        for got, want in zip(orbit(tent, p, 12), expected):
            assert X.distance(got, want) < 1e-9

    def test_omega_of_rotation(self, rotation):
        result = omega_limit(rotation, DPoint.at(1), B=10, M=20, eps=1e-3)
        assert len(result.points) == 3
        assert result.finite_cycle and result.period == 3

    @pytest.mark.parametrize("B,M", [(0, 10), (10, 0)])
    def test_omega_validation(self, rotation, B, M):
        with pytest.raises(DomainError):
            omega_limit(rotation, DPoint.at(1), B=B, M=M)


class TestPairs:

    def test_asymptotic_pair(self, tent):
        result = classify_pair(tent, DPoint.at(0), DPoint.at(2), horizon=20, delta_prox=0.01, delta_asym=0.01)
        assert result.label == "asymptotic"

    def test_rotation_pair_is_neither(self, rotation):
        result = classify_pair(rotation, DPoint.at(1), DPoint.at(2), horizon=30, delta_prox=0.5, delta_asym=0.5)
        assert result.label == "neither"
        assert result.min_distance == pytest.approx(2.0)

    def test_thresholds_validated(self, rotation):
        with pytest.raises(DomainError):
            classify_pair(rotation, DPoint.at(1), DPoint.at(2), horizon=10, delta_prox=0.0, delta_asym=0.5)

    @pytest.mark.parametrize("x,y", [((0, 0.2), (1, 0.7)), ((0, 0.9), (0, 0.1)), ((1, 0.4), (1, 0.45))])
    def test_classification_is_symmetric(self, tent, x, y):
        X = tent.dendrite
        p, q = X.point(*x), X.point(*y)
        forward = classify_pair(tent, p, q, horizon=40, delta_prox=0.05, delta_asym=0.05)
        backward = classify_pair(tent, q, p, horizon=40, delta_prox=0.05, delta_asym=0.05)
        assert forward.label == backward.label
        assert forward.min_distance == pytest.approx(backward.min_distance)
        assert forward.tail_separations == backward.tail_separations

    def test_nested_arc_found(self, rotation):
        X = rotation.dendrite
        result = nested_arc_search(rotation, DPoint.at(0), X.point(0, 0.5), DPoint.at(1), horizon=6)
        assert result.found and (result.k, result.p) == (0, 0)

    def test_nested_arc_not_found(self, rotation):
        X = rotation.dendrite
        result = nested_arc_search(rotation, DPoint.at(0), DPoint.at(1), X.point(1, 0.5), horizon=6)
        assert not result.found


class TestEntropy:

    def test_identity_has_zero_entropy(self, identity):
        assert entropy_estimate(identity, eps=0.1, n_max=4).estimate == 0.0

    def test_rotation_has_zero_entropy(self, rotation):
        result = entropy_estimate(rotation, eps=0.1, n_max=6)
        assert result.estimate == 0.0
        assert len(result.table) == 6

    def test_tent_near_log2(self, tent):
        result = entropy_estimate(tent, eps=0.05, n_max=8)
        assert abs(result.estimate - math.log(2)) < 0.2
        assert not result.capped

    def test_coarse_grid_rejected(self, tent):
        with pytest.raises(ConfigurationError):
            entropy_estimate(tent, eps=0.05, n_max=4, grid_density=3.0)

    @pytest.mark.parametrize("eps,n_max", [(0.0, 4), (0.1, 1)])
    def test_domain_checks(self, tent, eps, n_max):
        with pytest.raises(DomainError):
            entropy_estimate(tent, eps=eps, n_max=n_max)

    def test_sample_table(self, tent):
        X = tent.dendrite
        points = X.grid(0.002)
        result = entropy_estimate(tent, eps=0.05, n_max=6, points=points)
        assert [row["grid_size"] for row in result.table] == [len(points)] * 6
        separated = [row["separated"] for row in result.table]
        assert separated[-1] > separated[0]
        assert separated[-1] <= len(points)
        assert result.estimate > 0.0

    def test_sample_on_identity(self, identity):
        points = identity.dendrite.grid(0.05)
        assert entropy_estimate(identity, eps=0.1, n_max=4, points=points).estimate == 0.0

    def test_empty_sample(self, tent):
        with pytest.raises(DomainError):
            entropy_estimate(tent, eps=0.05, n_max=4, points=[])
