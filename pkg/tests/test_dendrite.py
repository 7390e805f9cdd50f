#!/usr/bin/env python3
"""
Tests for the dendrite core service: validation, distances, arcs, first point
maps, hulls and complements
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.services.dendrite import Dendrite, DPoint, point_key, random_dendrite, random_point
from src.services.errors import DendriteFormatError, DomainError


class TestValidation:

    def test_edges_are_canonicalized(self):
        X = Dendrite(3, [(2, 1, 1.0), (1, 0, 0.5)])
        assert X.edges == ((0, 1, 0.5), (1, 2, 1.0))
        assert X.edge_id(2, 1) == 1

    def test_cycle_names_the_edge(self):
        with pytest.raises(DendriteFormatError) as err:
            Dendrite(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])
        assert err.value.edge == (0, 2, 1.0)
        assert err.value.to_dict()["edge"] == [0, 2, 1.0]

    def test_disconnected_tree(self):
        with pytest.raises(DendriteFormatError):
            Dendrite(3, [(0, 1, 1.0)])

    @pytest.mark.parametrize("length", [0.0, -1.0, math.inf])
    def test_bad_length(self, length):
        with pytest.raises(DendriteFormatError):
            Dendrite(2, [(0, 1, length)])

    def test_single_vertex(self):
        X = Dendrite(1, [])
        assert X.n_edges == 0
        assert X.diameter() == 0.0

    def test_interior_point_needs_open_position(self):
        with pytest.raises(DomainError):
            DPoint(edge=0, t=1.0)

    def test_point_snaps_to_vertex(self, star3):
        assert star3.point(0, 1e-12) == DPoint.at(0)
        assert star3.point(0, 1.0) == DPoint.at(1)


class TestDistances:

    def test_star_distances(self, star3):
        assert star3.distance(DPoint.at(1), DPoint.at(2)) == pytest.approx(2.0)
        assert star3.distance(star3.point(0, 0.5), star3.point(1, 0.5)) == pytest.approx(1.0)
        assert star3.distance(star3.point(0, 0.25), star3.point(0, 0.75)) == pytest.approx(0.5)

    def test_pairwise_matches_scalar(self, star3):
        points = [DPoint.at(1), star3.point(1, 0.3), star3.point(2, 0.9), DPoint.at(0)]
        D = star3.pairwise_distances(points, points)
        for i, p in enumerate(points):
            for j, q in enumerate(points):
                assert D[i, j] == pytest.approx(star3.distance(p, q))

    def test_hausdorff(self, star3):
        assert star3.hausdorff([DPoint.at(1)], [DPoint.at(1), DPoint.at(0)]) == pytest.approx(1.0)
        assert star3.hausdorff([], []) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 25))
    def test_metric_axioms(self, seed, n):
        X = random_dendrite(n, seed=seed)
        rng = np.random.default_rng(seed)
        x, y, z = (random_point(X, rng) for _ in range(3))
        assert X.distance(x, x) == 0.0
        assert X.distance(x, y) == pytest.approx(X.distance(y, x), abs=1e-12)
        assert X.distance(x, z) <= X.distance(x, y) + X.distance(y, z) + 1e-12


class TestArcsAndHulls:

    def test_arc_through_hub(self, star3):
        arc, length = star3.arc(DPoint.at(1), DPoint.at(2))
        assert length == pytest.approx(2.0)
        assert arc.contains(DPoint.at(0))
        assert not arc.contains(DPoint.at(3))

    def test_point_along(self, star3):
        mid = star3.point_along(DPoint.at(1), DPoint.at(2), 0.5)
        assert star3.same_point(mid, DPoint.at(0))

    def test_first_point_map_gate(self, star3):
        Y, _ = star3.arc(DPoint.at(1), DPoint.at(2))
        assert star3.first_point_map(Y, DPoint.at(3)) == DPoint.at(0)
        assert star3.first_point_map(Y, star3.point(0, 0.4)) == star3.point(0, 0.4)

    def test_hull_of_leaves_is_whole(self, star3):
        Y = star3.convex_hull([DPoint.at(1), DPoint.at(2), DPoint.at(3)])
        assert Y == star3.whole()
        assert sorted(point_key(p) for p in star3.endpoints(Y)) == [("v", 1), ("v", 2), ("v", 3)]

    def test_empty_hull_rejected(self, star3):
        with pytest.raises(DomainError):
            star3.convex_hull([])

    def test_intersect_and_join(self, star3):
        A, _ = star3.arc(DPoint.at(1), DPoint.at(2))
        B, _ = star3.arc(DPoint.at(2), DPoint.at(3))
        common = star3.intersect(A, B)
        assert star3.length(common) == pytest.approx(1.0)
        assert star3.join(A, B) == star3.whole()

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 25), k=st.integers(1, 5))
    def test_first_point_map_is_idempotent(self, seed, n, k):
        X = random_dendrite(n, seed=seed)
        rng = np.random.default_rng(seed + 1)
        Y = X.convex_hull([random_point(X, rng) for _ in range(k)])
        x = random_point(X, rng)
        r = X.first_point_map(Y, x)
        assert X.contains(Y, r)
        assert X.same_point(X.first_point_map(Y, r), r)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 25), k=st.integers(1, 6))
    def test_hull_endpoints_come_from_the_set(self, seed, n, k):
        X = random_dendrite(n, seed=seed)
        rng = np.random.default_rng(seed + 2)
        F = [random_point(X, rng) for _ in range(k)]
        Y = X.convex_hull(F)
        reordered = X.convex_hull(list(reversed(F)))
        assert sorted(point_key(p) for p in X.endpoints(Y)) == sorted(point_key(p) for p in X.endpoints(reordered))
        for e in X.endpoints(Y):
            assert any(X.same_point(e, p) for p in F)
        for p in F:
            assert X.contains(Y, p)


class TestComplements:

    def test_order(self, star3):
        assert star3.order(DPoint.at(0)) == 3
        assert star3.order(DPoint.at(1)) == 1
        assert star3.order(star3.point(1, 0.5)) == 2

    def test_order_in_subdendrite(self, star3):
        Y, _ = star3.arc(DPoint.at(1), DPoint.at(2))
        assert star3.order_in(Y, DPoint.at(0)) == 2
        assert star3.order_in(Y, DPoint.at(3)) == 0

    def test_components_minus_hub(self, star3):
        components = star3.components_minus(star3.point_set(DPoint.at(0)))
        assert len(components) == 3
        assert all(c.attachment == DPoint.at(0) for c in components)
        idx = star3.component_of(star3.point_set(DPoint.at(0)), components, star3.point(2, 0.5))
        assert components[idx].body.contains(DPoint.at(3))

    def test_boundary_points(self, star3):
        Y, _ = star3.arc(DPoint.at(0), DPoint.at(1))
        assert star3.boundary_points(Y) == [DPoint.at(0)]
        assert star3.boundary_points(star3.whole()) == []

    def test_retraction_error(self, star3):
        assert star3.retraction_error(star3.point_set(DPoint.at(0))) == pytest.approx(1.0)
        assert star3.retraction_error(star3.whole()) == 0.0

    def test_grid_spacing(self, unit_arc):
        grid = unit_arc.grid(0.5)
        assert grid == [DPoint.at(0), unit_arc.point(0, 0.5), DPoint.at(1)]
        with pytest.raises(DomainError):
            unit_arc.grid(0.0)

    def test_diameter(self, star3):
        assert star3.diameter() == pytest.approx(2.0)
