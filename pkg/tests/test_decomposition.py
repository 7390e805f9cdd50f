#!/usr/bin/env python3
"""
Tests for cell decompositions, step observables and step approximations
"""

import pytest
from hypothesis import given, settings, strategies as st

from src.services.decomposition import (
    Cell, CellIndex, ConstantObservable, DistanceObservable, approximate, cell_graph, cell_rows,
    coarse_decompose, decompose, refine_cell, step_function, verify_decomposition,
)
from src.services.dendrite import Dendrite, DPoint, random_dendrite
from src.services.errors import DecompositionError, DomainError


class TestDecompose:

    def test_star_cells(self, star3):
        coarse = coarse_decompose(star3, 1.0)
        assert len(coarse) == 7
        cells = decompose(star3, 1.0)
        assert len(cells) == 9
        assert max(len(cell.boundary) for cell in cells) == 2
        assert all(cell.diameter < 1.0 for cell in cells)

    def test_hub_cells_meet_at_the_hub(self, star3):
        cells = decompose(star3, 1.0)
        hub_cells = [cell for cell in cells if DPoint.at(0) in cell.boundary]
        assert len(hub_cells) == 3

    def test_report_passes(self, star3):
        report = verify_decomposition(star3, decompose(star3, 1.0), 1.0)
        assert report.passed
        assert report.cells == 9
        assert report.violations == []

    def test_small_dendrite_is_one_cell(self, star3):
        cells = decompose(star3, 3.0)
        assert len(cells) == 1
        assert cells[0].boundary == ()
        assert cells[0].body == star3.whole()

    def test_isolated_edge_cut_evenly(self, unit_arc):
        cells = decompose(unit_arc, 0.5)
        assert len(cells) == 3
        assert [cell.diameter for cell in cells] == pytest.approx([1 / 3] * 3)

    @pytest.mark.parametrize("delta", [0.0, -0.5])
    def test_delta_must_be_positive(self, star3, delta):
        with pytest.raises(DomainError):
            decompose(star3, delta)

    def test_violation_is_reported(self, star3):
        report = verify_decomposition(star3, decompose(star3, 1.0), 0.2)
        assert not report.passed
        assert any(v.startswith("diameter") for v in report.violations)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 5_000), n=st.integers(2, 12), delta=st.floats(0.2, 2.0))
    def test_random_dendrites(self, seed, n, delta):
        X = random_dendrite(n, seed=seed)
        cells = decompose(X, delta)
        assert all(len(cell.boundary) <= 2 for cell in cells)
        assert all(cell.diameter < delta for cell in cells)


class TestRefine:

    @pytest.fixture
    def side_branches(self):
        """Hull of leaves 1, 2, 3 branches at 0; vertex 4 carries the side branch to 5, vertex 0 the one to 6"""
        return Dendrite(7, [(0, 2, 1.0), (0, 3, 1.0), (0, 4, 0.5), (4, 1, 0.5), (4, 5, 0.3), (0, 6, 0.2)])

    def test_side_branches_follow_their_arc(self, side_branches):
        X = side_branches
        V = Cell(X.whole(), (DPoint.at(1), DPoint.at(2), DPoint.at(3)), X.diameter())
        cells = refine_cell(X, V)
        assert len(cells) == 4
        assert all(len(cell.boundary) <= 2 for cell in cells)
        (arm,) = [cell for cell in cells if cell.in_closure(X, DPoint.at(1))]
        assert arm.in_closure(X, DPoint.at(5))
        assert set(arm.boundary) == {DPoint.at(0), DPoint.at(1)}
        (stub,) = [cell for cell in cells if cell.in_closure(X, DPoint.at(6))]
        assert stub.boundary == (DPoint.at(0),)

    def test_two_boundary_points_kept(self, star3):
        V = Cell(star3.whole(), (DPoint.at(1), DPoint.at(2)), star3.diameter())
        assert refine_cell(star3, V) == [V]

    def test_boundaryless_piece_rejected(self, side_branches):
        X = side_branches
        V = Cell(X.subdendrite({0: (0.0, 1.0)}, {0, 2}), (), 1.0)
        with pytest.raises(DecompositionError):
            refine_cell(X, V)


class TestPartitionOfUnity:

    def test_psi_values(self, star3):
        cells = decompose(star3, 1.0)
        index = CellIndex(star3, cells)
        cut = star3.point(0, 1 / 3)
        owners = index.containing(cut)
        assert len(owners) == 2
        assert [index.psi(i, cut) for i in owners] == [0.5, 0.5]
        hub_owner = index.containing(DPoint.at(0))[0]
        assert index.psi(hub_owner, DPoint.at(0)) == pytest.approx(1 / 3)
        inside = cells[0].sample_point(star3)
        assert index.psi(0, inside) == 1.0

    def test_sums_to_one(self, star3):
        cells = decompose(star3, 1.0)
        index = CellIndex(star3, cells)
        for p in star3.grid(star3.total_length() / 1000):
            assert index.psi_sum(p) == pytest.approx(1.0, abs=1e-12)

    def test_step_function(self, star3):
        cells = decompose(star3, 1.0)
        psi = step_function(star3, cells, 2)
        assert psi(cells[2].sample_point(star3)) == 1.0
        with pytest.raises(DomainError):
            step_function(star3, cells, len(cells))


class TestApproximation:

    def test_distance_observable_within_bound(self, star3):
        cells = decompose(star3, 1.0)
        result = approximate(star3, DistanceObservable(star3, DPoint.at(1)), cells)
        assert result.bound == pytest.approx(1 / 3)
        assert result.measured_error <= result.bound + 1e-12

    def test_constant_is_exact(self, star3):
        cells = decompose(star3, 1.0)
        result = approximate(star3, ConstantObservable(2.0), cells)
        assert result.bound == 0.0
        assert result.measured_error == pytest.approx(0.0, abs=1e-12)

    def test_unknown_lipschitz_has_no_bound(self, star3):
        cells = decompose(star3, 1.0)
        result = approximate(star3, lambda p: 1.0, cells)
        assert result.bound is None


class TestReports:

    def test_cell_rows(self, star3):
        rows = cell_rows(star3, decompose(star3, 1.0))
        assert [row["cell_id"] for row in rows] == list(range(9))
        assert {row["boundary_size"] for row in rows} <= {1, 2}
        assert set(rows[0]) == {"cell_id", "diameter", "boundary_size", "boundary_points"}

    def test_cell_graph(self, star3):
        cells = decompose(star3, 1.0)
        graph = cell_graph(star3, cells)
        assert graph["vertices"] == 4
        assert {segment["cell"] for segment in graph["segments"]} == set(range(9))
        assert sum(segment["hi"] - segment["lo"] for segment in graph["segments"]) == pytest.approx(3.0)
