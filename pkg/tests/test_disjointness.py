#!/usr/bin/env python3
"""
Tests for Sarnak sums, structure verification, the fixed-point complement
analysis and the per-slot bound experiment
"""

import pytest

from src.services.arith import mertens, sieve
from src.services.decomposition import CellIndex, ConstantObservable, DistanceObservable, decompose
from src.services.dendrite import DPoint
from src.services.disjointness import (
    PeriodicStructure, StructureLevel, analyze_fixed_point_complement, bound_experiment, inclusion_margin,
    sarnak_sum, structure_from_complement, subdendrite_gap, verify_structure,
)
from src.services.dynamics import omega_limit, orbit
from src.services.errors import DomainError, OrbitNotCapturedError
from src.services.gehman import build_odometer, dyadic_structure, odometer_map, parse_spec
from src.services.io_formats import load_structure


@pytest.fixture(scope="module")
def table():
    return sieve(10_000)


@pytest.fixture
def branch_structure(rotation, models_dir):
    return load_structure(rotation.dendrite, models_dir / "star3_branch_structure.json")


@pytest.fixture
def overlapping_structure(rotation, models_dir):
    return load_structure(rotation.dendrite, models_dir / "star3_two_branch_structure.json")


@pytest.fixture
def rotation_sample(rotation):
    return omega_limit(rotation, DPoint.at(1), B=10, M=30)


class TestSarnakSums:

    def test_identity_constant_is_mertens(self, identity, table):
        series = sarnak_sum(identity, DPoint.at(0), ConstantObservable(), table, 1000, checkpoints=[10, 100, 1000])
        assert series.value(100) == pytest.approx(1 / 100)
        assert series.value(1000) == pytest.approx(mertens(table, 1000) / 1000)
        assert [c for c, _ in series.checkpoints] == [10, 100, 1000]

    def test_rotation_distance_observable(self, rotation, table):
        phi = DistanceObservable(rotation.dendrite, DPoint.at(1))
        series = sarnak_sum(rotation, DPoint.at(1), phi, table, 3000)
        assert abs(series.value(3000)) < 0.1

    def test_linear_in_observable(self, rotation, table):
        X = rotation.dendrite
        near, far = DistanceObservable(X, DPoint.at(1)), DistanceObservable(X, X.point(1, 0.4))
        marks = [10, 500, 2000]
        combined = sarnak_sum(rotation, DPoint.at(2), lambda p: 2.0 * near(p) - 3.0 * far(p), table, 2000, marks)
        first = sarnak_sum(rotation, DPoint.at(2), near, table, 2000, marks)
        second = sarnak_sum(rotation, DPoint.at(2), far, table, 2000, marks)
        for c in marks:
            assert combined.value(c) == pytest.approx(2.0 * first.value(c) - 3.0 * second.value(c), abs=1e-12)

    def test_horizon_checks(self, identity, table):
        with pytest.raises(DomainError):
            sarnak_sum(identity, DPoint.at(0), ConstantObservable(), table, table.N + 1)
        with pytest.raises(DomainError):
            sarnak_sum(identity, DPoint.at(0), ConstantObservable(), table, 100, checkpoints=[200])


class TestSubdendriteHelpers:

    def test_gap_between_branches(self, star3):
        A, _ = star3.arc(DPoint.at(1), star3.point(0, 0.5))
        B, _ = star3.arc(DPoint.at(2), star3.point(1, 0.5))
        assert subdendrite_gap(star3, A, B) == pytest.approx(1.0)
        assert subdendrite_gap(star3, A, star3.whole()) == 0.0

    def test_inclusion_margin(self, star3):
        A, _ = star3.arc(DPoint.at(1), DPoint.at(2))
        B, _ = star3.arc(DPoint.at(0), DPoint.at(1))
        assert inclusion_margin(star3, A, B) == pytest.approx(1.0)
        assert inclusion_margin(star3, B, A) == 0.0


class TestStructureVerification:

    def test_branch_structure_passes(self, rotation, branch_structure, rotation_sample):
        report = verify_structure(rotation, branch_structure, rotation_sample)
        assert report.passed
        assert {row["condition"] for row in report.rows} == {1, 2, 3, 4, 5}

    def test_overlapping_slots_fail(self, rotation, overlapping_structure, rotation_sample):
        report = verify_structure(rotation, overlapping_structure, rotation_sample)
        assert not report.passed
        assert not report.condition_passed(2)
        assert (1, 2) in report.failed_conditions

    def test_level_needs_two_slots(self, rotation, rotation_sample):
        X = rotation.dendrite
        S = PeriodicStructure([StructureLevel(X.whole(), 1)])
        with pytest.raises(DomainError):
            verify_structure(rotation, S, rotation_sample)

    def test_eps_must_be_positive(self, rotation, branch_structure, rotation_sample):
        with pytest.raises(DomainError):
            verify_structure(rotation, branch_structure, rotation_sample, eps=0.0)


class TestComplement:

    def test_rotation_three_cycle(self, rotation, rotation_sample):
        report = analyze_fixed_point_complement(rotation, DPoint.at(0), rotation_sample, depth=2)
        assert report.n_slots == 3
        assert report.sigma == [1, 2, 0]
        assert report.is_n_cycle and report.slot_map_ok
        assert report.flag == ""

        S = structure_from_complement(rotation, report)
        assert S.alphas == [3]
        assert verify_structure(rotation, S, rotation_sample).passed

    def test_odometer_hub_two_cycle(self):
        O = build_odometer(5)
        f = odometer_map(O)
        sample = omega_limit(f, O.leaf(0), B=50, M=100)
        report = analyze_fixed_point_complement(f, DPoint.at(0), sample, depth=1)
        assert report.n_slots == 2
        assert report.is_n_cycle

    def test_identity_has_no_cycle(self, identity):
        sample = omega_limit(identity, DPoint.at(1), B=1, M=5)
        report = analyze_fixed_point_complement(identity, DPoint.at(0), sample, depth=1)
        assert not report.is_n_cycle
        assert report.flag
        with pytest.raises(DomainError):
            structure_from_complement(identity, report)

    def test_requires_fixed_point(self, rotation, rotation_sample):
        with pytest.raises(DomainError):
            analyze_fixed_point_complement(rotation, DPoint.at(1), rotation_sample, depth=1)


class TestBoundExperiment:

    def test_rotation_split(self, rotation, branch_structure, table):
        cells = decompose(rotation.dendrite, 1.0)
        report = bound_experiment(rotation, DPoint.at(1), cells, branch_structure, table, 3000,
                                  checkpoints=[1000, 3000])
        assert report.alpha == 3
        assert report.n0 == 0
        assert report.split_error <= 1e-10
        assert report.max_boundary_slots <= 2
        assert len(report.slot_rows) == 3 * len(cells)
        assert len(report.cell_rows) == len(cells)

    def test_split_holds_at_every_checkpoint(self, rotation, branch_structure, table):
        X = rotation.dendrite
        cells = decompose(X, 1.0)
        marks = [10, 100, 1000, 2000]
        report = bound_experiment(rotation, DPoint.at(1), cells, branch_structure, table, 3000, checkpoints=marks)
        assert sorted(report.split_errors) == marks + [3000]
        assert max(report.split_errors.values()) <= 1e-10
        assert report.split_error == max(report.split_errors.values())

        index = CellIndex(X, cells)
        points = orbit(rotation, DPoint.at(1), 2000)
        for i in range(len(cells)):
            for c in marks:
                direct = sum(int(table.mu[n]) * index.psi(i, points[n]) for n in range(1, c + 1)) / c
                slots = sum(dict(report.series.get((i, j), [])).get(c, 0.0) for j in range(report.alpha))
                assert slots == pytest.approx(direct, abs=1e-12)

    def test_checkpoint_past_N(self, rotation, branch_structure, table):
        cells = decompose(rotation.dendrite, 1.0)
        with pytest.raises(DomainError):
            bound_experiment(rotation, DPoint.at(1), cells, branch_structure, table, 100, checkpoints=[50, 200])

    def test_cell_inside_one_slot(self, rotation, branch_structure, table):
        X = rotation.dendrite
        cells = decompose(X, 0.3)
        (i,) = CellIndex(X, cells).containing(DPoint.at(1))
        report = bound_experiment(rotation, DPoint.at(1), cells, branch_structure, table, 3000)
        rows = {row["slot"]: row["A_N"] for row in report.slot_rows if row["cell_id"] == i}
        assert rows[1] == 0.0 and rows[2] == 0.0
        expected = sum(int(table.mu[n]) for n in range(3, 3001, 3)) / 3000
        assert rows[0] == pytest.approx(expected, abs=1e-12)

    def test_odometer_split(self, table):
        spec = parse_spec("thue-morse")
        O = build_odometer(4, spec)
        f = odometer_map(O)
        S = dyadic_structure(spec, O, 2)
        cells = decompose(O.dendrite, 0.2)
        report = bound_experiment(f, O.leaf(0), cells, S, table, 5000, level=1)
        assert report.alpha == 2
        assert report.bound == pytest.approx(1.0)
        assert report.split_error <= 1e-10
        assert report.max_boundary_slots <= 2

    def test_orbit_not_captured(self, rotation, branch_structure, table):
        cells = decompose(rotation.dendrite, 1.0)
        with pytest.raises(OrbitNotCapturedError):
            bound_experiment(rotation, DPoint.at(0), cells, branch_structure, table, 100, horizon=20)

    def test_missing_level(self, rotation, branch_structure, table):
        cells = decompose(rotation.dendrite, 1.0)
        with pytest.raises(DomainError):
            bound_experiment(rotation, DPoint.at(1), cells, branch_structure, table, 100, level=2)
