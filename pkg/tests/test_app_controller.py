#!/usr/bin/env python3
"""
Tests for the experiment controller: configuration overrides, callbacks,
statistics and result records
"""

import json
import logging

import pytest

from src.app.app_controller import (
    ExperimentConfig, ExperimentController, default_checkpoints, load_records, make_check,
)
from src.services.decomposition import ConstantObservable, DistanceObservable
from src.services.dendrite import DPoint
from src.services.errors import DomainError


class MockConfig:
    """Small horizons so every run stays quick"""

    def get_config_dict(self):
        return {
            'seed': 0,
            'tau_pt': 1e-9,
            'omega_burn_in': 10,
            'omega_samples': 30,
            'omega_eps': 1e-3,
            'cycle_horizon': 1000,
            'structure_eps': 1e-3,
            'n0_horizon': 1000,
            'entropy_grid_density': 4.5,
            'entropy_max_grid': 100000,
            'periodic_tolerance': 0.01,
            'bound_tolerance': 0.01,
            'output_dir': '/tmp/results',
            'log_level': 'INFO',
        }


@pytest.fixture
def controller():
    return ExperimentController(MockConfig())


@pytest.fixture
def model(models_dir):
    return lambda name: str(models_dir / name)


class TestConfiguration:

    def test_update_logs_changes(self, controller, caplog):
        with caplog.at_level(logging.INFO):
            controller.update_config(omega_eps=0.01, seed=None, n0_horizon=1000)
        assert controller.setting('omega_eps') == 0.01
        assert "CONFIG UPDATE: omega_eps changed from 0.001 to 0.01" in caplog.text
        assert "n0_horizon" not in caplog.text
        assert controller.overrides == {'omega_eps': 0.01}

    def test_unknown_key(self, controller):
        with pytest.raises(DomainError):
            controller.update_config(model_path="./models")


class TestCallbacksAndStatistics:

    def test_run_events(self, controller):
        events = []
        controller.add_callback('on_run_started', lambda data: events.append(("started", data['command'])))
        controller.add_callback('on_run_completed', lambda data: events.append(("completed", data['passed'])))
        controller.add_callback('not_an_event', lambda data: events.append("never"))

        result = controller.execute(ExperimentConfig("sieve", N=10))
        assert len(result.rows) == 10
        assert events == [("started", "sieve"), ("completed", True)]

        stats = controller.get_statistics()
        assert stats['runs_started'] == 1
        assert stats['runs_completed'] == 1
        assert stats['start_time'] is not None

    def test_callback_errors_are_logged(self, controller, caplog):
        def broken(data):
            raise RuntimeError("boom")

        controller.add_callback('on_run_started', broken)
        controller.execute(ExperimentConfig("sieve", N=5))
        assert "Callback error for on_run_started: boom" in caplog.text
        assert controller.statistics['runs_completed'] == 1

    def test_failed_run(self, controller):
        errors = []
        controller.add_callback('on_error', errors.append)
        with pytest.raises(DomainError):
            controller.execute(ExperimentConfig("sieve"))
        assert controller.statistics['runs_failed'] == 1
        assert errors[0]['command'] == "sieve"

    def test_unknown_command(self, controller):
        with pytest.raises(DomainError):
            controller.execute(ExperimentConfig("plot"))

    def test_failed_checks(self, controller, model):
        failed = []
        controller.add_callback('on_check_failed', failed.append)
        ec = ExperimentConfig("verify-structure", map_file=model("star3_rotation.json"), point="[1]",
                              options={"structure": model("star3_two_branch_structure.json")})
        result = controller.execute(ec)
        assert not result.passed
        assert failed and all(not check['passed'] for check in failed)
        assert controller.statistics['checks_failed'] == len(failed)

    def test_record_file(self, controller, tmp_path):
        record = tmp_path / "out" / "runs.ndjson"
        controller.execute(ExperimentConfig("sieve", N=5, record=str(record)))
        controller.execute(ExperimentConfig("sieve", N=6, record=str(record)))
        records = load_records([str(record)])
        assert [r['config']['N'] for r in records] == [5, 6]
        assert records[0]['config']['settings']['omega_samples'] == 30


class TestRuns:

    def test_observables(self, controller, star3):
        phi, name = controller.observable(star3, "const:2")
        assert isinstance(phi, ConstantObservable) and phi.value == 2.0
        assert name == "const:2"
        phi, _ = controller.observable(star3, "dist:[1]")
        assert isinstance(phi, DistanceObservable)
        assert phi(DPoint.at(2)) == pytest.approx(2.0)
        step, _ = controller.observable(star3, "step:0", delta=1.0)
        assert step.cell_id == 0
        with pytest.raises(DomainError):
            controller.observable(star3, "step:0")
        with pytest.raises(DomainError):
            controller.observable(star3, "sin")

    def test_dyadic_bound_split(self, controller):
        ec = ExperimentConfig("bound", N=2000, delta=0.3, options={"dyadic": "thue-morse", "depth": 4, "k": 1})
        result = controller.execute(ec)
        checks = {check['id']: check for check in result.checks}
        assert checks['bound.split']['passed']
        assert checks['bound.boundary_slots']['passed']
        assert {row['alpha'] for row in result.rows} == {2}

    def test_table_cache(self, controller):
        big = controller.table(500)
        assert controller.table(200) is big
        assert controller.table(1000).N >= 1000

    def test_report(self, controller):
        empty = controller.execute(ExperimentConfig("report"))
        assert empty.rows == [] and empty.passed

        records = [{"checks": [make_check("a", "first", 1.0, 2.0), make_check("b", "second", 3.0, 2.0)]}]
        result = controller.execute(ExperimentConfig("report"), records)
        assert [row['passed'] for row in result.rows] == [True, False]
        assert not result.passed


class TestHelpers:

    def test_make_check(self):
        assert make_check("x", "upper", 1.0, 2.0) == {
            "id": "x", "name": "upper", "value": 1.0, "bound": 2.0, "margin": 1.0, "passed": True}
        lower = make_check("y", "lower", 1.0, 2.0, upper=False)
        assert lower["margin"] == -1.0 and not lower["passed"]
        explicit = make_check("z", "verdict", 5, None, True)
        assert explicit["margin"] is None and explicit["passed"]

    def test_default_checkpoints(self):
        assert default_checkpoints(100) == list(range(1, 101))
        assert default_checkpoints(10 ** 6) == [10, 100, 1000, 10 ** 4, 10 ** 5, 10 ** 6]
        assert default_checkpoints(12345) == [10, 100, 1000, 10 ** 4, 12345]

    def test_load_records_errors(self, tmp_path):
        with pytest.raises(DomainError):
            load_records([str(tmp_path / "absent.ndjson")])
        bad = tmp_path / "bad.ndjson"
        bad.write_text(json.dumps({"checks": []}) + "\nnot json\n")
        with pytest.raises(DomainError):
            load_records([str(bad)])
