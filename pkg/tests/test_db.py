"""Tests for the results database."""

import pytest

from elasticity_imaging import db
from elasticity_imaging.db import Run, SweepPoint


def point(value, seed=0, solver="statistical", status="ok", **metrics):
    row = {"axis": "noise", "value": value, "seed": seed, "solver": solver, "status": status}
    row.update(metrics)
    return row


@pytest.fixture
def database(temp_dir):
    connection = db.init(str(temp_dir))
    yield connection
    connection.close()


class TestDatabase:
    """Test database operations."""

    def test_initialize_database(self, database, temp_dir):
        assert database is not None
        assert (temp_dir / "results.db").exists()
        assert database.table_exists("runs")
        assert database.table_exists("sweep_points")

    def test_models(self):
        for name in ("verb", "started", "finished", "status", "manifest"):
            assert hasattr(Run, name)
        for name in db.POINT_METRICS + ("axis", "value", "seed", "solver", "error"):
            assert hasattr(SweepPoint, name)

    def test_run_lifecycle(self, database):
        run_id = db.start_run("reconstruct")
        db.finish_run(run_id, "ok", {"metrics": {"rms": 0.1}})
        run = Run.get_by_id(run_id)
        assert run.status == "ok"
        assert run.finished is not None
        assert run.manifest == {"metrics": {"rms": 0.1}}

    def test_save_point_upserts(self, database):
        db.save_point(point(0.01, status="failed", error="boom"))
        db.save_point(point(0.01, rms=0.2, cnr=3.0))
        rows = db.sweep_rows("noise")
        assert len(rows) == 1
        assert rows[0]["status"] == "ok"
        assert rows[0]["rms"] == 0.2
        assert rows[0]["error"] is None

    def test_completed_points_skip_failures(self, database):
        db.save_point(point(0.01))
        db.save_point(point(0.01, solver="baseline", status="failed"))
        db.save_point(point(0.05, seed=1))
        assert db.completed_points("noise") == {
            (0.01, 0, "statistical"),
            (0.05, 1, "statistical"),
        }
        assert db.completed_points("contrast") == set()

    def test_rows_are_ordered(self, database):
        for value, seed, solver in [
            (0.05, 0, "statistical"),
            (0.01, 1, "baseline"),
            (0.01, 0, "statistical"),
            (0.01, 0, "baseline"),
        ]:
            db.save_point(point(value, seed, solver))
        keys = [(r["value"], r["seed"], r["solver"]) for r in db.sweep_rows("noise")]
        assert keys == [
            (0.01, 0, "baseline"),
            (0.01, 0, "statistical"),
            (0.01, 1, "baseline"),
            (0.05, 0, "statistical"),
        ]
        assert len(db.sweep_rows("noise", [0.05])) == 1

    def test_clear_points(self, database):
        db.save_point(point(0.01))
        db.save_point(point(0.05))
        assert db.clear_points("noise") == 2
        assert db.sweep_rows("noise") == []

    def test_missing_key(self, database):
        with pytest.raises(db.DatabaseError):
            db.save_point({"axis": "noise"})
