import logging
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Set, Tuple

from peewee import (
    DateTimeField,
    FloatField,
    IntegerField,
    Model,
    Proxy,
    TextField,
)
from playhouse.sqlite_ext import JSONField, SqliteDatabase

from .constants import DATABASE_FILE_NAME

database_proxy = Proxy()

POINT_METRICS = (
    "delta_lateral",
    "delta_axial",
    "delta",
    "snr_db",
    "cnr",
    "rms",
    "inclusion_mean",
    "background_mean",
    "lam",
    "wall_seconds",
)


class DatabaseError(Exception):
    """Custom exception for database-related errors."""

    pass


class Run(Model):
    """
    One invocation of a CLI verb.

    Attributes:
        verb (TextField): The CLI verb that was run.
        started (DateTimeField): When the run started.
        finished (DateTimeField): When the run ended, if it did.
        status (TextField): "running", "ok" or "failed".
        manifest (JSONField): The manifest written for the run.

    Meta:
        database (Database): The database connection to use.
        table_name (str): The name of the database table for storing runs.
    """

    verb = TextField()
    started = DateTimeField()
    finished = DateTimeField(null=True)
    status = TextField(default="running")
    manifest = JSONField(null=True)

    class Meta:
        database = database_proxy
        table_name = "runs"


class SweepPoint(Model):
    """
    Metrics of one (axis, value, seed, solver) reconstruction of a sweep.

    Attributes:
        axis (TextField): Sweep axis, "noise" or "contrast".
        value (FloatField): Axis value (Δ, or inclusion modulus in pascals).
        seed (IntegerField): Noise seed.
        solver (TextField): "statistical" or "baseline".
        status (TextField): "ok" or "failed".
        delta_lateral, delta_axial, delta (FloatField): Realized noise levels.
        snr_db, cnr, rms (FloatField): Quality metrics.
        inclusion_mean, background_mean (FloatField): Region means of Ê.
        lam (FloatField): TV weight used.
        wall_seconds (FloatField): Reconstruction wall-clock time.
        error (TextField): Failure message, if any.
        last_updated (DateTimeField): When the row was written.

    Meta:
        database (Database): The database connection to use.
        table_name (str): The name of the database table for storing sweep points.
    """

    axis = TextField()
    value = FloatField()
    seed = IntegerField()
    solver = TextField()
    status = TextField()
    delta_lateral = FloatField(null=True)
    delta_axial = FloatField(null=True)
    delta = FloatField(null=True)
    snr_db = FloatField(null=True)
    cnr = FloatField(null=True)
    rms = FloatField(null=True)
    inclusion_mean = FloatField(null=True)
    background_mean = FloatField(null=True)
    lam = FloatField(null=True)
    wall_seconds = FloatField(null=True)
    error = TextField(null=True)
    last_updated = DateTimeField()

    class Meta:
        database = database_proxy
        table_name = "sweep_points"
        indexes = ((("axis", "value", "seed", "solver"), True),)


def init(out_dir: str, enable_logging: bool = False) -> SqliteDatabase:
    """
    Initialize the results store in the given output directory.

    Args:
        out_dir (str): Directory holding results.db.
        enable_logging (bool, optional): Whether to log SQL. Defaults to False.

    Returns:
        SqliteDatabase: The initialized database object.

    Raises:
        DatabaseError: If database initialization fails.
    """
    try:
        db_path = os.path.join(out_dir, DATABASE_FILE_NAME)
        db = SqliteDatabase(db_path)
        database_proxy.initialize(db)
        db.create_tables([Run, SweepPoint])

        if enable_logging:
            logger = logging.getLogger("peewee")
            logger.setLevel(logging.DEBUG)
            logger.addHandler(logging.StreamHandler())

        return db
    except Exception as e:
        raise DatabaseError(f"Failed to initialize database: {e}")


def start_run(verb: str) -> int:
    """Record the start of a run and return its id."""
    try:
        return int(Run.create(verb=verb, started=datetime.now()).id)
    except Exception as e:
        raise DatabaseError(f"Failed to record run {verb}: {e}")


def finish_run(run_id: int, status: str, manifest: Optional[Dict[str, Any]] = None) -> None:
    """Mark a run finished with its status and manifest."""
    try:
        Run.update(finished=datetime.now(), status=status, manifest=manifest).where(
            Run.id == run_id
        ).execute()
    except Exception as e:
        raise DatabaseError(f"Failed to finish run {run_id}: {e}")


def save_point(row: Dict[str, Any]) -> None:
    """
    Saves a sweep point with conflict resolution on (axis, value, seed, solver).

    Args:
        row: Point key fields plus status, metrics and error.

    Raises:
        DatabaseError: If the row cannot be saved.
    """
    try:
        values = {
            "axis": row["axis"],
            "value": float(row["value"]),
            "seed": int(row["seed"]),
            "solver": row["solver"],
            "status": row["status"],
            "error": row.get("error"),
            "last_updated": datetime.now(),
        }
        for name in POINT_METRICS:
            values[name] = row.get(name)
        update = {
            getattr(SweepPoint, name): values[name]
            for name in ("status", "error", "last_updated") + POINT_METRICS
        }
        SweepPoint.insert(**values).on_conflict(
            conflict_target=[
                SweepPoint.axis,
                SweepPoint.value,
                SweepPoint.seed,
                SweepPoint.solver,
            ],
            update=update,
        ).execute()
    except Exception as e:
        raise DatabaseError(
            f"Failed to save sweep point {row.get('axis')}={row.get('value')} "
            f"seed {row.get('seed')} ({row.get('solver')}): {e}"
        )


def completed_points(axis: str) -> Set[Tuple[float, int, str]]:
    """
    Returns (value, seed, solver) keys already stored with status "ok".

    Raises:
        DatabaseError: If the query fails.
    """
    try:
        query = SweepPoint.select(
            SweepPoint.value, SweepPoint.seed, SweepPoint.solver
        ).where((SweepPoint.axis == axis) & (SweepPoint.status == "ok"))
        return {(point.value, point.seed, point.solver) for point in query}
    except Exception as e:
        raise DatabaseError(f"Failed to read completed points: {e}")


def clear_points(axis: str) -> int:
    """Delete every stored point of an axis; returns the number removed."""
    try:
        return int(SweepPoint.delete().where(SweepPoint.axis == axis).execute())
    except Exception as e:
        raise DatabaseError(f"Failed to clear sweep points for {axis}: {e}")


def sweep_rows(axis: str, values: Optional[List[float]] = None) -> List[Dict[str, Any]]:
    """
    Returns stored points of an axis ordered by (value, seed, solver).

    Args:
        axis: Sweep axis.
        values: When given, only points whose value is in this list.

    Raises:
        DatabaseError: If the query fails.
    """
    try:
        query = SweepPoint.select().where(SweepPoint.axis == axis)
        if values is not None:
            query = query.where(SweepPoint.value.in_([float(v) for v in values]))
        query = query.order_by(SweepPoint.value, SweepPoint.seed, SweepPoint.solver)
        columns = ("axis", "value", "seed", "solver", "status") + POINT_METRICS + ("error",)
        return [{name: getattr(point, name) for name in columns} for point in query]
    except Exception as e:
        raise DatabaseError(f"Failed to read sweep points for {axis}: {e}")
