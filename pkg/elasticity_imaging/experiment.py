"""
Experiment pipelines: phantom → observations → reconstruction → metrics →
artifacts.

Every pipeline writes into one output directory: CSV arrays at 17
significant digits, PNG rasters, the resolved config.yaml and a manifest.json
holding the resolved configuration, seeds, realized noise, metrics and
timings. CSV and PNG outputs are byte-identical across reruns of the same
configuration; only the manifest carries wall-clock values.
"""

import concurrent.futures
import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__, db, metrics
from .config import ExperimentConfig, save_config
from .constants import (
    FLOAT_FORMAT,
    MANIFEST_FILE_NAME,
    MESH_FILE_NAME,
    PROGRESS_LOG_INTERVAL,
    SWEEP_FILE_NAME,
    SWEEP_SUMMARY_FILE_NAME,
    TRACE_FILE_NAME,
    TRACE_SUMMARY_FILE_NAME,
)
from .fem_core import PsiTensor, assemble_psi
from .inverse import (
    SolverConfig,
    SolverDivergedError,
    SolverError,
    SolverTrace,
    baseline_lsq,
    reconstruct,
)
from .mesh import Mesh, generate_mesh, load_mesh, save_mesh
from .prox import TotalVariation
from .render import export_mesh_wireframe, export_raster
from .synth import (
    Loading,
    NoiseModel,
    Observation,
    Phantom,
    calibrate_noise,
    calibrate_noise_snr,
    default_traction,
    expected_snr_db,
    force_noise_sigma,
    forward_solve,
    lateral_energy_share,
    make_phantom,
    observe,
    save_observation,
    uniform_compression,
    write_field_csv,
)

logger = logging.getLogger(__name__)

SOLVER_NAMES = ("statistical", "baseline")
SWEEP_COLUMNS = ["axis", "value", "seed", "solver", "status"] + list(db.POINT_METRICS) + [
    "error"
]
SUMMARY_METRICS = ("rms", "cnr", "snr_db", "delta", "inclusion_mean", "background_mean")


class ExperimentError(Exception):
    """Custom exception for experiment pipeline errors."""

    pass


@dataclass(frozen=True, eq=False)
class Problem:
    """A meshed phantom with its loading and noise-free forward solution."""

    mesh: Mesh
    psi: PsiTensor
    phantom: Phantom
    loading: Loading
    u: np.ndarray
    f_true: np.ndarray


def write_manifest(directory: str, manifest: Dict[str, Any]) -> str:
    """Write manifest.json; numpy scalars and arrays become plain JSON."""

    def default(value: Any) -> Any:
        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, np.ndarray):
            return value.tolist()
        raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")

    path = os.path.join(directory, MANIFEST_FILE_NAME)
    with open(path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, default=default)
    return path


def _base_manifest(verb: str, config: ExperimentConfig) -> Dict[str, Any]:
    return {
        "verb": verb,
        "version": __version__,
        "config": config.resolved(),
        "seeds": list(config.noise.seeds),
    }


def build_mesh(config: ExperimentConfig) -> Mesh:
    section = config.mesh
    if section.path:
        return load_mesh(section.path)
    return generate_mesh(
        width=section.width,
        height=section.height,
        target_nodes=section.target_nodes,
        jitter=section.jitter,
        seed=section.seed,
        thickness=section.thickness,
    )


def build_problem(
    config: ExperimentConfig, mesh: Optional[Mesh] = None, inclusion: Optional[float] = None
) -> Problem:
    """
    Mesh, phantom, loading and forward solve for a configuration.

    Args:
        config: Experiment configuration.
        mesh: Reuse this mesh instead of building one.
        inclusion: Override the inclusion modulus (contrast sweeps).
    """
    mesh = mesh or build_mesh(config)
    section = config.phantom
    phantom = make_phantom(
        mesh,
        background=section.background,
        inclusion_modulus=section.inclusion if inclusion is None else inclusion,
        center=section.center,
        radius=section.radius,
    )
    traction = config.loading.traction
    if traction is None:
        traction = default_traction(section.background, config.loading.strain)
    loading = uniform_compression(mesh, traction)
    psi = assemble_psi(mesh, section.poisson_ratio, loading.dirichlet)
    u, f_true = forward_solve(psi, phantom.E_true, loading)
    return Problem(mesh, psi, phantom, loading, u, f_true)


def snr_for_delta(delta: float) -> float:
    """Overall SNR in dB equivalent to an overall noise level Δ."""
    return float(10.0 * np.log10((1.0 - delta**2) / delta**2))


def _with_budget(
    problem: Problem, noise: NoiseModel, targets: Dict[str, Any]
) -> Tuple[NoiseModel, Dict[str, Any]]:
    fixed = problem.psi.fixed
    snr = expected_snr_db(problem.u, noise, fixed)
    if math.isfinite(snr):
        targets["expected_snr_db"] = snr
    targets["lateral_energy_share"] = lateral_energy_share(problem.u, fixed)
    return noise, targets


def make_noise(
    config: ExperimentConfig,
    problem: Problem,
    seed: int,
    delta: Optional[float] = None,
    snr_db: Optional[float] = None,
) -> Tuple[NoiseModel, Dict[str, Any]]:
    """
    Noise model for one acquisition and the targets it was calibrated to.

    Precedence: explicit snr_db or overall delta arguments (sweeps), then
    explicit σ in the config, then the config's SNR target, then the
    per-direction Δ targets. Noisy targets also carry the SNR the model gives
    on average and the lateral share of ‖u‖².
    """
    section = config.noise
    fixed = problem.psi.fixed
    sigma_force = (
        section.sigma_force
        if section.sigma_force is not None
        else force_noise_sigma(problem.f_true, section.force_noise_rel)
    )
    if delta is not None:
        if delta == 0:
            return NoiseModel(sigma_force=sigma_force, seed=seed), {"delta": 0.0}
        snr_db = snr_for_delta(delta)
    if snr_db is not None:
        noise = calibrate_noise_snr(
            problem.u, snr_db, section.ratio, fixed, sigma_force=sigma_force, seed=seed
        )
        targets: Dict[str, Any] = {"snr_db": snr_db, "ratio": section.ratio}
        if delta is not None:
            targets["delta"] = delta
        return _with_budget(problem, noise, targets)
    if section.sigma_lateral is not None or section.sigma_axial is not None:
        noise = NoiseModel(
            sigma_lateral=section.sigma_lateral or 0.0,
            sigma_axial=section.sigma_axial or 0.0,
            sigma_force=sigma_force,
            seed=seed,
        )
        targets = {"sigma_lateral": noise.sigma_lateral, "sigma_axial": noise.sigma_axial}
        return _with_budget(problem, noise, targets)
    if section.snr_db is not None:
        noise = calibrate_noise_snr(
            problem.u, section.snr_db, section.ratio, fixed, sigma_force=sigma_force, seed=seed
        )
        return _with_budget(problem, noise, {"snr_db": section.snr_db, "ratio": section.ratio})
    noise = calibrate_noise(
        problem.u,
        section.delta_lateral,
        section.delta_axial,
        fixed,
        sigma_force=sigma_force,
        seed=seed,
    )
    targets = {"delta_lateral": section.delta_lateral, "delta_axial": section.delta_axial}
    return _with_budget(problem, noise, targets)


def solve(
    problem: Problem,
    observation: Observation,
    solver_config: SolverConfig,
    method: str,
) -> Tuple[np.ndarray, SolverTrace]:
    """Run the statistical or baseline reconstruction on one observation."""
    regularizer = TotalVariation(problem.mesh, solver_config.tv_inner_iters)
    if method == "statistical":
        return reconstruct(
            problem.psi,
            observation.f,
            observation.u_m,
            observation.noise,
            solver_config,
            regularizer,
        )
    if method == "baseline":
        return baseline_lsq(
            problem.psi,
            observation.f,
            observation.u_m,
            config=solver_config,
            regularizer=regularizer,
        )
    raise ExperimentError(f"Unknown solver {method!r}; expected one of {SOLVER_NAMES}")


def evaluate(
    E_hat: np.ndarray, problem: Problem, observation: Observation
) -> Dict[str, float]:
    """Quality metrics of a reconstruction together with the realized noise."""
    labels = metrics.RegionLabels.from_phantom(problem.phantom)
    result = dict(observation.realized())
    result["snr_db"] = metrics.snr_db(observation.u, observation.u_m)
    result["rms"] = metrics.rms_error(E_hat, problem.phantom.E_true)
    result["cnr"] = metrics.cnr(E_hat, labels)
    result.update(metrics.region_means(E_hat, labels))
    return result


def select_lambda(
    problem: Problem,
    observation: Observation,
    solver_config: SolverConfig,
    method: str,
    grid: List[float],
) -> Tuple[float, List[Dict[str, Any]]]:
    """
    Oracle λ: the grid value with the lowest RMS error against the phantom.

    Returns:
        (λ, table): The chosen λ and the RMS of every grid point.
    """
    table = []
    for lam in grid:
        try:
            E_hat, _ = solve(problem, observation, replace(solver_config, lam=lam), method)
            rms = metrics.rms_error(E_hat, problem.phantom.E_true)
        except SolverError as e:
            logger.warning(f"λ = {lam:g} failed: {e}")
            rms = math.inf
        table.append({"lambda": lam, "rms": rms})
        logger.info(f"λ grid: λ = {lam:g}, RMS {rms:.4f}")
    best = min(table, key=lambda row: row["rms"])
    if not math.isfinite(best["rms"]):
        raise ExperimentError("Every λ in the grid failed")
    return float(best["lambda"]), table


def _render(enabled: bool, callback: Callable[[], Dict[str, Any]]) -> Optional[Dict[str, Any]]:
    return callback() if enabled else None


def stage_mesh(config: ExperimentConfig, out_dir: str) -> Dict[str, Any]:
    """`mesh` verb: write mesh.txt and a wireframe raster."""
    started = time.perf_counter()
    mesh = build_mesh(config)
    save_mesh(mesh, os.path.join(out_dir, MESH_FILE_NAME))
    manifest = _base_manifest("mesh", config)
    manifest["mesh"] = {
        "file": MESH_FILE_NAME,
        "nodes": mesh.n_nodes,
        "elements": mesh.n_elements,
        "bounds": list(mesh.bounds),
    }
    manifest["rasters"] = {
        "mesh": _render(
            config.output.render,
            lambda: export_mesh_wireframe(
                mesh, os.path.join(out_dir, "mesh.png"), config.output.resolution
            ),
        )
    }
    manifest["wall_seconds"] = time.perf_counter() - started
    save_config(config, out_dir)
    write_manifest(out_dir, manifest)
    return manifest


def _field_raster(
    config: ExperimentConfig, mesh: Mesh, values: np.ndarray, path: str, auto: bool = False
) -> Optional[Dict[str, Any]]:
    output = config.output
    if not output.render:
        return None
    if auto:
        return export_raster(
            values, mesh, path, None, 1.0, output.colormap, output.resolution
        )
    return export_raster(
        values,
        mesh,
        path,
        color_scale=output.color_scale,
        colormap=output.colormap,
        resolution=output.resolution,
    )


def stage_phantom(config: ExperimentConfig, out_dir: str) -> Dict[str, Any]:
    """`phantom` verb: mesh plus the true modulus field."""
    started = time.perf_counter()
    mesh = build_mesh(config)
    section = config.phantom
    phantom = make_phantom(
        mesh, section.background, section.inclusion, section.center, section.radius
    )
    save_mesh(mesh, os.path.join(out_dir, MESH_FILE_NAME))
    write_field_csv(os.path.join(out_dir, "E_true.csv"), phantom.E_true, 1)
    manifest = _base_manifest("phantom", config)
    manifest["phantom"] = phantom.describe()
    manifest["rasters"] = {
        "E_true": _field_raster(
            config, mesh, phantom.E_true, os.path.join(out_dir, "E_true.png")
        )
    }
    manifest["wall_seconds"] = time.perf_counter() - started
    save_config(config, out_dir)
    write_manifest(out_dir, manifest)
    return manifest


def _observe(
    config: ExperimentConfig, problem: Problem, seed: int, **targets: Optional[float]
) -> Tuple[Observation, Dict[str, Any]]:
    noise, calibrated_for = make_noise(config, problem, seed, **targets)
    return observe(problem.u, problem.f_true, noise, problem.psi.fixed), calibrated_for


def stage_forward(config: ExperimentConfig, out_dir: str) -> Dict[str, Any]:
    """`forward` verb: forward solve and the noisy observation dump."""
    started = time.perf_counter()
    problem = build_problem(config)
    seed = config.noise.seeds[0]
    observation, targets = _observe(config, problem, seed)
    save_mesh(problem.mesh, os.path.join(out_dir, MESH_FILE_NAME))
    observation_manifest = save_observation(
        os.path.join(out_dir, "observation"),
        observation,
        problem.phantom,
        problem.loading,
        targets,
    )
    manifest = _base_manifest("forward", config)
    manifest["observation"] = observation_manifest
    manifest["rasters"] = _observation_rasters(config, problem, observation, out_dir)
    manifest["wall_seconds"] = time.perf_counter() - started
    save_config(config, out_dir)
    write_manifest(out_dir, manifest)
    return manifest


def _observation_rasters(
    config: ExperimentConfig, problem: Problem, observation: Observation, out_dir: str
) -> Dict[str, Any]:
    mesh = problem.mesh
    return {
        "E_true": _field_raster(
            config, mesh, problem.phantom.E_true, os.path.join(out_dir, "E_true.png")
        ),
        "u_lateral": _field_raster(
            config, mesh, observation.u_m[0::2], os.path.join(out_dir, "u_lateral.png"), True
        ),
        "u_axial": _field_raster(
            config, mesh, observation.u_m[1::2], os.path.join(out_dir, "u_axial.png"), True
        ),
        "mesh": _render(
            config.output.render,
            lambda: export_mesh_wireframe(
                mesh, os.path.join(out_dir, "mesh.png"), config.output.resolution
            ),
        ),
    }


def _write_reconstruction(
    directory: str, suffix: str, E_hat: np.ndarray, trace: SolverTrace
) -> Dict[str, str]:
    names = {
        "E_hat": f"E_hat{suffix}.csv",
        "trace": TRACE_FILE_NAME.replace(".csv", f"{suffix}.csv"),
        "trace_summary": TRACE_SUMMARY_FILE_NAME.replace(".json", f"{suffix}.json"),
    }
    write_field_csv(os.path.join(directory, names["E_hat"]), E_hat, 1)
    trace.write_csv(os.path.join(directory, names["trace"]))
    trace.write_summary(os.path.join(directory, names["trace_summary"]))
    return names


def run_single(config: ExperimentConfig, out_dir: str) -> Dict[str, Any]:
    """
    Full single-phantom experiment (`reconstruct` verb).

    Writes the mesh, the observation dump, Ê as CSV and raster, the trace
    CSV and summary, and a manifest with realized noise, metrics, λ,
    wall-clock time and every resolved default. A diverged solver is recorded
    in the manifest together with its partial trace.

    Returns:
        Dict: The manifest.
    """
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    problem = build_problem(config)
    seed = config.noise.seeds[0]
    observation, targets = _observe(config, problem, seed)
    save_mesh(problem.mesh, os.path.join(out_dir, MESH_FILE_NAME))
    observation_manifest = save_observation(
        os.path.join(out_dir, "observation"),
        observation,
        problem.phantom,
        problem.loading,
        targets,
    )

    manifest = _base_manifest("reconstruct", config)
    manifest["observation"] = observation_manifest
    manifest["metric_formulas"] = metrics.formulas()

    solver_config = config.solver
    if config.lambda_grid:
        lam, table = select_lambda(
            problem, observation, solver_config, config.method, config.lambda_grid
        )
        solver_config = replace(solver_config, lam=lam)
        manifest["lambda_selection"] = {"chosen": lam, "grid": table, "criterion": "rms"}

    solve_started = time.perf_counter()
    try:
        E_hat, trace = solve(problem, observation, solver_config, config.method)
        status = "ok"
    except SolverDivergedError as e:
        logger.error(f"Reconstruction diverged: {e}")
        E_hat, trace, status = e.estimate, e.trace, "diverged"
        manifest["error"] = str(e)
    solve_seconds = time.perf_counter() - solve_started

    files = _write_reconstruction(out_dir, "", E_hat, trace)
    manifest["solver"] = {
        "method": config.method,
        "status": status,
        "lambda": trace.lam,
        "files": files,
        "wall_seconds": solve_seconds,
    }
    manifest["metrics"] = evaluate(E_hat, problem, observation)
    rasters = _observation_rasters(config, problem, observation, out_dir)
    rasters["E_hat"] = _field_raster(
        config, problem.mesh, E_hat, os.path.join(out_dir, "E_hat.png")
    )
    manifest["rasters"] = rasters
    manifest["status"] = status
    manifest["wall_seconds"] = time.perf_counter() - started
    save_config(config, out_dir)
    write_manifest(out_dir, manifest)
    logger.info(
        f"Reconstruction {status}: RMS {manifest['metrics']['rms']:.4f}, "
        f"CNR {manifest['metrics']['cnr']:.3f}"
    )
    return manifest


def point_directory(out_dir: str, axis: str, value: float, seed: int) -> str:
    return os.path.join(out_dir, "points", f"{axis}-{value:g}_seed{seed}")


def _sweep_point(
    config: ExperimentConfig,
    mesh: Mesh,
    shared: Optional[Problem],
    value: float,
    seed: int,
    solvers: Tuple[str, ...],
    out_dir: str,
) -> List[Dict[str, Any]]:
    """One (value, seed) point: observation plus one reconstruction per solver."""
    axis = config.sweep.axis
    directory = point_directory(out_dir, axis, value, seed)
    os.makedirs(directory, exist_ok=True)
    started = time.perf_counter()
    try:
        if axis == "noise":
            problem = shared or build_problem(config, mesh)
            observation, _ = _observe(config, problem, seed, delta=value)
        else:
            problem = build_problem(config, mesh, inclusion=value)
            observation, _ = _observe(config, problem, seed, snr_db=config.sweep.snr_db)
    except Exception as e:
        logger.error(f"Sweep point {axis}={value:g} seed {seed} could not be set up: {e}")
        error = f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - started
        return [
            {
                "axis": axis,
                "value": value,
                "seed": seed,
                "solver": solver,
                "status": "failed",
                "error": error,
                "wall_seconds": elapsed,
            }
            for solver in solvers
        ]

    rows = []
    for solver in solvers:
        row: Dict[str, Any] = {"axis": axis, "value": value, "seed": seed, "solver": solver}
        started = time.perf_counter()
        try:
            E_hat, trace = solve(problem, observation, config.solver, solver)
            _write_reconstruction(directory, f"_{solver}", E_hat, trace)
            if config.output.render:
                _field_raster(
                    config, mesh, E_hat, os.path.join(directory, f"E_hat_{solver}.png")
                )
            row.update(evaluate(E_hat, problem, observation))
            row["lam"] = trace.lam
            row["status"] = "ok"
        except Exception as e:
            logger.error(f"Sweep point {axis}={value:g} seed {seed} ({solver}) failed: {e}")
            row.update(observation.realized())
            row["status"] = "failed"
            row["error"] = f"{type(e).__name__}: {e}"
        row["wall_seconds"] = time.perf_counter() - started
        rows.append(row)
    return rows


def _format(value: Any) -> Any:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return "" if value is None else value


def write_sweep_csv(path: str, rows: List[Dict[str, Any]]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format(row.get(key)) for key in SWEEP_COLUMNS})


def aggregate(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Mean and population std of each metric per (value, solver) over ok rows."""
    groups: Dict[Tuple[float, str], List[Dict[str, Any]]] = {}
    for row in rows:
        if row["status"] == "ok":
            groups.setdefault((row["value"], row["solver"]), []).append(row)
    summary = []
    for (value, solver), members in sorted(groups.items()):
        entry: Dict[str, Any] = {"value": value, "solver": solver, "n": len(members)}
        for name in SUMMARY_METRICS:
            samples = np.array([m[name] for m in members], dtype=float)
            entry[f"{name}_mean"] = float(np.mean(samples))
            finite = np.all(np.isfinite(samples))
            entry[f"{name}_std"] = float(np.std(samples)) if finite else math.nan
        summary.append(entry)
    return summary


def write_summary_csv(path: str, summary: List[Dict[str, Any]]) -> None:
    columns = ["value", "solver", "n"]
    for name in SUMMARY_METRICS:
        columns += [f"{name}_mean", f"{name}_std"]
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for entry in summary:
            writer.writerow({key: _format(entry[key]) for key in columns})


def run_sweep(
    config: ExperimentConfig,
    out_dir: str,
    fresh: bool = False,
    check_shutdown: Optional[Callable[[], bool]] = None,
) -> Dict[str, Any]:
    """
    Noise or contrast sweep over values × seeds × both solvers.

    Points run on a thread pool; the main thread stores each finished point
    in the results database, so an interrupted sweep resumes where it
    stopped unless `fresh` is set. The sweep CSV and the per-value summary
    are written from an ordered query of the store. Requires db.init().

    Returns:
        Dict: The sweep manifest.
    """
    started = time.perf_counter()
    axis = config.sweep.axis
    values = config.sweep.resolved_values()
    seeds = list(config.noise.seeds)
    if fresh:
        removed = db.clear_points(axis)
        logger.info(f"Fresh sweep: removed {removed} stored points")
    done = db.completed_points(axis)

    mesh = build_mesh(config)
    save_mesh(mesh, os.path.join(out_dir, MESH_FILE_NAME))
    # Warm lazily computed mesh data before threads share it.
    _ = (mesh.edges, mesh.edge_lengths, mesh.element_dofs, mesh.signed_areas)
    shared = build_problem(config, mesh) if axis == "noise" else None
    if shared is not None:
        _ = (shared.psi.free_dofs, shared.psi.fixed_dofs, shared.psi._scatter_index)

    tasks = []
    for value in values:
        for seed in seeds:
            pending = tuple(s for s in SOLVER_NAMES if (float(value), seed, s) not in done)
            if pending:
                tasks.append((value, seed, pending))
    skipped = len(values) * len(seeds) - len(tasks)
    logger.info(
        f"Sweep over {axis}: {len(tasks)} points to run, {skipped} already complete"
    )

    processed = 0
    failed = 0
    with concurrent.futures.ThreadPoolExecutor(
        max_workers=config.sweep.workers
    ) as executor:
        future_to_point = {
            executor.submit(
                _sweep_point, config, mesh, shared, value, seed, pending, out_dir
            ): (value, seed)
            for value, seed, pending in tasks
        }
        for future in concurrent.futures.as_completed(future_to_point):
            value, seed = future_to_point[future]
            if check_shutdown and check_shutdown():
                for other in future_to_point:
                    if not other.running():
                        other.cancel()
            try:
                if future.cancelled():
                    continue
                for row in future.result():
                    db.save_point(row)
                    failed += row["status"] != "ok"
            except concurrent.futures.CancelledError:
                logger.info(f"Point {axis}={value:g} seed {seed} was cancelled")
                continue
            processed += 1
            if processed % PROGRESS_LOG_INTERVAL == 0 or processed == len(tasks):
                logger.info(f"Processed {processed}/{len(tasks)} sweep points...")

    interrupted = bool(check_shutdown and check_shutdown())
    rows = db.sweep_rows(axis, values)
    write_sweep_csv(os.path.join(out_dir, SWEEP_FILE_NAME), rows)
    summary = aggregate(rows)
    write_summary_csv(os.path.join(out_dir, SWEEP_SUMMARY_FILE_NAME), summary)

    manifest = _base_manifest("sweep", config)
    manifest["sweep"] = {
        "axis": axis,
        "values": values,
        "seeds": seeds,
        "solvers": list(SOLVER_NAMES),
        "rows": len(rows),
        "failed_this_run": failed,
        "resumed_points": skipped,
        "interrupted": interrupted,
        "files": {"rows": SWEEP_FILE_NAME, "summary": SWEEP_SUMMARY_FILE_NAME},
        "noise_mapping": (
            "overall delta converted to SNR with lateral/axial ratio"
            if axis == "noise"
            else f"calibrated to {config.sweep.snr_db} dB SNR"
        ),
    }
    manifest["metric_formulas"] = metrics.formulas()
    manifest["summary"] = summary
    manifest["status"] = "interrupted" if interrupted else "ok"
    manifest["wall_seconds"] = time.perf_counter() - started
    save_config(config, out_dir)
    write_manifest(out_dir, manifest)
    if interrupted:
        logger.info("Sweep was interrupted. Partial results saved.")
    else:
        logger.info(f"Sweep complete: {len(rows)} rows, {failed} failed")
    return manifest


def render_field(
    config: ExperimentConfig,
    mesh_path: str,
    field_path: str,
    out_path: str,
    component: Optional[str] = None,
) -> Dict[str, Any]:
    """
    `render` verb: rasterize a nodal CSV field over a mesh file.

    Two-column (lateral, axial) fields need `component`; they are drawn on
    their own data range, single-column fields on the configured modulus
    color scale.

    Raises:
        ExperimentError: If the CSV cannot be read or does not fit the mesh.
    """
    mesh = load_mesh(mesh_path)
    try:
        data = np.loadtxt(field_path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ExperimentError(f"Cannot read field {field_path}: {e}")
    auto = False
    if data.shape[1] == 2:
        if component not in ("lateral", "axial"):
            raise ExperimentError(
                f"{field_path} has two columns; pass --component lateral or axial"
            )
        data, auto = data[:, 0 if component == "lateral" else 1], True
    elif data.shape[1] == 1:
        data = data[:, 0]
    else:
        raise ExperimentError(f"{field_path} must have one or two columns")
    if data.shape[0] != mesh.n_nodes:
        raise ExperimentError(
            f"{field_path} has {data.shape[0]} rows but the mesh has {mesh.n_nodes} nodes"
        )
    forced = replace(config, output=replace(config.output, render=True))
    rendered = _field_raster(forced, mesh, data, out_path, auto)
    return {"verb": "render", "raster": rendered, "mesh": mesh_path, "field": field_path}
