import argparse
import json
import logging
import os
import signal
import sys
from typing import Any, Dict, List, Optional

from . import db, experiment
from .config import ConfigError, ExperimentConfig, load_config
from .constants import LOG_FORMAT
from .fem_core import FEMError
from .inverse import SolverError
from .mesh import MeshError
from .metrics import MetricError
from .render import RenderError
from .synth import SynthError

VERBS = ["mesh", "phantom", "forward", "reconstruct", "sweep", "render"]
HANDLED_ERRORS = (
    ConfigError,
    MeshError,
    FEMError,
    SynthError,
    SolverError,
    MetricError,
    RenderError,
    db.DatabaseError,
    experiment.ExperimentError,
)


class ApplicationError(Exception):
    """Custom exception for application-level errors."""

    pass


def prepare_output_dir(out_dir: str) -> None:
    """
    Create the output directory if it doesn't exist.

    Args:
        out_dir (str): The path where results are written.

    Raises:
        ApplicationError: If directory creation fails.
    """
    try:
        if not os.path.exists(out_dir):
            os.makedirs(out_dir)
    except Exception as e:
        raise ApplicationError(f"Failed to create output directory {out_dir}: {e}")


def setup_signal_handler(
    shutdown_requested: Optional[List[bool]] = None,
) -> Any:
    """
    Set up a signal handler for graceful shutdown.

    The first SIGINT asks running sweep points to finish and pending ones to
    be cancelled; the second exits immediately.

    Args:
        shutdown_requested: Mutable container for shutdown state.

    Returns:
        The original signal handler.
    """

    def handle_sigint(sig: Any, frame: Any) -> None:
        if shutdown_requested is not None and not shutdown_requested[0]:
            logging.info("Shutdown requested. Waiting for running points to complete...")
            shutdown_requested[0] = True
        else:
            logging.warning("Forced shutdown. Exiting immediately.")
            sys.exit(1)

    original_sigint_handler = signal.getsignal(signal.SIGINT)
    signal.signal(signal.SIGINT, handle_sigint)
    return original_sigint_handler


def setup_logging(verbose: bool = False) -> None:
    """Set up application logging configuration."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
    )


def create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure the command line argument parser."""
    parser = argparse.ArgumentParser(
        description="Statistical elasticity imaging: phantoms, noisy observations "
        "and Young's modulus reconstruction",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Commands:
  mesh           Generate (or load) the mesh and write mesh.txt
  phantom        Mesh plus the true modulus field
  forward        Forward solve and noisy observation dump
  reconstruct    Full single-phantom experiment with metrics and rasters
  sweep          Noise or contrast sweep, both solvers, resumable
  render         Rasterize a nodal CSV field over a mesh file

Examples:
  %(prog)s reconstruct --config experiment.yaml --out ./results
  %(prog)s sweep --config sweep.yaml --out ./sweep --workers 8
  %(prog)s sweep --config sweep.yaml --out ./sweep --fresh
  %(prog)s render --mesh ./results/mesh.txt --field ./results/E_hat.csv --out ./img
        """,
    )

    parser.add_argument("command", choices=VERBS, help="The command to run")
    parser.add_argument("--config", help="YAML experiment configuration")
    parser.add_argument(
        "--out", help="Output directory (default: output.directory of the config)"
    )
    parser.add_argument("--seed", type=int, help="Use this single noise seed")
    parser.add_argument("--workers", type=int, help="Worker threads for sweeps")
    parser.add_argument(
        "--solver",
        choices=["statistical", "baseline"],
        help="Reconstruction method for the reconstruct command",
    )
    parser.add_argument(
        "--fresh",
        action="store_true",
        help="Discard stored sweep points instead of resuming",
    )
    parser.add_argument("--mesh", help="Mesh file for the render command")
    parser.add_argument("--field", help="Nodal CSV field for the render command")
    parser.add_argument(
        "--component",
        choices=["lateral", "axial"],
        help="Component of a two-column field to render",
    )
    parser.add_argument("--verbose", action="store_true", help="Log every iteration")

    return parser


def emit_error(error: BaseException) -> None:
    """Print a machine-readable error object on stdout."""
    print(json.dumps({"error": type(error).__name__, "message": str(error)}))


def run_command(
    command: str,
    args: argparse.Namespace,
    config: ExperimentConfig,
    out_dir: str,
    check_shutdown: Any,
) -> Dict[str, Any]:
    if command == "mesh":
        return experiment.stage_mesh(config, out_dir)
    if command == "phantom":
        return experiment.stage_phantom(config, out_dir)
    if command == "forward":
        return experiment.stage_forward(config, out_dir)
    if command == "reconstruct":
        return experiment.run_single(config, out_dir)
    if command == "sweep":
        return experiment.run_sweep(
            config, out_dir, fresh=args.fresh, check_shutdown=check_shutdown
        )
    stem = os.path.splitext(os.path.basename(args.field))[0]
    return experiment.render_field(
        config,
        args.mesh,
        args.field,
        os.path.join(out_dir, f"{stem}.png"),
        component=args.component,
    )


def main(argv: Optional[List[str]] = None) -> None:
    """Main application entry point."""
    parser = create_argument_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    if args.command == "render" and not (args.mesh and args.field):
        parser.error("--mesh and --field are required for the render command")

    try:
        config = load_config(args.config).with_overrides(
            seed=args.seed,
            workers=args.workers,
            method=args.solver,
            directory=args.out,
        )
        out_dir = config.output.directory
        prepare_output_dir(out_dir)
    except (ConfigError, ApplicationError) as e:
        logging.error(f"Operation failed: {e}")
        emit_error(e)
        sys.exit(1)

    shutdown_state = [False]

    def check_shutdown() -> bool:
        return shutdown_state[0]

    original_sigint_handler = setup_signal_handler(shutdown_requested=shutdown_state)
    db_conn = None
    run_id: Optional[int] = None
    try:
        db_conn = db.init(out_dir)
        run_id = db.start_run(args.command)
        manifest = run_command(args.command, args, config, out_dir, check_shutdown)
        db.finish_run(run_id, manifest.get("status", "ok"), manifest)
        logging.info("Operation completed successfully")
        print(json.dumps({"status": manifest.get("status", "ok"), "out": out_dir}))
    except HANDLED_ERRORS as e:
        logging.error(f"Operation failed: {e}")
        _record_failure(run_id, e)
        emit_error(e)
        sys.exit(1)
    except KeyboardInterrupt:
        logging.info("Operation cancelled by user")
        sys.exit(0)
    except Exception as e:
        logging.error(f"Unexpected error: {e}")
        _record_failure(run_id, e)
        emit_error(e)
        sys.exit(1)
    finally:
        signal.signal(signal.SIGINT, original_sigint_handler)
        if db_conn is not None:
            db_conn.close()


def _record_failure(run_id: Optional[int], error: BaseException) -> None:
    if run_id is None:
        return
    try:
        db.finish_run(run_id, "failed", {"error": type(error).__name__, "message": str(error)})
    except db.DatabaseError as e:
        logging.error(f"Could not record the failure: {e}")


if __name__ == "__main__":
    main()
