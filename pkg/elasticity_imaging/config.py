"""
Experiment configuration.

A single YAML file with the sections mesh, phantom, loading, noise, solver,
sweep and output. Every key is optional; missing keys take the defaults in
constants.py and unknown keys are rejected. The fully resolved configuration
is echoed into every manifest and written next to the results as
config.yaml, so any run can be repeated from its output directory.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar, Union, get_type_hints

import yaml

from .constants import (
    DEFAULT_BACKGROUND_MODULUS,
    DEFAULT_COLOR_SCALE,
    DEFAULT_COLORMAP,
    DEFAULT_CONTRAST_SNR_DB,
    DEFAULT_CONTRAST_SWEEP,
    DEFAULT_DELTA_AXIAL,
    DEFAULT_DELTA_LATERAL,
    DEFAULT_FORCE_NOISE_REL,
    DEFAULT_HEIGHT,
    DEFAULT_INCLUSION_CENTER,
    DEFAULT_INCLUSION_MODULUS,
    DEFAULT_INCLUSION_RADIUS,
    DEFAULT_JITTER,
    DEFAULT_NOISE_SWEEP,
    DEFAULT_POISSON_RATIO,
    DEFAULT_RESOLUTION,
    DEFAULT_SEEDS,
    DEFAULT_STRAIN,
    DEFAULT_TARGET_NODES,
    DEFAULT_THICKNESS,
    DEFAULT_WIDTH,
    DEFAULT_WORKERS,
)
from .inverse import SolverConfig, SolverError

logger = logging.getLogger(__name__)

SOLVERS = ("statistical", "baseline")
SWEEP_AXES = ("noise", "contrast")
CONFIG_FILE_NAME = "config.yaml"

T = TypeVar("T")


class ConfigError(Exception):
    """Custom exception for configuration errors."""

    pass


@dataclass(frozen=True)
class MeshSection:
    width: float = DEFAULT_WIDTH
    height: float = DEFAULT_HEIGHT
    target_nodes: int = DEFAULT_TARGET_NODES
    jitter: float = DEFAULT_JITTER
    seed: int = 0
    thickness: float = DEFAULT_THICKNESS
    path: Optional[str] = None


@dataclass(frozen=True)
class PhantomSection:
    background: float = DEFAULT_BACKGROUND_MODULUS
    inclusion: float = DEFAULT_INCLUSION_MODULUS
    center: Tuple[float, float] = DEFAULT_INCLUSION_CENTER
    radius: float = DEFAULT_INCLUSION_RADIUS
    poisson_ratio: float = DEFAULT_POISSON_RATIO


@dataclass(frozen=True)
class LoadingSection:
    """traction None means strain × background modulus."""

    traction: Optional[float] = None
    strain: float = DEFAULT_STRAIN


@dataclass(frozen=True)
class NoiseSection:
    """
    Noise protocol.

    Explicit sigma_lateral/sigma_axial override the Δ calibration; snr_db,
    when set, calibrates to an overall SNR with Δ_lat = ratio × Δ_ax.
    """

    delta_lateral: float = DEFAULT_DELTA_LATERAL
    delta_axial: float = DEFAULT_DELTA_AXIAL
    sigma_lateral: Optional[float] = None
    sigma_axial: Optional[float] = None
    snr_db: Optional[float] = None
    ratio: float = 3.0
    sigma_force: Optional[float] = None
    force_noise_rel: float = DEFAULT_FORCE_NOISE_REL
    seeds: List[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))


@dataclass(frozen=True)
class SweepSection:
    """values None selects the default list for the axis."""

    axis: str = "noise"
    values: Optional[List[float]] = None
    snr_db: float = DEFAULT_CONTRAST_SNR_DB
    workers: int = DEFAULT_WORKERS

    def resolved_values(self) -> List[float]:
        if self.values is not None:
            return list(self.values)
        return list(DEFAULT_NOISE_SWEEP if self.axis == "noise" else DEFAULT_CONTRAST_SWEEP)


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    resolution: int = DEFAULT_RESOLUTION
    colormap: str = DEFAULT_COLORMAP
    color_scale: Tuple[float, float] = DEFAULT_COLOR_SCALE
    render: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration."""

    mesh: MeshSection = field(default_factory=MeshSection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    loading: LoadingSection = field(default_factory=LoadingSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    solver: SolverConfig = field(default_factory=SolverConfig)
    method: str = "statistical"
    lambda_grid: Optional[List[float]] = None
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def resolved(self) -> Dict[str, Any]:
        """Plain-data form with every default filled in; loadable by from_dict."""
        solver = asdict(self.solver)
        solver["lambda"] = solver.pop("lam")
        solver["method"] = self.method
        solver["lambda_grid"] = self.lambda_grid
        sweep = asdict(self.sweep)
        sweep["values"] = self.sweep.resolved_values()
        return _plain(
            {
                "mesh": asdict(self.mesh),
                "phantom": asdict(self.phantom),
                "loading": asdict(self.loading),
                "noise": asdict(self.noise),
                "solver": solver,
                "sweep": sweep,
                "output": asdict(self.output),
            }
        )

    def with_overrides(
        self,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        method: Optional[str] = None,
        directory: Optional[str] = None,
    ) -> "ExperimentConfig":
        """Apply command-line overrides."""
        config = self
        if seed is not None:
            config = replace(config, noise=replace(config.noise, seeds=[seed]))
        if workers is not None:
            if workers < 1:
                raise ConfigError(f"workers must be at least 1, got {workers}")
            config = replace(config, sweep=replace(config.sweep, workers=workers))
        if method is not None:
            if method not in SOLVERS:
                raise ConfigError(f"solver must be one of {SOLVERS}, got {method!r}")
            config = replace(config, method=method)
        if directory is not None:
            config = replace(config, output=replace(config.output, directory=directory))
        return config


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def _coerce(value: Any, hint: Any, where: str) -> Any:
    """Convert a YAML scalar or list to the annotated field type."""
    origin = getattr(hint, "__origin__", None)
    args = getattr(hint, "__args__", ())
    if origin is Union:
        if value is None:
            return None
        inner = [arg for arg in args if arg is not type(None)]
        return _coerce(value, inner[0], where)
    if origin in (list, List):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list, got {value!r}")
        return [_coerce(item, args[0], f"{where}[]") for item in value]
    if origin in (tuple, Tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(args):
            raise ConfigError(f"{where} must be a list of {len(args)} numbers")
        return tuple(_coerce(item, arg, where) for item, arg in zip(value, args))
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if hint is float:
        # YAML 1.1 reads exponents without a dot (1e-3) as strings.
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{where} must be a number, got {value!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    return value


def _section(cls: Type[T], data: Any, name: str) -> T:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{name}' must be a mapping")
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in section '{name}': {', '.join(unknown)}")
    kwargs = {key: _coerce(value, hints[key], f"{name}.{key}") for key, value in data.items()}
    return cls(**kwargs)


def _validate(config: ExperimentConfig) -> None:
    mesh, phantom, noise, sweep = config.mesh, config.phantom, config.noise, config.sweep
    if mesh.width <= 0 or mesh.height <= 0:
        raise ConfigError("mesh.width and mesh.height must be positive")
    if not 0.0 <= phantom.poisson_ratio < 0.5:
        raise ConfigError(
            f"phantom.poisson_ratio must lie in [0, 0.5), got {phantom.poisson_ratio}"
        )
    if phantom.background <= 0 or phantom.inclusion <= 0:
        raise ConfigError("phantom moduli must be positive")
    if not noise.seeds:
        raise ConfigError("noise.seeds must not be empty")
    if noise.ratio <= 0:
        raise ConfigError(f"noise.ratio must be positive, got {noise.ratio}")
    if sweep.axis not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}, got {sweep.axis!r}")
    if sweep.values is not None and not sweep.values:
        raise ConfigError("sweep.values must not be empty")
    if sweep.values:
        if sweep.axis == "noise":
            bad = [v for v in sweep.values if not 0.0 <= v < 1.0]
            expected = "noise levels in [0, 1)"
        else:
            bad = [v for v in sweep.values if not v > 0]
            expected = "positive inclusion moduli"
        if bad:
            raise ConfigError(f"sweep.values must be {expected}, got {bad}")
    if sweep.workers < 1:
        raise ConfigError(f"sweep.workers must be at least 1, got {sweep.workers}")
    if config.method not in SOLVERS:
        raise ConfigError(f"solver.method must be one of {SOLVERS}, got {config.method!r}")
    if config.lambda_grid is not None and (
        not config.lambda_grid or min(config.lambda_grid) < 0
    ):
        raise ConfigError("solver.lambda_grid must be a nonempty list of λ ≥ 0")
    lo, hi = config.output.color_scale
    if not hi > lo:
        raise ConfigError(f"output.color_scale must be increasing, got {(lo, hi)}")
    if config.output.resolution < 2:
        raise ConfigError("output.resolution must be at least 2")


def from_dict(data: Optional[Dict[str, Any]]) -> ExperimentConfig:
    """
    Build a configuration from parsed YAML.

    Raises:
        ConfigError: On unknown sections or keys, wrong types or invalid values.
    """
    data = dict(data or {})
    sections = ("mesh", "phantom", "loading", "noise", "solver", "sweep", "output")
    unknown = sorted(set(data) - set(sections))
    if unknown:
        raise ConfigError(f"Unknown section(s): {', '.join(unknown)}")

    solver_data = dict(data.get("solver") or {})
    method = solver_data.pop("method", "statistical")
    lambda_grid = solver_data.pop("lambda_grid", None)
    if "lambda" in solver_data:
        solver_data["lam"] = solver_data.pop("lambda")
    try:
        solver = _section(SolverConfig, solver_data, "solver")
    except SolverError as e:
        raise ConfigError(str(e))

    config = ExperimentConfig(
        mesh=_section(MeshSection, data.get("mesh"), "mesh"),
        phantom=_section(PhantomSection, data.get("phantom"), "phantom"),
        loading=_section(LoadingSection, data.get("loading"), "loading"),
        noise=_section(NoiseSection, data.get("noise"), "noise"),
        solver=solver,
        method=_coerce(method, str, "solver.method"),
        lambda_grid=_coerce(lambda_grid, Optional[List[float]], "solver.lambda_grid"),
        sweep=_section(SweepSection, data.get("sweep"), "sweep"),
        output=_section(OutputSection, data.get("output"), "output"),
    )
    _validate(config)
    return config


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """
    Load a YAML configuration; None gives the defaults.

    Raises:
        ConfigError: If the file cannot be read or parsed, or is invalid.
    """
    if path is None:
        return from_dict({})
    try:
        with open(path, "r") as handle:
            data = yaml.safe_load(handle)
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}")
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"Configuration {path} must be a mapping of sections")
    logger.info(f"Loaded configuration from {path}")
    return from_dict(data)


def save_config(config: ExperimentConfig, directory: str) -> str:
    """Write the resolved configuration as config.yaml and return its path."""
    path = os.path.join(directory, CONFIG_FILE_NAME)
    with open(path, "w") as handle:
        yaml.safe_dump(config.resolved(), handle, sort_keys=False)
    return path
