"""
Constants and configuration defaults for the elasticity imaging package.
"""

from typing import List, Tuple

# Mesh defaults
DEFAULT_WIDTH: float = 1.0
DEFAULT_HEIGHT: float = 1.0
DEFAULT_TARGET_NODES: int = 400
DEFAULT_JITTER: float = 0.2
DEFAULT_THICKNESS: float = 1.0
MESH_MAX_RETRIES: int = 5
MESH_NODE_TOLERANCE: float = 0.10
BOUNDARY_NAMES: Tuple[str, ...] = ("top", "bottom", "left", "right")

# Material
DEFAULT_POISSON_RATIO: float = 0.495

# Phantom (pascals, meters)
DEFAULT_BACKGROUND_MODULUS: float = 10e3
DEFAULT_INCLUSION_MODULUS: float = 50e3
DEFAULT_INCLUSION_CENTER: Tuple[float, float] = (0.5, 0.6)
DEFAULT_INCLUSION_RADIUS: float = 0.2

# Loading: peak axial displacement of roughly this fraction of the height
DEFAULT_STRAIN: float = 0.01

# Noise protocol
DEFAULT_DELTA_LATERAL: float = 0.09
DEFAULT_DELTA_AXIAL: float = 0.03
DEFAULT_FORCE_NOISE_REL: float = 0.01
NOISE_CALIBRATION_SAMPLES: int = 32

# Solver defaults
DEFAULT_OUTER_ITERS: int = 10
DEFAULT_INNER_ITERS: int = 50
DEFAULT_TV_INNER_ITERS: int = 100
DEFAULT_TOLERANCE: float = 1e-6
DEFAULT_ACCELERATION: str = "fista"
DEFAULT_LAMBDA_REL: float = 1e-3
DEFAULT_FLOOR: float = 0.0
DEFAULT_SIGMA_FLOOR_REL: float = 1e-6
STEP_SAFETY: float = 0.9
MAX_STEP_HALVINGS: int = 10
DIVERGENCE_FACTOR: float = 1e6
GAMMA_JITTER: float = 1e-12
POWER_ITER_MAX: int = 200
POWER_ITER_RTOL: float = 1e-4
POWER_ITER_SEED: int = 0

# Rendering
DEFAULT_RESOLUTION: int = 256
DEFAULT_COLORMAP: str = "viridis"
FALLBACK_COLORMAP: str = "gray"
COLOR_UNIT: float = 100e3
DEFAULT_COLOR_SCALE: Tuple[float, float] = (0.0, 1.0)

# Sweeps
DEFAULT_NOISE_SWEEP: List[float] = [0.001, 0.01, 0.03, 0.05, 0.10]
DEFAULT_CONTRAST_SWEEP: List[float] = [30e3, 50e3]
DEFAULT_CONTRAST_SNR_DB: float = 30.0
DEFAULT_SEEDS: List[int] = [0]
DEFAULT_WORKERS: int = 4

# File names
MESH_FILE_NAME: str = "mesh.txt"
MANIFEST_FILE_NAME: str = "manifest.json"
TRACE_FILE_NAME: str = "trace.csv"
TRACE_SUMMARY_FILE_NAME: str = "trace_summary.json"
SWEEP_FILE_NAME: str = "sweep.csv"
SWEEP_SUMMARY_FILE_NAME: str = "sweep_summary.csv"
DATABASE_FILE_NAME: str = "results.db"
FLOAT_FORMAT: str = "%.17g"

# Logging Configuration
LOG_FORMAT: str = "%(asctime)s - %(levelname)s: %(message)s"
PROGRESS_LOG_INTERVAL: int = 5
