"""Elasticity imaging package.

Finite-element forward model with the stiffness linear in the Young's
modulus, synthetic noisy observations of inclusion phantoms, and modulus
reconstruction by fixed-point proximal splitting with colored-noise weighting.
"""

__version__ = "0.1.0"

from .fem_core import assemble_psi, dmatrix, stiffness_apply
from .inverse import SolverConfig, baseline_lsq, reconstruct
from .mesh import Mesh, generate_mesh, load_mesh, save_mesh
from .metrics import cnr, rms_error, snr_db
from .prox import TotalVariation, prox_nonneg, prox_tv
from .synth import calibrate_noise, forward_solve, make_phantom

__all__ = [
    "Mesh",
    "generate_mesh",
    "load_mesh",
    "save_mesh",
    "assemble_psi",
    "stiffness_apply",
    "dmatrix",
    "make_phantom",
    "forward_solve",
    "calibrate_noise",
    "TotalVariation",
    "prox_tv",
    "prox_nonneg",
    "SolverConfig",
    "reconstruct",
    "baseline_lsq",
    "cnr",
    "rms_error",
    "snr_db",
]
