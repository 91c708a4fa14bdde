"""
Synthetic phantoms and noisy observations.

A circular-inclusion phantom is loaded by a uniform downward traction on the
top boundary with the bottom boundary fixed; the ideal forward problem gives
the true displacements, and Gaussian noise with distinct lateral and axial
variances (plus force noise) gives the observations (u^m, f).
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .constants import (
    DEFAULT_BACKGROUND_MODULUS,
    DEFAULT_FORCE_NOISE_REL,
    DEFAULT_INCLUSION_CENTER,
    DEFAULT_INCLUSION_MODULUS,
    DEFAULT_INCLUSION_RADIUS,
    DEFAULT_STRAIN,
    FLOAT_FORMAT,
    NOISE_CALIBRATION_SAMPLES,
)
from .fem_core import PsiTensor, factorize_spd, split_components, stiffness_apply
from .mesh import Mesh

logger = logging.getLogger(__name__)

FORWARD_RTOL = 1e-10


class SynthError(Exception):
    """Custom exception for phantom and observation generation errors."""

    pass


@dataclass(frozen=True, eq=False)
class Phantom:
    """
    Ground-truth modulus field with one circular inclusion.

    Attributes:
        E_true: Nodal Young's modulus in pascals.
        inside: Boolean mask of nodes inside the inclusion.
        center: Inclusion center (x, y) in meters.
        radius: Inclusion radius in meters.
        inclusion_modulus: Modulus inside the circle in pascals.
        background_modulus: Modulus outside the circle in pascals.
    """

    E_true: np.ndarray
    inside: np.ndarray
    center: Tuple[float, float]
    radius: float
    inclusion_modulus: float
    background_modulus: float

    def describe(self) -> Dict[str, Any]:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "inclusion_modulus": self.inclusion_modulus,
            "background_modulus": self.background_modulus,
            "inclusion_nodes": int(self.inside.sum()),
        }


def make_phantom(
    mesh: Mesh,
    background: float = DEFAULT_BACKGROUND_MODULUS,
    inclusion_modulus: float = DEFAULT_INCLUSION_MODULUS,
    center: Tuple[float, float] = DEFAULT_INCLUSION_CENTER,
    radius: float = DEFAULT_INCLUSION_RADIUS,
) -> Phantom:
    """
    Assign the inclusion modulus to nodes inside the circle, background elsewhere.

    Raises:
        SynthError: If a modulus or the radius is not positive.
    """
    if radius <= 0:
        raise SynthError(f"Inclusion radius must be positive, got {radius}")
    if background <= 0 or inclusion_modulus <= 0:
        raise SynthError(
            f"Moduli must be positive, got background {background} "
            f"and inclusion {inclusion_modulus}"
        )
    cx, cy = float(center[0]), float(center[1])
    xmin, ymin, xmax, ymax = mesh.bounds
    nearest_x = min(max(cx, xmin), xmax)
    nearest_y = min(max(cy, ymin), ymax)
    if np.hypot(cx - nearest_x, cy - nearest_y) >= radius:
        logger.warning(
            f"Inclusion at ({cx}, {cy}) with radius {radius} lies outside the domain"
        )

    inside = np.hypot(mesh.nodes[:, 0] - cx, mesh.nodes[:, 1] - cy) <= radius
    E_true = np.where(inside, float(inclusion_modulus), float(background))
    E_true.setflags(write=False)
    inside.setflags(write=False)
    return Phantom(
        E_true=E_true,
        inside=inside,
        center=(cx, cy),
        radius=float(radius),
        inclusion_modulus=float(inclusion_modulus),
        background_modulus=float(background),
    )


@dataclass(frozen=True, eq=False)
class Loading:
    """
    Uniform compression: downward traction on top, bottom nodes fixed at zero.

    Attributes:
        traction: Traction magnitude on the top boundary in pascals.
        force: (2N,) consistent nodal force vector f_true in newtons.
        dirichlet: Nodes with zero prescribed displacement.
    """

    traction: float
    force: np.ndarray
    dirichlet: Tuple[int, ...]

    def describe(self) -> Dict[str, Any]:
        return {
            "neumann": f"uniform downward traction {self.traction:g} Pa on top",
            "dirichlet": "bottom boundary fixed (u_lat = u_ax = 0)",
            "assumption": (
                "bottom fixed instead of traction-free to remove rigid-body modes"
            ),
            "force_field": "assembled directly from the applied traction",
        }


def default_traction(background: float, strain: float = DEFAULT_STRAIN) -> float:
    """Traction giving roughly `strain` × height peak axial displacement."""
    return strain * background


def uniform_compression(mesh: Mesh, traction: float) -> Loading:
    """
    Build the loading for a traction on the top boundary edges.

    Each top edge of length L contributes t·L·traction/2 downward at both of
    its nodes.
    """
    top = set(mesh.boundary_sets["top"].tolist())
    boundary_edges = mesh.edges[mesh.edge_counts == 1]
    force = np.zeros(mesh.n_dofs)
    for a, b in boundary_edges:
        if a in top and b in top:
            length = float(np.hypot(*(mesh.nodes[b] - mesh.nodes[a])))
            share = 0.5 * traction * mesh.thickness * length
            force[2 * a + 1] -= share
            force[2 * b + 1] -= share
    bottom = tuple(int(n) for n in mesh.boundary_sets["bottom"])
    for node in bottom:
        force[2 * node : 2 * node + 2] = 0.0
    force.setflags(write=False)
    return Loading(traction=float(traction), force=force, dirichlet=bottom)


def forward_solve(
    psi: PsiTensor, E_true: np.ndarray, loading: Loading
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve K(E_true)·u = f_true for the true displacements.

    Args:
        psi: Tensor assembled with `loading.dirichlet` as its Dirichlet set.
        E_true: Positive nodal modulus.
        loading: Applied traction and boundary conditions.

    Returns:
        (u, f_true): displacement and force FieldVectors.

    Raises:
        SynthError: If E_true is not positive.
        FactorizationError: If K(E_true) is not positive definite.
    """
    E_true = np.asarray(E_true, dtype=float)
    if not np.all(E_true > 0):
        raise SynthError("Forward solve requires a strictly positive modulus field")
    f_true = np.array(loading.force, dtype=float)
    f_true[psi.fixed] = 0.0

    K = psi.system_matrix(E_true)
    factor = factorize_spd(K, "stiffness matrix K(E_true)")
    rhs = psi.lift(E_true, f_true)
    u = scipy.linalg.cho_solve(factor, rhs)
    # One step of iterative refinement.
    u += scipy.linalg.cho_solve(factor, rhs - K @ u)

    scale = max(np.linalg.norm(f_true), np.finfo(float).tiny)
    residual = np.linalg.norm(stiffness_apply(psi, E_true, u) - f_true) / scale
    if np.any(f_true) and residual > FORWARD_RTOL:
        logger.warning(f"Forward solve relative residual {residual:.2e}")
    logger.debug(f"Forward solve residual {residual:.2e}")
    return u, f_true


@dataclass(frozen=True)
class NoiseModel:
    """
    Diagonal noise covariances: Σ_n (lateral/axial) and Σ_w (force).

    Attributes:
        sigma_lateral: Lateral displacement noise std in meters.
        sigma_axial: Axial displacement noise std in meters.
        sigma_force: Force noise std in newtons.
        seed: Seed for the noise generators.
    """

    sigma_lateral: float = 0.0
    sigma_axial: float = 0.0
    sigma_force: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("sigma_lateral", "sigma_axial", "sigma_force"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise SynthError(f"{name} must be finite and non-negative, got {value}")

    def displacement_variances(self, fixed: np.ndarray) -> np.ndarray:
        """Diagonal of Σ_n; zero on Dirichlet DOFs."""
        variances = np.empty(fixed.size)
        variances[0::2] = self.sigma_lateral**2
        variances[1::2] = self.sigma_axial**2
        variances[fixed] = 0.0
        return variances

    def force_variances(self, fixed: np.ndarray) -> np.ndarray:
        """Diagonal of Σ_w; zero on Dirichlet DOFs."""
        variances = np.full(fixed.size, self.sigma_force**2)
        variances[fixed] = 0.0
        return variances


def _fixed_mask(n_dofs: int, fixed: Optional[np.ndarray]) -> np.ndarray:
    if fixed is None:
        return np.zeros(n_dofs, dtype=bool)
    mask = np.asarray(fixed, dtype=bool)
    if mask.shape != (n_dofs,):
        raise SynthError(f"Fixed mask must have shape ({n_dofs},), got {mask.shape}")
    return mask


def displacement_noise(
    n_dofs: int, noise: NoiseModel, fixed: Optional[np.ndarray] = None
) -> np.ndarray:
    """Draw n ~ N(0, Σ_n) from the generator seeded by noise.seed."""
    std = np.sqrt(noise.displacement_variances(_fixed_mask(n_dofs, fixed)))
    rng = np.random.default_rng([noise.seed, 0])
    return rng.standard_normal(n_dofs) * std


def force_noise(
    n_dofs: int, noise: NoiseModel, fixed: Optional[np.ndarray] = None
) -> np.ndarray:
    """Draw w ~ N(0, Σ_w) from a stream independent of the displacement noise."""
    std = np.sqrt(noise.force_variances(_fixed_mask(n_dofs, fixed)))
    rng = np.random.default_rng([noise.seed, 1])
    return rng.standard_normal(n_dofs) * std


def add_noise(
    u: np.ndarray, noise: NoiseModel, fixed: Optional[np.ndarray] = None
) -> np.ndarray:
    """u^m = u + n; entries on Dirichlet DOFs are returned unchanged."""
    u = np.asarray(u, dtype=float)
    return u + displacement_noise(u.size, noise, fixed)


def add_force_noise(
    f_true: np.ndarray, noise: NoiseModel, fixed: Optional[np.ndarray] = None
) -> np.ndarray:
    """f = f_true + w."""
    f_true = np.asarray(f_true, dtype=float)
    return f_true + force_noise(f_true.size, noise, fixed)


def force_noise_sigma(f_true: np.ndarray, rel: float = DEFAULT_FORCE_NOISE_REL) -> float:
    """Default force noise std: rel × ‖f_true‖_∞."""
    return float(rel * np.max(np.abs(f_true)))


def noise_level(u_m: np.ndarray, u: np.ndarray) -> float:
    """
    Δ = ‖u^m − u‖ / ‖u^m‖.

    Raises:
        SynthError: If u^m is zero.
    """
    denominator = np.linalg.norm(u_m)
    if denominator == 0:
        raise SynthError("Noise level undefined for a zero measured field")
    return float(np.linalg.norm(np.asarray(u_m) - np.asarray(u)) / denominator)


def _direction_stats(u: np.ndarray, fixed: np.ndarray) -> Tuple[Tuple[float, int], ...]:
    stats = []
    for offset in (0, 1):
        free = ~fixed[offset::2]
        component = u[offset::2][free]
        stats.append((float(np.linalg.norm(component)), int(free.sum())))
    return tuple(stats)


def lateral_energy_share(u: np.ndarray, fixed: Optional[np.ndarray] = None) -> float:
    """Fraction of ‖u‖² on the free lateral DOFs."""
    u = np.asarray(u, dtype=float)
    (norm_lat, _), (norm_ax, _) = _direction_stats(u, _fixed_mask(u.size, fixed))
    signal = norm_lat**2 + norm_ax**2
    if signal == 0:
        raise SynthError("Energy share undefined for a zero displacement field")
    return float(norm_lat**2 / signal)


def expected_snr_db(
    u: np.ndarray, noise: NoiseModel, fixed: Optional[np.ndarray] = None
) -> float:
    """
    SNR in dB the noise model gives on average, 10·log₁₀(‖u‖² / E‖n‖²).

    Per-direction levels do not fix the overall SNR by themselves: with the
    axial component dominating ‖u‖, a 9%/3% pair lands near 29 dB rather
    than the 25 dB the lateral level alone suggests.

    Returns:
        float: +inf for a noise-free model.
    """
    u = np.asarray(u, dtype=float)
    (norm_lat, n_lat), (norm_ax, n_ax) = _direction_stats(u, _fixed_mask(u.size, fixed))
    power = noise.sigma_lateral**2 * n_lat + noise.sigma_axial**2 * n_ax
    if power == 0:
        return math.inf
    if norm_lat == 0 and norm_ax == 0:
        raise SynthError("SNR undefined for a zero displacement field")
    return float(10.0 * np.log10((norm_lat**2 + norm_ax**2) / power))


def calibrate_noise(
    u: np.ndarray,
    delta_lateral: float,
    delta_axial: float,
    fixed: Optional[np.ndarray] = None,
    sigma_force: float = 0.0,
    seed: int = 0,
) -> NoiseModel:
    """
    Choose σ per direction so the expected noise level matches the targets.

    Independence of u and n gives E‖u+n‖² = ‖u‖² + σ²N, hence
    σ = Δ‖u_dir‖ / √(N_dir(1 − Δ²)). A batch of seeded draws then corrects σ
    once by the ratio of target to mean realized Δ.

    Args:
        u: True displacement FieldVector.
        delta_lateral: Target lateral noise level, in [0, 1).
        delta_axial: Target axial noise level, in [0, 1).
        fixed: Dirichlet mask; those DOFs get no noise.
        sigma_force: Force noise std carried into the model.
        seed: Seed stored in the model for the observation draws.

    Returns:
        NoiseModel: The calibrated model.

    Raises:
        SynthError: For Δ outside [0, 1) or a zero displacement direction.
    """
    u = np.asarray(u, dtype=float)
    mask = _fixed_mask(u.size, fixed)
    targets = (float(delta_lateral), float(delta_axial))
    sigmas = []
    for name, target, (norm, count) in zip(
        ("lateral", "axial"), targets, _direction_stats(u, mask)
    ):
        if not 0.0 <= target < 1.0:
            raise SynthError(f"{name} noise level must lie in [0, 1), got {target}")
        if target > 0 and norm == 0:
            raise SynthError(f"Cannot calibrate {name} noise: displacement is zero")
        sigma = target * norm / np.sqrt(count * (1.0 - target**2)) if target > 0 else 0.0
        sigmas.append(sigma)

    rng = np.random.default_rng(seed)
    for index, offset in enumerate((0, 1)):
        if sigmas[index] == 0.0:
            continue
        free = ~mask[offset::2]
        component = u[offset::2][free]
        draws = rng.standard_normal((NOISE_CALIBRATION_SAMPLES, component.size))
        noise = draws * sigmas[index]
        realized = np.linalg.norm(noise, axis=1) / np.linalg.norm(component + noise, axis=1)
        sigmas[index] *= targets[index] / realized.mean()

    return NoiseModel(
        sigma_lateral=float(sigmas[0]),
        sigma_axial=float(sigmas[1]),
        sigma_force=float(sigma_force),
        seed=seed,
    )


def calibrate_noise_snr(
    u: np.ndarray,
    snr_db: float,
    ratio: float = 3.0,
    fixed: Optional[np.ndarray] = None,
    sigma_force: float = 0.0,
    seed: int = 0,
) -> NoiseModel:
    """
    Calibrate noise to an overall SNR, keeping Δ_lateral = ratio × Δ_axial.

    Raises:
        SynthError: If ratio is not positive or u is zero.
    """
    u = np.asarray(u, dtype=float)
    if ratio <= 0:
        raise SynthError(f"Lateral/axial ratio must be positive, got {ratio}")
    mask = _fixed_mask(u.size, fixed)
    (norm_lat, _), (norm_ax, _) = _direction_stats(u, mask)
    signal = norm_lat**2 + norm_ax**2
    if signal == 0:
        raise SynthError("Cannot calibrate noise for a zero displacement field")
    target_power = signal * 10.0 ** (-snr_db / 10.0)

    def excess_power(delta_axial: float) -> float:
        power = 0.0
        for delta, norm in ((ratio * delta_axial, norm_lat), (delta_axial, norm_ax)):
            power += delta**2 / (1.0 - delta**2) * norm**2
        return power - target_power

    upper = min(1.0, 1.0 / ratio) * (1.0 - 1e-9)
    delta_axial = brentq(excess_power, 0.0, upper, xtol=1e-14)
    return calibrate_noise(
        u, ratio * delta_axial, delta_axial, mask, sigma_force=sigma_force, seed=seed
    )


@dataclass(frozen=True, eq=False)
class Observation:
    """
    One synthetic acquisition with its noise realizations kept for bookkeeping.

    Attributes:
        u: True displacement.
        u_m: Measured displacement u + n.
        n: Displacement noise.
        f_true: Noise-free force.
        f: Measured force f_true + w.
        w: Force noise.
        noise: Model the noise was drawn from.
        fixed: Dirichlet mask.
    """

    u: np.ndarray
    u_m: np.ndarray
    n: np.ndarray
    f_true: np.ndarray
    f: np.ndarray
    w: np.ndarray
    noise: NoiseModel
    fixed: np.ndarray

    def realized(self) -> Dict[str, float]:
        """Realized noise levels per direction, overall Δ and SNR in dB."""
        u_lat, u_ax = split_components(self.u)
        m_lat, m_ax = split_components(self.u_m)
        noise_power = float(np.sum(self.n**2))
        snr = (
            float("inf")
            if noise_power == 0
            else float(10 * np.log10(np.sum(self.u**2) / noise_power))
        )
        return {
            "delta_lateral": noise_level(m_lat, u_lat),
            "delta_axial": noise_level(m_ax, u_ax),
            "delta": noise_level(self.u_m, self.u),
            "snr_db": snr,
        }


def observe(
    u: np.ndarray, f_true: np.ndarray, noise: NoiseModel, fixed: np.ndarray
) -> Observation:
    """Draw displacement and force noise and bundle the observation."""
    u = np.asarray(u, dtype=float)
    f_true = np.asarray(f_true, dtype=float)
    n = displacement_noise(u.size, noise, fixed)
    w = force_noise(f_true.size, noise, fixed)
    return Observation(
        u=u,
        u_m=u + n,
        n=n,
        f_true=f_true,
        f=f_true + w,
        w=w,
        noise=noise,
        fixed=np.asarray(fixed, dtype=bool),
    )


def write_field_csv(path: str, values: np.ndarray, per_node: int) -> None:
    """Write a nodal array as CSV, one row per node, 17 significant digits."""
    if per_node == 2:
        data, header = np.asarray(values).reshape(-1, 2), "lateral,axial"
    else:
        data, header = np.asarray(values).reshape(-1, 1), "value"
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments="")


def save_observation(
    directory: str,
    observation: Observation,
    phantom: Phantom,
    loading: Loading,
    targets: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Dump an observation: CSV arrays plus a JSON manifest.

    Returns:
        Dict: The manifest that was written.

    Raises:
        SynthError: If the files cannot be written.
    """
    manifest: Dict[str, Any] = {
        "seed": observation.noise.seed,
        "noise_model": asdict(observation.noise),
        "targets": targets or {},
        "realized": observation.realized(),
        "phantom": phantom.describe(),
        "boundary_conditions": loading.describe(),
        "arrays": {
            "u": "u.csv",
            "u_m": "u_m.csv",
            "f": "f.csv",
            "f_true": "f_true.csv",
            "E_true": "E_true.csv",
        },
    }
    try:
        os.makedirs(directory, exist_ok=True)
        write_field_csv(os.path.join(directory, "u.csv"), observation.u, 2)
        write_field_csv(os.path.join(directory, "u_m.csv"), observation.u_m, 2)
        write_field_csv(os.path.join(directory, "f.csv"), observation.f, 2)
        write_field_csv(os.path.join(directory, "f_true.csv"), observation.f_true, 2)
        write_field_csv(os.path.join(directory, "E_true.csv"), phantom.E_true, 1)
        with open(os.path.join(directory, "observation.json"), "w") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
    except OSError as e:
        raise SynthError(f"Failed to write observation dump to {directory}: {e}")
    return manifest
