"""
Reconstruction quality metrics.

CNR = 2(m_inc − m_bg)² / (s²_inc + s²_bg) with region means m and population
variances s² over nodal values; normalized RMS = ‖Ê − E_true‖ / ‖E_true‖;
SNR = 10·log₁₀(‖u‖² / ‖u^m − u‖²).
"""

import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from .synth import Phantom, noise_level

__all__ = [
    "MetricError",
    "RegionLabels",
    "cnr",
    "formulas",
    "noise_level",
    "region_means",
    "rms_error",
    "snr_db",
]

CNR_FORMULA = "2*(mean_inc - mean_bg)**2 / (var_inc + var_bg), population variances"
RMS_FORMULA = "||E_hat - E_true||_2 / ||E_true||_2"
SNR_FORMULA = "10*log10(||u||^2 / ||u_m - u||^2)"


class MetricError(Exception):
    """Custom exception for metric evaluation errors."""

    pass


@dataclass(frozen=True, eq=False)
class RegionLabels:
    """Per-node inclusion/background partition."""

    inclusion: np.ndarray

    @classmethod
    def from_phantom(cls, phantom: Phantom) -> "RegionLabels":
        return cls(inclusion=np.array(phantom.inside, dtype=bool))

    @property
    def background(self) -> np.ndarray:
        return ~self.inclusion


def _as_vector(values: np.ndarray, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1:
        raise MetricError(f"{name} must be one-dimensional, got shape {array.shape}")
    return array


def cnr(E_hat: np.ndarray, labels: RegionLabels) -> float:
    """
    Contrast-to-noise ratio between inclusion and background.

    Returns 0 for zero contrast and +inf when both regions are constant with
    different means.

    Raises:
        MetricError: If a region is empty or lengths differ.
    """
    E_hat = _as_vector(E_hat, "E_hat")
    if E_hat.shape != labels.inclusion.shape:
        raise MetricError(
            f"Field has {E_hat.size} values but labels cover {labels.inclusion.size} nodes"
        )
    inside, outside = E_hat[labels.inclusion], E_hat[labels.background]
    if inside.size == 0 or outside.size == 0:
        raise MetricError("CNR needs nonempty inclusion and background regions")

    contrast = float(np.mean(inside) - np.mean(outside))
    pooled = float(np.var(inside) + np.var(outside))
    if contrast == 0:
        return 0.0
    if pooled == 0:
        return math.inf
    return 2.0 * contrast**2 / pooled


def rms_error(E_hat: np.ndarray, E_true: np.ndarray) -> float:
    """
    ‖Ê − E_true‖₂ / ‖E_true‖₂.

    Raises:
        MetricError: On length mismatch or zero E_true.
    """
    E_hat, E_true = _as_vector(E_hat, "E_hat"), _as_vector(E_true, "E_true")
    if E_hat.shape != E_true.shape:
        raise MetricError(f"Length mismatch: {E_hat.size} vs {E_true.size}")
    norm = np.linalg.norm(E_true)
    if norm == 0:
        raise MetricError("Normalized RMS undefined for a zero reference field")
    return float(np.linalg.norm(E_hat - E_true) / norm)


def snr_db(u: np.ndarray, u_m: np.ndarray) -> float:
    """
    Displacement SNR in decibels; +inf when u^m equals u.

    Raises:
        MetricError: On length mismatch.
    """
    u, u_m = _as_vector(u, "u"), _as_vector(u_m, "u_m")
    if u.shape != u_m.shape:
        raise MetricError(f"Length mismatch: {u.size} vs {u_m.size}")
    noise = float(np.sum((u_m - u) ** 2))
    if noise == 0:
        return math.inf
    return float(10.0 * np.log10(np.sum(u**2) / noise))


def region_means(E_hat: np.ndarray, labels: RegionLabels) -> Dict[str, float]:
    E_hat = _as_vector(E_hat, "E_hat")
    return {
        "inclusion_mean": float(np.mean(E_hat[labels.inclusion])),
        "background_mean": float(np.mean(E_hat[labels.background])),
    }


def formulas() -> Dict[str, str]:
    """Metric definitions recorded in manifests."""
    return {"cnr": CNR_FORMULA, "rms": RMS_FORMULA, "snr_db": SNR_FORMULA}
