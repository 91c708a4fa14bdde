"""
Raster export of nodal fields.

Fields are interpolated linearly inside each triangle onto pixel centers of
a fixed grid, mapped through a colormap with an explicit value range and
written as PNG without timestamps or software tags, so identical inputs give
identical bytes.
"""

import logging
from typing import Any, Dict, Optional, Tuple

import matplotlib
import matplotlib.image
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.tri import LinearTriInterpolator, Triangulation

from .constants import (
    COLOR_UNIT,
    DEFAULT_COLOR_SCALE,
    DEFAULT_COLORMAP,
    DEFAULT_RESOLUTION,
    FALLBACK_COLORMAP,
)
from .mesh import Mesh

logger = logging.getLogger(__name__)

PNG_METADATA: Dict[str, Any] = {"Software": None}
OUTSIDE_COLOR = (1.0, 1.0, 1.0, 1.0)


class RenderError(Exception):
    """Custom exception for raster export errors."""

    pass


def rasterize(
    field: np.ndarray, mesh: Mesh, resolution: int = DEFAULT_RESOLUTION
) -> np.ndarray:
    """
    Sample a nodal field at pixel centers by barycentric interpolation.

    Returns:
        np.ndarray: (resolution, resolution) array, row 0 at the top of the
        domain; NaN where a pixel center lies outside every element.

    Raises:
        RenderError: If the field length does not match the mesh or no value is finite.
    """
    values = np.asarray(field, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise RenderError(f"Field has shape {values.shape}, mesh has {mesh.n_nodes} nodes")
    if not np.any(np.isfinite(values)):
        raise RenderError("Cannot render a field with no finite values")

    xmin, ymin, xmax, ymax = mesh.bounds
    xs = xmin + (np.arange(resolution) + 0.5) * (xmax - xmin) / resolution
    ys = ymax - (np.arange(resolution) + 0.5) * (ymax - ymin) / resolution
    grid_x, grid_y = np.meshgrid(xs, ys)

    triangulation = Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.elements)
    interpolated = LinearTriInterpolator(triangulation, values)(grid_x, grid_y)
    return np.ma.filled(interpolated.astype(float), np.nan)


def color_coordinates(
    values: np.ndarray,
    color_scale: Tuple[float, float] = DEFAULT_COLOR_SCALE,
    unit: float = COLOR_UNIT,
) -> np.ndarray:
    """Map values to [0, 1]: (value/unit − lo) / (hi − lo), clipped; NaN kept."""
    lo, hi = color_scale
    if not hi > lo:
        raise RenderError(f"Color scale must be increasing, got {color_scale}")
    coordinates = (np.asarray(values, dtype=float) / unit - lo) / (hi - lo)
    return np.clip(coordinates, 0.0, 1.0)


def get_colormap(name: str) -> Tuple[Any, str]:
    """Look up a colormap, falling back to grayscale when it is unavailable."""
    try:
        return matplotlib.colormaps[name], name
    except KeyError:
        logger.warning(f"Colormap {name!r} not available, using {FALLBACK_COLORMAP!r}")
        return matplotlib.colormaps[FALLBACK_COLORMAP], FALLBACK_COLORMAP


def export_raster(
    field: np.ndarray,
    mesh: Mesh,
    path: str,
    color_scale: Optional[Tuple[float, float]] = DEFAULT_COLOR_SCALE,
    unit: float = COLOR_UNIT,
    colormap: str = DEFAULT_COLORMAP,
    resolution: int = DEFAULT_RESOLUTION,
) -> Dict[str, Any]:
    """
    Render a nodal field to a lossless PNG.

    Args:
        field: Length-N nodal values.
        mesh: Mesh the field lives on.
        path: Output PNG path.
        color_scale: (min, max) in multiples of `unit`; None uses the data range.
        unit: Value of one color-scale unit (100 kPa by default).
        colormap: Matplotlib colormap name.
        resolution: Pixels per side.

    Returns:
        Dict: Rendering parameters for the manifest.

    Raises:
        RenderError: For an all-NaN field or an unwritable path.
    """
    values = np.asarray(field, dtype=float)
    if not np.any(np.isfinite(values)):
        raise RenderError("Cannot render a field with no finite values")
    if color_scale is None:
        lo, hi = float(np.nanmin(values)) / unit, float(np.nanmax(values)) / unit
        color_scale = (lo, hi) if hi > lo else (lo - 0.5, lo + 0.5)

    raster = rasterize(values, mesh, resolution)
    cmap, used = get_colormap(colormap)
    rgba = cmap(np.nan_to_num(color_coordinates(raster, color_scale, unit)))
    rgba[np.isnan(raster)] = OUTSIDE_COLOR
    try:
        matplotlib.image.imsave(path, rgba, format="png", metadata=PNG_METADATA)
    except OSError as e:
        raise RenderError(f"Failed to write raster {path}: {e}")
    return {
        "path": path,
        "colormap": used,
        "color_scale": [float(color_scale[0]), float(color_scale[1])],
        "unit": unit,
        "resolution": resolution,
        "interpolation": "barycentric (linear per triangle), pixel centers",
    }


def export_mesh_wireframe(
    mesh: Mesh, path: str, resolution: int = DEFAULT_RESOLUTION
) -> Dict[str, Any]:
    """Draw the triangle mesh as a black-on-white wireframe PNG."""
    dpi = 100
    figure = Figure(figsize=(resolution / dpi, resolution / dpi), dpi=dpi)
    FigureCanvasAgg(figure)
    axes = figure.add_axes((0.0, 0.0, 1.0, 1.0))
    axes.triplot(
        mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.elements, color="black", linewidth=0.4
    )
    xmin, ymin, xmax, ymax = mesh.bounds
    axes.set_xlim(xmin, xmax)
    axes.set_ylim(ymin, ymax)
    axes.set_axis_off()
    try:
        figure.savefig(path, format="png", dpi=dpi, metadata=PNG_METADATA)
    except OSError as e:
        raise RenderError(f"Failed to write mesh raster {path}: {e}")
    return {"path": path, "resolution": resolution}
