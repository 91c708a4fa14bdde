"""Tests for raster export."""

import logging

import numpy as np
import pytest

from elasticity_imaging.mesh import generate_mesh
from elasticity_imaging.render import (
    RenderError,
    color_coordinates,
    export_mesh_wireframe,
    export_raster,
    rasterize,
)


class TestColorScale:
    """Test the value-to-color mapping."""

    def test_default_scale(self):
        coordinates = color_coordinates(np.array([0.0, 50e3, 100e3, 150e3, -10e3]))
        np.testing.assert_allclose(coordinates, [0.0, 0.5, 1.0, 1.0, 0.0])

    def test_custom_scale(self):
        coordinates = color_coordinates(np.array([20e3]), color_scale=(0.1, 0.3))
        np.testing.assert_allclose(coordinates, [0.5])

    def test_decreasing_scale(self):
        with pytest.raises(RenderError):
            color_coordinates(np.zeros(2), color_scale=(1.0, 0.0))


class TestRasterize:
    """Test barycentric sampling of nodal fields."""

    def test_linear_field_is_exact(self, small_mesh):
        field = 2.0 * small_mesh.nodes[:, 0] + small_mesh.nodes[:, 1]
        raster = rasterize(field, small_mesh, resolution=16)
        centers = (np.arange(16) + 0.5) / 16
        expected = 2.0 * centers[None, :] + centers[::-1, None]
        np.testing.assert_allclose(raster, expected, atol=1e-10)

    def test_row_zero_is_top(self, small_mesh):
        raster = rasterize(small_mesh.nodes[:, 1], small_mesh, resolution=8)
        assert raster[0].mean() > raster[-1].mean()

    def test_disc_area(self):
        mesh = generate_mesh(target_nodes=900, jitter=0.0)
        inside = np.hypot(mesh.nodes[:, 0] - 0.5, mesh.nodes[:, 1] - 0.5) <= 0.25
        raster = rasterize(inside.astype(float), mesh, resolution=200)
        assert np.mean(raster > 0.5) == pytest.approx(np.pi * 0.25**2, abs=0.03)

    def test_wrong_length(self, small_mesh):
        with pytest.raises(RenderError):
            rasterize(np.ones(small_mesh.n_nodes - 1), small_mesh)

    def test_all_nan(self, small_mesh):
        with pytest.raises(RenderError):
            rasterize(np.full(small_mesh.n_nodes, np.nan), small_mesh)


class TestExport:
    """Test PNG output."""

    def test_png_is_deterministic(self, small_mesh, phantom, temp_dir):
        first, second = temp_dir / "a.png", temp_dir / "b.png"
        manifest = export_raster(phantom.E_true, small_mesh, str(first), resolution=32)
        export_raster(phantom.E_true, small_mesh, str(second), resolution=32)
        assert first.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        assert first.read_bytes() == second.read_bytes()
        assert manifest["color_scale"] == [0.0, 1.0]
        assert manifest["unit"] == 100e3
        assert manifest["colormap"] == "viridis"

    def test_auto_range(self, small_mesh, temp_dir):
        manifest = export_raster(
            small_mesh.nodes[:, 0], small_mesh, str(temp_dir / "x.png"), None, 1.0
        )
        assert manifest["color_scale"] == pytest.approx([0.0, 1.0])

    def test_unknown_colormap_falls_back(self, small_mesh, phantom, temp_dir, caplog):
        with caplog.at_level(logging.WARNING):
            manifest = export_raster(
                phantom.E_true,
                small_mesh,
                str(temp_dir / "c.png"),
                colormap="not-a-colormap",
                resolution=16,
            )
        assert manifest["colormap"] == "gray"
        assert "not available" in caplog.text

    def test_unwritable_path(self, small_mesh, phantom, temp_dir):
        with pytest.raises(RenderError):
            export_raster(phantom.E_true, small_mesh, str(temp_dir / "no" / "dir.png"))

    def test_wireframe(self, small_mesh, temp_dir):
        path = temp_dir / "mesh.png"
        export_mesh_wireframe(small_mesh, str(path), resolution=64)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
