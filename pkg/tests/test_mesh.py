"""Tests for mesh generation, validation and the mesh text format."""

import logging

import numpy as np
import pytest

from elasticity_imaging.mesh import (
    Mesh,
    MeshError,
    MeshFormatError,
    generate_mesh,
    load_mesh,
    save_mesh,
    signed_area,
)


class TestGenerateMesh:
    """Test mesh generation."""

    def test_node_count_and_domain(self):
        mesh = generate_mesh(width=2.0, height=1.0, target_nodes=200, seed=0)
        assert abs(mesh.n_nodes - 200) <= 20
        assert mesh.bounds == pytest.approx((0.0, 0.0, 2.0, 1.0))
        assert mesh.signed_areas.sum() == pytest.approx(2.0, rel=1e-10)

    def test_elements_are_counter_clockwise(self, small_mesh):
        assert np.all(small_mesh.signed_areas > 0)
        small_mesh.validate()

    def test_same_seed_same_mesh(self):
        a = generate_mesh(target_nodes=100, jitter=0.3, seed=7)
        b = generate_mesh(target_nodes=100, jitter=0.3, seed=7)
        np.testing.assert_array_equal(a.nodes, b.nodes)
        np.testing.assert_array_equal(a.elements, b.elements)

    def test_different_seed_moves_interior_nodes(self):
        a = generate_mesh(target_nodes=100, jitter=0.3, seed=7)
        b = generate_mesh(target_nodes=100, jitter=0.3, seed=8)
        assert not np.array_equal(a.nodes, b.nodes)

    def test_zero_jitter_is_structured(self):
        mesh = generate_mesh(target_nodes=100, jitter=0.0)
        assert mesh.n_nodes == 100
        assert mesh.n_elements == 2 * 9 * 9

    def test_boundary_sets(self, small_mesh):
        top = small_mesh.boundary_sets["top"]
        bottom = small_mesh.boundary_sets["bottom"]
        np.testing.assert_allclose(small_mesh.nodes[top, 1], 1.0)
        np.testing.assert_allclose(small_mesh.nodes[bottom, 1], 0.0)
        corner = int(np.intersect1d(top, small_mesh.boundary_sets["left"])[0])
        assert small_mesh.node_tag(corner) == "corner:top+left"

    def test_every_edge_shared_by_at_most_two_elements(self, small_mesh):
        assert set(np.unique(small_mesh.edge_counts)) <= {1, 2}

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"width": 0.0},
            {"target_nodes": 3},
            {"jitter": 0.5},
            {"jitter": -0.1},
        ],
    )
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(MeshError):
            generate_mesh(**kwargs)


class TestMeshValidation:
    """Test structural invariant checks."""

    def test_degenerate_element(self):
        mesh = Mesh(
            nodes=[[0, 0], [1, 0], [2, 0], [0, 1]],
            elements=[[0, 1, 2], [0, 1, 3]],
            boundary_sets={},
        )
        with pytest.raises(MeshError, match="Element 0"):
            mesh.validate()

    def test_duplicate_node(self):
        mesh = Mesh(
            nodes=[[0, 0], [1, 0], [0, 1], [1, 1], [1, 1]],
            elements=[[0, 1, 2], [1, 3, 2], [1, 4, 2]],
            boundary_sets={},
        )
        with pytest.raises(MeshError, match="duplicates"):
            mesh.validate()

    def test_orphan_node(self):
        mesh = Mesh(
            nodes=[[0, 0], [1, 0], [0, 1], [5, 5]],
            elements=[[0, 1, 2]],
            boundary_sets={},
        )
        with pytest.raises(MeshError, match="Node 3"):
            mesh.validate()

    def test_unknown_boundary_name(self, small_mesh):
        with pytest.raises(MeshError):
            small_mesh.boundary_nodes("front")


class TestMeshFile:
    """Test the mesh text format."""

    def test_save_and_load_are_exact(self, small_mesh, temp_dir):
        path = str(temp_dir / "mesh.txt")
        save_mesh(small_mesh, path)
        loaded = load_mesh(path)
        np.testing.assert_array_equal(loaded.nodes, small_mesh.nodes)
        np.testing.assert_array_equal(loaded.elements, small_mesh.elements)
        for name in ("top", "bottom", "left", "right"):
            np.testing.assert_array_equal(
                loaded.boundary_sets[name], small_mesh.boundary_sets[name]
            )
        assert loaded.thickness == small_mesh.thickness

    def test_clockwise_elements_are_reoriented(self, temp_dir, caplog):
        path = temp_dir / "cw.txt"
        path.write_text(
            "nodes 4 elements 2 thickness 1\n"
            "0 0 corner:bottom+left\n"
            "1 0 corner:bottom+right\n"
            "1 1 corner:top+right\n"
            "0 1 corner:top+left\n"
            "0 2 1\n"
            "0 2 3\n"
        )
        with caplog.at_level(logging.WARNING):
            mesh = load_mesh(str(path))
        assert np.all(mesh.signed_areas > 0)
        assert "Reoriented 1" in caplog.text

    def test_syntax_error_reports_line(self, temp_dir):
        path = temp_dir / "bad.txt"
        path.write_text(
            "# comment\n"
            "nodes 3 elements 1 thickness 1\n"
            "0 0 interior\n"
            "1 zero interior\n"
            "0 1 interior\n"
            "0 1 2\n"
        )
        with pytest.raises(MeshFormatError) as excinfo:
            load_mesh(str(path))
        assert excinfo.value.line_number == 4

    def test_unknown_tag(self, temp_dir):
        path = temp_dir / "tag.txt"
        path.write_text(
            "nodes 3 elements 1 thickness 1\n0 0 inside\n1 0 interior\n0 1 interior\n0 1 2\n"
        )
        with pytest.raises(MeshFormatError, match="tag"):
            load_mesh(str(path))

    def test_missing_file(self, temp_dir):
        with pytest.raises(MeshError):
            load_mesh(str(temp_dir / "nope.txt"))


class TestSignedArea:
    """Test per-element signed areas."""

    @pytest.mark.parametrize("scale, expected", [(1.0, 0.5), (2.0, 2.0)])
    def test_right_triangle(self, scale, expected):
        nodes = scale * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        mesh = Mesh(nodes=nodes, elements=[[0, 1, 2]], boundary_sets={})
        assert signed_area(mesh, 0) == pytest.approx(expected)

    def test_matches_shoelace(self, small_mesh):
        for index, (i, j, k) in enumerate(small_mesh.elements):
            (x1, y1), (x2, y2), (x3, y3) = small_mesh.nodes[[i, j, k]]
            shoelace = 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))
            assert signed_area(small_mesh, index) == pytest.approx(shoelace, rel=1e-14)

    def test_index_out_of_range(self, small_mesh):
        with pytest.raises(MeshError):
            signed_area(small_mesh, small_mesh.n_elements)
