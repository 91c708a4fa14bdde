"""Tests for the total variation and non-negativity proximal operators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elasticity_imaging.prox import (
    TotalVariation,
    TVGraph,
    prox_nonneg,
    prox_tv,
    prox_tv_graph,
    tv_value,
)

PATH = TVGraph.from_edges(6, [[i, i + 1] for i in range(5)])
fields = st.lists(
    st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=6, max_size=6
)


def prox_objective(x, y, weight, graph):
    return 0.5 * float(np.sum((x - y) ** 2)) + weight * graph.value(x)


class TestProxTV:
    """Test the graph TV prox."""

    def test_two_nodes(self):
        graph = TVGraph.from_edges(2, [[0, 1]])
        x = prox_tv_graph(np.array([0.0, 2.0]), 0.5, graph)
        np.testing.assert_allclose(x, [0.5, 1.5], atol=1e-10)

    def test_two_nodes_merge_when_weight_is_large(self):
        graph = TVGraph.from_edges(2, [[0, 1]])
        x = prox_tv_graph(np.array([0.0, 2.0]), 5.0, graph)
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-10)

    def test_chain(self):
        graph = TVGraph.from_edges(3, [[0, 1], [1, 2]])
        x = prox_tv_graph(np.array([0.0, 0.0, 3.0]), 0.5, graph, n_iter=2000)
        np.testing.assert_allclose(x, [0.25, 0.25, 2.5], atol=1e-6)

    def test_zero_weight_is_identity(self, small_mesh, rng):
        E = rng.uniform(1e3, 5e4, small_mesh.n_nodes)
        x = prox_tv(E, 0.0, small_mesh)
        np.testing.assert_array_equal(x, E)
        assert x is not E

    def test_constant_field_is_fixed(self, small_mesh):
        E = np.full(small_mesh.n_nodes, 7.0)
        np.testing.assert_allclose(prox_tv(E, 3.0, small_mesh), E)

    def test_mean_is_preserved(self, small_mesh, rng):
        E = rng.uniform(0, 1, small_mesh.n_nodes)
        assert prox_tv(E, 0.05, small_mesh).mean() == pytest.approx(E.mean())

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            prox_tv_graph(np.zeros(6), -1.0, PATH)

    @settings(max_examples=30, deadline=None, derandomize=True)
    @given(a=fields, b=fields, weight=st.floats(min_value=0.01, max_value=5.0))
    def test_non_expansive(self, a, b, weight):
        a, b = np.array(a), np.array(b)
        pa = prox_tv_graph(a, weight, PATH, n_iter=3000)
        pb = prox_tv_graph(b, weight, PATH, n_iter=3000)
        assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-6

    @settings(max_examples=30, deadline=None, derandomize=True)
    @given(y=fields, weight=st.floats(min_value=0.01, max_value=5.0))
    def test_does_not_increase_tv_or_objective(self, y, weight):
        y = np.array(y)
        x = prox_tv_graph(y, weight, PATH, n_iter=3000)
        assert PATH.value(x) <= PATH.value(y) + 1e-6
        assert prox_objective(x, y, weight, PATH) <= weight * PATH.value(y) + 1e-6

    def test_floor_gives_joint_prox(self):
        graph = TVGraph.from_edges(2, [[0, 1]])
        x = prox_tv_graph(np.array([-4.0, 2.0]), 0.5, graph, n_iter=500, floor=0.0)
        # Joint minimizer of ½‖x − y‖² + ½|x₁ − x₀| with x ≥ 0.
        np.testing.assert_allclose(x, [0.0, 1.5], atol=1e-8)


class TestTotalVariation:
    """Test the regularizer wrapper."""

    def test_value_uses_edge_lengths(self):
        graph = TVGraph.from_edges(3, [[0, 1], [1, 2]], weights=np.array([2.0, 0.5]))
        assert graph.value(np.array([0.0, 1.0, 3.0])) == pytest.approx(3.0)

    def test_mesh_value(self, small_mesh):
        E = small_mesh.nodes[:, 0].copy()
        jumps = np.abs(E[small_mesh.edges[:, 1]] - E[small_mesh.edges[:, 0]])
        expected = np.sum(small_mesh.edge_lengths * jumps)
        assert tv_value(E, small_mesh) == pytest.approx(expected)

    def test_length_scale(self, small_mesh):
        regularizer = TotalVariation(small_mesh)
        assert regularizer.length_scale == pytest.approx(small_mesh.edge_lengths.mean())

    def test_constrained_prox_respects_floor(self, small_mesh, rng):
        regularizer = TotalVariation(small_mesh, n_iter=50)
        E = rng.normal(0.0, 1.0, small_mesh.n_nodes)
        assert regularizer.prox_constrained(E, 0.1, 0.25).min() >= 0.25

    def test_invalid_iterations(self, small_mesh):
        with pytest.raises(ValueError):
            TotalVariation(small_mesh, n_iter=0)


class TestProxNonneg:
    """Test the projection onto E ≥ floor."""

    def test_examples(self):
        np.testing.assert_array_equal(prox_nonneg(np.array([-1.0, 0.0, 2.0])), [0, 0, 2])
        np.testing.assert_array_equal(prox_nonneg(np.array([5.0, 7.0]), 10.0), [10, 10])
        np.testing.assert_array_equal(prox_nonneg(np.array([5.0, 17.0]), 10.0), [10, 17])

    def test_mesh_graph_differences_follow_edges(self, small_mesh, rng):
        graph = TVGraph.from_mesh(small_mesh)
        x = rng.normal(0.0, 1.0, small_mesh.n_nodes)
        low, high = small_mesh.edges[:, 0], small_mesh.edges[:, 1]
        np.testing.assert_allclose(graph.incidence @ x, x[high] - x[low], rtol=1e-12)
        assert graph.incidence.shape == (small_mesh.edges.shape[0], small_mesh.n_nodes)
        np.testing.assert_array_equal(graph.weights, small_mesh.edge_lengths)
