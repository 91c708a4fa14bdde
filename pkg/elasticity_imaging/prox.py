"""
Proximal operators for the modulus regularizers.

Total variation on an irregular mesh is the graph TV over element edges,
TV(x) = Σ_(i,j) w_ij |x_i − x_j| with w_ij the edge length. Its prox is
computed in the dual: with G the signed edge-node incidence,

    prox(y) = y − Gᵀq,   q = argmin_{|q_e| ≤ τ w_e} ½‖y − Gᵀq‖²,

solved by projected gradient with step 1/‖G‖², bounded by 1/(2·max degree).
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from .constants import DEFAULT_FLOOR, DEFAULT_TV_INNER_ITERS
from .mesh import Mesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TVGraph:
    """
    Edge graph of a mesh used by the total variation functional.

    Attributes:
        incidence: (E, N) signed incidence matrix G.
        weights: (E,) edge weights w_ij.
        dual_step: Projected-gradient step 1/(2·max node degree).
    """

    incidence: sparse.csr_matrix
    weights: np.ndarray
    dual_step: float

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "TVGraph":
        return cls.from_edges(mesh.n_nodes, mesh.edges, mesh.edge_lengths)

    @classmethod
    def from_edges(
        cls, n_nodes: int, edges: np.ndarray, weights: Optional[np.ndarray] = None
    ) -> "TVGraph":
        """Build the graph from (low, high) node pairs; unit weights by default."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        n_edges = edges.shape[0]
        weights = np.ones(n_edges) if weights is None else np.asarray(weights, float)
        incidence = sparse.csr_matrix(
            (
                np.tile([-1.0, 1.0], n_edges),
                (np.repeat(np.arange(n_edges), 2), edges.ravel()),
            ),
            shape=(n_edges, n_nodes),
        )
        degree = np.bincount(edges.ravel(), minlength=n_nodes)
        max_degree = int(degree.max()) if n_edges else 1
        return cls(incidence=incidence, weights=weights, dual_step=0.5 / max_degree)

    @property
    def n_nodes(self) -> int:
        return int(self.incidence.shape[1])

    def value(self, x: np.ndarray) -> float:
        return float(np.sum(self.weights * np.abs(self.incidence @ x)))


def tv_value(E: np.ndarray, mesh: Mesh) -> float:
    """Graph total variation of a nodal field over the mesh edges."""
    return TVGraph.from_mesh(mesh).value(np.asarray(E, dtype=float))


def prox_tv_graph(
    y: np.ndarray,
    weight: float,
    graph: TVGraph,
    n_iter: int = DEFAULT_TV_INNER_ITERS,
    floor: Optional[float] = None,
) -> np.ndarray:
    """
    Prox of weight·TV on an explicit graph.

    Args:
        y: Nodal field to denoise.
        weight: Prox weight τ = λ·γ.
        graph: Edge graph with weights.
        n_iter: Number of dual projected-gradient iterations.
        floor: When given, solve the joint prox of TV and the constraint
            x ≥ floor instead of TV alone.

    Returns:
        np.ndarray: The prox output.
    """
    y = np.asarray(y, dtype=float)
    if weight < 0:
        raise ValueError(f"Prox weight must be non-negative, got {weight}")
    if weight == 0 or graph.weights.size == 0:
        return y.copy() if floor is None else np.maximum(y, floor)

    G = graph.incidence
    bound = weight * graph.weights
    q = np.zeros(G.shape[0])
    x = y.copy() if floor is None else np.maximum(y, floor)
    for _ in range(n_iter):
        q = np.clip(q + graph.dual_step * (G @ x), -bound, bound)
        x = y - G.T @ q
        if floor is not None:
            x = np.maximum(x, floor)
    return np.asarray(x)


def prox_tv(
    E: np.ndarray,
    weight: float,
    mesh: Mesh,
    n_iter: int = DEFAULT_TV_INNER_ITERS,
) -> np.ndarray:
    """
    Approximate argmin_x ½‖x − E‖² + weight·TV(x) over the mesh edge graph.

    weight = 0 returns the input unchanged; constant fields are fixed points.
    """
    return prox_tv_graph(E, weight, TVGraph.from_mesh(mesh), n_iter)


def prox_nonneg(E: np.ndarray, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Componentwise max(E, floor)."""
    return np.maximum(np.asarray(E, dtype=float), floor)


class Regularizer(ABC):
    """
    A proximable penalty R(E) for the modulus reconstruction.

    The solver minimizes g(E) + λ·R(E) subject to E ≥ floor and only needs
    the value of R and its prox.
    """

    # Typical spatial scale of R's differences, used by automatic λ.
    length_scale: float = 1.0

    @abstractmethod
    def value(self, E: np.ndarray) -> float:
        raise NotImplementedError

    @abstractmethod
    def prox(self, E: np.ndarray, weight: float) -> np.ndarray:
        """argmin_x ½‖x − E‖² + weight·R(x)."""
        raise NotImplementedError

    def prox_constrained(self, E: np.ndarray, weight: float, floor: float) -> np.ndarray:
        """Joint prox of weight·R and the constraint x ≥ floor.

        The base implementation composes the two proxes.
        """
        return prox_nonneg(self.prox(E, weight), floor)


class TotalVariation(Regularizer):
    """Edge-length weighted graph TV over a mesh."""

    def __init__(self, mesh: Mesh, n_iter: int = DEFAULT_TV_INNER_ITERS) -> None:
        if n_iter < 1:
            raise ValueError(f"TV inner iterations must be at least 1, got {n_iter}")
        self.graph = TVGraph.from_mesh(mesh)
        self.n_iter = n_iter
        self.length_scale = float(np.mean(mesh.edge_lengths))

    def value(self, E: np.ndarray) -> float:
        return self.graph.value(np.asarray(E, dtype=float))

    def prox(self, E: np.ndarray, weight: float) -> np.ndarray:
        return prox_tv_graph(E, weight, self.graph, self.n_iter)

    def prox_constrained(self, E: np.ndarray, weight: float, floor: float) -> np.ndarray:
        return prox_tv_graph(E, weight, self.graph, self.n_iter, floor=floor)
