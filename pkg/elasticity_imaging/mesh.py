"""
Irregular triangle meshes of a rectangular tissue cross-section.

Meshes are generated as the Delaunay triangulation of a jittered regular grid,
stored with counter-clockwise element ordering, and exchanged through a small
whitespace-separated text format.
"""

import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .constants import (
    BOUNDARY_NAMES,
    DEFAULT_HEIGHT,
    DEFAULT_JITTER,
    DEFAULT_TARGET_NODES,
    DEFAULT_THICKNESS,
    DEFAULT_WIDTH,
    MESH_MAX_RETRIES,
    MESH_NODE_TOLERANCE,
)

logger = logging.getLogger(__name__)

# Elements with |area| below this fraction of the mean element area are degenerate.
AREA_RTOL = 1e-10


class MeshError(Exception):
    """Custom exception for invalid meshes and mesh generation failures."""

    pass


class MeshFormatError(MeshError):
    """Raised when a mesh file cannot be parsed; carries the offending line."""

    def __init__(self, path: str, line_number: int, message: str) -> None:
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    A 2D triangle mesh with named boundary node sets.

    Attributes:
        nodes: (N, 2) node coordinates in meters.
        elements: (M, 3) node indices per triangle, counter-clockwise.
        boundary_sets: node index arrays keyed by top, bottom, left, right.
            Corners belong to both adjacent sets.
        thickness: uniform element thickness t_e in meters.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_sets: Dict[str, np.ndarray]
    thickness: float = DEFAULT_THICKNESS

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        elements = np.array(self.elements, dtype=np.int64).reshape(-1, 3)
        boundary_sets = {
            name: np.unique(np.asarray(self.boundary_sets.get(name, []), dtype=np.int64))
            for name in BOUNDARY_NAMES
        }
        for array in (nodes, elements, *boundary_sets.values()):
            array.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "boundary_sets", boundary_sets)
        object.__setattr__(self, "thickness", float(self.thickness))

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the node cloud."""
        xmin, ymin = self.nodes.min(axis=0)
        xmax, ymax = self.nodes.max(axis=0)
        return float(xmin), float(ymin), float(xmax), float(ymax)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        return _signed_areas(self.nodes, self.elements)

    @cached_property
    def element_dofs(self) -> np.ndarray:
        """(M, 6) global DOF indices, (lateral, axial) interleaved per vertex."""
        dofs = np.empty((self.n_elements, 6), dtype=np.int64)
        dofs[:, 0::2] = 2 * self.elements
        dofs[:, 1::2] = 2 * self.elements + 1
        return dofs

    @cached_property
    def _edge_table(self) -> Tuple[np.ndarray, np.ndarray]:
        pairs = np.concatenate(
            [self.elements[:, [0, 1]], self.elements[:, [1, 2]], self.elements[:, [2, 0]]]
        )
        pairs.sort(axis=1)
        edges, counts = np.unique(pairs, axis=0, return_counts=True)
        return edges, counts

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) unique edges, each stored as (low, high) node index."""
        return self._edge_table[0]

    @property
    def edge_counts(self) -> np.ndarray:
        """Number of elements sharing each edge in `edges`."""
        return self._edge_table[1]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        delta = self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]]
        return np.hypot(delta[:, 0], delta[:, 1])

    def boundary_nodes(self, *names: str) -> np.ndarray:
        """Sorted union of the named boundary sets (all sets when none given)."""
        selected = names or BOUNDARY_NAMES
        unknown = set(selected) - set(BOUNDARY_NAMES)
        if unknown:
            raise MeshError(f"Unknown boundary set(s): {sorted(unknown)}")
        return np.unique(np.concatenate([self.boundary_sets[n] for n in selected]))

    def node_tag(self, node: int) -> str:
        """Text-format tag of a node: interior, a side name, or corner:<a>+<b>."""
        member_of = [n for n in BOUNDARY_NAMES if node in self._membership[n]]
        if not member_of:
            return "interior"
        if len(member_of) == 1:
            return member_of[0]
        return "corner:" + "+".join(member_of)

    @cached_property
    def _membership(self) -> Dict[str, set]:
        return {name: set(self.boundary_sets[name].tolist()) for name in BOUNDARY_NAMES}

    def validate(self) -> None:
        """
        Check the structural invariants of the mesh.

        Raises:
            MeshError: naming the first offending element or node.
        """
        if self.n_nodes < 3 or self.n_elements < 1:
            raise MeshError(
                f"Mesh needs at least 3 nodes and 1 element, got "
                f"{self.n_nodes} nodes and {self.n_elements} elements"
            )
        if not np.all(np.isfinite(self.nodes)):
            bad = int(np.argwhere(~np.isfinite(self.nodes))[0, 0])
            raise MeshError(f"Node {bad} has non-finite coordinates")
        _check_element_indices(self.elements, self.n_nodes)
        orphans = np.setdiff1d(np.arange(self.n_nodes), self.elements)
        if orphans.size:
            raise MeshError(f"Node {int(orphans[0])} belongs to no element")
        areas = self.signed_areas
        scale = AREA_RTOL * np.abs(areas).mean()
        bad_elements = np.flatnonzero(areas <= scale)
        if bad_elements.size:
            e = int(bad_elements[0])
            raise MeshError(
                f"Element {e} has non-positive signed area {areas[e]:.3e}"
            )
        distances, _ = cKDTree(self.nodes).query(self.nodes, k=2)
        if distances[:, 1].min() <= 0.0:
            node = int(np.argmin(distances[:, 1]))
            raise MeshError(f"Node {node} duplicates another node")
        for name, members in self.boundary_sets.items():
            if members.size and (members.min() < 0 or members.max() >= self.n_nodes):
                raise MeshError(f"Boundary set {name} references a missing node")
        if self.thickness <= 0:
            raise MeshError(f"Thickness must be positive, got {self.thickness}")


def _signed_areas(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    p1, p2, p3 = (nodes[elements[:, k]] for k in range(3))
    x21, y21 = (p2 - p1).T
    x31, y31 = (p3 - p1).T
    return 0.5 * (x21 * y31 - x31 * y21)


def _check_element_indices(elements: np.ndarray, n_nodes: int) -> None:
    bad = np.flatnonzero((elements < 0).any(axis=1) | (elements >= n_nodes).any(axis=1))
    if bad.size:
        e = int(bad[0])
        raise MeshError(
            f"Element {e} references node(s) {elements[e].tolist()} "
            f"but the mesh has {n_nodes} nodes"
        )


def _orient_ccw(nodes: np.ndarray, elements: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return elements reordered counter-clockwise and the indices that were flipped."""
    elements = np.array(elements, dtype=np.int64)
    flipped = np.flatnonzero(_signed_areas(nodes, elements) < 0)
    elements[flipped] = elements[flipped][:, [0, 2, 1]]
    return elements, flipped


def signed_area(mesh: Mesh, element_index: int) -> float:
    """
    Signed area of one element, positive for counter-clockwise ordering.

    Args:
        mesh: The mesh.
        element_index: Index of the element.

    Returns:
        float: ½(x21·y31 − x31·y21) in m².

    Raises:
        MeshError: If the index is out of range.
    """
    if not 0 <= element_index < mesh.n_elements:
        raise MeshError(
            f"Element index {element_index} out of range for {mesh.n_elements} elements"
        )
    return float(mesh.signed_areas[element_index])


def _grid_shape(width: float, height: float, target_nodes: int) -> Tuple[int, int]:
    nx0 = max(2, int(round(np.sqrt(target_nodes * width / height))))
    best: Tuple[float, float, int, int] = (np.inf, np.inf, 2, 2)
    for nx in range(max(2, nx0 - 2), nx0 + 3):
        ny = max(2, int(round(target_nodes / nx)))
        aspect_error = abs((nx - 1) / (ny - 1) - width / height)
        candidate = (abs(nx * ny - target_nodes), aspect_error, nx, ny)
        if candidate[:2] < best[:2]:
            best = candidate
    return best[2], best[3]


def _structured_triangles(nx: int, ny: int) -> np.ndarray:
    """Two CCW triangles per grid cell, split along the rising diagonal."""
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
    v1 = (j * nx + i).ravel()
    v2 = v1 + 1
    v3 = v1 + nx
    v4 = v3 + 1
    lower = np.column_stack([v1, v2, v4])
    upper = np.column_stack([v1, v4, v3])
    return np.vstack([lower, upper])


def generate_mesh(
    width: float = DEFAULT_WIDTH,
    height: float = DEFAULT_HEIGHT,
    target_nodes: int = DEFAULT_TARGET_NODES,
    jitter: float = DEFAULT_JITTER,
    seed: int = 0,
    thickness: float = DEFAULT_THICKNESS,
) -> Mesh:
    """
    Generate an irregular triangle mesh of a width × height rectangle.

    Interior grid nodes are perturbed by up to jitter × grid spacing per axis
    with a generator seeded by `seed`; boundary nodes stay on the rectangle
    edges. With zero jitter every grid cell is cocircular and the canonical
    diagonal split is used instead of Delaunay.

    Args:
        width: Domain width in meters.
        height: Domain height in meters.
        target_nodes: Desired node count.
        jitter: Perturbation as a fraction of the grid spacing, in [0, 0.5).
        seed: Seed for the perturbation generator.
        thickness: Uniform element thickness in meters.

    Returns:
        Mesh: A validated mesh.

    Raises:
        MeshError: On invalid parameters or when a non-degenerate triangulation
            cannot be produced after MESH_MAX_RETRIES jitter reductions.
    """
    if width <= 0 or height <= 0:
        raise MeshError(f"Domain size must be positive, got {width} x {height}")
    if target_nodes < 4:
        raise MeshError(f"target_nodes must be at least 4, got {target_nodes}")
    if not 0.0 <= jitter < 0.5:
        raise MeshError(f"jitter must lie in [0, 0.5), got {jitter}")

    nx, ny = _grid_shape(width, height, target_nodes)
    if abs(nx * ny - target_nodes) > MESH_NODE_TOLERANCE * target_nodes:
        logger.warning(
            f"Grid {nx}x{ny} gives {nx * ny} nodes for a target of {target_nodes}"
        )
    xs = np.linspace(0.0, width, nx)
    ys = np.linspace(0.0, height, ny)
    grid_x, grid_y = np.meshgrid(xs, ys)
    base = np.column_stack([grid_x.ravel(), grid_y.ravel()])
    col = np.tile(np.arange(nx), ny)
    row = np.repeat(np.arange(ny), nx)
    interior = (col > 0) & (col < nx - 1) & (row > 0) & (row < ny - 1)
    spacing = np.array([width / (nx - 1), height / (ny - 1)])
    boundary_sets = {
        "top": np.flatnonzero(row == ny - 1),
        "bottom": np.flatnonzero(row == 0),
        "left": np.flatnonzero(col == 0),
        "right": np.flatnonzero(col == nx - 1),
    }
    expected_area = width * height

    current = jitter
    for attempt in range(MESH_MAX_RETRIES + 1):
        nodes = base.copy()
        if current > 0:
            rng = np.random.default_rng(seed)
            offsets = rng.uniform(-current, current, size=(int(interior.sum()), 2))
            nodes[interior] += offsets * spacing
            elements, _ = _orient_ccw(nodes, Delaunay(nodes).simplices)
        else:
            elements = _structured_triangles(nx, ny)

        areas = _signed_areas(nodes, elements)
        degenerate = np.abs(areas) <= AREA_RTOL * expected_area / len(elements)
        covered = abs(areas.sum() - expected_area) <= 1e-10 * expected_area
        orphaned = np.setdiff1d(np.arange(len(nodes)), elements).size > 0
        if not degenerate.any() and covered and not orphaned:
            mesh = Mesh(nodes, elements, boundary_sets, thickness)
            mesh.validate()
            logger.info(
                f"Generated mesh with {mesh.n_nodes} nodes and "
                f"{mesh.n_elements} elements (jitter {current:g})"
            )
            return mesh

        logger.warning(
            f"Degenerate triangulation on attempt {attempt + 1} with jitter "
            f"{current:g}; retrying with reduced jitter"
        )
        current /= 2

    raise MeshError(
        f"Failed to generate a non-degenerate mesh after {MESH_MAX_RETRIES} retries"
    )


def save_mesh(mesh: Mesh, path: str) -> None:
    """
    Write a mesh in the text format read by `load_mesh`.

    Coordinates use 17 significant digits so a reload is exact.

    Raises:
        MeshError: If the file cannot be written.
    """
    lines: List[str] = [
        "# elasticity-imaging triangle mesh",
        f"nodes {mesh.n_nodes} elements {mesh.n_elements} thickness {mesh.thickness:.17g}",
    ]
    for index, (x, y) in enumerate(mesh.nodes):
        lines.append(f"{x:.17g} {y:.17g} {mesh.node_tag(index)}")
    for i, j, k in mesh.elements:
        lines.append(f"{i} {j} {k}")
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "w") as handle:
            handle.write("\n".join(lines) + "\n")
    except OSError as e:
        raise MeshError(f"Failed to write mesh to {path}: {e}")


def _content_lines(handle: Iterable[str]) -> Iterable[Tuple[int, List[str]]]:
    for line_number, raw in enumerate(handle, start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            yield line_number, tokens


def _parse_tag(path: str, line_number: int, tag: str) -> Sequence[str]:
    if tag == "interior":
        return ()
    if tag in BOUNDARY_NAMES:
        return (tag,)
    if tag.startswith("corner:"):
        names = tuple(tag[len("corner:") :].split("+"))
        if len(names) == 2 and all(n in BOUNDARY_NAMES for n in names):
            return names
    raise MeshFormatError(path, line_number, f"unknown node tag {tag!r}")


def load_mesh(path: str) -> Mesh:
    """
    Read a mesh written by `save_mesh` (or by hand in the same format).

    Clockwise elements are reoriented with a warning.

    Args:
        path: File to read.

    Returns:
        Mesh: The validated mesh.

    Raises:
        MeshFormatError: On a syntax error, with its line number.
        MeshError: On an invariant violation, naming the element.
    """
    try:
        with open(path) as handle:
            content = list(_content_lines(handle))
    except OSError as e:
        raise MeshError(f"Failed to read mesh file {path}: {e}")

    if not content:
        raise MeshFormatError(path, 1, "empty mesh file")
    header_line, header = content[0]
    if len(header) != 6 or header[0::2] != ["nodes", "elements", "thickness"]:
        raise MeshFormatError(
            path, header_line, "expected 'nodes N elements M thickness T'"
        )
    try:
        n_nodes, n_elements = int(header[1]), int(header[3])
        thickness = float(header[5])
    except ValueError as e:
        raise MeshFormatError(path, header_line, f"bad header value: {e}")

    body = content[1:]
    if len(body) != n_nodes + n_elements:
        last_line = body[-1][0] if body else header_line
        raise MeshFormatError(
            path,
            last_line,
            f"expected {n_nodes} node and {n_elements} element lines, "
            f"found {len(body)} lines",
        )

    nodes = np.empty((n_nodes, 2))
    membership: Dict[str, List[int]] = {name: [] for name in BOUNDARY_NAMES}
    for index, (line_number, tokens) in enumerate(body[:n_nodes]):
        if len(tokens) != 3:
            raise MeshFormatError(path, line_number, "expected 'x y tag'")
        try:
            nodes[index] = float(tokens[0]), float(tokens[1])
        except ValueError as e:
            raise MeshFormatError(path, line_number, f"bad coordinate: {e}")
        for name in _parse_tag(path, line_number, tokens[2]):
            membership[name].append(index)

    elements = np.empty((n_elements, 3), dtype=np.int64)
    for index, (line_number, tokens) in enumerate(body[n_nodes:]):
        if len(tokens) != 3:
            raise MeshFormatError(path, line_number, "expected 'i j k'")
        try:
            elements[index] = [int(t) for t in tokens]
        except ValueError as e:
            raise MeshFormatError(path, line_number, f"bad node index: {e}")

    _check_element_indices(elements, n_nodes)
    elements, flipped = _orient_ccw(nodes, elements)
    if flipped.size:
        logger.warning(
            f"Reoriented {flipped.size} clockwise element(s) in {path}, "
            f"first is element {int(flipped[0])}"
        )

    mesh = Mesh(
        nodes,
        elements,
        {name: np.array(members, dtype=np.int64) for name, members in membership.items()},
        thickness,
    )
    mesh.validate()
    return mesh
