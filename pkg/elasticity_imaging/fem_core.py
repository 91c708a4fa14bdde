"""
Linear-elastic constant-strain-triangle model with the stiffness written as a
linear map of the nodal Young's modulus.

The global stiffness is K(E) = Σᵢ Eᵢ Ψᵢ where each Ψᵢ is a sparse symmetric
2N×2N slice. Ψ is stored at element level (reference stiffness per element
plus the node-to-element averaging matrix), which gives both K(E)·u and
D(u)·E = K(E)·u from the same element forces.
"""

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Dict, Iterable, List, Mapping, Tuple, Union

import numpy as np
import scipy.linalg
from scipy import sparse

from .mesh import Mesh

logger = logging.getLogger(__name__)

Prescribed = Mapping[int, Tuple[float, float]]
PrescribedLike = Union[Prescribed, Iterable[Any]]


class FEMError(Exception):
    """Custom exception for finite element model errors."""

    pass


class SingularElementError(FEMError):
    """Raised for an element with zero (or negative) area."""

    pass


class SingularMaterialError(FEMError):
    """Raised when the material matrix is undefined (|ν| ≥ 1)."""

    pass


class DirichletError(FEMError):
    """Raised for an invalid set of prescribed displacements."""

    pass


class FactorizationError(FEMError):
    """Raised when a matrix expected to be SPD fails Cholesky factorization."""

    def __init__(self, message: str, min_eigenvalue: float) -> None:
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


def material_matrix(mu: float, nu: float) -> np.ndarray:
    """
    Plane-stress material matrix (μ/(1−ν²))·[[1,ν,0],[ν,1,0],[0,0,(1−ν)/2]].

    Args:
        mu: Young's modulus in pascals.
        nu: Poisson's ratio, |nu| < 1.

    Returns:
        np.ndarray: 3×3 symmetric matrix.

    Raises:
        SingularMaterialError: If |nu| >= 1.
    """
    if not abs(nu) < 1.0:
        raise SingularMaterialError(f"Poisson's ratio must satisfy |nu| < 1, got {nu}")
    return (mu / (1.0 - nu**2)) * np.array(
        [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]]
    )


def _strain_displacement_all(mesh: Mesh) -> np.ndarray:
    """(M, 3, 6) CST strain-displacement matrices for every element."""
    xy = mesh.nodes[mesh.elements]
    x, y = xy[..., 0], xy[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    two_area = 2.0 * mesh.signed_areas
    degenerate = np.flatnonzero(two_area <= 0.0)
    if degenerate.size:
        e = int(degenerate[0])
        raise SingularElementError(
            f"Element {e} has non-positive area {0.5 * two_area[e]:.3e}"
        )
    b = b / two_area[:, None]
    c = c / two_area[:, None]
    B = np.zeros((mesh.n_elements, 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    return B


def strain_displacement_matrix(mesh: Mesh, element_index: int) -> np.ndarray:
    """
    CST strain-displacement matrix B_e of one element.

    Rows map the element DOFs (u1x, u1y, u2x, u2y, u3x, u3y) to
    (ε_xx, ε_yy, γ_xy) with b_i = (y_j − y_k)/(2A_e), c_i = (x_k − x_j)/(2A_e).

    Raises:
        SingularElementError: If the element has zero area.
    """
    xy = mesh.nodes[mesh.elements[element_index]]
    two_area = 2.0 * float(mesh.signed_areas[element_index])
    if two_area <= 0.0:
        raise SingularElementError(
            f"Element {element_index} has non-positive area {0.5 * two_area:.3e}"
        )
    B = np.zeros((3, 6))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        b_i = (xy[j, 1] - xy[k, 1]) / two_area
        c_i = (xy[k, 0] - xy[j, 0]) / two_area
        B[0, 2 * i] = b_i
        B[1, 2 * i + 1] = c_i
        B[2, 2 * i] = c_i
        B[2, 2 * i + 1] = b_i
    return B


def local_stiffness(mesh: Mesh, element_index: int, mu: float, nu: float) -> np.ndarray:
    """
    Element stiffness k_e = t_e·A_e·B_eᵀ·M_e·B_e in N/m.

    Args:
        mesh: The mesh.
        element_index: Element to evaluate.
        mu: Element modulus in pascals.
        nu: Poisson's ratio.

    Returns:
        np.ndarray: Symmetric 6×6 matrix.
    """
    B = strain_displacement_matrix(mesh, element_index)
    area = float(mesh.signed_areas[element_index])
    return mesh.thickness * area * B.T @ material_matrix(mu, nu) @ B


def _normalize_prescribed(
    prescribed: PrescribedLike, n_nodes: int
) -> Dict[int, Tuple[float, float]]:
    """
    Accept a mapping node -> (u_lat, u_ax), an iterable of nodes (fixed at
    zero), or an iterable of (node, (u_lat, u_ax)) pairs.
    """
    if isinstance(prescribed, Mapping):
        items = list(prescribed.items())
    else:
        items = []
        for entry in prescribed:
            if isinstance(entry, (tuple, list)) and len(entry) == 2:
                items.append((entry[0], entry[1]))
            else:
                items.append((entry, (0.0, 0.0)))

    normalized: Dict[int, Tuple[float, float]] = {}
    for node, values in items:
        node = int(node)
        if not 0 <= node < n_nodes:
            raise DirichletError(f"Prescribed node {node} does not exist")
        if node in normalized:
            raise DirichletError(f"Node {node} is prescribed more than once")
        u_lat, u_ax = values
        normalized[node] = (float(u_lat), float(u_ax))
    return normalized


@dataclass(frozen=True, eq=False)
class PsiTensor:
    """
    Stiffness tensor Ψ with K(E) = Σᵢ Eᵢ Ψ(i,:,:).

    Attributes:
        n_nodes: Number of mesh nodes N.
        element_dofs: (M, 6) global DOFs of every element.
        reference: (M, 6, 6) element stiffness per unit modulus, k̃_e.
        averaging: (M, N) sparse node-to-element map, 1/3 per vertex.
        fixed: (2N,) Dirichlet mask; eliminated rows and columns.
        prescribed: (2N,) prescribed displacement on fixed DOFs, zero elsewhere.
    """

    n_nodes: int
    element_dofs: np.ndarray
    reference: np.ndarray
    averaging: sparse.csr_matrix
    fixed: np.ndarray
    prescribed: np.ndarray

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_elements(self) -> int:
        return int(self.reference.shape[0])

    @cached_property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)

    @cached_property
    def fixed_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.fixed)

    @cached_property
    def _scatter_index(self) -> Tuple[np.ndarray, np.ndarray]:
        rows = np.repeat(self.element_dofs, 6, axis=1)
        cols = np.tile(self.element_dofs, (1, 6))
        return rows, cols

    def _assemble(self, weights: np.ndarray, eliminate: bool = True) -> sparse.csr_matrix:
        """Σ_e weights_e · k̃_e scattered to global DOFs."""
        active = np.flatnonzero(weights)
        rows, cols = self._scatter_index
        rows, cols = rows[active].ravel(), cols[active].ravel()
        values = (self.reference[active].reshape(-1, 36) * weights[active, None]).ravel()
        if eliminate:
            keep = ~(self.fixed[rows] | self.fixed[cols])
            rows, cols, values = rows[keep], cols[keep], values[keep]
        matrix = sparse.coo_matrix((values, (rows, cols)), shape=(self.n_dofs, self.n_dofs))
        return matrix.tocsr()

    def element_moduli(self, E: np.ndarray) -> np.ndarray:
        """Element modulus μ_e as the mean of its three nodal values."""
        return np.asarray(self.averaging @ E)

    def stiffness(self, E: np.ndarray) -> sparse.csr_matrix:
        """K(E) with Dirichlet rows and columns eliminated (left zero)."""
        return self._assemble(self.element_moduli(_as_modulus(E, self.n_nodes)))

    def system_matrix(self, E: np.ndarray) -> sparse.csr_matrix:
        """K(E) plus the unit diagonal on Dirichlet DOFs, ready to factorize."""
        return (self.stiffness(E) + sparse.diags(self.fixed.astype(float))).tocsr()

    def unconstrained_stiffness(self, E: np.ndarray) -> sparse.csr_matrix:
        """K(E) before any Dirichlet elimination (singular: rigid-body modes)."""
        return self._assemble(
            self.element_moduli(_as_modulus(E, self.n_nodes)), eliminate=False
        )

    def slice(self, node: int) -> sparse.csr_matrix:
        """Ψ(node,:,:), the stiffness contributed by a unit modulus at one node."""
        if not 0 <= node < self.n_nodes:
            raise FEMError(f"Node {node} out of range for {self.n_nodes} nodes")
        weights = np.asarray(self.averaging[:, node].todense()).ravel()
        return self._assemble(weights)

    @cached_property
    def slices(self) -> List[sparse.csr_matrix]:
        return [self.slice(i) for i in range(self.n_nodes)]

    def lift(self, E: np.ndarray, f: np.ndarray) -> np.ndarray:
        """
        Right-hand side for `system_matrix(E)`: prescribed values folded into f.

        Free rows get f − K_free,fixed·g and fixed rows get g, so the solution
        carries the prescribed displacement g exactly.
        """
        rhs = np.array(f, dtype=float)
        if np.any(self.prescribed):
            K = self.unconstrained_stiffness(E)
            rhs -= K @ self.prescribed
        rhs[self.fixed] = self.prescribed[self.fixed]
        return rhs


def _as_modulus(E: np.ndarray, n_nodes: int) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if E.shape != (n_nodes,):
        raise FEMError(f"Modulus field must have shape ({n_nodes},), got {E.shape}")
    return E


def _as_field(v: np.ndarray, n_dofs: int, name: str = "field") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (n_dofs,):
        raise FEMError(f"{name} must have shape ({n_dofs},), got {v.shape}")
    return v


def split_components(v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Lateral and axial parts of an interleaved FieldVector."""
    return v[0::2], v[1::2]


def apply_dirichlet(
    target: Union[PsiTensor, np.ndarray], prescribed: PrescribedLike
) -> Union[PsiTensor, np.ndarray]:
    """
    Apply prescribed nodal displacements.

    On a PsiTensor the prescribed DOFs are eliminated symmetrically (zero rows
    and columns in every slice, unit diagonal added only by `system_matrix`),
    so K(E) stays linear in E on the free DOFs. On a FieldVector the
    prescribed entries are overwritten with their values.

    Args:
        target: A PsiTensor or a length-2N FieldVector.
        prescribed: node -> (u_lat, u_ax) mapping, node iterable (zeros), or
            iterable of (node, (u_lat, u_ax)) pairs.

    Returns:
        A new PsiTensor or FieldVector; the input is not modified.

    Raises:
        DirichletError: For unknown nodes or a node prescribed twice.
    """
    if isinstance(target, PsiTensor):
        values = _normalize_prescribed(prescribed, target.n_nodes)
        fixed = target.fixed.copy()
        prescribed_values = target.prescribed.copy()
        for node, (u_lat, u_ax) in values.items():
            if fixed[2 * node] or fixed[2 * node + 1]:
                raise DirichletError(f"Node {node} is prescribed more than once")
            fixed[2 * node : 2 * node + 2] = True
            prescribed_values[2 * node : 2 * node + 2] = (u_lat, u_ax)
        fixed.setflags(write=False)
        prescribed_values.setflags(write=False)
        return replace(target, fixed=fixed, prescribed=prescribed_values)

    vector = np.array(target, dtype=float)
    if vector.ndim != 1 or vector.size % 2:
        raise FEMError(f"FieldVector must be 1-D of even length, got {vector.shape}")
    for node, (u_lat, u_ax) in _normalize_prescribed(prescribed, vector.size // 2).items():
        vector[2 * node : 2 * node + 2] = (u_lat, u_ax)
    return vector


def _reference_psi(mesh: Mesh, nu: float) -> PsiTensor:
    material = material_matrix(1.0, nu)
    B = _strain_displacement_all(mesh)
    scale = mesh.thickness * mesh.signed_areas
    reference = scale[:, None, None] * np.einsum("eki,kl,elj->eij", B, material, B)
    # Symmetrize away round-off from the triple product.
    reference = 0.5 * (reference + reference.transpose(0, 2, 1))

    rows = np.repeat(np.arange(mesh.n_elements), 3)
    averaging = sparse.csr_matrix(
        (np.full(rows.size, 1.0 / 3.0), (rows, mesh.elements.ravel())),
        shape=(mesh.n_elements, mesh.n_nodes),
    )
    fixed = np.zeros(mesh.n_dofs, dtype=bool)
    prescribed = np.zeros(mesh.n_dofs)
    for array in (reference, fixed, prescribed):
        array.setflags(write=False)
    return PsiTensor(
        n_nodes=mesh.n_nodes,
        element_dofs=mesh.element_dofs,
        reference=reference,
        averaging=averaging,
        fixed=fixed,
        prescribed=prescribed,
    )


def assemble_psi(mesh: Mesh, nu: float, dirichlet: PrescribedLike) -> PsiTensor:
    """
    Assemble Ψ for a mesh with Dirichlet elimination.

    A nodal modulus enters each adjacent element as one third of the element
    modulus (element modulus = mean of its vertex values), so slice i holds
    (1/3)·k̃_e for every element e touching node i.

    Args:
        mesh: The mesh.
        nu: Poisson's ratio.
        dirichlet: Prescribed nodes (see `apply_dirichlet`); must be nonempty.

    Returns:
        PsiTensor: The eliminated tensor.

    Raises:
        DirichletError: If the Dirichlet set is empty.
    """
    values = _normalize_prescribed(dirichlet, mesh.n_nodes)
    if not values:
        raise DirichletError(
            "Refusing to assemble without Dirichlet nodes: K(E) would be singular"
        )
    psi = apply_dirichlet(_reference_psi(mesh, nu), values)
    assert isinstance(psi, PsiTensor)
    logger.info(
        f"Assembled Psi for {mesh.n_nodes} nodes, {mesh.n_elements} elements, "
        f"{len(psi.fixed_dofs)} fixed DOFs"
    )
    return psi


def assemble_unconstrained(mesh: Mesh, nu: float) -> PsiTensor:
    """Ψ without boundary conditions; K(E) from it has rigid-body null space."""
    return _reference_psi(mesh, nu)


def _check_modulus(E: np.ndarray, n_nodes: int) -> np.ndarray:
    E = _as_modulus(E, n_nodes)
    if np.isnan(E).any():
        bad = np.flatnonzero(np.isnan(E))[:5].tolist()
        raise FEMError(f"Modulus field has NaN entries at nodes {bad}")
    if (E < 0).any():
        logger.warning(f"Modulus field has {int((E < 0).sum())} negative entries")
    return E


def _element_forces(psi: PsiTensor, u: np.ndarray) -> np.ndarray:
    """k̃_e·u_e for every element, with Dirichlet DOFs of u masked out."""
    masked = np.where(psi.fixed, 0.0, u)
    return np.einsum("eij,ej->ei", psi.reference, masked[psi.element_dofs])


def stiffness_apply(psi: PsiTensor, E: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    Compute f = K(E)·u on the eliminated system.

    Dirichlet rows of the result are zero (reaction forces are not modeled).

    Raises:
        FEMError: On shape mismatch or NaN moduli.
    """
    E = _check_modulus(E, psi.n_nodes)
    u = _as_field(u, psi.n_dofs, "u")
    forces = psi.element_moduli(E)[:, None] * _element_forces(psi, u)
    f = np.bincount(psi.element_dofs.ravel(), weights=forces.ravel(), minlength=psi.n_dofs)
    f[psi.fixed] = 0.0
    return f


def _element_dmatrix(psi: PsiTensor, u: np.ndarray) -> sparse.csr_matrix:
    """2N×M matrix whose column e is the scattered k̃_e·u_e."""
    forces = _element_forces(psi, u)
    rows = psi.element_dofs.ravel()
    cols = np.repeat(np.arange(psi.n_elements), 6)
    values = np.where(psi.fixed[rows], 0.0, forces.ravel())
    return sparse.coo_matrix(
        (values, (rows, cols)), shape=(psi.n_dofs, psi.n_elements)
    ).tocsr()


def dmatrix(psi: PsiTensor, u: np.ndarray) -> sparse.csr_matrix:
    """
    Sparse D(u) = (Ψu)ᵀ, a 2N×N matrix with column i equal to Ψ(i)·u.

    Raises:
        FEMError: On shape mismatch or non-finite u.
    """
    u = _as_field(u, psi.n_dofs, "u")
    if not np.all(np.isfinite(u)):
        raise FEMError("Displacement field has non-finite entries")
    return (_element_dmatrix(psi, u) @ psi.averaging).tocsr()


def dmatrix_dense(psi: PsiTensor, u: np.ndarray) -> np.ndarray:
    """Dense D(u^m), as used explicitly by the inverse solver's gradient."""
    return np.asarray(dmatrix(psi, u).toarray())


def dmatrix_apply(psi: PsiTensor, u: np.ndarray, E: np.ndarray) -> np.ndarray:
    """
    Compute D(u)·E, which equals K(E)·u for every u and E.

    Raises:
        FEMError: On shape mismatch.
    """
    E = _as_modulus(E, psi.n_nodes)
    u = _as_field(u, psi.n_dofs, "u")
    return np.asarray(_element_dmatrix(psi, u) @ psi.element_moduli(E))


def factorize_spd(matrix: Any, what: str = "matrix") -> Tuple[np.ndarray, bool]:
    """
    Dense Cholesky factorization of a symmetric positive definite matrix.

    Args:
        matrix: Dense array or scipy sparse matrix.
        what: Name used in the error message.

    Returns:
        The (factor, lower) pair accepted by scipy.linalg.cho_solve.

    Raises:
        FactorizationError: With the smallest eigenvalue when not SPD.
    """
    dense = matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix, dtype=float)
    try:
        return scipy.linalg.cho_factor(dense, lower=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        finite = np.all(np.isfinite(dense))
        min_eig = (
            float(scipy.linalg.eigvalsh(dense, subset_by_index=[0, 0])[0])
            if finite
            else float("nan")
        )
        raise FactorizationError(
            f"{what} is not positive definite (min eigenvalue {min_eig:.3e}): {e}",
            min_eig,
        )
