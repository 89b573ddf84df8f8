"""
Vector Lagrange spaces of degree 1 and 2 on a Mesh.

Nodes of degree 1 are the mesh vertices. Degree 2 adds one node per edge,
numbered n_vertices + edge index. Vector DoFs are interleaved:
dof = 2 * node + component.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from constants.exceptions import Exceptions
from fem.quadrature import TriangleRule
from geometry.mesh import Mesh


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the barycentric coordinates, shape (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    areas = mesh.areas
    bad = np.flatnonzero(~(areas > 1e-14 * mesh.domain_area))
    if bad.size:
        raise Exceptions.assembly_exception(int(bad[0]), f"area {areas[bad[0]]:.3e}")
    grads = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = p[:, j, 1] - p[:, k, 1]
        grads[:, i, 1] = p[:, k, 0] - p[:, j, 0]
    return grads / (2.0 * areas)[:, None, None]


def reference_basis(degree: int, bary: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Basis values and derivatives with respect to the barycentric coordinates.

    Args:
        degree (int): 1 or 2.
        bary (np.ndarray): (nq, 3) barycentric points.

    Returns:
        tuple: values (nq, nloc) and d/dL (nq, nloc, 3). Local edge node k
        sits on the edge opposite vertex k.
    """
    nq = len(bary)
    if degree == 1:
        dvals = np.broadcast_to(np.eye(3), (nq, 3, 3)).copy()
        return bary.copy(), dvals
    if degree != 2:
        raise Exceptions.parameter_exception("degree", degree, "1 or 2")

    L0, L1, L2 = bary[:, 0], bary[:, 1], bary[:, 2]
    values = np.column_stack(
        [
            L0 * (2 * L0 - 1),
            L1 * (2 * L1 - 1),
            L2 * (2 * L2 - 1),
            4 * L1 * L2,
            4 * L2 * L0,
            4 * L0 * L1,
        ]
    )
    dvals = np.zeros((nq, 6, 3))
    for i, Li in enumerate((L0, L1, L2)):
        dvals[:, i, i] = 4 * Li - 1
    dvals[:, 3, 1], dvals[:, 3, 2] = 4 * L2, 4 * L1
    dvals[:, 4, 2], dvals[:, 4, 0] = 4 * L0, 4 * L2
    dvals[:, 5, 0], dvals[:, 5, 1] = 4 * L1, 4 * L0
    return values, dvals


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    mesh: Mesh
    degree: int

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise Exceptions.parameter_exception("degree", self.degree, "1 or 2")

    @property
    def n_nodes(self) -> int:
        if self.degree == 1:
            return self.mesh.n_vertices
        return self.mesh.n_vertices + len(self.mesh.edges)

    @property
    def n_dof(self) -> int:
        return 2 * self.n_nodes

    @cached_property
    def element_nodes(self) -> np.ndarray:
        if self.degree == 1:
            return self.mesh.triangles
        return np.hstack([self.mesh.triangles, self.mesh.n_vertices + self.mesh.tri_edges])

    @cached_property
    def element_dofs(self) -> np.ndarray:
        nodes = self.element_nodes
        return np.stack([2 * nodes, 2 * nodes + 1], axis=2).reshape(len(nodes), -1)

    @cached_property
    def node_coordinates(self) -> np.ndarray:
        if self.degree == 1:
            return self.mesh.vertices
        return np.vstack([self.mesh.vertices, self.mesh.edge_midpoints])

    @cached_property
    def gradL(self) -> np.ndarray:
        return barycentric_gradients(self.mesh)

    def tabulate(self, rule: TriangleRule) -> tuple[np.ndarray, np.ndarray]:
        """Basis values (nq, nloc) and physical gradients (nt, nq, nloc, 2)."""
        values, dvals = reference_basis(self.degree, rule.points)
        grads = np.einsum("qlj,tjd->tqld", dvals, self.gradL)
        return values, grads

    def edge_nodes(self, edge_ids: np.ndarray) -> np.ndarray:
        """Nodes on the given edges: (n, 2) endpoints, or (n, 3) with the midpoint."""
        ends = self.mesh.edges[edge_ids]
        if self.degree == 1:
            return ends
        return np.column_stack([ends, self.mesh.n_vertices + edge_ids])


def function_space(mesh: Mesh, degree: int) -> FunctionSpace:
    """Shared FunctionSpace per (mesh, degree) so cached tables are reused."""
    key = ("function_space", degree)
    if key not in mesh.cache:
        mesh.cache[key] = FunctionSpace(mesh, degree)
    return mesh.cache[key]


@dataclass(eq=False)
class DiscreteField:
    mesh: Mesh
    degree: int
    values: np.ndarray
    dirichlet_mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        expected = function_space(self.mesh, self.degree).n_dof
        if len(self.values) != expected:
            raise Exceptions.parameter_exception(
                "values", f"length {len(self.values)}", f"length {expected}"
            )

    @property
    def space(self) -> FunctionSpace:
        return function_space(self.mesh, self.degree)

    @property
    def nodal(self) -> np.ndarray:
        return self.values.reshape(-1, 2)

    @classmethod
    def zeros(cls, space: FunctionSpace) -> "DiscreteField":
        return cls(space.mesh, space.degree, np.zeros(space.n_dof))

    @classmethod
    def from_function(cls, space: FunctionSpace, fn) -> "DiscreteField":
        """Nodal interpolation of fn: (n, 2) points -> (n, 2) values."""
        vals = np.asarray(fn(space.node_coordinates), dtype=float).reshape(-1, 2)
        return cls(space.mesh, space.degree, vals.ravel())

    def at_quadrature(self, rule: TriangleRule) -> tuple[np.ndarray, np.ndarray]:
        """Values (nt, nq, 2) and gradients (nt, nq, 2, 2), grad[..., c, d] = du_c/dx_d."""
        space = self.space
        basis, grads = space.tabulate(rule)
        coeffs = self.nodal[space.element_nodes]
        vals = np.einsum("ql,tlc->tqc", basis, coeffs)
        grad = np.einsum("tqld,tlc->tqcd", grads, coeffs)
        return vals, grad


def interpolate(
    field: DiscreteField, target_degree: int = 1, mesh: Mesh | None = None
) -> DiscreteField:
    """Vertex interpolation I_h onto the linear space."""
    if mesh is not None and mesh is not field.mesh:
        raise Exceptions.mesh_mismatch_exception("interpolated field")
    if target_degree != 1:
        raise Exceptions.parameter_exception("target_degree", target_degree, "1")
    n = field.mesh.n_vertices
    return DiscreteField(field.mesh, 1, field.values[: 2 * n].copy())


def prolongate(field: DiscreteField) -> DiscreteField:
    """Exact embedding of a linear field into the quadratic space."""
    if field.degree == 2:
        return field
    mids = field.nodal[field.mesh.edges].mean(axis=1)
    values = np.concatenate([field.values, mids.ravel()])
    return DiscreteField(field.mesh, 2, values)
