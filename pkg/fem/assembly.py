"""
Assembly of the ersatz elasticity system, the load functional and the
deformation (descent direction) system.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from constants.exceptions import Exceptions
from fem.quadrature import edge_rule, physical_points, triangle_rule
from fem.spaces import DiscreteField, FunctionSpace
from geometry.mesh import BOUNDARY_NEUMANN, Mesh
from helpers.logger_config import logger

VectorEvaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MaterialField:
    """Per-triangle Lame values, already scaled by the ersatz factor."""

    mu: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        if np.any(self.mu <= 0) or np.any(self.mu + self.lam <= 0):
            raise Exceptions.parameter_exception(
                "material", "lame values", "mu > 0 and mu + lambda > 0 on every triangle"
            )

    def tangent(self) -> np.ndarray:
        """Plane Voigt tangent (eps_xx, eps_yy, 2 eps_xy) per triangle, (nt, 3, 3)."""
        nt = len(self.mu)
        d = np.zeros((nt, 3, 3))
        d[:, 0, 0] = d[:, 1, 1] = 2 * self.mu + self.lam
        d[:, 0, 1] = d[:, 1, 0] = self.lam
        d[:, 2, 2] = self.mu
        return d


def ersatz_material(
    strong: np.ndarray,
    mu: float,
    lam: float,
    epsilon: float,
    stiffness_scale: np.ndarray | None = None,
) -> MaterialField:
    """
    A_W = A on strong triangles and epsilon * A on weak ones.

    Args:
        strong (np.ndarray): Boolean flag per triangle.
        mu (float): Lame mu of the solid phase.
        lam (float): Lame lambda of the solid phase.
        epsilon (float): Ersatz factor in (0, 1).
        stiffness_scale (np.ndarray | None): Optional positive per-triangle
            factor, e.g. a random Young's modulus realization.
    """
    if not 0.0 < epsilon < 1.0:
        raise Exceptions.parameter_exception("epsilon", epsilon, "in (0, 1)")
    factor = np.where(np.asarray(strong, dtype=bool), 1.0, epsilon)
    if stiffness_scale is not None:
        factor = factor * np.asarray(stiffness_scale, dtype=float)
    return MaterialField(mu=mu * factor, lam=lam * factor)


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray  # boolean per dof

    @classmethod
    def unconstrained(cls, matrix, rhs=None) -> "LinearSystem":
        n = matrix.shape[0]
        return cls(
            sp.csr_matrix(matrix),
            np.zeros(n) if rhs is None else np.asarray(rhs, dtype=float),
            np.zeros(n, dtype=bool),
        )


def _scatter(space: FunctionSpace, local: np.ndarray) -> sp.csr_matrix:
    dofs = space.element_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    return sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(space.n_dof, space.n_dof)
    ).tocsr()


def _strain_operator(grads: np.ndarray) -> np.ndarray:
    """Voigt strain of every vector basis function, (nt, nq, 3, 2 nloc)."""
    nt, nq, nloc, _ = grads.shape
    b = np.zeros((nt, nq, 3, 2 * nloc))
    b[:, :, 0, 0::2] = grads[..., 0]
    b[:, :, 1, 1::2] = grads[..., 1]
    b[:, :, 2, 0::2] = grads[..., 1]
    b[:, :, 2, 1::2] = grads[..., 0]
    return b


def assemble_elasticity(space: FunctionSpace, material: MaterialField) -> sp.csr_matrix:
    """Matrix of a(u, v) = sum_K int A_W sym grad u : sym grad v."""
    mesh = space.mesh
    if len(material.mu) != mesh.n_triangles:
        raise Exceptions.mesh_mismatch_exception("material field")
    rule = triangle_rule(2 * (space.degree - 1))
    _, grads = space.tabulate(rule)
    b = _strain_operator(grads)
    local = np.einsum(
        "q,t,tqia,tij,tqjb->tab", rule.weights, mesh.areas, b, material.tangent(), b,
        optimize=True,
    )
    return _scatter(space, local)


def assemble_deformation(space: FunctionSpace, tau1: float, tau2: float) -> sp.csr_matrix:
    """Matrix of b(theta, phi) = int tau1 grad theta : grad phi + tau2 theta . phi."""
    if not tau1 > 0:
        raise Exceptions.parameter_exception("tau1", tau1, "a positive coefficient")
    if not tau2 > 0:
        raise Exceptions.parameter_exception("tau2", tau2, "a positive coefficient")
    mesh = space.mesh
    rule = triangle_rule(2 * space.degree)
    values, grads = space.tabulate(rule)
    wa = rule.weights[None, :] * mesh.areas[:, None]
    stiffness = np.einsum("tq,tqad,tqbd->tab", wa, grads, grads)
    mass = np.einsum("tq,qa,qb->tab", wa, values, values)
    scalar_local = tau1 * stiffness + tau2 * mass

    nodes = space.element_nodes
    nloc = nodes.shape[1]
    rows = np.repeat(nodes, nloc, axis=1).ravel()
    cols = np.tile(nodes, (1, nloc)).ravel()
    scalar = sp.coo_matrix(
        (scalar_local.ravel(), (rows, cols)), shape=(space.n_nodes, space.n_nodes)
    ).tocsr()
    return sp.kron(scalar, sp.identity(2), format="csr")


def nearest_vertex(mesh: Mesh, point: Sequence[float]) -> int:
    """Vertex carrying a nodal point load; must lie within h_min / 2 of the point."""
    p = np.asarray(point, dtype=float)
    distances = np.linalg.norm(mesh.vertices - p, axis=1)
    vertex = int(np.argmin(distances))
    if distances[vertex] > 0.5 * mesh.element_sizes.min():
        raise Exceptions.configuration_exception(
            f"point load at {tuple(p)} is {distances[vertex]:.3e} away from the mesh"
        )
    return vertex


def assemble_load(
    space: FunctionSpace,
    body_force: VectorEvaluator | None = None,
    traction: VectorEvaluator | None = None,
    neumann_tag: int = BOUNDARY_NEUMANN,
    point_loads: Sequence[tuple[Sequence[float], Sequence[float]]] = (),
    body_scale: np.ndarray | None = None,
) -> np.ndarray:
    """
    Load vector l(v) = int f . v + int_{Gamma_n} g . v + sum of nodal loads.

    Args:
        space (FunctionSpace): Test space.
        body_force (VectorEvaluator | None): f, points (n, 2) -> (n, 2).
        traction (VectorEvaluator | None): g on edges tagged neumann_tag.
        neumann_tag (int): Boundary tag carrying the traction.
        point_loads: (point, force) pairs applied at the nearest vertex.
        body_scale (np.ndarray | None): Per-triangle factor on f, e.g. the
            ersatz factor giving f_W.
    """
    mesh = space.mesh
    load = np.zeros(space.n_dof)

    if body_force is not None:
        rule = triangle_rule(space.degree + 2)
        values, _ = space.tabulate(rule)
        points = physical_points(mesh.vertices, mesh.triangles, rule)
        f = np.asarray(body_force(points.reshape(-1, 2)), dtype=float).reshape(points.shape)
        weight = mesh.areas if body_scale is None else mesh.areas * body_scale
        local = np.einsum("q,t,ql,tqc->tlc", rule.weights, weight, values, f)
        np.add.at(load, space.element_dofs.ravel(), local.reshape(-1))

    if traction is not None:
        edge_ids = mesh.boundary_edges(neumann_tag)
        if edge_ids.size == 0:
            raise Exceptions.configuration_exception(
                f"traction given but no boundary edge carries tag {neumann_tag}"
            )
        s, w = edge_rule(3)
        ends = mesh.vertices[mesh.edges[edge_ids]]
        points = ends[:, None, 0] + s[None, :, None] * (ends[:, None, 1] - ends[:, None, 0])
        g = np.asarray(traction(points.reshape(-1, 2))).reshape(len(edge_ids), len(s), 2)
        if space.degree == 1:
            shape = np.column_stack([1 - s, s])
        else:
            shape = np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])
        local = np.einsum("q,e,qn,eqc->enc", w, mesh.edge_lengths[edge_ids], shape, g)
        nodes = space.edge_nodes(edge_ids)
        dofs = np.stack([2 * nodes, 2 * nodes + 1], axis=2)
        np.add.at(load, dofs.ravel(), local.ravel())

    for point, force in point_loads:
        vertex = nearest_vertex(mesh, point)
        load[2 * vertex : 2 * vertex + 2] += np.asarray(force, dtype=float)

    return load


def clamped_dofs(space: FunctionSpace, tag: int) -> np.ndarray:
    """Both components of every node lying on an edge with the given tag."""
    mask = np.zeros(space.n_dof, dtype=bool)
    edge_ids = space.mesh.boundary_edges(tag)
    nodes = np.unique(space.edge_nodes(edge_ids))
    mask[2 * nodes] = True
    mask[2 * nodes + 1] = True
    return mask


def normal_dofs(space: FunctionSpace, tol: float = 1e-12) -> np.ndarray:
    """theta . n = 0 on the rectangle: x-components on vertical sides, y on horizontal."""
    mesh = space.mesh
    xy = space.node_coordinates
    scale = tol * max(mesh.lx, mesh.ly)
    vertical = (np.abs(xy[:, 0]) <= scale) | (np.abs(xy[:, 0] - mesh.lx) <= scale)
    horizontal = (np.abs(xy[:, 1]) <= scale) | (np.abs(xy[:, 1] - mesh.ly) <= scale)
    mask = np.zeros(space.n_dof, dtype=bool)
    mask[0::2] = vertical
    mask[1::2] = horizontal
    return mask


def apply_dirichlet(system: LinearSystem, constrained: np.ndarray) -> LinearSystem:
    """Symmetric elimination: zero rows and columns, unit diagonal, zero rhs."""
    constrained = np.asarray(constrained, dtype=bool) | system.constrained
    free = sp.diags((~constrained).astype(float))
    matrix = (free @ system.matrix @ free + sp.diags(constrained.astype(float))).tocsr()
    rhs = np.where(constrained, 0.0, system.rhs)
    return LinearSystem(matrix, rhs, constrained)


@dataclass(frozen=True)
class ElementFields:
    grad: np.ndarray  # (nt, nq, 2, 2)
    strain: np.ndarray
    stress: np.ndarray
    rule_degree: int


def stress_from_strain(strain: np.ndarray, mu: np.ndarray, lam: np.ndarray) -> np.ndarray:
    trace = strain[..., 0, 0] + strain[..., 1, 1]
    shape = (-1,) + (1,) * (strain.ndim - 1)
    eye = np.eye(2)
    return 2 * mu.reshape(shape) * strain + lam.reshape(shape) * trace[..., None, None] * eye


def element_fields(
    u: DiscreteField, material: MaterialField, triangle: int | None = None
) -> ElementFields:
    """
    Gradient, symmetric gradient and stress of u.

    Degree 1 fields give one (constant) tensor per triangle at the centroid;
    degree 2 fields are sampled at the degree-2 quadrature points.
    """
    rule = triangle_rule(0 if u.degree == 1 else 2)
    _, grad = u.at_quadrature(rule)
    strain = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    stress = stress_from_strain(strain, material.mu, material.lam)
    if triangle is not None:
        grad, strain, stress = grad[triangle], strain[triangle], stress[triangle]
    return ElementFields(grad, strain, stress, rule.degree)


def check_symmetric(matrix: sp.spmatrix, rel_tol: float = 1e-12) -> bool:
    scale = abs(matrix).max()
    if scale == 0:
        return True
    return abs(matrix - matrix.T).max() <= rel_tol * scale


def log_system(name: str, system: LinearSystem):
    logger.debug(
        "Assembled system",
        data={
            "system": name,
            "dof": int(system.matrix.shape[0]),
            "nnz": int(system.matrix.nnz),
            "constrained": int(system.constrained.sum()),
        },
    )
