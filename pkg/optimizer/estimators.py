"""
Dual-weighted residual indicators for the compliance and deformation goals.

Both indicators are products rho_K * omega_K of an element residual

    rho_K = ||R||_K + h_K^(-1/2) ||J||_dK

and a weight built from the error e = z - I_h z of an enriched (quadratic)
dual solution

    omega_K = ||e||_K + h_K^(1/2) ||e||_dK.

Residuals are evaluated for linear primal fields, whose gradients are
constant on every triangle.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from constants.exceptions import Exceptions
from fem.assembly import MaterialField, stress_from_strain
from fem.quadrature import edge_rule, physical_points, triangle_rule
from fem.spaces import DiscreteField, function_space, interpolate, prolongate
from geometry.mesh import BOUNDARY_DIRICHLET, BOUNDARY_NEUMANN, INTERIOR_EDGE, Mesh
from helpers.logger_config import logger
from optimizer.objective import GradientEvaluator

COMPLIANCE = "compliance"
DEFORMATION = "deformation"
EDGE_POINTS = 3


@dataclass(frozen=True, eq=False)
class IndicatorField:
    mesh: Mesh
    values: np.ndarray
    goal: str

    def __post_init__(self):
        if len(self.values) != self.mesh.n_triangles:
            raise Exceptions.mesh_mismatch_exception(f"{self.goal} indicator")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise Exceptions.numeric_exception(f"{self.goal} indicator is negative or not finite")

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class CombinedEstimate:
    relative_compliance: float
    relative_deformation: float
    total: float
    degenerate: bool = False


class EdgeGeometry:
    """Unit normals (outward from the first adjacent triangle), tangents and Gauss points."""

    def __init__(self, mesh: Mesh, n_points: int = EDGE_POINTS):
        self.mesh = mesh
        self.s, self.w = edge_rule(n_points)

    @cached_property
    def normals(self) -> np.ndarray:
        mesh = self.mesh
        ends = mesh.vertices[mesh.edges]
        d = ends[:, 1] - ends[:, 0]
        n = np.column_stack([d[:, 1], -d[:, 0]]) / mesh.edge_lengths[:, None]
        outward = np.einsum(
            "ed,ed->e", mesh.edge_midpoints - mesh.centroids[mesh.edge_triangles[:, 0]], n
        )
        return np.where(outward[:, None] < 0, -n, n)

    @cached_property
    def tangents(self) -> np.ndarray:
        n = self.normals
        return np.column_stack([-n[:, 1], n[:, 0]])

    @cached_property
    def points(self) -> np.ndarray:
        ends = self.mesh.vertices[self.mesh.edges]
        return ends[:, None, 0] + self.s[None, :, None] * (ends[:, None, 1] - ends[:, None, 0])

    def linear_trace(self, field: DiscreteField) -> np.ndarray:
        """Values of a linear field at the edge points, (ne, nq, 2)."""
        ends = field.nodal[self.mesh.edges]
        return (1 - self.s)[None, :, None] * ends[:, None, 0] + self.s[None, :, None] * ends[:, None, 1]

    def squared_norms(self, values: np.ndarray) -> np.ndarray:
        """||v||^2_E per edge for values (ne, nq, 2)."""
        return self.mesh.edge_lengths * np.einsum("q,eqc,eqc->e", self.w, values, values)

    def per_triangle(self, edge_values: np.ndarray) -> np.ndarray:
        return edge_values[self.mesh.tri_edges].sum(axis=1)


def edge_geometry(mesh: Mesh) -> EdgeGeometry:
    key = ("edge_geometry", EDGE_POINTS)
    if key not in mesh.cache:
        mesh.cache[key] = EdgeGeometry(mesh)
    return mesh.cache[key]


def _require_linear(field: DiscreteField, name: str):
    if field.degree != 1:
        raise Exceptions.parameter_exception(name, f"degree {field.degree}", "a linear field")


def _require_enriched(field: DiscreteField, mesh: Mesh, name: str):
    if field.degree != 2:
        raise Exceptions.parameter_exception(name, f"degree {field.degree}", "a quadratic field")
    if field.mesh is not mesh:
        raise Exceptions.mesh_mismatch_exception(name)


def dual_weights(z: DiscreteField) -> np.ndarray:
    """omega_K for the enriched dual z, with e = z - I_h z."""
    mesh = z.mesh
    error = DiscreteField(mesh, 2, z.values - prolongate(interpolate(z)).values)

    rule = triangle_rule(4)
    vals, _ = error.at_quadrature(rule)
    cell = np.sqrt(mesh.areas * np.einsum("q,tqc,tqc->t", rule.weights, vals, vals))

    geometry = edge_geometry(mesh)
    s = geometry.s
    shape = np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])
    nodes = function_space(mesh, 2).edge_nodes(np.arange(len(mesh.edges)))
    trace = np.einsum("qn,enc->eqc", shape, error.nodal[nodes])
    boundary = np.sqrt(geometry.per_triangle(geometry.squared_norms(trace)))

    return cell + np.sqrt(mesh.element_sizes) * boundary


def _flux_jumps(
    mesh: Mesh,
    flux: np.ndarray,
    boundary_residual,
) -> np.ndarray:
    """
    Squared jump norms per edge.

    Args:
        flux (np.ndarray): Flux tensor of each adjacent triangle at the edge
            points, (ne, 2, nq, 2, 2); entries of missing triangles are ignored.
        boundary_residual: Callable mapping (edge ids, outward flux . n) to
            the boundary residual at the edge points.
    """
    geometry = edge_geometry(mesh)
    n = geometry.normals
    flux_n = np.einsum("eqcd,ed->eqc", flux[:, 0], n)

    jumps = np.zeros(flux_n.shape)
    interior = np.flatnonzero(mesh.boundary_tags == INTERIOR_EDGE)
    other_n = np.einsum("eqcd,ed->eqc", flux[interior, 1], n[interior])
    jumps[interior] = 0.5 * (flux_n[interior] - other_n)

    boundary = np.flatnonzero(mesh.boundary_tags != INTERIOR_EDGE)
    jumps[boundary] = boundary_residual(boundary, flux_n[boundary])
    return geometry.squared_norms(jumps)


def _cell_norm(mesh: Mesh, rule, residual: np.ndarray) -> np.ndarray:
    return np.sqrt(mesh.areas * np.einsum("q,tqc,tqc->t", rule.weights, residual, residual))


def _per_triangle_points(fn, points, body_scale, trailing=(2,)):
    """Evaluate fn at (nt, nq, 2) points, scaled per triangle by body_scale."""
    values = np.asarray(fn(points.reshape(-1, 2)), dtype=float)
    values = values.reshape(points.shape[:-1] + tuple(trailing))
    if body_scale is not None:
        values = values * body_scale.reshape((-1,) + (1,) * (values.ndim - 1))
    return values


def eta_compliance(
    u: DiscreteField,
    z: DiscreteField,
    material: MaterialField,
    body_force: GradientEvaluator | None = None,
    traction: GradientEvaluator | None = None,
    neumann_tag: int = BOUNDARY_NEUMANN,
    body_scale: np.ndarray | None = None,
) -> IndicatorField:
    """
    Compliance indicator eta^c_K = rho^u_K * omega^z_K.

    Interior edges carry half the stress-flux difference. Clamped edges carry
    nothing. Traction edges carry g - sigma n when a traction density is
    given; every other boundary edge is traction-free and carries -sigma n.
    """
    _require_linear(u, "u")
    mesh = u.mesh
    _require_enriched(z, mesh, "z")

    # div sigma(u_h) vanishes on every triangle for linear u_h
    rule = triangle_rule(4)
    if body_force is not None:
        f = _per_triangle_points(
            body_force, physical_points(mesh.vertices, mesh.triangles, rule), body_scale
        )
        cell = _cell_norm(mesh, rule, f)
    else:
        cell = np.zeros(mesh.n_triangles)

    _, grad = u.at_quadrature(triangle_rule(0))
    strain = 0.5 * (grad[:, 0] + np.swapaxes(grad[:, 0], -1, -2))
    stress = stress_from_strain(strain, material.mu, material.lam)

    geometry = edge_geometry(mesh)
    nq = len(geometry.s)
    adjacent = mesh.edge_triangles
    flux = np.broadcast_to(
        stress[np.maximum(adjacent, 0)][:, :, None], (len(adjacent), 2, nq, 2, 2)
    )

    tags = mesh.boundary_tags

    def boundary_residual(edge_ids, flux_n):
        residual = -flux_n
        residual[tags[edge_ids] == BOUNDARY_DIRICHLET] = 0.0
        if traction is not None:
            loaded = tags[edge_ids] == neumann_tag
            points = geometry.points[edge_ids[loaded]]
            g = np.asarray(traction(points.reshape(-1, 2)), dtype=float).reshape(points.shape)
            residual[loaded] = g - flux_n[loaded]
        return residual

    jumps = geometry.per_triangle(_flux_jumps(mesh, flux, boundary_residual))
    rho = cell + np.sqrt(jumps) / np.sqrt(mesh.element_sizes)
    return IndicatorField(mesh, rho * dual_weights(z), COMPLIANCE)


def eta_deformation(
    theta: DiscreteField,
    zeta: DiscreteField,
    u: DiscreteField,
    material: MaterialField,
    lambda_tilde: float,
    strong: np.ndarray,
    tau1: float,
    tau2: float,
    body_force: GradientEvaluator | None = None,
    body_force_gradient: GradientEvaluator | None = None,
    body_scale: np.ndarray | None = None,
) -> IndicatorField:
    """
    Deformation indicator eta^d_K = rho^theta_K * omega^zeta_K.

    The cell residual is div(tau1 grad theta_h + S) - tau2 theta_h - T and the
    flux is tau1 grad theta_h + S - Lambda~ chi_W Id. Only the tangential
    part of the flux enters on the boundary, where theta . n = 0 is imposed.
    """
    _require_linear(theta, "theta")
    _require_linear(u, "u")
    mesh = theta.mesh
    if u.mesh is not mesh:
        raise Exceptions.mesh_mismatch_exception("displacement")
    _require_enriched(zeta, mesh, "zeta")
    if body_force is not None and body_force_gradient is None:
        raise Exceptions.parameter_exception(
            "body_force_gradient", None, "an analytic gradient whenever a body force is set"
        )
    strong = np.asarray(strong, dtype=bool)

    _, grad_u = u.at_quadrature(triangle_rule(0))
    grad_u = grad_u[:, 0]
    strain = 0.5 * (grad_u + np.swapaxes(grad_u, -1, -2))
    stress = stress_from_strain(strain, material.mu, material.lam)
    energy = np.einsum("tcd,tcd->t", stress, strain)
    # piecewise constant part of S
    S0 = 2.0 * np.einsum("tce,tcd->ted", grad_u, stress) - energy[:, None, None] * np.eye(2)

    _, grad_theta = theta.at_quadrature(triangle_rule(0))
    grad_theta = grad_theta[:, 0]

    rule = triangle_rule(4)
    theta_q, _ = theta.at_quadrature(rule)
    residual = -tau2 * theta_q
    if body_force is not None:
        u_q, _ = u.at_quadrature(rule)
        points = physical_points(mesh.vertices, mesh.triangles, rule)
        f = _per_triangle_points(body_force, points, body_scale)
        grad_f = _per_triangle_points(body_force_gradient, points, body_scale, (2, 2))
        # div S = grad(2 f . u) and T = 2 (grad(f) u + grad(u)^T f)
        div_S = 2.0 * (
            np.einsum("tqce,tqc->tqe", grad_f, u_q) + np.einsum("tce,tqc->tqe", grad_u, f)
        )
        T = 2.0 * (
            np.einsum("tqec,tqc->tqe", grad_f, u_q) + np.einsum("tce,tqc->tqe", grad_u, f)
        )
        residual = residual + div_S - T
    cell = _cell_norm(mesh, rule, residual)

    geometry = edge_geometry(mesh)
    nq = len(geometry.s)
    adjacent = mesh.edge_triangles
    sides = np.maximum(adjacent, 0)
    base = tau1 * grad_theta + S0 - lambda_tilde * strong[:, None, None] * np.eye(2)
    flux = np.broadcast_to(base[sides][:, :, None], (len(adjacent), 2, nq, 2, 2)).copy()
    if body_force is not None:
        u_e = geometry.linear_trace(u)
        f_e = np.asarray(body_force(geometry.points.reshape(-1, 2)), dtype=float).reshape(u_e.shape)
        work = np.einsum("eqc,eqc->eq", f_e, u_e)
        scale = np.ones(sides.shape) if body_scale is None else body_scale[sides]
        flux += (2.0 * scale[:, :, None] * work[:, None, :])[..., None, None] * np.eye(2)

    t = geometry.tangents

    def boundary_residual(edge_ids, flux_n):
        tangential = np.einsum("eqc,ec->eq", flux_n, t[edge_ids])
        return -tangential[..., None] * t[edge_ids][:, None, :]

    jumps = geometry.per_triangle(_flux_jumps(mesh, flux, boundary_residual))
    rho = cell + np.sqrt(jumps) / np.sqrt(mesh.element_sizes)
    return IndicatorField(mesh, rho * dual_weights(zeta), DEFORMATION)


def combine(
    eta_c_total: float, qc_value: float, eta_d_total: float, qd_value: float
) -> CombinedEstimate:
    """Q = eta^c / |Q^c(u_h)| + eta^d / |Q^d(theta_h)|; a zero goal keeps the absolute total."""
    degenerate = False
    relative = []
    for goal, eta, value in ((COMPLIANCE, eta_c_total, qc_value), (DEFORMATION, eta_d_total, qd_value)):
        if value == 0.0:
            degenerate = True
            logger.warning(
                "Goal value vanished, using the absolute estimate",
                data={"goal": goal, "eta": eta},
            )
            relative.append(float(eta))
        else:
            relative.append(float(eta) / abs(value))
    return CombinedEstimate(
        relative_compliance=relative[0],
        relative_deformation=relative[1],
        total=relative[0] + relative[1],
        degenerate=degenerate,
    )


def per_sample_indicator_mean(fields: Sequence[IndicatorField]) -> IndicatorField:
    if len(fields) == 0:
        raise Exceptions.parameter_exception("fields", 0, "at least one indicator field")
    first = fields[0]
    for f in fields[1:]:
        if f.mesh is not first.mesh or f.goal != first.goal:
            raise Exceptions.mesh_mismatch_exception("indicator field")
    mean = np.mean(np.stack([f.values for f in fields]), axis=0)
    return IndicatorField(first.mesh, mean, first.goal)
