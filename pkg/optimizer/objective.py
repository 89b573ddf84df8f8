"""
Penalized compliance, its distributed shape derivative and the descent direction.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from constants.exceptions import Exceptions
from fem.assembly import (
    LinearSystem,
    MaterialField,
    apply_dirichlet,
    assemble_deformation,
    normal_dofs,
    stress_from_strain,
)
from fem.quadrature import physical_points, triangle_rule
from fem.solver import LinearSolver
from fem.spaces import DiscreteField, FunctionSpace, function_space
from geometry.mesh import Mesh

GradientEvaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CostBreakdown:
    compliance: float
    volume_fraction: float
    penalty: float
    total: float


def compliance(u: DiscreteField, load: np.ndarray) -> float:
    """J = l(u)."""
    if len(load) != len(u.values):
        raise Exceptions.mesh_mismatch_exception("load vector")
    return float(load @ u.values)


def penalized_cost(
    compliance_value: float, volume_fraction: float, penalty_weight: float, target_fraction: float
) -> CostBreakdown:
    """J^P = J + (Lambda / 2) (target - |W| / |D|)^2."""
    if not penalty_weight > 0:
        raise Exceptions.parameter_exception("penalty_weight", penalty_weight, "> 0")
    if not 0.0 < target_fraction < 1.0:
        raise Exceptions.parameter_exception("target_fraction", target_fraction, "in (0, 1)")
    penalty = 0.5 * penalty_weight * (target_fraction - volume_fraction) ** 2
    return CostBreakdown(
        compliance=float(compliance_value),
        volume_fraction=float(volume_fraction),
        penalty=float(penalty),
        total=float(compliance_value + penalty),
    )


def volume_multiplier(
    penalty_weight: float, domain_area: float, target_fraction: float, volume_fraction: float
) -> float:
    """Lambda~ = Lambda / |D| * (target - |W| / |D|)."""
    return penalty_weight / domain_area * (target_fraction - volume_fraction)


@dataclass(frozen=True)
class ShapeTensors:
    S: np.ndarray  # (nt, nq, 2, 2)
    T: np.ndarray  # (nt, nq, 2)


def shape_tensors(
    u: DiscreteField,
    material: MaterialField,
    rule_degree: int,
    body_force: GradientEvaluator | None = None,
    body_force_gradient: GradientEvaluator | None = None,
    body_scale: np.ndarray | None = None,
) -> ShapeTensors:
    """
    S = 2 grad(u)^T sigma + (2 f_W . u - sigma : eps) Id and
    T = 2 (grad(f_W) u + grad(u)^T f_W) at the points of triangle_rule(rule_degree).

    Gradients follow grad[..., c, d] = d(.)_c / dx_d. The body force needs an
    analytic gradient; it is never differentiated numerically.
    """
    if body_force is not None and body_force_gradient is None:
        raise Exceptions.parameter_exception(
            "body_force_gradient", None, "an analytic gradient whenever a body force is set"
        )
    mesh = u.mesh
    rule = triangle_rule(rule_degree)
    values, grad = u.at_quadrature(rule)
    strain = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    stress = stress_from_strain(strain, material.mu, material.lam)
    energy = np.einsum("tqcd,tqcd->tq", stress, strain)

    S = 2.0 * np.einsum("tqce,tqcd->tqed", grad, stress)
    T = np.zeros(values.shape)
    work = np.zeros(energy.shape)
    if body_force is not None:
        points = physical_points(mesh.vertices, mesh.triangles, rule)
        flat = points.reshape(-1, 2)
        f = np.asarray(body_force(flat), dtype=float).reshape(values.shape)
        grad_f = np.asarray(body_force_gradient(flat), dtype=float).reshape(grad.shape)
        if body_scale is not None:
            f = f * body_scale[:, None, None]
            grad_f = grad_f * body_scale[:, None, None, None]
        work = np.einsum("tqc,tqc->tq", f, values)
        T = 2.0 * (
            np.einsum("tqec,tqc->tqe", grad_f, values) + np.einsum("tqce,tqc->tqe", grad, f)
        )
    S = S + (2.0 * work - energy)[..., None, None] * np.eye(2)
    return ShapeTensors(S=S, T=T)


@dataclass(frozen=True, eq=False)
class ShapeGradient:
    """Vector G_j = dJ^P(W)(phi_j) over the vector basis of a deformation space."""

    mesh: Mesh
    degree: int
    values: np.ndarray

    def restriction(self) -> np.ndarray:
        """Entries of the persistent initial-mesh vertices, comparable across meshes."""
        return self.values[: 2 * self.mesh.n_initial_vertices]

    def __matmul__(self, other: np.ndarray) -> float:
        return float(self.values @ other)


def volume_functional(space: FunctionSpace, strong: np.ndarray) -> np.ndarray:
    """Vector of int_W div(phi_j) with W the union of strong triangles."""
    rule = triangle_rule(space.degree - 1)
    _, grads = space.tabulate(rule)
    weight = space.mesh.areas * np.asarray(strong, dtype=float)
    # d(N_l e_c)/dx_c = dN_l/dx_c
    local = np.einsum("q,t,tqlc->tlc", rule.weights, weight, grads)
    vector = np.zeros(space.n_dof)
    np.add.at(vector, space.element_dofs.ravel(), local.ravel())
    return vector


def shape_gradient(
    u: DiscreteField,
    material: MaterialField,
    lambda_tilde: float,
    strong: np.ndarray,
    degree: int = 1,
    body_force: GradientEvaluator | None = None,
    body_force_gradient: GradientEvaluator | None = None,
    body_scale: np.ndarray | None = None,
) -> ShapeGradient:
    """
    Assemble dJ^P(W)(theta) = int S : grad(theta) + T . theta - Lambda~ int_W div(theta)
    over the vector basis of the degree-`degree` space.

    Args:
        u (DiscreteField): Displacement solving the sample's elasticity problem.
        material (MaterialField): Ersatz material used for u.
        lambda_tilde (float): Volume multiplier, see volume_multiplier.
        strong (np.ndarray): Strong-phase flag per triangle.
        degree (int): 1 for the descent direction, 2 for the enriched dual.
    """
    mesh = u.mesh
    if len(strong) != mesh.n_triangles:
        raise Exceptions.mesh_mismatch_exception("material indicator")
    space = function_space(mesh, degree)
    rule_degree = 2 * degree
    tensors = shape_tensors(u, material, rule_degree, body_force, body_force_gradient, body_scale)
    rule = triangle_rule(rule_degree)
    values, grads = space.tabulate(rule)
    wa = rule.weights[None, :] * mesh.areas[:, None]
    local = np.einsum("tq,tqcd,tqld->tlc", wa, tensors.S, grads) + np.einsum(
        "tq,tqc,ql->tlc", wa, tensors.T, values
    )
    vector = np.zeros(space.n_dof)
    np.add.at(vector, space.element_dofs.ravel(), local.ravel())
    vector -= lambda_tilde * volume_functional(space, strong)
    if not np.all(np.isfinite(vector)):
        raise Exceptions.numeric_exception("shape gradient is not finite")
    return ShapeGradient(mesh=mesh, degree=degree, values=vector)


def deformation_system(mesh: Mesh, degree: int, tau1: float, tau2: float) -> LinearSystem:
    space = function_space(mesh, degree)
    matrix = assemble_deformation(space, tau1, tau2)
    return apply_dirichlet(LinearSystem.unconstrained(matrix), normal_dofs(space))


def deformation_solver(mesh: Mesh, degree: int, tau1: float, tau2: float) -> LinearSolver:
    """Factorized b(., .) with theta . n = 0, shared by every sample on the mesh."""
    key = ("deformation_solver", degree, tau1, tau2)
    if key not in mesh.cache:
        mesh.cache[key] = LinearSolver(deformation_system(mesh, degree, tau1, tau2))
    return mesh.cache[key]


def descent_direction(
    gradient: ShapeGradient, solver: LinearSolver
) -> tuple[DiscreteField, float]:
    """
    Solve b(theta, phi) = -dJ^P(phi) and return theta with dJ^P(theta).

    dJ^P(theta) = -b(theta, theta) <= 0 for the eliminated system.
    """
    if solver.dof != len(gradient.values):
        raise Exceptions.mesh_mismatch_exception("deformation system")
    theta = solver.solve(-gradient.values)
    field = DiscreteField(gradient.mesh, gradient.degree, theta)
    return field, gradient @ theta


def sample_std(values: Sequence[float]) -> float:
    """Unbiased sample standard deviation; zero for fewer than two values."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean_cost: float
    cost_std: float
    mean_gradient: np.ndarray
    gradient_variance: float
    sample_size: int


def mc_aggregate(costs: Sequence[float], gradients: Sequence[np.ndarray]) -> MonteCarloEstimate:
    """
    Sample means in the given order and the mean of the per-component
    variances (1 / (N - 1) normalization, zero for a single sample).
    """
    if len(costs) == 0 or len(costs) != len(gradients):
        raise Exceptions.parameter_exception(
            "samples", f"{len(costs)} costs / {len(gradients)} gradients", "matching counts >= 1"
        )
    stacked = np.vstack([np.asarray(g, dtype=float) for g in gradients])
    n = len(costs)
    variance = 0.0 if n == 1 else float(np.var(stacked, axis=0, ddof=1).mean())
    return MonteCarloEstimate(
        mean_cost=float(np.mean(np.asarray(costs, dtype=float))),
        cost_std=sample_std(costs),
        mean_gradient=stacked.mean(axis=0),
        gradient_variance=variance,
        sample_size=n,
    )
