"""
Per-sample pipeline: primal and deformation solves, cost, shape gradient and
(optionally) the enriched dual solves feeding the error indicators.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from fem.assembly import (
    LinearSystem,
    MaterialField,
    apply_dirichlet,
    assemble_elasticity,
    assemble_load,
    clamped_dofs,
    ersatz_material,
    log_system,
)
from fem.solver import LinearSolver
from fem.spaces import DiscreteField, function_space
from geometry.mesh import BOUNDARY_DIRICHLET, BOUNDARY_NEUMANN, Mesh
from helpers.logger_config import logger
from optimizer.estimators import IndicatorField, eta_compliance, eta_deformation
from optimizer.objective import (
    CostBreakdown,
    ShapeGradient,
    compliance,
    deformation_solver,
    descent_direction,
    penalized_cost,
    shape_gradient,
)
from optimizer.workflows.robust_shape.benchmark import CantileverBenchmark, Sample
from schemas.config_schemas import Config
from services.computational_index import (
    DEFORMATION,
    DEFORMATION_ENRICHED,
    PRIMAL,
    PRIMAL_ENRICHED,
    SolveLedger,
)


@dataclass(frozen=True, eq=False)
class SampleResult:
    index: int
    cost: CostBreakdown
    gradient: ShapeGradient
    theta: DiscreteField
    dj_value: float
    descent_gap: float
    eta_c: IndicatorField | None = None
    eta_d: IndicatorField | None = None


@dataclass(frozen=True)
class EvaluationContext:
    """Everything shared by the samples of one evaluation pass."""

    mesh: Mesh
    strong: np.ndarray
    volume_fraction: float
    lambda_tilde: float
    estimate: bool


class SamplePipeline:
    def __init__(self, benchmark: CantileverBenchmark, config: Config, ledger: SolveLedger):
        self.benchmark = benchmark
        self.config = config
        self.ledger = ledger
        self._cache_lock = threading.Lock()

    def evaluate(self, context: EvaluationContext, samples: list[Sample]) -> list[SampleResult]:
        """Run every sample; results come back in sample order."""
        workers = min(self.config.optimization.workers, len(samples))
        if workers <= 1:
            return [self.evaluate_sample(context, s) for s in samples]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda s: self.evaluate_sample(context, s), samples))

    def material(self, context: EvaluationContext, s: Sample) -> MaterialField:
        return ersatz_material(
            context.strong,
            self.benchmark.mu,
            self.benchmark.lam,
            self.config.material.epsilon,
            stiffness_scale=self.benchmark.stiffness_scale(s, context.mesh),
        )

    def _body_scale(self, context: EvaluationContext) -> np.ndarray:
        return np.where(context.strong, 1.0, self.config.material.epsilon)

    def load_vector(self, context: EvaluationContext, s: Sample, degree: int) -> np.ndarray:
        benchmark = self.benchmark
        space = function_space(context.mesh, degree)
        return assemble_load(
            space,
            body_force=benchmark.body_force if benchmark.has_body_force else None,
            traction=benchmark.traction(s),
            neumann_tag=BOUNDARY_NEUMANN,
            point_loads=benchmark.point_loads(s),
            body_scale=self._body_scale(context),
        )

    def elasticity_solver(
        self, context: EvaluationContext, material: MaterialField, degree: int, shared: bool
    ) -> LinearSolver:
        """Factorized elasticity operator; shared across samples when the material is."""
        mesh = context.mesh
        key = ("elasticity_solver", degree, context.strong.tobytes())
        if shared:
            with self._cache_lock:
                if key in mesh.cache:
                    return mesh.cache[key]
        space = function_space(mesh, degree)
        matrix = assemble_elasticity(space, material)
        system = apply_dirichlet(
            LinearSystem.unconstrained(matrix), clamped_dofs(space, BOUNDARY_DIRICHLET)
        )
        log_system(f"elasticity_p{degree}", system)
        solver = LinearSolver(system)
        if shared:
            with self._cache_lock:
                mesh.cache.setdefault(key, solver)
                return mesh.cache[key]
        return solver

    def evaluate_sample(self, context: EvaluationContext, s: Sample) -> SampleResult:
        config = self.config
        benchmark = self.benchmark
        mesh = context.mesh
        opt = config.optimization
        shared = benchmark.young_field is None
        material = self.material(context, s)
        forces = {}
        if benchmark.has_body_force:
            forces = {
                "body_force": benchmark.body_force,
                "body_force_gradient": benchmark.body_force_gradient,
                "body_scale": self._body_scale(context),
            }

        load = self.load_vector(context, s, 1)
        primal = self.elasticity_solver(context, material, 1, shared)
        u = DiscreteField(mesh, 1, primal.solve(load))
        self.ledger.record(PRIMAL, primal.dof)

        J = compliance(u, load)
        cost = penalized_cost(J, context.volume_fraction, opt.penalty_weight, opt.target_fraction)

        gradient = shape_gradient(u, material, context.lambda_tilde, context.strong, 1, **forces)
        deformation = deformation_solver(mesh, 1, opt.tau1, opt.tau2)
        theta, dj_value = descent_direction(gradient, deformation)
        self.ledger.record(DEFORMATION, deformation.dof)
        b_value = float(theta.values @ (deformation.matrix @ theta.values))
        descent_gap = abs(dj_value + b_value) / max(abs(dj_value), abs(b_value), np.finfo(float).tiny)

        eta_c = eta_d = None
        if context.estimate:
            load2 = self.load_vector(context, s, 2)
            enriched = self.elasticity_solver(context, material, 2, shared)
            z = DiscreteField(mesh, 2, enriched.solve(load2))
            self.ledger.record(PRIMAL_ENRICHED, enriched.dof)
            eta_c = eta_compliance(
                u,
                z,
                material,
                body_force=forces.get("body_force"),
                traction=benchmark.traction(s),
                neumann_tag=BOUNDARY_NEUMANN,
                body_scale=forces.get("body_scale"),
            )

            gradient2 = shape_gradient(u, material, context.lambda_tilde, context.strong, 2, **forces)
            deformation2 = deformation_solver(mesh, 2, opt.tau1, opt.tau2)
            zeta = DiscreteField(mesh, 2, deformation2.solve(-gradient2.values))
            self.ledger.record(DEFORMATION_ENRICHED, deformation2.dof)
            eta_d = eta_deformation(
                theta,
                zeta,
                u,
                material,
                context.lambda_tilde,
                context.strong,
                opt.tau1,
                opt.tau2,
                **forces,
            )

        logger.debug(
            "Evaluated sample",
            data={
                "sample": s.index,
                "compliance": J,
                "penalized": cost.total,
                "dJ": dj_value,
                "descent_gap": descent_gap,
            },
        )
        return SampleResult(
            index=s.index,
            cost=cost,
            gradient=gradient,
            theta=theta,
            dj_value=dj_value,
            descent_gap=descent_gap,
            eta_c=eta_c,
            eta_d=eta_d,
        )
