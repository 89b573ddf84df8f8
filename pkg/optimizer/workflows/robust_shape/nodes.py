"""
Robust shape optimization nodes: evaluation with mesh adaptation, update
acceptance, sample aggregation, bookkeeping and the level-set update.
"""

import math
from typing import Any

import numpy as np

from constants.exceptions import DegenerateGradientError
from fem.spaces import DiscreteField
from geometry.level_set import (
    VelocityGrid,
    advance,
    material_indicator,
    reinitialize,
    volume_fraction,
)
from geometry.mesh import mark_dorfler, min_element_size, refine, reset
from helpers.index import stopwatch
from helpers.logger_config import get_progress_logger, logger
from optimizer.adaptive_control import (
    SamplingDecision,
    estimate_lipschitz,
    sampling_test,
    step_length,
    stopping_check,
)
from optimizer.estimators import combine, per_sample_indicator_mean
from optimizer.objective import mc_aggregate, sample_std, volume_multiplier
from optimizer.workflows.base_node import BaseNode
from optimizer.workflows.robust_shape.benchmark import CantileverBenchmark
from optimizer.workflows.robust_shape.tools import EvaluationContext, SamplePipeline
from services.computational_index import SolveLedger
from services.export import RunExporter

FINAL_SNAPSHOT = "final_design"


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def _mean_theta(results) -> DiscreteField:
    first = results[0].theta
    values = np.mean(np.stack([r.theta.values for r in results]), axis=0)
    return DiscreteField(first.mesh, first.degree, values)


class RobustShapeNodes(BaseNode):
    """Nodes of one optimization iteration, driven by RobustShapeWorkflow."""

    def setup_node(self, state) -> dict[str, Any]:
        """Benchmark, initial mesh and level set, first sample set and run artifacts."""
        config = state["config"]
        opt = config.optimization
        benchmark = CantileverBenchmark(config)
        ledger = SolveLedger()
        exporter = RunExporter(config.output.directory)
        exporter.write_config(config.model_dump_json(indent=2))
        exporter.write_kl_modes(benchmark.angle_field.modes_table())

        initial_mesh = benchmark.initial_mesh()
        grid = benchmark.grid(initial_mesh)
        psi = benchmark.initial_level_set(grid)
        size = opt.initial_sample_size if config.adaptive_sampling else opt.full_sample_size
        samples = benchmark.samples(size)

        logger.info(
            "Optimization set up",
            data={
                "mode": config.mode,
                "scale": config.scale,
                "seed": config.seed,
                "dof": initial_mesh.vector_dof,
                "kl_modes": benchmark.angle_field.n_modes,
                "sample_size": size,
                "output": str(exporter.directory),
            },
        )
        return {
            "benchmark": benchmark,
            "pipeline": SamplePipeline(benchmark, config, ledger),
            "ledger": ledger,
            "exporter": exporter,
            "initial_mesh": initial_mesh,
            "grid": grid,
            "psi": psi,
            "psi_prev": None,
            "samples": samples,
            "n_steps": opt.initial_steps,
            "accepted_streak": 0,
            "retried": False,
            "accepted": True,
            "retry": False,
            "last_update": None,
            "last_fictitious_time": 0.0,
            "theta_prev_max": 0.0,
            "prev_gradients": {},
            "prev_costs": {},
            "lipschitz": None,
            "alpha": opt.alpha_initial,
            "cost_history": [],
            "timings": {},
        }

    def evaluate_node(self, state) -> dict[str, Any]:
        """
        Solve every sample on the reset mesh, then refine and re-solve while
        the relative error estimate exceeds the tolerance.
        """
        config = state["config"]
        adaptivity = config.adaptivity
        opt = config.optimization
        pipeline: SamplePipeline = state["pipeline"]
        psi = state["psi"]
        samples = state["samples"]

        with stopwatch(state["timings"], "evaluate"):
            mesh = reset(state["initial_mesh"])
            vf = volume_fraction(psi)
            lambda_tilde = volume_multiplier(
                opt.penalty_weight, mesh.domain_area, opt.target_fraction, vf
            )
            estimate_errors = config.adaptive_mesh or adaptivity.estimate_on_fixed_mesh
            passes = 0
            estimate = None
            eta_c = eta_d = None

            while True:
                strong = material_indicator(psi, mesh)
                context = EvaluationContext(mesh, strong, vf, lambda_tilde, estimate_errors)
                results = pipeline.evaluate(context, samples)
                if not estimate_errors:
                    break

                eta_c = per_sample_indicator_mean([r.eta_c for r in results])
                eta_d = per_sample_indicator_mean([r.eta_d for r in results])
                qc_value = _mean(r.cost.compliance for r in results)
                qd_value = _mean(r.dj_value for r in results)
                estimate = combine(eta_c.total, qc_value, eta_d.total, qd_value)
                logger.debug(
                    "Error estimate",
                    data={"pass": passes, "dof": mesh.vector_dof, "q": estimate.total},
                )

                if not config.adaptive_mesh or estimate.total <= adaptivity.tolerance:
                    break
                if min_element_size(mesh) <= adaptivity.reference_mesh_size:
                    break
                if passes >= adaptivity.max_refinement_passes or mesh.vector_dof >= adaptivity.max_dof:
                    logger.warning(
                        "Refinement cap reached with the estimate above tolerance",
                        data={"passes": passes, "dof": mesh.vector_dof, "q": estimate.total},
                    )
                    break

                weights = [abs(qc_value) or 1.0, abs(qd_value) or 1.0]
                indicators = eta_c.values / weights[0] + eta_d.values / weights[1]
                marked = mark_dorfler(indicators, adaptivity.theta_mark)
                if marked.size == 0:
                    break
                mesh = refine(mesh, marked)
                passes += 1

        return {
            "mesh": mesh,
            "strong": strong,
            "results": results,
            "estimate": estimate,
            "eta_c": None if eta_c is None else eta_c.total,
            "eta_d": None if eta_d is None else eta_d.total,
            "refinements": passes,
        }

    def acceptance_node(self, state) -> dict[str, Any]:
        """
        Compare the sampled penalized cost with the previous iteration on the
        shared samples. An increase reverts the last update and re-evolves it
        once with half the fictitious steps.
        """
        opt = state["config"].optimization
        costs = {r.index: r.cost.total for r in state["results"]}
        previous = state["prev_costs"]
        common = sorted(costs.keys() & previous.keys())
        update = state["last_update"]

        if common and update is not None and not state["retried"]:
            now = _mean(costs[i] for i in common)
            before = _mean(previous[i] for i in common)
            if now > before:
                n_steps = max(1, update["n_steps"] // 2)
                psi, elapsed = advance(state["psi_prev"], update["velocity"], update["alpha"], n_steps)
                logger.warning(
                    "Penalized cost increased, retrying the update",
                    data={"before": before, "after": now, "n_steps": n_steps},
                )
                return {
                    "psi": psi,
                    "n_steps": n_steps,
                    "retried": True,
                    "retry": True,
                    "accepted_streak": 0,
                    "last_fictitious_time": elapsed,
                    "last_update": {**update, "n_steps": n_steps},
                }

        accepted = not state["retried"]
        streak = state["accepted_streak"] + 1 if accepted else 0
        n_steps = state["n_steps"]
        if streak >= opt.step_increase_after:
            n_steps = min(n_steps + 1, opt.max_steps)
            streak = 0
        return {"accepted": accepted, "accepted_streak": streak, "n_steps": n_steps, "retry": False}

    def aggregate_node(self, state) -> dict[str, Any]:
        """Monte Carlo means, sampling test, Lipschitz estimate and step length."""
        config = state["config"]
        opt = config.optimization
        results = state["results"]

        with stopwatch(state["timings"], "aggregate"):
            restrictions = [r.gradient.restriction() for r in results]
            aggregate = mc_aggregate([r.cost.total for r in results], restrictions)
            try:
                decision = sampling_test(restrictions, opt.nu_it, opt.nu_ot, opt.max_sample_size)
            except DegenerateGradientError:
                decision = SamplingDecision(0.0, 0.0, True, len(restrictions), degenerate=True)

            lipschitz = state["lipschitz"]
            if state["iteration"] > 1:
                vf = results[0].cost.volume_fraction
                lipschitz = estimate_lipschitz(
                    {r.index: g for r, g in zip(results, restrictions)},
                    state["prev_gradients"],
                    state["theta_prev_max"],
                    state["last_fictitious_time"],
                    vf * state["mesh"].domain_area,
                    previous_estimate=lipschitz,
                )
            alpha = step_length(lipschitz, opt.nu_it, opt.nu_ot, opt.alpha_min, opt.alpha_initial)

        return {
            "aggregate": aggregate,
            "decision": decision,
            "lipschitz": lipschitz,
            "alpha": alpha,
        }

    def record_node(self, state) -> dict[str, Any]:
        """History row, stopping decision and snapshots."""
        config = state["config"]
        opt = config.optimization
        k = state["iteration"]
        results = state["results"]
        aggregate = state["aggregate"]
        decision = state["decision"]
        estimate = state["estimate"]
        exporter: RunExporter = state["exporter"]
        ledger: SolveLedger = state["ledger"]
        vf = results[0].cost.volume_fraction

        cost_history = state["cost_history"] + [aggregate.mean_cost]
        stop = stopping_check(
            cost_history,
            vf,
            opt.target_fraction,
            k,
            opt.max_iters,
            combinator=opt.stop_combinator,
            window=opt.stagnation_window,
            tolerance=opt.stagnation_tolerance,
            volume_tolerance=opt.volume_tolerance,
        )

        row = {
            "iteration": k,
            "sample_size": len(results),
            "dof": state["mesh"].vector_dof,
            "j_mean": _mean(r.cost.compliance for r in results),
            "j_std": sample_std([r.cost.compliance for r in results]),
            "jp_mean": aggregate.mean_cost,
            "vol_frac": vf,
            "eta_c": state["eta_c"],
            "eta_d": state["eta_d"],
            "q": None if estimate is None else estimate.total,
            "rho_it": decision.rho_it,
            "rho_ot": decision.rho_ot,
            "sampling_pass": decision.passed,
            "lipschitz": state["lipschitz"],
            "alpha": state["alpha"],
            "dj_mean_norm": float(np.linalg.norm(aggregate.mean_gradient)),
            "dj_variance": aggregate.gradient_variance,
            "n_steps": state["n_steps"],
            "refinements": state["refinements"],
            "accepted": state["accepted"],
            "ci_increment": ledger.increment(),
            "ci_total": ledger.total,
            "stop_reason": stop.reason,
        }
        exporter.append_history(row)

        if config.output.write_vtk:
            design = (state["mesh"], state["strong"], state["psi"])
            point_data = {"theta": _mean_theta(results).nodal}
            every = config.output.snapshot_every
            if every and k % every == 0:
                exporter.write_snapshot(f"snapshot_{k:04d}", *design, point_data=point_data)
            if stop.stop:
                exporter.write_snapshot(FINAL_SNAPSHOT, *design, point_data=point_data)

        get_progress_logger(run_id=state["run_id"], mode=config.mode).info("iteration_completed", **row)
        if stop.stop:
            logger.info("Optimization stopped", data={"iteration": k, "reason": stop.reason})

        return {
            "history": state["history"] + [row],
            "cost_history": cost_history,
            "finished": stop.stop,
            "stop_reason": stop.reason,
        }

    def update_node(self, state) -> dict[str, Any]:
        """Evolve the level set with the mean descent direction and grow the sample set."""
        config = state["config"]
        opt = config.optimization
        k = state["iteration"]
        results = state["results"]
        benchmark: CantileverBenchmark = state["benchmark"]

        with stopwatch(state["timings"], "update"):
            velocity = VelocityGrid.from_field(_mean_theta(results), state["grid"])
            alpha, n_steps = state["alpha"], state["n_steps"]
            psi_prev = state["psi"]
            psi, elapsed = advance(psi_prev, velocity, alpha, n_steps)
            if opt.reinit_every and k % opt.reinit_every == 0:
                psi, _ = reinitialize(psi)

            samples = state["samples"]
            decision = state["decision"]
            if config.adaptive_sampling and not decision.passed and decision.next_size > len(samples):
                fresh = benchmark.samples(decision.next_size - len(samples), start=len(samples))
                logger.info(
                    "Sample size increased",
                    data={"from": len(samples), "to": decision.next_size, "rho": decision.rho},
                )
                samples = samples + fresh

        return {
            "psi": psi,
            "psi_prev": psi_prev,
            "samples": samples,
            "last_update": {"velocity": velocity, "alpha": alpha, "n_steps": n_steps},
            "last_fictitious_time": elapsed,
            "theta_prev_max": velocity.max_norm,
            "prev_gradients": {r.index: r.gradient.restriction() for r in results},
            "prev_costs": {r.index: r.cost.total for r in results},
            "retried": False,
        }
