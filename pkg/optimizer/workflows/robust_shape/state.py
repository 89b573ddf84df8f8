"""
Robust shape optimization workflow state definition.
"""

from typing import Any

import numpy as np

from geometry.level_set import Grid, LevelSet
from geometry.mesh import Mesh
from optimizer.adaptive_control import SamplingDecision
from optimizer.estimators import CombinedEstimate
from optimizer.objective import MonteCarloEstimate
from optimizer.workflows.base_workflow import BaseWorkflowState
from optimizer.workflows.robust_shape.benchmark import CantileverBenchmark, Sample
from optimizer.workflows.robust_shape.tools import SampleResult, SamplePipeline
from schemas.config_schemas import Config
from services.computational_index import SolveLedger
from services.export import RunExporter


class RobustShapeState(BaseWorkflowState):
    """State for the robust shape optimization workflow."""

    config: Config
    benchmark: CantileverBenchmark
    pipeline: SamplePipeline
    ledger: SolveLedger
    exporter: RunExporter

    initial_mesh: Mesh
    grid: Grid
    psi: LevelSet
    psi_prev: LevelSet | None

    samples: list[Sample]
    mesh: Mesh
    strong: np.ndarray
    results: list[SampleResult]
    estimate: CombinedEstimate | None
    eta_c: float | None
    eta_d: float | None
    refinements: int

    n_steps: int
    accepted_streak: int
    retried: bool
    retry: bool
    accepted: bool
    last_update: dict[str, Any] | None
    last_fictitious_time: float
    theta_prev_max: float
    prev_gradients: dict[int, np.ndarray]
    prev_costs: dict[int, float]

    aggregate: MonteCarloEstimate | None
    decision: SamplingDecision | None
    lipschitz: float | None
    alpha: float
    cost_history: list[float]
    timings: dict[str, float]
