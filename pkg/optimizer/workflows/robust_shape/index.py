"""
Robust shape optimization workflow: the adaptive outer loop over iterations.
"""

from helpers.index import stopwatch
from helpers.logger_config import bind_run_context, logger
from optimizer.workflows.base_workflow import WorkflowInterface
from optimizer.workflows.robust_shape.nodes import RobustShapeNodes
from optimizer.workflows.robust_shape.state import RobustShapeState
from schemas.config_schemas import Config


class RobustShapeWorkflow(WorkflowInterface):
    """One optimization run in a given experiment mode."""

    def __init__(self, workflow_name: str):
        self.workflow_name = workflow_name
        self.nodes = RobustShapeNodes(workflow_name=workflow_name)

    def run(self, config: Config) -> RobustShapeState:
        return self.start(config=config)

    def _run(self, state: dict) -> RobustShapeState:
        nodes = self.nodes
        state.update(nodes.setup_node(state))

        while not nodes.is_workflow_finished(state):
            state["iteration"] += 1
            state["timings"] = {}
            bind_run_context(iteration=state["iteration"])

            with stopwatch(state["timings"], "total"):
                state.update(nodes.evaluate_node(state))
                state.update(nodes.acceptance_node(state))
                if state["retry"]:
                    state.update(nodes.evaluate_node(state))
                    state.update(nodes.acceptance_node(state))
                state.update(nodes.aggregate_node(state))
                state.update(nodes.record_node(state))
                if not state["finished"]:
                    state.update(nodes.update_node(state))

            state["exporter"].append_timings({"iteration": state["iteration"], **state["timings"]})

        state.update(nodes.end_node(state))
        logger.info(
            "Run finished",
            data={
                "iterations": state["iteration"],
                "stop_reason": state["stop_reason"],
                "ci_total": state["ledger"].total,
            },
        )
        return state
