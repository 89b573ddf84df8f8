from abc import ABC, abstractmethod
from typing import Any, TypedDict

from helpers.index import new_run_id
from helpers.logger_config import bind_run_context, clear_run_context


class BaseWorkflowState(TypedDict):
    run_id: str
    iteration: int
    finished: bool
    stop_reason: str
    history: list[dict[str, Any]]


class WorkflowInterface(ABC):
    """An interface for workflows to standardize structure and behavior."""

    @abstractmethod
    def __init__(self, workflow_name: str):
        self.workflow_name = workflow_name

    @abstractmethod
    def _run(self, state: dict) -> dict:
        """Drive the workflow from its initial state to a finished state."""

    def start(self, **kwargs) -> dict:
        """Start the workflow under a fresh run id and return the final state."""
        run_id = new_run_id()
        bind_run_context(run_id=run_id, mode=self.workflow_name, iteration=None)
        try:
            initial_state = {
                "run_id": run_id,
                "iteration": 0,
                "finished": False,
                "stop_reason": "",
                "history": [],
            }
            initial_state.update(kwargs)
            return self._run(initial_state)
        finally:
            clear_run_context()
