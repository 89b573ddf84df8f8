from typing import Any


class BaseNode:
    """Shared state handling for the nodes of an optimization workflow."""

    def __init__(self, workflow_name: str):
        self.workflow_name = workflow_name

    def end_node(self, state) -> dict[str, Any]:
        # A run stopped from outside the record node keeps an empty reason
        return {"finished": True, "stop_reason": state.get("stop_reason") or ""}

    def is_workflow_finished(self, state) -> bool:
        return bool(state.get("finished", False))
