from constants.exceptions import Exceptions
from constants.modes import MODE_MAP
from optimizer.workflows.base_workflow import WorkflowInterface
from optimizer.workflows.robust_shape.index import RobustShapeWorkflow
from schemas.config_schemas import Config


class WorkflowOrchestrator:
    def __init__(self):
        self.workflows: dict[str, WorkflowInterface] = {
            mode: RobustShapeWorkflow(workflow_name=mode) for mode in MODE_MAP
        }

    def start(self, config: Config):
        """Runs the workflow of the configured mode, else raises an Exception."""
        if config.mode not in self.workflows:
            raise Exceptions.not_found_exception(f"Mode '{config.mode}'")
        return self.workflows[config.mode].run(config)
