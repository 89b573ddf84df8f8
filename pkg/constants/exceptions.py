from helpers.logger_config import logger


class ShapeOptimizationError(Exception):
    """Base class for every error raised by the optimizer."""

    def __init__(self, message: str, description: str = "", can_retry: bool = False):
        super().__init__(message)
        self.message = message
        self.description = description or message
        self.can_retry = can_retry

    def detail(self) -> dict:
        return {
            "message": self.message,
            "description": self.description,
            "canRetry": self.can_retry,
        }


class ParameterError(ShapeOptimizationError):
    pass


class ConfigurationError(ShapeOptimizationError):
    pass


class AssemblyError(ShapeOptimizationError):
    pass


class SolverError(ShapeOptimizationError):
    def __init__(self, message: str, residual: float, **kwargs):
        super().__init__(message, **kwargs)
        self.residual = residual


class NumericError(ShapeOptimizationError):
    pass


class MeshMismatchError(ShapeOptimizationError):
    pass


class DegenerateGradientError(ShapeOptimizationError):
    pass


class StationaryVelocityError(ShapeOptimizationError):
    pass


class ExportError(ShapeOptimizationError):
    def __init__(self, message: str, path: str, **kwargs):
        super().__init__(message, **kwargs)
        self.path = path


class Exceptions:
    @staticmethod
    def parameter_exception(name: str, value, expectation: str):
        description = f"{name}={value!r} is invalid: expected {expectation}"
        logger.error(f"parameter error: {description}")
        return ParameterError("Invalid parameter", description)

    @staticmethod
    def configuration_exception(description: str):
        logger.error(f"configuration error: {description}")
        return ConfigurationError("Invalid configuration", description)

    @staticmethod
    def assembly_exception(triangle: int, reason: str):
        description = f"triangle {triangle}: {reason}"
        logger.error(f"assembly error: {description}")
        return AssemblyError("Finite element assembly failed", description)

    @staticmethod
    def solver_exception(residual: float, reason: str = ""):
        description = f"relative residual {residual:.3e}"
        if reason:
            description += f" ({reason})"
        logger.error(f"solver error: {description}")
        return SolverError(
            "Linear solve did not converge", residual=residual, description=description
        )

    @staticmethod
    def numeric_exception(description: str):
        logger.error(f"numeric error: {description}")
        return NumericError("Numerical procedure failed", description)

    @staticmethod
    def mesh_mismatch_exception(resource: str):
        logger.error(f"{resource} defined on a different mesh")
        return MeshMismatchError(
            "Mesh mismatch", f"{resource} defined on a different mesh"
        )

    @staticmethod
    def degenerate_gradient_exception():
        logger.warning("mean shape gradient vanished")
        return DegenerateGradientError(
            "Degenerate gradient", "mean shape gradient has zero norm", can_retry=True
        )

    @staticmethod
    def stationary_velocity_exception():
        logger.warning("velocity field vanished, level set left unchanged")
        return StationaryVelocityError(
            "Stationary velocity", "max norm of the velocity is zero", can_retry=True
        )

    @staticmethod
    def export_exception(path: str, e: Exception = None):
        logger.error(f"Error writing {path}: {str(e)}")
        return ExportError("Could not write artifact", path=path, description=str(e))

    @staticmethod
    def not_found_exception(resource: str):
        logger.error(f"{resource} not found")
        return ConfigurationError("Unknown resource", f"{resource} not found")
