"""
Direct sparse solves with a conjugate-gradient fallback.
"""

import threading

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu

from constants.defaults import SOLVER_REL_TOL
from constants.exceptions import Exceptions
from fem.assembly import LinearSystem
from helpers.logger_config import logger


class LinearSolver:
    """
    Factorize a constrained system once and solve for many right-hand sides.

    Samples share the matrix of a given mesh and material, so the pipeline
    reuses a single factorization per system and only swaps the rhs.
    """

    def __init__(self, system: LinearSystem, rel_tol: float = SOLVER_REL_TOL):
        self.system = system
        self.rel_tol = rel_tol
        self.matrix = sp.csc_matrix(system.matrix)
        self._lock = threading.Lock()
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as e:
            logger.warning(
                "Sparse factorization failed, falling back to CG",
                data={"dof": int(self.matrix.shape[0]), "error": str(e)},
            )
            self._lu = None

    @property
    def dof(self) -> int:
        return int(self.matrix.shape[0])

    def _relative_residual(self, x: np.ndarray, b: np.ndarray, b_norm: float) -> float:
        return float(np.linalg.norm(b - self.matrix @ x) / b_norm)

    def solve(self, rhs: np.ndarray | None = None) -> np.ndarray:
        b = self.system.rhs if rhs is None else np.asarray(rhs, dtype=float)
        b = np.where(self.system.constrained, 0.0, b)
        b_norm = np.linalg.norm(b)
        if b_norm == 0.0:
            return np.zeros_like(b)

        x = None
        residual = np.inf
        if self._lu is not None:
            with self._lock:
                x = self._lu.solve(b)
                residual = self._relative_residual(x, b, b_norm)
                if np.isfinite(residual) and residual > self.rel_tol:
                    # one step of iterative refinement
                    x = x + self._lu.solve(b - self.matrix @ x)
                    residual = self._relative_residual(x, b, b_norm)

        if not np.isfinite(residual) or residual > self.rel_tol:
            x0 = x if x is not None and np.all(np.isfinite(x)) else None
            x, info = cg(self.matrix, b, x0=x0, rtol=self.rel_tol, maxiter=20 * self.dof)
            residual = self._relative_residual(x, b, b_norm)
            if info != 0 or not np.isfinite(residual) or residual > self.rel_tol:
                raise Exceptions.solver_exception(residual, f"cg info={info}")
        return x


def solve(system: LinearSystem, rel_tol: float = SOLVER_REL_TOL) -> np.ndarray:
    """Coefficient vector with ||b - A x|| <= rel_tol ||b||."""
    return LinearSolver(system, rel_tol).solve()
