import math
import threading
from collections.abc import Iterable
from dataclasses import dataclass

# Sparse direct solves in 2D cost about d^(3/2) for d unknowns
SOLVE_COST_EXPONENT = 1.5

PRIMAL = "primal"
PRIMAL_ENRICHED = "primal_enriched"
DEFORMATION = "deformation"
DEFORMATION_ENRICHED = "deformation_enriched"


@dataclass(frozen=True)
class SolveEvent:
    kind: str
    samples: int
    dof: int

    @property
    def cost(self) -> float:
        return self.samples * float(self.dof) ** SOLVE_COST_EXPONENT


def compute_ci(events: Iterable[SolveEvent | tuple[int, int]]) -> float:
    """
    Computational index sum N * d^(3/2) over solve events (N samples of size d).

    The sum is exactly rounded, so it does not depend on the event order.
    """
    costs = []
    for event in events:
        if not isinstance(event, SolveEvent):
            samples, dof = event
            event = SolveEvent(kind=PRIMAL, samples=samples, dof=dof)
        costs.append(event.cost)
    return math.fsum(costs)


class SolveLedger:
    """Thread-safe record of every linear solve of a run."""

    def __init__(self):
        self._events: list[SolveEvent] = []
        self._lock = threading.Lock()
        self._mark = 0

    def record(self, kind: str, dof: int, samples: int = 1):
        with self._lock:
            self._events.append(SolveEvent(kind=kind, samples=samples, dof=int(dof)))

    @property
    def events(self) -> list[SolveEvent]:
        with self._lock:
            return list(self._events)

    @property
    def total(self) -> float:
        return compute_ci(self.events)

    def increment(self) -> float:
        """CI accumulated since the previous call."""
        with self._lock:
            fresh = self._events[self._mark :]
            self._mark = len(self._events)
        return compute_ci(fresh)

    def counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for event in self.events:
            counts[event.kind] = counts.get(event.kind, 0) + event.samples
        return counts
