"""
Cantilever benchmark: clamped top of the left edge, random-angle load at the
bottom right corner (or a uniform traction on a right-edge segment).
"""

import math
from dataclasses import dataclass

import numpy as np

from constants.defaults import initial_level_set, lame_parameters
from constants.modes import TRACTION_LOAD
from geometry.level_set import Grid, LevelSet, init_level_set
from geometry.mesh import BOUNDARY_DIRICHLET, BOUNDARY_FREE, BOUNDARY_NEUMANN, Mesh, build_crossed
from random_field.karhunen_loeve import KLField, SampleVector, build_kl_field, sample
from schemas.config_schemas import Config

ANGLE_STREAM = 0
YOUNG_STREAM = 1


@dataclass(frozen=True)
class Sample:
    index: int
    angle: SampleVector
    young: SampleVector | None = None


class CantileverBenchmark:
    def __init__(self, config: Config):
        self.config = config
        self.mu, self.lam = lame_parameters(config.material.young, config.material.poisson)
        domain = config.domain
        rf = config.random_field
        extents = (domain.lx, domain.ly)
        self.angle_field: KLField = build_kl_field(
            mean=math.radians(config.load.angle_mean_deg),
            std=math.radians(config.load.angle_std_deg),
            correlation_lengths=rf.correlation_lengths,
            extents=extents,
            energy_target=rf.energy_target,
            max_modes=rf.max_modes,
        )
        self.young_field: KLField | None = None
        if rf.young_std > 0:
            self.young_field = build_kl_field(
                mean=0.0,
                std=rf.young_std,
                correlation_lengths=rf.correlation_lengths,
                extents=extents,
                energy_target=rf.energy_target,
                max_modes=rf.max_modes,
            )
        self.body_force_value = np.asarray(config.load.body_force, dtype=float)

    # geometry

    def tagger(self, midpoints: np.ndarray) -> np.ndarray:
        domain = self.config.domain
        load = self.config.load
        tol = 1e-9 * max(domain.lx, domain.ly)
        x, y = midpoints[:, 0], midpoints[:, 1]
        tags = np.full(len(midpoints), BOUNDARY_FREE, dtype=np.int8)
        tags[(np.abs(x) <= tol) & (y >= domain.dirichlet_y_min - tol)] = BOUNDARY_DIRICHLET
        if load.kind == TRACTION_LOAD:
            lo, hi = load.traction_y_range
            on_segment = (np.abs(x - domain.lx) <= tol) & (y >= lo - tol) & (y <= hi + tol)
            tags[on_segment] = BOUNDARY_NEUMANN
        return tags

    def initial_mesh(self) -> Mesh:
        domain = self.config.domain
        return build_crossed(domain.nx, domain.ny, domain.lx, domain.ly, self.tagger)

    def grid(self, mesh: Mesh) -> Grid:
        return Grid.of_mesh(mesh, self.config.domain.nx, self.config.domain.ny)

    def initial_level_set(self, grid: Grid) -> LevelSet:
        return init_level_set(grid, initial_level_set)

    # randomness

    def samples(self, count: int, start: int = 0) -> list[Sample]:
        seed = self.config.seed
        angles = sample(seed, self.angle_field.n_modes, count, start, stream=ANGLE_STREAM)
        youngs = [None] * count
        if self.young_field is not None:
            youngs = sample(seed, self.young_field.n_modes, count, start, stream=YOUNG_STREAM)
        return [Sample(a.index, a, y) for a, y in zip(angles, youngs)]

    def load_angle(self, s: Sample) -> float:
        point = np.asarray([self.config.load.point])
        return float(self.angle_field.realize(s.angle.xi, point)[0])

    def load_force(self, s: Sample) -> np.ndarray:
        """g = magnitude (cos phi, sin phi)."""
        phi = self.load_angle(s)
        return self.config.load.magnitude * np.array([math.cos(phi), math.sin(phi)])

    def point_loads(self, s: Sample) -> list[tuple[tuple[float, float], np.ndarray]]:
        if self.config.load.kind == TRACTION_LOAD:
            return []
        return [(self.config.load.point, self.load_force(s))]

    def traction(self, s: Sample):
        if self.config.load.kind != TRACTION_LOAD:
            return None
        force = self.load_force(s)
        return lambda points: np.tile(force, (len(points), 1))

    def stiffness_scale(self, s: Sample, mesh: Mesh) -> np.ndarray | None:
        """E(x) / E0 = exp(kappa_E * KL(x)) at the centroids, or None for a fixed material."""
        if self.young_field is None or s.young is None:
            return None
        return np.exp(self.young_field.realize(s.young.xi, mesh.centroids))

    # f is constant, so its gradient vanishes

    @property
    def has_body_force(self) -> bool:
        return bool(np.any(self.body_force_value != 0.0))

    def body_force(self, points: np.ndarray) -> np.ndarray:
        return np.tile(self.body_force_value, (len(points), 1))

    def body_force_gradient(self, points: np.ndarray) -> np.ndarray:
        return np.zeros((len(points), 2, 2))
