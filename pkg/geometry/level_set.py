"""
Level-set representation of the design on the structured grid of the initial mesh.

Values are stored as (n_y + 1, n_x + 1) arrays indexed [j, i], so the
flattened array lines up with the grid vertices j (n_x + 1) + i of a crossed
mesh built on the same grid. Negative values are material, the rest is void.
"""

from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from constants.defaults import VOLUME_SUBSAMPLES
from constants.exceptions import Exceptions, StationaryVelocityError
from fem.spaces import DiscreteField
from geometry.mesh import Mesh
from helpers.logger_config import logger

SEGMENT_NEIGHBOURS = 12


@dataclass(frozen=True)
class Grid:
    n_x: int
    n_y: int
    l_x: float
    l_y: float

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise Exceptions.parameter_exception("grid", (self.n_x, self.n_y), "n_x, n_y >= 1")
        if not (self.l_x > 0 and self.l_y > 0):
            raise Exceptions.parameter_exception("grid", (self.l_x, self.l_y), "positive extents")

    @property
    def dx(self) -> float:
        return self.l_x / self.n_x

    @property
    def dy(self) -> float:
        return self.l_y / self.n_y

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_y + 1, self.n_x + 1

    @property
    def n_nodes(self) -> int:
        return (self.n_x + 1) * (self.n_y + 1)

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(0.0, self.l_x, self.n_x + 1)

    @cached_property
    def ys(self) -> np.ndarray:
        return np.linspace(0.0, self.l_y, self.n_y + 1)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys)

    @classmethod
    def of_mesh(cls, mesh: Mesh, n_x: int, n_y: int) -> "Grid":
        grid = cls(n_x, n_y, mesh.lx, mesh.ly)
        x, y = grid.coordinates()
        nodes = np.column_stack([x.ravel(), y.ravel()])
        if mesh.n_vertices < grid.n_nodes or not np.allclose(
            mesh.vertices[: grid.n_nodes], nodes, atol=1e-12 * max(mesh.lx, mesh.ly)
        ):
            raise Exceptions.mesh_mismatch_exception("level-set grid")
        return grid


@dataclass(frozen=True, eq=False)
class LevelSet:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise Exceptions.parameter_exception(
                "values", f"shape {self.values.shape}", f"shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise Exceptions.numeric_exception("level-set values are not finite")

    def with_values(self, values: np.ndarray) -> "LevelSet":
        return LevelSet(self.grid, values)


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    grid: Grid
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.vx)) and np.all(np.isfinite(self.vy))):
            raise Exceptions.numeric_exception("velocity values are not finite")

    @property
    def max_norm(self) -> float:
        """theta_max: largest Euclidean norm of a nodal velocity."""
        return float(np.sqrt(self.vx**2 + self.vy**2).max())

    @classmethod
    def from_field(cls, theta: DiscreteField, grid: Grid) -> "VelocityGrid":
        """Nodal values of a linear field at the persistent grid vertices."""
        if theta.mesh.n_initial_vertices < grid.n_nodes:
            raise Exceptions.mesh_mismatch_exception("velocity field")
        nodal = theta.nodal[: grid.n_nodes]
        return cls(grid, nodal[:, 0].reshape(grid.shape), nodal[:, 1].reshape(grid.shape))


def init_level_set(grid: Grid, evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> LevelSet:
    x, y = grid.coordinates()
    values = np.broadcast_to(np.asarray(evaluator(x, y), dtype=float), grid.shape).copy()
    return LevelSet(grid, values)


def _one_sided(values: np.ndarray, spacing: float, axis: int) -> tuple[np.ndarray, np.ndarray]:
    diff = np.diff(values, axis=axis) / spacing
    if axis == 1:
        minus = np.concatenate([diff[:, :1], diff], axis=1)
        plus = np.concatenate([diff, diff[:, -1:]], axis=1)
    else:
        minus = np.concatenate([diff[:1], diff], axis=0)
        plus = np.concatenate([diff, diff[-1:]], axis=0)
    return minus, plus


def hj_step(psi: LevelSet, theta: VelocityGrid, dt: float) -> LevelSet:
    """
    One forward Euler step of psi_t + theta . grad psi = 0 with the
    Lax-Friedrichs flux. Boundary nodes reuse the available one-sided
    difference for the missing side.

    Both dissipation terms enter with a minus sign: the y term is
    -|theta_y| (q+ - q-) / 2 like its x counterpart, so a constant velocity
    reduces to the upwind scheme in each direction.
    """
    if dt < 0:
        raise Exceptions.parameter_exception("dt", dt, ">= 0")
    grid = psi.grid
    p_minus, p_plus = _one_sided(psi.values, grid.dx, axis=1)
    q_minus, q_plus = _one_sided(psi.values, grid.dy, axis=0)
    hamiltonian = (
        0.5 * theta.vx * (p_plus + p_minus)
        + 0.5 * theta.vy * (q_plus + q_minus)
        - 0.5 * np.abs(theta.vx) * (p_plus - p_minus)
        - 0.5 * np.abs(theta.vy) * (q_plus - q_minus)
    )
    return psi.with_values(psi.values - dt * hamiltonian)


def cfl_dt(alpha: float, grid: Grid, theta: VelocityGrid) -> float:
    """dt = alpha * min(dx, dy) / theta_max."""
    theta_max = theta.max_norm
    if theta_max == 0.0:
        raise Exceptions.stationary_velocity_exception()
    return alpha * min(grid.dx, grid.dy) / theta_max


def advance(psi: LevelSet, theta: VelocityGrid, alpha: float, n_steps: int) -> tuple[LevelSet, float]:
    """
    n_steps Lax-Friedrichs steps at the CFL time step.

    Returns:
        tuple[LevelSet, float]: The evolved level set and the elapsed
        fictitious time n_steps * dt (zero for a vanishing velocity).
    """
    if n_steps < 1:
        raise Exceptions.parameter_exception("n_steps", n_steps, ">= 1")
    try:
        dt = cfl_dt(alpha, psi.grid, theta)
    except StationaryVelocityError:
        return psi, 0.0
    for _ in range(n_steps):
        psi = hj_step(psi, theta, dt)
    return psi, n_steps * dt


def _crossing(pa, pb, va, vb):
    t = va / (va - vb)
    return pa + t[:, None] * (pb - pa)


def interface_segments(psi: LevelSet) -> np.ndarray:
    """
    Zero contour as straight segments, shape (n, 2, 2).

    Cells are split by marching squares on the sign classes psi < 0 and
    psi >= 0. Saddle cells are resolved by the sign of the cell average.
    """
    grid = psi.grid
    v = psi.values
    x, y = grid.coordinates()
    # corners counterclockwise: (i, j), (i+1, j), (i+1, j+1), (i, j+1)
    corner_values = np.stack([v[:-1, :-1], v[:-1, 1:], v[1:, 1:], v[1:, :-1]], axis=-1)
    corner_points = np.stack(
        [
            np.stack([x[:-1, :-1], y[:-1, :-1]], axis=-1),
            np.stack([x[:-1, 1:], y[:-1, 1:]], axis=-1),
            np.stack([x[1:, 1:], y[1:, 1:]], axis=-1),
            np.stack([x[1:, :-1], y[1:, :-1]], axis=-1),
        ],
        axis=-2,
    )
    inside = corner_values < 0
    n_inside = inside.sum(axis=-1)
    cut = (n_inside > 0) & (n_inside < 4)
    vals = corner_values[cut]
    pts = corner_points[cut]
    neg = inside[cut]
    if len(vals) == 0:
        return np.zeros((0, 2, 2))

    # crossing point on each of the four cell sides (NaN where the side is not cut)
    sides = np.full((len(vals), 4, 2), np.nan)
    for s in range(4):
        a, b = s, (s + 1) % 4
        crossed = neg[:, a] != neg[:, b]
        if np.any(crossed):
            sides[crossed, s] = _crossing(
                pts[crossed, a], pts[crossed, b], vals[crossed, a], vals[crossed, b]
            )

    segments = []
    has = ~np.isnan(sides[:, :, 0])
    n_cut_sides = has.sum(axis=1)

    simple = n_cut_sides == 2
    idx = np.argsort(~has[simple], axis=1, kind="stable")[:, :2]
    rows = np.flatnonzero(simple)
    segments.append(np.stack([sides[rows, idx[:, 0]], sides[rows, idx[:, 1]]], axis=1))

    for r in np.flatnonzero(n_cut_sides == 4):
        centre_negative = vals[r].mean() < 0
        # join the sides around the corners whose class differs from the centre
        if neg[r, 0] != centre_negative:
            pairs = ((3, 0), (1, 2))
        else:
            pairs = ((0, 1), (2, 3))
        segments.extend(np.stack([sides[r, a], sides[r, b]])[None] for a, b in pairs)

    return np.concatenate(segments, axis=0)


def _point_segment_distance(points: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    d = ends - starts
    length2 = np.einsum("...d,...d->...", d, d)
    t = np.einsum("...d,...d->...", points - starts, d) / np.where(length2 > 0, length2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = starts + t[..., None] * d
    return np.linalg.norm(points - closest, axis=-1)


def reinitialize(psi: LevelSet) -> tuple[LevelSet, bool]:
    """
    Replace psi by the signed distance to its zero contour, keeping every sign.

    Returns:
        tuple[LevelSet, bool]: The new level set and whether an interface was
        found. Without an interface the input is returned unchanged.
    """
    segments = interface_segments(psi)
    if len(segments) == 0:
        logger.warning("Level set has a single sign, reinitialization skipped")
        return psi, False

    x, y = psi.grid.coordinates()
    nodes = np.column_stack([x.ravel(), y.ravel()])
    k = min(SEGMENT_NEIGHBOURS, len(segments))
    _, nearest = cKDTree(segments.mean(axis=1)).query(nodes, k=k)
    nearest = nearest.reshape(len(nodes), k)
    distance = _point_segment_distance(
        nodes[:, None, :], segments[nearest, 0], segments[nearest, 1]
    ).min(axis=1)

    old = psi.values.ravel()
    tiny = np.finfo(float).tiny
    new = np.where(old < 0, -np.maximum(distance, tiny), np.maximum(distance, tiny))
    new = np.where(old == 0, 0.0, new)
    return psi.with_values(new.reshape(psi.grid.shape)), True


def interpolator(psi: LevelSet) -> RegularGridInterpolator:
    return RegularGridInterpolator(
        (psi.grid.ys, psi.grid.xs), psi.values, method="linear", bounds_error=False, fill_value=None
    )


def material_indicator(psi: LevelSet, mesh: Mesh) -> np.ndarray:
    """Strong-phase flag per triangle: bilinear psi at the centroid is negative."""
    if abs(mesh.lx - psi.grid.l_x) > 1e-12 or abs(mesh.ly - psi.grid.l_y) > 1e-12:
        raise Exceptions.mesh_mismatch_exception("level set")
    centroids = mesh.centroids
    return interpolator(psi)(centroids[:, ::-1]) < 0


def volume_fraction(psi: LevelSet, subsamples: int = VOLUME_SUBSAMPLES) -> float:
    """|W| / |D| from subsamples x subsamples bilinear samples per cell."""
    v = psi.values
    s = (np.arange(subsamples) + 0.5) / subsamples
    a, b = np.meshgrid(s, s)
    a, b = a.ravel(), b.ravel()
    samples = (
        ((1 - a) * (1 - b))[:, None, None] * v[None, :-1, :-1]
        + (a * (1 - b))[:, None, None] * v[None, :-1, 1:]
        + ((1 - a) * b)[:, None, None] * v[None, 1:, :-1]
        + (a * b)[:, None, None] * v[None, 1:, 1:]
    )
    return float(np.mean(samples < 0))
