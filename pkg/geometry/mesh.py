"""
Conforming triangulations of the rectangular working domain.

Triangles are stored as vertex triples (a, b, c) in counterclockwise order,
where c is the newest vertex and (a, b) the refinement edge. Refinement only
appends vertices, so the first `n_initial_vertices` entries are the vertices
of the initial mesh in every descendant.
"""

from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from constants.exceptions import Exceptions
from helpers.logger_config import logger

BOUNDARY_FREE = 0
BOUNDARY_DIRICHLET = 1
BOUNDARY_NEUMANN = 2
INTERIOR_EDGE = -1

BoundaryTagger = Callable[[np.ndarray], np.ndarray]


def free_boundary(midpoints: np.ndarray) -> np.ndarray:
    return np.full(len(midpoints), BOUNDARY_FREE, dtype=np.int8)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    level: np.ndarray
    parent: np.ndarray
    lx: float
    ly: float
    n_initial_vertices: int
    tagger: BoundaryTagger = field(default=free_boundary, repr=False)
    cache: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def vector_dof(self) -> int:
        return 2 * self.n_vertices

    @property
    def domain_area(self) -> float:
        return self.lx * self.ly

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def element_sizes(self) -> np.ndarray:
        """Local mesh size h_K = |K|^(1/2)."""
        return np.sqrt(self.areas)

    @cached_property
    def _edge_structure(self):
        t = self.triangles
        nt = len(t)
        # local edge k is opposite local vertex k
        local = np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]])
        edges, inverse = np.unique(np.sort(local, axis=1), axis=0, return_inverse=True)
        tri_edges = inverse.reshape(-1).reshape(3, nt).T.copy()

        flat_edges = tri_edges.ravel()
        flat_tri = np.repeat(np.arange(nt), 3)
        flat_local = np.tile(np.arange(3), nt)
        _, first = np.unique(flat_edges, return_index=True)
        second = np.ones(len(flat_edges), dtype=bool)
        second[first] = False

        edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_local = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_triangles[flat_edges[first], 0] = flat_tri[first]
        edge_local[flat_edges[first], 0] = flat_local[first]
        edge_triangles[flat_edges[second], 1] = flat_tri[second]
        edge_local[flat_edges[second], 1] = flat_local[second]
        return edges, tri_edges, edge_triangles, edge_local

    @property
    def edges(self) -> np.ndarray:
        return self._edge_structure[0]

    @property
    def tri_edges(self) -> np.ndarray:
        return self._edge_structure[1]

    @property
    def edge_triangles(self) -> np.ndarray:
        return self._edge_structure[2]

    @property
    def edge_local_index(self) -> np.ndarray:
        return self._edge_structure[3]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)

    @cached_property
    def boundary_tags(self) -> np.ndarray:
        """Tag per edge; INTERIOR_EDGE for edges shared by two triangles."""
        tags = np.full(len(self.edges), INTERIOR_EDGE, dtype=np.int8)
        on_boundary = self.edge_triangles[:, 1] < 0
        tags[on_boundary] = np.asarray(
            self.tagger(self.edge_midpoints[on_boundary]), dtype=np.int8
        )
        return tags

    def boundary_edges(self, tag: int | None = None) -> np.ndarray:
        tags = self.boundary_tags
        if tag is None:
            return np.flatnonzero(tags != INTERIOR_EDGE)
        return np.flatnonzero(tags == tag)

    def boundary_vertices(self, tag: int) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edges(tag)])

    def copy(self) -> "Mesh":
        return Mesh(
            vertices=self.vertices.copy(),
            triangles=self.triangles.copy(),
            level=self.level.copy(),
            parent=self.parent.copy(),
            lx=self.lx,
            ly=self.ly,
            n_initial_vertices=self.n_initial_vertices,
            tagger=self.tagger,
        )


def build_crossed(
    n_x: int, n_y: int, l_x: float, l_y: float, tagger: BoundaryTagger = free_boundary
) -> Mesh:
    """
    Crossed triangulation: every grid cell gets a center vertex and four triangles.

    Args:
        n_x (int): Cells along x.
        n_y (int): Cells along y.
        l_x (float): Domain length along x.
        l_y (float): Domain length along y.
        tagger (BoundaryTagger): Maps boundary-edge midpoints to boundary tags.

    Returns:
        Mesh: (n_x+1)(n_y+1) + n_x n_y vertices and 4 n_x n_y triangles. Grid
        vertex (i, j) has index j (n_x+1) + i; cell centers follow.
    """
    if int(n_x) != n_x or n_x < 1:
        raise Exceptions.parameter_exception("n_x", n_x, "an integer >= 1")
    if int(n_y) != n_y or n_y < 1:
        raise Exceptions.parameter_exception("n_y", n_y, "an integer >= 1")
    if not l_x > 0:
        raise Exceptions.parameter_exception("l_x", l_x, "a positive length")
    if not l_y > 0:
        raise Exceptions.parameter_exception("l_y", l_y, "a positive length")
    n_x, n_y = int(n_x), int(n_y)

    xs = np.linspace(0.0, l_x, n_x + 1)
    ys = np.linspace(0.0, l_y, n_y + 1)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cx, cy = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]))
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    vertices = np.vstack([grid, centers])

    jj, ii = np.meshgrid(np.arange(n_y), np.arange(n_x), indexing="ij")
    v00 = (jj * (n_x + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + n_x + 1
    v11 = v01 + 1
    c = len(grid) + (jj * n_x + ii).ravel()
    # newest vertex is the center, so every refinement edge is a cell side
    triangles = np.stack(
        [
            np.column_stack([v00, v10, c]),
            np.column_stack([v10, v11, c]),
            np.column_stack([v11, v01, c]),
            np.column_stack([v01, v00, c]),
        ],
        axis=1,
    ).reshape(-1, 3)

    nt = len(triangles)
    return Mesh(
        vertices=vertices,
        triangles=triangles.astype(np.int64),
        level=np.zeros(nt, dtype=np.int64),
        parent=np.arange(nt, dtype=np.int64),
        lx=float(l_x),
        ly=float(l_y),
        n_initial_vertices=len(vertices),
        tagger=tagger,
    )


def mark_dorfler(indicators, theta_mark: float) -> np.ndarray:
    """
    Bulk marking: the smallest set of triangles carrying theta_mark of the total.

    Indicators are visited in descending order, ties broken by ascending index.
    Returns an empty index array when every indicator is zero.
    """
    eta = np.asarray(indicators, dtype=float).ravel()
    if not np.all(np.isfinite(eta)) or np.any(eta < 0):
        raise Exceptions.parameter_exception(
            "indicators", "...", "finite nonnegative values"
        )
    if not 0.0 < theta_mark <= 1.0:
        raise Exceptions.parameter_exception("theta_mark", theta_mark, "in (0, 1]")
    if eta.size == 0:
        return np.zeros(0, dtype=np.int64)

    order = np.lexsort((np.arange(eta.size), -eta))
    cumulative = np.cumsum(eta[order])
    total = cumulative[-1]
    if total <= 0.0:
        return np.zeros(0, dtype=np.int64)
    threshold = theta_mark * total * (1.0 - 1e-13)
    count = int(np.searchsorted(cumulative, threshold, side="left")) + 1
    return order[: min(count, eta.size)].astype(np.int64)


def refine(mesh: Mesh, marked) -> Mesh:
    """
    Newest-vertex bisection of the marked triangles with conformity closure.

    The refinement edges of marked triangles are marked, and any triangle
    holding a marked edge gets its own refinement edge marked, until stable.
    Triangles are then bisected while their refinement edge is marked.
    """
    marked = np.unique(np.asarray(marked, dtype=np.int64).ravel())
    if marked.size == 0:
        return mesh
    if marked[0] < 0 or marked[-1] >= mesh.n_triangles:
        raise Exceptions.parameter_exception(
            "marked", f"[{marked[0]}, {marked[-1]}]", f"indices in [0, {mesh.n_triangles})"
        )

    tri_edges = mesh.tri_edges
    refinement_edge = tri_edges[:, 2]
    edge_marked = np.zeros(len(mesh.edges), dtype=bool)
    edge_marked[refinement_edge[marked]] = True
    while True:
        holds_marked = edge_marked[tri_edges].any(axis=1)
        pending = holds_marked & ~edge_marked[refinement_edge]
        if not pending.any():
            break
        edge_marked[refinement_edge[pending]] = True

    split_edges = np.flatnonzero(edge_marked)
    n_old = mesh.n_vertices
    n_new = n_old + len(split_edges)
    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints[split_edges]])

    endpoints = mesh.edges[split_edges]
    keys = endpoints[:, 0] * n_new + endpoints[:, 1]
    order = np.argsort(keys)
    keys = keys[order]
    midpoint_index = (n_old + np.arange(len(split_edges)))[order]

    def lookup(a, b):
        k = np.minimum(a, b) * n_new + np.maximum(a, b)
        pos = np.clip(np.searchsorted(keys, k), 0, len(keys) - 1)
        return np.where(keys[pos] == k, midpoint_index[pos], -1)

    triangles = mesh.triangles.copy()
    level = mesh.level.copy()
    parent = mesh.parent.copy()
    while True:
        mid = lookup(triangles[:, 0], triangles[:, 1])
        split = np.flatnonzero(mid >= 0)
        if split.size == 0:
            break
        a, b, c = triangles[split].T
        m = mid[split]
        triangles[split] = np.column_stack([c, a, m])
        triangles = np.vstack([triangles, np.column_stack([b, c, m])])
        level[split] += 1
        level = np.concatenate([level, level[split]])
        parent = np.concatenate([parent, parent[split]])

    refined = Mesh(
        vertices=vertices,
        triangles=triangles,
        level=level,
        parent=parent,
        lx=mesh.lx,
        ly=mesh.ly,
        n_initial_vertices=mesh.n_initial_vertices,
        tagger=mesh.tagger,
    )
    logger.debug(
        "Refined mesh",
        data={
            "marked": int(marked.size),
            "bisected_edges": int(len(split_edges)),
            "triangles": refined.n_triangles,
        },
    )
    return refined


def refine_uniform(mesh: Mesh) -> Mesh:
    """Two bisection sweeps over all triangles: every old edge is halved once."""
    once = refine(mesh, np.arange(mesh.n_triangles))
    return refine(once, np.arange(once.n_triangles))


def reset(initial: Mesh) -> Mesh:
    return initial.copy()


def min_element_size(mesh: Mesh) -> float:
    if mesh.n_triangles == 0:
        raise Exceptions.parameter_exception("mesh", "empty", "at least one triangle")
    return float(mesh.element_sizes.min())


def is_conforming(mesh: Mesh, tol: float = 1e-12) -> bool:
    """Edge-incidence audit: interior edges shared by two triangles, none dangling."""
    counts = (mesh.edge_triangles >= 0).sum(axis=1)
    if np.any(counts == 0):
        return False
    single = mesh.edge_midpoints[counts == 1]
    x, y = single[:, 0], single[:, 1]
    scale = tol * max(mesh.lx, mesh.ly)
    on_boundary = (
        (np.abs(x) <= scale)
        | (np.abs(x - mesh.lx) <= scale)
        | (np.abs(y) <= scale)
        | (np.abs(y - mesh.ly) <= scale)
    )
    if not np.all(on_boundary):
        return False
    return bool(np.all(mesh.areas > 0.0))
