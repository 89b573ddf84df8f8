"""
Tests for crossed meshes, bulk marking and newest-vertex bisection.
"""

import numpy as np
import pytest

from constants.exceptions import ParameterError
from geometry.mesh import (
    BOUNDARY_FREE,
    INTERIOR_EDGE,
    build_crossed,
    is_conforming,
    mark_dorfler,
    min_element_size,
    refine,
    refine_uniform,
    reset,
)


class TestBuildCrossed:
    """Test class for the initial crossed triangulation."""

    @pytest.mark.parametrize(
        "n_x,n_y,l_x,l_y,dof",
        [
            (1, 1, 1.0, 1.0, 10),
            (60, 120, 1.0, 2.0, 29_162),
            (180, 360, 1.0, 2.0, 260_282),
        ],
    )
    def test_vector_dof(self, n_x, n_y, l_x, l_y, dof):
        """Test the vector DoF count 2((n_x+1)(n_y+1) + n_x n_y)."""
        mesh = build_crossed(n_x, n_y, l_x, l_y)
        assert mesh.vector_dof == dof
        assert mesh.n_triangles == 4 * n_x * n_y

    def test_grid_vertex_numbering(self):
        """Test that grid vertex (i, j) sits at index j (n_x+1) + i."""
        mesh = build_crossed(3, 2, 3.0, 2.0)
        for i, j in [(0, 0), (3, 0), (1, 1), (3, 2)]:
            np.testing.assert_allclose(mesh.vertices[j * 4 + i], [i, j])
        np.testing.assert_allclose(mesh.vertices[12], [0.5, 0.5])

    def test_orientation_and_area(self, unit_mesh):
        """Test counterclockwise triangles covering the domain."""
        assert np.all(unit_mesh.areas > 0)
        assert unit_mesh.areas.sum() == pytest.approx(1.0, abs=1e-14)

    def test_newest_vertex_is_cell_center(self):
        """Test that the third vertex of every initial triangle is a cell center."""
        mesh = build_crossed(2, 3, 1.0, 1.5)
        n_grid = 3 * 4
        assert np.all(mesh.triangles[:, 2] >= n_grid)
        assert np.all(mesh.triangles[:, :2] < n_grid)

    def test_edges_and_tags(self, unit_mesh):
        """Test edge counts and default boundary tags."""
        tags = unit_mesh.boundary_tags
        assert np.count_nonzero(tags != INTERIOR_EDGE) == 16
        assert np.all(tags[tags != INTERIOR_EDGE] == BOUNDARY_FREE)
        assert is_conforming(unit_mesh)

    def test_min_element_size(self, unit_mesh):
        """Test h_K = |K|^(1/2) on the uniform crossed mesh."""
        assert min_element_size(unit_mesh) == pytest.approx(1.0 / 8.0)

    @pytest.mark.parametrize("args", [(0, 1, 1.0, 1.0), (1, 1, -1.0, 1.0), (1.5, 1, 1.0, 1.0)])
    def test_invalid_arguments(self, args):
        """Test that invalid sizes raise ParameterError."""
        with pytest.raises(ParameterError):
            build_crossed(*args)


class TestMarkDorfler:
    """Test class for bulk marking."""

    @pytest.mark.parametrize(
        "indicators,theta,expected",
        [
            ([1.0, 2.0, 3.0, 4.0], 0.5, [3, 2]),
            ([1.0, 1.0, 1.0, 1.0], 0.5, [0, 1]),
            ([5.0, 0.0, 0.0], 0.3, [0]),
            ([1.0, 2.0, 3.0, 4.0], 1.0, [3, 2, 1, 0]),
        ],
    )
    def test_minimal_set(self, indicators, theta, expected):
        """Test the smallest descending set reaching theta of the total."""
        np.testing.assert_array_equal(mark_dorfler(indicators, theta), expected)

    def test_all_zero(self):
        """Test that vanishing indicators mark nothing."""
        assert mark_dorfler(np.zeros(5), 0.3).size == 0

    @pytest.mark.parametrize("indicators,theta", [([1.0, -1.0], 0.3), ([1.0, np.nan], 0.3), ([1.0], 0.0)])
    def test_invalid(self, indicators, theta):
        """Test that negative, non-finite indicators or theta outside (0, 1] raise."""
        with pytest.raises(ParameterError):
            mark_dorfler(indicators, theta)


class TestRefine:
    """Test class for newest-vertex bisection."""

    def test_single_marked_triangle(self, unit_mesh):
        """Test that refining one triangle keeps the mesh conforming."""
        refined = refine(unit_mesh, [5])
        assert is_conforming(refined)
        assert refined.n_triangles > unit_mesh.n_triangles
        assert refined.areas.sum() == pytest.approx(1.0, abs=1e-13)
        assert np.all(refined.areas > 0)

    def test_initial_vertices_persist(self, unit_mesh):
        """Test that refinement only appends vertices."""
        refined = refine(refine(unit_mesh, [0, 7]), [3])
        n0 = unit_mesh.n_initial_vertices
        assert refined.n_initial_vertices == n0
        np.testing.assert_array_equal(refined.vertices[:n0], unit_mesh.vertices)

    def test_empty_marking(self, unit_mesh):
        """Test that an empty marking returns the mesh unchanged."""
        assert refine(unit_mesh, []) is unit_mesh

    def test_uniform_refinement(self, unit_mesh):
        """Test that two sweeps quadruple the triangles and halve h."""
        refined = refine_uniform(unit_mesh)
        assert refined.n_triangles == 4 * unit_mesh.n_triangles
        assert min_element_size(refined) == pytest.approx(0.5 * min_element_size(unit_mesh))
        assert is_conforming(refined)

    def test_repeated_local_refinement_stays_conforming(self, unit_mesh):
        """Test conformity and shape control over repeated corner refinement."""
        mesh = unit_mesh
        for _ in range(6):
            corner = np.argmin(np.linalg.norm(mesh.centroids - [1.0, 0.0], axis=1))
            mesh = refine(mesh, [corner])
            assert is_conforming(mesh)
        # bisection produces at most four similarity classes per initial shape
        p = mesh.vertices[mesh.triangles]
        longest = np.max(np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2), axis=1)
        assert np.max(longest**2 / mesh.areas) < 10.0

    def test_out_of_range(self, unit_mesh):
        """Test that unknown triangle indices raise."""
        with pytest.raises(ParameterError):
            refine(unit_mesh, [unit_mesh.n_triangles])

    def test_tags_follow_refinement(self):
        """Test that boundary tags are recomputed from the tagger after bisection."""
        mesh = build_crossed(2, 2, 1.0, 1.0, lambda m: np.where(m[:, 0] < 1e-12, 1, 0))
        refined = refine_uniform(mesh)
        tagged = refined.edge_midpoints[refined.boundary_edges(1)]
        assert len(tagged) == 4
        np.testing.assert_allclose(tagged[:, 0], 0.0)


class TestReset:
    """Test class for resetting to the initial mesh."""

    def test_reset_is_fresh_copy(self, unit_mesh):
        """Test that reset returns an equal mesh with an empty cache."""
        unit_mesh.cache["marker"] = 1
        fresh = reset(unit_mesh)
        assert fresh is not unit_mesh
        assert fresh.cache == {}
        np.testing.assert_array_equal(fresh.triangles, unit_mesh.triangles)
        np.testing.assert_array_equal(fresh.vertices, unit_mesh.vertices)
