"""
Tests for the level-set grid, Lax-Friedrichs evolution, reinitialization and
the material indicator.
"""

import math

import numpy as np
import pytest

from constants.exceptions import MeshMismatchError, StationaryVelocityError
from fem.spaces import DiscreteField, function_space
from geometry.level_set import (
    Grid,
    LevelSet,
    VelocityGrid,
    advance,
    cfl_dt,
    hj_step,
    init_level_set,
    interface_segments,
    material_indicator,
    reinitialize,
    volume_fraction,
)
from geometry.mesh import build_crossed


def constant_velocity(grid, vx, vy):
    return VelocityGrid(grid, np.full(grid.shape, float(vx)), np.full(grid.shape, float(vy)))


def bump_profile(s):
    """Linear profile with a smooth bump on [0.3, 0.7]."""
    inside = (s > 0.3) & (s < 0.7)
    bump = np.where(inside, np.sin(math.pi * (s - 0.3) / 0.4) ** 4, 0.0)
    return s + 0.1 * bump


class TestGrid:
    """Test class for the structured level-set grid."""

    def test_of_mesh(self):
        """Test that the grid lines up with the first mesh vertices."""
        mesh = build_crossed(3, 5, 1.0, 2.0)
        grid = Grid.of_mesh(mesh, 3, 5)
        assert grid.shape == (6, 4)
        assert grid.dx == pytest.approx(1.0 / 3.0)
        assert grid.dy == pytest.approx(0.4)

    def test_of_mesh_mismatch(self):
        """Test that a grid of another resolution is rejected."""
        with pytest.raises(MeshMismatchError):
            Grid.of_mesh(build_crossed(3, 5, 1.0, 2.0), 4, 5)

    def test_velocity_from_field(self):
        """Test nodal velocities at the persistent grid vertices."""
        mesh = build_crossed(3, 2, 1.0, 1.0)
        grid = Grid.of_mesh(mesh, 3, 2)
        theta = DiscreteField.from_function(
            function_space(mesh, 1), lambda p: np.column_stack([p[:, 0], 2 * p[:, 1]])
        )
        velocity = VelocityGrid.from_field(theta, grid)
        x, y = grid.coordinates()
        np.testing.assert_allclose(velocity.vx, x)
        np.testing.assert_allclose(velocity.vy, 2 * y)
        assert velocity.max_norm == pytest.approx(math.sqrt(5.0))


class TestEvolution:
    """Test class for the Hamilton-Jacobi update."""

    def test_linear_profile_is_exact(self):
        """Test that a linear profile is transported exactly, boundary nodes included."""
        grid = Grid(10, 8, 1.0, 2.0)
        psi = init_level_set(grid, lambda x, y: 0.3 * x - 0.7 * y + 0.2)
        theta = constant_velocity(grid, 0.4, -0.9)
        stepped = hj_step(psi, theta, 1e-3)
        expected = psi.values - 1e-3 * (0.4 * 0.3 + 0.9 * 0.7)
        np.testing.assert_allclose(stepped.values, expected, atol=1e-14)

    @pytest.mark.parametrize("vx,vy", [(0.8, 0.0), (-0.8, 0.0), (0.0, 0.8), (0.0, -0.8), (0.5, -0.3)])
    def test_upwind_at_kink(self, vx, vy):
        """Test that a constant velocity takes the upwind difference in x and y."""
        grid = Grid(4, 4, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: np.abs(x - 0.5) + np.abs(y - 0.5))
        stepped = hj_step(psi, constant_velocity(grid, vx, vy), 1e-2)
        v = psi.values
        inner = v[1:-1, 1:-1]
        x_slope = (inner - v[1:-1, :-2]) / grid.dx if vx > 0 else (v[1:-1, 2:] - inner) / grid.dx
        y_slope = (inner - v[:-2, 1:-1]) / grid.dy if vy > 0 else (v[2:, 1:-1] - inner) / grid.dy
        expected = inner - 1e-2 * (vx * x_slope + vy * y_slope)
        np.testing.assert_allclose(stepped.values[1:-1, 1:-1], expected, atol=1e-14)

    def test_zero_velocity(self):
        """Test that a vanishing velocity leaves psi unchanged."""
        grid = Grid(4, 4, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: x * y - 0.1)
        stepped = hj_step(psi, constant_velocity(grid, 0, 0), 0.5)
        np.testing.assert_array_equal(stepped.values, psi.values)

    @pytest.mark.parametrize(
        "alpha,theta_max,expected",
        [(0.01, 2.0, 0.01 / 60 / 2), (0.0, 2.0, 0.0), (0.5, 1.0, 0.5 / 60)],
    )
    def test_cfl_dt(self, alpha, theta_max, expected):
        """Test dt = alpha min(dx, dy) / theta_max."""
        grid = Grid(60, 120, 1.0, 2.0)
        theta = constant_velocity(grid, 0.0, theta_max)
        assert cfl_dt(alpha, grid, theta) == pytest.approx(expected, rel=1e-14)

    def test_cfl_example_value(self):
        """Test the benchmark time step 8.3333e-5."""
        grid = Grid(60, 120, 1.0, 2.0)
        assert cfl_dt(0.01, grid, constant_velocity(grid, 2.0, 0.0)) == pytest.approx(8.3333e-5, rel=1e-4)

    def test_stationary_velocity(self):
        """Test the stationary signal and that advance then skips evolution."""
        grid = Grid(4, 4, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: x - 0.5)
        theta = constant_velocity(grid, 0, 0)
        with pytest.raises(StationaryVelocityError):
            cfl_dt(0.01, grid, theta)
        evolved, elapsed = advance(psi, theta, 0.01, 3)
        assert evolved is psi
        assert elapsed == 0.0

    def test_advance_elapsed_time(self):
        """Test that advance reports n_steps * dt."""
        grid = Grid(10, 10, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: x - 0.5)
        _, elapsed = advance(psi, constant_velocity(grid, 0.5, 0.0), 0.1, 4)
        assert elapsed == pytest.approx(4 * 0.1 * 0.1 / 0.5)

    def test_first_order_convergence(self):
        """Test the max-norm error against characteristics under grid refinement."""
        errors = []
        for n in (50, 100, 200):
            grid = Grid(n, 2, 1.0, 1.0)
            psi = init_level_set(grid, lambda x, y: bump_profile(x))
            steps = int(round(0.2 * n))
            evolved, elapsed = advance(psi, constant_velocity(grid, 1.0, 0.0), 0.5, steps)
            assert elapsed == pytest.approx(0.1)
            x, _ = grid.coordinates()
            errors.append(np.abs(evolved.values - bump_profile(x - 0.1)).max())
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 0.8)


class TestReinitialize:
    """Test class for signed-distance reinitialization."""

    def test_signed_distance_is_fixed_point(self):
        """Test that the signed distance to a line is left unchanged."""
        grid = Grid(10, 10, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: x - 0.37)
        result, found = reinitialize(psi)
        assert found
        np.testing.assert_allclose(result.values, psi.values, atol=1e-6)

    def test_rescaled_distance(self):
        """Test that a steep profile is rescaled with identical signs."""
        grid = Grid(12, 12, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: 10.0 * (y - 0.41))
        result, _ = reinitialize(psi)
        _, y = grid.coordinates()
        np.testing.assert_allclose(result.values, y - 0.41, atol=1e-6)
        np.testing.assert_array_equal(np.sign(result.values), np.sign(psi.values))

    def test_signs_preserved_for_curved_interface(self):
        """Test sign preservation and unit gradient away from a circle."""
        grid = Grid(40, 40, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: 3.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2 - 0.09))
        result, _ = reinitialize(psi)
        np.testing.assert_array_equal(np.sign(result.values), np.sign(psi.values))
        gy, gx = np.gradient(result.values, grid.dy, grid.dx)
        magnitude = np.hypot(gx, gy)
        x, y = grid.coordinates()
        # outside only: the distance has a kink at the centre
        away = np.hypot(x - 0.5, y - 0.5) > 0.4
        away &= (x > 0.05) & (x < 0.95) & (y > 0.05) & (y < 0.95)
        assert np.all((magnitude[away] >= 0.5) & (magnitude[away] <= 1.5))

    def test_single_sign_is_noop(self):
        """Test that a level set without interface is returned unchanged."""
        grid = Grid(4, 4, 1.0, 1.0)
        psi = LevelSet(grid, np.full(grid.shape, -1.0))
        result, found = reinitialize(psi)
        assert not found
        assert result is psi
        assert len(interface_segments(psi)) == 0

    def test_saddle_cell(self):
        """Test that a saddle cell yields two segments."""
        grid = Grid(1, 1, 1.0, 1.0)
        psi = LevelSet(grid, np.array([[-1.0, 1.0], [1.0, -1.0]]))
        assert len(interface_segments(psi)) == 2


class TestMaterial:
    """Test class for the material indicator and the volume fraction."""

    @pytest.mark.parametrize("value,strong,fraction", [(-1.0, True, 1.0), (1.0, False, 0.0)])
    def test_constant_level_sets(self, value, strong, fraction):
        """Test all-material and all-void designs."""
        mesh = build_crossed(4, 8, 1.0, 2.0)
        grid = Grid.of_mesh(mesh, 4, 8)
        psi = LevelSet(grid, np.full(grid.shape, value))
        assert np.all(material_indicator(psi, mesh) == strong)
        assert volume_fraction(psi) == fraction

    def test_half_plane(self):
        """Test the volume fraction of psi = x - 0.5."""
        grid = Grid(7, 7, 1.0, 1.0)
        psi = init_level_set(grid, lambda x, y: x - 0.5)
        assert volume_fraction(psi) == pytest.approx(0.5, abs=1.0 / 16.0)
        scaled = psi.with_values(4.0 * psi.values)
        assert volume_fraction(scaled) == volume_fraction(psi)

    def test_indicator_follows_centroids(self):
        """Test that triangles left of x = 0.5 are strong."""
        mesh = build_crossed(4, 4, 1.0, 1.0)
        grid = Grid.of_mesh(mesh, 4, 4)
        psi = init_level_set(grid, lambda x, y: x - 0.5)
        strong = material_indicator(psi, mesh)
        np.testing.assert_array_equal(strong, mesh.centroids[:, 0] < 0.5)

    def test_indicator_domain_mismatch(self):
        """Test that a level set of another domain is rejected."""
        mesh = build_crossed(4, 4, 1.0, 1.0)
        psi = LevelSet(Grid(4, 4, 2.0, 1.0), np.zeros((5, 5)))
        with pytest.raises(MeshMismatchError):
            material_indicator(psi, mesh)
