"""
Default parameters of the cantilever benchmark and the adaptive algorithm.
"""

import math

import numpy as np

# Working domain D = [0, LX] x [0, LY] and its initial crossed grid
DOMAIN_LX = 1.0
DOMAIN_LY = 2.0
GRID_NX = 60
GRID_NY = 120

# Clamped part of the left edge, x = 0 and y in [DIRICHLET_Y_MIN, LY]
DIRICHLET_Y_MIN = 1.5

# Point load g = magnitude * (cos phi, sin phi) applied at LOAD_POINT
LOAD_POINT = (1.0, 0.0)
LOAD_MAGNITUDE = 10.0
LOAD_ANGLE_MEAN_DEG = 90.0
LOAD_ANGLE_STD_DEG = 10.0

# Material
YOUNG_MODULUS = 1.0
POISSON_RATIO = 0.3
ERSATZ_EPSILON = 1e-3

# Karhunen-Loeve truncation
CORRELATION_LENGTH = 1.0
KL_ENERGY_TARGET = 0.9
KL_MAX_MODES = 100

# Penalized objective
PENALTY_WEIGHT = 500.0
TARGET_VOLUME_FRACTION = 0.3

# Deformation equation b(theta, phi) = tau1 (grad, grad) + tau2 (theta, phi)
TAU1 = 1e3
TAU2 = 1.0

# Step length and sampling test
ALPHA_INITIAL = 0.01
ALPHA_MIN = 1e-4
NU_IT = 0.6
NU_OT = 5.8
INITIAL_SAMPLE_SIZE = 2
FULL_SAMPLE_SIZE = 10
MAX_SAMPLE_SIZE = 64

# Mesh adaptivity
ESTIMATOR_TOLERANCE = 0.1
REFERENCE_MESH_SIZE = 1.0 / 180.0
DORFLER_THETA = 0.3
MAX_REFINEMENT_PASSES = 4
MAX_DOF = 400_000

# Stopping
MAX_ITERATIONS = 200
STAGNATION_WINDOW = 5
STAGNATION_TOLERANCE = 0.01
VOLUME_TOLERANCE = 0.005

# Level set evolution
INITIAL_FICTITIOUS_STEPS = 3
MAX_FICTITIOUS_STEPS = 10
STEP_INCREASE_AFTER = 3
REINIT_EVERY = 5
VOLUME_SUBSAMPLES = 4

# Linear algebra and quadrature
SOLVER_REL_TOL = 1e-10

# Output
SNAPSHOT_EVERY = 10


def lame_parameters(young: float, poisson: float) -> tuple[float, float]:
    """
    Lame coefficients (mu, lambda) of an isotropic material.

    Args:
        young (float): Young's modulus E.
        poisson (float): Poisson ratio nu, in (-1, 0.5).

    Returns:
        tuple[float, float]: mu = E / (2(1+nu)), lambda = E nu / ((1+nu)(1-2nu)).
    """
    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


def initial_level_set(x, y):
    """Perforated initial design: -cos(8 pi x) cos(4 pi y) - 0.5."""
    return -np.cos(8.0 * math.pi * x) * np.cos(4.0 * math.pi * y) - 0.5
