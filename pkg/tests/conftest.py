"""
Pytest configuration and shared fixtures for the robust shape optimizer tests.
"""

import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from constants.defaults import lame_parameters
from fem.assembly import ersatz_material
from geometry.level_set import material_indicator, volume_fraction
from geometry.mesh import BOUNDARY_DIRICHLET, build_crossed
from optimizer.objective import volume_multiplier
from optimizer.workflows.robust_shape.benchmark import CantileverBenchmark
from optimizer.workflows.robust_shape.tools import EvaluationContext, SamplePipeline
from schemas.config_schemas import load_config
from services.computational_index import SolveLedger


def clamped_everywhere(midpoints):
    return np.full(len(midpoints), BOUNDARY_DIRICHLET, dtype=np.int8)


@pytest.fixture
def unit_mesh():
    """Fixture providing a 4 x 4 crossed mesh of the unit square."""
    return build_crossed(4, 4, 1.0, 1.0)


@pytest.fixture
def clamped_mesh():
    """Fixture providing a 4 x 4 unit-square mesh clamped on its whole boundary."""
    return build_crossed(4, 4, 1.0, 1.0, clamped_everywhere)


@pytest.fixture
def lame():
    """Fixture providing (mu, lambda) for E = 1, nu = 0.3."""
    return lame_parameters(1.0, 0.3)


@pytest.fixture
def solid_material(unit_mesh, lame):
    """Fixture providing a fully strong material on unit_mesh."""
    mu, lam = lame
    return ersatz_material(np.ones(unit_mesh.n_triangles, dtype=bool), mu, lam, 1e-3)


@pytest.fixture
def tiny_overrides(tmp_path):
    """Fixture providing overrides for a run that finishes in seconds."""
    return {
        "scale": "desk",
        "seed": 11,
        "domain": {"nx": 6, "ny": 12},
        "random_field": {"max_modes": 4},
        "optimization": {
            "max_iters": 3,
            "full_sample_size": 3,
            "initial_sample_size": 2,
            "max_sample_size": 4,
        },
        "adaptivity": {"max_refinement_passes": 1, "reference_mesh_size": 0.02},
        "output": {"directory": str(tmp_path / "run"), "snapshot_every": 1},
    }


@pytest.fixture
def tiny_config(tiny_overrides):
    """Fixture providing a resolved configuration for a tiny fixed-mesh run."""
    return load_config(cli_overrides={**tiny_overrides, "mode": "fixed-mesh-full"}, environ={})


def build_cantilever(config):
    benchmark = CantileverBenchmark(config)
    ledger = SolveLedger()
    pipeline = SamplePipeline(benchmark, config, ledger)
    mesh = benchmark.initial_mesh()
    psi = benchmark.initial_level_set(benchmark.grid(mesh))
    vf = volume_fraction(psi)
    opt = config.optimization
    context = EvaluationContext(
        mesh=mesh,
        strong=material_indicator(psi, mesh),
        volume_fraction=vf,
        lambda_tilde=volume_multiplier(opt.penalty_weight, mesh.domain_area, opt.target_fraction, vf),
        estimate=True,
    )
    return benchmark, pipeline, ledger, context


@pytest.fixture
def cantilever(tiny_config):
    """Fixture providing benchmark, pipeline, ledger and an estimating context on the tiny cantilever."""
    return build_cantilever(tiny_config)


@pytest.fixture
def traction_cantilever(tiny_overrides):
    """Fixture like cantilever with the load spread as a traction over the right edge."""
    config = load_config(
        cli_overrides={**tiny_overrides, "mode": "fixed-mesh-full", "load": {"kind": "traction"}},
        environ={},
    )
    return build_cantilever(config)
