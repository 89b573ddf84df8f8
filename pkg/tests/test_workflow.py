"""
End-to-end tests of the optimization loop, the orchestrator and the command line.
"""

import dataclasses
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from constants.exceptions import ConfigurationError
from constants.modes import ADAPTIVE_MESH_FULL, FIXED_MESH_ADAPTIVE_SAMPLING, FULLY_ADAPTIVE
from main import EXIT_ABORTED, EXIT_OK, main
from optimizer.adaptive_control import STOP_MAX_ITERATIONS
from optimizer.orchestrator import WorkflowOrchestrator
from optimizer.workflows.robust_shape.benchmark import CantileverBenchmark
from schemas.config_schemas import load_config
from services.export import HISTORY_COLUMNS


def run(overrides, **changes):
    config = load_config(cli_overrides={**overrides, **changes}, environ={})
    state = WorkflowOrchestrator().start(config)
    frame = pd.read_csv(f"{config.output.directory}/history.csv", keep_default_na=False)
    return config, state, frame


@pytest.mark.integration
class TestFixedMeshRun:
    """Test class for the non-adaptive reference run."""

    def test_history_and_artifacts(self, tiny_config):
        """Test one history row per iteration and the written artifacts."""
        state = WorkflowOrchestrator().start(tiny_config)
        directory = tiny_config.output.directory
        frame = pd.read_csv(f"{directory}/history.csv", keep_default_na=False)

        assert state["stop_reason"] == STOP_MAX_ITERATIONS
        assert list(frame.columns) == HISTORY_COLUMNS
        assert frame["iteration"].tolist() == [1, 2, 3]
        assert (frame["sample_size"] == 3).all()
        assert frame["dof"].nunique() == 1
        assert (frame["refinements"] == 0).all()
        assert (frame["q"] == "").all()
        assert frame["stop_reason"].tolist() == ["", "", STOP_MAX_ITERATIONS]
        assert frame["ci_total"].is_monotonic_increasing
        assert frame["ci_increment"].sum() == pytest.approx(frame["ci_total"].iloc[-1], rel=1e-12)

        for name in ("config.json", "kl_modes.csv", "timings.csv", "final_design.vtk"):
            assert Path(directory, name).exists()
        assert json.loads(Path(directory, "config.json").read_text(encoding="utf-8"))["seed"] == 11

    def test_first_iteration_uses_initial_step(self, tiny_config):
        """Test that the first row carries alpha_initial and no Lipschitz estimate."""
        WorkflowOrchestrator().start(tiny_config)
        frame = pd.read_csv(f"{tiny_config.output.directory}/history.csv", keep_default_na=False)
        assert frame["lipschitz"].iloc[0] == ""
        assert frame["alpha"].iloc[0] == pytest.approx(tiny_config.optimization.alpha_initial)

    def test_deterministic(self, tiny_overrides, tmp_path):
        """Test byte-identical histories for identical seeds."""
        paths = []
        for name in ("a", "b"):
            overrides = {**tiny_overrides, "output": {"directory": str(tmp_path / name)}}
            config, _, _ = run(overrides, mode="fixed-mesh-full")
            paths.append(f"{config.output.directory}/history.csv")
        assert Path(paths[0]).read_bytes() == Path(paths[1]).read_bytes()


@pytest.mark.integration
class TestAdaptiveRuns:
    """Test class for runs with adaptive sampling or meshes."""

    def test_sample_size_never_shrinks(self, tiny_overrides):
        """Test the sample size of a fully adaptive run."""
        _, _, frame = run(tiny_overrides, mode=FULLY_ADAPTIVE)
        sizes = frame["sample_size"].tolist()
        assert sizes[0] == 2
        assert sizes == sorted(sizes)
        assert max(sizes) <= 4

    def test_adaptive_mesh_estimates(self, tiny_overrides):
        """Test that adaptive meshes report the estimate and start from the initial mesh."""
        _, state, frame = run(tiny_overrides, mode=ADAPTIVE_MESH_FULL)
        initial_dof = state["initial_mesh"].vector_dof
        assert (frame["dof"] >= initial_dof).all()
        assert (frame["refinements"] <= 1).all()
        assert all(isinstance(q, float) and q >= 0 for q in frame["q"])

    def test_deterministic_load(self, tiny_overrides):
        """Test that a zero angle deviation gives identical samples and a passing test."""
        overrides = {**tiny_overrides, "load": {"angle_std_deg": 0.0}}
        _, _, frame = run(overrides, mode=FIXED_MESH_ADAPTIVE_SAMPLING)
        assert (frame["sampling_pass"] == 1).all()
        assert (frame["sample_size"] == 2).all()
        assert frame["rho_it"].max() == pytest.approx(0.0, abs=1e-12)


class TestRandomStiffness:
    """Test class for the optional random Young's modulus."""

    def test_positive_and_reproducible(self, tiny_overrides):
        """Test positive per-triangle factors that repeat for the same sample index."""
        overrides = {**tiny_overrides, "random_field": {"max_modes": 4, "young_std": 0.2}}
        config = load_config(cli_overrides={**overrides, "mode": "fixed-mesh-full"}, environ={})
        benchmark = CantileverBenchmark(config)
        mesh = benchmark.initial_mesh()

        scales = [benchmark.stiffness_scale(s, mesh) for s in benchmark.samples(2)]
        assert all(scale.shape == (mesh.n_triangles,) for scale in scales)
        assert all(np.all(scale > 0) for scale in scales)
        assert not np.allclose(scales[0], scales[1])

        again = benchmark.stiffness_scale(benchmark.samples(1)[0], mesh)
        np.testing.assert_array_equal(scales[0], again)

    def test_fixed_material_by_default(self, tiny_config):
        """Test that a zero deviation leaves the material deterministic."""
        benchmark = CantileverBenchmark(tiny_config)
        s = benchmark.samples(1)[0]
        assert s.young is None
        assert benchmark.stiffness_scale(s, benchmark.initial_mesh()) is None


class TestSolverCache:
    """Test class for the shared factorizations of a mesh."""

    def test_keyed_by_material_layout(self, cantilever):
        """Test one shared solver per strong layout and degree."""
        benchmark, pipeline, _, context = cantilever
        s = benchmark.samples(1)[0]
        flipped = dataclasses.replace(context, strong=~context.strong)
        first = pipeline.elasticity_solver(context, pipeline.material(context, s), 1, True)
        again = pipeline.elasticity_solver(context, pipeline.material(context, s), 1, True)
        other = pipeline.elasticity_solver(flipped, pipeline.material(flipped, s), 1, True)
        assert first is again
        assert other is not first
        cache = context.mesh.cache
        assert cache[("elasticity_solver", 1, context.strong.tobytes())] is first
        assert cache[("elasticity_solver", 1, flipped.strong.tobytes())] is other

    def test_unshared_solver_not_cached(self, cantilever):
        """Test that a sample-dependent material bypasses the cache."""
        benchmark, pipeline, _, context = cantilever
        s = benchmark.samples(1)[0]
        pipeline.elasticity_solver(context, pipeline.material(context, s), 1, False)
        assert ("elasticity_solver", 1, context.strong.tobytes()) not in context.mesh.cache


class TestOrchestrator:
    """Test class for mode dispatch."""

    def test_unknown_mode(self, tiny_config):
        """Test that a mode without a workflow raises."""
        config = tiny_config.model_copy(update={"mode": "no-such-mode"})
        with pytest.raises(ConfigurationError):
            WorkflowOrchestrator().start(config)

    def test_every_mode_registered(self):
        """Test one workflow per experiment mode."""
        workflows = WorkflowOrchestrator().workflows
        assert set(workflows) == {
            "fixed-mesh-full",
            "fixed-mesh-adaptive-sampling",
            "adaptive-mesh-full",
            "fully-adaptive",
        }
        assert all(w.workflow_name == mode for mode, w in workflows.items())


class TestCommandLine:
    """Test class for the optimize entry point."""

    def test_success(self, tiny_overrides, tmp_path):
        """Test exit code 0 and the CLI overrides on top of a config file."""
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps(tiny_overrides), encoding="utf-8")
        out = tmp_path / "cli"
        code = main(
            ["--config", str(path), "--mode", "fixed-mesh-full", "--max-iters", "1", "--out", str(out)]
        )
        assert code == EXIT_OK
        frame = pd.read_csv(out / "history.csv", keep_default_na=False)
        assert frame["iteration"].tolist() == [1]

    def test_missing_config(self, tmp_path):
        """Test that a missing config file aborts with exit code 2."""
        assert main(["--config", str(tmp_path / "absent.json")]) == EXIT_ABORTED

    def test_invalid_value(self, tmp_path):
        """Test that an invalid configuration aborts with exit code 2."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"optimization": {"target_fraction": 2.0}}), encoding="utf-8")
        assert main(["--config", str(path), "--out", str(tmp_path / "x")]) == EXIT_ABORTED


@pytest.mark.slow
@pytest.mark.integration
def test_desk_run(tmp_path):
    """Test a short desk-scale fully adaptive run."""
    config = load_config(
        cli_overrides={
            "scale": "desk",
            "mode": FULLY_ADAPTIVE,
            "seed": 20240611,
            "optimization": {"max_iters": 5},
            "output": {"directory": str(tmp_path / "desk")},
        },
        environ={},
    )
    state = WorkflowOrchestrator().start(config)
    assert state["iteration"] == 5
    assert len(state["history"]) == 5
    assert all(row["dj_mean_norm"] > 0 for row in state["history"])
    assert all(row["j_std"] >= 0 for row in state["history"])
    assert all(row["j_std"] == 0 for row in state["history"] if row["sample_size"] == 1)
