from pathlib import Path

import numpy as np
import pandas as pd

from constants.exceptions import Exceptions
from geometry.level_set import LevelSet
from geometry.mesh import Mesh
from helpers.logger_config import logger
from helpers.vtk_export import write_grid_vtk, write_mesh_vtk

HISTORY_COLUMNS = [
    "iteration",
    "sample_size",
    "dof",
    "j_mean",
    "j_std",
    "jp_mean",
    "vol_frac",
    "eta_c",
    "eta_d",
    "q",
    "rho_it",
    "rho_ot",
    "sampling_pass",
    "lipschitz",
    "alpha",
    "dj_mean_norm",
    "dj_variance",
    "n_steps",
    "refinements",
    "accepted",
    "ci_increment",
    "ci_total",
    "stop_reason",
]

HISTORY_FILE = "history.csv"
TIMINGS_FILE = "timings.csv"
KL_MODES_FILE = "kl_modes.csv"
CONFIG_FILE = "config.json"
FLOAT_FORMAT = "%.12e"


def _to_csv(frame: pd.DataFrame, path: Path, mode: str = "w", header: bool = True):
    try:
        frame.to_csv(
            path,
            mode=mode,
            header=header,
            index=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
            na_rep="",
        )
    except OSError as e:
        raise Exceptions.export_exception(str(path), e)


def history_frame(rows: list[dict]) -> pd.DataFrame:
    """Rows in the fixed column order; unknown keys are an error."""
    for row in rows:
        extra = set(row) - set(HISTORY_COLUMNS)
        if extra:
            raise Exceptions.parameter_exception("history row", sorted(extra), "known columns")
    return pd.DataFrame(rows, columns=HISTORY_COLUMNS)


class RunExporter:
    """Writes every artifact of one run below a single output directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise Exceptions.export_exception(str(self.directory), e)
        self.history_path = self.directory / HISTORY_FILE
        self.timings_path = self.directory / TIMINGS_FILE
        _to_csv(history_frame([]), self.history_path)
        self._timings_started = False

    def append_history(self, row: dict):
        # flushed once per iteration
        frame = history_frame([row])
        for column in ("sampling_pass", "accepted"):
            if frame[column].notna().all():
                frame[column] = frame[column].astype(int)
        _to_csv(frame, self.history_path, mode="a", header=False)

    def append_timings(self, row: dict):
        frame = pd.DataFrame([row])
        _to_csv(frame, self.timings_path, mode="a" if self._timings_started else "w",
                header=not self._timings_started)
        self._timings_started = True

    def write_config(self, config_json: str):
        path = self.directory / CONFIG_FILE
        try:
            path.write_text(config_json + "\n", encoding="utf-8")
        except OSError as e:
            raise Exceptions.export_exception(str(path), e)

    def write_kl_modes(self, table: pd.DataFrame):
        _to_csv(table, self.directory / KL_MODES_FILE)

    def write_snapshot(
        self,
        name: str,
        mesh: Mesh,
        strong: np.ndarray,
        psi: LevelSet | None = None,
        cell_data: dict[str, np.ndarray] | None = None,
        point_data: dict[str, np.ndarray] | None = None,
    ):
        cells = {"strong": np.asarray(strong, dtype=float)}
        cells.update(cell_data or {})
        write_mesh_vtk(
            self.directory / f"{name}.vtk",
            mesh.vertices,
            mesh.triangles,
            cell_data=cells,
            point_data=point_data,
        )
        if psi is not None:
            write_grid_vtk(
                self.directory / f"{name}_level_set.vtk",
                psi.grid.shape,
                (psi.grid.dx, psi.grid.dy),
                {"psi": psi.values},
            )
        logger.debug("Wrote snapshot", data={"name": name, "directory": str(self.directory)})
