"""
Legacy ASCII VTK writers for meshes, cell/point fields and level-set grids.
"""

from pathlib import Path

import meshio
import numpy as np
import pyvista as pv

from constants.exceptions import Exceptions


def _as_3d(values: np.ndarray) -> np.ndarray:
    # VTK vectors and points always carry a z component
    values = np.asarray(values, dtype=float)
    if values.ndim == 2 and values.shape[1] == 2:
        return np.column_stack([values, np.zeros(len(values))])
    return values


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise Exceptions.export_exception(str(path), e)
    return path


def write_mesh_vtk(
    path: str | Path,
    vertices: np.ndarray,
    triangles: np.ndarray,
    cell_data: dict[str, np.ndarray] | None = None,
    point_data: dict[str, np.ndarray] | None = None,
):
    """Unstructured triangle grid with optional cell and point attributes."""
    path = _prepare(path)
    mesh = meshio.Mesh(
        points=_as_3d(vertices),
        cells=[("triangle", np.asarray(triangles, dtype=np.int64))],
        point_data={name: _as_3d(v) for name, v in (point_data or {}).items()},
        cell_data={name: [np.asarray(v, dtype=float)] for name, v in (cell_data or {}).items()},
    )
    try:
        meshio.write(path, mesh, file_format="vtk", binary=False, fmt_version="4.2")
    except (OSError, ValueError) as e:
        raise Exceptions.export_exception(str(path), e)


def write_grid_vtk(
    path: str | Path,
    shape: tuple[int, int],
    spacing: tuple[float, float],
    point_data: dict[str, np.ndarray],
):
    """Structured points; values are (n_y + 1, n_x + 1) arrays indexed [j, i]."""
    path = _prepare(path)
    ny1, nx1 = shape
    grid = pv.ImageData(
        dimensions=(nx1, ny1, 1),
        spacing=(spacing[0], spacing[1], 1.0),
        origin=(0.0, 0.0, 0.0),
    )
    # VTK runs x fastest, which is the row-major order of [j, i]
    for name, values in point_data.items():
        grid.point_data[name] = np.ravel(np.asarray(values, dtype=float))
    try:
        grid.save(path, binary=False)
    except (OSError, ValueError) as e:
        raise Exceptions.export_exception(str(path), e)
