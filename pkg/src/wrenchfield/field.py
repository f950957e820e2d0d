"""Regular-grid 2D vector/scalar fields and discrete vector-calculus primitives.

Conventions used by every module in this package:

* arrays are stored ``(ny, nx)`` and indexed ``[j, i]``; the flat scan order is
  row-major, ``k = j*nx + i``
* the physical position of cell ``(i, j)`` is ``origin + (i, j)*spacing``
  (cell centers, millimeters)
* derivatives use second-order central differences in the interior and
  first-order one-sided differences on the boundary (exactly ``np.gradient``
  with ``edge_order=1``)

All field types are immutable value types: their arrays are copied on
construction and marked read-only, so instances are safe to share across
threads and every operation here is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _dc_field

import numpy as np

__all__ = [
    "GridSpec",
    "VectorField2D",
    "ScalarField2D",
    "VectorSum",
    "FieldFormatError",
    "divergence",
    "curl_z",
    "gradient",
    "rotate_quarter",
    "sum_norms",
    "norm_of_sum",
    "moment_sum",
    "read_vector_field",
    "write_vector_field",
    "read_scalar_field",
    "write_scalar_field",
]


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a regular grid: cell counts, spacing (mm/cell), origin (mm)."""

    nx: int
    ny: int
    spacing: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2 cells per axis, got {self.nx}x{self.ny}")
        if not (self.spacing > 0):
            raise ValueError(f"spacing must be > 0, got {self.spacing}")
        ox, oy = self.origin
        if not (np.isfinite(ox) and np.isfinite(oy) and np.isfinite(self.spacing)):
            raise ValueError("grid origin/spacing must be finite")
        object.__setattr__(self, "origin", (float(ox), float(oy)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical coordinates of all cell centers as (X, Y), each (ny, nx)."""
        x = self.origin[0] + np.arange(self.nx) * self.spacing
        y = self.origin[1] + np.arange(self.ny) * self.spacing
        return np.meshgrid(x, y)

    def center_point(self) -> tuple[float, float]:
        """The grid's symmetry center (not necessarily a cell center)."""
        return (
            self.origin[0] + (self.nx - 1) / 2 * self.spacing,
            self.origin[1] + (self.ny - 1) / 2 * self.spacing,
        )


def _as_grid_array(a, grid: GridSpec, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1 and arr.size == grid.n_cells:
        arr = arr.reshape(grid.shape)
    if arr.shape != grid.shape:
        raise ValueError(f"{name} must have {grid.ny}x{grid.nx} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VectorField2D:
    """Per-cell displacement vectors (u, v) in millimeters on a GridSpec."""

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _as_grid_array(self.u, self.grid, "u"))
        object.__setattr__(self, "v", _as_grid_array(self.v, self.grid, "v"))

    def norms(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


@dataclass(frozen=True)
class ScalarField2D:
    """Per-cell scalar values on a GridSpec (potentials, divergence, curl...)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_grid_array(self.values, self.grid, "values"))


@dataclass(frozen=True)
class VectorSum:
    """Result of norm_of_sum: |Σv| plus the direction of Σv.

    direction is None when magnitude is exactly 0 — an explicit "undefined"
    flag so downstream code can distinguish no-shear from numerical noise.
    """

    magnitude: float
    direction: np.ndarray | None = _dc_field(default=None)


# ---------------------------------------------------------------------------
# differential operators


def divergence(f: VectorField2D) -> ScalarField2D:
    """du/dx + dv/dy; dimensionless (mm displacement per mm spacing)."""
    h = f.grid.spacing
    div = np.gradient(f.u, h, axis=1) + np.gradient(f.v, h, axis=0)
    return ScalarField2D(f.grid, div)


def curl_z(f: VectorField2D) -> ScalarField2D:
    """Scalar z-component of curl: dv/dx - du/dy."""
    h = f.grid.spacing
    curl = np.gradient(f.v, h, axis=1) - np.gradient(f.u, h, axis=0)
    return ScalarField2D(f.grid, curl)


def gradient(s: ScalarField2D) -> VectorField2D:
    """(ds/dx, ds/dy) with the same stencil conventions as divergence."""
    h = s.grid.spacing
    gy, gx = np.gradient(s.values, h)
    return VectorField2D(s.grid, gx, gy)


def rotate_quarter(f: VectorField2D) -> VectorField2D:
    """Per-cell counter-clockwise quarter turn: (u, v) -> (-v, u)."""
    return VectorField2D(f.grid, -f.v, f.u)


# ---------------------------------------------------------------------------
# aggregations


def sum_norms(f: VectorField2D) -> float:
    """Sum over all cells of the vector norm, mm."""
    return float(np.sum(f.norms()))


def norm_of_sum(f: VectorField2D) -> VectorSum:
    """Magnitude and direction of the total vector sum Σv."""
    s = np.array([np.sum(f.u), np.sum(f.v)])
    mag = float(np.hypot(s[0], s[1]))
    if mag == 0.0:
        return VectorSum(0.0, None)
    return VectorSum(mag, s / mag)


def moment_sum(f: VectorField2D, center: tuple[float, float]) -> float:
    """Total moment Σ (p - center) × v about ``center``, mm².

    Cross product is the z-component r_x*v_y - r_y*v_x, so counter-clockwise
    rotation about the center comes out positive.
    """
    cx, cy = center
    if not (np.isfinite(cx) and np.isfinite(cy)):
        raise ValueError("moment center must be finite")
    X, Y = f.grid.cell_centers()
    return float(np.sum((X - cx) * f.v - (Y - cy) * f.u))


# ---------------------------------------------------------------------------
# file format
#
# One metadata line `nx,ny,spacing,origin_x,origin_y`, then nx*ny data lines
# `i,j,u,v` (vector) or `i,j,value` (scalar) in scan order (i fastest).
# %.17g keeps the round-trip byte-identical.


class FieldFormatError(ValueError):
    """Malformed field file; carries the offending 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


def _fmt(x: float) -> str:
    return "%.17g" % x


def _parse_header(path, line: str) -> GridSpec:
    parts = line.strip().split(",")
    if len(parts) != 5:
        raise FieldFormatError(path, 1, f"expected 5 header values, got {len(parts)}")
    try:
        nx, ny = int(parts[0]), int(parts[1])
        spacing, ox, oy = (float(p) for p in parts[2:])
    except ValueError as e:
        raise FieldFormatError(path, 1, f"bad header value: {e}") from None
    try:
        return GridSpec(nx, ny, spacing, (ox, oy))
    except ValueError as e:
        raise FieldFormatError(path, 1, str(e)) from None


def _read_rows(path, n_value_cols: int):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FieldFormatError(path, 1, "empty file")
    grid = _parse_header(path, lines[0])
    expected = grid.n_cells
    if len(lines) - 1 != expected:
        raise FieldFormatError(
            path, len(lines), f"expected {expected} data lines, found {len(lines) - 1}"
        )
    cols = np.empty((expected, n_value_cols))
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2 + n_value_cols:
            raise FieldFormatError(path, ln, f"expected {2 + n_value_cols} columns, got {len(parts)}")
        try:
            i, j = int(parts[0]), int(parts[1])
            vals = [float(p) for p in parts[2:]]
        except ValueError as e:
            raise FieldFormatError(path, ln, f"bad value: {e}") from None
        k = ln - 2  # scan order is mandatory: i fastest, then j
        if (i, j) != (k % grid.nx, k // grid.nx):
            raise FieldFormatError(path, ln, f"cell ({i},{j}) out of scan order")
        if not all(np.isfinite(v) for v in vals):
            raise FieldFormatError(path, ln, "non-finite value")
        cols[k] = vals
    return grid, cols


def read_vector_field(path) -> VectorField2D:
    grid, cols = _read_rows(path, 2)
    return VectorField2D(grid, cols[:, 0], cols[:, 1])


def read_scalar_field(path) -> ScalarField2D:
    grid, cols = _read_rows(path, 1)
    return ScalarField2D(grid, cols[:, 0])


def _write_rows(path, grid: GridSpec, columns) -> None:
    lines = [
        ",".join([str(grid.nx), str(grid.ny), _fmt(grid.spacing), _fmt(grid.origin[0]), _fmt(grid.origin[1])])
    ]
    flats = [c.ravel() for c in columns]
    for k in range(grid.n_cells):
        i, j = k % grid.nx, k // grid.nx
        lines.append(",".join([str(i), str(j)] + [_fmt(c[k]) for c in flats]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_vector_field(path, f: VectorField2D) -> None:
    _write_rows(path, f.grid, (f.u, f.v))


def write_scalar_field(path, s: ScalarField2D) -> None:
    _write_rows(path, s.grid, (s.values,))
