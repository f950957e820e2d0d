"""Natural Helmholtz-Hodge decomposition of 2D displacement fields.

The input field f is split as f = d + r + h:

* d = grad(D), curl-free, with Laplacian(D) = div(f)
* r = J grad(R), divergence-free, with Laplacian(R) = -div(J f)
  (J the quarter-turn (u, v) -> (-v, u))
* h = f - d - r, the harmonic remainder (never solved for, so the
  reconstruction identity holds exactly by arithmetic)

The two Poisson problems are solved with the free-space Green's function
G(x) = ln|x| / 2π, i.e. no boundary conditions are imposed; whatever the
finite-domain convolution cannot attribute to the potentials lands in h.
A direct O(N²) convolution with a fixed per-cell summation order is the
reference solver; a zero-padded FFT convolution computes the same linear
convolution and is used for large grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import (
    GridSpec,
    ScalarField2D,
    VectorField2D,
    divergence,
    gradient,
    rotate_quarter,
    write_scalar_field,
    write_vector_field,
)

__all__ = [
    "CELL_AVERAGE_C0",
    "Decomposition",
    "RotationCenter",
    "SolverLimitError",
    "greens_kernel",
    "solve_poisson_freespace",
    "decompose",
    "locate_rotation_centers",
    "export_decomposition",
]

# Mean of ln|x| over a unit square centered on the singularity:
# pi/4 - 3/2 - ln(2)/2.  Verified against numerical quadrature in the test
# suite before being trusted here; the regularized self-weight of a cell of
# side h is then (ln h + C0) / 2pi.
CELL_AVERAGE_C0 = np.pi / 4 - 1.5 - np.log(2) / 2


class SolverLimitError(ValueError):
    """Grid too large for the direct convolution path (use the FFT path)."""


@dataclass(frozen=True)
class Decomposition:
    """Curl-free / divergence-free / harmonic components plus potentials."""

    d: VectorField2D
    r: VectorField2D
    h: VectorField2D
    D: ScalarField2D
    R: ScalarField2D


@dataclass(frozen=True)
class RotationCenter:
    """A significant extremum of the rotational potential R.

    position: physical coordinates of the extremal cell center (mm)
    polarity: "positive" for the global max of R, "negative" for the min
    potential_value: R at that cell (mm²)
    """

    position: tuple[float, float]
    polarity: str
    potential_value: float


def greens_kernel(grid: GridSpec) -> np.ndarray:
    """Sampled G(p - q) for all offsets, shape (2*ny-1, 2*nx-1).

    Entry [ny-1+dj, nx-1+di] is G evaluated at offset (di, dj) cells; the
    zero-offset entry carries the cell-averaged self-term.
    """
    h = grid.spacing
    dy, dx = np.mgrid[-(grid.ny - 1) : grid.ny, -(grid.nx - 1) : grid.nx]
    rad = np.hypot(dx, dy) * h
    with np.errstate(divide="ignore"):
        ker = np.log(rad) / (2 * np.pi)
    ker[grid.ny - 1, grid.nx - 1] = (np.log(h) + CELL_AVERAGE_C0) / (2 * np.pi)
    return ker


def _solve_direct(rhs: np.ndarray, grid: GridSpec) -> np.ndarray:
    ker = greens_kernel(grid)
    ny, nx = grid.shape
    out = np.empty_like(rhs)
    # window ker[j:j+ny, i:i+nx] reversed puts G((i,j)-(iq,jq)) against rhs[jq,iq];
    # per-cell np.sum keeps the summation order fixed regardless of threading
    for j in range(ny):
        for i in range(nx):
            out[j, i] = np.sum(ker[j : j + ny, i : i + nx][::-1, ::-1] * rhs)
    return out * grid.spacing**2


def _solve_fft(rhs: np.ndarray, grid: GridSpec) -> np.ndarray:
    ker = greens_kernel(grid)
    ny, nx = grid.shape
    py, px = 2 * ny - 1, 2 * nx - 1  # zero padding for a linear (not circular) convolution
    spec = np.fft.rfft2(rhs, s=(py, px)) * np.fft.rfft2(ker, s=(py, px))
    full = np.fft.irfft2(spec, s=(py, px))
    return full[ny - 1 : ny - 1 + ny, nx - 1 : nx - 1 + nx] * grid.spacing**2


def solve_poisson_freespace(
    rhs: ScalarField2D, method: str = "auto", direct_limit: int = 2048
) -> ScalarField2D:
    """Free-space solution phi with phi(p) = Σ_q G(p - q) rhs(q) spacing².

    method: "direct" (reference O(N²) summation), "fft" (identical linear
    convolution via zero-padded FFT), or "auto" (direct up to direct_limit
    cells, fft beyond).  "direct" on a grid larger than direct_limit raises
    SolverLimitError.
    """
    n = rhs.grid.n_cells
    if method == "auto":
        method = "direct" if n <= direct_limit else "fft"
    if method == "direct":
        if n > direct_limit:
            raise SolverLimitError(
                f"{rhs.grid.nx}x{rhs.grid.ny} grid exceeds direct-convolution limit "
                f"{direct_limit}; use method='fft'"
            )
        phi = _solve_direct(rhs.values, rhs.grid)
    elif method == "fft":
        phi = _solve_fft(rhs.values, rhs.grid)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    return ScalarField2D(rhs.grid, phi)


def decompose(f: VectorField2D, method: str = "auto", direct_limit: int = 2048) -> Decomposition:
    """Split f into curl-free d, divergence-free r, and harmonic h."""
    D = solve_poisson_freespace(divergence(f), method, direct_limit)
    rot_rhs = divergence(rotate_quarter(f))
    R = solve_poisson_freespace(
        ScalarField2D(f.grid, -rot_rhs.values), method, direct_limit
    )
    d = gradient(D)
    r = rotate_quarter(gradient(R))
    h = VectorField2D(f.grid, f.u - d.u - r.u, f.v - d.v - r.v)
    return Decomposition(d=d, r=r, h=h, D=D, R=R)


def locate_rotation_centers(
    R: ScalarField2D, significance: float = 0.1
) -> list[RotationCenter]:
    """Significant extrema of R: candidate max and min cells.

    A candidate is kept only if |R| there is at least ``significance`` times
    the global max |R|.  Ties resolve to the lowest scan-order cell (numpy's
    argmax/argmin on the row-major array).  Returns [] when R is identically
    zero; if max and min land on the same cell (constant field) only one
    center is emitted.
    """
    if not 0 <= significance <= 1:
        raise ValueError(f"significance must be in [0,1], got {significance}")
    vals = R.values
    peak = np.max(np.abs(vals))
    if peak == 0.0:
        return []
    grid = R.grid
    centers: list[RotationCenter] = []
    seen: set[int] = set()
    for flat, polarity in ((int(np.argmax(vals)), "positive"), (int(np.argmin(vals)), "negative")):
        value = float(vals.flat[flat])
        if abs(value) < significance * peak or flat in seen:
            continue
        seen.add(flat)
        j, i = divmod(flat, grid.nx)
        pos = (grid.origin[0] + i * grid.spacing, grid.origin[1] + j * grid.spacing)
        centers.append(RotationCenter(position=pos, polarity=polarity, potential_value=value))
    return centers


def export_decomposition(dec: Decomposition, basepath) -> list[str]:
    """Write the five fields next to ``basepath`` with _d/_r/_h/_D/_R suffixes."""
    base = str(basepath)
    if base.endswith(".csv"):
        base = base[:-4]
    paths = []
    for suffix, fld, writer in (
        ("_d", dec.d, write_vector_field),
        ("_r", dec.r, write_vector_field),
        ("_h", dec.h, write_vector_field),
        ("_D", dec.D, write_scalar_field),
        ("_R", dec.R, write_scalar_field),
    ):
        path = f"{base}{suffix}.csv"
        writer(path, fld)
        paths.append(path)
    return paths
