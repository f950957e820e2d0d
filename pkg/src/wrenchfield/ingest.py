"""Front-end: tracked marker centroids -> regular-grid displacement fields.

Tracking is per-track nearest-neighbor with a distance gate — no global
assignment.  A track whose nearest detection is farther than the gate simply
keeps its previous position (detection dropouts freeze a track instead of
corrupting it).  Displacements are always measured against the first frame.

Gridding is component-wise Gaussian-RBF interpolation with a small ridge
term for conditioning.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .field import GridSpec, VectorField2D

__all__ = [
    "MarkerSet",
    "TrackState",
    "init_tracks",
    "track_update",
    "displacements",
    "rbf_interpolate",
    "read_marker_stream",
]


def _as_points(a, name: str) -> np.ndarray:
    pts = np.asarray(a, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must be an (n, 2) array of points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


@dataclass(frozen=True)
class MarkerSet:
    """Detected marker centroids for one frame (mm)."""

    positions: np.ndarray
    min_separation: float = 0.0

    def __post_init__(self):
        pts = _as_points(self.positions, "positions").copy()
        if self.min_separation > 0 and len(pts) > 1:
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            d[np.diag_indices(len(pts))] = np.inf
            if np.min(d) < self.min_separation:
                a, b = np.unravel_index(np.argmin(d), d.shape)
                raise ValueError(
                    f"markers {a} and {b} are {d[a, b]:.4g} mm apart, "
                    f"closer than min_separation {self.min_separation}"
                )
        pts.setflags(write=False)
        object.__setattr__(self, "positions", pts)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class TrackState:
    """Anchors (first-frame positions), current positions, liveness flags."""

    init_positions: np.ndarray
    current_positions: np.ndarray
    alive: np.ndarray

    def __post_init__(self):
        init = _as_points(self.init_positions, "init_positions").copy()
        cur = _as_points(self.current_positions, "current_positions").copy()
        alive = np.asarray(self.alive, dtype=bool).copy()
        if not (len(init) == len(cur) == len(alive)):
            raise ValueError("init_positions, current_positions, alive must have equal length")
        for arr, name in ((init, "init_positions"), (cur, "current_positions"), (alive, "alive")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def init_tracks(first_frame: MarkerSet) -> TrackState:
    """Start one track per detection; displacements are measured from here."""
    pts = first_frame.positions
    return TrackState(pts, pts, np.ones(len(pts), dtype=bool))


def track_update(state: TrackState, detections: MarkerSet, max_step: float) -> TrackState:
    """Advance each live track to its nearest detection within max_step.

    Tracks farther than the gate from every detection stay put; an empty
    detection set leaves the state unchanged.  Two tracks may legitimately
    claim the same detection when it is genuinely nearest to both.
    """
    if not (max_step > 0):
        raise ValueError("max_step must be > 0")
    det = detections.positions
    if len(det) == 0:
        return state
    cur = state.current_positions.copy()
    # nearest detection per track; gate on the distance
    d = np.linalg.norm(cur[:, None, :] - det[None, :, :], axis=-1)
    nearest = np.argmin(d, axis=1)
    ok = state.alive & (d[np.arange(len(cur)), nearest] <= max_step)
    cur[ok] = det[nearest[ok]]
    return TrackState(state.init_positions, cur, state.alive)


def displacements(state: TrackState) -> tuple[np.ndarray, np.ndarray]:
    """Per live track: (anchor position, current - anchor vector)."""
    m = state.alive
    return state.init_positions[m], state.current_positions[m] - state.init_positions[m]


def rbf_interpolate(
    positions: np.ndarray,
    vectors: np.ndarray,
    grid: GridSpec,
    kernel_epsilon: float,
    ridge: float | None = None,
) -> VectorField2D:
    """Gaussian-RBF interpolation of scattered vectors onto the grid.

    kernel exp(-r² / 2ε²); ridge defaults to 1e-8·n on the unit kernel
    diagonal.  With ridge = 0 the interpolant reproduces the samples to
    machine precision.  Component-wise linear solve, so the result is linear
    in the sample vectors.
    """
    P = _as_points(positions, "positions")
    V = np.asarray(vectors, dtype=float)
    if V.shape != P.shape:
        raise ValueError(f"vectors shape {V.shape} must match positions shape {P.shape}")
    n = len(P)
    if n < 3:
        raise ValueError(f"need at least 3 samples, got {n}")
    if not (kernel_epsilon > 0):
        raise ValueError("kernel_epsilon must be > 0")

    d2 = np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1)
    off = d2 + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    dup = np.argwhere(off == 0.0)
    if len(dup):
        pairs = sorted({(min(a, b), max(a, b)) for a, b in dup})
        raise ValueError(f"duplicate sample positions (singular system) at index pairs {pairs}")
    if np.linalg.matrix_rank(P - P.mean(axis=0), tol=1e-9 * max(1.0, np.abs(P).max())) < 2:
        raise ValueError("sample positions are collinear")

    if ridge is None:
        ridge = 1e-8 * n
    K = np.exp(-d2 / (2 * kernel_epsilon**2)) + ridge * np.eye(n)
    w = np.linalg.solve(K, V)  # (n, 2): one weight column per component

    X, Y = grid.cell_centers()
    Q = np.column_stack([X.ravel(), Y.ravel()])
    d2q = np.sum((Q[:, None, :] - P[None, :, :]) ** 2, axis=-1)
    out = np.exp(-d2q / (2 * kernel_epsilon**2)) @ w
    return VectorField2D(grid, out[:, 0].reshape(grid.shape), out[:, 1].reshape(grid.shape))


def read_marker_stream(path) -> list[tuple[int, MarkerSet]]:
    """Parse a marker stream: rows of frame_idx,marker_x,marker_y.

    Accepts a directory of per-frame CSVs (lexicographic order) or a single
    CSV holding several frames; frames come back sorted by frame index.
    """
    if os.path.isdir(path):
        files = sorted(
            os.path.join(path, f) for f in os.listdir(path) if f.endswith(".csv")
        )
    else:
        files = [path]
    frames: dict[int, list[tuple[float, float]]] = {}
    for fp in files:
        with open(fp, "r", encoding="utf-8") as fh:
            for ln, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if row[0].strip().lower() == "frame_idx":  # tolerated column-name header
                    continue
                if len(row) != 3:
                    raise ValueError(f"{fp}:{ln}: expected frame_idx,marker_x,marker_y")
                try:
                    idx = int(row[0])
                    x, y = float(row[1]), float(row[2])
                except ValueError as e:
                    raise ValueError(f"{fp}:{ln}: {e}") from None
                frames.setdefault(idx, []).append((x, y))
    return [(idx, MarkerSet(np.array(frames[idx]))) for idx in sorted(frames)]
