"""Reduction of a displacement field to the scalar feature triple.

s_n  — sum of vector norms over the curl-free component (normal-load cue)
s_t  — norm of the vector sum over the RAW field, with its direction
       (tangential-load cue; uniform translation survives summation while
       diverging/rotational patterns cancel)
s_tau — signed sum of moments of the divergence-free component about its
       significant rotation centers (torsion cue)
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .field import VectorField2D, moment_sum, norm_of_sum, read_vector_field, sum_norms
from .nhhd import Decomposition, decompose, locate_rotation_centers

__all__ = [
    "FeatureTriple",
    "compute_features",
    "features_from_decomposition",
    "feature_crosstalk_report",
    "batch_features",
    "PATTERN_LABELS",
]

PATTERN_LABELS = ("divergence", "unidirectional", "rotational")


@dataclass(frozen=True)
class FeatureTriple:
    """The three scalars extracted from one displacement field.

    s_t_direction is None exactly when s_t == 0 (undefined direction).
    """

    s_n: float
    s_t: float
    s_t_direction: np.ndarray | None
    s_tau: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s_n, self.s_t, self.s_tau])


def features_from_decomposition(
    f: VectorField2D, dec: Decomposition, significance: float = 0.1
) -> FeatureTriple:
    """Feature triple given a precomputed decomposition of f."""
    total = norm_of_sum(f)  # raw field, not the harmonic component
    s_n = sum_norms(dec.d)
    centers = locate_rotation_centers(dec.R, significance)
    s_tau = sum(moment_sum(dec.r, c.position) for c in centers)
    return FeatureTriple(
        s_n=s_n, s_t=total.magnitude, s_t_direction=total.direction, s_tau=float(s_tau)
    )


def compute_features(
    f: VectorField2D, significance: float = 0.1, method: str = "auto"
) -> FeatureTriple:
    """Decompose f and reduce it to (s_n, s_t, s_tau)."""
    return features_from_decomposition(f, decompose(f, method=method), significance)


def feature_crosstalk_report(
    patterns: list[tuple[str, VectorField2D]], significance: float = 0.1
) -> np.ndarray:
    """3x3 response matrix of the feature pipeline on labeled pure patterns.

    Rows follow PATTERN_LABELS order; columns are (s_n, s_t, |s_tau|).  Each
    row is normalized by its matched feature (the diagonal), so diagonals are
    1.0 by construction and off-diagonals measure cross-talk.  Every label
    must appear exactly once.
    """
    by_label = {}
    for label, fld in patterns:
        if label not in PATTERN_LABELS:
            raise ValueError(f"unknown pattern label {label!r}")
        if label in by_label:
            raise ValueError(f"duplicate pattern label {label!r}")
        by_label[label] = fld
    missing = [l for l in PATTERN_LABELS if l not in by_label]
    if missing:
        raise ValueError(f"missing pattern labels: {missing}")

    mat = np.empty((3, 3))
    for row, label in enumerate(PATTERN_LABELS):
        t = compute_features(by_label[label], significance)
        mat[row] = np.abs([t.s_n, t.s_t, t.s_tau])
    diag = mat[np.arange(3), np.arange(3)]
    if np.any(diag == 0):
        raise ValueError("a pattern produced zero response on its own feature")
    return mat / diag[:, None]


def batch_features(manifest_path, out_csv, significance: float = 0.1) -> int:
    """Compute features for every field listed in a JSON manifest.

    The manifest is a JSON list of field-file paths.  Output columns:
    path,s_n,s_t,dir_x,dir_y,s_tau — direction cells left empty when the
    direction is undefined.  Returns the number of rows written.
    """
    with open(manifest_path, "r", encoding="utf-8") as fh:
        paths = json.load(fh)
    if not isinstance(paths, list):
        raise ValueError("manifest must be a JSON list of field-file paths")
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "s_n", "s_t", "dir_x", "dir_y", "s_tau"])
        for path in paths:
            t = compute_features(read_vector_field(path), significance)
            if t.s_t_direction is None:
                dx, dy = "", ""
            else:
                dx, dy = ("%.17g" % t.s_t_direction[0], "%.17g" % t.s_t_direction[1])
            writer.writerow(["%s" % path, "%.17g" % t.s_n, "%.17g" % t.s_t, dx, dy, "%.17g" % t.s_tau])
    return len(paths)
