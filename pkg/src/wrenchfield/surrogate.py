"""Analytic displacement-field generator standing in for elastomer simulation.

Single-axis loads map to the three canonical marker-motion patterns:

* normal force  -> diverging radial bump
* tangential    -> near-uniform translation under a wide Gaussian envelope
* torsion       -> rotational bump (counter-clockwise for positive torsion)

The diverging/rotational patterns are produced by sampling a smooth scalar
potential and taking the *discrete* gradient (or its quarter-turn).  Because
the discrete x- and y-stencils commute, such fields have exactly zero
discrete curl (resp. divergence) on every cell, so they decompose cleanly
and the whole load -> feature map is linear to machine precision — which is
what makes them usable as ground-truth oracles.

The bump profile is rho(r) = (r/R) * exp((1 - (r/R)^2)/2): unit peak at
r = R, zero at the center, and Gaussian decay (~2% beyond 3.3 R) so patterns
die out before the grid boundary.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .field import GridSpec, ScalarField2D, VectorField2D, gradient, rotate_quarter, write_vector_field, read_vector_field

__all__ = [
    "LoadTriple",
    "SurrogateConfig",
    "LoadRanges",
    "DatasetSample",
    "gen_divergence_pattern",
    "gen_unidirectional_pattern",
    "gen_rotational_pattern",
    "render_load",
    "gen_calibration_dataset",
    "export_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class LoadTriple:
    """One contact load: normal force (N), tangential force vector (N),
    torsion about the surface normal (N·mm), applied at contact_center (mm)
    with characteristic contact_radius (mm)."""

    f_n: float
    f_t: tuple[float, float]
    f_tau: float
    contact_center: tuple[float, float]
    contact_radius: float

    def __post_init__(self):
        if self.f_n < 0:
            raise ValueError(f"normal force must be >= 0, got {self.f_n}")
        if not (self.contact_radius > 0):
            raise ValueError(f"contact_radius must be > 0, got {self.contact_radius}")
        object.__setattr__(self, "f_t", (float(self.f_t[0]), float(self.f_t[1])))
        object.__setattr__(self, "contact_center", tuple(map(float, self.contact_center)))

    @property
    def f_t_magnitude(self) -> float:
        return float(np.hypot(*self.f_t))


@dataclass(frozen=True)
class SurrogateConfig:
    """Compliance gains (force -> displacement amplitude), envelope width,
    noise level, and seed.

    mu_max, when set, enables the physical-consistency check
    |f_t| <= mu_max * f_n at render time.  saturation, when set, replaces
    each pattern amplitude a by saturation * tanh(a / saturation).
    """

    k_n: float = 0.3  # mm per N of normal force
    k_t: float = 0.2  # mm per N of tangential force
    k_tau: float = 0.05  # mm per N·mm of torsion
    falloff_sigma: float = 24.0  # mm, unidirectional envelope width
    noise_sigma: float = 0.0  # mm, i.i.d. per-component Gaussian
    seed: int = 0
    mu_max: float | None = None
    saturation: float | None = None

    def __post_init__(self):
        if min(self.k_n, self.k_t, self.k_tau) <= 0:
            raise ValueError("compliance gains must be > 0")
        if not (self.falloff_sigma > 0):
            raise ValueError("falloff_sigma must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _bump_potential(grid: GridSpec, center, radius: float, amplitude: float) -> ScalarField2D:
    # potential whose radial derivative is amplitude * rho(r)
    X, Y = grid.cell_centers()
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    pot = -amplitude * radius * np.exp((1 - r2 / radius**2) / 2)
    return ScalarField2D(grid, pot)


def gen_divergence_pattern(
    cfg: SurrogateConfig, center, amplitude: float, radius: float, grid: GridSpec
) -> VectorField2D:
    """Radial diverging bump: vectors point away from center, peak ~amplitude
    at distance ~radius, exactly zero at the center cell."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    return gradient(_bump_potential(grid, center, radius, amplitude))


def gen_rotational_pattern(
    cfg: SurrogateConfig, center, amplitude: float, radius: float, grid: GridSpec
) -> VectorField2D:
    """Tangential bump circulating about center; positive amplitude is
    counter-clockwise (positive moment), negative flips the sense."""
    return rotate_quarter(gradient(_bump_potential(grid, center, radius, amplitude)))


def gen_unidirectional_pattern(
    cfg: SurrogateConfig, center, direction, amplitude: float, grid: GridSpec
) -> VectorField2D:
    """Constant direction scaled by a Gaussian envelope peaking at center.

    With falloff_sigma = inf the envelope is identically 1 (pure uniform
    translation, which is exactly harmonic on the grid).
    """
    direction = np.asarray(direction, dtype=float)
    nrm = np.hypot(direction[0], direction[1])
    if not np.isclose(nrm, 1.0, atol=1e-9):
        raise ValueError(f"direction must be a unit vector, |dir| = {nrm}")
    X, Y = grid.cell_centers()
    if np.isinf(cfg.falloff_sigma):
        env = np.full(grid.shape, amplitude)
    else:
        r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
        env = amplitude * np.exp(-r2 / (2 * cfg.falloff_sigma**2))
    return VectorField2D(grid, env * direction[0], env * direction[1])


def _saturate(amp: float, saturation: float | None) -> float:
    if saturation is None or amp == 0.0:
        return amp
    return float(saturation * np.tanh(amp / saturation))


def render_load(
    cfg: SurrogateConfig, load: LoadTriple, grid: GridSpec, rng: np.random.Generator | None = None
) -> VectorField2D:
    """Superpose the three single-axis patterns for a load, plus seeded noise.

    Deterministic for a given cfg.seed (or caller-provided generator).
    Raises ValueError when physical-consistency mode is on and the load lies
    outside the mu_max friction cone.
    """
    if cfg.mu_max is not None and load.f_t_magnitude > cfg.mu_max * load.f_n + 1e-12:
        raise ValueError(
            f"load violates physical consistency: |f_t|={load.f_t_magnitude:.6g} N "
            f"> mu_max*f_n={cfg.mu_max * load.f_n:.6g} N"
        )
    c = load.contact_center
    u = np.zeros(grid.shape)
    v = np.zeros(grid.shape)

    a_n = _saturate(cfg.k_n * load.f_n, cfg.saturation)
    if a_n != 0.0:
        p = gen_divergence_pattern(cfg, c, a_n, load.contact_radius, grid)
        u, v = u + p.u, v + p.v

    ft_mag = load.f_t_magnitude
    a_t = _saturate(cfg.k_t * ft_mag, cfg.saturation)
    if a_t != 0.0:
        direction = np.array(load.f_t) / ft_mag
        p = gen_unidirectional_pattern(cfg, c, direction, a_t, grid)
        u, v = u + p.u, v + p.v

    a_tau = _saturate(cfg.k_tau * load.f_tau, cfg.saturation)
    if a_tau != 0.0:
        p = gen_rotational_pattern(cfg, c, a_tau, load.contact_radius, grid)
        u, v = u + p.u, v + p.v

    if cfg.noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        u = u + rng.normal(0.0, cfg.noise_sigma, grid.shape)
        v = v + rng.normal(0.0, cfg.noise_sigma, grid.shape)
    return VectorField2D(grid, u, v)


# ---------------------------------------------------------------------------
# calibration datasets


@dataclass(frozen=True)
class LoadRanges:
    """Sampling ranges for dataset generation (uniform draws).

    Per-object draws: contact radius, envelope sigma, and multiplicative gain
    jitter (one multiplier per gain, within ±gain_jitter).  Per-sample draws:
    the load triple, tangential angle, optional contact-center jitter, and
    outlier injection (field scaled by a gross factor, truth left intact).
    """

    f_n: tuple[float, float] = (0.5, 10.0)
    f_t_mag: tuple[float, float] = (0.0, 4.0)
    f_t_angle: tuple[float, float] = (0.0, 2 * np.pi)
    f_tau: tuple[float, float] = (-30.0, 30.0)
    radius: tuple[float, float] = (2.5, 2.5)
    sigma: tuple[float, float] = (24.0, 24.0)
    gain_jitter: float = 0.15
    center_jitter: float = 0.0
    outlier_fraction: float = 0.0
    outlier_scale: tuple[float, float] = (3.0, 6.0)


@dataclass(frozen=True)
class DatasetSample:
    field: VectorField2D
    load: LoadTriple
    object_id: int
    outlier: bool = False


def _draw(rng: np.random.Generator, lo: float, hi: float) -> float:
    # zero-width ranges must reproduce exactly (inf-width envelopes included)
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def gen_calibration_dataset(
    cfg: SurrogateConfig,
    n_objects: int,
    per_object: int,
    ranges: LoadRanges,
    seed: int,
    grid: GridSpec,
) -> list[DatasetSample]:
    """Draw per-object geometry/gain perturbations once, then sample loads.

    Deterministic: object and sample RNG streams are spawned from ``seed``,
    so the same arguments always produce bit-identical fields.
    """
    if n_objects < 1 or per_object < 1:
        raise ValueError("n_objects and per_object must be >= 1")
    samples: list[DatasetSample] = []
    root = np.random.SeedSequence(seed)
    for object_id, obj_seq in enumerate(root.spawn(n_objects)):
        rng_obj = np.random.default_rng(obj_seq)
        radius = _draw(rng_obj, *ranges.radius)
        sigma = _draw(rng_obj, *ranges.sigma)
        g = ranges.gain_jitter
        mults = [1.0 + _draw(rng_obj, -g, g) for _ in range(3)]
        obj_cfg = dataclasses.replace(
            cfg,
            k_n=cfg.k_n * mults[0],
            k_t=cfg.k_t * mults[1],
            k_tau=cfg.k_tau * mults[2],
            falloff_sigma=sigma,
        )
        cx0, cy0 = grid.center_point()
        for samp_seq in obj_seq.spawn(per_object):
            rng_s = np.random.default_rng(samp_seq)
            f_n = _draw(rng_s, *ranges.f_n)
            mag = _draw(rng_s, *ranges.f_t_mag)
            ang = _draw(rng_s, *ranges.f_t_angle)
            f_tau = _draw(rng_s, *ranges.f_tau)
            cj = ranges.center_jitter
            center = (cx0 + _draw(rng_s, -cj, cj), cy0 + _draw(rng_s, -cj, cj))
            load = LoadTriple(
                f_n=f_n,
                f_t=(mag * np.cos(ang), mag * np.sin(ang)),
                f_tau=f_tau,
                contact_center=center,
                contact_radius=radius,
            )
            fld = render_load(obj_cfg, load, grid, rng=rng_s)
            outlier = ranges.outlier_fraction > 0 and rng_s.uniform() < ranges.outlier_fraction
            if outlier:
                scale = _draw(rng_s, *ranges.outlier_scale)
                fld = VectorField2D(grid, fld.u * scale, fld.v * scale)
            samples.append(DatasetSample(field=fld, load=load, object_id=object_id, outlier=outlier))
    return samples


def export_dataset(samples: list[DatasetSample], dirpath) -> tuple[str, str]:
    """Write field CSVs plus manifest.json; returns (manifest path, sha256).

    The hash covers the manifest and every field file, so identical
    generation arguments yield an identical digest.
    """
    os.makedirs(dirpath, exist_ok=True)
    entries = []
    digest = hashlib.sha256()
    for idx, s in enumerate(samples):
        name = f"field_{idx:04d}.csv"
        path = os.path.join(dirpath, name)
        write_vector_field(path, s.field)
        entries.append(
            {
                "path": name,
                "f_n": s.load.f_n,
                "f_t": list(s.load.f_t),
                "f_tau": s.load.f_tau,
                "contact_center": list(s.load.contact_center),
                "contact_radius": s.load.contact_radius,
                "object_id": s.object_id,
                "outlier": s.outlier,
            }
        )
    manifest_path = os.path.join(dirpath, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump({"samples": entries}, fh, indent=1, sort_keys=True)
    digest.update(open(manifest_path, "rb").read())
    for e in entries:
        digest.update(open(os.path.join(dirpath, e["path"]), "rb").read())
    return manifest_path, digest.hexdigest()


def load_dataset(dirpath) -> list[DatasetSample]:
    """Read back a dataset directory written by export_dataset."""
    manifest_path = os.path.join(dirpath, "manifest.json")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    samples = []
    for e in manifest["samples"]:
        fld = read_vector_field(os.path.join(dirpath, e["path"]))
        load = LoadTriple(
            f_n=e["f_n"],
            f_t=tuple(e["f_t"]),
            f_tau=e["f_tau"],
            contact_center=tuple(e["contact_center"]),
            contact_radius=e["contact_radius"],
        )
        samples.append(
            DatasetSample(field=fld, load=load, object_id=e["object_id"], outlier=e.get("outlier", False))
        )
    return samples
