"""Feature-based wrench calibration, clean versus corrupted data.

Round 1: a noiseless dataset shows the feature triple is exactly linear in
the applied wrench — cross-validated RMSE collapses to numerical noise.

Round 2: sensor-like corruption (per-cell noise, per-object gain spread,
a fraction of grossly scaled outlier frames) is injected and the robust
line fit on decomposition features is compared against a large MLP trained
on raw fields.  The corrupted frames poison every training fold; scoring is
on clean frames.  Shrink N_OBJECTS/PER_OBJECT for a faster run.
"""

import numpy as np

from wrenchfield import (
    GridSpec,
    LoadRanges,
    ModelSpec,
    SurrogateConfig,
    cross_validate,
    dataset_to_arrays,
    gen_calibration_dataset,
)

N_OBJECTS = 6
PER_OBJECT = 20  # 50 reproduces the acceptance-scale run (a few minutes)
GRID = GridSpec(24, 24, 1.0)
AXES = ("f_n [N]", "f_t [N]", "f_tau [N mm]")


def table(title, reports):
    print(f"\n{title}")
    print(f"{'method':<10} {'params':>8} " + " ".join(f"{a:>12}" for a in AXES))
    for name, rep in reports:
        cells = " ".join(f"{v:12.4g}" for v in rep.rmse_mean)
        print(f"{name:<10} {rep.n_params:>8} {cells}")


def main():
    ranges = LoadRanges(gain_jitter=0.0)
    clean_cfg = SurrogateConfig(falloff_sigma=np.inf)
    clean_ranges = LoadRanges(sigma=(np.inf, np.inf), gain_jitter=0.0)

    print(f"round 1: {N_OBJECTS} objects x {PER_OBJECT} noiseless samples")
    samples = gen_calibration_dataset(
        clean_cfg, N_OBJECTS, PER_OBJECT, clean_ranges, seed=7, grid=GRID
    )
    feats, _, truths, objs = dataset_to_arrays(samples)
    rep = cross_validate(feats, truths, objs, ModelSpec("ransac"), k_by_object=N_OBJECTS)
    table("by-object cross-validated RMSE (noiseless):", [("ransac", rep)])
    spans = truths.max(axis=0) - truths.min(axis=0)
    print("as fraction of range:", " ".join(f"{v:.1e}" for v in rep.rmse_mean / spans))

    print(f"\nround 2: same shape with noise + gain spread + 10% outlier frames")
    ranges = LoadRanges(gain_jitter=0.15, outlier_fraction=0.10)
    pilot = gen_calibration_dataset(
        SurrogateConfig(), N_OBJECTS, PER_OBJECT, ranges, seed=11, grid=GRID
    )
    med = np.median([np.mean(np.hypot(s.field.u, s.field.v)) for s in pilot])
    cfg = SurrogateConfig(noise_sigma=0.05 * float(med))
    samples = gen_calibration_dataset(cfg, N_OBJECTS, PER_OBJECT, ranges, seed=11, grid=GRID)
    feats, raws, truths, objs = dataset_to_arrays(samples)
    clean = np.array([not s.outlier for s in samples])

    reports = []
    for name, spec, inputs in [
        ("ransac", ModelSpec("ransac"), feats),
        ("mlp", ModelSpec("mlp", hidden=(10,)), feats),
        ("mlp-raw", ModelSpec("mlp-raw", hidden=(128, 32), max_iter=80), raws),
    ]:
        print(f"  fitting {name} ...")
        reports.append(
            (
                name,
                cross_validate(
                    inputs, truths, objs, spec, k_by_object=N_OBJECTS, eval_mask=clean
                ),
            )
        )
    table("by-object cross-validated RMSE (corrupted train, clean scoring):", reports)
    print(
        "\nthe line on decomposition features shrugs off the outliers the raw-field"
        "\nnet has to average in; torsion is the closest race (rotation-center"
        "\nlocalization is the noisiest feature)."
    )


if __name__ == "__main__":
    main()
