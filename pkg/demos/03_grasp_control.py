"""Two-finger holding simulation: band controller on, off, and in-the-loop.

The plant hangs a growing weight from an object pinched by two spring-loaded
fingertips.  Without control the static friction limit is crossed part way
up the ramp and the object breaks away.  With the band controller the grip
tightens just enough to keep both tangential/normal ratios inside the band.
The third run closes the loop through the full sensing stack: plant truth is
rendered to a displacement field, decomposed, reduced to features, and read
back through calibrated linear models before the controller sees it.
"""

import os

import numpy as np

from wrenchfield import (
    ControllerConfig,
    FrictionModel,
    GridSpec,
    LinearModel,
    LoadTriple,
    PlantParams,
    SurrogateConfig,
    above_band_runs,
    compute_features,
    make_pipeline_estimator,
    plot_ratio_trace,
    read_trace_csv,
    render_load,
    simulate_holding,
    write_trace_csv,
)

OUT = os.path.join(os.environ.get("WRENCHFIELD_OUT", "demo_out"), "grasp")

PLANT = PlantParams(
    stiffness=2.0,  # N/mm per finger
    object_width=20.0,  # mm
    mass=0.2,  # kg
    friction=FrictionModel(mu_static=0.6, mu_dynamic=0.45, mu_nominal=0.5),
)
CTL = ControllerConfig(mu=0.5, band=0.1, step=0.1, period=0.05)
SCHEDULE = [(0.0, 1.0), (20.0, 8.0)]  # load ramp, N


def summarize(tag, res):
    if res.failed:
        print(f"{tag:<18} FAILED at t = {res.fail_time:.2f} s")
        return
    hi = CTL.mu + CTL.band / 2
    runs = above_band_runs([s.ratio_l for s in res.trace], hi)
    final = res.trace[-1]
    print(
        f"{tag:<18} held; final f_n = {final.f_left.f_n:.2f} N at W = "
        f"{final.external_load:.1f} N, longest excursion {max(runs, default=0)} samples"
    )


def two_point_models(cfg, grid):
    # the rendered features are linear in the load at fixed contact geometry,
    # so two samples per axis calibrate exactly
    center = grid.center_point()

    def feats(f_n, f_t, f_tau):
        load = LoadTriple(
            f_n=f_n, f_t=(f_t, 0.0), f_tau=f_tau, contact_center=center, contact_radius=2.5
        )
        return compute_features(render_load(cfg, load, grid), method="fft")

    def line(x0, y0, x1, y1):
        slope = (y1 - y0) / (x1 - x0)
        return LinearModel(slope, y0 - slope * x0, np.ones(2, dtype=bool))

    return {
        "f_n": line(feats(1, 0, 0).s_n, 1.0, feats(5, 0, 0).s_n, 5.0),
        "f_t": line(feats(0, 1, 0).s_t, 1.0, feats(0, 5, 0).s_t, 5.0),
        "f_tau": line(feats(0, 0, 10).s_tau, 10.0, feats(0, 0, 40).s_tau, 40.0),
    }


def main():
    os.makedirs(OUT, exist_ok=True)

    off = simulate_holding(SCHEDULE, PLANT, None, duration=20.0, dt=0.01, d_g0=19.0)
    summarize("controller off", off)

    on = simulate_holding(SCHEDULE, PLANT, CTL, duration=20.0, dt=0.01, d_g0=19.0)
    summarize("controller on", on)

    grid = GridSpec(24, 24, 1.0)
    cfg = SurrogateConfig(falloff_sigma=np.inf, noise_sigma=0.002)
    est = make_pipeline_estimator(two_point_models(cfg, grid), cfg, grid, seed=3)
    loop = simulate_holding(
        SCHEDULE, PLANT, CTL, duration=20.0, dt=0.05, d_g0=19.0, estimator=est
    )
    summarize("sensing in loop", loop)

    for tag, res in (("off", off), ("on", on), ("loop", loop)):
        path = os.path.join(OUT, f"trace_{tag}.csv")
        write_trace_csv(res, path)
        plot_ratio_trace(
            read_trace_csv(path), CTL.mu, CTL.band, os.path.join(OUT, f"ratio_{tag}.svg")
        )
    print(f"\ntraces and ratio plots written to {OUT}/")


if __name__ == "__main__":
    main()
