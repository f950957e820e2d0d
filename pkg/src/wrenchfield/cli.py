"""Command-line surface for the tactile wrench-estimation pipeline.

Every subcommand resolves an output directory (``--out``, falling back to
$WRENCHFIELD_OUT or the working directory), writes its artifacts there, and
drops a ``run.json`` echoing the fully resolved configuration so any run can
be reproduced from its output directory alone.

Exit codes: 0 success, 2 parse/config error, 3 domain failure (a grasp that
breaks, a fit that finds no consensus).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import calib, features, grasp, ingest, nhhd, surrogate
from .field import FieldFormatError, GridSpec, VectorField2D, read_vector_field, write_vector_field

ENV_OUT = "WRENCHFIELD_OUT"


def _resolve_out(args, default_name: str) -> str:
    root = os.environ.get(ENV_OUT, ".")
    out = args.out if args.out else os.path.join(root, default_name)
    os.makedirs(out, exist_ok=True)
    return out


def _write_run(out: str, args) -> None:
    doc = {k: v for k, v in vars(args).items() if k != "func"}
    doc["out"] = out
    with open(os.path.join(out, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _fmt_cell(v) -> str:
    return "%.17g" % v if isinstance(v, float) else str(v)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[h]) for h in header) + "\r\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    out = _resolve_out(args, "dataset")
    cfg = surrogate.SurrogateConfig(
        falloff_sigma=args.falloff_sigma, noise_sigma=args.noise_sigma, seed=args.seed
    )
    ranges = surrogate.LoadRanges(
        radius=(args.radius, args.radius),
        sigma=(args.falloff_sigma, args.falloff_sigma),
        gain_jitter=args.gain_jitter,
        outlier_fraction=args.outlier_fraction,
    )
    grid = GridSpec(args.nx, args.ny, args.spacing)
    samples = surrogate.gen_calibration_dataset(
        cfg, args.objects, args.per_object, ranges, args.seed, grid
    )
    _, digest = surrogate.export_dataset(samples, out)
    _write_run(out, args)
    print(digest)
    return 0


def cmd_track(args) -> int:
    out = _resolve_out(args, "tracked")
    frames = ingest.read_marker_stream(args.stream)
    if not frames:
        raise ValueError(f"no frames found in {args.stream}")
    state = ingest.init_tracks(frames[0][1])
    grid = GridSpec(args.nx, args.ny, args.spacing, (args.origin_x, args.origin_y))
    states = []
    for _, markers in frames[1:]:
        state = ingest.track_update(state, markers, args.max_step)
        states.append(state)
    wanted = states if args.all_frames else states[-1:]
    for n, st in enumerate(wanted, start=1):
        anchors, disp = ingest.displacements(st)
        fld = ingest.rbf_interpolate(anchors, disp, grid, args.kernel_epsilon)
        idx = n if args.all_frames else len(states)
        write_vector_field(os.path.join(out, f"field_frame_{idx:04d}.csv"), fld)
    rows = [
        {
            "track_idx": i,
            "init_x": float(state.init_positions[i, 0]),
            "init_y": float(state.init_positions[i, 1]),
            "cur_x": float(state.current_positions[i, 0]),
            "cur_y": float(state.current_positions[i, 1]),
            "alive": int(state.alive[i]),
        }
        for i in range(len(state.init_positions))
    ]
    _write_csv(
        os.path.join(out, "tracks.csv"),
        ["track_idx", "init_x", "init_y", "cur_x", "cur_y", "alive"],
        rows,
    )
    _write_run(out, args)
    print(f"{len(frames)} frames, {int(state.alive.sum())}/{len(state.alive)} tracks alive")
    return 0


def cmd_decompose(args) -> int:
    out = _resolve_out(args, "decomposed")
    fld = read_vector_field(args.field)
    dec = nhhd.decompose(fld, method=args.method, direct_limit=args.direct_limit)
    stem = os.path.splitext(os.path.basename(args.field))[0]
    nhhd.export_decomposition(dec, os.path.join(out, stem))
    triple = features.features_from_decomposition(fld, dec, args.significance)
    _write_run(out, args)
    doc = {
        "s_n": triple.s_n,
        "s_t": triple.s_t,
        "s_t_direction": None if triple.s_t_direction is None else list(triple.s_t_direction),
        "s_tau": triple.s_tau,
    }
    print(json.dumps(doc, sort_keys=True))
    return 0


def cmd_features(args) -> int:
    out = _resolve_out(args, "features")
    manifest = args.manifest
    if os.path.isdir(manifest):
        # dataset directory: synthesize the plain path-list manifest
        with open(os.path.join(manifest, "manifest.json"), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        paths = [os.path.join(manifest, e["path"]) for e in doc["samples"]]
        manifest = os.path.join(out, "field_list.json")
        with open(manifest, "w", encoding="utf-8") as fh:
            json.dump(paths, fh, indent=1)
    n = features.batch_features(manifest, os.path.join(out, "features.csv"), args.significance)
    _write_run(out, args)
    print(f"{n} rows -> {os.path.join(out, 'features.csv')}")
    return 0


def _parse_hidden(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def cmd_calibrate(args) -> int:
    out = _resolve_out(args, "models")
    samples = surrogate.load_dataset(args.dataset)
    feats, raws, truths, _ = calib.dataset_to_arrays(samples, args.significance)
    hidden = _parse_hidden(args.hidden)
    summary = {}
    if args.model == "mlp-raw":
        sizes = (raws.shape[1], *hidden, 3)
        model = calib.mlp_fit(raws, truths, sizes, seed=args.seed, max_iter=args.max_iter)
        calib.save_model(model, os.path.join(out, "model_raw.json"))
        pred = calib.predict(model, raws)
        for a, axis in enumerate(calib.AXES):
            summary[axis] = calib.rmse(pred[:, a], truths[:, a])
    else:
        for a, axis in enumerate(calib.AXES):
            x, y = feats[:, a], truths[:, a]
            if args.model == "ransac":
                model = calib.ransac_fit(x, y, seed=args.seed)
                pred = calib.predict(model, x)
            else:
                sizes = (1, *hidden, 1)
                model = calib.mlp_fit(
                    x[:, None], y[:, None], sizes, seed=args.seed, max_iter=args.max_iter
                )
                pred = calib.predict(model, x[:, None])[:, 0]
            calib.save_model(model, os.path.join(out, f"model_{axis}.json"))
            summary[axis] = calib.rmse(pred, y)
    _write_run(out, args)
    print(json.dumps({"train_rmse": summary, "model": args.model}, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    out = _resolve_out(args, "evaluation")
    samples = surrogate.load_dataset(args.dataset)
    feats, raws, truths, objs = calib.dataset_to_arrays(samples, args.significance)
    # flagged outliers poison the training folds but are never scored against
    clean = np.array([not s.outlier for s in samples])
    reports = []
    for kind in [m.strip() for m in args.models.split(",") if m.strip()]:
        if kind == "mlp-raw":
            spec = calib.ModelSpec(kind, _parse_hidden(args.hidden_raw), args.max_iter_raw)
            inputs = raws
        else:
            spec = calib.ModelSpec(kind, _parse_hidden(args.hidden), args.max_iter)
            inputs = feats
        reports.append(
            calib.cross_validate(
                inputs, truths, objs, spec, k_by_object=args.folds, seed=args.seed, eval_mask=clean
            )
        )
    rows = calib.report_rows(reports)
    _write_csv(
        os.path.join(out, "report.csv"),
        ["method", "axis", "rmse_mean", "rmse_std", "n_params"],
        rows,
    )
    _write_run(out, args)
    print(f"{len(rows)} rows -> {os.path.join(out, 'report.csv')}")
    return 0


def cmd_grasp(args) -> int:
    out = _resolve_out(args, "grasp")
    scenario = grasp.read_scenario(args.scenario)
    if args.plant_truth:
        scenario = grasp.Scenario(
            plant=scenario.plant,
            schedule=scenario.schedule,
            controller=scenario.controller,
            duration=scenario.duration,
            dt=scenario.dt,
            d_g0=scenario.d_g0,
            mode="plant-truth",
            estimator_spec=None,
        )
    estimator = grasp.build_scenario_estimator(scenario)
    result = grasp.simulate_holding(
        scenario.schedule,
        scenario.plant,
        scenario.controller,
        scenario.duration,
        scenario.dt,
        scenario.d_g0,
        estimator=estimator,
    )
    grasp.write_trace_csv(result, os.path.join(out, "trace.csv"))
    if scenario.controller is not None:
        mu, band = scenario.controller.mu, scenario.controller.band
    else:
        mu, band = scenario.plant.friction.mu_nominal, 0.1
    rows = grasp.read_trace_csv(os.path.join(out, "trace.csv"))
    grasp.plot_ratio_trace(rows, mu, band, os.path.join(out, "ratio.svg"))
    _write_run(out, args)
    print(
        json.dumps(
            {"failed": result.failed, "fail_time": result.fail_time, "steps": len(result.trace)},
            sort_keys=True,
        )
    )
    return 3 if result.failed else 0


def cmd_plot(args) -> int:
    out = _resolve_out(args, "plots")
    rows = grasp.read_trace_csv(args.trace)
    grasp.plot_ratio_trace(rows, args.mu, args.band, os.path.join(out, "ratio.svg"))
    _write_run(out, args)
    print(os.path.join(out, "ratio.svg"))
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_grid_flags(p, nx=24, ny=24):
    p.add_argument("--nx", type=int, default=nx)
    p.add_argument("--ny", type=int, default=ny)
    p.add_argument("--spacing", type=float, default=1.0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrenchfield",
        description="Tactile displacement-field decomposition, wrench calibration, grasp control.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a surrogate calibration dataset")
    p.add_argument("--objects", type=int, default=6)
    p.add_argument("--per-object", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    _add_grid_flags(p)
    p.add_argument("--noise-sigma", type=float, default=0.0, help="per-cell noise, mm")
    p.add_argument("--gain-jitter", type=float, default=0.15)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--falloff-sigma", type=float, default=24.0)
    p.add_argument("--radius", type=float, default=2.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="track a marker stream and grid the displacements")
    p.add_argument("stream", help="marker CSV file or directory of per-frame CSVs")
    p.add_argument("--max-step", type=float, default=3.0)
    _add_grid_flags(p, nx=32, ny=32)
    p.add_argument("--origin-x", type=float, default=0.0)
    p.add_argument("--origin-y", type=float, default=0.0)
    p.add_argument("--kernel-epsilon", type=float, default=4.5)
    p.add_argument("--all-frames", action="store_true", help="grid every frame, not just the last")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("decompose", help="decompose a field file; print its feature triple")
    p.add_argument("field")
    p.add_argument("--method", choices=("auto", "direct", "fft"), default="auto")
    p.add_argument("--direct-limit", type=int, default=2048)
    p.add_argument("--significance", type=float, default=0.1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("features", help="batch features for a manifest or dataset directory")
    p.add_argument("manifest", help="JSON list of field paths, or a dataset directory")
    p.add_argument("--significance", type=float, default=0.1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("calibrate", help="fit feature->wrench models on a dataset")
    p.add_argument("dataset")
    p.add_argument("--model", choices=("ransac", "mlp", "mlp-raw"), default="ransac")
    p.add_argument("--hidden", default="10", help="comma-separated hidden sizes for MLP kinds")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--significance", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="by-object cross-validated model comparison")
    p.add_argument("dataset")
    p.add_argument("--models", default="ransac,mlp,mlp-raw")
    p.add_argument("--folds", type=int, default=None, help="default: one fold per object")
    p.add_argument("--hidden", default="10")
    p.add_argument("--hidden-raw", default="512,128,10")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--max-iter-raw", type=int, default=120)
    p.add_argument("--significance", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grasp", help="run a holding-simulation scenario")
    p.add_argument("scenario")
    p.add_argument("--plant-truth", action="store_true", help="force plant-truth estimation mode")
    p.add_argument(
        "--expect-hold",
        action="store_true",
        help="document that failure is unexpected (failure exits 3 regardless)",
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_grasp)

    p = sub.add_parser("plot", help="re-render the ratio plot from a trace CSV")
    p.add_argument("trace")
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--band", type=float, default=0.1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (calib.RansacFitError, calib.TrainingDivergedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (
        FieldFormatError,
        FileNotFoundError,
        NotADirectoryError,
        IsADirectoryError,
        json.JSONDecodeError,
        ValueError,
        KeyError,
        TypeError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
