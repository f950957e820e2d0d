"""Contact-phase classification and adaptive grasp-force control.

A deterministic two-finger holding plant (elastomer springs + stick/slip
friction + a hanging load schedule) closes the loop around a band controller:
the gripper closes one step when BOTH fingertip tangential/normal ratios
exceed mu + band/2, opens one step when both sit below mu - band/2, and holds
otherwise.  The ratio history additionally drives a four-phase contact
classifier (Stable / IncipientSlip / Slipping / Recovery).

Note on the band: the controller's published pseudocode uses the upper limit
in both branches; here the opening branch deliberately uses the lower limit
mu - band/2 (a band with equal limits would be degenerate).
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .calib import WrenchEstimate, estimate_wrench, load_model
from .features import compute_features
from .field import GridSpec
from .surrogate import LoadTriple, SurrogateConfig, render_load

__all__ = [
    "FrictionModel",
    "ContactPhase",
    "GraspState",
    "ControllerConfig",
    "PlantParams",
    "Scenario",
    "SimResult",
    "cone_check",
    "classify_phase",
    "controller_step",
    "simulate_holding",
    "make_pipeline_estimator",
    "read_scenario",
    "write_trace_csv",
    "read_trace_csv",
    "plot_ratio_trace",
    "above_band_runs",
]

_EPS_FN = 1e-9  # below this normal force a ratio is undefined


@dataclass(frozen=True)
class FrictionModel:
    """Static/dynamic coefficients plus the controller's nominal value."""

    mu_static: float
    mu_dynamic: float
    mu_nominal: float

    def __post_init__(self):
        if not (0 < self.mu_dynamic < self.mu_static):
            raise ValueError(
                f"need 0 < mu_dynamic < mu_static, got {self.mu_dynamic}, {self.mu_static}"
            )


class ContactPhase(str, Enum):
    STABLE = "Stable"
    INCIPIENT = "IncipientSlip"
    SLIPPING = "Slipping"
    RECOVERY = "Recovery"


@dataclass(frozen=True)
class ControllerConfig:
    """Band controller parameters; d_min/d_max are the actuator limits the
    requested opening is clamped to."""

    mu: float
    band: float
    step: float = 0.1  # mm per decision
    period: float = 0.05  # s between decisions
    d_min: float = 0.0
    d_max: float = 50.0

    def __post_init__(self):
        if not (self.band > 0 and self.step > 0 and self.period > 0):
            raise ValueError("band, step and period must all be > 0")
        if self.d_min >= self.d_max:
            raise ValueError("d_min must be < d_max")


@dataclass(frozen=True)
class PlantParams:
    """Two-finger holding plant: linear fingertip springs and stick/slip."""

    stiffness: float  # N per mm of squeeze, per finger
    object_width: float  # mm; contact requires d_g < object_width
    mass: float  # kg of the held object (+ attached weights carrier)
    friction: FrictionModel
    break_displacement: float = 5.0  # mm of slip at which the grasp has failed
    finger_asymmetry: float = 0.0  # +-fraction splitting left/right stiffness

    def __post_init__(self):
        if self.stiffness <= 0 or self.mass <= 0:
            raise ValueError("stiffness and mass must be > 0")
        if not 0 <= self.finger_asymmetry < 1:
            raise ValueError("finger_asymmetry must be in [0, 1)")


@dataclass(frozen=True)
class GraspState:
    """One sample of the simulated grasp."""

    time: float
    d_g: float
    f_left: WrenchEstimate
    f_right: WrenchEstimate
    object_velocity: float  # mm/s, positive = sliding down
    external_load: float  # N
    ratio_l: float | None
    ratio_r: float | None
    phase_l: ContactPhase
    phase_r: ContactPhase
    slipping: bool


@dataclass(frozen=True)
class SimResult:
    trace: list[GraspState]
    failed: bool
    fail_time: float | None


def cone_check(w: WrenchEstimate, mu: float) -> bool:
    """True when the wrench lies inside the friction cone (boundary included)."""
    if w.f_n < 0:
        raise ValueError("cone_check needs f_n >= 0")
    return w.f_t <= mu * w.f_n


def classify_phase(
    ratio_history, mu: float, band: float, prev: ContactPhase, window: int = 10
) -> ContactPhase:
    """Four-phase classifier over a recent ratio history.

    Stable below the band; IncipientSlip from the lower band limit until slip
    is confirmed; Slipping on the drop signature (history max rose above the
    band and fell by more than one band width) or when the ratio persists
    above the band for a full window; Recovery once the ratio re-enters below
    the band, returning to Stable after a full window down there.
    """
    hist = np.asarray(ratio_history, dtype=float)
    if hist.size == 0:
        raise ValueError("ratio history must be nonempty")
    r = hist[-1]
    lo, hi = mu - band / 2, mu + band / 2
    peak = float(hist.max())
    dropped = peak > hi and (peak - r) > band
    persists = hist.size >= window and bool(np.all(hist[-window:] > hi))

    if prev in (ContactPhase.STABLE, ContactPhase.INCIPIENT):
        if dropped or persists:
            return ContactPhase.SLIPPING
        if r < lo:
            return ContactPhase.RECOVERY if prev is ContactPhase.INCIPIENT else ContactPhase.STABLE
        return ContactPhase.INCIPIENT
    if prev is ContactPhase.SLIPPING:
        return ContactPhase.RECOVERY if r < lo else ContactPhase.SLIPPING
    # Recovery: climb back into the band, or settle out after a full window
    if r >= lo:
        return ContactPhase.INCIPIENT
    below = 0
    for val in hist[::-1]:
        if val < lo:
            below += 1
        else:
            break
    return ContactPhase.STABLE if below >= window else ContactPhase.RECOVERY


def controller_step(
    cfg: ControllerConfig, f_left: WrenchEstimate, f_right: WrenchEstimate, d_g: float
) -> float:
    """One band-controller decision; returns the requested opening.

    Closes only when BOTH ratios exceed mu + band/2, opens only when both sit
    below mu - band/2; disagreement or an undefined ratio holds.
    """
    if f_left.f_n <= _EPS_FN or f_right.f_n <= _EPS_FN:
        return float(np.clip(d_g, cfg.d_min, cfg.d_max))
    r_l = f_left.f_t / f_left.f_n
    r_r = f_right.f_t / f_right.f_n
    hi = cfg.mu + cfg.band / 2
    lo = cfg.mu - cfg.band / 2
    if r_l > hi and r_r > hi:
        d_r = d_g - cfg.step
    elif r_l < lo and r_r < lo:
        d_r = d_g + cfg.step
    else:
        d_r = d_g
    return float(np.clip(d_r, cfg.d_min, cfg.d_max))


# ---------------------------------------------------------------------------
# holding simulation


def _interp_schedule(schedule):
    pts = sorted((float(t), float(w)) for t, w in schedule)
    if not pts:
        raise ValueError("load schedule is empty")
    ts = np.array([p[0] for p in pts])
    ws = np.array([p[1] for p in pts])
    return lambda t: float(np.interp(t, ts, ws))


def simulate_holding(
    schedule,
    plant: PlantParams,
    cfg: ControllerConfig | None,
    duration: float,
    dt: float,
    d_g0: float,
    estimator=None,
    phase_window: int = 10,
) -> SimResult:
    """Run the two-finger plant under a piecewise-linear load schedule.

    schedule: iterable of (t, external_load) breakpoints (N).
    cfg None disables the controller (opening frozen at d_g0).
    estimator, when given, maps a plant-truth WrenchEstimate to the estimate
    fed to the controller (signature est(truth, finger, t)); None = plant
    truth straight through.  Fully deterministic.

    The trace ends early with failed=True when accumulated slip exceeds the
    plant's break displacement (the contact is considered lost).
    """
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be > 0")
    if cfg is not None and dt > cfg.period + 1e-12:
        raise ValueError(f"dt={dt} must not exceed the control period {cfg.period}")
    load_at = _interp_schedule(schedule)
    fr = plant.friction
    k_l = plant.stiffness * (1 + plant.finger_asymmetry)
    k_r = plant.stiffness * (1 - plant.finger_asymmetry)
    mu_phase = cfg.mu if cfg is not None else fr.mu_nominal
    band_phase = cfg.band if cfg is not None else 0.1

    period_steps = max(1, int(round((cfg.period if cfg else dt) / dt)))
    n_steps = int(round(duration / dt))
    d_g = float(d_g0)
    v = 0.0  # object sliding velocity, mm/s
    x = 0.0  # accumulated slip, mm
    hist_l: deque = deque(maxlen=phase_window)
    hist_r: deque = deque(maxlen=phase_window)
    phase_l = phase_r = ContactPhase.STABLE
    trace: list[GraspState] = []
    failed = False
    fail_time = None

    for step_idx in range(n_steps):
        t = step_idx * dt
        W = load_at(t)
        f_n_l = max(0.0, k_l * (plant.object_width - d_g))
        f_n_r = max(0.0, k_r * (plant.object_width - d_g))
        sticking = (
            v == 0.0 and W / 2 <= fr.mu_static * f_n_l and W / 2 <= fr.mu_static * f_n_r
        )
        if sticking:
            f_t_l = f_t_r = W / 2
        else:
            f_t_l = fr.mu_dynamic * f_n_l
            f_t_r = fr.mu_dynamic * f_n_r

        truth_l = WrenchEstimate(f_n_l, f_t_l, None, 0.0)
        truth_r = WrenchEstimate(f_n_r, f_t_r, None, 0.0)
        ratio_l = f_t_l / f_n_l if f_n_l > _EPS_FN else None
        ratio_r = f_t_r / f_n_r if f_n_r > _EPS_FN else None
        if ratio_l is not None:
            hist_l.append(ratio_l)
            phase_l = classify_phase(hist_l, mu_phase, band_phase, phase_l, phase_window)
        if ratio_r is not None:
            hist_r.append(ratio_r)
            phase_r = classify_phase(hist_r, mu_phase, band_phase, phase_r, phase_window)

        trace.append(
            GraspState(
                time=t,
                d_g=d_g,
                f_left=truth_l,
                f_right=truth_r,
                object_velocity=v,
                external_load=W,
                ratio_l=ratio_l,
                ratio_r=ratio_r,
                phase_l=phase_l,
                phase_r=phase_r,
                slipping=not sticking,
            )
        )

        if cfg is not None and step_idx % period_steps == 0:
            est_l = estimator(truth_l, "left", t) if estimator else truth_l
            est_r = estimator(truth_r, "right", t) if estimator else truth_r
            d_g = controller_step(cfg, est_l, est_r, d_g)

        if not sticking:
            net = W - (f_t_l + f_t_r)  # N, downward positive
            v = max(0.0, v + (net / plant.mass) * 1e3 * dt)  # N/kg = m/s² -> mm/s²
            x += v * dt
            if x > plant.break_displacement:
                failed = True
                fail_time = t
                break

    return SimResult(trace=trace, failed=failed, fail_time=fail_time)


def above_band_runs(values, hi: float) -> list[int]:
    """Lengths of maximal consecutive runs with value > hi (None = below)."""
    runs, current = [], 0
    for val in values:
        if val is not None and val > hi:
            current += 1
        elif current:
            runs.append(current)
            current = 0
    if current:
        runs.append(current)
    return runs


# ---------------------------------------------------------------------------
# pipeline-in-the-loop estimator


def make_pipeline_estimator(
    models: dict,
    surrogate_cfg: SurrogateConfig,
    grid: GridSpec,
    contact_radius: float = 2.5,
    seed: int = 0,
):
    """Close the loop through the full sensing stack.

    The plant-truth wrench is rendered into a displacement field (with the
    configured noise), decomposed, reduced to features, and mapped back
    through the calibrated models.  Deterministic: each call draws its noise
    from a counter-derived stream.
    """
    counter = {"n": 0}

    def estimate(truth: WrenchEstimate, finger: str, t: float) -> WrenchEstimate:
        counter["n"] += 1
        rng = np.random.default_rng(np.random.SeedSequence((seed, counter["n"])))
        load = LoadTriple(
            f_n=truth.f_n,
            f_t=(truth.f_t, 0.0),
            f_tau=truth.f_tau,
            contact_center=grid.center_point(),
            contact_radius=contact_radius,
        )
        fld = render_load(surrogate_cfg, load, grid, rng=rng)
        triple = compute_features(fld, method="fft")
        return estimate_wrench(models, triple)

    return estimate


# ---------------------------------------------------------------------------
# scenario files and traces


@dataclass(frozen=True)
class Scenario:
    plant: PlantParams
    schedule: list[tuple[float, float]]
    controller: ControllerConfig | None
    duration: float
    dt: float
    d_g0: float
    mode: str = "plant-truth"  # or "pipeline"
    estimator_spec: dict | None = None


def read_scenario(path) -> Scenario:
    """Parse a scenario JSON file (plant, schedule, controller, run params)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        p = doc["plant"]
        plant = PlantParams(
            stiffness=p["stiffness"],
            object_width=p["object_width"],
            mass=p["mass"],
            friction=FrictionModel(p["mu_static"], p["mu_dynamic"], p["mu_nominal"]),
            break_displacement=p.get("break_displacement", 5.0),
            finger_asymmetry=p.get("finger_asymmetry", 0.0),
        )
        ctl = doc.get("controller")
        controller = None
        if ctl is not None:
            controller = ControllerConfig(
                mu=ctl["mu"],
                band=ctl["band"],
                step=ctl.get("step", 0.1),
                period=ctl.get("period", 0.05),
                d_min=ctl.get("d_min", 0.0),
                d_max=ctl.get("d_max", 50.0),
            )
        return Scenario(
            plant=plant,
            schedule=[(float(t), float(w)) for t, w in doc["schedule"]],
            controller=controller,
            duration=float(doc["duration"]),
            dt=float(doc["dt"]),
            d_g0=float(doc["d_g0"]),
            mode=doc.get("mode", "plant-truth"),
            estimator_spec=doc.get("estimator"),
        )
    except KeyError as e:
        raise ValueError(f"scenario {path} is missing required key {e}") from None


def build_scenario_estimator(scenario: Scenario):
    """Instantiate the pipeline estimator a scenario asks for (None for
    plant-truth mode)."""
    if scenario.mode == "plant-truth":
        return None
    if scenario.mode != "pipeline":
        raise ValueError(f"unknown scenario mode {scenario.mode!r}")
    spec = scenario.estimator_spec
    if not spec:
        raise ValueError("pipeline mode requires an 'estimator' block")
    g = spec.get("grid", {})
    grid = GridSpec(g.get("nx", 32), g.get("ny", 32), g.get("spacing", 1.0))
    sur = spec.get("surrogate", {})
    cfg = SurrogateConfig(**sur)
    models = {axis: load_model(path) for axis, path in spec["model_paths"].items()}
    return make_pipeline_estimator(
        models,
        cfg,
        grid,
        contact_radius=spec.get("contact_radius", 2.5),
        seed=spec.get("seed", 0),
    )


_TRACE_COLUMNS = (
    "t,d_g,f_n_l,f_t_l,f_n_r,f_t_r,ratio_l,ratio_r,phase_l,phase_r,slip_flag"
)


def write_trace_csv(result: SimResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRACE_COLUMNS.split(","))
        for s in result.trace:
            writer.writerow(
                [
                    "%.17g" % s.time,
                    "%.17g" % s.d_g,
                    "%.17g" % s.f_left.f_n,
                    "%.17g" % s.f_left.f_t,
                    "%.17g" % s.f_right.f_n,
                    "%.17g" % s.f_right.f_t,
                    "" if s.ratio_l is None else "%.17g" % s.ratio_l,
                    "" if s.ratio_r is None else "%.17g" % s.ratio_r,
                    s.phase_l.value,
                    s.phase_r.value,
                    int(s.slipping),
                ]
            )


def read_trace_csv(path) -> list[dict]:
    """Trace rows as dicts (numbers parsed, empty ratios -> None)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _TRACE_COLUMNS.split(","):
            raise ValueError(f"{path} is not a grasp trace (wrong columns)")
        for rec in reader:
            row = {k: rec[k] for k in ("phase_l", "phase_r")}
            for k in ("t", "d_g", "f_n_l", "f_t_l", "f_n_r", "f_t_r"):
                row[k] = float(rec[k])
            for k in ("ratio_l", "ratio_r"):
                row[k] = float(rec[k]) if rec[k] != "" else None
            row["slip_flag"] = bool(int(rec["slip_flag"]))
            rows.append(row)
    return rows


def plot_ratio_trace(rows: list[dict], mu: float, band: float, path) -> None:
    """SVG of both fingertip ratios with the controller band and above-band
    excursions shaded."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = [r["t"] for r in rows]
    lo, hi = mu - band / 2, mu + band / 2
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.axhspan(lo, hi, color="tab:orange", alpha=0.2, label="band")
    for key, color in (("ratio_l", "tab:blue"), ("ratio_r", "tab:green")):
        vals = [r[key] for r in rows]
        ax.plot(t, [np.nan if v is None else v for v in vals], color=color, lw=1.0, label=key)
        # shade every excursion beyond the upper limit
        run_start = None
        for i, v in enumerate(vals + [None]):
            above = v is not None and v > hi
            if above and run_start is None:
                run_start = t[i]
            elif not above and run_start is not None:
                ax.axvspan(run_start, t[min(i, len(t) - 1)], color=color, alpha=0.15)
                run_start = None
    ax.set_xlabel("time [s]")
    ax.set_ylabel("tangential/normal ratio")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
