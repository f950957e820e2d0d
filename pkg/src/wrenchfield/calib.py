"""Feature -> wrench calibration and the evaluation harness.

Two regressor families:

* per-axis robust line (RANSAC: minimal 2-point hypotheses, inlier
  consensus, least-squares refit on the winning set)
* small MLP trained full-batch with a quasi-Newton optimizer; gradients are
  hand-derived backprop so they can be verified against finite differences

plus a by-object k-fold cross-validation harness that reports per-axis RMSE
for feature models and for the raw-field baseline (one big MLP on the
flattened displacement grid).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as _dc_field

import numpy as np
from scipy.optimize import minimize

from .features import FeatureTriple, features_from_decomposition
from .nhhd import decompose

__all__ = [
    "LinearModel",
    "MLPModel",
    "WrenchEstimate",
    "ModelSpec",
    "CVReport",
    "RansacFitError",
    "TrainingDivergedError",
    "ransac_fit",
    "mlp_init",
    "mlp_fit",
    "mlp_loss",
    "gradient_check",
    "predict",
    "estimate_wrench",
    "rmse",
    "cross_validate",
    "dataset_to_arrays",
    "report_rows",
    "save_model",
    "load_model",
    "AXES",
]

AXES = ("f_n", "f_t", "f_tau")  # truth order everywhere: normal, tangential magnitude, torsion
_CLAMPED = (True, True, False)  # forces cannot be negative; torsion is signed


class RansacFitError(RuntimeError):
    """Best consensus set smaller than the required minimum."""


class TrainingDivergedError(RuntimeError):
    """Non-finite loss encountered during MLP training."""


# ---------------------------------------------------------------------------
# robust line fit


@dataclass(frozen=True)
class LinearModel:
    slope: float
    intercept: float
    inlier_mask: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.slope) and np.isfinite(self.intercept)):
            raise ValueError("non-finite line parameters")
        object.__setattr__(self, "inlier_mask", np.asarray(self.inlier_mask, dtype=bool))


def ransac_fit(
    x,
    y,
    iters: int = 200,
    inlier_tol: float | None = None,
    min_inliers: int | None = None,
    seed=0,
) -> LinearModel:
    """RANSAC line fit: sample 2 points, count inliers, refit on the winner.

    inlier_tol defaults to 1.5x the MAD of preliminary least-squares
    residuals, floored at 1e-9·max(1, median|y|) so exact data (MAD = 0)
    still accepts its inliers.  Deterministic for a given seed.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = len(x)
    if n < 2 or len(y) != n:
        raise ValueError("need at least 2 (x, y) pairs of equal length")
    if np.unique(x).size < 2:
        raise ValueError("x values are all identical; a line is undetermined")
    if min_inliers is None:
        min_inliers = int(np.ceil(0.5 * n))

    if inlier_tol is None:
        coef = np.polyfit(x, y, 1)
        res = y - np.polyval(coef, x)
        mad = np.median(np.abs(res - np.median(res)))
        inlier_tol = max(1.5 * mad, 1e-9 * max(1.0, float(np.median(np.abs(y)))))

    rng = np.random.default_rng(seed)
    best_mask = None
    best_key = (-1, 0.0)
    for _ in range(iters):
        i, j = rng.choice(n, size=2, replace=False)
        if x[i] == x[j]:
            continue
        slope = (y[j] - y[i]) / (x[j] - x[i])
        icept = y[i] - slope * x[i]
        res = np.abs(y - (slope * x + icept))
        mask = res <= inlier_tol
        key = (int(mask.sum()), -float(np.sum(res[mask] ** 2)))
        if key > best_key:
            best_key, best_mask = key, mask
    if best_mask is None or best_mask.sum() < max(min_inliers, 2):
        raise RansacFitError(
            f"best consensus has {0 if best_mask is None else int(best_mask.sum())} inliers, "
            f"need at least {min_inliers}"
        )
    slope, icept = np.polyfit(x[best_mask], y[best_mask], 1)
    return LinearModel(float(slope), float(icept), best_mask)


# ---------------------------------------------------------------------------
# MLP with explicit backprop


@dataclass
class MLPModel:
    """Fully connected net: tanh hidden layers, linear output.

    Inputs/targets may be standardized; the transform parameters live on the
    model so predict() works in original units.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"
    x_mean: np.ndarray | None = None
    x_std: np.ndarray | None = None
    y_mean: np.ndarray | None = None
    y_std: np.ndarray | None = None
    loss_history: list[float] = _dc_field(default_factory=list)

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def mlp_init(layer_sizes, seed=0) -> MLPModel:
    """Uniform +-sqrt(6/(fan_in+fan_out)) init, deterministic per seed."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"layer_sizes needs >= 2 positive entries, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPModel(sizes, weights, biases)


def _forward(model: MLPModel, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ W.T + b
        acts.append(z if l == last else np.tanh(z))
    return acts


def mlp_loss(model: MLPModel, X: np.ndarray, Y: np.ndarray) -> float:
    """0.5 x mean-over-samples of the squared output error."""
    pred = _forward(model, X)[-1]
    return float(0.5 * np.mean(np.sum((pred - Y) ** 2, axis=1)))


def _loss_and_grads(model: MLPModel, X: np.ndarray, Y: np.ndarray):
    acts = _forward(model, X)
    n = len(X)
    diff = acts[-1] - Y
    loss = float(0.5 * np.mean(np.sum(diff**2, axis=1)))
    gw = [None] * len(model.weights)
    gb = [None] * len(model.biases)
    delta = diff / n  # linear output layer
    for l in range(len(model.weights) - 1, -1, -1):
        gw[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * (1.0 - acts[l] ** 2)
    return loss, gw, gb


def _pack(ws, bs) -> np.ndarray:
    return np.concatenate([a.ravel() for a in ws] + [a.ravel() for a in bs])


def _unpack(theta: np.ndarray, template: MLPModel):
    ws, bs, k = [], [], 0
    for w in template.weights:
        ws.append(theta[k : k + w.size].reshape(w.shape))
        k += w.size
    for b in template.biases:
        bs.append(theta[k : k + b.size])
        k += b.size
    return ws, bs


def _standardizer(A: np.ndarray):
    mean = A.mean(axis=0)
    std = A.std(axis=0)
    std = np.where(std > 0, std, 1.0)  # constant columns pass through untouched
    return mean, std


def mlp_fit(
    X,
    Y,
    layer_sizes,
    activation: str = "tanh",
    seed=0,
    max_iter: int = 500,
    tol: float = 1e-8,
    standardize: bool = True,
) -> MLPModel:
    """Full-batch quasi-Newton (limited-memory) training on MSE.

    Deterministic: seeded init, no stochastic batching.  Stops on projected
    gradient <= tol or max_iter.  Raises TrainingDivergedError if the loss
    ever goes non-finite.
    """
    if activation != "tanh":
        raise ValueError(f"unsupported activation {activation!r}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0] or X.shape[0] < 1:
        raise ValueError("X and Y must hold the same nonzero number of samples")
    sizes = tuple(int(s) for s in layer_sizes)
    if sizes[0] != X.shape[1] or sizes[-1] != Y.shape[1]:
        raise ValueError(f"layer_sizes {sizes} inconsistent with data dims {X.shape[1]}->{Y.shape[1]}")

    model = mlp_init(sizes, seed)
    if standardize:
        model.x_mean, model.x_std = _standardizer(X)
        model.y_mean, model.y_std = _standardizer(Y)
        Xs = (X - model.x_mean) / model.x_std
        Ys = (Y - model.y_mean) / model.y_std
    else:
        Xs, Ys = X, Y

    evals = {"count": 0}

    def objective(theta):
        evals["count"] += 1
        model.weights, model.biases = _unpack(theta, model)
        loss, gw, gb = _loss_and_grads(model, Xs, Ys)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at evaluation {evals['count']}")
        return loss, _pack(gw, gb)

    def track(theta):
        model.weights, model.biases = _unpack(theta, model)
        model.loss_history.append(mlp_loss(model, Xs, Ys))

    theta0 = _pack(model.weights, model.biases)
    model.loss_history = [mlp_loss(model, Xs, Ys)]
    result = minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=track,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 0.0},
    )
    model.weights, model.biases = _unpack(result.x, model)
    model.loss_history.append(mlp_loss(model, Xs, Ys))
    return model


def gradient_check(model: MLPModel, X, Y, step: float = 1e-6) -> float:
    """Max relative mismatch between backprop and central finite differences.

    Relative error per parameter is |ga - gn| / max(|ga|, |gn|, 1e-8); the
    floor keeps parameters with ~zero gradient from dividing by zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    _, gw, gb = _loss_and_grads(model, X, Y)
    analytic = _pack(gw, gb)
    theta = _pack(model.weights, model.biases)
    numeric = np.empty_like(theta)
    probe = MLPModel(model.layer_sizes, list(model.weights), list(model.biases))
    for k in range(len(theta)):
        for sgn, slot in ((+1, 0), (-1, 1)):
            t = theta.copy()
            t[k] += sgn * step
            probe.weights, probe.biases = _unpack(t, probe)
            if slot == 0:
                hi = mlp_loss(probe, X, Y)
            else:
                lo = mlp_loss(probe, X, Y)
        numeric[k] = (hi - lo) / (2 * step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


# ---------------------------------------------------------------------------
# prediction


def predict(model, x):
    """Forward evaluation; pure function of (model, input)."""
    if isinstance(model, LinearModel):
        return model.slope * np.asarray(x, dtype=float) + model.intercept
    if isinstance(model, MLPModel):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if X.shape[1] != model.layer_sizes[0]:
            raise ValueError(f"input dim {X.shape[1]} != model input {model.layer_sizes[0]}")
        if model.x_mean is not None:
            X = (X - model.x_mean) / model.x_std
        out = _forward(model, X)[-1]
        if model.y_mean is not None:
            out = out * model.y_std + model.y_mean
        return out
    raise TypeError(f"unknown model type {type(model).__name__}")


@dataclass(frozen=True)
class WrenchEstimate:
    """Estimated contact wrench; f_n and f_t are clamped at zero."""

    f_n: float
    f_t: float
    f_t_direction: np.ndarray | None
    f_tau: float


def _scalar_predict(model, value: float) -> float:
    if isinstance(model, LinearModel):
        return float(predict(model, value))
    return float(predict(model, [[value]])[0, 0])


def estimate_wrench(models: dict, triple: FeatureTriple) -> WrenchEstimate:
    """Apply per-axis models to a feature triple; negative forces clamp to 0."""
    f_n = max(0.0, _scalar_predict(models["f_n"], triple.s_n))
    f_t = max(0.0, _scalar_predict(models["f_t"], triple.s_t))
    f_tau = _scalar_predict(models["f_tau"], triple.s_tau)
    return WrenchEstimate(f_n=f_n, f_t=f_t, f_t_direction=triple.s_t_direction, f_tau=f_tau)


def rmse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truths, dtype=float).ravel()
    if len(p) == 0 or len(p) != len(t):
        raise ValueError("predictions and truths must be equal-length and nonempty")
    return float(np.sqrt(np.mean((p - t) ** 2)))


# ---------------------------------------------------------------------------
# cross-validation harness


@dataclass(frozen=True)
class ModelSpec:
    """What to fit: 'ransac' or 'mlp' on per-axis features, or 'mlp-raw'
    (joint 3-output net on the flattened field)."""

    kind: str
    hidden: tuple[int, ...] = (10,)
    max_iter: int = 500

    def __post_init__(self):
        if self.kind not in ("ransac", "mlp", "mlp-raw"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass(frozen=True)
class CVReport:
    spec: ModelSpec
    per_fold: np.ndarray  # (k, 3) RMSE per fold per axis
    n_params: int

    @property
    def rmse_mean(self) -> np.ndarray:
        return self.per_fold.mean(axis=0)

    @property
    def rmse_std(self) -> np.ndarray:
        return self.per_fold.std(axis=0)


def dataset_to_arrays(samples, significance: float = 0.1):
    """(features (n,3), raw (n, 2·cells), truths (n,3), object_ids (n,)).

    Truth order follows AXES: f_n, |f_t|, f_tau.
    """
    feats, raws, truths, objs = [], [], [], []
    for s in samples:
        dec = decompose(s.field)
        t = features_from_decomposition(s.field, dec, significance)
        feats.append(t.as_array())
        raws.append(np.concatenate([s.field.u.ravel(), s.field.v.ravel()]))
        truths.append([s.load.f_n, s.load.f_t_magnitude, s.load.f_tau])
        objs.append(s.object_id)
    return np.array(feats), np.array(raws), np.array(truths), np.array(objs)


def _object_folds(object_ids: np.ndarray, k: int | None):
    ids = np.unique(object_ids)
    if k is None:
        k = len(ids)
    if not 2 <= k <= len(ids):
        raise ValueError(f"k_by_object must be in [2, {len(ids)}], got {k}")
    for i in ids:
        if np.sum(object_ids == i) == 0:  # pragma: no cover - ids come from samples
            raise ValueError(f"object {i} has zero samples")
    folds = []
    for f in range(k):
        test_objs = ids[f::k]
        folds.append(np.isin(object_ids, test_objs))
    return folds


def cross_validate(
    inputs: np.ndarray,
    truths: np.ndarray,
    object_ids: np.ndarray,
    spec: ModelSpec,
    k_by_object: int | None = None,
    seed: int = 0,
    eval_mask: np.ndarray | None = None,
) -> CVReport:
    """Object-pure k-fold CV; every sample lands in exactly one test fold.

    inputs: (n, 3) feature triples for 'ransac'/'mlp', (n, d) flattened
    fields for 'mlp-raw'.  Returns per-axis RMSE per fold; predictions for
    the two force axes are clamped at zero before scoring.

    eval_mask, when given, restricts SCORING to the masked samples while
    training still sees everything in the fold.  This is how corrupted
    samples are handled: a robustness comparison must let them poison the
    fits but cannot score against their garbage targets, or the metric
    rewards memorizing the corruption.
    """
    inputs = np.asarray(inputs, dtype=float)
    truths = np.asarray(truths, dtype=float)
    object_ids = np.asarray(object_ids)
    if eval_mask is None:
        eval_mask = np.ones(len(inputs), dtype=bool)
    else:
        eval_mask = np.asarray(eval_mask, dtype=bool)
        if eval_mask.shape != (len(inputs),):
            raise ValueError("eval_mask must be one flag per sample")
    folds = _object_folds(object_ids, k_by_object)
    per_fold = np.empty((len(folds), 3))
    n_params = 0
    for f_idx, test in enumerate(folds):
        train = ~test
        score = test & eval_mask
        if not score.any():
            raise ValueError(f"eval_mask leaves fold {f_idx} with nothing to score")
        fold_seed = np.random.SeedSequence((seed, f_idx))
        if spec.kind == "mlp-raw":
            sizes = (inputs.shape[1], *spec.hidden, 3)
            model = mlp_fit(inputs[train], truths[train], sizes, seed=fold_seed, max_iter=spec.max_iter)
            pred = predict(model, inputs[score])
            n_params = model.n_params()
            for a in range(3):
                p = np.maximum(pred[:, a], 0.0) if _CLAMPED[a] else pred[:, a]
                per_fold[f_idx, a] = rmse(p, truths[score, a])
        else:
            for a in range(3):
                x, y = inputs[:, a], truths[:, a]
                if spec.kind == "ransac":
                    model = ransac_fit(x[train], y[train], seed=fold_seed)
                    n_params = 2  # slope + intercept per axis
                    p = predict(model, x[score])
                else:
                    sizes = (1, *spec.hidden, 1)
                    model = mlp_fit(
                        x[train, None], y[train, None], sizes, seed=fold_seed, max_iter=spec.max_iter
                    )
                    n_params = model.n_params()  # per-axis net
                    p = predict(model, x[score, None])[:, 0]
                if _CLAMPED[a]:
                    p = np.maximum(p, 0.0)
                per_fold[f_idx, a] = rmse(p, y[score])
    return CVReport(spec=spec, per_fold=per_fold, n_params=n_params)


def report_rows(reports: list[CVReport]) -> list[dict]:
    """Flatten CV reports into method/axis rows for the summary CSV."""
    rows = []
    for rep in reports:
        for a, axis in enumerate(AXES):
            rows.append(
                {
                    "method": rep.spec.kind,
                    "axis": axis,
                    "rmse_mean": rep.rmse_mean[a],
                    "rmse_std": rep.rmse_std[a],
                    "n_params": rep.n_params,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# persistence


def save_model(model, path) -> None:
    if isinstance(model, LinearModel):
        doc = {
            "kind": "linear",
            "slope": model.slope,
            "intercept": model.intercept,
            "inlier_mask": model.inlier_mask.astype(int).tolist(),
        }
    elif isinstance(model, MLPModel):
        doc = {
            "kind": "mlp",
            "layer_sizes": list(model.layer_sizes),
            "activation": model.activation,
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
        }
        for attr in ("x_mean", "x_std", "y_mean", "y_std"):
            val = getattr(model, attr)
            doc[attr] = None if val is None else np.asarray(val).tolist()
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc["kind"] == "linear":
        return LinearModel(doc["slope"], doc["intercept"], np.array(doc["inlier_mask"], dtype=bool))
    if doc["kind"] == "mlp":
        model = MLPModel(
            tuple(doc["layer_sizes"]),
            [np.array(w) for w in doc["weights"]],
            [np.array(b) for b in doc["biases"]],
            activation=doc.get("activation", "tanh"),
        )
        for attr in ("x_mean", "x_std", "y_mean", "y_std"):
            val = doc.get(attr)
            setattr(model, attr, None if val is None else np.array(val))
        return model
    raise ValueError(f"unknown model kind {doc.get('kind')!r} in {path}")
