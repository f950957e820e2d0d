import numpy as np
import pytest

from wrenchfield import (
    CVReport,
    FeatureTriple,
    GridSpec,
    LinearModel,
    LoadRanges,
    MLPModel,
    ModelSpec,
    RansacFitError,
    SurrogateConfig,
    TrainingDivergedError,
    WrenchEstimate,
    cross_validate,
    dataset_to_arrays,
    estimate_wrench,
    gen_calibration_dataset,
    gradient_check,
    load_model,
    mlp_fit,
    mlp_init,
    mlp_loss,
    predict,
    ransac_fit,
    report_rows,
    rmse,
    save_model,
)
from wrenchfield.calib import _object_folds


class TestRansac:
    def test_exact_line_recovered_with_all_inliers(self):
        x = np.linspace(-2, 5, 30)
        y = 1.75 * x - 0.4
        m = ransac_fit(x, y)
        assert m.slope == pytest.approx(1.75, abs=1e-12)
        assert m.intercept == pytest.approx(-0.4, abs=1e-12)
        assert m.inlier_mask.all()

    def test_gross_outliers_rejected(self):
        # 80 points on y = 3x with sigma = 0.01 plus 20 gross outliers:
        # recovered slope must sit within 2% and the outliers must be
        # excluded from the consensus set.
        rng = np.random.default_rng(11)
        x_in = rng.uniform(0, 10, 80)
        y_in = 3.0 * x_in + rng.normal(0, 0.01, 80)
        x_out = rng.uniform(0, 10, 20)
        y_out = rng.uniform(-30, 30, 20)
        x = np.concatenate([x_in, x_out])
        y = np.concatenate([y_in, y_out])
        m = ransac_fit(x, y, seed=3)
        assert abs(m.slope - 3.0) <= 0.02 * 3.0
        resid_out = np.abs(y_out - (m.slope * x_out + m.intercept))
        assert not m.inlier_mask[80:][resid_out > 1.0].any()

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 1, 40)
        y = 2 * x + rng.normal(0, 0.05, 40)
        a = ransac_fit(x, y, seed=9)
        b = ransac_fit(x, y, seed=9)
        assert (a.slope, a.intercept) == (b.slope, b.intercept)
        np.testing.assert_array_equal(a.inlier_mask, b.inlier_mask)

    def test_identical_x_rejected(self):
        with pytest.raises(ValueError, match="identical"):
            ransac_fit([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="at least 2"):
            ransac_fit([1.0], [1.0])

    def test_min_inliers_enforced(self):
        # half the data on each of two lines: no consensus reaches 90%
        x = np.linspace(0, 1, 20)
        y = np.where(np.arange(20) < 10, 5 * x, -5 * x + 3)
        with pytest.raises(RansacFitError, match="inliers"):
            ransac_fit(x, y, min_inliers=18, inlier_tol=1e-6)

    def test_non_finite_params_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            LinearModel(np.nan, 0.0, np.ones(3, dtype=bool))


class TestMLP:
    def test_init_deterministic_and_bounded(self):
        a = mlp_init([3, 10, 1], seed=2)
        b = mlp_init([3, 10, 1], seed=2)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)
        lim0 = np.sqrt(6.0 / 13)
        assert np.max(np.abs(a.weights[0])) <= lim0
        assert all(np.all(bias == 0) for bias in a.biases)
        assert a.n_params() == 3 * 10 + 10 + 10 * 1 + 1

    def test_init_validation(self):
        with pytest.raises(ValueError, match="layer_sizes"):
            mlp_init([4])
        with pytest.raises(ValueError, match="layer_sizes"):
            mlp_init([4, 0, 1])

    def test_memorizes_noisy_line(self):
        rng = np.random.default_rng(0)
        sigma = 0.01
        x = rng.uniform(-1, 1, (120, 1))
        y = 2.0 * x + rng.normal(0, sigma, (120, 1))
        model = mlp_fit(x[:100], y[:100], [1, 10, 1], seed=1)
        held = predict(model, x[100:])
        assert rmse(held, 2.0 * x[100:]) <= 2 * sigma

    def test_loss_history_monotone_headroom(self):
        # L-BFGS line search guarantees descent per accepted iterate
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, (50, 2))
        y = (x[:, :1] ** 2 + x[:, 1:]) * 0.5
        model = mlp_fit(x, y, [2, 8, 1], seed=0, max_iter=60)
        h = np.array(model.loss_history)
        assert len(h) > 5
        assert np.all(np.diff(h) <= 1e-12)
        assert h[-1] < 0.1 * h[0]

    def test_gradient_check_five_inits(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((12, 3))
        Y = rng.standard_normal((12, 2))
        for seed in range(5):
            model = mlp_init([3, 7, 5, 2], seed=seed)
            assert gradient_check(model, X, Y) <= 1e-5

    def test_diverged_training_raises(self):
        X = np.array([[1.0], [np.inf]])
        Y = np.array([[1.0], [1.0]])
        with np.errstate(invalid="ignore"), pytest.raises(TrainingDivergedError):
            mlp_fit(X, Y, [1, 4, 1], standardize=False)

    def test_constant_input_column_survives_standardization(self):
        X = np.column_stack([np.linspace(0, 1, 30), np.full(30, 7.0)])
        Y = X[:, :1] * 3.0
        model = mlp_fit(X, Y, [2, 6, 1], seed=0)
        assert np.all(np.isfinite(predict(model, X)))
        assert model.x_std[1] == 1.0

    def test_fit_validation(self):
        with pytest.raises(ValueError, match="same nonzero"):
            mlp_fit(np.zeros((3, 1)), np.zeros((2, 1)), [1, 4, 1])
        with pytest.raises(ValueError, match="inconsistent"):
            mlp_fit(np.zeros((3, 2)), np.zeros((3, 1)), [1, 4, 1])
        with pytest.raises(ValueError, match="activation"):
            mlp_fit(np.zeros((3, 1)), np.zeros((3, 1)), [1, 4, 1], activation="relu")

    def test_loss_definition(self):
        model = mlp_init([1, 2, 1], seed=0)
        X = np.array([[0.0]])
        pred = predict(MLPModel(model.layer_sizes, model.weights, model.biases), X)
        expected = 0.5 * (pred[0, 0] - 3.0) ** 2
        assert mlp_loss(model, X, np.array([[3.0]])) == pytest.approx(expected, rel=1e-12)


class TestPredictAndWrench:
    def test_linear_predict_is_affine(self):
        m = LinearModel(2.0, 1.0, np.ones(2, dtype=bool))
        np.testing.assert_allclose(predict(m, [0.0, 1.0, 2.0]), [1.0, 3.0, 5.0])

    def test_mlp_dim_mismatch(self):
        model = mlp_init([3, 4, 1])
        with pytest.raises(ValueError, match="input dim"):
            predict(model, np.zeros((5, 2)))

    def test_unknown_model_type(self):
        with pytest.raises(TypeError, match="unknown model"):
            predict({"slope": 1.0}, [1.0])

    def test_estimate_wrench_clamps_forces_not_torsion(self):
        models = {
            "f_n": LinearModel(1.0, -5.0, np.ones(2, dtype=bool)),
            "f_t": LinearModel(1.0, -5.0, np.ones(2, dtype=bool)),
            "f_tau": LinearModel(1.0, -5.0, np.ones(2, dtype=bool)),
        }
        triple = FeatureTriple(s_n=1.0, s_t=1.0, s_t_direction=np.array([1.0, 0.0]), s_tau=1.0)
        w = estimate_wrench(models, triple)
        assert w.f_n == 0.0 and w.f_t == 0.0
        assert w.f_tau == -4.0  # torsion is signed, never clamped
        np.testing.assert_array_equal(w.f_t_direction, [1.0, 0.0])

    def test_rmse_value_and_validation(self):
        assert rmse([5.0, 0.0], [0.0, 0.0]) == pytest.approx(np.sqrt(12.5))
        with pytest.raises(ValueError, match="equal-length"):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(ValueError, match="nonempty"):
            rmse([], [])


def _tiny_dataset(n_objects=4, per_object=6, seed=2, **rng_kw):
    cfg = SurrogateConfig(falloff_sigma=np.inf)
    grid = GridSpec(16, 16, 1.0)
    ranges = LoadRanges(
        f_n=(0.5, 8.0),
        f_t_mag=(0.0, 3.0),
        f_tau=(-20.0, 20.0),
        sigma=(np.inf, np.inf),
        gain_jitter=0.0,
        **rng_kw,
    )
    return gen_calibration_dataset(cfg, n_objects, per_object, ranges, seed=seed, grid=grid)


class TestCrossValidation:
    def test_dataset_to_arrays_shapes(self):
        samples = _tiny_dataset()
        feats, raws, truths, objs = dataset_to_arrays(samples)
        assert feats.shape == (24, 3)
        assert raws.shape == (24, 2 * 16 * 16)
        assert truths.shape == (24, 3)
        assert sorted(set(objs)) == [0, 1, 2, 3]

    def test_object_folds_partition(self):
        ids = np.repeat(np.arange(6), 3)
        folds = _object_folds(ids, 3)
        assert len(folds) == 3
        total = np.zeros(len(ids), dtype=int)
        for mask in folds:
            fold_objs = set(ids[mask])
            for other in folds:
                if other is not mask:
                    assert fold_objs.isdisjoint(set(ids[other]))
            total += mask.astype(int)
        np.testing.assert_array_equal(total, 1)  # exactly one test fold each

    def test_object_folds_k_bounds(self):
        ids = np.repeat(np.arange(4), 2)
        with pytest.raises(ValueError, match="k_by_object"):
            _object_folds(ids, 1)
        with pytest.raises(ValueError, match="k_by_object"):
            _object_folds(ids, 5)

    def test_ransac_cv_near_zero_on_noiseless_linear_data(self):
        samples = _tiny_dataset()
        feats, _, truths, objs = dataset_to_arrays(samples)
        rep = cross_validate(feats, truths, objs, ModelSpec("ransac"), k_by_object=4)
        assert rep.per_fold.shape == (4, 3)
        assert rep.n_params == 2
        ranges = truths.max(axis=0) - truths.min(axis=0)
        assert np.all(rep.rmse_mean <= 1e-6 * np.maximum(ranges, 1.0))

    def test_mlp_raw_joint_path(self):
        samples = _tiny_dataset(n_objects=3, per_object=4)
        _, raws, truths, objs = dataset_to_arrays(samples)
        rep = cross_validate(
            raws, truths, objs, ModelSpec("mlp-raw", hidden=(8,), max_iter=40), k_by_object=3
        )
        assert rep.per_fold.shape == (3, 3)
        assert rep.n_params == raws.shape[1] * 8 + 8 + 8 * 3 + 3
        assert np.all(np.isfinite(rep.per_fold))

    def test_cv_deterministic(self):
        samples = _tiny_dataset(n_objects=3, per_object=4)
        feats, _, truths, objs = dataset_to_arrays(samples)
        spec = ModelSpec("mlp", hidden=(6,), max_iter=30)
        a = cross_validate(feats, truths, objs, spec, seed=1)
        b = cross_validate(feats, truths, objs, spec, seed=1)
        np.testing.assert_array_equal(a.per_fold, b.per_fold)

    def test_model_spec_validation(self):
        with pytest.raises(ValueError, match="unknown model kind"):
            ModelSpec("forest")

    def test_report_rows_structure(self):
        rep = CVReport(ModelSpec("ransac"), np.arange(6.0).reshape(2, 3), 2)
        rows = report_rows([rep])
        assert [r["axis"] for r in rows] == ["f_n", "f_t", "f_tau"]
        assert rows[1]["rmse_mean"] == pytest.approx(2.5)
        assert all(r["method"] == "ransac" and r["n_params"] == 2 for r in rows)


class TestPersistence:
    def test_linear_round_trip(self, tmp_path):
        m = ransac_fit(np.arange(5.0), 2.0 * np.arange(5.0) + 1.0)
        p = tmp_path / "lin.json"
        save_model(m, p)
        m2 = load_model(p)
        x = np.linspace(-3, 3, 7)
        np.testing.assert_array_equal(predict(m, x), predict(m2, x))
        np.testing.assert_array_equal(m.inlier_mask, m2.inlier_mask)

    def test_mlp_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        X = rng.uniform(-1, 1, (40, 1))
        Y = np.sin(2 * X)
        model = mlp_fit(X, Y, [1, 8, 1], seed=0, max_iter=80)
        p = tmp_path / "net.json"
        save_model(model, p)
        model2 = load_model(p)
        np.testing.assert_array_equal(predict(model, X), predict(model2, X))

    def test_unknown_kind_rejected(self, tmp_path):
        p = tmp_path / "mystery.json"
        p.write_text('{"kind": "spline"}')
        with pytest.raises(ValueError, match="unknown model kind"):
            load_model(p)

    def test_cannot_persist_arbitrary_objects(self, tmp_path):
        with pytest.raises(TypeError, match="cannot persist"):
            save_model({"slope": 1}, tmp_path / "x.json")
