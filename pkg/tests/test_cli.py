import json
import os

import numpy as np
import pytest

from wrenchfield.cli import main


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    rc = main(
        [
            "synth",
            "--objects", "3",
            "--per-object", "4",
            "--nx", "16",
            "--ny", "16",
            "--noise-sigma", "0.005",
            "--gain-jitter", "0.1",
            "--seed", "5",
            "--out", str(out),
        ]
    )
    assert rc == 0
    return out


class TestSynth:
    def test_outputs_and_deterministic_hash(self, tmp_path, capsys):
        argv = [
            "synth", "--objects", "2", "--per-object", "3",
            "--nx", "12", "--ny", "12", "--seed", "3",
        ]
        assert main(argv + ["--out", str(tmp_path / "a")]) == 0
        assert main(argv + ["--out", str(tmp_path / "b")]) == 0
        hash_a, hash_b = capsys.readouterr().out.split()
        assert hash_a == hash_b and len(hash_a) == 64
        files = sorted(os.listdir(tmp_path / "a"))
        assert files == [f"field_{i:04d}.csv" for i in range(6)] + ["manifest.json", "run.json"]

    def test_run_json_echoes_config(self, tmp_path):
        out = tmp_path / "ds"
        main(["synth", "--objects", "2", "--per-object", "2", "--nx", "12", "--ny", "12",
              "--out", str(out)])
        doc = json.loads((out / "run.json").read_text())
        assert doc["objects"] == 2 and doc["nx"] == 12
        assert doc["out"] == str(out)


class TestTrack:
    def test_stream_to_gridded_field(self, tmp_path, capsys):
        lines = []
        for frame, shift in enumerate([0.0, 0.2, 0.4]):
            for ix in range(5):
                for iy in range(5):
                    lines.append(f"{frame},{ix * 3.0 + shift},{iy * 3.0}")
        stream = tmp_path / "stream.csv"
        stream.write_text("\n".join(lines) + "\n")
        out = tmp_path / "tracked"
        rc = main(
            [
                "track", str(stream),
                "--nx", "9", "--ny", "9", "--spacing", "1.5",
                "--origin-x", "0.0", "--origin-y", "0.0",
                "--max-step", "1.0",
                "--out", str(out),
            ]
        )
        assert rc == 0
        assert "3 frames, 25/25 tracks alive" in capsys.readouterr().out
        assert (out / "tracks.csv").exists()
        assert (out / "field_frame_0002.csv").exists()


class TestDecompose:
    def test_exports_and_prints_features(self, dataset_dir, tmp_path, capsys):
        field = dataset_dir / "field_0000.csv"
        out = tmp_path / "dec"
        assert main(["decompose", str(field), "--out", str(out)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert set(doc) == {"s_n", "s_t", "s_t_direction", "s_tau"}
        for suffix in ("_d", "_r", "_h", "_D", "_R"):
            assert (out / f"field_0000{suffix}.csv").exists()

    def test_missing_field_file_exits_2(self, tmp_path, capsys):
        assert main(["decompose", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2
        assert "error:" in capsys.readouterr().err


class TestFeatures:
    def test_dataset_directory_form(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "feat"
        assert main(["features", str(dataset_dir), "--out", str(out)]) == 0
        assert "12 rows" in capsys.readouterr().out
        lines = (out / "features.csv").read_text().strip().splitlines()
        assert lines[0].strip() == "path,s_n,s_t,dir_x,dir_y,s_tau"
        assert len(lines) == 13


class TestCalibrateEvaluate:
    def test_ransac_calibration_on_clean_data(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "models"
        assert main(["calibrate", str(dataset_dir), "--model", "ransac", "--out", str(out)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["model"] == "ransac"
        # dataset has mild noise/jitter; the fit should still be tight
        assert doc["train_rmse"]["f_n"] < 0.5
        for axis in ("f_n", "f_t", "f_tau"):
            assert (out / f"model_{axis}.json").exists()

    def test_evaluate_report_is_reproducible(self, dataset_dir, tmp_path, capsys):
        argv = ["evaluate", str(dataset_dir), "--models", "ransac", "--folds", "3", "--seed", "1"]
        assert main(argv + ["--out", str(tmp_path / "e1")]) == 0
        assert main(argv + ["--out", str(tmp_path / "e2")]) == 0
        capsys.readouterr()
        r1 = (tmp_path / "e1" / "report.csv").read_bytes()
        r2 = (tmp_path / "e2" / "report.csv").read_bytes()
        assert r1 == r2
        lines = r1.decode().strip().splitlines()
        assert lines[0].strip() == "method,axis,rmse_mean,rmse_std,n_params"
        assert len(lines) == 4  # three axes for one method

    def test_evaluate_multiple_methods(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "cmp"
        rc = main(
            [
                "evaluate", str(dataset_dir),
                "--models", "ransac,mlp",
                "--hidden", "4",
                "--max-iter", "25",
                "--folds", "3",
                "--out", str(out),
            ]
        )
        assert rc == 0
        lines = (out / "report.csv").read_text().strip().splitlines()
        assert len(lines) == 7
        methods = {ln.split(",")[0] for ln in lines[1:]}
        assert methods == {"ransac", "mlp"}


def _scenario_doc(controller=True):
    return {
        "plant": {
            "stiffness": 2.0,
            "object_width": 20.0,
            "mass": 0.2,
            "mu_static": 0.6,
            "mu_dynamic": 0.45,
            "mu_nominal": 0.5,
        },
        "schedule": [[0.0, 1.0], [20.0, 8.0]],
        "controller": {"mu": 0.5, "band": 0.1} if controller else None,
        "duration": 20.0,
        "dt": 0.01,
        "d_g0": 19.0,
    }


class TestGrasp:
    def test_controlled_hold_exits_0(self, tmp_path, capsys):
        scen = tmp_path / "on.json"
        scen.write_text(json.dumps(_scenario_doc(controller=True)))
        out = tmp_path / "g_on"
        assert main(["grasp", str(scen), "--expect-hold", "--out", str(out)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["failed"] is False and doc["steps"] == 2000
        assert (out / "trace.csv").exists()
        assert (out / "ratio.svg").exists()
        assert (out / "run.json").exists()

    def test_uncontrolled_drop_exits_3(self, tmp_path, capsys):
        scen = tmp_path / "off.json"
        scen.write_text(json.dumps(_scenario_doc(controller=False)))
        out = tmp_path / "g_off"
        assert main(["grasp", str(scen), "--out", str(out)]) == 3
        doc = json.loads(capsys.readouterr().out)
        assert doc["failed"] is True and doc["fail_time"] is not None
        assert (out / "trace.csv").exists()  # artifacts written even on failure

    def test_malformed_scenario_exits_2(self, tmp_path, capsys):
        scen = tmp_path / "bad.json"
        doc = _scenario_doc()
        del doc["d_g0"]
        scen.write_text(json.dumps(doc))
        assert main(["grasp", str(scen), "--out", str(tmp_path / "g")]) == 2
        assert "missing required key" in capsys.readouterr().err

    def test_invalid_json_exits_2(self, tmp_path, capsys):
        scen = tmp_path / "broken.json"
        scen.write_text("{not json")
        assert main(["grasp", str(scen), "--out", str(tmp_path / "g")]) == 2
        capsys.readouterr()


class TestPlot:
    def test_replot_from_trace(self, tmp_path, capsys):
        scen = tmp_path / "on.json"
        doc = _scenario_doc(controller=True)
        doc["duration"] = 2.0
        scen.write_text(json.dumps(doc))
        g_out = tmp_path / "g"
        assert main(["grasp", str(scen), "--out", str(g_out)]) == 0
        p_out = tmp_path / "plots"
        rc = main(["plot", str(g_out / "trace.csv"), "--mu", "0.5", "--band", "0.1",
                   "--out", str(p_out)])
        assert rc == 0
        capsys.readouterr()
        assert "<svg" in (p_out / "ratio.svg").read_text()[:500]


class TestTopLevel:
    def test_env_output_root(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("WRENCHFIELD_OUT", str(tmp_path))
        assert main(["synth", "--objects", "2", "--per-object", "2",
                     "--nx", "12", "--ny", "12"]) == 0
        capsys.readouterr()
        assert (tmp_path / "dataset" / "manifest.json").exists()

    def test_unknown_subcommand_exits_2(self, capsys):
        assert main(["transmogrify"]) == 2
        capsys.readouterr()

    def test_bad_flag_value_exits_2(self, capsys):
        assert main(["synth", "--objects", "two"]) == 2
        capsys.readouterr()
