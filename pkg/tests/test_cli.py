"""Command-line interface: subcommands, config plumbing, reproducibility."""

import filecmp
import json
import subprocess
import sys

import numpy as np
import pytest

from rfsense import cli
from rfsense.trace import load_trace


def run(args):
    return cli.main(args)


@pytest.fixture(scope="module")
def vitals_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("vitals")
    rc = run(["simulate", "vitals", "--hr", "66", "--duration", "40",
              "--seed", "3", "-o", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def link_config(tmp_path_factory):
    """2 m link plus the wide-window speed settings sized for 20 s crossings."""
    path = tmp_path_factory.mktemp("cfg") / "link.json"
    path.write_text(json.dumps({
        "link": {"rx": [0.0, 2.0]},
        "speed": {"window_s": 5.5, "smoothing_window": 5,
                  "search_interval_s": 12.0},
    }))
    return path


@pytest.fixture(scope="module")
def crossing_files(tmp_path_factory, link_config):
    files = []
    for i, v in enumerate(("0.6", "1.0", "1.4")):
        out = tmp_path_factory.mktemp(f"cross{i}")
        rc = run(["simulate", "crossing", "--speed", v, "--seed", str(i + 1),
                  "--config", str(link_config), "-o", str(out)])
        assert rc == 0
        files.append(out / "crossing.csv")
    return files


@pytest.fixture(scope="module")
def calibrated(tmp_path_factory, crossing_files, link_config):
    out = tmp_path_factory.mktemp("cal")
    rc = run(["speed", "calibrate", *map(str, crossing_files),
              "--config", str(link_config), "-o", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def gesture_corpus(tmp_path_factory):
    """Tiny two-label corpus; quality is tested elsewhere, plumbing here."""
    seg_cfg = tmp_path_factory.mktemp("gcfg") / "seg.json"
    seg_cfg.write_text(json.dumps({"segmentation": {"long_window": 4490}}))
    train = tmp_path_factory.mktemp("gtrain")
    test = tmp_path_factory.mktemp("gtest")
    scratch = tmp_path_factory.mktemp("gscratch")
    seed = 0
    for split, count in ((train, 4), (test, 2)):
        rows = ["file,label,start_s,end_s"]
        for label in ("punch", "drag"):
            for k in range(count):
                seed += 1
                rc = run(["simulate", "gesture", "--label", label,
                          "--seed", str(seed), "-o", str(scratch)])
                assert rc == 0
                name = f"{label}_{k}.csv"
                (scratch / "gesture.csv").rename(split / name)
                rows.append(f"{name},{label},,")
        (split / "manifest.csv").write_text("\n".join(rows) + "\n")
    return train, test, seg_cfg


class TestVersionAndParsing:
    def test_version_prints_and_exits_zero(self, capsys):
        assert run(["version"]) == 0
        assert capsys.readouterr().out.strip() == cli.__version__

    def test_module_is_runnable(self):
        proc = subprocess.run([sys.executable, "-m", "rfsense.cli", "version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.strip() == cli.__version__

    def test_missing_subcommand_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run([])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_config_file_must_exist(self, tmp_path):
        rc = run(["simulate", "vitals", "--config", str(tmp_path / "nope.json"),
                  "-o", str(tmp_path)])
        assert rc == 2

    def test_config_file_must_be_json_object(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        rc = run(["simulate", "vitals", "--config", str(bad), "-o", str(tmp_path)])
        assert rc == 2

    def test_unknown_config_key_is_usage_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"speed": {"window_sec": 3.0}}))
        rc = run(["speed", "estimate", "missing.csv", "--config", str(bad),
                  "-o", str(tmp_path)])
        assert rc == 2


class TestSimulate:
    def test_vitals_outputs(self, vitals_dir):
        trace = load_trace(vitals_dir / "vitals.csv")
        assert trace.metadata.sample_rate_hz == 449.0
        assert abs(trace.duration_s - 40.0) < 0.01
        assert trace.ground_truth.hr_bpm is not None
        manifest = json.loads((vitals_dir / "manifest.json").read_text())
        assert manifest["command"] == "simulate vitals"
        assert manifest["seed"] == 3
        assert manifest["outputs"] == ["vitals.csv"]
        assert manifest["version"] == cli.__version__

    def test_manifest_has_no_timestamps(self, vitals_dir):
        text = (vitals_dir / "manifest.json").read_text().lower()
        for word in ("time", "date", "stamp"):
            assert word not in text

    def test_crossing_embeds_ground_truth(self, crossing_files):
        trace = load_trace(crossing_files[1])
        assert trace.ground_truth.speed_mps == 1.0
        assert abs(trace.ground_truth.cross_t_s - 10.0) < 1e-9

    def test_crossing_angle_flag(self, tmp_path, link_config):
        rc = run(["simulate", "crossing", "--speed", "1.0", "--angle", "45",
                  "--config", str(link_config), "-o", str(tmp_path)])
        assert rc == 0
        trace = load_trace(tmp_path / "crossing.csv")
        assert trace.metadata.extras["angle_deg"] == repr(45.0)

    def test_unknown_gesture_label_rejected(self, tmp_path):
        rc = run(["simulate", "gesture", "--label", "wave", "-o", str(tmp_path)])
        assert rc == 2

    def test_bad_geometry_fails_nonzero(self, tmp_path):
        # crossing position outside the link
        rc = run(["simulate", "crossing", "--position", "5.0",
                  "-o", str(tmp_path)])
        assert rc != 0

    def test_corpora_layout(self, tmp_path, monkeypatch):
        from rfsense.sim import (DEFAULT_TEMPLATES, NoiseModel,
                                 VitalSignsProfile, simulate_gesture,
                                 simulate_vitals, _with_id)

        def tiny_corpora(seed, fs=449.0):
            quiet = VitalSignsProfile()
            noise = NoiseModel(seed=seed)
            vit = _with_id(simulate_vitals(quiet, noise, 10.0), "vitals_0")
            ges = _with_id(
                simulate_gesture(DEFAULT_TEMPLATES["punch"], noise, seed=seed),
                "gesture_punch_00")
            return {"vitals": [vit], "gesture_train": [ges],
                    "gesture_test": [ges], "crossing": []}

        monkeypatch.setattr(cli, "make_corpora", tiny_corpora)
        rc = run(["simulate", "corpora", "--seed", "5", "-o", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "vitals" / "vitals_0.csv").exists()
        assert (tmp_path / "gesture_train" / "manifest.csv").exists()
        lines = (tmp_path / "gesture_train" / "manifest.csv").read_text().splitlines()
        assert lines[0] == "file,label,start_s,end_s"
        assert lines[1].startswith("gesture_punch_00.csv,punch,")
        cfg = json.loads((tmp_path / "corpus_config.json").read_text())
        assert cfg["segmentation"]["long_window"] == 4490
        assert cfg["speed"]["window_s"] == 5.5
        assert cfg["speed"]["crossing_threshold_hz"] > 0


class TestHeartrate:
    def test_estimates_and_rmse(self, vitals_dir, tmp_path):
        rc = run(["heartrate", str(vitals_dir / "vitals.csv"),
                  "--window", "20", "-o", str(tmp_path)])
        assert rc == 0
        est_lines = (tmp_path / "estimates.csv").read_text().splitlines()
        assert est_lines[0] == "t_s,bpm,status,peak_power"
        assert len(est_lines) > 20
        summary = dict(line.split(",", 1) for line in
                       (tmp_path / "summary.csv").read_text().splitlines()[1:])
        assert float(summary["rmse_bpm"]) < 2.0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["heart"]["window_s"] == 20.0

    def test_no_ground_truth_no_rmse(self, crossing_files, tmp_path):
        rc = run(["heartrate", str(crossing_files[0]), "-o", str(tmp_path)])
        assert rc == 0
        assert "rmse_bpm" not in (tmp_path / "summary.csv").read_text()

    def test_missing_trace_fails(self, tmp_path):
        rc = run(["heartrate", str(tmp_path / "ghost.csv"), "-o", str(tmp_path)])
        assert rc == 1


class TestGesture:
    def test_train_eval_classify_chain(self, gesture_corpus, tmp_path):
        train, test, seg_cfg = gesture_corpus
        model_dir = tmp_path / "model"
        rc = run(["gesture", "train", str(train), "--kind", "knn",
                  "--config", str(seg_cfg), "-o", str(model_dir)])
        assert rc == 0
        model_path = model_dir / "model.json"
        assert model_path.exists()

        eval_dir = tmp_path / "eval"
        rc = run(["gesture", "eval", str(test), "--model", str(model_path),
                  "--config", str(seg_cfg), "-o", str(eval_dir)])
        assert rc == 0
        summary = dict(line.split(",", 1) for line in
                       (eval_dir / "summary.csv").read_text().splitlines()[1:])
        assert 0.0 <= float(summary["mean_accuracy"]) <= 1.0
        conf = (eval_dir / "confusion.csv").read_text().splitlines()
        assert len(conf) == 9    # header plus one row per label
        pred = (eval_dir / "predictions.csv").read_text().splitlines()
        assert pred[0] == "file,actual,predicted"
        assert len(pred) == 5

        cls_dir = tmp_path / "cls"
        rc = run(["gesture", "classify", "--trace", str(test / "punch_0.csv"),
                  "--model", str(model_path), "--config", str(seg_cfg),
                  "-o", str(cls_dir)])
        assert rc == 0
        assert (cls_dir / "prediction.csv").read_text().startswith("file,predicted")

    def test_unknown_manifest_label_rejected(self, gesture_corpus, tmp_path):
        train, _, seg_cfg = gesture_corpus
        bad = tmp_path / "bad_corpus"
        bad.mkdir()
        src = next(p for p in train.iterdir() if p.name != "manifest.csv")
        (bad / src.name).write_bytes(src.read_bytes())
        (bad / "manifest.csv").write_text(
            f"file,label,start_s,end_s\n{src.name},wave,,\n")
        rc = run(["gesture", "train", str(bad), "-o", str(tmp_path)])
        assert rc == 2

    def test_missing_corpus_arg_is_usage_error(self, tmp_path):
        assert run(["gesture", "train", "-o", str(tmp_path)]) == 2

    def test_eval_requires_model(self, gesture_corpus, tmp_path):
        _, test, _ = gesture_corpus
        assert run(["gesture", "eval", str(test), "-o", str(tmp_path)]) == 2


class TestSpeed:
    def test_calibrate_outputs(self, calibrated):
        alpha_lines = (calibrated / "alpha.txt").read_text().splitlines()
        assert alpha_lines[0] == "# rfsense-alpha-v1"
        assert alpha_lines[1].startswith("default,alpha=")
        cal = (calibrated / "calibration.csv").read_text().splitlines()
        assert cal[0] == "file,f_min_av_hz,speed_mps"
        assert len(cal) == 4
        summary = dict(line.split(",", 1) for line in
                       (calibrated / "summary.csv").read_text().splitlines()[1:])
        assert 1.0 < float(summary["alpha_m"]) < 5.0

    def test_estimate_with_ground_truth(self, calibrated, crossing_files,
                                        link_config, tmp_path):
        rc = run(["speed", "estimate", str(crossing_files[1]),
                  "--alpha-file", str(calibrated / "alpha.txt"),
                  "--config", str(link_config), "-o", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "events.csv").read_text().splitlines()
        assert rows[0] == "file,status,t_cross_s,f_min_av_hz,v_hat_mps,gt_speed_mps"
        fields = rows[1].split(",")
        assert fields[1] == "ok"
        assert abs(float(fields[4]) - 1.0) < 0.2
        summary = dict(line.split(",", 1) for line in
                       (tmp_path / "summary.csv").read_text().splitlines()[1:])
        assert float(summary["rmse_mps"]) < 0.2

    def test_estimate_accepts_directory(self, calibrated, crossing_files,
                                        link_config, tmp_path):
        rc = run(["speed", "estimate", str(crossing_files[0].parent),
                  "--alpha-file", str(calibrated / "alpha.txt"),
                  "--config", str(link_config), "-o", str(tmp_path)])
        assert rc == 0

    def test_quiet_trace_reports_no_crossing(self, calibrated, vitals_dir,
                                             tmp_path):
        rc = run(["speed", "estimate", str(vitals_dir / "vitals.csv"),
                  "--alpha-file", str(calibrated / "alpha.txt"),
                  "-o", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "events.csv").read_text().splitlines()
        assert rows[1].split(",")[1] == "no_crossing"

    def test_estimate_without_calibration_is_usage_error(self, crossing_files,
                                                         tmp_path):
        rc = run(["speed", "estimate", str(crossing_files[0]),
                  "-o", str(tmp_path)])
        assert rc == 2

    def test_unknown_link_id_is_usage_error(self, calibrated, crossing_files,
                                            tmp_path):
        rc = run(["speed", "estimate", str(crossing_files[0]),
                  "--alpha-file", str(calibrated / "alpha.txt"),
                  "--link-id", "hallway9", "-o", str(tmp_path)])
        assert rc == 2

    def test_calibrate_needs_two_points(self, crossing_files, link_config,
                                        tmp_path):
        rc = run(["speed", "calibrate", str(crossing_files[0]),
                  "--config", str(link_config), "-o", str(tmp_path)])
        assert rc == 2


class TestReproducibility:
    def _dirs_identical(self, a, b):
        cmp = filecmp.dircmp(a, b)
        assert not cmp.left_only and not cmp.right_only
        _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files,
                                               shallow=False)
        assert not mismatch and not errors

    def test_simulate_rerun_is_byte_identical(self, tmp_path):
        args = ["simulate", "vitals", "--hr", "72", "--duration", "30",
                "--seed", "9"]
        for d in ("a", "b"):
            assert run(args + ["-o", str(tmp_path / d)]) == 0
        self._dirs_identical(tmp_path / "a", tmp_path / "b")

    def test_heartrate_rerun_is_byte_identical(self, vitals_dir, tmp_path):
        args = ["heartrate", str(vitals_dir / "vitals.csv"), "--window", "20"]
        for d in ("a", "b"):
            assert run(args + ["-o", str(tmp_path / d)]) == 0
        self._dirs_identical(tmp_path / "a", tmp_path / "b")

    def test_speed_rerun_is_byte_identical(self, calibrated, crossing_files,
                                           link_config, tmp_path):
        args = ["speed", "estimate", str(crossing_files[2]),
                "--alpha-file", str(calibrated / "alpha.txt"),
                "--config", str(link_config)]
        for d in ("a", "b"):
            assert run(args + ["-o", str(tmp_path / d)]) == 0
        self._dirs_identical(tmp_path / "a", tmp_path / "b")

    def test_different_seed_changes_trace(self, tmp_path):
        for seed in ("1", "2"):
            assert run(["simulate", "vitals", "--duration", "20",
                        "--seed", seed, "-o", str(tmp_path / seed)]) == 0
        a = np.loadtxt(tmp_path / "1" / "vitals.csv", delimiter=",", skiprows=2)
        b = np.loadtxt(tmp_path / "2" / "vitals.csv", delimiter=",", skiprows=2)
        assert not np.array_equal(a[:, 1], b[:, 1])
