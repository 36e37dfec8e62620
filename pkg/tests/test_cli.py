import json
import math
import os

import numpy as np
import pytest

from horizonkit.cli import main
from horizonkit.estimator import write_grid_file
from horizonkit.evaluation import auc
from horizonkit.geometry import HorizonLine, ImageFrame, full_window, transfer_line
from horizonkit.io import read_labels_csv, record_to_line, write_labels_csv, \
    line_to_record
from horizonkit.label_space import THETA_CENTER, build_horizon_label_space
from horizonkit.pano import paint_horizon_panorama, save_image
from horizonkit.sfm import synthesize_model, write_sfm_text
from horizonkit.aggregation import make_crop_grid

from conftest import boundary_rows, line_boundary_rows


def dir_bytes(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as f:
            out[name] = f.read()
    return out


def run_twice_identical(argv_factory, tmp_path, tag):
    out_a, out_b = tmp_path / f"{tag}_a", tmp_path / f"{tag}_b"
    assert main(argv_factory(str(out_a))) == 0
    first = dir_bytes(out_a)
    # identical invocation -> byte-identical directory
    assert main(argv_factory(str(out_a))) == 0
    assert dir_bytes(out_a) == first
    # a different out dir only changes the config echo
    assert main(argv_factory(str(out_b))) == 0
    a, b = dir_bytes(out_a), dir_bytes(out_b)
    a.pop("run_config.json")
    b.pop("run_config.json")
    assert a == b
    return out_a


class TestLabelSfm:
    @pytest.fixture
    def model_file(self, tmp_path):
        model, truth = synthesize_model(
            50, tilt_sigma=math.radians(5), roll_sigma=math.radians(2),
            n_rotated=3, seed=77, model_id="fixture")
        path = tmp_path / "model.txt"
        write_sfm_text(path, model)
        return path, truth

    def test_labels_written_for_inliers(self, model_file, tmp_path, capsys):
        path, truth = model_file
        out = tmp_path / "out"
        assert main(["label-sfm", str(path), "--out-dir", str(out)]) == 0
        records = read_labels_csv(out / "labels.csv")
        assert len(records) >= 45
        report = (out / "report.txt").read_text()
        assert "inliers 47" in report
        assert "skipped_image" in report
        assert "excess residual" in report
        assert (out / "run_config.json").exists()

    def test_labels_close_to_truth(self, model_file, tmp_path):
        path, truth = model_file
        out = tmp_path / "out"
        main(["label-sfm", str(path), "--out-dir", str(out)])
        from horizonkit.geometry import horizon_from_camera
        from horizonkit.sfm import read_sfm_text
        model = read_sfm_text(path)
        cams = {c.image_id: c for c in model.cameras}
        for rec in read_labels_csv(out / "labels.csv"):
            line, frame = record_to_line(rec)
            cam = cams[rec.image_id]
            ref = horizon_from_camera(cam.rig, cam.frame, zenith=truth)
            assert max(abs(line.left - ref.left), abs(line.right - ref.right)) < 0.02

    def test_two_cameras_insufficient(self, tmp_path, capsys):
        model, _ = synthesize_model(2, seed=1)
        path = tmp_path / "tiny.txt"
        write_sfm_text(path, model)
        code = main(["label-sfm", str(path), "--out-dir", str(tmp_path / "o")])
        assert code == 1
        assert "insufficient cameras" in capsys.readouterr().err

    def test_bad_file_reports_line(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("only three fields\n")
        assert main(["label-sfm", str(path), "--out-dir", str(tmp_path / "o")]) == 1
        assert "bad.txt:1" in capsys.readouterr().err

    def test_deterministic(self, model_file, tmp_path):
        path, _ = model_file
        run_twice_identical(
            lambda out: ["label-sfm", str(path), "--out-dir", out],
            tmp_path, "label")


class TestSampleCutouts:
    @pytest.fixture
    def pano_dir(self, tmp_path):
        d = tmp_path / "panos"
        d.mkdir()
        save_image(d / "painted.png", paint_horizon_panorama(512).pixels)
        return d

    @pytest.fixture
    def dists_file(self, tmp_path):
        payload = {
            "fov": {"mean_deg": 70.0, "std_deg": 12.0},
            "roll": {"loc": 0.0, "scale": 0.02, "dof": 2.43},
            "tilt": {"samples": list(np.linspace(-0.15, 0.15, 21)), "bandwidth": 0.003},
            "yaw": {"uniform": [0.0, 2.0 * math.pi]},
        }
        path = tmp_path / "dists.json"
        path.write_text(json.dumps(payload))
        return path

    def test_count_and_manifest(self, pano_dir, dists_file, tmp_path):
        out = tmp_path / "cut"
        assert main(["sample-cutouts", str(pano_dir), "--dists", str(dists_file),
                     "--count", "6", "--size", "96", "--out-dir", str(out)]) == 0
        pngs = [n for n in os.listdir(out) if n.endswith(".png")]
        assert len(pngs) == 6
        records = read_labels_csv(out / "manifest.csv")
        assert len(records) == 6
        assert all(r.width == 96 for r in records)

    def test_boundary_matches_manifest_labels(self, pano_dir, dists_file, tmp_path):
        from horizonkit.pano import load_image
        out = tmp_path / "cut"
        main(["sample-cutouts", str(pano_dir), "--dists", str(dists_file),
              "--count", "4", "--size", "128", "--out-dir", str(out)])
        for rec in read_labels_csv(out / "manifest.csv"):
            line, _ = record_to_line(rec)
            if max(abs(line.left), abs(line.right)) > 0.4:
                continue
            image = load_image(out / rec.image_id)
            measured = boundary_rows(image)
            predicted = line_boundary_rows(line, 128)
            ok = ~np.isnan(measured)
            assert np.max(np.abs(measured[ok] - predicted[ok])) <= 1.0

    def test_rejects_bad_panorama(self, dists_file, tmp_path, capsys):
        d = tmp_path / "badpanos"
        d.mkdir()
        save_image(d / "square.png", np.zeros((128, 128)))
        assert main(["sample-cutouts", str(d), "--dists", str(dists_file),
                     "--count", "1", "--out-dir", str(tmp_path / "o")]) == 1
        assert "W = 2H" in capsys.readouterr().err

    def test_deterministic_and_seed_sensitivity(self, pano_dir, dists_file, tmp_path):
        out = run_twice_identical(
            lambda o: ["sample-cutouts", str(pano_dir), "--dists", str(dists_file),
                       "--count", "3", "--size", "64", "--out-dir", o,
                       "--seed", "5"],
            tmp_path, "cut")
        other = tmp_path / "cut_other"
        main(["sample-cutouts", str(pano_dir), "--dists", str(dists_file),
              "--count", "3", "--size", "64", "--out-dir", str(other), "--seed", "6"])
        assert dir_bytes(out)["manifest.csv"] != dir_bytes(other)["manifest.csv"]

    def test_workers_do_not_change_output(self, pano_dir, dists_file, tmp_path):
        outs = []
        for workers, tag in ((1, "w1"), (4, "w4")):
            out = tmp_path / tag
            main(["sample-cutouts", str(pano_dir), "--dists", str(dists_file),
                  "--count", "5", "--size", "64", "--out-dir", str(out),
                  "--workers", str(workers)])
            outs.append(dir_bytes(out))
        a, b = outs
        a.pop("run_config.json")
        b.pop("run_config.json")
        assert a == b


class TestEvaluate:
    def _write_pair(self, tmp_path, errs_px):
        labels, preds = [], []
        for k, e in enumerate(errs_px):
            labels.append(("i%d" % k, 100, 100, 50.0, 50.0))
            preds.append(("i%d" % k, 100, 100, 50.0 + e, 50.0 + e))
        from horizonkit.io import LabelRecord
        write_labels_csv(tmp_path / "labels.csv", [LabelRecord(*r) for r in labels])
        write_labels_csv(tmp_path / "preds.csv", [LabelRecord(*r) for r in preds])

    def test_perfect_predictions_print_auc_one(self, tmp_path, capsys):
        self._write_pair(tmp_path, [0.0, 0.0, 0.0])
        assert main(["evaluate", str(tmp_path / "labels.csv"),
                     str(tmp_path / "preds.csv"),
                     "--out-dir", str(tmp_path / "out")]) == 0
        assert "AUC 1.0000" in capsys.readouterr().out

    def test_matches_library_auc(self, tmp_path, capsys):
        errs_px = [5.0, 10.0, 20.0]
        self._write_pair(tmp_path, errs_px)
        main(["evaluate", str(tmp_path / "labels.csv"), str(tmp_path / "preds.csv"),
              "--out-dir", str(tmp_path / "out")])
        printed = capsys.readouterr().out
        expected = auc([e / 100.0 for e in errs_px]).auc
        assert f"AUC {expected:.4f}" in printed

    def test_max_threshold_flag(self, tmp_path, capsys):
        self._write_pair(tmp_path, [5.0, 10.0, 20.0])
        main(["evaluate", str(tmp_path / "labels.csv"), str(tmp_path / "preds.csv"),
              "--max-threshold", "0.5", "--out-dir", str(tmp_path / "out")])
        printed = capsys.readouterr().out
        expected = auc([0.05, 0.10, 0.20], 0.5).auc
        assert f"AUC {expected:.4f}" in printed

    def test_missing_id_fails_without_flag(self, tmp_path, capsys):
        from horizonkit.io import LabelRecord
        write_labels_csv(tmp_path / "labels.csv",
                         [LabelRecord("a", 10, 10, 5.0, 5.0),
                          LabelRecord("b", 10, 10, 5.0, 5.0)])
        write_labels_csv(tmp_path / "preds.csv", [LabelRecord("a", 10, 10, 5.0, 5.0)])
        assert main(["evaluate", str(tmp_path / "labels.csv"),
                     str(tmp_path / "preds.csv"),
                     "--out-dir", str(tmp_path / "out")]) == 1
        assert "missing predictions" in capsys.readouterr().err
        assert main(["evaluate", str(tmp_path / "labels.csv"),
                     str(tmp_path / "preds.csv"), "--allow-missing",
                     "--out-dir", str(tmp_path / "out")]) == 0

    def test_deterministic(self, tmp_path):
        self._write_pair(tmp_path, [3.0, 8.0, 14.0])
        run_twice_identical(
            lambda out: ["evaluate", str(tmp_path / "labels.csv"),
                         str(tmp_path / "preds.csv"), "--out-dir", out],
            tmp_path, "eval")


class TestPredictAggregate:
    @pytest.fixture
    def image_dir(self, tmp_path):
        from horizonkit.pano import render_cutout
        d = tmp_path / "imgs"
        d.mkdir()
        pano = paint_horizon_panorama(512)
        rng = np.random.default_rng(3)
        self.truth = {}
        for k in range(4):
            tilt = rng.uniform(-0.1, 0.1)
            roll = rng.uniform(-0.05, 0.05)
            img, line = render_cutout(pano, rng.uniform(0, 6.28), tilt, roll,
                                      70.0, 128)
            name = f"img{k}.png"
            save_image(d / name, img)
            self.truth[name] = line
        return d

    @pytest.fixture
    def prior_spec(self, tmp_path, image_dir):
        # prior built from the truth labels of the fixture images
        frame = ImageFrame(128, 128)
        records = [line_to_record(name, line, frame)
                   for name, line in sorted(self.truth.items())]
        # replicate to satisfy bin-building sample requirements
        reps = []
        rng = np.random.default_rng(8)
        for k in range(300):
            name, line = list(sorted(self.truth.items()))[k % 4]
            jitter = HorizonLine.from_theta_rho(
                line.theta + rng.normal(0, 0.02), line.rho + rng.normal(0, 0.02))
            reps.append(line_to_record(f"jit{k}", jitter, frame))
        write_labels_csv(tmp_path / "prior_labels.csv", records + reps)
        spec = tmp_path / "prior.json"
        spec.write_text(json.dumps({"kind": "prior",
                                    "labels_csv": "prior_labels.csv"}))
        return spec

    def test_center_strategy_runs_and_is_deterministic(self, image_dir, prior_spec,
                                                       tmp_path):
        out = run_twice_identical(
            lambda o: ["predict-aggregate", str(image_dir), "--predictor",
                       str(prior_spec), "--strategy", "center", "--bins", "12",
                       "--out-dir", o],
            tmp_path, "pred")
        records = read_labels_csv(out / "predictions.csv")
        assert len(records) == 4

    def test_center_equals_single_crop_prediction(self, image_dir, prior_spec,
                                                  tmp_path):
        from horizonkit.cli import _load_predictor
        from horizonkit.estimator import predict
        from horizonkit.pano import load_image
        out = tmp_path / "center"
        main(["predict-aggregate", str(image_dir), "--predictor", str(prior_spec),
              "--strategy", "center", "--bins", "12", "--out-dir", str(out)])
        spec = _load_predictor(str(prior_spec), 12)
        name = sorted(os.listdir(image_dir))[0]
        image = load_image(image_dir / name)
        dist = predict(spec, image)  # image already square
        rec = next(r for r in read_labels_csv(out / "predictions.csv")
                   if r.image_id == name)
        line, _ = record_to_line(rec)
        assert line.left == pytest.approx(dist.point.left, abs=1e-9)
        assert line.right == pytest.approx(dist.point.right, abs=1e-9)

    def test_average_and_optimize_strategies(self, image_dir, prior_spec, tmp_path):
        for strategy in ("average", "optimize"):
            out = tmp_path / strategy
            assert main(["predict-aggregate", str(image_dir), "--predictor",
                         str(prior_spec), "--strategy", strategy, "--bins", "12",
                         "--out-dir", str(out)]) == 0
            assert len(read_labels_csv(out / "predictions.csv")) == 4

    def test_peaked_external_grids_recover_shared_horizon(self, tmp_path):
        # every crop's grid is one-hot at the shared global horizon
        size = 200
        frame = ImageFrame(size, size)
        d = tmp_path / "imgs"
        d.mkdir()
        save_image(d / "flat.png", np.full((size, size), 0.5))
        rng = np.random.default_rng(1)
        theta_bins, rho_bins = build_horizon_label_space(
            THETA_CENTER + rng.normal(0, 0.1, 4000), rng.normal(0, 0.2, 4000), n=100)
        global_line = HorizonLine.from_theta_rho(THETA_CENTER + 0.04, 0.12, 1.0)
        grids = {}
        full = full_window(frame)
        for k, win in enumerate(make_crop_grid(frame)):
            local = transfer_line(global_line, full, win)
            grid = np.zeros((100, 100))
            i = int(np.argmin(np.abs(theta_bins.centers - local.theta)))
            j = int(np.argmin(np.abs(rho_bins.centers - local.rho)))
            grid[i, j] = 1.0
            grids[f"flat.png#crop{k}"] = grid
        write_grid_file(tmp_path / "grids.bin", grids, theta_bins, rho_bins)
        spec_path = tmp_path / "external.json"
        spec_path.write_text(json.dumps({
            "kind": "external-grid", "grid_file": "grids.bin",
            "bins": {"theta": theta_bins.to_dict(), "rho": rho_bins.to_dict()}}))

        for strategy in ("average", "optimize"):
            out = tmp_path / f"ext_{strategy}"
            assert main(["predict-aggregate", str(d), "--predictor", str(spec_path),
                         "--strategy", strategy, "--out-dir", str(out)]) == 0
            rec = read_labels_csv(out / "predictions.csv")[0]
            line, _ = record_to_line(rec)
            dt = float(np.diff(theta_bins.centers).max())
            dr = float(np.diff(rho_bins.centers).max())
            assert abs(line.theta - global_line.theta) <= dt + 1e-9
            assert abs(line.rho - global_line.rho) <= dr + 1e-9

    def test_missing_external_grid_surfaces(self, tmp_path, capsys):
        size = 128
        d = tmp_path / "imgs"
        d.mkdir()
        save_image(d / "a.png", np.zeros((size, size)))
        rng = np.random.default_rng(2)
        theta_bins, rho_bins = build_horizon_label_space(
            THETA_CENTER + rng.normal(0, 0.1, 2000), rng.normal(0, 0.2, 2000), n=10)
        write_grid_file(tmp_path / "grids.bin", {}, theta_bins, rho_bins)
        spec_path = tmp_path / "external.json"
        spec_path.write_text(json.dumps({
            "kind": "external-grid", "grid_file": "grids.bin",
            "bins": {"theta": theta_bins.to_dict(), "rho": rho_bins.to_dict()}}))
        assert main(["predict-aggregate", str(d), "--predictor", str(spec_path),
                     "--strategy", "center", "--out-dir", str(tmp_path / "o")]) == 1
        assert "no stored grid" in capsys.readouterr().err


class TestRunConfig:
    def test_config_echo_round_trips(self, tmp_path):
        self_dir = tmp_path / "out"
        from horizonkit.io import LabelRecord
        write_labels_csv(tmp_path / "l.csv", [LabelRecord("a", 10, 10, 5.0, 5.0)])
        write_labels_csv(tmp_path / "p.csv", [LabelRecord("a", 10, 10, 6.0, 5.0)])
        main(["evaluate", str(tmp_path / "l.csv"), str(tmp_path / "p.csv"),
              "--out-dir", str(self_dir)])
        config = json.loads((self_dir / "run_config.json").read_text())
        args = config["arguments"]
        rerun = tmp_path / "rerun"
        main(["evaluate", args["labels"], args["predictions"],
              "--max-threshold", str(args["max_threshold"]),
              "--out-dir", str(rerun)])
        a = dir_bytes(self_dir)
        b = dir_bytes(rerun)
        a.pop("run_config.json")
        b.pop("run_config.json")
        assert a == b
