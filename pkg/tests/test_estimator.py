import numpy as np
import pytest

from horizonkit.errors import InsufficientData, MissingExternalGrid
from horizonkit.estimator import (PredictorSpec, extract_features, huber_loss,
                                  l2_loss, linear_objective,
                                  make_external_predictor, make_prior_predictor,
                                  predict, read_grid_file, read_grid_json,
                                  train_linear_baseline, write_grid_file,
                                  write_grid_json)
from horizonkit.geometry import HorizonLine
from horizonkit.label_space import THETA_CENTER, build_horizon_label_space


def painted_image(offset, size=64, slope=0.0):
    """Bright above / dark below a horizon at centered offset (and slope)."""
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    x = ((cols + 0.5) - size / 2.0) / size
    y = (size / 2.0 - (rows + 0.5)) / size
    return (y > offset + slope * x).astype(float)


def painted_dataset(offsets, size=64):
    return [(painted_image(off, size), HorizonLine.from_lr(off, off))
            for off in offsets]


def toy_space(n=12, seed=0):
    rng = np.random.default_rng(seed)
    return build_horizon_label_space(
        THETA_CENTER + rng.normal(0, 0.1, 5000), rng.normal(0, 0.2, 5000), n=n)


class TestLosses:
    def test_huber_closed_form_values(self):
        assert huber_loss(0.0) == (0.0, 0.0)
        assert huber_loss(1.0) == (0.5, 1.0)
        assert huber_loss(-1.0) == (0.5, -1.0)
        assert huber_loss(3.0) == (2.5, 1.0)
        assert huber_loss(-3.0) == (2.5, -1.0)

    def test_l2_values(self):
        assert l2_loss(0.0) == (0.0, 0.0)
        assert l2_loss(2.0) == (2.0, 2.0)

    def test_huber_equals_l2_inside_delta(self, rng):
        x = rng.uniform(-1.0, 1.0, size=1000)
        hl, hg = huber_loss(x)
        ll, lg = l2_loss(x)
        assert np.array_equal(hl, ll)
        assert np.array_equal(hg, lg)

    def test_huber_even_and_convex(self, rng):
        x = rng.uniform(-5.0, 5.0, size=500)
        lp, _ = huber_loss(x)
        lm, _ = huber_loss(-x)
        assert np.allclose(lp, lm)
        # convexity via midpoints
        a, b = rng.uniform(-5, 5, size=(2, 500))
        la, _ = huber_loss(a)
        lb, _ = huber_loss(b)
        lm, _ = huber_loss((a + b) / 2.0)
        assert np.all(lm <= (la + lb) / 2.0 + 1e-12)

    def test_huber_c1_at_delta(self):
        eps = 1e-9
        lo, gl = huber_loss(1.0 - eps)
        hi, gh = huber_loss(1.0 + eps)
        assert abs(hi - lo) < 1e-8
        assert abs(gh - gl) < 1e-8

    def test_custom_delta(self):
        loss, grad = huber_loss(3.0, delta=2.0)
        assert loss == pytest.approx(2.0 * (3.0 - 1.0))
        assert grad == 2.0

    def test_gradients_match_finite_differences(self, rng):
        h = 1e-6
        for fn in (lambda x: huber_loss(x), l2_loss, lambda x: huber_loss(x, 0.7)):
            for x in rng.uniform(-4.0, 4.0, size=200):
                if abs(abs(x) - 1.0) < 1e-4 or abs(abs(x) - 0.7) < 1e-4:
                    continue  # kink of the quadratic zone
                _, g = fn(x)
                num = (fn(x + h)[0] - fn(x - h)[0]) / (2 * h)
                assert g == pytest.approx(num, abs=2e-6)


class TestLinearObjective:
    def test_gradient_check_20_random_weight_vectors(self, rng):
        n, d, k = 40, 12, 2
        feats = rng.normal(size=(n, d))
        targets = rng.normal(size=(n, k))
        h = 1e-6
        for loss in ("huber", "l2"):
            for _ in range(20):
                params = rng.normal(scale=0.5, size=k * d + k)
                _, grad = linear_objective(params, feats, targets, loss)
                num = np.empty_like(params)
                for i in range(params.size):
                    up = params.copy()
                    dn = params.copy()
                    up[i] += h
                    dn[i] -= h
                    num[i] = (linear_objective(up, feats, targets, loss)[0]
                              - linear_objective(dn, feats, targets, loss)[0]) / (2 * h)
                denom = max(float(np.linalg.norm(num)), 1e-12)
                assert float(np.linalg.norm(grad - num)) / denom < 1e-5


class TestFeatures:
    def test_dimension_and_determinism(self, rng):
        img = rng.random((90, 90))
        f1 = extract_features(img)
        f2 = extract_features(img)
        assert f1.shape == (512,)
        assert np.array_equal(f1, f2)

    def test_block_mean_exact_when_divisible(self):
        img = np.arange(32 * 32, dtype=float).reshape(32, 32)
        feats = extract_features(img)
        assert feats[0] == pytest.approx(img[:2, :2].mean())

    def test_rgb_averaged(self, rng):
        rgb = rng.random((64, 64, 3))
        assert np.allclose(extract_features(rgb), extract_features(rgb.mean(axis=2)))

    def test_rejects_non_square(self, rng):
        with pytest.raises(ValueError, match="square"):
            extract_features(rng.random((32, 64)))


class TestTrainLinearBaseline:
    def test_constant_labels_learned(self):
        rng = np.random.default_rng(7)
        data = [(rng.random((48, 48)), HorizonLine.from_lr(0.0, 0.0))
                for _ in range(60)]
        spec = train_linear_baseline(data, loss="l2", parameterization="lr",
                                     epochs=60, step=0.01, seed=0)
        for img, _ in data[:10]:
            point = predict(spec, img, bins=toy_space()).point
            assert abs(point.left) < 1e-3 and abs(point.right) < 1e-3

    def test_linearly_solvable_dataset(self):
        rng = np.random.default_rng(8)
        offsets = rng.uniform(-0.3, 0.3, size=120)
        data = painted_dataset(offsets)
        spec = train_linear_baseline(data, loss="huber", parameterization="lr",
                                     epochs=120, step=0.01, seed=0)
        # constant predictor baseline: best constant under the same loss
        targets = np.array([[ln.left, ln.right] for _, ln in data])
        const_loss = float(np.mean(huber_loss(targets - targets.mean(axis=0))[0]))
        assert spec.training_loss[-1] < 0.1 * const_loss

    def test_point_predictions_close_on_training_data(self):
        rng = np.random.default_rng(9)
        offsets = rng.uniform(-0.3, 0.3, size=100)
        data = painted_dataset(offsets)
        spec = train_linear_baseline(data, loss="huber", parameterization="lr",
                                     epochs=120, step=0.01, seed=0)
        bins = toy_space()
        for (img, line), off in list(zip(data, offsets))[:20]:
            point = predict(spec, img, bins=bins).point
            assert abs(point.left - line.left) < 0.05
            assert abs(point.right - line.right) < 0.05

    def test_loss_non_increasing_at_small_step(self):
        rng = np.random.default_rng(10)
        data = painted_dataset(rng.uniform(-0.3, 0.3, size=80))
        for loss in ("huber", "l2"):
            spec = train_linear_baseline(data, loss=loss, parameterization="lr",
                                         epochs=25, step=1e-3, seed=1)
            diffs = np.diff(spec.training_loss)
            assert np.all(diffs <= 1e-12), f"{loss}: {diffs.max()}"

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(11)
        data = painted_dataset(rng.uniform(-0.2, 0.2, size=60))
        a = train_linear_baseline(data, epochs=5, seed=3)
        b = train_linear_baseline(data, epochs=5, seed=3)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)

    def test_theta_rho_parameterization(self):
        rng = np.random.default_rng(12)
        data = painted_dataset(rng.uniform(-0.25, 0.25, size=70))
        spec = train_linear_baseline(data, loss="l2", parameterization="theta_rho",
                                     epochs=80, step=0.01, seed=0)
        img, line = data[0]
        point = predict(spec, img, bins=toy_space()).point
        assert abs(point.rho - line.rho) < 0.05

    def test_insufficient_data(self):
        data = painted_dataset(np.linspace(-0.2, 0.2, 49))
        with pytest.raises(InsufficientData):
            train_linear_baseline(data)


class TestPredictors:
    def test_prior_ignores_pixels(self, rng):
        lines = [HorizonLine.from_theta_rho(THETA_CENTER + rng.normal(0, 0.05),
                                            rng.normal(0, 0.1))
                 for _ in range(500)]
        spec = make_prior_predictor(lines, n=8)
        a = predict(spec, rng.random((32, 32)))
        b = predict(spec, np.zeros((64, 64)))
        assert np.array_equal(a.grid, b.grid)
        assert abs(a.grid.sum() - 1.0) < 1e-9

    def test_prior_histogram_masses(self, rng):
        lines = [HorizonLine.from_theta_rho(THETA_CENTER, -0.2),
                 HorizonLine.from_theta_rho(THETA_CENTER, -0.2),
                 HorizonLine.from_theta_rho(THETA_CENTER, 0.3)]
        theta_bins, rho_bins = toy_space(n=4)
        spec = make_prior_predictor(lines, theta_bins, rho_bins)
        assert spec.prior_grid.sum() == pytest.approx(1.0)
        assert sorted(spec.prior_grid.ravel(), reverse=True)[:2] == [
            pytest.approx(2 / 3), pytest.approx(1 / 3)]

    def test_external_uniform_grid_lowest_index_argmax(self, rng):
        theta_bins, rho_bins = toy_space()
        n = theta_bins.n
        spec = make_external_predictor({"img": np.full((n, n), 1.0 / n ** 2)},
                                       theta_bins, rho_bins)
        dist = predict(spec, rng.random((32, 32)), image_id="img")
        assert dist.point.theta == pytest.approx(theta_bins.centers[0])
        assert dist.point.rho == pytest.approx(rho_bins.centers[0])

    def test_external_missing_id(self, rng):
        theta_bins, rho_bins = toy_space()
        spec = make_external_predictor({}, theta_bins, rho_bins)
        with pytest.raises(MissingExternalGrid):
            predict(spec, rng.random((32, 32)), image_id="nope")

    def test_linear_distribution_is_one_hot_at_prediction(self):
        rng = np.random.default_rng(13)
        data = painted_dataset(rng.uniform(-0.3, 0.3, size=60))
        spec = train_linear_baseline(data, epochs=40, step=0.01, seed=0)
        bins = toy_space()
        dist = predict(spec, data[0][0], bins=bins)
        assert dist.grid.max() == 1.0
        assert dist.grid.sum() == 1.0
        assert dist.max_probability == 1.0

    def test_predict_deterministic(self, rng):
        lines = [HorizonLine.from_theta_rho(THETA_CENTER + rng.normal(0, 0.05),
                                            rng.normal(0, 0.1))
                 for _ in range(500)]
        spec = make_prior_predictor(lines, n=6)
        img = rng.random((32, 32))
        assert np.array_equal(predict(spec, img).grid, predict(spec, img).grid)

    def test_spec_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        data = painted_dataset(rng.uniform(-0.2, 0.2, size=60))
        spec = train_linear_baseline(data, epochs=5, seed=0)
        theta_bins, rho_bins = toy_space()
        spec.theta_bins, spec.rho_bins = theta_bins, rho_bins
        path = tmp_path / "spec.json"
        spec.save_json(path)
        back = PredictorSpec.load_json(path)
        assert back.kind == "linear"
        assert np.array_equal(back.weights, spec.weights)
        img = data[0][0]
        assert np.array_equal(predict(back, img).grid, predict(spec, img).grid)


class TestGridFiles:
    def test_binary_round_trip(self, tmp_path, rng):
        theta_bins, rho_bins = toy_space(n=5)
        grids = {}
        for name in ("a", "b#crop3"):
            g = rng.random((5, 5))
            grids[name] = g / g.sum()
        path = tmp_path / "grids.bin"
        write_grid_file(path, grids, theta_bins, rho_bins, bins_ref="bins.json")
        back, n_t, n_r, ref = read_grid_file(path)
        assert (n_t, n_r) == (5, 5)
        assert ref == "bins.json"
        assert set(back) == set(grids)
        for k in grids:
            assert np.array_equal(back[k], grids[k])  # float64 exact

    def test_binary_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTAGRID" + b"\x00" * 32)
        with pytest.raises(ValueError, match="grid file"):
            read_grid_file(path)

    def test_json_round_trip(self, tmp_path, rng):
        theta_bins, rho_bins = toy_space(n=4)
        g = rng.random((4, 4))
        grids = {"x": g / g.sum()}
        path = tmp_path / "grids.json"
        write_grid_json(path, grids, theta_bins, rho_bins)
        back, tb, rb = read_grid_json(path)
        assert np.array_equal(tb.edges, theta_bins.edges)
        assert np.allclose(back["x"], grids["x"])
