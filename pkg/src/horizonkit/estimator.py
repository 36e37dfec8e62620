"""Losses, the predictor interface, and desk-scale baselines.

Three predictor kinds share one interface:

* ``prior``        -- the training-label histogram over (theta, rho) bins;
                      ignores pixels entirely.
* ``linear``       -- linear regression on 16x16 downsampled intensities plus
                      16x16 vertical-gradient magnitudes (512 features,
                      standardized), trained with the Huber or L2 loss.
* ``external-grid``-- probability grids computed elsewhere (e.g. by a CNN)
                      and ingested from a grid file, keyed by image id.

`predict` returns a HorizonDistribution for a square image; regression
outputs become a one-hot grid at the predicted cell with the continuous
prediction kept as the point estimate.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, MissingExternalGrid
from .geometry import HorizonLine
from .label_space import (BinSpec, HorizonDistribution, assign_bin,
                          build_horizon_label_space, decode_argmax)

FEATURE_GRID = 16
MIN_TRAINING_IMAGES = 50

GRID_MAGIC = b"HKGRID01"  # binary grid file: magic, see write_grid_file


def huber_loss(x, delta=1.0):
    """Huber loss and gradient: x^2/2 inside |x| <= delta, linear outside."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) <= delta
    loss = np.where(inside, 0.5 * x * x, delta * (np.abs(x) - 0.5 * delta))
    grad = np.where(inside, x, delta * np.sign(x))
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def l2_loss(x):
    """Quadratic loss x^2/2 (so the gradient x matches Huber inside delta)."""
    x = np.asarray(x, dtype=float)
    loss = 0.5 * x * x
    if loss.ndim == 0:
        return float(loss), float(x)
    return loss, x.copy()


def _loss_fn(name, delta):
    if name == "huber":
        return lambda x: huber_loss(x, delta)
    if name == "l2":
        return lambda x: l2_loss(x)
    raise ValueError(f"unknown loss {name!r} (expected 'huber' or 'l2')")


def _as_gray(image):
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img.mean(axis=2)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-d or 3-d image array, got ndim={img.ndim}")
    return img


def _block_mean(img, grid):
    """Area-average an SxS image down to grid x grid (S >= grid)."""
    s = img.shape[0]
    bounds = (np.arange(grid + 1) * s) // grid
    col = np.add.reduceat(img, bounds[:-1], axis=1)
    both = np.add.reduceat(col, bounds[:-1], axis=0)
    areas = np.diff(bounds)
    return both / np.outer(areas, areas)


def extract_features(image, grid=FEATURE_GRID):
    """Raw (unstandardized) feature vector for a square image."""
    img = _as_gray(image)
    if img.shape[0] != img.shape[1]:
        raise ValueError(f"predictors consume square images, got {img.shape}")
    if img.shape[0] < grid:
        raise ValueError(f"image side {img.shape[0]} smaller than feature grid {grid}")
    small = _block_mean(img, grid)
    vgrad = np.abs(np.gradient(small, axis=0))
    return np.concatenate([small.ravel(), vgrad.ravel()])


@dataclass(eq=False)
class PredictorSpec:
    """Parameters of one predictor; ``kind`` selects how `predict` works."""

    kind: str  # prior | linear | external-grid
    parameterization: str = "theta_rho"  # theta_rho | lr
    theta_bins: BinSpec | None = None
    rho_bins: BinSpec | None = None
    # linear
    weights: np.ndarray | None = None      # (2, n_features)
    bias: np.ndarray | None = None         # (2,)
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None
    training_loss: np.ndarray | None = None  # full-set loss per epoch
    # prior
    prior_grid: np.ndarray | None = None
    # external
    grids: dict | None = None

    def to_dict(self):
        d = {"kind": self.kind, "parameterization": self.parameterization}
        if self.theta_bins is not None:
            d["bins"] = {"theta": self.theta_bins.to_dict(), "rho": self.rho_bins.to_dict()}
        if self.kind == "linear":
            d.update(weights=self.weights.tolist(), bias=self.bias.tolist(),
                     feature_mean=self.feature_mean.tolist(),
                     feature_std=self.feature_std.tolist())
        elif self.kind == "prior":
            d["grid"] = self.prior_grid.ravel().tolist()
        elif self.kind == "external-grid":
            d["grids"] = {k: np.asarray(v).ravel().tolist() for k, v in self.grids.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        spec = cls(kind=kind, parameterization=d.get("parameterization", "theta_rho"))
        if "bins" in d:
            spec.theta_bins = BinSpec.from_dict(d["bins"]["theta"])
            spec.rho_bins = BinSpec.from_dict(d["bins"]["rho"])
        if kind == "linear":
            spec.weights = np.asarray(d["weights"], dtype=float)
            spec.bias = np.asarray(d["bias"], dtype=float)
            spec.feature_mean = np.asarray(d["feature_mean"], dtype=float)
            spec.feature_std = np.asarray(d["feature_std"], dtype=float)
        elif kind == "prior":
            n = spec.theta_bins.n
            spec.prior_grid = np.asarray(d["grid"], dtype=float).reshape(n, spec.rho_bins.n)
        elif kind == "external-grid":
            n_t, n_r = spec.theta_bins.n, spec.rho_bins.n
            spec.grids = {k: np.asarray(v, dtype=float).reshape(n_t, n_r)
                          for k, v in d["grids"].items()}
        else:
            raise ValueError(f"unknown predictor kind {kind!r}")
        return spec

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def make_prior_predictor(lines, theta_bins=None, rho_bins=None, n=100):
    """Histogram of training horizon lines over the (theta, rho) bin grid."""
    thetas = np.array([ln.theta for ln in lines])
    rhos = np.array([ln.rho for ln in lines])
    if theta_bins is None or rho_bins is None:
        theta_bins, rho_bins = build_horizon_label_space(thetas, rhos, n)
    grid = np.zeros((theta_bins.n, rho_bins.n))
    np.add.at(grid, (assign_bin(theta_bins, thetas), assign_bin(rho_bins, rhos)), 1.0)
    grid /= grid.sum()
    return PredictorSpec(kind="prior", theta_bins=theta_bins, rho_bins=rho_bins,
                         prior_grid=grid)


def make_external_predictor(grids, theta_bins, rho_bins):
    grids = {k: np.asarray(v, dtype=float) for k, v in grids.items()}
    return PredictorSpec(kind="external-grid", theta_bins=theta_bins,
                         rho_bins=rho_bins, grids=grids)


def _targets(line, parameterization):
    if parameterization == "lr":
        return np.array(line.lr)
    if parameterization == "theta_rho":
        return np.array([line.theta, line.rho])
    raise ValueError(f"unknown parameterization {parameterization!r}")


def linear_objective(params, features, targets, loss="huber", delta=1.0):
    """Mean loss of a flat (weights, bias) vector over a standardized
    feature matrix, with its analytic gradient.  Exposed for gradient checks.
    """
    n, d = features.shape
    k = targets.shape[1]
    W = params[: k * d].reshape(k, d)
    b = params[k * d:]
    fn = _loss_fn(loss, delta)
    resid = features @ W.T + b - targets
    lv, g = fn(resid)
    g = np.asarray(g) / (n * k)
    grad_w = g.T @ features
    grad_b = g.sum(axis=0)
    return float(np.sum(lv)) / (n * k), np.concatenate([grad_w.ravel(), grad_b])


def train_linear_baseline(data, loss="huber", parameterization="lr", *,
                          epochs=80, batch_size=32, step=0.01, seed=0, delta=1.0):
    """Train the 512-feature linear baseline by mini-batch gradient descent.

    ``data`` is a list of (square image, HorizonLine) pairs.  Deterministic
    given ``seed``; the returned spec records the full-set training loss
    after every epoch in ``training_loss``.
    """
    if len(data) < MIN_TRAINING_IMAGES:
        raise InsufficientData(f"need at least {MIN_TRAINING_IMAGES} labeled images, got {len(data)}")
    raw = np.stack([extract_features(img) for img, _ in data])
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    feats = (raw - mean) / std
    targets = np.stack([_targets(line, parameterization) for _, line in data])

    n, d = feats.shape
    k = targets.shape[1]
    params = np.zeros(k * d + k)
    rng = np.random.default_rng(seed)
    history = [linear_objective(params, feats, targets, loss, delta)[0]]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grad = linear_objective(params, feats[idx], targets[idx], loss, delta)
            params -= step * grad
        history.append(linear_objective(params, feats, targets, loss, delta)[0])

    return PredictorSpec(
        kind="linear", parameterization=parameterization,
        weights=params[: k * d].reshape(k, d), bias=params[k * d:],
        feature_mean=mean, feature_std=std,
        training_loss=np.asarray(history),
    )


def _linear_point(spec, image):
    phi = (extract_features(image) - spec.feature_mean) / spec.feature_std
    y = spec.weights @ phi + spec.bias
    if spec.parameterization == "lr":
        return HorizonLine.from_lr(y[0], y[1])
    return HorizonLine.from_theta_rho(y[0], y[1])


def predict(spec, image, bins=None, image_id=None):
    """Run a predictor on one square image and return a HorizonDistribution.

    ``bins`` optionally overrides the (theta, rho) BinSpecs stored on the
    spec.  External-grid predictors require ``image_id`` and raise
    MissingExternalGrid for unknown ids.
    """
    theta_bins, rho_bins = bins if bins is not None else (spec.theta_bins, spec.rho_bins)
    if theta_bins is None or rho_bins is None:
        raise ValueError("no bin specs available for prediction")

    if spec.kind == "prior":
        _as_square(image)
        dist = HorizonDistribution(spec.prior_grid, theta_bins, rho_bins)
        dist.point = decode_argmax(dist)
        return dist

    if spec.kind == "linear":
        point = _linear_point(spec, image)
        grid = np.zeros((theta_bins.n, rho_bins.n))
        grid[assign_bin(theta_bins, point.theta), assign_bin(rho_bins, point.rho)] = 1.0
        return HorizonDistribution(grid, theta_bins, rho_bins, point=point)

    if spec.kind == "external-grid":
        _as_square(image)
        if image_id is None or image_id not in spec.grids:
            raise MissingExternalGrid(f"no stored grid for image id {image_id!r}")
        grid = spec.grids[image_id]
        dist = HorizonDistribution(grid / grid.sum(), theta_bins, rho_bins)
        dist.point = decode_argmax(dist)
        return dist

    raise ValueError(f"unknown predictor kind {spec.kind!r}")


def _as_square(image):
    img = _as_gray(image)
    if img.shape[0] != img.shape[1]:
        raise ValueError(f"predictors consume square images, got {img.shape}")
    return img


def write_grid_file(path, grids, theta_bins, rho_bins, bins_ref=""):
    """Binary grid file: little-endian, one record per image id.

    Layout: 8-byte magic ``HKGRID01``; uint32 n_theta; uint32 n_rho;
    uint16 bins_ref length + UTF-8 bins_ref (free-form reference to the bin
    specs); uint32 record count; then per record a uint16 id length, the
    UTF-8 id, and n_theta*n_rho float64 probabilities in row-major order
    (theta rows, rho columns).
    """
    items = sorted(grids.items())
    with open(path, "wb") as f:
        f.write(GRID_MAGIC)
        f.write(struct.pack("<II", theta_bins.n, rho_bins.n))
        ref = bins_ref.encode()
        f.write(struct.pack("<H", len(ref)))
        f.write(ref)
        f.write(struct.pack("<I", len(items)))
        for image_id, grid in items:
            grid = np.ascontiguousarray(grid, dtype="<f8")
            if grid.shape != (theta_bins.n, rho_bins.n):
                raise ValueError(f"grid for {image_id!r} has shape {grid.shape}")
            ident = image_id.encode()
            f.write(struct.pack("<H", len(ident)))
            f.write(ident)
            f.write(grid.tobytes())


def read_grid_file(path):
    """Read a binary grid file; returns (grids dict, n_theta, n_rho, bins_ref)."""
    with open(path, "rb") as f:
        if f.read(8) != GRID_MAGIC:
            raise ValueError(f"{path}: not a horizonkit grid file")
        n_t, n_r = struct.unpack("<II", f.read(8))
        (ref_len,) = struct.unpack("<H", f.read(2))
        bins_ref = f.read(ref_len).decode()
        (count,) = struct.unpack("<I", f.read(4))
        grids = {}
        for _ in range(count):
            (id_len,) = struct.unpack("<H", f.read(2))
            image_id = f.read(id_len).decode()
            buf = f.read(n_t * n_r * 8)
            grids[image_id] = np.frombuffer(buf, dtype="<f8").reshape(n_t, n_r).copy()
    return grids, n_t, n_r, bins_ref


def write_grid_json(path, grids, theta_bins, rho_bins):
    """JSON grid file: bin specs plus row-major grids keyed by image id."""
    payload = {
        "bins": {"theta": theta_bins.to_dict(), "rho": rho_bins.to_dict()},
        "grids": {k: np.asarray(v).ravel().tolist() for k, v in sorted(grids.items())},
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def read_grid_json(path):
    with open(path) as f:
        payload = json.load(f)
    theta_bins = BinSpec.from_dict(payload["bins"]["theta"])
    rho_bins = BinSpec.from_dict(payload["bins"]["rho"])
    grids = {k: np.asarray(v, dtype=float).reshape(theta_bins.n, rho_bins.n)
             for k, v in payload["grids"].items()}
    return grids, theta_bins, rho_bins
