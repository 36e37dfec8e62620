"""Automatic horizon labeling from structure-from-motion camera poses.

Only rotations are consumed: for every camera the world directions of the
points at infinity to its left and right are collected, a basis for the
horizon plane is fit to them by SVD (the zenith is the remaining singular
vector), cameras with excessive residual (e.g. rotated by 90 degrees) are
rejected over two re-fit rounds, and the global horizon is projected back
into each inlier image.

Camera file formats
-------------------
Text (whitespace-delimited, ``#`` comments, one camera per line)::

    image_id width height focal r11 r12 r13 r21 r22 r23 r31 r32 r33 t1 t2 t3

with the rotation row-major (world -> camera) and the translation in camera
coordinates.  The JSON equivalent is an object with ``model_id`` and a
``cameras`` list of ``{image_id, width, height, focal, rotation, translation}``
where ``rotation`` is a 3x3 nested list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModel, SfmFormatError
from .geometry import CameraRig, ImageFrame, horizon_from_camera, rot_x, rot_y, rot_z

OUTLIER_FLOOR_DEG = 10.0  # residual threshold is max(this, 3 x median)
REJECTION_ROUNDS = 2


@dataclass(frozen=True)
class SfmCamera:
    image_id: str
    rig: CameraRig
    frame: ImageFrame


@dataclass(frozen=True, eq=False)
class SfmModel:
    model_id: str
    cameras: tuple

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        ids = [c.image_id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValueError(f"model {self.model_id!r} has duplicate image ids")

    def __len__(self):
        return len(self.cameras)


@dataclass(frozen=True, eq=False)
class ZenithEstimate:
    """Fitted horizon plane: orthonormal basis, unit zenith normal, and
    per-camera residuals (radians) with inlier flags."""

    zenith: np.ndarray
    basis: np.ndarray       # (2, 3)
    residuals: np.ndarray   # (n_cameras,)
    inliers: np.ndarray     # (n_cameras,) bool

    @property
    def inlier_fraction(self):
        return float(self.inliers.mean())


def collect_lateral_directions(model):
    """World directions of the points at infinity to each camera's left and
    right: R^T [-1,0,0] and R^T [1,0,0].  Returns a (2n, 3) array, two
    consecutive rows per camera."""
    out = np.empty((2 * len(model), 3))
    for i, cam in enumerate(model.cameras):
        out[2 * i] = -cam.rig.rotation[0]      # R^T @ [-1,0,0]
        out[2 * i + 1] = cam.rig.rotation[0]   # R^T @ [1,0,0]
    return out


def _svd_plane(directions):
    _, s, vt = np.linalg.svd(directions, full_matrices=False)
    if s[1] < 1e-6 * s[0]:
        raise DegenerateModel(
            "horizon plane underdetermined (all cameras face identically with "
            f"identical roll; singular values {s.tolist()})")
    return vt[:2], vt[2]


def _camera_residuals(directions, zenith):
    # angle of each lateral direction out of the fitted plane; max of the pair
    off = np.arcsin(np.clip(np.abs(directions @ zenith), -1.0, 1.0))
    return off.reshape(-1, 2).max(axis=1)


def fit_horizon_plane(directions, up_hint=None):
    """Fit the horizon plane to stacked lateral directions (two consecutive
    rows per camera).

    The basis is the top-2 right singular vectors, the zenith the third;
    cameras whose residual exceeds max(10 deg, 3 x median) are dropped and
    the plane re-fit, repeated for two rounds.  ``up_hint`` (mean camera up
    direction) orients the zenith sign when given.
    """
    directions = np.asarray(directions, dtype=float)
    if directions.ndim != 2 or directions.shape[1] != 3 or directions.shape[0] % 2:
        raise ValueError("directions must be a (2n, 3) array, two rows per camera")
    n_cam = directions.shape[0] // 2
    if directions.shape[0] < 6:
        raise DegenerateModel(f"insufficient cameras: plane fitting needs >= 3, got {n_cam}")

    inliers = np.ones(n_cam, dtype=bool)
    basis, zenith = _svd_plane(directions)
    for _ in range(REJECTION_ROUNDS):
        residuals = _camera_residuals(directions, zenith)
        threshold = max(math.radians(OUTLIER_FLOOR_DEG), 3.0 * float(np.median(residuals)))
        inliers = residuals <= threshold
        if inliers.sum() < 3:
            raise DegenerateModel("outlier rejection left fewer than 3 cameras")
        basis, zenith = _svd_plane(directions[np.repeat(inliers, 2)])
    residuals = _camera_residuals(directions, zenith)

    if up_hint is not None and float(np.dot(zenith, up_hint)) < 0:
        zenith = -zenith
    elif up_hint is None and zenith[np.argmax(np.abs(zenith))] < 0:
        zenith = -zenith
    return ZenithEstimate(zenith=zenith, basis=basis, residuals=residuals, inliers=inliers)


def estimate_zenith(model):
    """collect_lateral_directions + fit_horizon_plane, oriented by the mean
    camera up direction."""
    directions = collect_lateral_directions(model)
    up_hint = np.mean([cam.rig.up_world for cam in model.cameras], axis=0)
    return fit_horizon_plane(directions, up_hint=up_hint)


def fit_zenith_naive(model):
    """The rejected alternative: normalized mean of the camera up directions
    (assumes zero expected tilt, not just zero expected roll)."""
    up = np.mean([cam.rig.up_world for cam in model.cameras], axis=0)
    norm = np.linalg.norm(up)
    if norm < 1e-12:
        raise DegenerateModel("camera up directions cancel; naive zenith undefined")
    return up / norm


def label_model(model, zenith_estimate):
    """Project the global horizon into every inlier camera.

    Returns (labels, skipped): labels is a list of (image_id, HorizonLine);
    skipped lists (image_id, reason) for cameras left out.
    """
    labels = []
    skipped = []
    for cam, ok in zip(model.cameras, zenith_estimate.inliers):
        if not ok:
            skipped.append((cam.image_id, "excess residual"))
            continue
        line = horizon_from_camera(cam.rig, cam.frame, zenith=zenith_estimate.zenith)
        labels.append((cam.image_id, line))
    return labels, skipped


def residual_report(model, zenith_estimate, bin_width_deg=2.0, max_deg=90.0):
    """Plain-text residual histogram + inlier fraction for human review."""
    res_deg = np.degrees(zenith_estimate.residuals)
    edges = np.arange(0.0, max_deg + bin_width_deg, bin_width_deg)
    counts, _ = np.histogram(res_deg, bins=edges)
    lines = [
        f"model {model.model_id}",
        f"cameras {len(model)}",
        f"inliers {int(zenith_estimate.inliers.sum())}",
        f"inlier_fraction {zenith_estimate.inlier_fraction!r}",
        f"median_residual_deg {float(np.median(res_deg))!r}",
        f"max_residual_deg {float(res_deg.max())!r}",
        "histogram_deg lo hi count",
    ]
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        if c:
            lines.append(f"histogram_bin {lo:g} {hi:g} {int(c)}")
    lines.append("per_camera id residual_deg inlier")
    for cam, r, ok in zip(model.cameras, res_deg, zenith_estimate.inliers):
        lines.append(f"camera {cam.image_id} {float(r)!r} {int(ok)}")
    return "\n".join(lines) + "\n"


def read_sfm_text(path, model_id=None):
    """Read the canonical whitespace-delimited camera file."""
    cameras = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 16:
                raise SfmFormatError(f"{path}:{lineno}: expected 16 fields "
                                     f"(id w h f R[9] t[3]), got {len(parts)}")
            try:
                image_id = parts[0]
                width, height = int(parts[1]), int(parts[2])
                focal = float(parts[3])
                rot = np.array([float(v) for v in parts[4:13]]).reshape(3, 3)
                t = np.array([float(v) for v in parts[13:16]])
            except ValueError as exc:
                raise SfmFormatError(f"{path}:{lineno}: {exc}") from exc
            try:
                rig = CameraRig(rot, t, focal)
                frame = ImageFrame(width, height)
            except ValueError as exc:
                raise SfmFormatError(f"{path}:{lineno}: {exc}") from exc
            cameras.append(SfmCamera(image_id, rig, frame))
    if model_id is None:
        model_id = _stem(path)
    return SfmModel(model_id, tuple(cameras))


def read_sfm_json(path):
    with open(path) as f:
        payload = json.load(f)
    cameras = []
    for i, cam in enumerate(payload.get("cameras", [])):
        try:
            rig = CameraRig(np.asarray(cam["rotation"], dtype=float),
                            np.asarray(cam["translation"], dtype=float),
                            float(cam["focal"]))
            frame = ImageFrame(int(cam["width"]), int(cam["height"]))
            cameras.append(SfmCamera(str(cam["image_id"]), rig, frame))
        except (KeyError, ValueError, TypeError) as exc:
            raise SfmFormatError(f"{path}: camera entry {i}: {exc}") from exc
    return SfmModel(str(payload.get("model_id", _stem(path))), tuple(cameras))


def load_sfm_model(path):
    """Dispatch on extension: .json -> JSON reader, anything else -> text."""
    if str(path).endswith(".json"):
        return read_sfm_json(path)
    return read_sfm_text(path)


def _stem(path):
    name = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return name.rsplit(".", 1)[0] if "." in name else name


def write_sfm_text(path, model):
    """Inverse of `read_sfm_text` (full float precision)."""
    with open(path, "w") as f:
        f.write("# image_id width height focal r11 r12 r13 r21 r22 r23 r31 r32 r33 t1 t2 t3\n")
        for cam in model.cameras:
            fields = [cam.image_id, str(cam.frame.width), str(cam.frame.height),
                      repr(cam.rig.focal)]
            fields += [repr(float(v)) for v in cam.rig.rotation.ravel()]
            fields += [repr(float(v)) for v in cam.rig.translation]
            f.write(" ".join(fields) + "\n")


def synthesize_model(n_cameras, *, tilt_sigma=0.0, roll_sigma=0.0, zenith=None,
                     n_rotated=0, focal=600.0, width=800, height=600, seed=0,
                     model_id="synthetic"):
    """Synthetic SfM model with a known zenith, for tests and demos.

    Cameras get uniform yaw about the true zenith, normal tilt and roll noise
    (radians), and ``n_rotated`` cameras are rolled by 90 degrees to act as
    outliers.  Returns (model, true_zenith).
    """
    rng = np.random.default_rng(seed)
    if zenith is None:
        z = rng.normal(size=3)
        z /= np.linalg.norm(z)
    else:
        z = np.asarray(zenith, dtype=float)
        z = z / np.linalg.norm(z)
    # orthonormal world basis whose second column is the zenith
    probe = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = probe - z * (probe @ z)
    e1 /= np.linalg.norm(e1)
    e3 = np.cross(e1, z)
    basis = np.column_stack([e1, z, e3])  # canonical -> world, det +1

    cameras = []
    for i in range(n_cameras):
        yaw = rng.uniform(0.0, 2.0 * math.pi)
        tilt = rng.normal(0.0, tilt_sigma) if tilt_sigma else 0.0
        roll = rng.normal(0.0, roll_sigma) if roll_sigma else 0.0
        if i < n_rotated:
            roll += math.pi / 2.0
        r_canon = rot_x(tilt) @ rot_z(roll) @ rot_y(yaw)
        rig = CameraRig(r_canon @ basis.T, rng.normal(size=3), focal)
        cameras.append(SfmCamera(f"img{i:04d}", rig, ImageFrame(width, height)))
    return SfmModel(model_id, tuple(cameras)), z
