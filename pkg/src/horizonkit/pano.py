"""Camera-parameter distributions and panorama cutout synthesis.

Distributions fitted from labeled data: field of view is normal (degrees),
roll is Student's t with fixed nu = 2.43 (radians), tilt is a kernel density
estimate with an Epanechnikov kernel whose half-width (bandwidth) is 0.003
radians, and yaw is uniform on [0, 2*pi).

Panoramas are equirectangular with W = 2H: column x maps longitude linearly
over [-pi, pi) left to right with 0 at the image center, row y maps latitude
over [+pi/2, -pi/2] top to bottom, and the world zenith (+y) is at the top.
Yaw is the longitude of the view center, so a (yaw=0, tilt=0, roll=0) cutout
looks at the panorama center.  Cutouts assemble the world->camera rotation as
``rot_x(tilt) @ rot_z(roll) @ rot_y(yaw)``: yaw is a pure rotation about the
zenith (it never moves the horizon) and (tilt, roll) mean exactly what
`geometry.tilt_roll_from_horizon` recovers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import json

import numpy as np
from PIL import Image

from .errors import InsufficientData
from .geometry import (CameraRig, ImageFrame, Window, horizon_from_camera,
                       rot_x, rot_y, rot_z, transfer_line)

STUDENT_T_DOF = 2.43
TILT_BANDWIDTH = 0.003  # radians; Epanechnikov kernel half-width
FOV_MIN_DEG = 10.0
FOV_MAX_DEG = 120.0
MIN_FIT_SAMPLES = 30
MIN_CROP_SOURCE = 38
CROP_MIN_SCALE = 0.85
AUGMENT_CROPS = 10


@dataclass(frozen=True, eq=False)
class CameraParamDistributions:
    """Fitted sampling distributions for (yaw, tilt, roll, fov)."""

    fov_mean_deg: float
    fov_std_deg: float
    roll_loc: float
    roll_scale: float
    tilt_samples: np.ndarray
    tilt_bandwidth: float = TILT_BANDWIDTH
    roll_dof: float = STUDENT_T_DOF

    def __post_init__(self):
        samples = np.array(self.tilt_samples, dtype=float)
        if samples.size == 0:
            raise ValueError("tilt KDE sample list must be non-empty")
        if not (self.fov_std_deg > 0 and self.roll_scale > 0 and self.tilt_bandwidth > 0):
            raise ValueError("scale parameters must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "tilt_samples", samples)

    def to_dict(self):
        return {
            "fov": {"mean_deg": self.fov_mean_deg, "std_deg": self.fov_std_deg},
            "roll": {"loc": self.roll_loc, "scale": self.roll_scale, "dof": self.roll_dof},
            "tilt": {"samples": self.tilt_samples.tolist(), "bandwidth": self.tilt_bandwidth},
            "yaw": {"uniform": [0.0, 2.0 * math.pi]},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(fov_mean_deg=float(d["fov"]["mean_deg"]),
                   fov_std_deg=float(d["fov"]["std_deg"]),
                   roll_loc=float(d["roll"]["loc"]),
                   roll_scale=float(d["roll"]["scale"]),
                   tilt_samples=np.asarray(d["tilt"]["samples"], dtype=float),
                   tilt_bandwidth=float(d["tilt"]["bandwidth"]),
                   roll_dof=float(d["roll"].get("dof", STUDENT_T_DOF)))

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def fit_student_t(x, dof=STUDENT_T_DOF, max_iter=100, tol=1e-10):
    """MLE of Student-t location/scale with fixed dof, by EM-style
    iterative reweighting (weights (dof+1)/(dof + z^2))."""
    x = np.asarray(x, dtype=float)
    loc = float(np.median(x))
    scale2 = float(np.var(x))
    scale2 = max(scale2, 1e-24)
    for _ in range(max_iter):
        z2 = (x - loc) ** 2 / scale2
        w = (dof + 1.0) / (dof + z2)
        new_loc = float(np.sum(w * x) / np.sum(w))
        new_scale2 = float(np.mean(w * (x - new_loc) ** 2))
        new_scale2 = max(new_scale2, 1e-24)
        done = abs(new_loc - loc) < tol and abs(math.sqrt(new_scale2) - math.sqrt(scale2)) < tol
        loc, scale2 = new_loc, new_scale2
        if done:
            break
    return loc, math.sqrt(scale2)


def fit_distributions(labels):
    """Fit CameraParamDistributions from (tilt, roll, fov_deg) triples."""
    arr = np.asarray(labels, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("labels must be (tilt, roll, fov_deg) triples")
    if arr.shape[0] < MIN_FIT_SAMPLES:
        raise InsufficientData(f"need >= {MIN_FIT_SAMPLES} labeled cameras, got {arr.shape[0]}")
    fov_mean = float(arr[:, 2].mean())
    fov_std = float(arr[:, 2].std(ddof=1))
    loc, scale = fit_student_t(arr[:, 1])
    return CameraParamDistributions(
        fov_mean_deg=fov_mean, fov_std_deg=max(fov_std, 1e-12),
        roll_loc=loc, roll_scale=max(scale, 1e-12),
        tilt_samples=arr[:, 0].copy(),
    )


def sample_epanechnikov(rng, bandwidth, size=None):
    """Exact inverse-CDF draw from the Epanechnikov kernel scaled to
    [-bandwidth, bandwidth]; no rejection loop.

    The CDF of k(u) = 3/4 (1 - u^2) on [-1, 1] gives the depressed cubic
    u^3 - 3u + (4p - 2) = 0 whose in-range root is
    2 cos(arccos((1 - 2p)) / 3 - 2*pi/3).
    """
    p = rng.random(size)
    c = 4.0 * np.asarray(p, dtype=float) - 2.0
    alpha = np.arccos(np.clip(-c / 2.0, -1.0, 1.0)) / 3.0
    u = 2.0 * np.cos(alpha - 2.0 * math.pi / 3.0)
    return bandwidth * np.clip(u, -1.0, 1.0)


def sample_camera(dists, rng):
    """Draw one (yaw, tilt, roll, fov_deg) tuple.

    ``rng`` is an integer seed or a numpy Generator; a given seed always
    yields the same tuple.  Tilt picks a stored KDE sample uniformly and adds
    Epanechnikov noise; fov clamps to [10, 120] degrees.
    """
    rng = np.random.default_rng(rng)
    yaw = float(rng.uniform(0.0, 2.0 * math.pi))
    idx = int(rng.integers(dists.tilt_samples.size))
    tilt = float(dists.tilt_samples[idx] + sample_epanechnikov(rng, dists.tilt_bandwidth))
    roll = float(dists.roll_loc + dists.roll_scale * rng.standard_t(dists.roll_dof))
    fov = float(np.clip(rng.normal(dists.fov_mean_deg, dists.fov_std_deg),
                        FOV_MIN_DEG, FOV_MAX_DEG))
    return yaw, tilt, roll, fov


@dataclass(frozen=True, eq=False)
class Panorama:
    """Equirectangular panorama, H x W (x channels) with W = 2H exactly."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim not in (2, 3):
            raise ValueError("panorama pixels must be HxW or HxWxC")
        h, w = px.shape[:2]
        if w != 2 * h:
            raise ValueError(f"equirectangular panorama needs W = 2H, got {w}x{h}")
        if h < 64:
            raise ValueError(f"panorama height must be >= 64, got {h}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def paint_horizon_panorama(height=512, above=1.0, below=0.0):
    """Panorama that is ``above`` over the equator and ``below`` under it --
    in any cutout the value boundary is exactly the true horizon line."""
    px = np.full((height, 2 * height), below, dtype=float)
    px[: height // 2] = above
    return Panorama(px)


def assemble_rotation(yaw, tilt, roll):
    """World->camera rotation of a sampled cutout camera: yaw about the
    zenith applied first (world side), then the tilt/roll of `geometry`."""
    return rot_x(tilt) @ rot_z(roll) @ rot_y(yaw)


def _bilinear_wrap(pixels, col, row):
    """Bilinear sample with horizontal wraparound and vertical clamping."""
    h, w = pixels.shape[:2]
    c0 = np.floor(col).astype(int)
    r0 = np.floor(row).astype(int)
    fc = col - c0
    fr = row - r0
    c1 = (c0 + 1) % w
    c0 = c0 % w
    r1 = np.clip(r0 + 1, 0, h - 1)
    r0 = np.clip(r0, 0, h - 1)
    if pixels.ndim == 3:
        fc = fc[..., None]
        fr = fr[..., None]
    top = pixels[r0, c0] * (1.0 - fc) + pixels[r0, c1] * fc
    bot = pixels[r1, c0] * (1.0 - fc) + pixels[r1, c1] * fc
    return top * (1.0 - fr) + bot * fr


def render_cutout(pano, yaw, tilt, roll, fov_deg, out_size):
    """Square rectilinear cutout plus its ground-truth horizon line.

    Each output pixel's camera ray (u/f, v/f, -1) is rotated into the world,
    converted to longitude/latitude, and sampled bilinearly from the
    panorama.  The returned HorizonLine is `horizon_from_camera` on the
    assembled rotation and focal, so label and pixels share one geometry.
    """
    if out_size < 32:
        raise ValueError(f"cutout size must be >= 32, got {out_size}")
    if not (FOV_MIN_DEG <= fov_deg <= FOV_MAX_DEG):
        raise ValueError(f"fov must be within [{FOV_MIN_DEG}, {FOV_MAX_DEG}] deg, got {fov_deg}")
    s = int(out_size)
    focal = (s / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    frame = ImageFrame(s, s)
    rotation = assemble_rotation(yaw, tilt, roll)

    cols, rows = np.meshgrid(np.arange(s), np.arange(s))
    u, v = frame.centered_from_pixel(cols + 0.5, rows + 0.5)
    fc = focal / s
    rays = np.stack([u / fc, v / fc, -np.ones_like(u)], axis=-1)
    world = rays @ rotation  # row-vector form of R^T @ ray
    norm = np.linalg.norm(world, axis=-1)
    lon = np.arctan2(world[..., 0], -world[..., 2])
    lat = np.arcsin(np.clip(world[..., 1] / norm, -1.0, 1.0))

    col = (lon / (2.0 * math.pi) + 0.5) * pano.width - 0.5
    row = (0.5 - lat / math.pi) * pano.height - 0.5
    image = _bilinear_wrap(pano.pixels, col, row)
    line = horizon_from_camera(CameraRig(rotation, np.zeros(3), focal), frame)
    return image, line


@dataclass(frozen=True, eq=False)
class AugmentedCrop:
    """One training crop: pixels, adjusted line, and the transform that made it."""

    image: np.ndarray
    line: object  # HorizonLine
    window: Window
    mirrored: bool


def augment_crop(image, line, rng, count=AUGMENT_CROPS, min_scale=CROP_MIN_SCALE,
                 mirror_prob=0.5):
    """Square training crops with exactly adjusted horizon lines.

    Side length is uniform over [min_scale, 1.0] x the smaller image
    dimension, placement is uniform, and each crop is mirrored horizontally
    with probability ``mirror_prob``.  Deterministic given the rng state.
    """
    img = np.asarray(image)
    h, w = img.shape[:2]
    m = min(h, w)
    if m < MIN_CROP_SOURCE:
        raise ValueError(f"image min dimension must be >= {MIN_CROP_SOURCE}, got {m}")
    rng = np.random.default_rng(rng)
    src = Window(0.0, 0.0, float(w), float(h))
    out = []
    lo = math.ceil(min_scale * m)
    for _ in range(count):
        side = int(rng.integers(lo, m + 1))
        x0 = int(rng.integers(0, w - side + 1))
        y0 = int(rng.integers(0, h - side + 1))
        mirror = bool(rng.random() < mirror_prob)
        window = Window(x0, y0, side, side)
        crop = img[y0:y0 + side, x0:x0 + side]
        new_line = transfer_line(line, src, window)
        if mirror:
            crop = crop[:, ::-1]
            new_line = new_line.mirrored()
        out.append(AugmentedCrop(crop, new_line, window, mirror))
    return out


def load_image(path):
    """Raster file -> float array in [0, 1] (grayscale 2-d or RGB 3-d)."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im, dtype=float) / 255.0


def save_image(path, array):
    """Float array in [0, 1] -> 8-bit raster file (format by extension)."""
    arr = np.clip(np.asarray(array, dtype=float), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    Image.fromarray(data).save(path)


def load_panorama(path):
    return Panorama(load_image(path))
