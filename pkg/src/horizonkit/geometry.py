"""Pinhole-camera math for horizon lines.

Conventions used throughout the package:

* Camera frame: x right, y up, viewing direction along -z.  A world point X
  maps to camera coordinates ``Xc = R @ X + t`` and projects to
  ``(f * Xc_x, f * Xc_y) / -Xc_z`` relative to the principal point, which sits
  at the image center (square pixels, zero skew).  Points in front of the
  camera have ``Xc_z < 0``.
* World zenith: +y.
* Pixel frame: origin at the top-left image corner, y down, units of pixels.
* Centered frame: origin at the image center, x right, y up, lengths in units
  of image heights.  All HorizonLine quantities live in this frame.
* Lines are homogeneous 3-vectors ``h`` with ``hypot(h[0], h[1]) == 1`` and
  ``h[1] >= 0`` (ties: ``h[0] >= 0``); a point ``p = (x, y, 1)`` is on the
  line iff ``p @ h == 0``.  ``theta = atan2(h[1], h[0])`` is the angle of the
  line NORMAL and ``rho = -h[2]``, so ``rho = x*cos(theta) + y*sin(theta)``
  holds literally for points on the line.  The slope angle of the line itself
  is ``theta - pi/2`` (0 for a horizontal line).
* Camera tilt/roll: a rig with rotation ``rot_x(tilt) @ rot_z(roll)`` has
  horizon offset ``f * tan(tilt)`` (in centered units, f = focal/height) and
  horizon normal angle ``pi/2 + roll``.  Positive tilt pitches the camera
  down, so the horizon rises in the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection, VerticalHorizon

ZENITH = np.array([0.0, 1.0, 0.0])

# |sin(theta)| below this means the horizon is within ~1e-6 rad of vertical
# and the (l, r) view is undefined.
_VERTICAL_SIN = math.sin(1e-6)


def rot_x(angle):
    """Right-handed rotation matrix about the x axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    """Right-handed rotation matrix about the y axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    """Right-handed rotation matrix about the z axis."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class CameraRig:
    """Camera extrinsics (world -> camera) plus focal length in pixels."""

    rotation: np.ndarray
    translation: np.ndarray
    focal: float

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if t.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got {t.shape}")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1 within 1e-9")
        if not self.focal > 0:
            raise ValueError(f"focal length must be positive, got {self.focal}")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "focal", float(self.focal))

    @property
    def up_world(self):
        """Camera up axis expressed in world coordinates."""
        return self.rotation.T @ np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class ImageFrame:
    """Image size in pixels; defines the pixel <-> centered conversions."""

    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")

    @property
    def aspect(self):
        return self.width / self.height

    def centered_from_pixel(self, px, py):
        """Continuous pixel coordinates (y down) -> centered frame (y up)."""
        x = (np.asarray(px, dtype=float) - self.width / 2.0) / self.height
        y = (self.height / 2.0 - np.asarray(py, dtype=float)) / self.height
        return x, y

    def pixel_from_centered(self, x, y):
        """Centered frame -> continuous pixel coordinates."""
        px = np.asarray(x, dtype=float) * self.height + self.width / 2.0
        py = self.height / 2.0 - np.asarray(y, dtype=float) * self.height
        return px, py


@dataclass(frozen=True)
class Window:
    """Axis-aligned viewport inside a root pixel space (crop bookkeeping).

    The window has its own centered frame: origin at the window center,
    lengths in units of the window height, with (x0, y0) the top-left corner
    in root pixel coordinates.
    """

    x0: float
    y0: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("window must have positive size")

    @property
    def center(self):
        return (self.x0 + self.width / 2.0, self.y0 + self.height / 2.0)

    @property
    def aspect(self):
        return self.width / self.height


def full_window(frame):
    """Window covering an entire ImageFrame."""
    return Window(0.0, 0.0, float(frame.width), float(frame.height))


def window_affine(src, dst):
    """Map of centered coordinates from window ``src`` to window ``dst``.

    Returns (k, dx, dy) with  p_dst = k * p_src + (dx, dy).  The scale k is
    the same for x and y because centered units divide by height only.
    """
    scx, scy = src.center
    dcx, dcy = dst.center
    k = src.height / dst.height
    dx = (scx - dcx) / dst.height
    dy = (dcy - scy) / dst.height
    return k, dx, dy


class HorizonLine:
    """Homogeneous horizon line in the centered frame of a host image.

    ``aspect`` is the width/height ratio of the host frame; it is only needed
    for the (l, r) view, which evaluates the line at the left/right borders
    x = -aspect/2 and x = +aspect/2.
    """

    __slots__ = ("coeffs", "aspect")

    def __init__(self, coeffs, aspect=1.0):
        h = np.array(coeffs, dtype=float)
        if h.shape != (3,):
            raise ValueError(f"line coefficients must be a 3-vector, got {h.shape}")
        norm = math.hypot(h[0], h[1])
        if norm < 1e-15 or not np.all(np.isfinite(h)):
            raise ValueError("line has no finite direction (h1 = h2 = 0)")
        h = h / norm
        if h[1] < 0 or (h[1] == 0 and h[0] < 0):
            h = -h
        h.setflags(write=False)
        self.coeffs = h
        self.aspect = float(aspect)

    @classmethod
    def from_theta_rho(cls, theta, rho, aspect=1.0):
        return cls((math.cos(theta), math.sin(theta), -rho), aspect)

    @classmethod
    def from_lr(cls, left, right, aspect=1.0):
        a = aspect / 2.0
        # normal of the segment (-a, left) -> (a, right); h2 = 2a > 0 already
        h = (left - right, 2.0 * a, -a * (left + right))
        return cls(h, aspect)

    @property
    def theta(self):
        """Angle of the line normal, in [0, pi]."""
        return math.atan2(self.coeffs[1], self.coeffs[0])

    @property
    def rho(self):
        """Signed distance from the image center, in image heights."""
        return -self.coeffs[2]

    @property
    def slope_angle(self):
        """Angle of the line itself against horizontal (0 = level horizon)."""
        return self.theta - math.pi / 2.0

    @property
    def is_near_vertical(self):
        return self.coeffs[1] < _VERTICAL_SIN

    def y_at(self, x):
        """Line height y(x) in centered coordinates."""
        h = self.coeffs
        if self.is_near_vertical:
            raise VerticalHorizon(f"horizon within 1e-6 rad of vertical (theta={self.theta:.8f})")
        return -(h[0] * np.asarray(x, dtype=float) + h[2]) / h[1]

    @property
    def left(self):
        return float(self.y_at(-self.aspect / 2.0))

    @property
    def right(self):
        return float(self.y_at(self.aspect / 2.0))

    @property
    def lr(self):
        return self.left, self.right

    def mirrored(self):
        """Line after mirroring the host image horizontally (x -> -x)."""
        h = self.coeffs
        return HorizonLine((-h[0], h[1], h[2]), self.aspect)

    def __repr__(self):
        h = self.coeffs
        return f"HorizonLine([{h[0]:.6g}, {h[1]:.6g}, {h[2]:.6g}], aspect={self.aspect:.4g})"


@dataclass(frozen=True)
class LineViews:
    """All three parameterizations of one horizon line."""

    coeffs: np.ndarray
    theta: float
    rho: float
    left: float
    right: float


def convert_parameterization(line):
    """Populate every view of ``line``; raises VerticalHorizon for (l, r)."""
    return LineViews(line.coeffs, line.theta, line.rho, line.left, line.right)


def project_point(rig, frame, world_point):
    """Project a world point into the centered frame.

    Returns ``(pixel, in_front)`` where pixel is a 2-vector in centered units
    and ``in_front`` flags positive depth (camera-frame z < 0).  Raises
    DegenerateProjection when the point lies on the principal plane.
    """
    Xc = rig.rotation @ np.asarray(world_point, dtype=float) + rig.translation
    w = -Xc[2]
    if abs(w) < 1e-12:
        raise DegenerateProjection(f"point on the principal plane (|z| = {abs(w):.2e})")
    f = rig.focal / frame.height
    return np.array([f * Xc[0] / w, f * Xc[1] / w]), bool(Xc[2] < 0)


def horizon_from_camera(rig, frame, zenith=ZENITH):
    """Horizon line of a rig: image of the points at infinity of all
    world planes orthogonal to ``zenith``.

    In homogeneous form the line is ``M^-T @ R @ zenith`` with
    ``M = diag(f, f, -1)`` the centered-frame projection matrix (the -1
    implements the division by -z of `project_point`).
    """
    rz = rig.rotation @ np.asarray(zenith, dtype=float)
    f = rig.focal / frame.height
    h = np.array([rz[0] / f, rz[1] / f, -rz[2]])
    if math.hypot(h[0], h[1]) < 1e-15:
        raise DegenerateProjection("zenith along the optical axis; horizon at infinity")
    return HorizonLine(h, frame.aspect)


def tilt_roll_from_horizon(line, focal, frame):
    """Recover camera (tilt, roll) from a horizon line and a known focal.

    Inverts `horizon_from_camera` for rigs of the form
    ``rot_x(tilt) @ rot_z(roll)``; unique for tilt, roll in (-pi/2, pi/2).
    """
    if line.is_near_vertical:
        raise VerticalHorizon("cannot recover tilt/roll from a vertical horizon")
    if focal <= 0:
        raise ValueError("focal length must be positive")
    f = focal / frame.height
    h = line.coeffs
    # M^T h is parallel to R @ zenith = (-sin r, cos r cos t, cos r sin t)
    v = np.array([f * h[0], f * h[1], -h[2]])
    v /= np.linalg.norm(v)
    if v[1] < 0:
        v = -v
    roll = math.atan2(-v[0], math.hypot(v[1], v[2]))
    tilt = math.atan2(v[2], v[1])
    return tilt, roll


def transfer_line(line, src, dst):
    """Re-express a line given in window ``src`` coordinates in window ``dst``.

    Both windows live in the same root pixel space.  The map is a uniform
    scale plus translation, so theta is preserved exactly.
    """
    k, dx, dy = window_affine(src, dst)
    h = line.coeffs
    # point map p_dst = k p_src + d  =>  line map h_dst = A^-T h_src
    hd = (h[0] / k, h[1] / k, h[2] - (dx * h[0] + dy * h[1]) / k)
    return HorizonLine(hd, dst.aspect)
