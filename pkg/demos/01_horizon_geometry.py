"""Horizon-line geometry from first principles.

Builds pinhole cameras, projects points, derives the horizon line from the
camera orientation, converts between the (theta, rho) and (l, r)
parameterizations, and recovers tilt/roll back from the line.
"""

import math

import numpy as np

from horizonkit import (CameraRig, HorizonLine, ImageFrame,
                        convert_parameterization, horizon_from_camera,
                        project_point, tilt_roll_from_horizon)
from horizonkit.geometry import rot_x, rot_z

frame = ImageFrame(640, 480)

print("== projection ==")
rig = CameraRig(np.eye(3), np.zeros(3), focal=480.0)
for X in ([0.0, 0.0, -5.0], [1.0, 0.5, -2.0], [-2.0, 1.0, -4.0]):
    p, in_front = project_point(rig, frame, X)
    print(f"world {X} -> centered pixel ({p[0]:+.4f}, {p[1]:+.4f}) in_front={in_front}")

print("\n== horizon from camera orientation ==")
for tilt_deg, roll_deg in ((0, 0), (10, 0), (0, 8), (-12, 5)):
    tilt, roll = math.radians(tilt_deg), math.radians(roll_deg)
    rig = CameraRig(rot_x(tilt) @ rot_z(roll), np.zeros(3), focal=480.0)
    line = horizon_from_camera(rig, frame)
    views = convert_parameterization(line)
    print(f"tilt {tilt_deg:+3d} deg, roll {roll_deg:+2d} deg -> "
          f"theta={views.theta:.4f} rho={views.rho:+.4f} "
          f"(l, r)=({views.left:+.4f}, {views.right:+.4f})")

print("\n== recovering tilt and roll from the line ==")
rig = CameraRig(rot_x(0.15) @ rot_z(-0.06), np.zeros(3), focal=480.0)
line = horizon_from_camera(rig, frame)
tilt, roll = tilt_roll_from_horizon(line, 480.0, frame)
print(f"true (0.1500, -0.0600), recovered ({tilt:.4f}, {roll:.4f})")

print("\n== parameterization round trip ==")
line = HorizonLine.from_lr(0.12, -0.03, frame.aspect)
back = HorizonLine.from_theta_rho(line.theta, line.rho, frame.aspect)
print(f"coefficients drift after lr -> theta/rho -> lr: "
      f"{np.abs(line.coeffs - back.coeffs).max():.2e}")
