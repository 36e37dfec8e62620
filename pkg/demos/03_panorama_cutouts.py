"""Labeled training images from an equirectangular panorama.

Fits the camera-parameter distributions (normal fov, Student-t roll,
Epanechnikov-KDE tilt, uniform yaw) to synthetic labels, samples cameras,
renders rectilinear cutouts from a painted panorama, and checks the emitted
horizon against the painted boundary.  Also shows the crop augmenter.
"""

import os

import numpy as np

from horizonkit import (augment_crop, fit_distributions, paint_horizon_panorama,
                        render_cutout, sample_camera)
from horizonkit.pano import save_image

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

rng = np.random.default_rng(7)
labels = np.column_stack([
    rng.normal(0.02, 0.06, size=400),            # tilt (rad)
    0.02 * rng.standard_t(2.43, size=400),       # roll (rad), heavy tailed
    rng.normal(65.0, 8.0, size=400),             # fov (deg)
])
dists = fit_distributions(labels)
print(f"fov ~ N({dists.fov_mean_deg:.2f}, {dists.fov_std_deg:.2f}) deg")
print(f"roll ~ t(loc={dists.roll_loc:+.5f}, scale={dists.roll_scale:.5f}, "
      f"dof={dists.roll_dof})")
print(f"tilt ~ KDE of {dists.tilt_samples.size} samples, "
      f"Epanechnikov half-width {dists.tilt_bandwidth} rad")

pano = paint_horizon_panorama(512)
save_image(os.path.join(OUT, "panorama.png"), pano.pixels)

print("\n== sampled cutouts ==")
for k in range(4):
    yaw, tilt, roll, fov = sample_camera(dists, rng)
    image, line = render_cutout(pano, yaw, tilt, roll, fov, out_size=192)
    save_image(os.path.join(OUT, f"cutout_{k}.png"), image)
    sky = float(image.mean())
    print(f"cutout {k}: yaw={yaw:.2f} tilt={tilt:+.3f} roll={roll:+.3f} "
          f"fov={fov:5.1f} -> (l, r)=({line.left:+.3f}, {line.right:+.3f}), "
          f"sky fraction {sky:.2f}")

print("\n== crop augmentation ==")
image, line = render_cutout(pano, 1.0, 0.05, -0.02, 70.0, 192)
for k, crop in enumerate(augment_crop(image, line, rng=0)[:4]):
    print(f"crop {k}: side {crop.image.shape[0]:3d} at "
          f"({crop.window.x0:.0f}, {crop.window.y0:.0f}) "
          f"mirrored={crop.mirrored} -> (l, r)=({crop.line.left:+.3f}, "
          f"{crop.line.right:+.3f})")
print(f"\nimages written to {OUT}/")
