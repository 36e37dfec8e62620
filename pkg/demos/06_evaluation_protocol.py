"""The horizon-detection benchmark protocol.

Scores predictions against ground truth: the per-image error is the largest
vertical gap at the image borders in height units, and the headline number
is the area under the cumulative error histogram up to 0.25.
"""

import os

import numpy as np

from horizonkit import HorizonLine, ImageFrame, auc, horizon_error
from horizonkit.evaluation import write_curve_csv

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

frame = ImageFrame(640, 480)
rng = np.random.default_rng(1)

print("== per-image error ==")
truth = HorizonLine.from_lr(0.05, -0.02, frame.aspect)
for dl, dr in ((0.0, 0.0), (0.1, -0.05), (0.02, 0.03)):
    pred = HorizonLine.from_lr(truth.left + dl, truth.right + dr, frame.aspect)
    print(f"offset ({dl:+.2f}, {dr:+.2f}) -> error "
          f"{horizon_error(pred, truth, frame):.3f} image heights")

print("\n== AUC of the cumulative histogram ==")
print(f"errors (0.05, 0.10, 0.20) at T=0.25 -> AUC {auc([.05, .10, .20]).auc:.4f}")
print(f"errors (0.05, 0.10, 0.15) at T=0.25 -> AUC {auc([.05, .10, .15]).auc:.4f}")
print(f"all-zero errors                     -> AUC {auc([0.0] * 5).auc:.4f}")

good = np.abs(rng.normal(0.0, 0.03, size=500))
bad = np.abs(rng.normal(0.0, 0.12, size=500))
curve_good, curve_bad = auc(good), auc(bad)
print(f"\ntight predictor  AUC {curve_good.auc:.4f}")
print(f"sloppy predictor AUC {curve_bad.auc:.4f}")

write_curve_csv(os.path.join(OUT, "curve_good.csv"), curve_good)
write_curve_csv(os.path.join(OUT, "curve_bad.csv"), curve_bad)
print(f"\nplot-ready (threshold, fraction) curves written to {OUT}/")
