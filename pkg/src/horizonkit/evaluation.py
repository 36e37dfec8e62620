"""Horizon detection error and the cumulative-histogram AUC protocol.

The per-image error is the maximum vertical distance between the predicted
and true horizon over the image width, normalized by image height.  Both
curves are straight lines, so the maximum sits at the left or right border
and equals max(|l_pred - l_true|, |r_pred - r_true|).

The benchmark score is the area under the cumulative histogram of errors up
to a threshold (default 0.25 image heights), normalized to [0, 1]:

    AUC = (1 / T) * integral_0^T F(t) dt,   F = empirical CDF of the errors,

computed exactly from the sorted errors as sum(max(0, T - e_i)) / (n * T).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingPrediction, VerticalHorizon
from . import io as hio

DEFAULT_MAX_THRESHOLD = 0.25


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    """Sorted horizon detection errors with their exact AUC."""

    errors: np.ndarray
    max_threshold: float
    auc: float

    def __post_init__(self):
        errors = np.sort(np.asarray(self.errors, dtype=float))
        errors.setflags(write=False)
        object.__setattr__(self, "errors", errors)

    def fraction_below(self, t):
        """Empirical CDF F(t): fraction of images with error <= t."""
        return float(np.searchsorted(self.errors, t, side="right")) / self.errors.size

    def curve_points(self):
        """(threshold, fraction) pairs at 0, every distinct error within the
        threshold, and the threshold itself -- the plot-ready cumulative
        histogram."""
        ts = [0.0]
        ts += [float(e) for e in np.unique(self.errors) if 0.0 < e <= self.max_threshold]
        if ts[-1] != self.max_threshold:
            ts.append(self.max_threshold)
        return [(t, self.fraction_below(t)) for t in ts]


def horizon_error(pred, truth, frame):
    """Maximum vertical deviation over the image width, in image heights."""
    pa = HorizonAt(pred, frame)
    ta = HorizonAt(truth, frame)
    return max(abs(pa.left - ta.left), abs(pa.right - ta.right))


class HorizonAt:
    """Border intercepts of a line in a frame's aspect (helper for errors)."""

    def __init__(self, line, frame):
        if line.is_near_vertical:
            raise VerticalHorizon("horizon detection error undefined for a vertical line")
        a = frame.aspect
        self.left = float(line.y_at(-a / 2.0))
        self.right = float(line.y_at(a / 2.0))


def auc(errors, max_threshold=DEFAULT_MAX_THRESHOLD):
    """Exact AUC of the cumulative error histogram (see module docstring)."""
    errors = np.asarray(errors, dtype=float)
    if max_threshold <= 0:
        raise ValueError("max_threshold must be positive")
    if errors.size == 0:
        raise ValueError("need at least one error value")
    if np.any(errors < 0):
        raise ValueError("errors must be non-negative")
    area = float(np.sum(np.maximum(0.0, max_threshold - errors)))
    value = area / (errors.size * max_threshold)
    return ErrorCurve(errors=errors, max_threshold=max_threshold, auc=value)


def evaluate_dataset(labels_path, predictions_path,
                     max_threshold=DEFAULT_MAX_THRESHOLD, allow_missing=False):
    """Score a predictions CSV against a labels CSV (interchange schema).

    Returns (ErrorCurve, per_image, missing) where per_image is a list of
    (image_id, error) in label-file order and missing lists label ids with
    no prediction.  Without ``allow_missing`` any missing id raises
    MissingPrediction.
    """
    labels = hio.read_labels_csv(labels_path)
    preds = {rec.image_id: rec for rec in hio.read_labels_csv(predictions_path)}

    missing = [rec.image_id for rec in labels if rec.image_id not in preds]
    if missing and not allow_missing:
        raise MissingPrediction(missing)

    per_image = []
    for rec in labels:
        if rec.image_id in preds:
            per_image.append((rec.image_id, _record_error(preds[rec.image_id], rec)))
    if not per_image:
        raise MissingPrediction(missing)
    curve = auc([e for _, e in per_image], max_threshold)
    return curve, per_image, missing


def _record_error(pred, truth):
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise ValueError(f"size mismatch for {truth.image_id!r}: label "
                         f"{truth.width}x{truth.height}, prediction "
                         f"{pred.width}x{pred.height}")
    # border intercepts in image heights, straight from the pixel endpoints
    h = truth.height
    return max(abs(pred.y_left - truth.y_left), abs(pred.y_right - truth.y_right)) / h


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as f:
        f.write("threshold,fraction\n")
        for t, frac in curve.curve_points():
            f.write(f"{t!r},{frac!r}\n")


def write_per_image_csv(path, per_image):
    with open(path, "w", newline="") as f:
        f.write("image_id,error\n")
        for image_id, err in per_image:
            f.write(f"{image_id},{err!r}\n")
