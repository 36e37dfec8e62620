"""The dataset interchange CSV shared by labeling, synthesis, and evaluation.

One row per image::

    image_id,width,height,y_left,y_right

``y_left``/``y_right`` are the horizon's vertical intercepts at x = 0 and
x = width, in PIXEL coordinates (origin top-left, y down).  Cutout manifests
append ``yaw,tilt,roll,fov`` columns; readers ignore extra columns, so a
manifest is a valid labels file.  Floats are written with ``repr`` (shortest
round-trip), which keeps re-runs byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .geometry import HorizonLine, ImageFrame

LABEL_FIELDS = ("image_id", "width", "height", "y_left", "y_right")
MANIFEST_FIELDS = LABEL_FIELDS + ("yaw", "tilt", "roll", "fov")


@dataclass(frozen=True)
class LabelRecord:
    image_id: str
    width: int
    height: int
    y_left: float
    y_right: float


def line_to_record(image_id, line, frame):
    """HorizonLine (centered units) -> pixel-endpoint record.

    Raises VerticalHorizon for lines without border intercepts.
    """
    left, right = line.lr
    h = frame.height
    return LabelRecord(image_id, frame.width, frame.height,
                       h * (0.5 - left), h * (0.5 - right))


def record_to_line(record):
    """Pixel-endpoint record -> (HorizonLine, ImageFrame)."""
    frame = ImageFrame(record.width, record.height)
    left = 0.5 - record.y_left / record.height
    right = 0.5 - record.y_right / record.height
    return HorizonLine.from_lr(left, right, frame.aspect), frame


def read_labels_csv(path):
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not set(LABEL_FIELDS) <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain {','.join(LABEL_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(LabelRecord(
                    image_id=row["image_id"],
                    width=int(row["width"]), height=int(row["height"]),
                    y_left=float(row["y_left"]), y_right=float(row["y_right"])))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad label row: {exc}") from exc
    return records


def write_labels_csv(path, records):
    with open(path, "w", newline="") as f:
        f.write(",".join(LABEL_FIELDS) + "\n")
        for rec in records:
            f.write(f"{rec.image_id},{rec.width},{rec.height},"
                    f"{float(rec.y_left)!r},{float(rec.y_right)!r}\n")


def write_manifest_csv(path, rows):
    """Cutout manifest: label fields plus the sampled camera parameters.

    ``rows`` holds (LabelRecord, yaw, tilt, roll, fov_deg) tuples.
    """
    with open(path, "w", newline="") as f:
        f.write(",".join(MANIFEST_FIELDS) + "\n")
        for rec, yaw, tilt, roll, fov in rows:
            f.write(f"{rec.image_id},{rec.width},{rec.height},"
                    f"{float(rec.y_left)!r},{float(rec.y_right)!r},"
                    f"{float(yaw)!r},{float(tilt)!r},{float(roll)!r},{float(fov)!r}\n")


def read_manifest_csv(path):
    """Read a cutout manifest; returns (LabelRecord, yaw, tilt, roll, fov) tuples."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not set(MANIFEST_FIELDS) <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain {','.join(MANIFEST_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = LabelRecord(row["image_id"], int(row["width"]), int(row["height"]),
                                  float(row["y_left"]), float(row["y_right"]))
                rows.append((rec, float(row["yaw"]), float(row["tilt"]),
                             float(row["roll"]), float(row["fov"])))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest row: {exc}") from exc
    return rows
