"""Command-line pipelines: label-sfm, sample-cutouts, evaluate, predict-aggregate.

Every run writes its fully resolved configuration to ``run_config.json`` in
the output directory, takes an explicit ``--seed`` (default 2016), and is
deterministic: re-running with identical inputs and seed produces
byte-identical outputs regardless of ``--workers``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import aggregation, estimator, evaluation, io as hio, label_space, pano, sfm
from .errors import HorizonKitError, VerticalHorizon
from .geometry import ImageFrame, Window, full_window, transfer_line

DEFAULT_SEED = 2016
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def _write_config(out_dir, subcommand, arguments):
    os.makedirs(out_dir, exist_ok=True)
    payload = {"subcommand": subcommand, "version": __version__, "arguments": arguments}
    with open(os.path.join(out_dir, "run_config.json"), "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def _map_ordered(fn, items, workers):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_label_sfm(args):
    model = sfm.load_sfm_model(args.model)
    estimate = sfm.estimate_zenith(model)
    labels, skipped = sfm.label_model(model, estimate)

    records = []
    for image_id, line in labels:
        frame = next(c.frame for c in model.cameras if c.image_id == image_id)
        try:
            records.append(hio.line_to_record(image_id, line, frame))
        except VerticalHorizon:
            skipped.append((image_id, "vertical horizon"))

    _write_config(args.out_dir, "label-sfm",
                  {"model": args.model, "out_dir": args.out_dir, "seed": args.seed})
    hio.write_labels_csv(os.path.join(args.out_dir, "labels.csv"), records)
    report = sfm.residual_report(model, estimate)
    if skipped:
        report += "skipped id reason\n"
        for image_id, reason in skipped:
            report += f"skipped_image {image_id} {reason}\n"
    with open(os.path.join(args.out_dir, "report.txt"), "w") as f:
        f.write(report)
    print(f"labeled {len(records)} of {len(model)} images "
          f"(inlier fraction {estimate.inlier_fraction:.3f})")
    return 0


def cmd_sample_cutouts(args):
    names = sorted(n for n in os.listdir(args.pano_dir)
                   if n.lower().endswith(IMAGE_EXTENSIONS))
    if not names:
        raise HorizonKitError(f"no panorama images in {args.pano_dir}")
    panos = [pano.load_panorama(os.path.join(args.pano_dir, n)) for n in names]
    dists = pano.CameraParamDistributions.load_json(args.dists)

    _write_config(args.out_dir, "sample-cutouts",
                  {"pano_dir": args.pano_dir, "dists": args.dists, "count": args.count,
                   "size": args.size, "seed": args.seed, "out_dir": args.out_dir,
                   "workers": args.workers})

    rng = np.random.default_rng(args.seed)
    cameras = [pano.sample_camera(dists, rng) for _ in range(args.count)]

    def render(task):
        index, (yaw, tilt, roll, fov) = task
        source = panos[index % len(panos)]
        image, line = pano.render_cutout(source, yaw, tilt, roll, fov, args.size)
        return image, line

    results = _map_ordered(render, list(enumerate(cameras)), args.workers)

    frame_rows = []
    for i, ((image, line), (yaw, tilt, roll, fov)) in enumerate(zip(results, cameras)):
        name = f"cutout_{i:06d}.png"
        pano.save_image(os.path.join(args.out_dir, name), image)
        rec = hio.line_to_record(name, line, ImageFrame(args.size, args.size))
        frame_rows.append((rec, yaw, tilt, roll, fov))
    hio.write_manifest_csv(os.path.join(args.out_dir, "manifest.csv"), frame_rows)
    print(f"wrote {args.count} cutouts to {args.out_dir}")
    return 0


def cmd_evaluate(args):
    curve, per_image, missing = evaluation.evaluate_dataset(
        args.labels, args.predictions, max_threshold=args.max_threshold,
        allow_missing=args.allow_missing)
    _write_config(args.out_dir, "evaluate",
                  {"labels": args.labels, "predictions": args.predictions,
                   "max_threshold": args.max_threshold,
                   "allow_missing": args.allow_missing, "out_dir": args.out_dir})
    evaluation.write_curve_csv(os.path.join(args.out_dir, "curve.csv"), curve)
    evaluation.write_per_image_csv(os.path.join(args.out_dir, "per_image.csv"), per_image)
    for image_id in missing:
        print(f"missing prediction for {image_id}", file=sys.stderr)
    print(f"AUC {curve.auc:.4f}")
    return 0


def _load_predictor(path, n_bins):
    with open(path) as f:
        payload = json.load(f)
    base = os.path.dirname(os.path.abspath(path))

    if payload.get("kind") == "prior" and "labels_csv" in payload:
        records = hio.read_labels_csv(os.path.join(base, payload["labels_csv"]))
        lines = [hio.record_to_line(rec)[0] for rec in records]
        return estimator.make_prior_predictor(lines, n=n_bins)

    if payload.get("kind") == "external-grid" and "grid_file" in payload:
        grids, _, _, _ = estimator.read_grid_file(os.path.join(base, payload["grid_file"]))
        theta_bins = label_space.BinSpec.from_dict(payload["bins"]["theta"])
        rho_bins = label_space.BinSpec.from_dict(payload["bins"]["rho"])
        return estimator.make_external_predictor(grids, theta_bins, rho_bins)

    if payload.get("kind") == "external-grid" and "grid_json" in payload:
        grids, theta_bins, rho_bins = estimator.read_grid_json(
            os.path.join(base, payload["grid_json"]))
        return estimator.make_external_predictor(grids, theta_bins, rho_bins)

    return estimator.PredictorSpec.from_dict(payload)


def _center_window(frame):
    m = min(frame.width, frame.height)
    return Window((frame.width - m) // 2, (frame.height - m) // 2, m, m)


def _crop_pixels(image, window):
    x0, y0, s = int(window.x0), int(window.y0), int(window.width)
    return image[y0:y0 + s, x0:x0 + s]


def cmd_predict_aggregate(args):
    names = sorted(n for n in os.listdir(args.images)
                   if n.lower().endswith(IMAGE_EXTENSIONS))
    if not names:
        raise HorizonKitError(f"no images in {args.images}")
    spec = _load_predictor(args.predictor, args.bins)

    def run_one(name):
        image = pano.load_image(os.path.join(args.images, name))
        frame = ImageFrame(image.shape[1], image.shape[0])
        full = full_window(frame)
        if args.strategy == "center":
            window = _center_window(frame)
            dist = _predict_crop(spec, image, window, name, 0)
            line = transfer_line(dist.point, window, full)
        else:
            windows = aggregation.make_crop_grid(frame, args.crop_fraction)
            dists = [_predict_crop(spec, image, win, name, k)
                     for k, win in enumerate(windows)]
            subset = aggregation.SubwindowSet(frame, tuple(zip(windows, dists)))
            if args.strategy == "average":
                line = aggregation.aggregate_average(subset)
            else:
                line = aggregation.aggregate_nll(subset)
        return hio.line_to_record(name, line, frame)

    records = _map_ordered(run_one, names, args.workers)

    _write_config(args.out_dir, "predict-aggregate",
                  {"images": args.images, "predictor": args.predictor,
                   "strategy": args.strategy, "bins": args.bins,
                   "crop_fraction": args.crop_fraction, "seed": args.seed,
                   "workers": args.workers, "out_dir": args.out_dir})
    hio.write_labels_csv(os.path.join(args.out_dir, "predictions.csv"), records)
    print(f"wrote predictions for {len(records)} images")
    return 0


def _predict_crop(spec, image, window, name, crop_index):
    crop = _crop_pixels(image, window)
    if spec.kind == "external-grid":
        key = f"{name}#crop{crop_index}"
        if key not in spec.grids and crop_index == 0 and name in spec.grids:
            key = name
        return estimator.predict(spec, crop, image_id=key)
    return estimator.predict(spec, crop)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="horizonkit",
        description="Horizon-line labeling, synthesis, prediction aggregation, "
                    "and evaluation pipelines.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("label-sfm", help="fit a global horizon to an SfM model "
                                         "and project it into every image")
    p.add_argument("model", help="camera file (.json or whitespace text)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_label_sfm)

    p = sub.add_parser("sample-cutouts", help="synthesize labeled square cutouts "
                                              "from equirectangular panoramas")
    p.add_argument("pano_dir", help="directory of W=2H panorama images")
    p.add_argument("--dists", required=True, help="fitted camera-parameter JSON")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--size", type=int, default=256, help="cutout side in pixels")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sample_cutouts)

    p = sub.add_parser("evaluate", help="horizon detection error + cumulative "
                                        "histogram AUC for a predictions file")
    p.add_argument("labels")
    p.add_argument("predictions")
    p.add_argument("--max-threshold", type=float, default=evaluation.DEFAULT_MAX_THRESHOLD)
    p.add_argument("--allow-missing", action="store_true",
                   help="score only matched ids instead of failing")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict-aggregate", help="run a predictor over images "
                                                 "with a subwindow strategy")
    p.add_argument("images", help="directory of input images")
    p.add_argument("--predictor", required=True, help="predictor spec JSON")
    p.add_argument("--strategy", choices=("center", "average", "optimize"),
                   default="center")
    p.add_argument("--bins", type=int, default=100,
                   help="bin count when the predictor builds a label space")
    p.add_argument("--crop-fraction", type=float,
                   default=aggregation.CROP_GRID_FRACTION,
                   help="grid crop side as a fraction of the min dimension")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_predict_aggregate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HorizonKitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
