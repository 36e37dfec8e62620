"""horizonkit: horizon-line geometry, labeling, synthesis, and evaluation."""

__version__ = "0.1.0"

from .errors import (DegenerateBins, DegenerateDistribution, DegenerateModel,
                     DegenerateProjection, HorizonKitError, InsufficientData,
                     MissingExternalGrid, MissingPrediction, SfmFormatError,
                     VerticalHorizon)
from .geometry import (CameraRig, HorizonLine, ImageFrame, Window,
                       convert_parameterization, full_window,
                       horizon_from_camera, project_point, rot_x, rot_y, rot_z,
                       tilt_roll_from_horizon, transfer_line)
from .label_space import (BinSpec, HorizonDistribution, assign_bin,
                          bins_to_distribution, build_bins,
                          build_horizon_label_space, decode_argmax,
                          decode_expectation, marginals_to_distribution)
from .estimator import (PredictorSpec, extract_features, huber_loss, l2_loss,
                        make_external_predictor, make_prior_predictor, predict,
                        train_linear_baseline)
from .sfm import (SfmCamera, SfmModel, ZenithEstimate,
                  collect_lateral_directions, estimate_zenith, fit_horizon_plane,
                  fit_zenith_naive, label_model, load_sfm_model, synthesize_model)
from .pano import (CameraParamDistributions, Panorama, augment_crop,
                   fit_distributions, fit_student_t, paint_horizon_panorama,
                   render_cutout, sample_camera, sample_epanechnikov)
from .aggregation import (SubwindowSet, aggregate_average, aggregate_nll,
                          make_crop_grid, nll_objective, transfer_horizon)
from .evaluation import ErrorCurve, auc, evaluate_dataset, horizon_error
from .io import (LabelRecord, line_to_record, read_labels_csv, record_to_line,
                 write_labels_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
