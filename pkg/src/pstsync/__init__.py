"""Spatial synchronization of roadside cameras against a LiDAR reference.

Each camera's {focal, pitch, height, heading} is refined independently by
matching its monocular vehicle geolocations to LiDAR tracks.
"""

from .association import Assignment, FilterConfig, WeightMatrix, assign, associate, build_weights
from .camera_model import (
    BinHead,
    CalibrationEstimate,
    decode_bins,
    focal_to_vfov,
    project,
    vfov_loss,
    vfov_to_focal,
)
from .core import (
    CameraParams,
    CameraTrack,
    GeoPoint,
    LidarState,
    LidarTrack,
    PixelObservation,
    PolarObservation,
    geo_inverse,
    geo_offset,
)
from .geolocation import localize, localize_batch
from .heading import HeadingConfig, estimate_heading, static_find
from .optimizer import FitReport, OptimizerConfig, fit, fit_all_cameras, grad_loc_loss, loc_loss
from .pipeline import PipelineConfig, run_all, run_camera, startup_window, window_tracks
from .simulator import NoiseConfig, SceneConfig, VehicleSpec, generate, oracle_metrics, perturb

__version__ = "0.1.0"

__all__ = [
    "Assignment", "BinHead", "CalibrationEstimate", "CameraParams", "CameraTrack",
    "FilterConfig", "FitReport", "GeoPoint", "HeadingConfig", "LidarState", "LidarTrack",
    "NoiseConfig", "OptimizerConfig", "PipelineConfig", "PixelObservation", "PolarObservation",
    "SceneConfig", "VehicleSpec", "WeightMatrix", "assign", "associate", "build_weights",
    "decode_bins", "estimate_heading", "fit", "fit_all_cameras", "focal_to_vfov", "generate",
    "geo_inverse", "geo_offset", "grad_loc_loss", "loc_loss", "localize", "localize_batch",
    "oracle_metrics", "perturb", "project", "run_all", "run_camera", "startup_window", "static_find",
    "vfov_loss", "vfov_to_focal", "window_tracks",
]
