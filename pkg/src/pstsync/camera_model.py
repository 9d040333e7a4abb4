"""Pinhole road-scene camera: projection, field-of-view conversion and the
calibration-head math (bin decoding, calibration losses).

World frame for :func:`project`: origin on the ground directly below the
camera, ``x`` to the right of the optical axis, ``y`` forward along the
ground projection of the optical axis, ``z`` up. Pixels use the image
convention: ``u`` rightward from the left edge, ``v`` downward from the top.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol

import numpy as np

from .core import CameraParams, GeoPoint

DEFAULT_BINS = 256
PITCH_RANGE_DEG = (-45.0, 45.0)
ROLL_RANGE_DEG = (-45.0, 45.0)
VFOV_RANGE_DEG = (10.0, 120.0)


class BehindCameraError(ValueError):
    pass


class MissingEstimateError(KeyError):
    pass


# --- projection ----------------------------------------------------------


@dataclass(frozen=True)
class ProjectionMatrices:
    K: np.ndarray
    R: np.ndarray
    T: np.ndarray

    @property
    def P(self) -> np.ndarray:
        return self.K @ self.R @ self.T


def projection_matrices(focal_px: float, pitch_deg: float, height_m: float) -> ProjectionMatrices:
    """Intrinsics, pitch-only rotation and height translation.

    ``T`` shifts the world origin up to the camera center; composing the
    three gives :func:`closed_form_projection`.
    """
    p = math.radians(pitch_deg)
    s, c = math.sin(p), math.cos(p)
    K = np.diag([focal_px, focal_px, 1.0])
    R = np.array([[1.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])
    T = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -height_m]])
    return ProjectionMatrices(K, R, T)


def closed_form_projection(focal_px: float, pitch_deg: float, height_m: float) -> np.ndarray:
    """The expanded 3x4 projection written out entry by entry."""
    p = math.radians(pitch_deg)
    s, c = math.sin(p), math.cos(p)
    f, H = focal_px, height_m
    return np.array(
        [
            [f, 0.0, 0.0, 0.0],
            [0.0, -f * s, -f * c, f * H * c],
            [0.0, c, -s, H * s],
        ]
    )


def project(params: CameraParams, world_point) -> tuple[float, float]:
    """Project a world point ``(x, y, z)`` in meters to image pixels ``(u, v)``.

    The centered coordinates of the projection have ``v`` growing downward
    (ground points near the camera land below the principal point), so the
    image row is ``h/2 + v``.

    Raises:
        BehindCameraError: if the point is not in front of the camera.
    """
    P = closed_form_projection(params.focal_px, params.pitch_deg, params.height_m)
    x, y, z = world_point
    su, sv, s = P @ np.array([x, y, z, 1.0])
    if not s > 0:
        raise BehindCameraError(f"point {tuple(world_point)} is behind the camera (s={s:g})")
    return su / s + params.image_w / 2, sv / s + params.image_h / 2


def project_ground(params: CameraParams, x, y):
    """Vectorized projection of ground points (``z = 0``).

    Returns ``(u, v, s)``; callers must discard entries with ``s <= 0``.
    """
    p = math.radians(params.pitch_deg)
    sp, cp = math.sin(p), math.cos(p)
    f, H = params.focal_px, params.height_m
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = y * cp + H * sp
    with np.errstate(divide="ignore", invalid="ignore"):
        u = f * x / s + params.image_w / 2
        v = f * (H * cp - y * sp) / s + params.image_h / 2
    return u, v, s


def horizon_row(params: CameraParams) -> float:
    """Image row that ground points approach as they recede to infinity."""
    return params.image_h / 2 - params.focal_px * math.tan(math.radians(params.pitch_deg))


# --- field of view -------------------------------------------------------


def vfov_to_focal(vfov_deg: float, image_h: float) -> float:
    if not 0.0 < vfov_deg < 180.0:
        raise ValueError(f"vfov must lie in (0, 180) degrees, got {vfov_deg}")
    if not image_h > 0:
        raise ValueError("image height must be positive")
    return image_h / (2.0 * math.tan(math.radians(vfov_deg) / 2.0))


def focal_to_vfov(focal_px: float, image_h: float) -> float:
    """Field of view (degrees) spanned by ``image_h`` pixels at ``focal_px``.

    Pass the image width instead of the height to get the horizontal fov.
    """
    if not focal_px > 0:
        raise ValueError("focal length must be positive")
    if not image_h > 0:
        raise ValueError("image extent must be positive")
    return math.degrees(2.0 * math.atan(image_h / (2.0 * focal_px)))


# --- calibration head ----------------------------------------------------


@dataclass(frozen=True)
class BinHead:
    centers: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "probs", p)
        if c.ndim != 1 or c.shape != p.shape or c.size == 0:
            raise ValueError("centers and probs must be 1-D of equal, non-zero length")
        if np.any(np.diff(c) <= 0):
            raise ValueError("bin centers must be strictly increasing")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError("probs must be non-negative and sum to 1")

    @classmethod
    def uniform_bins(cls, lo: float, hi: float, probs) -> "BinHead":
        """Head whose ``len(probs)`` centers split ``[lo, hi]`` into equal bins."""
        probs = np.asarray(probs, dtype=float)
        return cls(bin_centers(lo, hi, probs.size), probs)


def bin_centers(lo: float, hi: float, n: int = DEFAULT_BINS) -> np.ndarray:
    edges = np.linspace(lo, hi, n + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def decode_bins(head: BinHead) -> float:
    """Expected angle under the head's probability mass."""
    return float(np.dot(head.probs, head.centers))


def vfov_loss(pred, truth):
    """Asymmetric vfov loss: Geman-McClure when under-predicting, L2 otherwise.

    Inputs in radians.
    """
    r = np.asarray(pred, dtype=float) - np.asarray(truth, dtype=float)
    r2 = r * r
    out = np.where(r <= 0, r2 / (r2 + 1.0), r2)
    return float(out) if out.ndim == 0 else out


def calib_loss(pitch_hat, roll_hat, vfov_hat, pitch, roll, vfov):
    """Total calibration loss; all angles in radians."""
    return (pitch_hat - pitch) ** 2 + (roll_hat - roll) ** 2 + vfov_loss(vfov_hat, vfov)


# --- calibration providers ----------------------------------------------


@dataclass(frozen=True)
class CalibrationEstimate:
    pitch_deg: float
    roll_deg: float
    vfov_deg: float

    def __post_init__(self):
        if not 0.0 < self.vfov_deg < 180.0:
            raise ValueError(f"vfov_deg must lie in (0, 180), got {self.vfov_deg}")

    @classmethod
    def from_heads(cls, pitch: BinHead, roll: BinHead, vfov: BinHead) -> "CalibrationEstimate":
        return cls(decode_bins(pitch), decode_bins(roll), decode_bins(vfov))

    def focal_px(self, image_h: float) -> float:
        return vfov_to_focal(self.vfov_deg, image_h)


class CalibrationProvider(Protocol):
    def estimate(self, camera_id: str) -> CalibrationEstimate: ...


class FixedCalibration:
    """Same estimate for every camera, e.g. values from a config file."""

    def __init__(self, pitch_deg: float, vfov_deg: float, roll_deg: float = 0.0):
        self._est = CalibrationEstimate(pitch_deg, roll_deg, vfov_deg)

    def estimate(self, camera_id: str) -> CalibrationEstimate:
        return self._est


class TableCalibration:
    """Per-camera estimates keyed by camera id."""

    def __init__(self, estimates: Mapping[str, CalibrationEstimate]):
        self.estimates = dict(estimates)

    def estimate(self, camera_id: str) -> CalibrationEstimate:
        try:
            return self.estimates[camera_id]
        except KeyError:
            raise MissingEstimateError(f"no calibration estimate for camera {camera_id!r}") from None

    @classmethod
    def from_file(cls, path) -> "TableCalibration":
        return cls(read_calibration_file(path))


class PerturbedTruthCalibration:
    """Ground-truth calibration with additive biases, emulating domain shift.

    ``focal_scale`` multiplies the true focal length before it is turned
    into a vfov, so ``focal_scale=1.2`` seeds a +20% focal error.
    """

    def __init__(
        self,
        truth: Mapping[str, CameraParams],
        pitch_bias_deg: float = 0.0,
        roll_bias_deg: float = 0.0,
        vfov_bias_deg: float = 0.0,
        focal_scale: float = 1.0,
    ):
        self.truth = dict(truth)
        self.pitch_bias_deg = pitch_bias_deg
        self.roll_bias_deg = roll_bias_deg
        self.vfov_bias_deg = vfov_bias_deg
        self.focal_scale = focal_scale

    def estimate(self, camera_id: str) -> CalibrationEstimate:
        try:
            cam = self.truth[camera_id]
        except KeyError:
            raise MissingEstimateError(f"no ground truth for camera {camera_id!r}") from None
        vfov = focal_to_vfov(cam.focal_px * self.focal_scale, cam.image_h)
        return CalibrationEstimate(
            cam.pitch_deg + self.pitch_bias_deg,
            self.roll_bias_deg,
            vfov + self.vfov_bias_deg,
        )


def seed_params(
    estimate: CalibrationEstimate,
    height_m: float,
    heading_deg: float,
    position: GeoPoint,
    image_w: int,
    image_h: int,
) -> CameraParams:
    """Initial camera parameters from a calibration estimate; roll is dropped."""
    return CameraParams(
        focal_px=estimate.focal_px(image_h),
        pitch_deg=estimate.pitch_deg,
        height_m=height_m,
        heading_deg=heading_deg,
        position=position,
        image_w=image_w,
        image_h=image_h,
    )


# Calibration-estimate file: CSV with header ``camera_id,pitch_deg,roll_deg,vfov_deg``;
# lines starting with '#' are comments.
CALIBRATION_FIELDS = ("camera_id", "pitch_deg", "roll_deg", "vfov_deg")


def write_calibration_file(path, estimates: Mapping[str, CalibrationEstimate]):
    with open(path, "w", newline="") as fh:
        fh.write("# pstsync calibration v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALIBRATION_FIELDS)
        for cam_id in sorted(estimates):
            e = estimates[cam_id]
            w.writerow([cam_id, f"{e.pitch_deg:.9f}", f"{e.roll_deg:.9f}", f"{e.vfov_deg:.9f}"])


def read_calibration_file(path) -> dict[str, CalibrationEstimate]:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [line for line in fh if line.strip() and not line.startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or tuple(reader.fieldnames) != CALIBRATION_FIELDS:
        raise ValueError(f"{path}: expected columns {','.join(CALIBRATION_FIELDS)}")
    out = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            out[row["camera_id"]] = CalibrationEstimate(
                float(row["pitch_deg"]), float(row["roll_deg"]), float(row["vfov_deg"])
            )
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: bad calibration record {lineno}: {exc}") from None
    return out
