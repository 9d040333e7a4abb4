"""Closed-form monocular geolocation of a ground pixel.

pixel column -> in-image azimuth -> compass bearing
pixel row    -> longitudinal ground distance -> range
(range, bearing) + camera position -> latitude/longitude

Everything here is differentiable in the camera parameters; :func:`localize_batch`
optionally returns the Jacobian of (bearing, range) with respect to
``(vfov_deg, pitch_deg, height_m, heading_deg)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CameraParams, GeoPoint, PixelObservation, PolarObservation, geo_offset
from .core import normalize_bearing, offset_arrays
from .camera_model import focal_to_vfov

DEG = math.pi / 180.0

# Order of columns in Jacobians returned by this module and the optimizer.
PARAM_NAMES = ("vfov_deg", "pitch_deg", "height_m", "heading_deg")


class AboveHorizonError(ValueError):
    """The pixel row cannot be a ground point under the given parameters."""


@dataclass(frozen=True)
class LocalizationResult:
    omega_c_deg: float
    obs: PolarObservation
    position: GeoPoint
    y_longitudinal_m: float


def hfov_deg(params: CameraParams) -> float:
    return focal_to_vfov(params.focal_px, params.image_w)


def azimuth_from_pixel(params: CameraParams, u: float) -> float:
    """Signed in-image azimuth (degrees) of column ``u``; positive right of center."""
    w = params.image_w
    return hfov_deg(params) / w * (u - w / 2)


def longitudinal_distance(params: CameraParams, v: float) -> float:
    """Ground distance along the optical axis to the point imaged at row ``v``."""
    beta = math.atan((params.image_h / 2 - v) / params.focal_px)
    psi = math.pi / 2 - math.radians(params.pitch_deg) + beta
    if not 0.0 < psi < math.pi / 2:
        raise AboveHorizonError(f"row {v:g} is not below the horizon (ray angle {psi:g} rad)")
    return params.height_m * math.tan(psi)


def range_from_longitudinal(y_m: float, omega_c_deg: float) -> float:
    if not abs(omega_c_deg) < 90.0:
        raise ValueError(f"azimuth must satisfy |omega_c| < 90, got {omega_c_deg}")
    return y_m / math.cos(math.radians(omega_c_deg))


def localize(params: CameraParams, obs: PixelObservation) -> LocalizationResult:
    omega_c = azimuth_from_pixel(params, obs.u)
    y = longitudinal_distance(params, obs.v)
    polar = PolarObservation(range_from_longitudinal(y, omega_c), params.heading_deg + omega_c)
    return LocalizationResult(omega_c, polar, geo_offset(params.position, polar), y)


@dataclass
class BatchLocalization:
    """Per-pixel outputs of :func:`localize_batch` as arrays.

    ``bearing_deg`` is not wrapped (heading + azimuth), which keeps it smooth
    for optimization; wrap with :func:`normalize_bearing` for display.
    ``jac_bearing``/``jac_range`` have shape ``(n, 4)`` in ``PARAM_NAMES`` order.
    """

    omega_c_deg: np.ndarray
    y_m: np.ndarray
    range_m: np.ndarray
    bearing_deg: np.ndarray
    valid: np.ndarray
    jac_bearing: np.ndarray | None = None
    jac_range: np.ndarray | None = None


def localize_batch(
    vfov_deg: float,
    pitch_deg: float,
    height_m: float,
    heading_deg: float,
    image_w: int,
    image_h: int,
    u,
    v,
    jacobian: bool = False,
) -> BatchLocalization:
    """Vectorized localization parameterized by vertical fov instead of focal.

    Invalid (above-horizon) pixels get NaN outputs and ``valid == False``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    t = math.tan(vfov_deg * DEG / 2)
    f = image_h / (2 * t)
    k = image_w / image_h
    hfov = 2 * math.atan(k * t)  # radians
    col = (u - image_w / 2) / image_w
    omega_c = hfov / DEG * col

    c = image_h / 2 - v
    beta = np.arctan(c / f)
    psi = math.pi / 2 - pitch_deg * DEG + beta
    valid = (psi > 0) & (psi < math.pi / 2) & (np.abs(omega_c) < 90)
    psi = np.where(valid, psi, np.nan)
    tan_psi = np.tan(psi)
    y = height_m * tan_psi
    cos_c = np.cos(omega_c * DEG)
    rng = y / cos_c
    bearing = heading_deg + omega_c

    out = BatchLocalization(omega_c, y, rng, bearing, valid)
    if not jacobian:
        return out

    n = u.shape[0]
    # d/d(vfov_deg) of the intermediate quantities
    dt = (1 + t * t) / 2 * DEG
    df = -image_h / (2 * t * t) * dt
    dhfov = 2 * k / (1 + k * k * t * t) * dt  # rad per deg
    domega_dvfov = dhfov / DEG * col  # deg per deg
    dbeta_df = -c / (f * f + c * c)
    sec2 = 1 + tan_psi * tan_psi
    dy_dvfov = height_m * sec2 * dbeta_df * df
    dy_dpitch = -height_m * sec2 * DEG
    dy_dheight = tan_psi
    drange_domega = y * np.sin(omega_c * DEG) / (cos_c * cos_c) * DEG

    jb = np.zeros((n, 4))
    jb[:, 0] = domega_dvfov
    jb[:, 3] = 1.0
    jr = np.empty((n, 4))
    jr[:, 0] = dy_dvfov / cos_c + drange_domega * domega_dvfov
    jr[:, 1] = dy_dpitch / cos_c
    jr[:, 2] = dy_dheight / cos_c
    jr[:, 3] = 0.0
    out.jac_bearing = jb
    out.jac_range = jr
    return out


def localize_params_batch(params: CameraParams, u, v, jacobian: bool = False) -> BatchLocalization:
    return localize_batch(
        focal_to_vfov(params.focal_px, params.image_h),
        params.pitch_deg,
        params.height_m,
        params.heading_deg,
        params.image_w,
        params.image_h,
        u,
        v,
        jacobian=jacobian,
    )


def localize_track(params: CameraParams, track):
    """Latitude/longitude arrays of a :class:`CameraTrack`; NaN above the horizon."""
    res = localize_params_batch(params, track.u, track.v)
    lat, lon = offset_arrays(
        params.position.lat, params.position.lon, res.range_m, normalize_bearing(res.bearing_deg)
    )
    return lat, lon, res


def pixel_from_polar(params: CameraParams, distance_m, bearing_deg):
    """Pixel ``(u, v)`` that :func:`localize` maps onto the given range and bearing.

    Exact inverse of the localization model (including its linear azimuth),
    so it is a convenient way to build test pixels from polar data.
    """
    distance_m = np.asarray(distance_m, dtype=float)
    w, h = params.image_w, params.image_h
    omega_c = (np.asarray(bearing_deg, dtype=float) - params.heading_deg + 180.0) % 360.0 - 180.0
    u = w / 2 + omega_c * w / hfov_deg(params)
    y = distance_m * np.cos(omega_c * DEG)
    psi = np.arctan(y / params.height_m)
    beta = psi - math.pi / 2 + params.pitch_deg * DEG
    v = h / 2 - params.focal_px * np.tan(beta)
    return u, v
