"""Shared domain types and the spherical-Earth offset used for geolocation.

All public angles are in degrees. Bearings are compass bearings: clockwise
from North, normalized to ``[0, 360)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

EARTH_ARC_M = 6371.393 * 1000
# meters per degree of latitude
METERS_PER_DEG = EARTH_ARC_M * 2 * math.pi / 360

DEFAULT_FPS = 10.0


class DegenerateGeometryError(ValueError):
    """Raised when a bearing is undefined (coincident points)."""


def normalize_bearing(deg):
    """Wrap angles into ``[0, 360)``. Works on scalars and arrays."""
    out = np.mod(deg, 360.0)
    # np.mod(-1e-18, 360) == 360.0 in floating point
    out = np.where(out >= 360.0, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def wrap180(deg):
    """Wrap angle differences into ``[-180, 180)``."""
    out = np.mod(np.asarray(deg, dtype=float) + 180.0, 360.0) - 180.0
    if np.ndim(out) == 0:
        return float(out)
    return out


def angle_diff_abs(a, b):
    """Absolute angular separation on the circle, in ``[0, 180]``."""
    out = np.abs(wrap180(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class PolarObservation:
    """Range and compass bearing of a target seen from a reference point."""

    distance: float
    bearing: float

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        if not 0.0 <= self.bearing < 360.0:
            object.__setattr__(self, "bearing", normalize_bearing(self.bearing))


@dataclass(frozen=True)
class CameraParams:
    """Optimizable camera set {focal, pitch, height, heading} plus fixed data.

    ``position`` and the image size are never touched by the optimizer.
    """

    focal_px: float
    pitch_deg: float
    height_m: float
    heading_deg: float
    position: GeoPoint
    image_w: int
    image_h: int

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ValueError("focal_px must be positive")
        if not self.height_m > 0:
            raise ValueError("height_m must be positive")
        if not 0.0 < self.pitch_deg < 90.0:
            raise ValueError(f"pitch_deg must lie in (0, 90), got {self.pitch_deg}")
        if int(self.image_w) != self.image_w or int(self.image_h) != self.image_h:
            raise ValueError("image dimensions must be integers")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0.0 <= self.heading_deg < 360.0:
            object.__setattr__(self, "heading_deg", normalize_bearing(self.heading_deg))

    def replace(self, **changes) -> "CameraParams":
        fields = dict(
            focal_px=self.focal_px,
            pitch_deg=self.pitch_deg,
            height_m=self.height_m,
            heading_deg=self.heading_deg,
            position=self.position,
            image_w=self.image_w,
            image_h=self.image_h,
        )
        fields.update(changes)
        return CameraParams(**fields)


@dataclass(frozen=True)
class PixelObservation:
    frame: int
    u: float
    v: float


@dataclass(frozen=True)
class LidarState:
    frame: int
    position: GeoPoint
    face_deg: float
    speed_mps: float
    distance_m: float


def _check_frames(frames: np.ndarray, what: str):
    if frames.size == 0:
        raise ValueError(f"{what} must be non-empty")
    if np.any(np.diff(frames) <= 0):
        raise ValueError(f"{what} frames must be strictly increasing")


@dataclass(frozen=True, eq=False)
class CameraTrack:
    """Bottom-center pixel trajectory of one tracked vehicle in one camera.

    Stored column-wise; ``observations`` yields :class:`PixelObservation`.
    """

    track_id: int
    frames: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "frames", np.asarray(self.frames, dtype=np.int64))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        _check_frames(self.frames, f"camera track {self.track_id}")
        if not (self.frames.shape == self.u.shape == self.v.shape):
            raise ValueError("frames, u and v must have equal length")

    @classmethod
    def from_observations(cls, track_id: int, observations) -> "CameraTrack":
        obs = list(observations)
        return cls(
            track_id,
            [o.frame for o in obs],
            [o.u for o in obs],
            [o.v for o in obs],
        )

    @property
    def observations(self) -> list[PixelObservation]:
        return [
            PixelObservation(int(f), float(u), float(v))
            for f, u, v in zip(self.frames, self.u, self.v)
        ]

    def __len__(self):
        return len(self.frames)

    def __eq__(self, other):
        if not isinstance(other, CameraTrack):
            return NotImplemented
        return (
            self.track_id == other.track_id
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )

    def window(self, start: int, stop: int) -> "CameraTrack | None":
        """Sub-track with ``start <= frame < stop``, or None if empty."""
        keep = (self.frames >= start) & (self.frames < stop)
        if not keep.any():
            return None
        return CameraTrack(self.track_id, self.frames[keep], self.u[keep], self.v[keep])


@dataclass(frozen=True, eq=False)
class LidarTrack:
    """Geolocated trajectory of one vehicle as reported by the LiDAR tracker."""

    track_id: int
    frames: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    face_deg: np.ndarray
    speed_mps: np.ndarray
    distance_m: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "frames", np.asarray(self.frames, dtype=np.int64))
        for name in ("lat", "lon", "face_deg", "speed_mps"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.distance_m is None:
            object.__setattr__(self, "distance_m", np.zeros(len(self.frames)))
        else:
            object.__setattr__(self, "distance_m", np.asarray(self.distance_m, dtype=float))
        _check_frames(self.frames, f"lidar track {self.track_id}")
        n = len(self.frames)
        for name in ("lat", "lon", "face_deg", "speed_mps", "distance_m"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have the same length as frames")
        if np.any(self.speed_mps < 0):
            raise ValueError("speed_mps must be non-negative")
        if np.any(self.distance_m < 0):
            raise ValueError("distance_m must be non-negative")

    @classmethod
    def from_states(cls, track_id: int, states) -> "LidarTrack":
        st = list(states)
        return cls(
            track_id,
            [s.frame for s in st],
            [s.position.lat for s in st],
            [s.position.lon for s in st],
            [s.face_deg for s in st],
            [s.speed_mps for s in st],
            [s.distance_m for s in st],
        )

    @property
    def states(self) -> list[LidarState]:
        return [
            LidarState(int(f), GeoPoint(float(a), float(o)), float(h), float(s), float(d))
            for f, a, o, h, s, d in zip(
                self.frames, self.lat, self.lon, self.face_deg, self.speed_mps, self.distance_m
            )
        ]

    def __len__(self):
        return len(self.frames)

    def __iter__(self) -> Iterator[LidarState]:
        return iter(self.states)

    def __eq__(self, other):
        if not isinstance(other, LidarTrack):
            return NotImplemented
        return self.track_id == other.track_id and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("frames", "lat", "lon", "face_deg", "speed_mps", "distance_m")
        )

    def window(self, start: int, stop: int) -> "LidarTrack | None":
        keep = (self.frames >= start) & (self.frames < stop)
        if not keep.any():
            return None
        return LidarTrack(
            self.track_id,
            self.frames[keep],
            self.lat[keep],
            self.lon[keep],
            self.face_deg[keep],
            self.speed_mps[keep],
            self.distance_m[keep],
        )

    def with_distances_to(self, ref: GeoPoint) -> "LidarTrack":
        """Copy with ``distance_m`` recomputed relative to ``ref``."""
        dist, _ = inverse_arrays(ref.lat, ref.lon, self.lat, self.lon)
        return LidarTrack(
            self.track_id, self.frames, self.lat, self.lon, self.face_deg, self.speed_mps, dist
        )


# --- geodesy -------------------------------------------------------------


def offset_arrays(lat0, lon0, distance, bearing_deg):
    """Vectorized forward offset. Returns ``(lat, lon)`` arrays in degrees.

    The longitude step divides by the cosine of the *destination* latitude.
    """
    b = np.radians(bearing_deg)
    lat = lat0 + distance * np.cos(b) / METERS_PER_DEG
    lon = lon0 + distance * np.sin(b) / (METERS_PER_DEG * np.cos(np.radians(lat)))
    return lat, lon


def inverse_arrays(lat0, lon0, lat, lon):
    """Exact algebraic inverse of :func:`offset_arrays`.

    Returns ``(distance_m, bearing_deg)``; bearing is 0 where distance is 0.
    """
    north = (np.asarray(lat) - lat0) * METERS_PER_DEG
    east = (np.asarray(lon) - lon0) * METERS_PER_DEG * np.cos(np.radians(lat))
    dist = np.hypot(north, east)
    bearing = normalize_bearing(np.degrees(np.arctan2(east, north)))
    return dist, bearing


def geo_offset(origin: GeoPoint, obs: PolarObservation) -> GeoPoint:
    """Destination of a move of ``obs.distance`` meters along ``obs.bearing``."""
    lat, lon = offset_arrays(origin.lat, origin.lon, obs.distance, obs.bearing)
    return GeoPoint(float(lat), float(lon))


def geo_inverse(origin: GeoPoint, target: GeoPoint) -> PolarObservation:
    """Range and bearing that :func:`geo_offset` maps ``origin`` onto ``target``."""
    dist, bearing = inverse_arrays(origin.lat, origin.lon, target.lat, target.lon)
    if not dist > 0:
        raise DegenerateGeometryError("bearing undefined for coincident points")
    return PolarObservation(float(dist), float(bearing))


def local_en(origin: GeoPoint, lat, lon):
    """East/north meters of points relative to ``origin`` (inverse of the offset)."""
    lat = np.asarray(lat, dtype=float)
    north = (lat - origin.lat) * METERS_PER_DEG
    east = (np.asarray(lon, dtype=float) - origin.lon) * METERS_PER_DEG * np.cos(np.radians(lat))
    return east, north


def from_local_en(origin: GeoPoint, east, north):
    """Geodetic coordinates of east/north meter offsets from ``origin``."""
    east = np.asarray(east, dtype=float)
    north = np.asarray(north, dtype=float)
    dist = np.hypot(east, north)
    bearing = np.degrees(np.arctan2(east, north))
    return offset_arrays(origin.lat, origin.lon, dist, bearing)
