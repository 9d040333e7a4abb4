"""Automatic camera heading from LiDAR vehicle trajectories.

Roadside cameras usually look along their lane, so the heading of vehicles
that wait at the stop line near the camera and then drive off straight is a
good proxy for the camera heading. The estimate is the modal chord bearing
of those trajectories.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d

from .core import DEFAULT_FPS, GeoPoint, LidarTrack, inverse_arrays, local_en, normalize_bearing

logger = logging.getLogger(__name__)


class NoRetainedTracksError(RuntimeError):
    """No trajectory passed the heading filters; supply the heading manually."""


@dataclass(frozen=True)
class HeadingConfig:
    t_stationary_s: float = 5.0
    d_max_m: float = 30.0
    straightness_tol: float = 0.02
    mode_bin_deg: float = 1.0
    fps: float = DEFAULT_FPS
    # per-frame displacement below which a (smoothed) vehicle counts as standing
    stationary_eps_m: float = 0.25
    smooth_window: int = 10

    def __post_init__(self):
        for name in ("t_stationary_s", "d_max_m", "straightness_tol", "mode_bin_deg", "fps",
                     "stationary_eps_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.smooth_window < 1:
            raise ValueError("smooth_window must be >= 1")


def check_straight(lat, lon, tol: float = 0.02) -> bool:
    """True if no point strays from the first->last chord by more than ``tol * chord``."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if lat.size < 3:
        raise ValueError("straightness check needs at least 3 points")
    east, north = local_en(GeoPoint(float(lat[0]), float(lon[0])), lat, lon)
    de, dn = east[-1] - east[0], north[-1] - north[0]
    chord = np.hypot(de, dn)
    if chord == 0:
        return False
    # perpendicular distance via 2-D cross product with the unit chord
    dev = np.abs((east - east[0]) * dn - (north - north[0]) * de) / chord
    return bool(dev.max() <= tol * chord)


def longest_stationary_run(track: LidarTrack, cfg: HeadingConfig = HeadingConfig()):
    """Index range ``(i0, i1)`` (inclusive) of the longest standing period, or None.

    Runs are found on the smoothed trajectory, which blurs their edges by up
    to half the smoothing window; the winning run is then widened over
    neighbouring raw points that still lie within ``stationary_eps_m`` of
    the run's mean position.
    """
    if len(track) < 2:
        return None
    origin = GeoPoint(float(track.lat[0]), float(track.lon[0]))
    raw_e, raw_n = local_en(origin, track.lat, track.lon)
    east, north = raw_e, raw_n
    if cfg.smooth_window > 1:
        east = uniform_filter1d(raw_e, cfg.smooth_window, mode="nearest")
        north = uniform_filter1d(raw_n, cfg.smooth_window, mode="nearest")
    step = np.hypot(np.diff(east), np.diff(north)) / np.diff(track.frames)
    still = step < cfg.stationary_eps_m

    best, best_len = None, 0
    k = 0
    while k < still.size:
        if not still[k]:
            k += 1
            continue
        j = k
        while j + 1 < still.size and still[j + 1]:
            j += 1
        i0, i1 = k, j + 1  # step k joins points k and k+1
        n_frames = int(track.frames[i1] - track.frames[i0]) + 1
        if n_frames > best_len:
            best, best_len = (i0, i1), n_frames
        k = j + 1
    if best is None:
        return None
    i0, i1 = best
    ce, cn = raw_e[i0 : i1 + 1].mean(), raw_n[i0 : i1 + 1].mean()
    near = np.hypot(raw_e - ce, raw_n - cn) < cfg.stationary_eps_m
    while i0 > 0 and near[i0 - 1]:
        i0 -= 1
    while i1 + 1 < len(track) and near[i1 + 1]:
        i1 += 1
    return i0, i1


def static_find(track: LidarTrack, cfg: HeadingConfig = HeadingConfig()) -> float:
    """Duration in seconds of the longest period the vehicle stands still."""
    run = longest_stationary_run(track, cfg)
    if run is None:
        return 0.0
    i0, i1 = run
    return (int(track.frames[i1] - track.frames[i0]) + 1) / cfg.fps


def chord_bearing(track: LidarTrack) -> float:
    """Bearing from the first to the last geolocation of the track."""
    _, b = inverse_arrays(track.lat[0], track.lon[0], track.lat[-1], track.lon[-1])
    return float(b)


@dataclass
class HeadingSelection:
    """Retained track ids and their chord bearings, plus stationary run ends."""

    retained: list[int] = field(default_factory=list)
    angles: list[float] = field(default_factory=list)
    chord_m: list[float] = field(default_factory=list)
    run_end_frames: list[int] = field(default_factory=list)


def select_heading_tracks(
    tracks, camera: GeoPoint, cfg: HeadingConfig = HeadingConfig()
) -> HeadingSelection:
    sel = HeadingSelection()
    for tr in tracks:
        if len(tr) < 3 or not check_straight(tr.lat, tr.lon, cfg.straightness_tol):
            continue
        run = longest_stationary_run(tr, cfg)
        if run is None:
            continue
        i0, i1 = run
        t_static = (int(tr.frames[i1] - tr.frames[i0]) + 1) / cfg.fps
        if not t_static > cfg.t_stationary_s:
            continue
        d, _ = inverse_arrays(
            camera.lat, camera.lon, tr.lat[i0 : i1 + 1].mean(), tr.lon[i0 : i1 + 1].mean()
        )
        if d > cfg.d_max_m:
            continue
        chord, _ = inverse_arrays(tr.lat[0], tr.lon[0], tr.lat[-1], tr.lon[-1])
        sel.retained.append(tr.track_id)
        sel.angles.append(chord_bearing(tr))
        sel.chord_m.append(float(chord))
        sel.run_end_frames.append(int(tr.frames[i1]))
    return sel


def modal_angle(angles, bin_deg: float = 1.0, weights=None) -> float:
    """Center of the most populated angular bin; ties go to the heavier bin.

    Bins are centered on multiples of ``bin_deg``.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ValueError("no angles to vote on")
    weights = np.ones_like(angles) if weights is None else np.asarray(weights, dtype=float)
    nbins = int(round(360.0 / bin_deg))
    idx = np.round(normalize_bearing(angles) / bin_deg).astype(int) % nbins
    counts = np.bincount(idx, minlength=nbins)
    mass = np.bincount(idx, weights=weights, minlength=nbins)
    top = np.flatnonzero(counts == counts.max())
    best = top[np.argmax(mass[top])]
    return normalize_bearing(best * bin_deg)


def estimate_heading(tracks, camera: GeoPoint, cfg: HeadingConfig = HeadingConfig()) -> float:
    """Camera heading as the modal bearing of straight, recently stopped nearby vehicles.

    Raises:
        NoRetainedTracksError: if no track survives the filters.
    """
    sel = select_heading_tracks(tracks, camera, cfg)
    if not sel.retained:
        raise NoRetainedTracksError("no straight, stopped, nearby trajectories to vote on heading")
    logger.debug("heading vote over tracks %s", sel.retained)
    return modal_angle(sel.angles, cfg.mode_bin_deg, weights=sel.chord_m)


def startup_frame(tracks, camera: GeoPoint, cfg: HeadingConfig = HeadingConfig()) -> int | None:
    """Median frame at which the heading-voting vehicles drive off, or None."""
    sel = select_heading_tracks(tracks, camera, cfg)
    if not sel.retained:
        return None
    return int(np.median(sel.run_end_frames))
