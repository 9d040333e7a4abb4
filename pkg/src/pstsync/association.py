"""LiDAR <-> camera track association.

Outlier tracks are dropped on both sides first, then the remaining tracks
are matched by minimum-cost bipartite assignment over a weight matrix built
from range and bearing disagreement.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import CameraParams, CameraTrack, LidarTrack, PolarObservation, angle_diff_abs
from .core import inverse_arrays
from .geolocation import localize_params_batch

logger = logging.getLogger(__name__)


class EmptyAfterFilterError(RuntimeError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    t_angle_deg: float = 5.0
    t_dist_m: float = 50.0
    t_speed_mps: float = 2.0
    t_pixel: float = 600.0
    # mean per-frame upward row motion a receding vehicle must exceed
    displacement_eps_px: float = 0.5

    def __post_init__(self):
        for name in ("t_angle_deg", "t_dist_m", "t_speed_mps", "t_pixel", "displacement_eps_px"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def circular_mean_deg(angles) -> float:
    a = np.radians(np.asarray(angles, dtype=float))
    return float(np.degrees(np.arctan2(np.sin(a).mean(), np.cos(a).mean())) % 360.0)


def filter_lidar(tracks, heading_deg: float, cfg: FilterConfig = FilterConfig(), camera=None):
    """Ids of LiDAR tracks inside the fusion area.

    A track is kept when its mean face angle is within ``t_angle_deg`` of
    the camera heading, it comes within ``t_dist_m`` of the camera and it
    moves at some point. Pass ``camera`` to recompute distances from
    positions instead of trusting ``distance_m``.
    """
    kept = []
    for tr in tracks:
        if angle_diff_abs(circular_mean_deg(tr.face_deg), heading_deg) > cfg.t_angle_deg:
            continue
        dist = tr.distance_m
        if camera is not None:
            dist, _ = inverse_arrays(camera.lat, camera.lon, tr.lat, tr.lon)
        if dist.min() > cfg.t_dist_m:
            continue
        if tr.speed_mps.max() < cfg.t_speed_mps:
            continue
        kept.append(tr.track_id)
    return kept


def pixel_displacement(track: CameraTrack) -> float:
    """Mean upward motion of the bottom-center row in pixels per frame.

    Positive for vehicles receding from the camera (rising toward the horizon).
    """
    if len(track) < 2:
        return 0.0
    return float(-(track.v[-1] - track.v[0]) / (track.frames[-1] - track.frames[0]))


def filter_camera(tracks, cfg: FilterConfig = FilterConfig()):
    """Ids of camera tracks that stay near and recede along the camera heading.

    Rows above ``t_pixel`` (small ``v``) sit close to the horizon, i.e. far
    away; stationary and approaching vehicles are dropped too.
    """
    kept = []
    for tr in tracks:
        if tr.v.min() < cfg.t_pixel:
            continue
        if pixel_displacement(tr) <= cfg.displacement_eps_px:
            continue
        kept.append(tr.track_id)
    return kept


# --- weights and assignment ----------------------------------------------


@dataclass
class WeightMatrix:
    rows: list  # camera track ids
    cols: list  # lidar track ids
    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (len(self.rows), len(self.cols)):
            raise ValueError("weight matrix shape does not match id lists")
        if np.any(self.w < 0):
            raise ValueError("weights must be non-negative")


@dataclass
class Assignment:
    pairs: list[tuple]  # (camera_id, lidar_id)
    total_cost: float

    def as_dict(self) -> dict:
        return dict(self.pairs)


def pair_weight(d_cam, b_cam, d_lidar, b_lidar, k1: float = 1.0, k2: float = 1.0):
    return k1 * np.abs(np.asarray(d_cam) - d_lidar) + k2 * angle_diff_abs(b_cam, b_lidar)


def build_weights(
    cam_obs: list[PolarObservation],
    lidar_obs: list[PolarObservation],
    k1: float = 1.0,
    k2: float = 1.0,
    cam_ids=None,
    lidar_ids=None,
) -> WeightMatrix:
    """Pairwise cost ``k1*|d_c - d_l| + k2*|bearing_c - bearing_l|`` (bearing gap wrapped)."""
    if not cam_obs or not lidar_obs:
        raise ValueError("both sides need at least one observation")
    if k1 < 0 or k2 < 0 or (k1 == 0 and k2 == 0):
        raise ValueError("k1, k2 must be non-negative and not both zero")
    dc = np.array([o.distance for o in cam_obs])[:, None]
    bc = np.array([o.bearing for o in cam_obs])[:, None]
    dl = np.array([o.distance for o in lidar_obs])[None, :]
    bl = np.array([o.bearing for o in lidar_obs])[None, :]
    w = pair_weight(dc, bc, dl, bl, k1, k2)
    rows = list(cam_ids) if cam_ids is not None else list(range(len(cam_obs)))
    cols = list(lidar_ids) if lidar_ids is not None else list(range(len(lidar_obs)))
    return WeightMatrix(rows, cols, w)


def _solve(cost: np.ndarray) -> float:
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def assign(wm: WeightMatrix) -> Assignment:
    """Minimum-cost matching covering the smaller side.

    Non-finite entries mark forbidden pairs; they are never reported. Among
    equally cheap matchings the one whose (camera_id, lidar_id) list, sorted
    by camera id, is lexicographically smallest wins.
    """
    w = wm.w
    nr, nc = w.shape
    if nr == 0 or nc == 0:
        return Assignment([], 0.0)
    finite = np.isfinite(w)
    big = (np.abs(w[finite]).max() + 1.0) * (min(nr, nc) + 1) if finite.any() else 1.0
    cost = np.where(finite, w, big)

    best = _solve(cost)
    tol = 1e-9 * max(1.0, abs(best))
    row_order = sorted(range(nr), key=lambda i: wm.rows[i])
    col_order = sorted(range(nc), key=lambda j: wm.cols[j])
    size = min(nr, nc)

    fixed: list[tuple[int, int]] = []
    dropped: set[int] = set()
    spent = 0.0
    for i in row_order:
        used_rows = {a for a, _ in fixed} | dropped | {i}
        used_cols = {b for _, b in fixed}
        rest_r = [r for r in row_order if r not in used_rows]
        choice = None
        for j in col_order:
            if j in used_cols:
                continue
            rest_c = [c for c in col_order if c not in used_cols and c != j]
            remaining = size - len(fixed) - 1
            if min(len(rest_r), len(rest_c)) < remaining:
                continue
            sub = cost[np.ix_(rest_r, rest_c)] if rest_r and rest_c else np.zeros((0, 0))
            total = spent + cost[i, j] + (_solve(sub) if sub.size else 0.0)
            if total <= best + tol:
                choice = j
                break
        if choice is None:
            dropped.add(i)
            continue
        fixed.append((i, choice))
        spent += cost[i, choice]
        if len(fixed) == size:
            break

    pairs = [(wm.rows[i], wm.cols[j]) for i, j in fixed if finite[i, j]]
    total = float(sum(w[i, j] for i, j in fixed if finite[i, j]))
    return Assignment(pairs, total)


def brute_force_min(w: np.ndarray) -> tuple[float, list[list[tuple[int, int]]]]:
    """Exhaustive minimum over matchings of the smaller side, with all argmins."""
    w = np.asarray(w, dtype=float)
    nr, nc = w.shape
    best, arg = math.inf, []
    if nr <= nc:
        for perm in itertools.permutations(range(nc), nr):
            c = sum(w[i, perm[i]] for i in range(nr))
            pairs = [(i, perm[i]) for i in range(nr)]
            if c < best - 1e-12:
                best, arg = c, [pairs]
            elif abs(c - best) <= 1e-12:
                arg.append(pairs)
    else:
        cost, args = brute_force_min(w.T)
        return cost, [[(i, j) for j, i in a] for a in args]
    return best, arg


# --- pipeline step --------------------------------------------------------


@dataclass
class AssociationResult:
    assignment: Assignment
    lidar_kept: list[int]
    camera_kept: list[int]
    weights: WeightMatrix
    # frame at which each matched pair was compared
    first_frames: dict = field(default_factory=dict)


def associate(
    camera_tracks,
    lidar_tracks,
    params: CameraParams,
    cfg: FilterConfig = FilterConfig(),
    k1: float = 1.0,
    k2: float = 1.0,
    exclude=(),
) -> AssociationResult:
    """Filter both sides, localize with ``params`` and match by Hungarian assignment.

    Each (camera, lidar) pair is weighted at the first frame both tracks
    share; pairs without a shared frame, and pairs listed in ``exclude``,
    are forbidden. ``exclude`` is the retry hook used when a fit on the
    matched pairs fails to converge.

    Raises:
        EmptyAfterFilterError: if either side is empty after filtering.
    """
    lidar_by_id = {t.track_id: t for t in lidar_tracks}
    cam_by_id = {t.track_id: t for t in camera_tracks}
    l_keep = filter_lidar(lidar_tracks, params.heading_deg, cfg, camera=params.position)
    c_keep = filter_camera(camera_tracks, cfg)
    if not l_keep or not c_keep:
        raise EmptyAfterFilterError(
            f"nothing to associate after filtering ({len(c_keep)} camera, {len(l_keep)} lidar)"
        )

    cam_polar = {}
    for cid in c_keep:
        tr = cam_by_id[cid]
        res = localize_params_batch(params, tr.u, tr.v)
        cam_polar[cid] = (tr.frames, res.range_m, res.bearing_deg, res.valid)
    lid_polar = {}
    for lid in l_keep:
        tr = lidar_by_id[lid]
        d, b = inverse_arrays(params.position.lat, params.position.lon, tr.lat, tr.lon)
        lid_polar[lid] = (tr.frames, d, b)

    excluded = set(exclude)
    w = np.full((len(c_keep), len(l_keep)), np.inf)
    first = {}
    for i, cid in enumerate(c_keep):
        cf, cd, cb, cv = cam_polar[cid]
        cf = cf[cv]
        if cf.size == 0:
            continue
        cd, cb = cd[cv], cb[cv]
        for j, lid in enumerate(l_keep):
            if (cid, lid) in excluded:
                continue
            lf, ld, lb = lid_polar[lid]
            shared, ci, li = np.intersect1d(cf, lf, assume_unique=True, return_indices=True)
            if shared.size == 0:
                continue
            w[i, j] = pair_weight(cd[ci[0]], cb[ci[0]], ld[li[0]], lb[li[0]], k1, k2)
            first[(cid, lid)] = int(shared[0])

    wm = WeightMatrix(c_keep, l_keep, w)
    result = assign(wm)
    logger.debug("associated %d pairs (cost %.4f)", len(result.pairs), result.total_cost)
    return AssociationResult(
        result, l_keep, c_keep, wm, {p: first[p] for p in result.pairs}
    )
