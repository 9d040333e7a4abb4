"""Synthetic roadside scenes with exact ground truth.

Vehicles move in a local east/north meter frame anchored at ``origin`` and
are mapped to latitude/longitude with the same spherical offset the
localization uses. LiDAR tracks are the geodetic trajectories; camera tracks
are pinhole projections of the same trajectories through the true camera
parameters. :func:`perturb` layers sensor noise and parameter errors on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .association import Assignment
from .camera_model import project_ground
from .core import (
    DEFAULT_FPS,
    CameraParams,
    CameraTrack,
    GeoPoint,
    LidarTrack,
    from_local_en,
    inverse_arrays,
    local_en,
    normalize_bearing,
    offset_arrays,
    wrap180,
)
from .geolocation import localize_params_batch
from .optimizer import SampleSet

KINDS = ("straight", "turn", "stationary-then-go")


class SceneConfigError(ValueError):
    pass


class NoOverlapError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleSpec:
    """One vehicle's path and speed profile.

    The path starts at ``(start_east_m, start_north_m)`` shifted
    ``lane_offset_m`` to the right of ``heading_deg``. ``turn`` vehicles go
    straight for ``turn_after_m`` and then follow an arc of
    ``turn_radius_m`` through ``turn_deg`` (positive = clockwise/right).
    ``stationary-then-go`` vehicles idle for ``idle_s`` before accelerating;
    an ``idle_s`` longer than the scene gives a parked vehicle.
    """

    kind: str
    start_east_m: float
    start_north_m: float
    heading_deg: float
    speed_mps: float = 10.0
    lane_offset_m: float = 0.0
    idle_s: float = 0.0
    accel_mps2: float = 2.0
    initial_speed_mps: float | None = None
    turn_after_m: float = 20.0
    turn_deg: float = 90.0
    turn_radius_m: float = 12.0
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SceneConfigError(f"unknown vehicle kind {self.kind!r}")
        if self.speed_mps < 0 or self.accel_mps2 <= 0 or self.idle_s < 0:
            raise SceneConfigError("speeds, idle time and acceleration must be non-negative")
        if self.kind == "turn" and self.turn_radius_m <= 0:
            raise SceneConfigError("turn radius must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    gnss_sigma_m: float = 0.0
    pixel_sigma_px: float = 0.0
    speed_sigma_mps: float = 0.0
    # additive biases on the parameters handed to the pipeline
    param_bias: Mapping[str, float] = field(default_factory=dict)
    focal_scale: float = 1.0
    dropout_rate: float = 0.0
    # (east, north) error of the camera position handed to the pipeline
    camera_position_error_m: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if min(self.gnss_sigma_m, self.pixel_sigma_px, self.speed_sigma_mps) < 0:
            raise SceneConfigError("noise sigmas must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise SceneConfigError("dropout_rate must lie in [0, 1)")
        if not self.focal_scale > 0:
            raise SceneConfigError("focal_scale must be positive")
        unknown = set(self.param_bias) - {"focal_px", "pitch_deg", "height_m", "heading_deg"}
        if unknown:
            raise SceneConfigError(f"unknown param_bias keys {sorted(unknown)}")


@dataclass(frozen=True)
class SceneConfig:
    seed: int = 0
    duration_s: float = 15.0
    fps: float = DEFAULT_FPS
    origin: GeoPoint = GeoPoint(30.2741, 120.1551)
    cameras: Mapping[str, CameraParams] = field(default_factory=dict)
    vehicles: tuple[VehicleSpec, ...] = ()
    noise: NoiseConfig = NoiseConfig()
    lidar_range_m: float = 150.0
    camera_max_range_m: float = 100.0

    def __post_init__(self):
        if not self.fps > 0:
            raise SceneConfigError("fps must be positive")
        if not self.duration_s > 0:
            raise SceneConfigError("duration_s must be positive")
        if self.lidar_range_m <= 0 or self.camera_max_range_m <= 0:
            raise SceneConfigError("sensor ranges must be positive")
        object.__setattr__(self, "vehicles", tuple(self.vehicles))

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.fps))


@dataclass
class VehicleTruth:
    index: int
    spec: VehicleSpec
    frames: np.ndarray
    east: np.ndarray
    north: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    face_deg: np.ndarray
    speed_mps: np.ndarray


@dataclass
class GroundTruthScene:
    config: SceneConfig
    vehicles: list[VehicleTruth]
    lidar_tracks: list[LidarTrack]
    camera_tracks: dict[str, list[CameraTrack]]
    # camera id -> {camera track id: lidar track id} for co-visible vehicles
    correspondence: dict[str, dict[int, int]]
    # lidar track id -> vehicle index; camera id -> {camera track id: vehicle index}
    lidar_vehicle: dict[int, int]
    camera_vehicle: dict[str, dict[int, int]]
    reference_camera: str | None

    @property
    def cameras(self) -> Mapping[str, CameraParams]:
        return self.config.cameras

    @property
    def fps(self) -> float:
        return self.config.fps


@dataclass
class ObservedScene:
    """What the pipeline sees: noisy tracks and imperfect initial parameters."""

    truth: GroundTruthScene
    lidar_tracks: list[LidarTrack]
    camera_tracks: dict[str, list[CameraTrack]]
    initial_params: dict[str, CameraParams]
    noise: NoiseConfig


# --- kinematics -----------------------------------------------------------


def _arclength(spec: VehicleSpec, t: np.ndarray):
    """Distance travelled and speed at times ``t``."""
    v0 = spec.initial_speed_mps
    if v0 is None:
        v0 = 0.0 if spec.kind == "stationary-then-go" or spec.idle_s > 0 else spec.speed_mps
    vmax = max(spec.speed_mps, v0)
    a = spec.accel_mps2
    tm = np.maximum(t - spec.idle_s, 0.0)
    t_ramp = (vmax - v0) / a
    ramp = np.minimum(tm, t_ramp)
    s = v0 * ramp + 0.5 * a * ramp**2 + vmax * np.maximum(tm - t_ramp, 0.0)
    speed = np.where(t < spec.idle_s, 0.0, v0 + a * ramp)
    return s, speed


def _path(spec: VehicleSpec, s: np.ndarray):
    """East, north and compass heading along the path at arclength ``s``."""
    h0 = math.radians(spec.heading_deg)
    e0 = spec.start_east_m + spec.lane_offset_m * math.cos(h0)
    n0 = spec.start_north_m - spec.lane_offset_m * math.sin(h0)
    if spec.kind != "turn":
        return e0 + s * math.sin(h0), n0 + s * math.cos(h0), np.full_like(s, spec.heading_deg)

    L1 = spec.turn_after_m
    kappa = math.copysign(1.0, spec.turn_deg) / spec.turn_radius_m  # rad per meter
    arc_len = abs(math.radians(spec.turn_deg)) * spec.turn_radius_m
    h1 = h0 + math.radians(spec.turn_deg)

    s1 = np.minimum(s, L1)
    east = e0 + s1 * math.sin(h0)
    north = n0 + s1 * math.cos(h0)
    heading = np.full_like(s, h0)

    sa = np.clip(s - L1, 0.0, arc_len)
    th = h0 + kappa * sa
    east = east + (math.cos(h0) - np.cos(th)) / kappa
    north = north + (np.sin(th) - math.sin(h0)) / kappa
    heading = np.where(s > L1, th, heading)

    s2 = np.maximum(s - L1 - arc_len, 0.0)
    east = east + s2 * math.sin(h1)
    north = north + s2 * math.cos(h1)
    heading = np.where(s > L1 + arc_len, h1, heading)
    return east, north, normalize_bearing(np.degrees(heading))


# --- generation -----------------------------------------------------------


def _camera_ground_coords(cam: CameraParams, lat, lon):
    d, b = inverse_arrays(cam.position.lat, cam.position.lon, lat, lon)
    rel = np.radians(b - cam.heading_deg)
    return d * np.sin(rel), d * np.cos(rel), d


def camera_visibility(cam: CameraParams, lat, lon, max_range_m: float = math.inf):
    """Pixel coordinates of ground points and a mask of those inside the image."""
    x, y, d = _camera_ground_coords(cam, lat, lon)
    u, v, s = project_ground(cam, x, y)
    vis = (
        (s > 0)
        & (y > 0)
        & (d <= max_range_m)
        & (u >= 0)
        & (u < cam.image_w)
        & (v >= 0)
        & (v < cam.image_h)
    )
    return u, v, vis


def generate(cfg: SceneConfig) -> GroundTruthScene:
    """Deterministic ground-truth scene for ``cfg``."""
    n = cfg.n_frames
    frames = np.arange(n)
    t = frames / cfg.fps
    rng = np.random.default_rng([cfg.seed, 0])
    cam_ids = list(cfg.cameras)
    ref = cam_ids[0] if cam_ids else None
    ref_pos = cfg.cameras[ref].position if ref else cfg.origin

    nveh = len(cfg.vehicles)
    lidar_ids = (rng.permutation(10 * max(nveh, 1)) + 1)[:nveh]
    cam_track_ids = {c: (rng.permutation(10 * max(nveh, 1)) + 1)[:nveh] for c in cam_ids}

    vehicles, lidar_tracks = [], []
    lidar_vehicle = {}
    camera_tracks = {c: [] for c in cam_ids}
    camera_vehicle = {c: {} for c in cam_ids}
    correspondence = {c: {} for c in cam_ids}
    lidar_origin_e, lidar_origin_n = 0.0, 0.0

    for k, spec in enumerate(cfg.vehicles):
        s, speed = _arclength(spec, t)
        east, north, face = _path(spec, s)
        lat, lon = from_local_en(cfg.origin, east, north)
        vt = VehicleTruth(k, spec, frames, east, north, lat, lon, face, speed)
        vehicles.append(vt)

        in_lidar = np.hypot(east - lidar_origin_e, north - lidar_origin_n) <= cfg.lidar_range_m
        lid = None
        if in_lidar.any():
            lid = int(lidar_ids[k])
            dist, _ = inverse_arrays(ref_pos.lat, ref_pos.lon, lat[in_lidar], lon[in_lidar])
            lidar_tracks.append(
                LidarTrack(lid, frames[in_lidar], lat[in_lidar], lon[in_lidar],
                           face[in_lidar], speed[in_lidar], dist)
            )
            lidar_vehicle[lid] = k

        for c in cam_ids:
            u, v, vis = camera_visibility(cfg.cameras[c], lat, lon, cfg.camera_max_range_m)
            if not vis.any():
                continue
            tid = int(cam_track_ids[c][k])
            camera_tracks[c].append(CameraTrack(tid, frames[vis], u[vis], v[vis]))
            camera_vehicle[c][tid] = k
            if lid is not None and np.intersect1d(frames[vis], frames[in_lidar]).size:
                correspondence[c][tid] = lid

    return GroundTruthScene(
        cfg, vehicles, lidar_tracks, camera_tracks, correspondence, lidar_vehicle,
        camera_vehicle, ref,
    )


def biased_params(cam: CameraParams, noise: NoiseConfig) -> CameraParams:
    b = noise.param_bias
    de, dn = noise.camera_position_error_m
    pos = cam.position
    if de or dn:
        lat, lon = from_local_en(cam.position, de, dn)
        pos = GeoPoint(float(lat), float(lon))
    return cam.replace(
        focal_px=cam.focal_px * noise.focal_scale + b.get("focal_px", 0.0),
        pitch_deg=cam.pitch_deg + b.get("pitch_deg", 0.0),
        height_m=cam.height_m + b.get("height_m", 0.0),
        heading_deg=normalize_bearing(cam.heading_deg + b.get("heading_deg", 0.0)),
        position=pos,
    )


def perturb(scene: GroundTruthScene, noise: NoiseConfig | None = None, seed=None) -> ObservedScene:
    """Noisy sensor view of ``scene``; zero noise returns the ideal tracks."""
    noise = scene.config.noise if noise is None else noise
    seed = scene.config.seed if seed is None else seed
    rng = np.random.default_rng([seed, 1])
    cfg = scene.config

    init = {c: biased_params(p, noise) for c, p in cfg.cameras.items()}
    ref_pos = init[scene.reference_camera].position if scene.reference_camera else cfg.origin

    lidar = []
    for tr in scene.lidar_tracks:
        lat, lon = tr.lat, tr.lon
        if noise.gnss_sigma_m > 0:
            east, north = local_en(cfg.origin, lat, lon)
            east = east + rng.normal(0.0, noise.gnss_sigma_m, east.shape)
            north = north + rng.normal(0.0, noise.gnss_sigma_m, north.shape)
            lat, lon = from_local_en(cfg.origin, east, north)
        speed = tr.speed_mps
        if noise.speed_sigma_mps > 0:
            speed = np.abs(speed + rng.normal(0.0, noise.speed_sigma_mps, speed.shape))
        keep = np.ones(len(tr), dtype=bool)
        if noise.dropout_rate > 0:
            keep = rng.random(len(tr)) >= noise.dropout_rate
            keep[0] = True
        dist, _ = inverse_arrays(ref_pos.lat, ref_pos.lon, lat, lon)
        lidar.append(
            LidarTrack(tr.track_id, tr.frames[keep], lat[keep], lon[keep], tr.face_deg[keep],
                       speed[keep], dist[keep])
        )

    cams = {}
    for c, tracks in scene.camera_tracks.items():
        p = cfg.cameras[c]
        out = []
        for tr in tracks:
            u, v = tr.u, tr.v
            if noise.pixel_sigma_px > 0:
                u = u + rng.normal(0.0, noise.pixel_sigma_px, u.shape)
                v = v + rng.normal(0.0, noise.pixel_sigma_px, v.shape)
            keep = (u >= 0) & (u < p.image_w) & (v >= 0) & (v < p.image_h)
            if noise.dropout_rate > 0:
                keep &= rng.random(len(tr)) >= noise.dropout_rate
            if keep.any():
                out.append(CameraTrack(tr.track_id, tr.frames[keep], u[keep], v[keep]))
        cams[c] = out
    return ObservedScene(scene, lidar, cams, init, noise)


# --- training data and oracle metrics ---------------------------------------


def pair_samples(camera_track: CameraTrack, lidar_track: LidarTrack, camera: GeoPoint) -> SampleSet:
    """Training samples from the frames a camera and a LiDAR track share.

    Truth range/bearing are taken from ``camera`` (the position the pipeline
    believes in) to the LiDAR geolocation.
    """
    _, ci, li = np.intersect1d(
        camera_track.frames, lidar_track.frames, assume_unique=True, return_indices=True
    )
    d, b = inverse_arrays(camera.lat, camera.lon, lidar_track.lat[li], lidar_track.lon[li])
    ok = d > 0
    return SampleSet(
        camera_track.u[ci][ok], camera_track.v[ci][ok], d[ok], b[ok], camera_track.frames[ci][ok]
    )


def samples_from_pairs(pairs, camera_tracks, lidar_tracks, camera: GeoPoint) -> SampleSet:
    cams = {t.track_id: t for t in camera_tracks}
    lids = {t.track_id: t for t in lidar_tracks}
    sets = [pair_samples(cams[c], lids[l], camera) for c, l in pairs]
    sets = [s for s in sets if len(s)]
    if not sets:
        return SampleSet([], [], [], [])
    return SampleSet.concat(sets)


def truth_samples(scene: GroundTruthScene, camera_id: str, observed: ObservedScene | None = None,
                  camera: GeoPoint | None = None) -> SampleSet:
    """Samples for a camera using the ground-truth track correspondence."""
    cam_tracks = observed.camera_tracks[camera_id] if observed else scene.camera_tracks[camera_id]
    lidar = observed.lidar_tracks if observed else scene.lidar_tracks
    if camera is None:
        camera = (observed.initial_params if observed else scene.cameras)[camera_id].position
    present = {t.track_id for t in cam_tracks}
    pairs = [(c, l) for c, l in scene.correspondence[camera_id].items() if c in present]
    return samples_from_pairs(pairs, cam_tracks, lidar, camera)


@dataclass
class OracleMetrics:
    rmse_d: float
    rmse_a: float
    rmse_geo: float
    association_rate: float
    n: int


def oracle_metrics(
    scene: GroundTruthScene,
    camera_id: str,
    params: CameraParams | None = None,
    camera_tracks=None,
    assignment: Assignment | None = None,
) -> OracleMetrics:
    """Localization error of ``params`` against the true vehicle positions.

    Range and bearing errors are measured from ``params.position`` (the
    camera position the pipeline uses) to the true vehicle; the geodesic
    error compares localized and true positions directly.

    Raises:
        NoOverlapError: no camera observation of a ground-truth vehicle.
    """
    params = scene.cameras[camera_id] if params is None else params
    tracks = scene.camera_tracks[camera_id] if camera_tracks is None else camera_tracks
    by_id = scene.camera_vehicle[camera_id]
    rd, ra, rg = [], [], []
    for tr in tracks:
        k = by_id.get(tr.track_id)
        if k is None:
            continue
        veh = scene.vehicles[k]
        lat_t, lon_t = veh.lat[tr.frames], veh.lon[tr.frames]
        res = localize_params_batch(params, tr.u, tr.v)
        ok = res.valid
        if not ok.any():
            continue
        d, b = inverse_arrays(params.position.lat, params.position.lon, lat_t[ok], lon_t[ok])
        rd.append(res.range_m[ok] - d)
        ra.append(wrap180(res.bearing_deg[ok] - b))
        lat_e, lon_e = offset_arrays(
            params.position.lat, params.position.lon, res.range_m[ok],
            normalize_bearing(res.bearing_deg[ok]),
        )
        ge, gn = local_en(scene.config.origin, lat_e, lon_e)
        te, tn = local_en(scene.config.origin, lat_t[ok], lon_t[ok])
        rg.append(np.hypot(ge - te, gn - tn))
    if not rd:
        raise NoOverlapError(f"camera {camera_id!r} has no observation of a known vehicle")
    rd, ra, rg = np.concatenate(rd), np.concatenate(ra), np.concatenate(rg)

    rate = math.nan
    if assignment is not None:
        truth = scene.correspondence[camera_id]
        if assignment.pairs:
            good = sum(truth.get(c) == l for c, l in assignment.pairs)
            rate = good / len(assignment.pairs)
        else:
            rate = 0.0
    return OracleMetrics(
        float(np.sqrt(np.mean(rd**2))),
        float(np.sqrt(np.mean(ra**2))),
        float(np.sqrt(np.mean(rg**2))),
        rate,
        int(rd.size),
    )


def association_rate(assignment: Assignment, truth: Mapping[int, int]) -> float:
    if not assignment.pairs:
        return 0.0
    return sum(truth.get(c) == l for c, l in assignment.pairs) / len(assignment.pairs)


# --- preset scenes ----------------------------------------------------------

IMAGE_W, IMAGE_H = 1920, 1080
SIM_FOCAL_PX = 1800.0
SIM_PITCH_DEG = 6.5
SIM_HEIGHT_M = 7.5
LANE_M = 3.5


def roadside_camera(origin: GeoPoint, east_m: float, north_m: float, heading_deg: float,
                    focal_px: float = SIM_FOCAL_PX, pitch_deg: float = SIM_PITCH_DEG,
                    height_m: float = SIM_HEIGHT_M) -> CameraParams:
    lat, lon = from_local_en(origin, east_m, north_m)
    return CameraParams(focal_px, pitch_deg, height_m, heading_deg, GeoPoint(float(lat), float(lon)),
                        IMAGE_W, IMAGE_H)


def _rot(east, north, heading_deg):
    """Rotate a westbound-frame offset so that west maps onto ``heading_deg``."""
    a = math.radians(heading_deg - 270.0)
    return (east * math.cos(a) + north * math.sin(a), -east * math.sin(a) + north * math.cos(a))


def approach_vehicles(rng, heading_deg: float = 270.0, n_queue: int = 8, n_opposing: int = 2,
                      n_turning: int = 3, first_go_s: float = 7.0) -> list[VehicleSpec]:
    """Traffic on one approach of an intersection centered at the origin.

    Written for the eastern approach (departures head west) and rotated to
    ``heading_deg``. Queued vehicles wait behind the stop line, 17 m from the
    center, and leave row by row; opposing vehicles drive through without
    stopping; turning vehicles wait on a side road and turn onto the
    departure lanes.
    """
    out = []
    lanes = [1.75, 1.75 + LANE_M, 1.75 + 2 * LANE_M]
    for k in range(n_queue):
        lane, row = k % 3, k // 3
        east = 17.0 + 8.0 * row + rng.uniform(-1.0, 1.0)
        north = lanes[lane] + rng.uniform(-0.3, 0.3)
        e, n = _rot(east, north, heading_deg)
        out.append(VehicleSpec(
            "stationary-then-go", e, n, heading_deg,
            speed_mps=rng.uniform(10.0, 14.0),
            idle_s=first_go_s + 1.5 * row + rng.uniform(0.0, 0.5),
            accel_mps2=rng.uniform(1.8, 2.5), label="queue",
        ))
    for k in range(n_opposing):
        e, n = _rot(-90.0 - 15.0 * k + rng.uniform(-3.0, 3.0),
                    -lanes[k % 2] + rng.uniform(-0.3, 0.3), heading_deg)
        out.append(VehicleSpec("straight", e, n, normalize_bearing(heading_deg + 180.0),
                               speed_mps=rng.uniform(9.0, 13.0), label="opposing"))
    for k in range(n_turning):
        if k % 2 == 0:  # southbound on the north leg, right turn onto the departure lanes
            start, face, turn, radius = (-5.25 - 4.0 * (k // 2), 17.0 + 6.0 * k), 180.0, 90.0, 10.0
            after = start[1] - radius - lanes[k // 2 % 3]
        else:  # northbound on the south leg, left turn
            start, face, turn, radius = (1.75, -17.0 - 6.0 * k), 0.0, -90.0, 12.0
            after = lanes[1] - radius - start[1]
        e, n = _rot(start[0], start[1], heading_deg)
        out.append(VehicleSpec(
            "turn", e, n, normalize_bearing(face + heading_deg - 270.0),
            speed_mps=rng.uniform(7.0, 9.0), idle_s=rng.uniform(3.0, 6.0),
            turn_after_m=after, turn_deg=turn, turn_radius_m=radius, label="turning",
        ))
    return out


def startup_scene(seed: int = 0, noise: NoiseConfig = NoiseConfig(), duration_s: float = 20.0,
                  n_queue: int = 8, n_opposing: int = 2, n_turning: int = 3) -> SceneConfig:
    """One westward-looking camera on the eastern approach, with queued,
    opposing and turning traffic (8 + 2 + 3 vehicles by default)."""
    rng = np.random.default_rng([seed, 7])
    origin = SceneConfig.origin
    cam = roadside_camera(origin, 45.0, 1.75 + LANE_M, 270.0)
    vehicles = approach_vehicles(rng, 270.0, n_queue, n_opposing, n_turning)
    return SceneConfig(seed=seed, duration_s=duration_s, origin=origin, cameras={"E": cam},
                       vehicles=tuple(vehicles), noise=noise)


def intersection_scene(seed: int = 0, noise: NoiseConfig = NoiseConfig(),
                       duration_s: float = 20.0, n_queue: int = 6) -> SceneConfig:
    """Four cameras, one per approach, each looking along its departure lanes."""
    rng = np.random.default_rng([seed, 11])
    origin = SceneConfig.origin
    cams, vehicles = {}, []
    for name, heading in (("E", 270.0), ("W", 90.0), ("N", 180.0), ("S", 0.0)):
        e, n = _rot(45.0, 1.75 + LANE_M, heading)
        cams[name] = roadside_camera(origin, e, n, heading)
        vehicles += approach_vehicles(rng, heading, n_queue, 0, 0,
                                      first_go_s=7.0 + rng.uniform(0.0, 2.0))
    return SceneConfig(seed=seed, duration_s=duration_s, origin=origin, cameras=cams,
                       vehicles=tuple(vehicles), noise=noise)


def filter_scene(duration_s: float = 3.0) -> SceneConfig:
    """Deterministic outlier-filtering scene in front of a westward camera.

    Labels: ``fusion`` vehicles drive away from the camera inside 50 m;
    ``far`` ones drive the same way beyond 50 m; ``opposing`` ones approach;
    ``parked`` ones stand still in view.
    """
    origin = SceneConfig.origin
    ce, cn = 45.0, 1.75 + LANE_M
    cam = roadside_camera(origin, ce, cn, 270.0)
    v = []
    for k, (ahead, lane, speed) in enumerate([(20, 1.75, 6.0), (24, 5.25, 7.0), (22, 8.75, 5.0),
                                              (30, 5.25, 4.0), (28, 1.75, 5.5)]):
        v.append(VehicleSpec("straight", ce - ahead, lane, 270.0, speed_mps=speed, label="fusion"))
    for ahead, lane in [(65, 1.75), (80, 8.75)]:
        v.append(VehicleSpec("straight", ce - ahead, lane, 270.0, speed_mps=8.0, label="far"))
    for ahead, lane in [(60, -1.75), (75, -5.25)]:
        v.append(VehicleSpec("straight", ce - ahead, lane, 90.0, speed_mps=9.0, label="opposing"))
    for ahead, lane in [(26, 8.75), (36, 1.75), (45, 5.25)]:
        v.append(VehicleSpec("stationary-then-go", ce - ahead, lane, 270.0, idle_s=1e9,
                             label="parked"))
    return SceneConfig(seed=0, duration_s=duration_s, origin=origin, cameras={"E": cam},
                       vehicles=tuple(v))
