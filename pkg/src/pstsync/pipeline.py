"""Per-camera synchronization: heading, start-up window, association, fit.

Each camera is handled independently of the others, which is what lets
:func:`run_all` spread cameras over worker processes without changing any
result.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .association import AssociationResult, FilterConfig, associate
from .core import CameraParams, CameraTrack, LidarTrack, normalize_bearing, offset_arrays, wrap180
from .geolocation import localize_params_batch
from .heading import HeadingConfig, NoRetainedTracksError, estimate_heading, startup_frame
from .optimizer import DivergenceError, FitReport, OptimizerConfig, SampleSet, fit
from .simulator import pair_samples

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    """A pipeline stage failed for one camera."""

    def __init__(self, stage: str, camera_id: str, message: str):
        super().__init__(f"[{stage}] camera {camera_id}: {message}")
        self.stage = stage
        self.camera_id = camera_id
        self.message = message


@dataclass(frozen=True)
class PipelineConfig:
    heading: HeadingConfig = HeadingConfig()
    filters: FilterConfig = FilterConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    k1: float = 1.0
    k2: float = 1.0
    # length of the association window that opens at the start-up frame
    window_s: float = 3.0
    estimate_heading: bool = True
    max_samples: int | None = 1000
    max_retries: int = 2


@dataclass
class CameraRun:
    camera_id: str
    params_initial: CameraParams
    params_seed: CameraParams  # after the heading stage
    heading_estimated: bool
    window: tuple[int, int]
    association: AssociationResult
    report: FitReport
    n_samples: int
    retries: int = 0
    excluded: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def pairs(self):
        return self.association.assignment.pairs


def window_tracks(tracks, start: int, stop: int) -> list:
    """The part of each track inside frames ``[start, stop)``; empty tracks dropped."""
    out = []
    for t in tracks:
        w = t.window(start, stop)
        if w is not None:
            out.append(w)
    return out


def build_samples(pairs, camera_tracks, lidar_tracks, params: CameraParams,
                  max_samples: int | None = None) -> tuple[SampleSet, dict]:
    """Training samples over the full matched tracks, plus per-pair sample sets."""
    cams = {t.track_id: t for t in camera_tracks}
    lids = {t.track_id: t for t in lidar_tracks}
    per_pair = {}
    for c, l in pairs:
        s = pair_samples(cams[c], lids[l], params.position)
        if len(s):
            per_pair[(c, l)] = s
    if not per_pair:
        return SampleSet([], [], [], []), per_pair
    return SampleSet.concat(list(per_pair.values())).thin(max_samples), per_pair


def pair_residuals(params: CameraParams, per_pair: Mapping) -> dict:
    """Mean squared localization residual of each matched pair under ``params``."""
    out = {}
    for key, s in per_pair.items():
        res = localize_params_batch(params, s.u, s.v)
        ok = res.valid
        if not ok.any():
            out[key] = math.inf
            continue
        ra = wrap180(res.bearing_deg[ok] - s.bearing[ok])
        rd = res.range_m[ok] - s.distance[ok]
        out[key] = float(np.mean(ra**2 + rd**2))
    return out


def startup_window(params: CameraParams, camera_tracks, lidar_tracks,
                   cfg: PipelineConfig = PipelineConfig()) -> tuple[int, int, bool]:
    """Association window ``(start, stop, found)`` opening when queued traffic drives off.

    Falls back to the first camera frame (``found == False``) when no
    stopped vehicle is seen near the camera.
    """
    start = startup_frame(lidar_tracks, params.position, cfg.heading)
    found = start is not None
    if not found:
        start = min((int(t.frames[0]) for t in camera_tracks if len(t)), default=0)
    return start, start + max(1, int(round(cfg.window_s * cfg.heading.fps))), found


def run_camera(
    camera_id: str,
    params0: CameraParams,
    camera_tracks: list[CameraTrack],
    lidar_tracks: list[LidarTrack],
    cfg: PipelineConfig = PipelineConfig(),
) -> CameraRun:
    """Heading -> start-up window -> filter/associate -> fit for one camera.

    A fit that diverges or does not settle is retried after forbidding the
    matched pair with the largest residual, up to ``cfg.max_retries`` times.

    Raises:
        StageError: naming the failing stage.
    """
    warnings = []
    params = params0
    heading_ok = False
    if cfg.estimate_heading:
        try:
            params = params.replace(
                heading_deg=estimate_heading(lidar_tracks, params.position, cfg.heading)
            )
            heading_ok = True
        except NoRetainedTracksError as exc:
            warnings.append(f"heading: {exc}; keeping {params.heading_deg:.3f}")
            logger.warning("camera %s: %s", camera_id, warnings[-1])

    start, stop, found = startup_window(params, camera_tracks, lidar_tracks, cfg)
    if not found:
        warnings.append("window: no start-up detected, window opens at the first camera frame")
    cam_win = window_tracks(camera_tracks, start, stop)
    lid_win = window_tracks(lidar_tracks, start, stop)

    excluded: list = []
    retries = 0
    while True:
        try:
            assoc = associate(cam_win, lid_win, params, cfg.filters, cfg.k1, cfg.k2, excluded)
        except Exception as exc:
            raise StageError("associate", camera_id, str(exc)) from exc
        if not assoc.assignment.pairs:
            raise StageError("associate", camera_id, "no admissible camera/LiDAR pair")

        samples, per_pair = build_samples(
            assoc.assignment.pairs, camera_tracks, lidar_tracks, params, cfg.max_samples
        )
        if len(samples) == 0:
            raise StageError("samples", camera_id, "matched pairs share no frames")

        report, failure = None, None
        try:
            report = fit(params, samples, cfg.optimizer)
            if not report.converged:
                failure = "loss still decreasing at the end of the epoch budget"
        except DivergenceError as exc:
            failure = str(exc)
        except ValueError as exc:
            raise StageError("fit", camera_id, str(exc)) from exc

        if failure is None or retries >= cfg.max_retries or len(per_pair) < 2:
            if failure is not None:
                if report is None:
                    raise StageError("fit", camera_id, failure)
                warnings.append(f"fit: {failure}")
            break
        judge = report.params_after if report is not None else params
        resid = pair_residuals(judge, per_pair)
        worst = max(resid, key=lambda k: (resid[k], k))
        logger.info("camera %s: fit retry %d without pair %s (%s)", camera_id, retries + 1,
                    worst, failure)
        excluded.append(worst)
        retries += 1

    return CameraRun(
        camera_id, params0, params, heading_ok, (start, stop), assoc, report, len(samples),
        retries, excluded, warnings,
    )


@dataclass
class MultiRun:
    runs: dict = field(default_factory=dict)  # camera id -> CameraRun
    failures: dict = field(default_factory=dict)  # camera id -> StageError message

    @property
    def params(self) -> dict:
        return {k: r.report.params_after for k, r in self.runs.items()}


def _run_one(item):
    cam_id, params0, cam_tracks, lidar_tracks, cfg = item
    try:
        return cam_id, run_camera(cam_id, params0, cam_tracks, lidar_tracks, cfg), None
    except StageError as exc:
        return cam_id, None, str(exc)


def run_all(
    initial: Mapping[str, CameraParams],
    camera_tracks: Mapping[str, list[CameraTrack]],
    lidar_tracks: list[LidarTrack],
    cfg: PipelineConfig = PipelineConfig(),
    workers: int = 1,
) -> MultiRun:
    """Run every camera; a failing camera is recorded and the rest continue."""
    items = [
        (c, initial[c], list(camera_tracks.get(c, [])), lidar_tracks, cfg) for c in sorted(initial)
    ]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
            results = list(pool.map(_run_one, items))
    else:
        results = [_run_one(it) for it in items]
    out = MultiRun()
    for cam_id, run, err in results:
        if err is None:
            out.runs[cam_id] = run
        else:
            logger.warning("%s", err)
            out.failures[cam_id] = err
    return out


def bev_rows(run: CameraRun, camera_tracks, lidar_tracks):
    """Per-frame plot rows ``(camera_id, track_id, frame, lat, lon, source)``."""
    rows = []
    for src, params in (("mono", run.params_seed), ("mono-optimized", run.report.params_after)):
        for tr in camera_tracks:
            res = localize_params_batch(params, tr.u, tr.v)
            lat, lon = offset_arrays(params.position.lat, params.position.lon, res.range_m,
                                     normalize_bearing(res.bearing_deg))
            for k in np.flatnonzero(res.valid):
                rows.append((run.camera_id, tr.track_id, int(tr.frames[k]), float(lat[k]),
                             float(lon[k]), src))
    matched = {l for _, l in run.pairs}
    for tr in lidar_tracks:
        if tr.track_id not in matched:
            continue
        for k in range(len(tr)):
            rows.append((run.camera_id, tr.track_id, int(tr.frames[k]), float(tr.lat[k]),
                         float(tr.lon[k]), "lidar"))
    return rows


def reassociate(run: CameraRun, camera_tracks, lidar_tracks, cfg: PipelineConfig = PipelineConfig()):
    """Association over the same start-up window, using the optimized parameters."""
    start, stop = run.window
    return associate(
        window_tracks(camera_tracks, start, stop), window_tracks(lidar_tracks, start, stop),
        run.report.params_after, cfg.filters, cfg.k1, cfg.k2,
    )
