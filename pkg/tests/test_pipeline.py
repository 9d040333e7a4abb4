import itertools

import numpy as np
import pytest

from pstsync.core import local_en
from pstsync.geolocation import localize_track
from pstsync.optimizer import OptimizerConfig
from pstsync.pipeline import (
    PipelineConfig,
    StageError,
    bev_rows,
    reassociate,
    run_all,
    run_camera,
    startup_window,
)
from pstsync.simulator import (
    NoiseConfig,
    association_rate,
    generate,
    intersection_scene,
    oracle_metrics,
    perturb,
    startup_scene,
)

FAST = PipelineConfig(max_samples=400)
NOISE = NoiseConfig(gnss_sigma_m=0.2, pixel_sigma_px=1.0, focal_scale=1.1,
                    param_bias={"pitch_deg": 1.5, "height_m": 1.0, "heading_deg": 2.0})


@pytest.fixture(scope="module")
def observed():
    scene = generate(startup_scene(0, n_turning=0))
    return scene, perturb(scene, NOISE)


def test_run_camera_end_to_end(observed):
    scene, obs = observed
    run = run_camera("E", obs.initial_params["E"], obs.camera_tracks["E"], obs.lidar_tracks, FAST)
    assert run.heading_estimated
    assert run.params_seed.heading_deg == 270.0
    assert association_rate(run.association.assignment, scene.correspondence["E"]) == 1.0
    before = oracle_metrics(scene, "E", run.params_seed, obs.camera_tracks["E"])
    after = oracle_metrics(scene, "E", run.report.params_after, obs.camera_tracks["E"])
    assert after.rmse_geo < 0.5 * before.rmse_geo
    assert run.report.rmse_d_after < run.report.rmse_d_before
    assert run.n_samples <= FAST.max_samples
    assert run.warnings == []


def test_window_opens_at_queue_start(observed):
    scene, obs = observed
    start, stop, found = startup_window(obs.initial_params["E"], obs.camera_tracks["E"],
                                        obs.lidar_tracks)
    assert found
    assert stop - start == 30
    # queued vehicles idle at least 7 s
    assert start >= 70


def test_retry_path_excludes_pairs(observed):
    _, obs = observed
    cfg = PipelineConfig(optimizer=OptimizerConfig(epochs=20), max_retries=2)
    run = run_camera("E", obs.initial_params["E"], obs.camera_tracks["E"], obs.lidar_tracks, cfg)
    assert run.retries == 2
    assert len(run.excluded) == 2
    assert not set(run.excluded) & set(run.pairs)
    assert any(w.startswith("fit:") for w in run.warnings)


def test_no_stopped_traffic_fails_at_association(observed):
    _, obs = observed
    moving = [t for t in obs.lidar_tracks if t.speed_mps.min() > 1.0]
    params = obs.initial_params["E"]
    with pytest.raises(StageError) as err:
        run_camera("E", params, obs.camera_tracks["E"], moving, FAST)
    assert err.value.stage == "associate"


def test_camera_without_tracks_fails_in_isolation(observed):
    _, obs = observed
    params = obs.initial_params["E"]
    result = run_all({"E": params, "X": params}, {"E": obs.camera_tracks["E"], "X": []},
                     obs.lidar_tracks, FAST)
    assert set(result.runs) == {"E"}
    assert "X" in result.failures and "[associate]" in result.failures["X"]


def test_reassociate_and_bev_rows(observed):
    scene, obs = observed
    run = run_camera("E", obs.initial_params["E"], obs.camera_tracks["E"], obs.lidar_tracks, FAST)
    again = reassociate(run, obs.camera_tracks["E"], obs.lidar_tracks)
    assert association_rate(again.assignment, scene.correspondence["E"]) == 1.0
    rows = bev_rows(run, obs.camera_tracks["E"], obs.lidar_tracks)
    assert {r[5] for r in rows} == {"mono", "mono-optimized", "lidar"}


def test_four_cameras_agree_on_shared_vehicles():
    scene = generate(intersection_scene(0))
    obs = perturb(scene, NoiseConfig(focal_scale=1.1,
                                     param_bias={"pitch_deg": 1.0, "height_m": 1.0}))
    res = run_all(obs.initial_params, obs.camera_tracks, obs.lidar_tracks, FAST)
    assert sorted(res.runs) == ["E", "N", "S", "W"]
    assert all(r.report.converged for r in res.runs.values())
    seen = {}
    for c, run in res.runs.items():
        for tr in obs.camera_tracks[c]:
            k = scene.camera_vehicle[c][tr.track_id]
            lat, lon, loc = localize_track(run.report.params_after, tr)
            east, north = local_en(scene.config.origin, lat, lon)
            for j in np.flatnonzero(loc.valid):
                seen.setdefault((k, int(tr.frames[j])), {})[c] = (east[j], north[j])
    gaps = [
        np.hypot(p[a][0] - p[b][0], p[a][1] - p[b][1])
        for p in seen.values() for a, b in itertools.combinations(sorted(p), 2)
    ]
    assert len(gaps) > 100
    assert np.median(gaps) < 1.0
