import math

import numpy as np
import pytest

from pstsync.core import GeoPoint, LidarTrack, from_local_en
from pstsync.heading import (
    HeadingConfig,
    NoRetainedTracksError,
    check_straight,
    estimate_heading,
    modal_angle,
    select_heading_tracks,
    startup_frame,
    static_find,
)
from pstsync.simulator import generate, startup_scene

from conftest import cached_startup_scene

ORIGIN = GeoPoint(30.2741, 120.1551)


def _track(tid, east, north, face=270.0):
    lat, lon = from_local_en(ORIGIN, np.asarray(east, float), np.asarray(north, float))
    n = len(east)
    return LidarTrack(tid, np.arange(n), lat, lon, np.full(n, face), np.full(n, 5.0))


def _stop_and_go(tid, east0, north, stop_frames=70, go_frames=60, speed=1.0, bearing=270.0,
                 noise=0.0, rng=None):
    """Stand still at (east0, north) then drive along ``bearing`` at ``speed`` m/frame."""
    s = np.concatenate([np.zeros(stop_frames), speed * np.arange(1, go_frames + 1)])
    b = math.radians(bearing)
    east = east0 + s * math.sin(b)
    north = north + s * math.cos(b)
    if noise:
        east = east + rng.normal(0, noise, east.size)
        north = north + rng.normal(0, noise, north.size)
    return _track(tid, east, north, bearing)


def test_check_straight_cases(rng):
    e = np.linspace(0, -80, 40)
    lat, lon = from_local_en(ORIGIN, e, np.zeros_like(e))
    assert check_straight(lat, lon)
    noisy_lat, noisy_lon = from_local_en(ORIGIN, e + rng.normal(0, 0.2, 40), rng.normal(0, 0.2, 40))
    assert check_straight(noisy_lat, noisy_lon, tol=0.02)
    t = np.linspace(0, math.pi / 2, 40)
    lat, lon = from_local_en(ORIGIN, 12 * np.sin(t), 12 * (1 - np.cos(t)))
    assert not check_straight(lat, lon)


def test_static_find_arithmetic():
    assert static_find(_track(1, np.linspace(0, -100, 50), np.zeros(50))) == 0.0
    assert static_find(_stop_and_go(1, 20.0, 0.0, stop_frames=70)) == pytest.approx(7.0)


def test_static_find_noisy_standing(rng):
    n = 80
    tr = _track(1, rng.normal(0, 0.05, n), rng.normal(0, 0.05, n))
    assert static_find(tr) == pytest.approx(n / 10.0)


def test_single_westbound_track():
    assert estimate_heading([_stop_and_go(1, 20.0, 3.0)], ORIGIN) == 270.0


def test_voting_ignores_far_and_turning_tracks():
    tracks = [_stop_and_go(k, 10.0 + 6 * k, 1.75, bearing=270.0) for k in range(3)]
    tracks.append(_stop_and_go(10, 200.0, 0.0, bearing=180.0))  # too far from the camera
    t = np.linspace(0, math.pi / 2, 60)
    turn_e = np.concatenate([np.full(70, 5.0), 5.0 - 12 * np.sin(t)])
    turn_n = np.concatenate([np.zeros(70), 12 * (1 - np.cos(t))])
    tracks.append(_track(11, turn_e, turn_n))
    sel = select_heading_tracks(tracks, ORIGIN)
    assert sel.retained == [0, 1, 2]
    assert estimate_heading(tracks, ORIGIN) == 270.0
    assert startup_frame(tracks, ORIGIN) == 69


def test_only_turning_tracks_raise():
    t = np.linspace(0, math.pi / 2, 60)
    tr = _track(1, np.concatenate([np.zeros(70), -12 * np.sin(t)]),
                np.concatenate([np.zeros(70), 12 * (1 - np.cos(t))]))
    with pytest.raises(NoRetainedTracksError):
        estimate_heading([tr], ORIGIN)
    assert startup_frame([tr], ORIGIN) is None


def test_modal_angle_bins_and_ties():
    assert modal_angle([269.8, 270.2, 270.4, 90.0]) == 270.0
    assert modal_angle([359.7, 0.2, 180.0]) == 0.0
    # one vote each: the heavier bin wins
    assert modal_angle([10.0, 20.0], weights=[1.0, 3.0]) == 20.0
    with pytest.raises(ValueError):
        modal_angle([])


def test_heading_config_validation():
    with pytest.raises(ValueError):
        HeadingConfig(t_stationary_s=0)
    with pytest.raises(ValueError):
        HeadingConfig(smooth_window=0)


def test_simulated_scene_heading():
    scene = cached_startup_scene(3)
    cam = scene.cameras["E"]
    assert estimate_heading(scene.lidar_tracks, cam.position) == pytest.approx(270.0, abs=1.0)


def test_heading_invariant_to_track_order_and_translation():
    scene = generate(startup_scene(5))
    cam = scene.cameras["E"].position
    base = estimate_heading(scene.lidar_tracks, cam)
    assert estimate_heading(list(reversed(scene.lidar_tracks)), cam) == base
    shift = 0.001  # degrees of latitude and longitude, about 100 m
    moved = [
        LidarTrack(t.track_id, t.frames, t.lat + shift, t.lon + shift, t.face_deg, t.speed_mps)
        for t in scene.lidar_tracks
    ]
    assert estimate_heading(moved, GeoPoint(cam.lat + shift, cam.lon + shift)) == base
