"""Track files, run configuration and report files.

Track files are comma-separated text, one observation per line, preceded by
a ``#`` header declaring the schema version, record kind and frame rate.
Floats are written with 9 fixed decimals so a read/write cycle reproduces
the file byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .association import FilterConfig
from .camera_model import TableCalibration, focal_to_vfov, seed_params
from .core import DEFAULT_FPS, CameraParams, CameraTrack, GeoPoint, LidarTrack
from .heading import HeadingConfig
from .optimizer import DEFAULT_BOUNDS, FitReport, OptimizerConfig
from .pipeline import PipelineConfig
from .simulator import NoiseConfig, SceneConfig, VehicleSpec, intersection_scene, startup_scene

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CAMERA_FIELDS = ("camera_id", "track_id", "frame", "u", "v")
LIDAR_FIELDS = ("track_id", "frame", "lat", "lon", "face_deg", "speed_mps", "distance_m")
_HEADER = re.compile(r"^#\s*pstsync-tracks\s+(.*)$")


class TrackFileError(ValueError):
    """Malformed or missing track file; the message names the path."""


class ConfigError(ValueError):
    """Invalid configuration; the message names the field and, when known, the line."""


def _f9(x) -> str:
    return f"{float(x):.9f}"


# --- track files ------------------------------------------------------------


def write_camera_tracks(path, tracks: Mapping[str, list[CameraTrack]], fps: float = DEFAULT_FPS):
    """Write camera tracks of several cameras to one file."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# pstsync-tracks version={SCHEMA_VERSION} kind=camera fps={fps:g}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CAMERA_FIELDS)
        for cam_id in sorted(tracks):
            for tr in sorted(tracks[cam_id], key=lambda t: t.track_id):
                for k in range(len(tr)):
                    w.writerow([cam_id, tr.track_id, int(tr.frames[k]), _f9(tr.u[k]), _f9(tr.v[k])])


def write_lidar_tracks(path, tracks: list[LidarTrack], fps: float = DEFAULT_FPS):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# pstsync-tracks version={SCHEMA_VERSION} kind=lidar fps={fps:g}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LIDAR_FIELDS)
        for tr in sorted(tracks, key=lambda t: t.track_id):
            for k in range(len(tr)):
                w.writerow([
                    tr.track_id, int(tr.frames[k]), _f9(tr.lat[k]), _f9(tr.lon[k]),
                    _f9(tr.face_deg[k]), _f9(tr.speed_mps[k]), _f9(tr.distance_m[k]),
                ])


def _read_records(path, kind: str):
    path = Path(path)
    if not path.is_file():
        raise TrackFileError(f"track file not found: {path}")
    with open(path, newline="") as fh:
        first = fh.readline()
        m = _HEADER.match(first.strip())
        if not m:
            raise TrackFileError(f"{path}: missing '# pstsync-tracks' header line")
        meta = dict(kv.split("=", 1) for kv in m.group(1).split())
        if int(meta.get("version", -1)) != SCHEMA_VERSION:
            raise TrackFileError(f"{path}: unsupported schema version {meta.get('version')}")
        if meta.get("kind") != kind:
            raise TrackFileError(f"{path}: expected kind={kind}, found kind={meta.get('kind')}")
        fps = float(meta.get("fps", DEFAULT_FPS))
        reader = csv.DictReader(fh)
        rows = list(reader)
        return path, fps, reader.fieldnames or [], rows


def read_camera_tracks(path) -> tuple[dict[str, list[CameraTrack]], float]:
    """Camera tracks grouped by camera id, and the declared frame rate."""
    path, fps, names, rows = _read_records(path, "camera")
    if tuple(names) != CAMERA_FIELDS:
        raise TrackFileError(f"{path}: expected columns {','.join(CAMERA_FIELDS)}")
    groups: dict[tuple[str, int], list] = {}
    try:
        for i, r in enumerate(rows, start=3):
            key = (r["camera_id"], int(r["track_id"]))
            groups.setdefault(key, []).append((int(r["frame"]), float(r["u"]), float(r["v"])))
    except (TypeError, ValueError) as exc:
        raise TrackFileError(f"{path}:{i}: {exc}") from None
    out: dict[str, list[CameraTrack]] = {}
    for (cam, tid), recs in groups.items():
        a = np.array(recs)
        out.setdefault(cam, []).append(CameraTrack(tid, a[:, 0].astype(int), a[:, 1], a[:, 2]))
    return out, fps


def read_lidar_tracks(path) -> tuple[list[LidarTrack], float]:
    path, fps, names, rows = _read_records(path, "lidar")
    base = LIDAR_FIELDS[:-1]
    if tuple(names) not in (LIDAR_FIELDS, base):
        raise TrackFileError(f"{path}: expected columns {','.join(LIDAR_FIELDS)}")
    has_dist = "distance_m" in names
    groups: dict[int, list] = {}
    try:
        for i, r in enumerate(rows, start=3):
            rec = [int(r["frame"])] + [float(r[k]) for k in base[2:]]
            rec.append(float(r["distance_m"]) if has_dist else 0.0)
            groups.setdefault(int(r["track_id"]), []).append(rec)
    except (TypeError, ValueError) as exc:
        raise TrackFileError(f"{path}:{i}: {exc}") from None
    out = []
    for tid, recs in groups.items():
        a = np.array(recs)
        out.append(LidarTrack(tid, a[:, 0].astype(int), a[:, 1], a[:, 2], a[:, 3], a[:, 4], a[:, 5]))
    return out, fps


# --- camera parameter files ---------------------------------------------------


def camera_to_dict(p: CameraParams) -> dict:
    return {
        "focal_px": p.focal_px,
        "vfov_deg": focal_to_vfov(p.focal_px, p.image_h),
        "pitch_deg": p.pitch_deg,
        "height_m": p.height_m,
        "heading_deg": p.heading_deg,
        "lat": p.position.lat,
        "lon": p.position.lon,
        "image_w": p.image_w,
        "image_h": p.image_h,
    }


def camera_from_dict(d: Mapping, where: str = "camera") -> CameraParams:
    try:
        return CameraParams(
            float(d["focal_px"]), float(d["pitch_deg"]), float(d["height_m"]),
            float(d["heading_deg"]), GeoPoint(float(d["lat"]), float(d["lon"])),
            int(d["image_w"]), int(d["image_h"]),
        )
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- configuration ------------------------------------------------------------


def _line_index(node, prefix="", out=None) -> dict[str, int]:
    """Dotted key path -> 1-based source line, from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _line_index(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            key = f"{prefix}[{i}]"
            out[key] = v.start_mark.line + 1
            _line_index(v, key, out)
    return out


@dataclass
class RunConfig:
    """Everything a ``generate`` or ``run`` invocation needs."""

    pipeline: PipelineConfig
    seed: int = 0
    scene: dict | None = None  # scene description, or None when inputs are given
    inputs: dict | None = None  # camera_tracks / lidar_tracks / cameras paths
    calibration: dict | None = None
    out: str = "run"
    source: Path | None = None
    lines: dict | None = None

    def where(self, key: str) -> str:
        line = (self.lines or {}).get(key)
        src = str(self.source) if self.source else "<config>"
        return f"{src}:{line} ({key})" if line else f"{src} ({key})"


_SECTIONS = {"seed", "scene", "inputs", "calibration", "heading", "filters", "association",
             "optimizer", "output"}


def _build(cls, data: Mapping, section: str, where, convert=None):
    if data is None:
        return cls()
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where(section)}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        key = f"{section}.{unknown[0]}"
        raise ConfigError(f"{where(key)}: unknown field (allowed: {', '.join(sorted(names))})")
    kwargs = dict(data)
    if convert:
        kwargs = convert(kwargs)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where(section)}: {exc}") from None


def _optimizer_kwargs(d):
    d = dict(d)
    if "bounds" in d and d["bounds"] is not None:
        d["bounds"] = {k: tuple(map(float, v)) for k, v in d["bounds"].items()}
    return d


def parse_config(data: Mapping, source: Path | None = None, lines=None) -> RunConfig:
    lines = lines or {}
    src = str(source) if source else "<config>"

    def where(key):
        line = lines.get(key)
        return f"{src}:{line} ({key})" if line else f"{src} ({key})"

    if not isinstance(data, Mapping):
        raise ConfigError(f"{src}: top level must be a mapping")
    unknown = sorted(set(data) - _SECTIONS)
    if unknown:
        raise ConfigError(f"{where(unknown[0])}: unknown section")
    if (data.get("scene") is None) == (data.get("inputs") is None):
        raise ConfigError(f"{src}: give exactly one of 'scene' or 'inputs'")

    assoc = data.get("association") or {}
    if not isinstance(assoc, Mapping):
        raise ConfigError(f"{where('association')}: expected a mapping")
    bad = sorted(set(assoc) - {"k1", "k2", "window_s", "max_retries", "max_samples",
                               "estimate_heading"})
    if bad:
        raise ConfigError(f"{where('association.' + bad[0])}: unknown field")
    try:
        pipeline = PipelineConfig(
            heading=_build(HeadingConfig, data.get("heading"), "heading", where),
            filters=_build(FilterConfig, data.get("filters"), "filters", where),
            optimizer=_build(OptimizerConfig, data.get("optimizer"), "optimizer", where,
                             _optimizer_kwargs),
            **{k: assoc[k] for k in assoc},
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where('association')}: {exc}") from None
    if pipeline.k1 < 0 or pipeline.k2 < 0 or pipeline.k1 + pipeline.k2 == 0:
        raise ConfigError(f"{where('association')}: k1, k2 must be >= 0 and not both 0")

    try:
        seed = int(data.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError(f"{where('seed')}: seed must be an integer") from None
    out = (data.get("output") or {}).get("dir", "run")
    inputs = data.get("inputs")
    if inputs is not None:
        base = source.parent if source else Path(".")
        for key in ("camera_tracks", "lidar_tracks", "cameras"):
            if key not in inputs:
                raise ConfigError(f"{where('inputs')}: missing field {key!r}")
            p = Path(inputs[key])
            p = p if p.is_absolute() else base / p
            if not p.is_file():
                raise ConfigError(f"{where('inputs.' + key)}: file not found: {p}")
            inputs = {**inputs, key: str(p)}
    return RunConfig(pipeline, seed, data.get("scene"), inputs, data.get("calibration"), out,
                     source, lines)


def load_config(path) -> RunConfig:
    """Read a YAML run configuration.

    Raises:
        ConfigError: with the file, line and dotted field name where possible.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}{line}: {exc.problem}") from None
    lines = _line_index(node) if node is not None else {}
    return parse_config(data or {}, path, lines)


# --- scenes from configuration ------------------------------------------------

PRESETS = {"startup": startup_scene, "intersection": intersection_scene}


def scene_from_config(cfg: RunConfig, seed: int | None = None) -> SceneConfig:
    """Build a :class:`SceneConfig` from the ``scene`` section."""
    sc = dict(cfg.scene or {})
    seed = cfg.seed if seed is None else seed
    where = cfg.where
    allowed = {"preset", "duration_s", "fps", "origin", "cameras", "vehicles", "noise",
               "lidar_range_m", "camera_max_range_m", "n_queue", "n_opposing", "n_turning"}
    bad = sorted(set(sc) - allowed)
    if bad:
        raise ConfigError(f"{where('scene.' + bad[0])}: unknown field")

    noise_d = dict(sc.get("noise") or {})
    if "camera_position_error_m" in noise_d:
        noise_d["camera_position_error_m"] = tuple(noise_d["camera_position_error_m"])
    noise = _build(NoiseConfig, noise_d, "scene.noise", where)

    preset = sc.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"{where('scene.preset')}: unknown preset {preset!r} "
                              f"(choose from {', '.join(sorted(PRESETS))})")
        kw = {k: sc[k] for k in ("duration_s", "n_queue", "n_opposing", "n_turning") if k in sc}
        if preset == "intersection":
            kw.pop("n_opposing", None)
            kw.pop("n_turning", None)
        try:
            base = PRESETS[preset](seed, noise=noise, **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where('scene')}: {exc}") from None
        extra = {k: sc[k] for k in ("fps", "lidar_range_m", "camera_max_range_m") if k in sc}
        return SceneConfig(**{**{f.name: getattr(base, f.name) for f in fields(SceneConfig)},
                              **extra})

    origin = sc.get("origin") or {}
    try:
        origin = GeoPoint(float(origin.get("lat", 30.2741)), float(origin.get("lon", 120.1551)))
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"{where('scene.origin')}: {exc}") from None
    cams = {str(k): camera_from_dict(v, where(f"scene.cameras.{k}"))
            for k, v in (sc.get("cameras") or {}).items()}
    vehicles = []
    for i, v in enumerate(sc.get("vehicles") or []):
        vehicles.append(_build(VehicleSpec, v, f"scene.vehicles[{i}]", where))
    try:
        return SceneConfig(
            seed=seed, duration_s=float(sc.get("duration_s", 15.0)),
            fps=float(sc.get("fps", DEFAULT_FPS)), origin=origin, cameras=cams,
            vehicles=tuple(vehicles), noise=noise,
            lidar_range_m=float(sc.get("lidar_range_m", 150.0)),
            camera_max_range_m=float(sc.get("camera_max_range_m", 100.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where('scene')}: {exc}") from None


def apply_calibration(initial: Mapping[str, CameraParams], calibration: Mapping | None,
                      base: Path | None = None) -> dict[str, CameraParams]:
    """Replace focal/pitch of the initial parameters from a calibration table, if configured."""
    if not calibration or calibration.get("provider", "initial") == "initial":
        return dict(initial)
    if calibration.get("provider") != "table":
        raise ConfigError(f"calibration.provider must be 'initial' or 'table', "
                          f"got {calibration.get('provider')!r}")
    path = Path(calibration["file"])
    if base is not None and not path.is_absolute():
        path = base / path
    table = TableCalibration.from_file(path)
    out = {}
    for cam_id, p in initial.items():
        est = table.estimate(cam_id)
        out[cam_id] = seed_params(est, p.height_m, p.heading_deg, p.position, p.image_w, p.image_h)
    return out


# --- reports -------------------------------------------------------------------


def write_fit_report(path, report: FitReport, extra: Mapping[str, Any] | None = None):
    d = report.to_dict()
    d.update(extra or {})
    write_json(path, d)


def write_loss_curve(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "loss"))
        for i, v in enumerate(curve):
            w.writerow((i, repr(float(v))))


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_f9(x) if isinstance(x, float) else x for x in r])


def default_bounds() -> dict:
    return {k: list(v) for k, v in DEFAULT_BOUNDS.items()}


def default_config_dict() -> dict:
    """The documented defaults, as they would appear in a config file."""
    return {
        "seed": 0,
        "scene": {"preset": "startup", "duration_s": 20.0, "fps": DEFAULT_FPS},
        "heading": asdict(HeadingConfig()),
        "filters": asdict(FilterConfig()),
        "association": {"k1": 1.0, "k2": 1.0, "window_s": 3.0, "max_retries": 2,
                        "max_samples": 1000, "estimate_heading": True},
        "optimizer": {"lr": 0.001, "epochs": 30000, "mask": ["f", "pitch", "H", "heading"],
                      "bounds": default_bounds()},
        "output": {"dir": "run"},
    }
