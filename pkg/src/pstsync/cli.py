"""Command line entry point: ``pstsync {generate,run,report}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .files import (
    ConfigError,
    RunConfig,
    TrackFileError,
    apply_calibration,
    camera_from_dict,
    camera_to_dict,
    load_config,
    read_camera_tracks,
    read_lidar_tracks,
    scene_from_config,
    write_camera_tracks,
    write_fit_report,
    write_json,
    write_lidar_tracks,
    write_loss_curve,
    write_rows,
)
from .optimizer import parse_mask
from .pipeline import bev_rows, run_all
from .simulator import GroundTruthScene, NoOverlapError, association_rate, generate, oracle_metrics, perturb

logger = logging.getLogger("pstsync")

REPORT_COLUMNS = (
    "run", "camera", "mask", "n_samples", "rmse_a_before", "rmse_d_before",
    "rmse_a_after", "rmse_d_after", "converged",
)


def _write_scene(out: Path, scene: GroundTruthScene, observed) -> list[str]:
    (out / "ground_truth").mkdir(parents=True, exist_ok=True)
    (out / "observed").mkdir(parents=True, exist_ok=True)
    fps = scene.fps
    write_camera_tracks(out / "ground_truth" / "camera_tracks.csv", scene.camera_tracks, fps)
    write_lidar_tracks(out / "ground_truth" / "lidar_tracks.csv", scene.lidar_tracks, fps)
    write_camera_tracks(out / "observed" / "camera_tracks.csv", observed.camera_tracks, fps)
    write_lidar_tracks(out / "observed" / "lidar_tracks.csv", observed.lidar_tracks, fps)
    write_json(out / "cameras.json", {
        "truth": {c: camera_to_dict(p) for c, p in scene.cameras.items()},
        "initial": {c: camera_to_dict(p) for c, p in observed.initial_params.items()},
    })
    rows = [
        (c, ct, lt, scene.lidar_vehicle[lt])
        for c in sorted(scene.correspondence)
        for ct, lt in sorted(scene.correspondence[c].items())
    ]
    write_rows(out / "correspondence.csv",
               ("camera_id", "camera_track_id", "lidar_track_id", "vehicle"), rows)
    lidar_of = {v: k for k, v in scene.lidar_vehicle.items()}
    manifest = {
        "seed": scene.config.seed,
        "fps": fps,
        "n_frames": scene.config.n_frames,
        "n_vehicles": len(scene.vehicles),
        "vehicles": [
            {"index": v.index, "kind": v.spec.kind, "label": v.spec.label,
             "lidar_track_id": lidar_of.get(v.index)}
            for v in scene.vehicles
        ],
        "cameras": sorted(scene.cameras),
        "files": ["ground_truth/camera_tracks.csv", "ground_truth/lidar_tracks.csv",
                  "observed/camera_tracks.csv", "observed/lidar_tracks.csv",
                  "cameras.json", "correspondence.csv"],
    }
    write_json(out / "manifest.json", manifest)
    return manifest["files"]


def _scene_from(cfg: RunConfig, seed):
    if cfg.scene is None:
        raise ConfigError(f"{cfg.source}: this command needs a 'scene' section")
    scene = generate(scene_from_config(cfg, seed))
    return scene, perturb(scene)


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    scene, observed = _scene_from(cfg, args.seed)
    out = Path(args.out or cfg.out)
    files = _write_scene(out, scene, observed)
    logger.info("wrote %d files for %d vehicles to %s", len(files), len(scene.vehicles), out)
    return 0


def _load_inputs(cfg: RunConfig):
    cams, fps_c = read_camera_tracks(cfg.inputs["camera_tracks"])
    lidar, fps_l = read_lidar_tracks(cfg.inputs["lidar_tracks"])
    if fps_c != fps_l:
        raise TrackFileError(f"camera and lidar files disagree on fps ({fps_c} vs {fps_l})")
    with open(cfg.inputs["cameras"]) as fh:
        raw = json.load(fh)
    raw = raw.get("initial", raw)
    initial = {c: camera_from_dict(d, f"{cfg.inputs['cameras']} ({c})") for c, d in raw.items()}
    return initial, cams, lidar


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    pipeline = cfg.pipeline
    if args.mask:
        pipeline = replace(pipeline, optimizer=replace(pipeline.optimizer, mask=parse_mask(args.mask)))
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    scene = None
    if cfg.scene is not None:
        scene, observed = _scene_from(cfg, args.seed)
        _write_scene(out / "scene", scene, observed)
        initial, cam_tracks, lidar = observed.initial_params, observed.camera_tracks, observed.lidar_tracks
    else:
        initial, cam_tracks, lidar = _load_inputs(cfg)
    base = cfg.source.parent if cfg.source else None
    initial = apply_calibration(initial, cfg.calibration, base)

    t0 = time.perf_counter()
    result = run_all(initial, cam_tracks, lidar, pipeline, workers=args.parallel)
    elapsed = time.perf_counter() - t0

    pair_rows, bev = [], []
    summary = {"cameras": {}, "warnings": [], "errors": [], "elapsed_s": round(elapsed, 3)}
    for cam_id in sorted(initial):
        if cam_id in result.failures:
            summary["cameras"][cam_id] = {"status": "failed", "error": result.failures[cam_id]}
            summary["warnings"].append(result.failures[cam_id])
            continue
        run = result.runs[cam_id]
        truth = scene.correspondence.get(cam_id, {}) if scene else None
        extra = {
            "camera_id": cam_id,
            "heading_estimated": run.heading_estimated,
            "heading_seed_deg": run.params_seed.heading_deg,
            "window": list(run.window),
            "pairs": [list(p) for p in run.pairs],
            "retries": run.retries,
            "warnings": run.warnings,
        }
        if scene is not None:
            extra["association_rate"] = association_rate(run.association.assignment, truth)
            try:
                for tag, p in (("before", run.params_seed), ("after", run.report.params_after)):
                    m = oracle_metrics(scene, cam_id, p, cam_tracks[cam_id])
                    extra[f"oracle_{tag}"] = {"rmse_d": m.rmse_d, "rmse_a": m.rmse_a,
                                              "rmse_geo": m.rmse_geo}
            except NoOverlapError as exc:
                extra["oracle_error"] = str(exc)
        cam_dir = out / cam_id
        cam_dir.mkdir(exist_ok=True)
        write_fit_report(cam_dir / "fit_report.json", run.report, extra)
        write_loss_curve(cam_dir / "loss_curve.csv", run.report.loss_curve)
        for c, l in run.pairs:
            row = [cam_id, c, l, run.association.first_frames[(c, l)]]
            if truth is not None:
                row.append(int(truth.get(c) == l))
            pair_rows.append(row)
        bev += bev_rows(run, cam_tracks.get(cam_id, []), lidar)
        summary["cameras"][cam_id] = {"status": "ok", "converged": run.report.converged}
        summary["warnings"] += [f"camera {cam_id}: {w}" for w in run.warnings]

    header = ["camera_id", "camera_track_id", "lidar_track_id", "first_frame"]
    if scene is not None:
        header.append("correct")
    write_rows(out / "pairs.csv", header, pair_rows)
    write_rows(out / "bev.csv", ("camera_id", "track_id", "frame", "lat", "lon", "source"), bev)
    if not result.runs:
        summary["errors"].append("every camera failed")
    write_json(out / "summary.json", summary)
    for w in summary["warnings"]:
        logger.warning("%s", w)
    logger.info("run finished in %.1f s: %d ok, %d failed -> %s", elapsed, len(result.runs),
                len(result.failures), out)
    return 1 if summary["errors"] else 0


def report_rows(run_dirs) -> list[dict]:
    """One row per fit report found under the given run directories."""
    rows = []
    for d in run_dirs:
        d = Path(d)
        if not d.is_dir():
            raise FileNotFoundError(f"run directory not found: {d}")
        found = sorted(d.rglob("fit_report.json"))
        if not found:
            raise FileNotFoundError(f"no fit_report.json under {d}")
        for f in found:
            with open(f) as fh:
                r = json.load(fh)
            rel = f.parent.parent.relative_to(d)
            rows.append({
                "run": str(Path(d.name) / rel) if str(rel) != "." else d.name,
                "camera": r.get("camera_id", f.parent.name),
                "mask": "+".join(r["mask"]),
                "n_samples": r["n_samples"],
                "rmse_a_before": f"{r['rmse_a_before']:.4f}",
                "rmse_d_before": f"{r['rmse_d_before']:.4f}",
                "rmse_a_after": f"{r['rmse_a_after']:.4f}",
                "rmse_d_after": f"{r['rmse_d_after']:.4f}",
                "converged": r["converged"],
            })
    return rows


def cmd_report(args) -> int:
    rows = report_rows(args.run_dir)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, REPORT_COLUMNS, delimiter=args.delimiter, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pstsync",
        description="Roadside camera/LiDAR spatial synchronization.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic scene as track files")
    g.add_argument("--config", required=True, help="YAML configuration with a 'scene' section")
    g.add_argument("--out", help="output directory (default: output.dir from the config)")
    g.add_argument("--seed", type=int, help="override the scene seed")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="heading, association and parameter fit for every camera")
    r.add_argument("--config", required=True, help="YAML configuration")
    r.add_argument("--out", help="output directory (default: output.dir from the config)")
    r.add_argument("--seed", type=int, help="override the scene seed")
    r.add_argument("--parallel", type=int, default=1, metavar="N", help="worker processes")
    r.add_argument("--mask", help="parameters to optimize, e.g. 'f,pitch,H,heading'")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="tabulate before/after RMSE of one or more runs")
    p.add_argument("run_dir", nargs="+", help="run output directories")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--delimiter", default=",", help="field delimiter (default ',')")
    p.set_defaults(func=cmd_report)

    for sp in (g, r, p):
        sp.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS,
                        help="debug logging")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, TrackFileError, FileNotFoundError, ValueError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
