"""Per-camera refinement of {focal, pitch, height, heading} against LiDAR truth.

The loss is the mean over samples of squared bearing error (degrees) plus
squared range error (meters). Focal length is optimized through the
vertical field of view, so a single variable moves both the focal length
and the horizontal fov. Parameters are projected back into their box after
every Adam step.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .camera_model import focal_to_vfov, vfov_to_focal
from .core import CameraParams, PixelObservation, PolarObservation, normalize_bearing
from .geolocation import DEG, PARAM_NAMES, localize_batch

logger = logging.getLogger(__name__)

DEFAULT_BOUNDS = {
    "focal_px": (1000.0, 5000.0),
    "height_m": (5.0, 10.0),
    "pitch_deg": (1.0, 90.0),
    "heading_deg": (240.0, 300.0),
}

_ALIASES = {
    "f": "f", "focal": "f", "focal_px": "f", "vfov": "f", "vfov_deg": "f",
    "pitch": "pitch", "phi": "pitch", "pitch_deg": "pitch",
    "h": "H", "height": "H", "height_m": "H",
    "heading": "heading", "omega_h": "heading", "w_h": "heading", "heading_deg": "heading",
}
MASK_ORDER = ("f", "pitch", "H", "heading")
FULL_MASK = MASK_ORDER


class DivergenceError(RuntimeError):
    pass


def parse_mask(mask) -> tuple[str, ...]:
    """Canonical mask tuple from names like ``"f,H"`` or ``["phi", "omega_h"]``."""
    if isinstance(mask, str):
        mask = [m for m in mask.replace("+", ",").split(",") if m.strip()]
    out = set()
    for m in mask:
        key = m.strip()
        canon = _ALIASES.get(key) or _ALIASES.get(key.lower())
        if canon is None:
            raise ValueError(f"unknown parameter in mask: {m!r}")
        out.add(canon)
    if not out:
        raise ValueError("mask must name at least one parameter")
    return tuple(p for p in MASK_ORDER if p in out)


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 0.001
    epochs: int = 30000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    bounds: Mapping[str, tuple[float, float]] | None = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )
    # when set, heading bounds become heading0 +/- this (overrides bounds["heading_deg"])
    heading_halfwidth_deg: float | None = None
    mask: tuple[str, ...] = FULL_MASK
    batch: int | None = None
    seed: int = 0
    weight_angle: float = 1.0
    weight_dist: float = 1.0
    converge_window: int = 1000
    converge_rtol: float = 1e-3
    # a loss at or below this counts as converged whatever its trend
    converge_atol: float = 1e-12
    early_stop: bool = False
    early_stop_rtol: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        object.__setattr__(self, "mask", parse_mask(self.mask))
        if self.bounds is not None:
            for k, (lo, hi) in self.bounds.items():
                if not lo < hi:
                    raise ValueError(f"bounds for {k} must satisfy lower < upper")


@dataclass(frozen=True)
class TrainingSample:
    pixel: PixelObservation
    truth: PolarObservation


@dataclass
class SampleSet:
    """Column-wise training data: pixels and LiDAR range/bearing truth."""

    u: np.ndarray
    v: np.ndarray
    distance: np.ndarray
    bearing: np.ndarray
    frames: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.distance = np.asarray(self.distance, dtype=float)
        self.bearing = np.asarray(self.bearing, dtype=float)
        if not (self.u.shape == self.v.shape == self.distance.shape == self.bearing.shape):
            raise ValueError("sample columns must have equal length")
        if np.any(self.distance <= 0):
            raise ValueError("truth distances must be positive")

    def __len__(self):
        return self.u.size

    @classmethod
    def from_samples(cls, samples: Sequence[TrainingSample]) -> "SampleSet":
        return cls(
            [s.pixel.u for s in samples],
            [s.pixel.v for s in samples],
            [s.truth.distance for s in samples],
            [s.truth.bearing for s in samples],
            [s.pixel.frame for s in samples],
        )

    @classmethod
    def concat(cls, sets: Sequence["SampleSet"]) -> "SampleSet":
        frames = None
        if all(s.frames is not None for s in sets):
            frames = np.concatenate([s.frames for s in sets])
        return cls(
            np.concatenate([s.u for s in sets]),
            np.concatenate([s.v for s in sets]),
            np.concatenate([s.distance for s in sets]),
            np.concatenate([s.bearing for s in sets]),
            frames,
        )

    def subset(self, idx) -> "SampleSet":
        return SampleSet(
            self.u[idx], self.v[idx], self.distance[idx], self.bearing[idx],
            None if self.frames is None else self.frames[idx],
        )

    def thin(self, max_n: int | None) -> "SampleSet":
        """At most ``max_n`` samples, evenly spaced over the set."""
        if max_n is None or len(self) <= max_n:
            return self
        return self.subset(np.linspace(0, len(self) - 1, max_n).round().astype(int))


def as_sample_set(samples) -> SampleSet:
    if isinstance(samples, SampleSet):
        return samples
    return SampleSet.from_samples(list(samples))


def params_to_vector(params: CameraParams) -> np.ndarray:
    return np.array(
        [
            focal_to_vfov(params.focal_px, params.image_h),
            params.pitch_deg,
            params.height_m,
            params.heading_deg,
        ]
    )


def vector_to_params(x, like: CameraParams) -> CameraParams:
    return like.replace(
        focal_px=vfov_to_focal(float(x[0]), like.image_h),
        pitch_deg=float(x[1]),
        height_m=float(x[2]),
        heading_deg=normalize_bearing(float(x[3])),
    )


def _residuals(x, w, h, data: SampleSet, jacobian=False):
    res = localize_batch(x[0], x[1], x[2], x[3], w, h, data.u, data.v, jacobian=jacobian)
    ra = (np.mod(res.bearing_deg - data.bearing + 180.0, 360.0) - 180.0)
    rd = res.range_m - data.distance
    return res, ra, rd


def loss_and_grad(x, w: int, h: int, data: SampleSet, weights=(1.0, 1.0), grad=True):
    """Loss, gradient over ``PARAM_NAMES`` and number of skipped samples at ``x``."""
    res, ra, rd = _residuals(x, w, h, data, jacobian=grad)
    ok = res.valid
    n = int(ok.sum())
    skipped = ra.size - n
    if n == 0:
        return math.inf, np.full(4, np.nan), skipped
    wa, wd = weights
    ra, rd = ra[ok], rd[ok]
    loss = float((wa * ra @ ra + wd * rd @ rd) / n)
    if not grad:
        return loss, None, skipped
    g = (2.0 / n) * (wa * ra @ res.jac_bearing[ok] + wd * rd @ res.jac_range[ok])
    return loss, g, skipped


def loc_loss(params: CameraParams, samples, weights=(1.0, 1.0)) -> float:
    """Mean squared bearing (deg) plus range (m) error; above-horizon samples skipped."""
    data = as_sample_set(samples)
    loss, _, skipped = loss_and_grad(
        params_to_vector(params), params.image_w, params.image_h, data, weights, grad=False
    )
    if skipped:
        logger.warning("loc_loss skipped %d above-horizon samples", skipped)
    return loss


def grad_loc_loss(params: CameraParams, samples, mask=FULL_MASK, weights=(1.0, 1.0)) -> dict:
    """Analytic gradient of :func:`loc_loss` for the masked parameters.

    Keys are ``vfov_deg``, ``pitch_deg``, ``height_m`` and ``heading_deg``;
    the focal length is reached through the vfov.
    """
    data = as_sample_set(samples)
    _, g, _ = loss_and_grad(params_to_vector(params), params.image_w, params.image_h, data, weights)
    keep = _mask_vector(parse_mask(mask))
    return {name: float(g[i]) for i, name in enumerate(PARAM_NAMES) if keep[i]}


def rmse(params: CameraParams, samples) -> tuple[float, float, int]:
    """(RMSE bearing in degrees, RMSE range in meters, skipped count)."""
    data = as_sample_set(samples)
    res, ra, rd = _residuals(params_to_vector(params), params.image_w, params.image_h, data)
    ok = res.valid
    if not ok.any():
        return math.nan, math.nan, int(ra.size)
    return (
        float(np.sqrt(np.mean(ra[ok] ** 2))),
        float(np.sqrt(np.mean(rd[ok] ** 2))),
        int(ra.size - ok.sum()),
    )


def _mask_vector(mask) -> np.ndarray:
    return np.array([p in mask for p in MASK_ORDER])


def bounds_vector(cfg: OptimizerConfig, params0: CameraParams):
    """Lower/upper bounds in optimizer coordinates (vfov, pitch, height, heading)."""
    lo = np.full(4, -np.inf)
    hi = np.full(4, np.inf)
    b = cfg.bounds or {}
    if "focal_px" in b:
        f_lo, f_hi = b["focal_px"]
        lo[0] = focal_to_vfov(f_hi, params0.image_h)
        hi[0] = focal_to_vfov(f_lo, params0.image_h)
    if "pitch_deg" in b:
        lo[1], hi[1] = b["pitch_deg"]
    # pitch must stay strictly inside (0, 90)
    lo[1] = max(lo[1], 1e-6)
    hi[1] = min(hi[1], 90.0 - 1e-6)
    if "height_m" in b:
        lo[2], hi[2] = b["height_m"]
    h0 = params0.heading_deg
    if cfg.heading_halfwidth_deg is not None:
        lo[3], hi[3] = h0 - cfg.heading_halfwidth_deg, h0 + cfg.heading_halfwidth_deg
    elif "heading_deg" in b:
        blo, bhi = b["heading_deg"]
        # shift the box by whole turns so it contains the start heading
        k = math.floor((h0 - blo) / 360.0)
        lo[3], hi[3] = blo + 360.0 * k, bhi + 360.0 * k
        if h0 > hi[3]:
            # the box is written for one approach; other approaches get a box
            # of the same width centered on their own start heading
            half = (bhi - blo) / 2.0
            lo[3], hi[3] = h0 - half, h0 + half
    return lo, hi


@dataclass
class FitReport:
    params_before: CameraParams
    params_after: CameraParams
    rmse_d_before: float
    rmse_d_after: float
    rmse_a_before: float
    rmse_a_after: float
    loss_curve: np.ndarray
    converged: bool
    epochs_run: int = 0
    mask: tuple[str, ...] = FULL_MASK
    n_samples: int = 0
    skipped_before: int = 0
    skipped_after: int = 0

    @property
    def final_loss(self) -> float:
        return float(self.loss_curve[-1]) if len(self.loss_curve) else math.nan

    def to_dict(self) -> dict:
        def cam(p: CameraParams):
            d = asdict(p)
            d["vfov_deg"] = focal_to_vfov(p.focal_px, p.image_h)
            return d

        return {
            "params_before": cam(self.params_before),
            "params_after": cam(self.params_after),
            "rmse_d_before": self.rmse_d_before,
            "rmse_d_after": self.rmse_d_after,
            "rmse_a_before": self.rmse_a_before,
            "rmse_a_after": self.rmse_a_after,
            "converged": self.converged,
            "epochs_run": self.epochs_run,
            "mask": list(self.mask),
            "n_samples": self.n_samples,
            "skipped_before": self.skipped_before,
            "skipped_after": self.skipped_after,
            "final_loss": self.final_loss,
        }


def fit(params0: CameraParams, samples, cfg: OptimizerConfig = OptimizerConfig()) -> FitReport:
    """Refine the masked camera parameters with Adam inside the bounding box.

    Raises:
        ValueError: no samples, or ``params0`` outside the bounds.
        DivergenceError: the loss became non-finite.
    """
    data = as_sample_set(samples)
    if len(data) == 0:
        raise ValueError("fit needs at least one sample")
    w, h = params0.image_w, params0.image_h
    x = params_to_vector(params0)
    lo, hi = bounds_vector(cfg, params0)
    if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
        raise ValueError(f"initial parameters {x} outside bounds {lo}..{hi}")
    keep = _mask_vector(cfg.mask)
    weights = (cfg.weight_angle, cfg.weight_dist)

    rng = np.random.default_rng(cfg.seed)
    n = len(data)
    use_batch = cfg.batch is not None and cfg.batch < n

    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.lr
    m = np.zeros(4)
    s = np.zeros(4)
    curve = np.empty(cfg.epochs + 1)
    epochs_run = 0
    for epoch in range(cfg.epochs):
        batch = data.subset(rng.choice(n, cfg.batch, replace=False)) if use_batch else data
        loss, g, _ = loss_and_grad(x, w, h, batch, weights)
        if not math.isfinite(loss) or not np.all(np.isfinite(g)):
            raise DivergenceError(f"loss became non-finite at epoch {epoch}")
        curve[epoch] = loss
        g = np.where(keep, g, 0.0)
        m = b1 * m + (1 - b1) * g
        s = b2 * s + (1 - b2) * g * g
        t = epoch + 1
        step = lr * (m / (1 - b1**t)) / (np.sqrt(s / (1 - b2**t)) + eps)
        x = np.clip(x - step, lo, hi)
        epochs_run = t
        if cfg.early_stop and t > cfg.converge_window:
            prev = curve[t - 1 - cfg.converge_window]
            if (prev - loss) < cfg.early_stop_rtol * max(prev, 1e-300):
                break

    final_loss, _, _ = loss_and_grad(x, w, h, data, weights, grad=False)
    if not math.isfinite(final_loss):
        raise DivergenceError("final loss is non-finite")
    curve[epochs_run] = final_loss
    curve = curve[: epochs_run + 1]

    win = min(cfg.converge_window, len(curve) - 1)
    if win > 0:
        prev = curve[-1 - win]
        converged = (prev - curve[-1]) <= cfg.converge_rtol * max(prev, 1e-300) or (
            curve[-1] <= cfg.converge_atol
        )
    else:
        converged = False

    params_after = vector_to_params(x, params0)
    ra0, rd0, sk0 = rmse(params0, data)
    ra1, rd1, sk1 = rmse(params_after, data)
    return FitReport(
        params_before=params0,
        params_after=params_after,
        rmse_d_before=rd0,
        rmse_d_after=rd1,
        rmse_a_before=ra0,
        rmse_a_after=ra1,
        loss_curve=curve,
        converged=bool(converged),
        epochs_run=epochs_run,
        mask=cfg.mask,
        n_samples=n,
        skipped_before=sk0,
        skipped_after=sk1,
    )


@dataclass
class MultiFitResult:
    reports: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def params(self) -> dict:
        """The per-camera parameter collection, keyed by camera id."""
        return {k: r.params_after for k, r in self.reports.items()}


def _fit_one(item):
    cam_id, params0, samples, cfg = item
    try:
        return cam_id, fit(params0, samples, cfg), None
    except Exception as exc:  # isolated per camera
        return cam_id, None, f"{type(exc).__name__}: {exc}"


def fit_all_cameras(inputs: Mapping, workers: int = 1) -> MultiFitResult:
    """Fit every camera independently; failures are recorded, not raised.

    ``inputs`` maps camera id to ``(params0, samples, cfg)``.
    """
    items = [(k, *inputs[k]) for k in sorted(inputs)]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_one, items))
    else:
        results = [_fit_one(it) for it in items]
    out = MultiFitResult()
    for cam_id, report, err in results:
        if err is None:
            out.reports[cam_id] = report
        else:
            logger.warning("camera %s failed: %s", cam_id, err)
            out.failures[cam_id] = err
    return out
