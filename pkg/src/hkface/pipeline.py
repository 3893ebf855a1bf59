"""End-to-end detection pipeline and its flat ``key=value`` configuration.

Stages: crop -> otsu -> smooth -> curvature -> classify -> detect.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .curvature import ClassifyParams, CurvatureField, classify, compute_curvature_field
from .errors import BadParams, DegenerateHistogram, HKFaceError
from .landmarks import (
    DetectionParams,
    IntensityMap,
    LandmarkResult,
    detect_eye_corners,
    detect_nose_tip,
    detect_nose_tip_max_intensity,
    intensity_map,
)
from .preprocess import SmoothingParams, apply_threshold, gaussian_smooth, otsu_threshold
from .quadfit import FitWindow
from .rangeio import CropRect, RangeImage, central_crop_rect, crop

log = logging.getLogger(__name__)

# ``crop`` value that selects a centred 70x70 window, resolved per image
CENTRAL = "central"

__all__ = ["CENTRAL", "PipelineConfig", "PipelineResult", "StageError", "run_pipeline", "CONFIG_KEYS"]


class StageError(HKFaceError):
    """A stage failure: wraps the cause and names the stage."""

    def __init__(self, stage: str, cause: HKFaceError, partial=None):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        self.code = getattr(cause, "code", type(cause).__name__)
        self.partial = partial

    def to_dict(self) -> dict:
        return {"stage": self.stage, "code": self.code, "message": str(self.cause)}


@dataclass(frozen=True)
class PipelineConfig:
    crop: CropRect | str | None = None  # a rect, CENTRAL, or None for no crop
    smoothing: SmoothingParams = SmoothingParams()
    fit: FitWindow = FitWindow()
    pixel_pitch: float = 1.0
    classify: ClassifyParams = ClassifyParams()
    detect: DetectionParams = DetectionParams()
    otsu: bool = True
    otsu_bins: int = 256
    smooth: bool = True

    def __post_init__(self):
        if isinstance(self.crop, str) and self.crop != CENTRAL:
            raise BadParams(f"crop must be a rectangle, {CENTRAL!r} or None, got {self.crop!r}")
        if not self.pixel_pitch > 0:
            raise BadParams(f"pixel_pitch must be positive, got {self.pixel_pitch}")
        if int(self.otsu_bins) != self.otsu_bins or self.otsu_bins < 2:
            raise BadParams(f"otsu_bins must be an integer >= 2, got {self.otsu_bins}")

    # flat form -------------------------------------------------------------

    def to_flat(self) -> dict:
        return {
            "crop": str(self.crop) if self.crop else "none",
            "sigma": repr(self.smoothing.sigma),
            "radius": str(self.smoothing.radius),
            "smooth": _fmt_bool(self.smooth),
            "fit_window": str(self.fit.half_width),
            "pixel_pitch": repr(self.pixel_pitch),
            "eps_h": repr(self.classify.eps_h),
            "eps_k": repr(self.classify.eps_k),
            "k_threshold": repr(self.detect.k_threshold),
            "top_n_nose": str(self.detect.top_n_nose),
            "min_separation": repr(float(self.detect.min_separation)),
            "otsu": _fmt_bool(self.otsu),
            "otsu_bins": str(self.otsu_bins),
        }

    def to_dict(self) -> dict:
        """Typed view of the flat form, for JSON echo."""
        out = {}
        for k, v in self.to_flat().items():
            out[k] = _PARSERS[k](v)
        if isinstance(self.crop, CropRect):
            out["crop"] = [self.crop.row0, self.crop.col0, self.crop.rows, self.crop.cols]
        return out

    def dumps(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_flat().items())

    @classmethod
    def from_flat(cls, kv: dict, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        """Overlay ``kv`` (string values) onto ``base`` (defaults when None)."""
        cfg = base or cls()
        vals = {}
        for k, raw in kv.items():
            key = k.strip().replace("-", "_")
            if key not in _PARSERS:
                raise BadParams(f"unknown config key {k!r}")
            try:
                vals[key] = _PARSERS[key](str(raw).strip())
            except (TypeError, ValueError) as exc:
                if isinstance(exc, BadParams):
                    raise
                raise BadParams(f"bad value for {key}: {raw!r}") from None
        sm, fw, cp, dp = cfg.smoothing, cfg.fit, cfg.classify, cfg.detect
        return replace(
            cfg,
            crop=vals["crop"] if "crop" in vals else cfg.crop,
            smoothing=SmoothingParams(vals.get("sigma", sm.sigma), vals.get("radius", sm.radius)),
            smooth=vals.get("smooth", cfg.smooth),
            fit=FitWindow(vals.get("fit_window", fw.half_width)),
            pixel_pitch=vals.get("pixel_pitch", cfg.pixel_pitch),
            classify=ClassifyParams(vals.get("eps_h", cp.eps_h), vals.get("eps_k", cp.eps_k)),
            detect=DetectionParams(
                vals.get("k_threshold", dp.k_threshold),
                vals.get("top_n_nose", dp.top_n_nose),
                vals.get("min_separation", dp.min_separation),
            ),
            otsu=vals.get("otsu", cfg.otsu),
            otsu_bins=vals.get("otsu_bins", cfg.otsu_bins),
        )

    @classmethod
    def loads(cls, text: str, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        kv = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise BadParams(f"config line {n}: expected key=value")
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
        return cls.from_flat(kv, base)

    @classmethod
    def load(cls, path, base=None) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read(), base)


def _fmt_bool(b):
    return "true" if b else "false"


def _parse_bool(s):
    s = s.lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _parse_crop(s):
    if s.lower() in ("none", ""):
        return None
    if s.lower() == CENTRAL:
        return CENTRAL
    return CropRect.parse(s)


_PARSERS = {
    "crop": _parse_crop,
    "sigma": float,
    "radius": int,
    "smooth": _parse_bool,
    "fit_window": int,
    "pixel_pitch": float,
    "eps_h": float,
    "eps_k": float,
    "k_threshold": float,
    "top_n_nose": int,
    "min_separation": float,
    "otsu": _parse_bool,
    "otsu_bins": int,
}
CONFIG_KEYS = tuple(_PARSERS)


@dataclass
class PipelineResult:
    image: RangeImage  # after crop/threshold/smoothing, in cropped coordinates
    field: CurvatureField
    classes: np.ndarray
    intensity: IntensityMap
    landmarks: LandmarkResult
    offset: tuple = (0, 0)  # crop origin; add to landmark coordinates for source pixels
    threshold: float | None = None
    notes: list = field(default_factory=list)
    baseline_nose: tuple | None = None  # (row, col, intensity), source frame


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except HKFaceError as exc:
        raise StageError(name, exc) from exc


def preprocess_image(img: RangeImage, cfg: PipelineConfig):
    """Crop, threshold and smooth. Returns ``(image, offset, threshold, notes)``."""
    notes = []
    offset = (0, 0)
    rect = cfg.crop
    if rect == CENTRAL:
        rect = central_crop_rect(img.height, img.width)
    if rect is not None:
        img = _stage("crop", crop, img, rect)
        offset = (rect.row0, rect.col0)
    t = None
    if cfg.otsu:
        try:
            t = otsu_threshold(img, cfg.otsu_bins)
        except DegenerateHistogram as exc:
            # nothing to separate: keep every pixel
            notes.append(f"otsu skipped: {exc}")
            log.info("otsu skipped: %s", exc)
        else:
            img = apply_threshold(img, t)
    if cfg.smooth:
        img = _stage("smooth", gaussian_smooth, img, cfg.smoothing)
    return img, offset, t, notes


def run_pipeline(img: RangeImage, cfg: PipelineConfig = PipelineConfig(),
                 baseline: bool = False) -> PipelineResult:
    """Run every stage and detect both landmark kinds.

    Landmark coordinates in the result are in the *source* image frame (crop
    offset added back). A failed detector raises :class:`StageError` with
    ``stage='detect'``; ``partial`` then carries whatever was found.
    """
    pre, offset, t, notes = preprocess_image(img, cfg)
    fld = _stage("curvature", compute_curvature_field, pre, cfg.fit, cfg.pixel_pitch)
    classes = classify(fld, cfg.classify)
    ints = _stage("intensity", intensity_map, pre)

    result = LandmarkResult(params=cfg.to_dict())
    failure = None
    try:
        nose = detect_nose_tip(fld, classes, ints, cfg.detect)
        result.nose = replace(nose, row=nose.row + offset[0], col=nose.col + offset[1])
    except HKFaceError as exc:
        failure = exc
    try:
        eyes = detect_eye_corners(fld, classes, cfg.detect)
        result.eyes = tuple(replace(e, row=e.row + offset[0], col=e.col + offset[1]) for e in eyes)
    except HKFaceError as exc:
        failure = failure or exc
    out = PipelineResult(pre, fld, classes, ints, result, offset, t, notes)
    if baseline:
        r, c, i = detect_nose_tip_max_intensity(ints)
        out.baseline_nose = (r + offset[0], c + offset[1], i)
    if failure is not None:
        raise StageError("detect", failure, partial=out)
    return out
