"""Facial landmark detection on range images from mean (H) and Gaussian (K) curvature."""
from .curvature import (
    ClassifyParams,
    CurvatureField,
    HKClass,
    classify,
    compute_curvature_field,
    segment_regions,
)
from .errors import HKFaceError
from .kernels import BACKEND
from .landmarks import DetectionParams, LandmarkResult
from .pipeline import PipelineConfig, run_pipeline
from .preprocess import SmoothingParams, gaussian_smooth, otsu_threshold
from .quadfit import FitWindow, fit_biquadratic
from .rangeio import CropRect, RangeImage, load_range_image, save_range_image

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClassifyParams",
    "CropRect",
    "CurvatureField",
    "DetectionParams",
    "FitWindow",
    "HKClass",
    "HKFaceError",
    "LandmarkResult",
    "PipelineConfig",
    "RangeImage",
    "SmoothingParams",
    "classify",
    "compute_curvature_field",
    "fit_biquadratic",
    "gaussian_smooth",
    "load_range_image",
    "otsu_threshold",
    "run_pipeline",
    "save_range_image",
    "segment_regions",
]
