"""Nose-tip and eye-corner detection from HK curvature.

Eye corners are the strongest elliptical-concave points (H > 0, K above a
threshold); the nose tip is the brightest of the strongest elliptical-convex
points (H < 0, K above the threshold), brightness being depth rescaled to
0..255. The max-intensity baseline simply takes the closest valid point.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .curvature import CurvatureField, HKClass
from .errors import BadParams, NoCandidates, NoValidPixels, SingleCandidate
from .rangeio import RangeImage

__all__ = [
    "DetectionParams",
    "IntensityMap",
    "NosePoint",
    "EyePoint",
    "LandmarkResult",
    "intensity_map",
    "eye_candidates",
    "nose_candidates",
    "detect_eye_corners",
    "detect_nose_tip",
    "detect_nose_tip_max_intensity",
    "CSV_COLUMNS",
]


@dataclass(frozen=True)
class DetectionParams:
    k_threshold: float = 1e-4
    top_n_nose: int = 5
    min_separation: float = 8.0

    def __post_init__(self):
        if not self.k_threshold > 0:
            raise BadParams(f"k_threshold must be positive, got {self.k_threshold}")
        if int(self.top_n_nose) != self.top_n_nose or self.top_n_nose < 1:
            raise BadParams(f"top_n_nose must be an integer >= 1, got {self.top_n_nose}")
        if not self.min_separation >= 0:
            raise BadParams(f"min_separation must be >= 0, got {self.min_separation}")


@dataclass(frozen=True, eq=False)
class IntensityMap:
    values: np.ndarray  # int16, 0..255 on valid pixels
    valid: np.ndarray

    def __getitem__(self, rc):
        return int(self.values[rc])


@dataclass(frozen=True)
class NosePoint:
    row: int
    col: int
    k: float
    intensity: int


@dataclass(frozen=True)
class EyePoint:
    row: int
    col: int
    k: float


@dataclass
class LandmarkResult:
    nose: NosePoint | None = None
    eyes: tuple[EyePoint, EyePoint] | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "nose": asdict(self.nose) if self.nose else None,
            "eyes": [asdict(e) for e in self.eyes] if self.eyes else None,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        """One line, columns as in :data:`CSV_COLUMNS`; missing values empty."""
        vals = []
        n = self.nose
        vals += [n.row, n.col, repr(n.k), n.intensity] if n else [""] * 4
        for i in range(2):
            e = self.eyes[i] if self.eyes else None
            vals += [e.row, e.col, repr(e.k)] if e else [""] * 3
        return ",".join(str(v) for v in vals)


CSV_COLUMNS = (
    "nose_row", "nose_col", "nose_k", "nose_intensity",
    "eye1_row", "eye1_col", "eye1_k", "eye2_row", "eye2_col", "eye2_k",
)


def intensity_map(img: RangeImage) -> IntensityMap:
    """Depth rescaled to 0..255 over the valid pixels (nearest = 255)."""
    if img.n_valid == 0:
        raise NoValidPixels("image has no valid pixels")
    z = img.depth[img.valid]
    lo, hi = z.min(), z.max()
    vals = np.zeros(img.shape, dtype=np.int16)
    if hi == lo:
        vals[img.valid] = 255
    else:
        vals[img.valid] = np.rint(255.0 * (z - lo) / (hi - lo)).astype(np.int16)
    return IntensityMap(vals, img.valid.copy())


def _ranked(mask: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Flat indices of ``mask`` pixels by K descending, ties row-major."""
    idx = np.flatnonzero(mask)
    order = np.lexsort((idx, -K.ravel()[idx]))
    return idx[order]


def eye_candidates(fld: CurvatureField, classes: np.ndarray, p: DetectionParams) -> np.ndarray:
    mask = fld.valid & (fld.H > 0) & (fld.K > p.k_threshold) & (classes == HKClass.ELLIPTICAL_CONCAVE)
    return _ranked(mask, fld.K)


def nose_candidates(fld: CurvatureField, classes: np.ndarray, p: DetectionParams) -> np.ndarray:
    mask = fld.valid & (fld.H < 0) & (fld.K > p.k_threshold) & (classes == HKClass.ELLIPTICAL_CONVEX)
    return _ranked(mask, fld.K)


def detect_eye_corners(fld: CurvatureField, classes: np.ndarray,
                       p: DetectionParams = DetectionParams()) -> tuple[EyePoint, EyePoint]:
    """The two strongest concave points at least ``min_separation`` apart.

    Returned in K-descending order.
    """
    cand = eye_candidates(fld, classes, p)
    if cand.size == 0:
        raise NoCandidates("no elliptical-concave pixel passes the K threshold")
    w = fld.width
    r0, c0 = divmod(int(cand[0]), w)
    rows, cols = np.divmod(cand[1:], w)
    far = np.hypot(rows - r0, cols - c0) >= p.min_separation
    if not far.any():
        raise SingleCandidate(
            f"no second concave candidate at least {p.min_separation} px from ({r0}, {c0})"
        )
    j = int(np.argmax(far))
    r1, c1 = int(rows[j]), int(cols[j])
    return (
        EyePoint(r0, c0, float(fld.K[r0, c0])),
        EyePoint(r1, c1, float(fld.K[r1, c1])),
    )


def detect_nose_tip(fld: CurvatureField, classes: np.ndarray, ints: IntensityMap,
                    p: DetectionParams = DetectionParams()) -> NosePoint:
    """Brightest pixel among the ``top_n_nose`` strongest convex candidates.

    Intensity ties go to the higher K (the earlier candidate).
    """
    cand = nose_candidates(fld, classes, p)[: p.top_n_nose]
    if cand.size == 0:
        raise NoCandidates("no elliptical-convex pixel passes the K threshold")
    flat_ints = ints.values.ravel()[cand]
    best = int(cand[int(np.argmax(flat_ints))])  # argmax keeps the first (highest K) on ties
    r, c = divmod(best, fld.width)
    return NosePoint(r, c, float(fld.K[r, c]), int(ints.values[r, c]))


def detect_nose_tip_max_intensity(ints: IntensityMap) -> tuple[int, int, int]:
    """Baseline: the global brightest valid pixel, ties row-major."""
    if not ints.valid.any():
        raise NoValidPixels("no valid pixels")
    vals = np.where(ints.valid, ints.values, -1)
    r, c = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return int(r), int(c), int(ints.values[r, c])
