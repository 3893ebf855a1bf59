"""Mean/Gaussian curvature fields, HK classification and region segmentation.

For a graph surface ``z = f(x, y)``::

    H = ((1 + f_y^2) f_xx - 2 f_x f_y f_xy + (1 + f_x^2) f_yy) / (2 (1 + f_x^2 + f_y^2)^(3/2))
    K = (f_xx f_yy - f_xy^2) / (1 + f_x^2 + f_y^2)^2

With depth increasing toward the viewer a bump facing the camera has H < 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .errors import BadParams
from .quadfit import FitWindow, fit_field
from .rangeio import RangeImage

__all__ = [
    "HKClass",
    "ClassifyParams",
    "CurvatureField",
    "Region",
    "curvature_from_derivatives",
    "compute_curvature_field",
    "classify",
    "class_counts",
    "segment_regions",
    "PALETTE",
    "class_map_image",
    "save_class_map",
]


class HKClass(IntEnum):
    UNCLASSIFIED = 0
    ELLIPTICAL_CONVEX = 1
    CYLINDRICAL_CONVEX = 2
    HYPERBOLIC_CONVEX = 3
    HYPERBOLIC_SYMMETRIC = 4
    PLANAR = 5
    IMPOSSIBLE = 6
    ELLIPTICAL_CONCAVE = 7
    CYLINDRICAL_CONCAVE = 8
    HYPERBOLIC_CONCAVE = 9


# rows: H<0, H=0, H>0; columns: K>0, K=0, K<0
HK_TABLE = np.array(
    [
        [HKClass.ELLIPTICAL_CONVEX, HKClass.CYLINDRICAL_CONVEX, HKClass.HYPERBOLIC_CONVEX],
        [HKClass.HYPERBOLIC_SYMMETRIC, HKClass.PLANAR, HKClass.IMPOSSIBLE],
        [HKClass.ELLIPTICAL_CONCAVE, HKClass.CYLINDRICAL_CONCAVE, HKClass.HYPERBOLIC_CONCAVE],
    ],
    dtype=np.uint8,
)

# 8-bit grey levels for class-map export: hyperbolic darkest, concave brightest
PALETTE = {
    HKClass.UNCLASSIFIED: 0,
    HKClass.IMPOSSIBLE: 16,
    HKClass.HYPERBOLIC_CONVEX: 32,
    HKClass.HYPERBOLIC_SYMMETRIC: 32,
    HKClass.HYPERBOLIC_CONCAVE: 32,
    HKClass.PLANAR: 64,
    HKClass.CYLINDRICAL_CONVEX: 96,
    HKClass.ELLIPTICAL_CONVEX: 128,
    HKClass.CYLINDRICAL_CONCAVE: 192,
    HKClass.ELLIPTICAL_CONCAVE: 224,
}


@dataclass(frozen=True)
class ClassifyParams:
    eps_h: float = 1e-6
    eps_k: float = 1e-6

    def __post_init__(self):
        if not (self.eps_h >= 0 and self.eps_k >= 0):
            raise BadParams("zero-band widths must be non-negative")


@dataclass(frozen=True, eq=False)
class CurvatureField:
    H: np.ndarray
    K: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        for name in ("H", "K", "valid"):
            a = np.array(getattr(self, name), dtype=bool if name == "valid" else np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not (self.H.shape == self.K.shape == self.valid.shape):
            raise BadParams("H, K and mask shapes differ")

    @property
    def height(self) -> int:
        return self.H.shape[0]

    @property
    def width(self) -> int:
        return self.H.shape[1]

    @property
    def shape(self):
        return self.H.shape


@dataclass(frozen=True)
class Region:
    hk_class: HKClass
    pixels: list
    mean_H: float
    mean_K: float

    @property
    def size(self) -> int:
        return len(self.pixels)


def curvature_from_derivatives(fx, fy, fxy, fxx, fyy):
    """Mean and Gaussian curvature from first and second partials (scalars or arrays)."""
    g = 1.0 + fx * fx + fy * fy
    H = ((1.0 + fy * fy) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx * fx) * fyy) / (2.0 * g ** 1.5)
    K = (fxx * fyy - fxy * fxy) / (g * g)
    return H, K


def compute_curvature_field(img: RangeImage, w: FitWindow = FitWindow(),
                            pitch: float = 1.0) -> CurvatureField:
    """Per-pixel H and K from windowed biquadratic fits.

    Pixels without a usable fit (hole, fewer than six window samples, or a
    rank-deficient window) are marked invalid.
    """
    coef, _, ok = fit_field(img, w, pitch)
    b, c, d, e, f = (coef[..., i] for i in range(1, 6))
    H, K = curvature_from_derivatives(b, c, d, 2.0 * e, 2.0 * f)
    H = np.where(ok, H, 0.0)
    K = np.where(ok, K, 0.0)
    return CurvatureField(H, K, ok)


def classify(fld: CurvatureField, p: ClassifyParams = ClassifyParams()) -> np.ndarray:
    """HK class label per pixel (``uint8`` array of :class:`HKClass` values)."""
    h_row = np.where(fld.H < -p.eps_h, 0, np.where(fld.H > p.eps_h, 2, 1))
    k_col = np.where(fld.K > p.eps_k, 0, np.where(fld.K < -p.eps_k, 2, 1))
    labels = HK_TABLE[h_row, k_col]
    labels[~fld.valid] = HKClass.UNCLASSIFIED
    return labels


def class_counts(labels: np.ndarray) -> dict:
    """Pixel count per class, including the diagnostic ``IMPOSSIBLE`` cell."""
    counts = np.bincount(labels.ravel(), minlength=len(HKClass))
    return {cls: int(counts[cls]) for cls in HKClass}


_FOUR = ndimage.generate_binary_structure(2, 1)


def segment_regions(labels: np.ndarray, fld: CurvatureField | None = None) -> list[Region]:
    """4-connected components of equal class, largest first.

    Ties in size are ordered by each region's first pixel in row-major order.
    ``mean_H``/``mean_K`` are NaN when no field is given.
    """
    regions = []
    for cls in HKClass:
        if cls is HKClass.UNCLASSIFIED:
            continue
        comp, n = ndimage.label(labels == cls, structure=_FOUR)
        if n == 0:
            continue
        flat = comp.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(1, n + 2))
        for k in range(n):
            idx = order[bounds[k]:bounds[k + 1]]
            rows, cols = np.divmod(idx, labels.shape[1])
            if fld is not None:
                mh = float(fld.H.ravel()[idx].mean())
                mk = float(fld.K.ravel()[idx].mean())
            else:
                mh = mk = float("nan")
            regions.append(Region(cls, list(zip(rows.tolist(), cols.tolist())), mh, mk))
    regions.sort(key=lambda r: (-r.size, r.pixels[0]))
    return regions


def class_map_image(labels: np.ndarray) -> np.ndarray:
    lut = np.zeros(256, dtype=np.uint8)
    for cls, grey in PALETTE.items():
        lut[cls] = grey
    return lut[labels]


def save_class_map(labels: np.ndarray, path) -> None:
    """Write the palette-mapped class map as an 8-bit binary PGM."""
    img = class_map_image(labels)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
