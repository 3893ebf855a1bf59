"""Windowed least-squares biquadratic fits.

Around pixel ``(row, col)`` the depth is modelled as

    g(u, v) = a + b u + c v + d u v + e u^2 + f v^2

with ``u`` the column offset and ``v`` the row offset, each multiplied by the
pixel pitch. The partial derivatives at the centre follow directly:
``f_x = b, f_y = c, f_xy = d, f_xx = 2e, f_yy = 2f``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._pykernels import solve_normal
from .errors import BadParams, CenterInvalid, InsufficientSupport
from .rangeio import RangeImage

__all__ = ["QuadFit", "FitWindow", "fit_biquadratic", "derivatives", "fit_field", "MIN_SUPPORT"]

MIN_SUPPORT = 6


@dataclass(frozen=True)
class FitWindow:
    half_width: int = 2

    def __post_init__(self):
        if int(self.half_width) != self.half_width or self.half_width < 1:
            raise BadParams(f"half_width must be an integer >= 1, got {self.half_width}")

    @property
    def size(self) -> int:
        return 2 * self.half_width + 1


@dataclass(frozen=True)
class QuadFit:
    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    support: int
    rank_deficient: bool = False

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e, self.f])

    def __call__(self, u, v):
        return self.a + self.b * u + self.c * v + self.d * u * v + self.e * u * u + self.f * v * v


def _window(img, row, col, hw, pitch):
    r0, r1 = max(row - hw, 0), min(row + hw + 1, img.height)
    c0, c1 = max(col - hw, 0), min(col + hw + 1, img.width)
    vv, uu = np.mgrid[r0 - row:r1 - row, c0 - col:c1 - col]
    m = img.valid[r0:r1, c0:c1]
    return uu[m] * pitch, vv[m] * pitch, img.depth[r0:r1, c0:c1][m]


def fit_biquadratic(img: RangeImage, row: int, col: int, w: FitWindow = FitWindow(),
                    pitch: float = 1.0) -> QuadFit:
    """Fit one pixel's window.

    Rank-deficient windows (for example all valid pixels on one line) get the
    minimum-norm solution with ``rank_deficient`` set.
    """
    if not (0 <= row < img.height and 0 <= col < img.width) or not img.valid[row, col]:
        raise CenterInvalid(f"pixel ({row}, {col}) is not a valid pixel")
    u, v, z = _window(img, row, col, w.half_width, pitch)
    if z.size < MIN_SUPPORT:
        raise InsufficientSupport(f"{z.size} valid pixels in window, need {MIN_SUPPORT}")
    A = np.column_stack([np.ones_like(u), u, v, u * v, u * u, v * v])
    x, full = solve_normal(A.T @ A, A.T @ z, kernels.RCOND)
    return QuadFit(*map(float, x), support=int(z.size), rank_deficient=not bool(full))


def derivatives(q: QuadFit):
    """``(f_x, f_y, f_xy, f_xx, f_yy)`` at the fit centre."""
    return q.b, q.c, q.d, 2.0 * q.e, 2.0 * q.f


def fit_field(img: RangeImage, w: FitWindow = FitWindow(), pitch: float = 1.0):
    """Fit every valid pixel at once.

    Returns ``(coef, support, ok)``: coefficients ``(h, w, 6)``, valid-pixel
    count per window, and a mask of pixels whose fit is usable (valid centre,
    enough support, full rank).
    """
    if not pitch > 0:
        raise BadParams(f"pixel pitch must be positive, got {pitch}")
    coef, support, full = kernels.fit_field(img.depth, img.valid, w.half_width, pitch)
    ok = img.valid & (support >= MIN_SUPPORT) & full
    return coef, support, ok
