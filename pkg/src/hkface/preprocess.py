"""Background removal by Otsu thresholding and masked Gaussian smoothing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BadParams, DegenerateHistogram
from .rangeio import RangeImage

__all__ = [
    "SmoothingParams",
    "gaussian_kernel",
    "depth_histogram",
    "otsu_bin",
    "otsu_threshold",
    "apply_threshold",
    "gaussian_smooth",
]


@dataclass(frozen=True)
class SmoothingParams:
    sigma: float = 1.0
    radius: int = 2

    def __post_init__(self):
        if not self.sigma > 0:
            raise BadParams(f"sigma must be positive, got {self.sigma}")
        if int(self.radius) != self.radius or self.radius < 1:
            raise BadParams(f"radius must be an integer >= 1, got {self.radius}")


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    """Sampled 1-D Gaussian on ``[-radius, radius]``, normalised to sum 1."""
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def depth_histogram(img: RangeImage, bins: int = 256):
    """Histogram of valid depths over ``[min, max]``.

    Returns ``(counts, edges)`` with ``len(edges) == bins + 1``. A depth ``z``
    falls in bin ``k`` iff ``edges[k] <= z < edges[k + 1]`` (the maximum goes
    in the last bin), so ``z < edges[k]`` is exactly "bin index below k".
    """
    if bins < 2:
        raise BadParams(f"bins must be >= 2, got {bins}")
    z = img.depth[img.valid]
    if z.size < 2:
        raise DegenerateHistogram("fewer than two valid pixels")
    lo, hi = float(z.min()), float(z.max())
    if lo == hi:
        raise DegenerateHistogram(f"all valid depths equal {lo}")
    edges = lo + (hi - lo) * (np.arange(bins + 1) / bins)
    edges[-1] = hi
    idx = np.searchsorted(edges, z, side="right") - 1
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return counts, edges


def otsu_bin(counts) -> int:
    """Index ``k`` in ``1..len(counts)-1`` maximising between-class variance.

    Class 0 is bins ``< k``. Scores are compared exactly in integer
    arithmetic (bin index as the class value), so ties go to the smallest k.
    With ``n0, s0`` the count and index-sum below k and ``N, S`` the totals,
    the between-class variance is proportional to
    ``(N s0 - n0 S)^2 / (n0 (N - n0))``.
    """
    counts = [int(c) for c in counts]
    total = sum(counts)
    s_total = sum(i * c for i, c in enumerate(counts))
    best_k, best_num, best_den = None, 0, 1
    n0 = s0 = 0
    for k in range(1, len(counts)):
        n0 += counts[k - 1]
        s0 += (k - 1) * counts[k - 1]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (total * s0 - n0 * s_total) ** 2
        den = n0 * n1
        if best_k is None or num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    if best_k is None:
        raise DegenerateHistogram("histogram has a single occupied bin")
    return best_k


def otsu_threshold(img: RangeImage, bins: int = 256) -> float:
    """Depth threshold separating far background from the foreground.

    Raises :class:`DegenerateHistogram` when the valid depths are all equal.
    """
    counts, edges = depth_histogram(img, bins)
    return float(edges[otsu_bin(counts)])


def apply_threshold(img: RangeImage, t: float) -> RangeImage:
    """Invalidate every pixel with depth ``< t``."""
    return img.with_valid(img.depth >= t)


def gaussian_smooth(img: RangeImage, p: SmoothingParams = SmoothingParams()) -> RangeImage:
    """Gaussian smoothing over valid pixels only.

    Weights are renormalised over the valid part of each kernel footprint, so
    holes and borders contribute nothing; the validity mask is unchanged.
    """
    if img.n_valid == 0:
        return img
    k = gaussian_kernel(p.sigma, int(p.radius))
    out = kernels.smooth_masked(img.depth, img.valid, k)
    zv = img.depth[img.valid]
    # a convex combination cannot leave the input range; clip rounding excursions
    np.clip(out, zv.min(), zv.max(), out=out)
    return RangeImage(out, img.valid)
