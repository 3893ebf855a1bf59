"""Analytic test surfaces, a parametric face phantom, and rigid pose changes.

Pose changes lift the valid pixels to 3-D points ``(x=col, y=row, z=depth)``,
rotate them about a pivot, and re-rasterize orthographically. The lifted
pixels are meshed (two triangles per 2x2 block of valid pixels) and the mesh
is z-buffered onto pixel centres with barycentric depth interpolation, the
closest surface winning. Triangles spanning a depth discontinuity are not
meshed; cells that no triangle covers stay invalid.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels
from .errors import BadParams
from .rangeio import RangeImage

__all__ = [
    "SURFACE_KINDS",
    "make_surface",
    "Axis",
    "PoseSpec",
    "PhantomSpec",
    "PhantomTruth",
    "make_phantom",
    "random_phantom_spec",
    "rotate_and_rasterize",
    "rotate_phantom",
    "grid_pivot",
    "mesh_triangles",
]

SURFACE_KINDS = ("plane", "hemisphere", "cylinder", "saddle", "paraboloid")


def _centered(n):
    c = (n - 1) / 2.0
    v, u = np.mgrid[0:n, 0:n].astype(np.float64)
    return u - c, v - c


def make_surface(kind: str, n: int = 101, radius: float = 50.0, depth: float = 100.0) -> RangeImage:
    """Closed-form test surface on an ``n x n`` unit-pitch grid.

    ``u``/``v`` are column/row offsets from the grid centre.

    plane       z = depth
    hemisphere  z = sqrt(R^2 - u^2 - v^2), invalid where u^2 + v^2 >= R^2
    cylinder    z = sqrt(R^2 - u^2), axis along the rows, invalid where |u| >= R
    saddle      z = (u^2 - v^2) / 2
    paraboloid  z = -(u^2 + v^2) / (2R), apex curvature 1/R
    """
    if n < 16:
        raise BadParams(f"grid size must be >= 16, got {n}")
    if not radius > 0:
        raise BadParams(f"radius must be positive, got {radius}")
    u, v = _centered(n)
    if kind == "plane":
        z = np.full((n, n), float(depth))
        valid = np.ones((n, n), dtype=bool)
    elif kind == "hemisphere":
        s = radius ** 2 - u ** 2 - v ** 2
        valid = s > 0
        z = np.sqrt(np.where(valid, s, 0.0))
    elif kind == "cylinder":
        s = radius ** 2 - u ** 2
        valid = s > 0
        z = np.sqrt(np.where(valid, s, 0.0))
    elif kind == "saddle":
        z = (u ** 2 - v ** 2) / 2.0
        valid = np.ones((n, n), dtype=bool)
    elif kind == "paraboloid":
        z = -(u ** 2 + v ** 2) / (2.0 * radius)
        valid = np.ones((n, n), dtype=bool)
    else:
        raise BadParams(f"unknown surface kind {kind!r}; expected one of {SURFACE_KINDS}")
    return RangeImage(z, valid)


# -- poses -------------------------------------------------------------------

class Axis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


MAX_ANGLE = 60.0


def _cos_sin(deg):
    # exact values on the quarter turns keep lattice rotations lossless
    q, rem = divmod(deg, 90.0)
    if rem == 0.0:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(q) % 4]
    t = math.radians(deg)
    return math.cos(t), math.sin(t)


@dataclass(frozen=True)
class PoseSpec:
    axis: Axis
    angle: float  # degrees

    def __post_init__(self):
        axis = self.axis if isinstance(self.axis, Axis) else Axis(str(self.axis).upper())
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", float(self.angle))

    def check_range(self):
        # in-plane turns never change visibility, so only X/Y are limited
        if self.axis is not Axis.Z and abs(self.angle) > MAX_ANGLE:
            raise BadParams(f"|angle| must be <= {MAX_ANGLE} degrees, got {self.angle}")

    @classmethod
    def parse(cls, text: str) -> "PoseSpec":
        """``Y+30``, ``x-15``, ``Z:90`` or ``frontal``."""
        t = text.strip()
        if t.lower() in ("frontal", "identity", "0"):
            return cls(Axis.Y, 0.0)
        axis, rest = t[0], t[1:].lstrip(":=")
        try:
            return cls(Axis(axis.upper()), float(rest))
        except ValueError:
            raise BadParams(f"bad pose {text!r}; expected e.g. 'Y+30'") from None

    @property
    def label(self) -> str:
        if self.angle == 0:
            return "frontal"
        return f"{self.axis.value}{self.angle:+g}"

    def matrix(self) -> np.ndarray:
        c, s = _cos_sin(self.angle)
        if self.axis is Axis.X:
            return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)
        if self.axis is Axis.Y:
            return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)

    def apply(self, pts: np.ndarray, pivot) -> np.ndarray:
        """Rotate ``(N, 3)`` points ``(x, y, z)`` about ``pivot``.

        The coordinate along the rotation axis is passed through untouched.
        """
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        if self.angle == 0:
            return pts.copy()
        R = self.matrix()
        p = np.asarray(pivot, dtype=np.float64)
        d = pts - p
        out = pts.copy()
        keep = {"X": 0, "Y": 1, "Z": 2}[self.axis.value]
        for i in range(3):
            if i != keep:
                out[:, i] = p[i] + (R[i, 0] * d[:, 0] + R[i, 1] * d[:, 1] + R[i, 2] * d[:, 2])
        return out


def grid_pivot(img: RangeImage) -> tuple[float, float, float]:
    """Grid centre in x/y and the mean valid depth."""
    zc = float(img.depth[img.valid].mean()) if img.n_valid else 0.0
    return ((img.width - 1) / 2.0, (img.height - 1) / 2.0, zc)


def mesh_triangles(valid: np.ndarray, depth: np.ndarray, max_jump: float) -> np.ndarray:
    """Triangles over 2x2 blocks of valid pixels, as flat pixel indices.

    Full blocks give two triangles; blocks with three valid pixels give one.
    Triangles whose vertex depths differ by more than ``max_jump`` are dropped.
    """
    h, w = valid.shape
    idx = np.arange(h * w).reshape(h, w)
    tl, tr = idx[:-1, :-1], idx[:-1, 1:]
    bl, br = idx[1:, :-1], idx[1:, 1:]
    vtl, vtr = valid[:-1, :-1], valid[:-1, 1:]
    vbl, vbr = valid[1:, :-1], valid[1:, 1:]
    full = vtl & vtr & vbl & vbr
    parts = [
        np.stack([tl[full], tr[full], bl[full]], axis=1),
        np.stack([tr[full], br[full], bl[full]], axis=1),
    ]
    # three-valid blocks: the triangle that omits the missing corner
    for miss, (a, b, c) in (
        (~vtl & vtr & vbl & vbr, (tr, br, bl)),
        (vtl & ~vtr & vbl & vbr, (tl, br, bl)),
        (vtl & vtr & ~vbl & vbr, (tl, tr, br)),
        (vtl & vtr & vbl & ~vbr, (tl, tr, bl)),
    ):
        parts.append(np.stack([a[miss], b[miss], c[miss]], axis=1))
    tris = np.concatenate(parts).astype(np.int64)
    if tris.size:
        z = depth.ravel()[tris]
        tris = tris[(z.max(axis=1) - z.min(axis=1)) <= max_jump]
    return tris


def rotate_and_rasterize(img: RangeImage, pose: PoseSpec, pivot=None,
                         max_jump: float = 8.0) -> RangeImage:
    """Rigidly rotate the surface and re-rasterize it on the same grid.

    ``pivot`` defaults to :func:`grid_pivot`. Pixels that belong to no
    meshed triangle are splatted to their nearest cell.
    """
    pose.check_range()
    if pose.angle == 0 or img.n_valid == 0:
        return img
    if pivot is None:
        pivot = grid_pivot(img)
    h, w = img.shape
    rows, cols = np.mgrid[0:h, 0:w]
    pts = np.column_stack([cols.ravel(), rows.ravel(), img.depth.ravel()]).astype(np.float64)
    rot = pose.apply(pts, pivot)
    tris = mesh_triangles(img.valid, img.depth, max_jump)
    zbuf = kernels.rasterize(rot[:, 0], rot[:, 1], rot[:, 2], tris, h, w)

    used = np.zeros(h * w, dtype=bool)
    used[tris.ravel()] = True
    lone = np.flatnonzero(img.valid.ravel() & ~used)
    if lone.size:
        cc = np.rint(rot[lone, 0]).astype(np.int64)
        rr = np.rint(rot[lone, 1]).astype(np.int64)
        inb = (cc >= 0) & (cc < w) & (rr >= 0) & (rr < h)
        flat = zbuf.ravel()
        np.maximum.at(flat, rr[inb] * w + cc[inb], rot[lone[inb], 2])
        zbuf = flat.reshape(h, w)
    valid = np.isfinite(zbuf)
    return RangeImage(np.where(valid, zbuf, 0.0), valid)


# -- face phantom ------------------------------------------------------------

@dataclass(frozen=True)
class PhantomSpec:
    """Parametric face: a head dome carrying a Gaussian nose and two Gaussian pits.

    The head is the front of an ellipsoid (semi-axes ``head_a`` across,
    ``head_b`` down, ``head_c`` in depth) centred at the nose's row/column;
    outside its silhouette lies a flat backdrop ``backdrop_gap`` behind the
    head centre. ``base_depth`` is the depth of the head centre, so the nose
    tip sits at ``base_depth + head_c + nose_amp``.
    """

    size: int = 128
    base_depth: float = 400.0
    head_a: float = 58.0
    head_b: float = 62.0
    head_c: float = 40.0
    backdrop_gap: float = 30.0
    nose: tuple = (64, 64)
    nose_amp: float = 6.0
    nose_width: float = 7.0
    eyes: tuple = ((44, 44), (44, 84))
    eye_amp: float = 5.0
    eye_width: float = 3.5
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.size < 16:
            raise BadParams("phantom size must be >= 16")
        if not (self.nose_amp > 0 and self.eye_amp > 0):
            raise BadParams("nose and eye amplitudes must be positive (eyes are subtracted)")
        if not (self.nose_width > 0 and self.eye_width > 0):
            raise BadParams("widths must be positive")
        if min(self.head_a, self.head_b, self.head_c) <= 0:
            raise BadParams("head semi-axes must be positive")
        centers = [tuple(self.nose)] + [tuple(e) for e in self.eyes]
        if len(self.eyes) != 2:
            raise BadParams("need exactly two eye centres")
        widths = [self.nose_width, self.eye_width, self.eye_width]
        for i in range(3):
            r, c = centers[i]
            if not (0 <= r < self.size and 0 <= c < self.size):
                raise BadParams(f"centre {centers[i]} outside the grid")
            for j in range(i + 1, 3):
                d = math.dist(centers[i], centers[j])
                if d <= 3 * max(widths[i], widths[j]):
                    raise BadParams(f"centres {centers[i]} and {centers[j]} are too close")
            if i > 0:
                dv = ((r - self.nose[0]) / self.head_b) ** 2 + ((c - self.nose[1]) / self.head_a) ** 2
                if dv >= 0.8:
                    raise BadParams(f"eye {centers[i]} too close to the head silhouette")
        if self.noise_sigma < 0:
            raise BadParams("noise_sigma must be >= 0")


@dataclass(frozen=True)
class PhantomTruth:
    """Ground-truth landmarks as ``(row, col)`` plus their 3-D points.

    ``points`` holds ``(x, y, z)`` for nose, eye 1, eye 2; ``pivot`` is the
    head centre used for pose changes.
    """

    nose: tuple
    eyes: tuple
    points: tuple
    pivot: tuple
    pose: dict = field(default_factory=lambda: {"axis": "Y", "angle": 0.0})

    def to_dict(self) -> dict:
        return {
            "nose": list(self.nose),
            "eyes": [list(e) for e in self.eyes],
            "pose": dict(self.pose),
        }


def _phantom_surface(spec: PhantomSpec, x, y):
    nr, nc = spec.nose
    du, dv = (x - nc) / spec.head_a, (y - nr) / spec.head_b
    s = 1.0 - du * du - dv * dv
    inside = s > 0
    z = spec.base_depth + spec.head_c * np.sqrt(np.where(inside, s, 0.0))
    z = z + spec.nose_amp * np.exp(-((x - nc) ** 2 + (y - nr) ** 2) / (2 * spec.nose_width ** 2))
    for er, ec in spec.eyes:
        z = z - spec.eye_amp * np.exp(-((x - ec) ** 2 + (y - er) ** 2) / (2 * spec.eye_width ** 2))
    return np.where(inside, z, spec.base_depth - spec.backdrop_gap), inside


def make_phantom(spec: PhantomSpec = PhantomSpec(), rng: np.random.Generator | None = None):
    """Render the phantom; returns ``(RangeImage, PhantomTruth)``.

    Optional Gaussian depth noise (``noise_sigma``) needs ``rng``.
    """
    n = spec.size
    y, x = np.mgrid[0:n, 0:n].astype(np.float64)
    z, _ = _phantom_surface(spec, x, y)
    if spec.noise_sigma > 0:
        if rng is None:
            raise BadParams("noise_sigma > 0 needs a random generator")
        z = z + rng.normal(0.0, spec.noise_sigma, size=z.shape)
    img = RangeImage(z, np.ones_like(z, dtype=bool))

    pts = []
    for r, c in [spec.nose, *spec.eyes]:
        zz, _ = _phantom_surface(spec, np.float64(c), np.float64(r))
        pts.append((float(c), float(r), float(zz)))
    truth = PhantomTruth(
        nose=tuple(int(v) for v in spec.nose),
        eyes=tuple(tuple(int(v) for v in e) for e in spec.eyes),
        points=tuple(pts),
        pivot=(float(spec.nose[1]), float(spec.nose[0]), float(spec.base_depth)),
    )
    return img, truth


def random_phantom_spec(rng: np.random.Generator, base: PhantomSpec = PhantomSpec()) -> PhantomSpec:
    """Seeded variation of ``base``: jittered centres, amplitudes and widths."""
    shift = rng.integers(-3, 4, size=2)
    nose = (int(base.nose[0] + shift[0]), int(base.nose[1] + shift[1]))
    eyes = []
    for er, ec in base.eyes:
        j = rng.integers(-2, 3, size=2)
        eyes.append((int(er + shift[0] + j[0]), int(ec + shift[1] + j[1])))
    u = rng.uniform(0.85, 1.15, size=4)
    return replace(
        base,
        nose=nose,
        eyes=tuple(eyes),
        nose_amp=base.nose_amp * u[0],
        eye_amp=base.eye_amp * u[1],
        nose_width=base.nose_width * (0.9 + 0.2 * (u[2] - 0.85) / 0.3),
        eye_width=base.eye_width * (0.9 + 0.2 * (u[3] - 0.85) / 0.3),
    )


def rotate_phantom(img: RangeImage, truth: PhantomTruth, pose: PoseSpec,
                   max_jump: float = 8.0):
    """Rotate a phantom about its head centre; truth is carried along.

    Transformed truth pixels are the rounded projections of the rotated 3-D
    landmark points.
    """
    out = rotate_and_rasterize(img, pose, pivot=truth.pivot, max_jump=max_jump)
    pts = pose.apply(np.array(truth.points), truth.pivot)
    px = [(int(np.rint(p[1])), int(np.rint(p[0]))) for p in pts]
    new = PhantomTruth(
        nose=px[0],
        eyes=(px[1], px[2]),
        points=tuple(tuple(map(float, p)) for p in pts),
        pivot=truth.pivot,
        pose={"axis": pose.axis.value, "angle": pose.angle},
    )
    return out, new


def spec_to_dict(spec: PhantomSpec) -> dict:
    return asdict(spec)
