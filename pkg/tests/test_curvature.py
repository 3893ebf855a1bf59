import numpy as np
import pytest
from hypothesis import given, strategies as st

from hkface.curvature import (
    PALETTE,
    ClassifyParams,
    CurvatureField,
    HKClass,
    class_counts,
    class_map_image,
    classify,
    compute_curvature_field,
    curvature_from_derivatives,
    save_class_map,
    segment_regions,
)
from hkface.pipeline import PipelineConfig, preprocess_image
from hkface.preprocess import gaussian_smooth
from hkface.rangeio import RangeImage
from hkface.synth import PhantomSpec, make_phantom, make_surface


def field(H, K, valid=None):
    H, K = np.atleast_2d(H).astype(float), np.atleast_2d(K).astype(float)
    return CurvatureField(H, K, np.ones(H.shape, bool) if valid is None else valid)


def test_closed_forms():
    assert curvature_from_derivatives(0.0, 0.0, 0.0, 0.0, 0.0) == (0.0, 0.0)
    R = 50.0
    H, K = curvature_from_derivatives(0.0, 0.0, 0.0, -1 / R, -1 / R)
    assert H == pytest.approx(-1 / R, rel=1e-15) and K == pytest.approx(1 / R**2, rel=1e-15)
    H, K = curvature_from_derivatives(0.0, 0.0, 0.0, 1.0, -1.0)
    assert H == 0.0 and K == -1.0


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_principal_curvature_identity(fx, fy, fxy, fxx, fyy):
    # H and K are the half-trace and determinant of the shape operator:
    # compute that operator independently and compare
    H, K = curvature_from_derivatives(fx, fy, fxy, fxx, fyy)
    g = np.array([[1 + fx * fx, fx * fy], [fx * fy, 1 + fy * fy]])
    n = np.sqrt(1 + fx * fx + fy * fy)
    b = np.array([[fxx, fxy], [fxy, fyy]]) / n
    S = np.linalg.solve(g, b)
    assert H == pytest.approx(np.trace(S) / 2, abs=1e-9)
    assert K == pytest.approx(np.linalg.det(S), abs=1e-9)
    assert H * H >= K - 1e-12


def test_plane_is_flat():
    img = make_surface("plane", n=32)
    f = compute_curvature_field(img)
    inner = (slice(2, -2), slice(2, -2))
    assert np.abs(f.H[inner]).max() < 1e-9 and np.abs(f.K[inner]).max() < 1e-9
    tilted = RangeImage(img.depth + 0.3 * np.arange(32)[None, :] - 0.2 * np.arange(32)[:, None], img.valid)
    f = compute_curvature_field(tilted)
    assert np.abs(f.H[inner]).max() < 1e-9 and np.abs(f.K[inner]).max() < 1e-9


def test_hemisphere_apex():
    f = compute_curvature_field(make_surface("hemisphere", n=101, radius=50))
    assert f.K[50, 50] == pytest.approx(4e-4, rel=0.02)
    assert f.H[50, 50] == pytest.approx(-0.02, rel=0.02)


def test_cylinder_ridge():
    f = compute_curvature_field(make_surface("cylinder", n=101, radius=25))
    ridge = f.valid[:, 50] & (np.arange(101) >= 2) & (np.arange(101) <= 98)
    assert np.abs(f.K[ridge, 50]).max() < 1e-6
    assert np.allclose(f.H[ridge, 50], -0.02, rtol=0.02)


def test_hemisphere_classifies_elliptical_convex():
    img = make_surface("hemisphere", n=101, radius=50)
    f = compute_curvature_field(img)
    labels = classify(f)
    # interior: away from the rim where the graph steepens without bound
    rows, cols = np.mgrid[0:101, 0:101]
    interior = np.hypot(rows - 50, cols - 50) < 45
    cls = labels[interior & f.valid]
    assert np.mean(cls == HKClass.ELLIPTICAL_CONVEX) >= 0.99


TABLE = [
    (-1, +1, HKClass.ELLIPTICAL_CONVEX),
    (-1, 0, HKClass.CYLINDRICAL_CONVEX),
    (-1, -1, HKClass.HYPERBOLIC_CONVEX),
    (0, +1, HKClass.HYPERBOLIC_SYMMETRIC),
    (0, 0, HKClass.PLANAR),
    (0, -1, HKClass.IMPOSSIBLE),
    (+1, +1, HKClass.ELLIPTICAL_CONCAVE),
    (+1, 0, HKClass.CYLINDRICAL_CONCAVE),
    (+1, -1, HKClass.HYPERBOLIC_CONCAVE),
]


@pytest.mark.parametrize("sh, sk, expected", TABLE)
def test_table_cells(sh, sk, expected):
    assert classify(field(sh * 0.5, sk * 0.5))[0, 0] == expected
    # inside the zero band counts as zero
    assert classify(field(sh * 0.5 if sh else 5e-7, sk * 0.5 if sk else -5e-7))[0, 0] == expected


def test_sphere_apex_cell_and_planar():
    assert classify(field(-0.02, 4e-4))[0, 0] == HKClass.ELLIPTICAL_CONVEX
    assert classify(field(0.0, 0.0))[0, 0] == HKClass.PLANAR


def test_invalid_is_unclassified():
    f = field([[-1.0, 1.0]], [[1.0, 1.0]], np.array([[True, False]]))
    assert classify(f).tolist() == [[HKClass.ELLIPTICAL_CONVEX, HKClass.UNCLASSIFIED]]


def test_eps_band_boundaries():
    p = ClassifyParams(eps_h=0.1, eps_k=0.1)
    assert classify(field(0.1, 0.1), p)[0, 0] == HKClass.PLANAR
    assert classify(field(-0.1000001, 0.1000001), p)[0, 0] == HKClass.ELLIPTICAL_CONVEX


def test_depth_negation_swaps_convexity():
    img, _ = make_phantom()
    img = gaussian_smooth(img)
    neg = RangeImage(-img.depth, img.valid)
    a, b = compute_curvature_field(img), compute_curvature_field(neg)
    assert np.array_equal(a.H, -b.H) and np.array_equal(a.K, b.K)
    la, lb = classify(a), classify(b)
    swap = {HKClass.ELLIPTICAL_CONVEX: HKClass.ELLIPTICAL_CONCAVE,
            HKClass.ELLIPTICAL_CONCAVE: HKClass.ELLIPTICAL_CONVEX}
    for src, dst in swap.items():
        assert np.array_equal(la == src, lb == dst)


def test_rot90_equivariance():
    img, _ = make_phantom()
    f = compute_curvature_field(img)
    g = compute_curvature_field(RangeImage(np.rot90(img.depth), np.rot90(img.valid)))
    assert np.array_equal(np.rot90(f.valid), g.valid)
    assert np.allclose(np.rot90(f.H), g.H, rtol=1e-9, atol=1e-9)
    assert np.allclose(np.rot90(f.K), g.K, rtol=1e-9, atol=1e-9)


def test_h_squared_bounds_k_on_phantom():
    img, _ = make_phantom(PhantomSpec(noise_sigma=0.3), np.random.default_rng(1))
    f = compute_curvature_field(img)
    assert np.all(f.H**2 >= f.K - 1e-12)


def test_segment_uniform():
    labels = np.full((4, 5), HKClass.PLANAR, dtype=np.uint8)
    regions = segment_regions(labels)
    assert len(regions) == 1 and regions[0].size == 20


def test_segment_two_blobs():
    labels = np.full((12, 12), HKClass.PLANAR, dtype=np.uint8)
    labels[1:3, 1:6] = HKClass.ELLIPTICAL_CONCAVE  # 10 pixels
    labels[8, 3:10] = HKClass.ELLIPTICAL_CONCAVE  # 7 pixels
    regions = segment_regions(labels)
    assert len(regions) == 3
    concave = [r.size for r in regions if r.hk_class == HKClass.ELLIPTICAL_CONCAVE]
    assert concave == [10, 7]
    assert regions[0].hk_class == HKClass.PLANAR and regions[0].size == 144 - 17


def test_segment_four_connectivity():
    labels = np.zeros((3, 3), dtype=np.uint8)
    labels[0, 0] = labels[1, 1] = HKClass.ELLIPTICAL_CONVEX
    assert len(segment_regions(labels)) == 2


def test_phantom_regions():
    img, truth = make_phantom()
    pre, _, _, _ = preprocess_image(img, PipelineConfig())
    f = compute_curvature_field(pre)
    regions = segment_regions(classify(f), f)
    big = [r for r in regions if r.size >= 30]
    concave = [r for r in big if r.hk_class == HKClass.ELLIPTICAL_CONCAVE]
    assert len(concave) == 2
    for eye in truth.eyes:
        assert sum(eye in set(r.pixels) for r in concave) == 1
    convex = [r for r in big if r.hk_class == HKClass.ELLIPTICAL_CONVEX and truth.nose in set(r.pixels)]
    assert len(convex) == 1 and convex[0].mean_H < 0 and convex[0].mean_K > 0


def test_counts_and_palette(tmp_path):
    labels = np.array([[0, 1, 7], [3, 5, 6]], dtype=np.uint8)
    counts = class_counts(labels)
    assert counts[HKClass.IMPOSSIBLE] == 1 and sum(counts.values()) == 6
    grey = class_map_image(labels)
    assert grey.tolist() == [[0, 128, 224], [32, 64, 16]]
    # hyperbolic darkest, then elliptical convex, then elliptical concave brightest
    hyper = {PALETTE[c] for c in (HKClass.HYPERBOLIC_CONVEX, HKClass.HYPERBOLIC_CONCAVE,
                                  HKClass.HYPERBOLIC_SYMMETRIC)}
    assert max(hyper) < PALETTE[HKClass.ELLIPTICAL_CONVEX] < PALETTE[HKClass.ELLIPTICAL_CONCAVE]
    p = tmp_path / "m.pgm"
    save_class_map(labels, p)
    from PIL import Image
    assert np.array_equal(np.array(Image.open(p)), grey)
