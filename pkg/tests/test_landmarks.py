import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hkface.curvature import CurvatureField, HKClass, classify, compute_curvature_field
from hkface.errors import BadParams, NoCandidates, NoValidPixels, SingleCandidate
from hkface.landmarks import (
    CSV_COLUMNS,
    DetectionParams,
    IntensityMap,
    LandmarkResult,
    detect_eye_corners,
    detect_nose_tip,
    detect_nose_tip_max_intensity,
    eye_candidates,
    intensity_map,
    nose_candidates,
)
from hkface.pipeline import PipelineConfig, preprocess_image
from hkface.rangeio import RangeImage
from hkface.synth import PhantomSpec, make_phantom


def points_field(shape, pts, h_sign):
    """Field that is planar except at ``pts``: {(r, c): K}."""
    H = np.zeros(shape)
    K = np.zeros(shape)
    for (r, c), k in pts.items():
        K[r, c] = k
        H[r, c] = h_sign * 2 * np.sqrt(k)  # umbilic: H^2 = K
    f = CurvatureField(H, K, np.ones(shape, bool))
    return f, classify(f)


def test_eye_sample_output_contract():
    f, labels = points_field((100, 100), {(51, 29): 0.000410, (50, 49): 0.000225}, +1)
    eyes = detect_eye_corners(f, labels)
    assert [(e.row, e.col, e.k) for e in eyes] == [(51, 29, 0.000410), (50, 49, 0.000225)]
    doc = json.loads(LandmarkResult(eyes=eyes).to_json())
    assert doc["eyes"] == [{"row": 51, "col": 29, "k": 0.00041}, {"row": 50, "col": 49, "k": 0.000225}]


def test_nose_sample_selection_contract():
    rows = [(97, 65, 0.003453, 161), (97, 66, 0.003108, 161), (3, 89, 0.000892, 64),
            (97, 67, 0.000819, 159), (60, 45, 0.000563, 254)]
    f, labels = points_field((100, 100), {(r, c): k for r, c, k, _ in rows}, -1)
    vals = np.zeros((100, 100), np.int16)
    for r, c, _, i in rows:
        vals[r, c] = i
    ints = IntensityMap(vals, np.ones((100, 100), bool))
    ranked = [divmod(int(i), 100) for i in nose_candidates(f, labels, DetectionParams())]
    assert ranked == [(r, c) for r, c, _, _ in rows]
    nose = detect_nose_tip(f, labels, ints)
    assert (nose.row, nose.col, nose.k, nose.intensity) == (60, 45, 0.000563, 254)


def test_two_pits_order():
    f, labels = points_field((40, 40), {(10, 10): 3e-4, (10, 30): 5e-4}, +1)
    eyes = detect_eye_corners(f, labels, DetectionParams(min_separation=5))
    assert [(e.row, e.col) for e in eyes] == [(10, 30), (10, 10)]


def test_min_separation_skips_neighbours():
    pts = {(10, 10): 9e-4, (10, 12): 8e-4, (11, 10): 7e-4, (10, 30): 2e-4}
    f, labels = points_field((40, 40), pts, +1)
    eyes = detect_eye_corners(f, labels, DetectionParams(min_separation=5))
    assert [(e.row, e.col) for e in eyes] == [(10, 10), (10, 30)]
    f, labels = points_field((40, 40), {(10, 10): 9e-4, (10, 12): 8e-4}, +1)
    with pytest.raises(SingleCandidate):
        detect_eye_corners(f, labels, DetectionParams(min_separation=5))


def test_ties_are_row_major():
    f, labels = points_field((30, 30), {(20, 5): 4e-4, (3, 25): 4e-4, (3, 2): 4e-4}, +1)
    eyes = detect_eye_corners(f, labels)
    assert [(e.row, e.col) for e in eyes] == [(3, 2), (3, 25)]


def test_all_planar_raises():
    f, labels = points_field((10, 10), {}, +1)
    with pytest.raises(NoCandidates):
        detect_eye_corners(f, labels)
    with pytest.raises(NoCandidates):
        detect_nose_tip(f, labels, IntensityMap(np.zeros((10, 10), np.int16), np.ones((10, 10), bool)))


def test_no_negative_h_means_no_nose():
    f, labels = points_field((10, 10), {(5, 5): 1e-2}, +1)
    with pytest.raises(NoCandidates):
        detect_nose_tip(f, labels, intensity_map(RangeImage(np.ones((10, 10)), np.ones((10, 10), bool))))


def test_intensity_map():
    assert np.all(intensity_map(RangeImage(np.full((3, 3), 7.0), np.ones((3, 3), bool))).values == 255)
    im = intensity_map(RangeImage([[10.0, 20.0]], [[True, True]]))
    assert im.values.tolist() == [[0, 255]]
    with pytest.raises(NoValidPixels):
        intensity_map(RangeImage([[1.0]], [[False]]))


def test_baseline_ties_and_phantom():
    ints = intensity_map(RangeImage(np.full((4, 4), 3.0), np.ones((4, 4), bool)))
    assert detect_nose_tip_max_intensity(ints)[:2] == (0, 0)
    img, truth = make_phantom()
    # the apex is the unique depth maximum; 8-bit rounding ties its ring at 255
    d = np.where(img.valid, img.depth, -np.inf)
    assert np.unravel_index(np.argmax(d), d.shape) == truth.nose
    r, c, i = detect_nose_tip_max_intensity(intensity_map(img))
    assert i == 255 and max(abs(r - truth.nose[0]), abs(c - truth.nose[1])) <= 1


def test_phantom_nose_apex_brightest_nearby():
    img, truth = make_phantom()
    ints = intensity_map(preprocess_image(img, PipelineConfig())[0])
    r, c = truth.nose
    assert ints[r, c] == ints.values[r - 2:r + 3, c - 2:c + 3].max()


def _nose_bruteforce(f, labels, ints, p):
    cand = [(f.K[r, c], r, c) for r in range(f.height) for c in range(f.width)
            if f.valid[r, c] and f.H[r, c] < 0 and f.K[r, c] > p.k_threshold
            and labels[r, c] == HKClass.ELLIPTICAL_CONVEX]
    cand.sort(key=lambda t: (-t[0], t[1], t[2]))
    top = cand[: p.top_n_nose]
    best = max(top, key=lambda t: (ints.values[t[1], t[2]], -top.index(t)))
    return best[1], best[2]


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_nose_matches_bruteforce_on_bumps(seed, top_n):
    rng = np.random.default_rng(seed)
    spec = PhantomSpec(size=64, nose=(32, 32), eyes=((14, 18), (14, 46)), head_a=30, head_b=32,
                       head_c=20, base_depth=200, noise_sigma=0.2)
    img, _ = make_phantom(spec, rng)
    pre, _, _, _ = preprocess_image(img, PipelineConfig())
    f = compute_curvature_field(pre)
    labels = classify(f)
    ints = intensity_map(pre)
    p = DetectionParams(top_n_nose=top_n)
    n = detect_nose_tip(f, labels, ints, p)
    assert (n.row, n.col) == _nose_bruteforce(f, labels, ints, p)


@given(st.floats(1e-5, 1e-3), st.floats(1e-5, 1e-3))
def test_k_threshold_monotone(t1, t2):
    lo, hi = sorted((t1, t2))
    img, _ = make_phantom(PhantomSpec(noise_sigma=0.5), np.random.default_rng(3))
    f = compute_curvature_field(img)
    labels = classify(f)
    for cands in (eye_candidates, nose_candidates):
        a = set(cands(f, labels, DetectionParams(k_threshold=lo)).tolist())
        b = set(cands(f, labels, DetectionParams(k_threshold=hi)).tolist())
        assert b <= a


def test_params_validation():
    for kw in ({"k_threshold": 0}, {"top_n_nose": 0}, {"min_separation": -1}):
        with pytest.raises(BadParams):
            DetectionParams(**kw)


def test_csv_and_json_schema():
    f, labels = points_field((40, 40), {(10, 10): 3e-4, (10, 30): 5e-4}, +1)
    res = LandmarkResult(eyes=detect_eye_corners(f, labels), params={"sigma": 1.0})
    line = res.to_csv().split(",")
    assert len(line) == len(CSV_COLUMNS)
    assert line[:4] == ["", "", "", ""] and line[4:6] == ["10", "30"]
    doc = json.loads(res.to_json())
    assert set(doc) == {"nose", "eyes", "params"} and doc["nose"] is None
