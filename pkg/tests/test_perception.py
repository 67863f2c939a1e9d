import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeronav.errors import ConfigError
from aeronav.geometry import DEFAULT_INTRINSICS, Pose
from aeronav.perception import (
    BBoxFeature,
    FeatureBundle,
    RoiFeature,
    ScanFeature,
    SemanticMap,
    SyntheticEmbedder,
    assemble_bundle,
    bbox_feature,
    depth_to_scan,
    extract_roi,
    patch_bounds,
    similarity_map,
    zero_bundle,
)
from aeronav.simulator import Detection, SceneConfig, generate_scene, is_valid_position, render
from oracles import roi_oracle, scan_oracle

K = DEFAULT_INTRINSICS


def test_all_invalid_depth_reads_one():
    scan = depth_to_scan(np.zeros(K.shape), K)
    assert scan.rho_min.tolist() == [1.0] * 16


def test_single_point_ahead():
    depth = np.zeros(K.shape)
    depth[30, 40] = 1.0
    rho = depth_to_scan(depth, K).rho_min
    # the optical axis sits on the boundary between the two central sectors
    assert rho[7] == pytest.approx(1 / 3)
    assert np.count_nonzero(rho < 1.0) == 1


def test_two_points_one_sector_take_min():
    depth = np.zeros(K.shape)
    depth[30, 38] = 1.2
    depth[30, 39] = 0.9
    rho = depth_to_scan(depth, K).rho_min
    sector = int(np.argmin(rho))
    assert np.count_nonzero(rho < 1.0) == 1
    expected = math.hypot(0.9, 0.9 * (39 - 40) / 40) / 3.0
    assert rho[sector] == pytest.approx(expected, abs=1e-12)


def test_sectors_run_left_to_right():
    depth = np.zeros(K.shape)
    depth[30, 2] = 1.0   # far left of the image
    rho = depth_to_scan(depth, K).rho_min
    assert int(np.argmin(rho)) == 0
    depth = np.zeros(K.shape)
    depth[30, 78] = 1.0
    assert int(np.argmin(depth_to_scan(depth, K).rho_min)) == 15


def test_scan_band_excludes_high_points():
    depth = np.zeros(K.shape)
    depth[0, 40] = 1.0  # 0.75 m above the optical axis
    assert depth_to_scan(depth, K).rho_min.tolist() == [1.0] * 16


def test_sector_count_validated():
    with pytest.raises(ConfigError):
        depth_to_scan(np.zeros(K.shape), K, n=0)


def test_uniform_depth_roi_is_whole_image():
    roi = extract_roi(np.full(K.shape, 2.0), K)
    assert roi.valid
    assert (roi.dx, roi.dy) == (0.0, 0.0)
    assert roi.bbox == (0, 0, 80, 60)
    assert roi.z_mean == pytest.approx(2.0)


def test_roi_picks_larger_blob():
    depth = np.full(K.shape, 1.0)
    depth[5:10, 5:11] = 2.5     # 30 px, upper left
    depth[40:43, 60:64] = 2.5   # 12 px, lower right
    roi = extract_roi(depth, K, percentile_q=0.005)
    assert roi.valid
    assert roi.bbox == (5, 5, 11, 10)
    assert roi.dx == pytest.approx((8 - 40) / 40)
    assert roi.dy == pytest.approx((7.5 - 30) / 30)


def test_roi_all_ground_is_invalid():
    depth = np.zeros(K.shape)
    depth[45:, :] = 1.0  # rows below the axis
    roi = extract_roi(depth, K, height_above_floor=0.0)
    assert not roi.valid
    assert (roi.dx, roi.dy, roi.z_mean) == (0.0, 0.0, 0.0)


def test_roi_quantile_validated():
    with pytest.raises(ConfigError):
        extract_roi(np.ones(K.shape), K, percentile_q=1.0)


def _views(n, seed):
    scenes = [generate_scene(s, SceneConfig(rooms=2, dims=(32, 24, 12))) for s in (seed, seed + 1)]
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        sc = scenes[len(out) % 2]
        p = rng.uniform([0, 0, 0], sc.extent)
        if not is_valid_position(sc, p):
            continue
        pose = Pose(tuple(p), rng.uniform(-math.pi, math.pi))
        depth, _ = render(sc, pose, K)
        out.append((depth, pose.altitude - sc.floor_z))
    return out


@pytest.mark.parametrize("seed", [0, 1])
def test_scan_and_roi_match_oracles(seed):
    for depth, h in _views(8, seed):
        scan = depth_to_scan(depth, K, height_above_floor=h)
        np.testing.assert_allclose(scan.rho_min, scan_oracle(depth, K, 0.1, 16, h), atol=1e-9, rtol=0)
        roi = extract_roi(depth, K, height_above_floor=h)
        dx, dy, z, valid, bbox = roi_oracle(depth, K, 0.1, h)
        assert roi.valid == valid and roi.bbox == bbox
        assert abs(roi.dx - dx) <= 1e-9 and abs(roi.dy - dy) <= 1e-9 and abs(roi.z_mean - z) <= 1e-9


def test_scan_and_roi_invariants():
    for depth, h in _views(6, 5):
        scan = depth_to_scan(depth, K, height_above_floor=h)
        assert scan.n == 16 and np.all((scan.rho_min >= 0) & (scan.rho_min <= 1))
        roi = extract_roi(depth, K, height_above_floor=h)
        assert abs(roi.dx) <= 1 and abs(roi.dy) <= 1 and 0 <= roi.z_mean <= K.max_range


class _Fixed:
    """Provider whose text and patch embeddings are fixed vectors."""

    def __init__(self, text, patch):
        self.dim = len(text)
        self.text, self.patch = np.asarray(text, float), np.asarray(patch, float)

    def text_embed(self, label):
        return self.text

    def patch_embed(self, patch):
        return self.patch


def test_similarity_identity_and_orthogonal():
    frame = np.zeros(K.shape, dtype=np.int32)
    same = similarity_map(frame, _Fixed([1, 0, 0], [2, 0, 0]), "x")
    np.testing.assert_allclose(same.s, np.ones(49))
    orth = similarity_map(frame, _Fixed([1, 0, 0], [0, 1, 0]), "x")
    np.testing.assert_allclose(orth.s, np.zeros(49))


def test_synthetic_similarity_matches_dot_products():
    names = ["Mug", "Counter", "Vase"]
    emb = SyntheticEmbedder(names, dim=16, seed=3, taxonomy={"Mug": "Counter", "Counter": None, "Vase": None})
    rng = np.random.default_rng(0)
    frame = rng.integers(0, 4, K.shape).astype(np.int32)
    frame[10:30, 20:50] = 1
    sem = similarity_map(frame, emb, "Mug", (7, 7))
    text = emb.text_embed("Mug")
    np.testing.assert_allclose(np.linalg.norm(text), 1.0)
    rb, cb = patch_bounds(60, 7), patch_bounds(80, 7)
    n = 0
    for i in range(7):
        for j in range(7):
            patch = frame[rb[i]:rb[i + 1], cb[j]:cb[j + 1]]
            vec = np.zeros(16)
            for c in patch.ravel():
                vec += emb.table[c]
            vec /= patch.size
            expected = float(vec @ text / (np.linalg.norm(vec) * np.linalg.norm(text)))
            assert abs(sem.s[n] - expected) <= 1e-9
            n += 1
    assert np.all(np.abs(sem.s) <= 1.0)


def test_patch_grid_tiles_image():
    for size, parts in ((60, 7), (80, 7), (13, 13)):
        b = patch_bounds(size, parts)
        assert b[0] == 0 and b[-1] == size and np.all(np.diff(b) >= 1)
    with pytest.raises(ConfigError):
        patch_bounds(5, 6)


def test_embedder_deterministic():
    a = SyntheticEmbedder(["A", "B"], seed=7)
    b = SyntheticEmbedder(["A", "B"], seed=7)
    np.testing.assert_array_equal(a.table, b.table)
    with pytest.raises(ConfigError):
        a.text_embed("C")


def test_bbox_features():
    full = bbox_feature(Detection(True, (0, 0, 80, 60)), K, 1.0)
    assert full.as_tuple() == (0.5, 0.5, 1.0, 1.0, 1.0)
    assert bbox_feature(Detection.absent(), K, 1.0) == BBoxFeature()
    box = bbox_feature(Detection(True, (10, 10, 30, 40)), K, 1.0)
    assert box.area_ratio == pytest.approx(600 / 4800)


def test_bundle_length_and_zero():
    z = zero_bundle()
    v = z.to_vector()
    assert len(v) == 75 == z.size
    assert not np.any(v)
    back = FeatureBundle.from_vector(v)
    assert not back.bbox.present and not back.roi.valid


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=16, max_size=16), st.lists(st.floats(-1, 1), min_size=49, max_size=49),
       st.floats(-1, 1), st.floats(-1, 1), st.floats(0.01, 3), st.booleans(), st.floats(0.2, 1.6))
def test_bundle_round_trip(scan, sem, dx, dy, z, present, alt):
    bb = BBoxFeature(0.3, 0.6, 0.2, 0.1, 0.02, alt, True) if present else BBoxFeature()
    b = assemble_bundle(ScanFeature(np.array(scan)), RoiFeature(dx, dy, z, True), SemanticMap(np.array(sem)),
                        bb, alt)
    v = b.to_vector()
    back = FeatureBundle.from_vector(v)
    np.testing.assert_allclose(back.to_vector(), v, atol=1e-12)
    assert back.bbox.present == present
