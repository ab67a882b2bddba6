import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inst3d import oracles
from inst3d.projection import (
    DELTA_OCC,
    FrameVisibility,
    UnobservedInstanceError,
    VisibilityReport,
    lift_instance_features,
    mask_bbox,
    multi_level_crops,
    project_point,
    project_points,
    rank_views,
    sample_prompt_points,
    select_top_k_views,
    visibility_report,
    visible_points,
)
from inst3d.scene import InstanceProposal, make_scene
from inst3d.stubs import HashEmbedder, OracleSegmenter
from inst3d.synth import synth_scene

from conftest import pinhole


def one_instance_scene(points, frames):
    pts = np.asarray(points, dtype=float)
    return make_scene(pts, np.zeros_like(pts), frames, [InstanceProposal(0, np.ones(len(pts), dtype=bool))])


def test_project_point_hand_values():
    fr = pinhole()
    assert project_point(fr, (0, 0, 2)) == (50.0, 50.0, 2.0)
    assert project_point(fr, (1, 0, 2)) == (100.0, 50.0, 2.0)
    assert project_point(fr, (0, 0, 0)) is None
    assert project_point(fr, (0, 0, -1)) is None


def test_project_points_matches_scalar_oracle(rng):
    from inst3d.synth import look_at

    fr = pinhole(pose=look_at(np.array([3.0, -2.0, 1.0]), np.zeros(3)))
    pts = rng.uniform(-2, 2, size=(200, 3))
    uv, z, front = project_points(fr, pts)
    for p, u, zz, ok in zip(pts, uv, z, front):
        ref = oracles.project_point_scalar(fr.fx, fr.fy, fr.cx, fr.cy, fr.pose, p)
        assert ok == (ref is not None)
        if ok:
            assert abs(u[0] - ref[0]) < 1e-9 and abs(u[1] - ref[1]) < 1e-9 and abs(zz - ref[2]) < 1e-12


def test_all_behind_camera_counts_zero():
    scene = one_instance_scene([[0, 0, -1], [0.1, 0, -2]], [pinhole()])
    assert visible_points(scene.frames[0], scene, 0).visible_count == 0


def test_zero_depth_disables_occlusion(rng):
    pts = np.column_stack([rng.uniform(-0.5, 0.5, (30, 2)), rng.uniform(1, 3, 30)])
    scene = one_instance_scene(pts, [pinhole()])
    assert visible_points(scene.frames[0], scene, 0).visible_count == 30


def test_half_occluding_wall_matches_brute_force(rng):
    depth = np.zeros((100, 100))
    depth[:, :50] = 1.0  # wall in front of the left half
    pts = np.column_stack([rng.uniform(-0.8, 0.8, 50), rng.uniform(-0.8, 0.8, 50), np.full(50, 2.0)])
    scene = one_instance_scene(pts, [pinhole(depth=depth)])
    got = visible_points(scene.frames[0], scene, 0).visible_count
    assert got == oracles.visible_count_scalar(scene.frames[0], pts, DELTA_OCC)
    assert 0 < got < 50


def test_rounding_is_half_up():
    # u = 100 * 0.005 / 1 + 50 = 50.5 lands in column 51 under round-half-up
    depth = np.zeros((100, 100))
    depth[50, 51] = 5.0
    scene = one_instance_scene([[0.005, 0.0, 1.0]], [pinhole(depth=depth)])
    assert visible_points(scene.frames[0], scene, 0).visible_count == 0


def test_single_camera_counts_match_projection_oracle():
    scene = synth_scene(3, 1, 1, points_per_instance=150)
    fr, pts = scene.frames[0], scene.instance_points(0)
    uv, _, front = project_points(fr, pts)
    in_frustum = front & np.all((np.floor(uv + 0.5) >= 0) & (np.floor(uv + 0.5) < [fr.width, fr.height]), axis=1)
    count = visible_points(fr, scene, 0).visible_count
    assert count == oracles.visible_count_scalar(fr, pts, DELTA_OCC)
    assert 0 < count <= in_frustum.sum()


def test_rank_views_examples():
    assert rank_views({2: 7, 0: 7, 1: 3}, 2) == [0, 2]
    assert rank_views({4: 9}, 5) == [4]
    assert rank_views({0: 0, 1: 0}, 3) == []
    with pytest.raises(ValueError):
        rank_views({0: 1}, 0)


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.integers(0, 40), st.integers(0, 5), max_size=12), st.integers(1, 8))
def test_rank_views_matches_sort_oracle(counts, k):
    assert rank_views(counts, k) == oracles.top_k_scalar(counts, k)


def test_select_top_k_single_frame_and_unobserved():
    scene = one_instance_scene([[0, 0, 2]], [pinhole()])
    sel = select_top_k_views(scene, 0, 5)
    assert sel.frames == (0,) and sel.observed
    away = one_instance_scene([[0, 0, -2]], [pinhole()])
    sel = select_top_k_views(away, 0, 5)
    assert sel.frames == () and sel.status == "unobserved"


def test_select_top_k_on_synthetic_scene():
    scene = synth_scene(2, 3, 10, points_per_instance=60)
    for iid in scene.instance_ids:
        rep = visibility_report(scene, iid)
        assert list(select_top_k_views(scene, iid, 5).frames) == oracles.top_k_scalar(rep.counts(), 5)


def _entry(n):
    pix = np.column_stack([np.arange(n, dtype=float), np.zeros(n), np.ones(n)])
    return FrameVisibility(0, 0, n, pix, np.arange(n))


def test_prompt_sampling_contracts():
    assert len(sample_prompt_points(_entry(3), 5, 0).pixels) == 3
    a, b = sample_prompt_points(_entry(10), 5, 9), sample_prompt_points(_entry(10), 5, 9)
    assert np.array_equal(a.pixels, b.pixels) and len(np.unique(a.pixels, axis=0)) == 5
    with pytest.raises(UnobservedInstanceError):
        sample_prompt_points(_entry(0), 5, 0)


def test_prompt_sampling_is_uniform():
    hits = np.zeros(10)
    for seed in range(10_000):
        hits[sample_prompt_points(_entry(10), 5, seed).pixels[:, 0].astype(int)] += 1
    # each pixel is chosen with probability 1/2 per draw
    sigma = np.sqrt(10_000 * 0.5 * 0.5)
    assert np.all(np.abs(hits - 5000) < 3 * sigma)


def test_crops_examples():
    fr = pinhole()
    crops = multi_level_crops(fr, (45, 45, 55, 55), 3)
    assert [c.bbox[2] - c.bbox[0] for c in crops] == [10, 15, 20]
    assert multi_level_crops(fr, (45, 45, 55, 55), 1)[0].bbox == (45, 45, 55, 55)
    for c in multi_level_crops(fr, (0, 90, 10, 100), 3):
        u0, v0, u1, v1 = c.bbox
        assert 0 <= u0 < u1 <= 100 and 0 <= v0 < v1 <= 100
    with pytest.raises(ValueError):
        multi_level_crops(fr, (5, 5, 5, 9), 2)


def test_mask_bbox():
    m = np.zeros((10, 10), dtype=bool)
    m[2:4, 5:9] = True
    assert mask_bbox(m) == (5, 2, 9, 4)
    with pytest.raises(ValueError):
        mask_bbox(np.zeros((3, 3), dtype=bool))


def _lift(scene, k, levels, embedder, segmenter=None):
    sels = {i: select_top_k_views(scene, i, k) for i in scene.instance_ids}
    return sels, lift_instance_features(scene, sels, segmenter or OracleSegmenter(scene), embedder, k, levels)


def test_lift_constant_embedder(small_scene):
    class Const:
        dim = 4

        def __call__(self, crop):
            return np.array([1.0, 2.0, 3.0, 4.0])

    _, lifted = _lift(small_scene, 3, 2, Const())
    assert np.all(lifted.features[lifted.validity] == [1, 2, 3, 4])
    assert np.all(lifted.features[~lifted.validity] == 0)


def test_lift_level_average(small_scene):
    class OneHotLevel:
        dim = 3

        def __init__(self):
            self.calls = 0

        def __call__(self, crop):
            v = np.eye(3)[self.calls % 3]
            self.calls += 1
            return v

    _, lifted = _lift(small_scene, 2, 3, OneHotLevel())
    assert np.allclose(lifted.features[lifted.validity], 1 / 3, atol=1e-15)


def test_lift_shape_and_validity(small_scene):
    sels, lifted = _lift(small_scene, 2, 3, HashEmbedder(8))
    assert lifted.features.shape == (2, 4, 8)
    for col, iid in enumerate(small_scene.instance_ids):
        want = oracles.top_k_scalar(visibility_report(small_scene, iid).counts(), 2)
        assert lifted.validity[:, col].sum() == len(want)
        assert list(lifted.view_frames[: len(want), col]) == want


def test_lift_error_has_context(small_scene):
    def broken(frame, prompts):
        raise RuntimeError("boom")

    with pytest.raises(Exception, match=r"instance \d+, frame \d+: boom"):
        _lift(small_scene, 2, 2, HashEmbedder(4), segmenter=broken)


def test_visibility_report_entries(small_scene):
    rep = visibility_report(small_scene, 1)
    assert isinstance(rep, VisibilityReport) and len(rep.entries) == len(small_scene.frames)
    with pytest.raises(KeyError):
        rep.entry(999)
