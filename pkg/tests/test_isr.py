import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inst3d import isr, oracles
from inst3d.tensor import Tensor, grad_check, no_grad, random_projection
from inst3d.tensor.nn import ParamStore

centroid_arrays = st.integers(2, 10).flatmap(
    lambda n: st.lists(st.lists(st.floats(-20, 20, allow_nan=False), min_size=3, max_size=3), min_size=n, max_size=n))


def test_pair_geometry_examples():
    g = isr.pair_geometry([[0, 0, 0], [3, 4, 0]])
    assert g.d[0, 1] == 5.0
    assert abs(math.sin(g.theta_h[0, 1]) - 0.8) < 1e-12 and abs(math.cos(g.theta_h[0, 1]) - 0.6) < 1e-12
    assert g.theta_v[0, 1] == 0.0
    g = isr.pair_geometry([[0, 0, 0], [0, 0, 1]])
    assert g.d[0, 1] == 1.0 and g.theta_h[0, 1] == 0.0 and abs(g.theta_v[0, 1] - math.pi / 2) < 1e-15


def test_coincident_pair_flagged_not_fatal():
    g = isr.pair_geometry([[1, 1, 1], [1, 1, 1], [0, 0, 0]])
    assert g.coincident[0, 1] and g.coincident[1, 0] and not g.coincident[0, 2]
    assert g.theta_h[0, 1] == g.theta_v[0, 1] == 0.0


def test_pair_geometry_rejects_bad_input():
    with pytest.raises(ValueError):
        isr.pair_geometry(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        isr.pair_geometry([[np.nan, 0, 0]])


def test_pair_geometry_oracle_20(rng):
    c = rng.uniform(-4, 4, (20, 3))
    g = isr.pair_geometry(c)
    d, th, tv = oracles.pair_geometry_scalar(c)
    assert max(np.abs(g.d - d).max(), np.abs(g.theta_h - th).max(), np.abs(g.theta_v - tv).max()) < 1e-12


def test_spatial_features_examples():
    s = isr.spatial_features(isr.pair_geometry([[0, 0, 0], [3, 4, 0]])).s
    assert np.abs(s[0, 1] - [0.8, 0.6, 0, 1, 5]).max() < 1e-12
    assert np.array_equal(s[0, 0], [0, 1, 0, 1, 0])
    d = isr.spatial_features(isr.pair_geometry([[0, 0, 0], [3, 4, 0]]), "distance_only").s
    assert np.array_equal(d[0, 1], [0, 0, 0, 0, 5])
    o = isr.spatial_features(isr.pair_geometry([[0, 0, 0], [3, 4, 0]]), "orientation_only").s
    assert o[0, 1, 4] == 0.0 and o[0, 1, 0] == s[0, 1, 0]
    with pytest.raises(ValueError):
        isr.spatial_features(isr.pair_geometry([[0, 0, 0]]), "angles")


@settings(max_examples=60, deadline=None)
@given(centroid_arrays)
def test_channel_symmetry_pattern(cents):
    c = np.array(cents)
    g = isr.pair_geometry(c)
    s = isr.spatial_features(g).s
    n = len(c)
    for i in range(n):
        for j in range(n):
            if i == j or g.coincident[i, j]:
                continue
            assert s[i, j, 4] == s[j, i, 4]
            assert abs(s[i, j, 2] + s[j, i, 2]) < 1e-12
            assert abs(s[i, j, 3] - s[j, i, 3]) < 1e-12
            if c[i, 0] != c[j, 0] or c[i, 1] != c[j, 1]:
                assert abs(s[i, j, 0] + s[j, i, 0]) < 1e-12 and abs(s[i, j, 1] + s[j, i, 1]) < 1e-12


@settings(max_examples=60, deadline=None)
@given(centroid_arrays, st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100))
def test_translation_invariance(cents, tx, ty, tz):
    c = np.array(cents)
    # pairs that are exactly vertical or coincident before the shift may not stay exact after it
    g = isr.pair_geometry(c)
    flat = np.abs(c[:, None, :2] - c[None, :, :2]).max(axis=-1) < 1e-6
    a = isr.spatial_features(g).s
    b = isr.spatial_features(isr.pair_geometry(c + [tx, ty, tz])).s
    keep = ~flat
    assert np.abs(a[keep] - b[keep]).max(initial=0.0) < 1e-10 * max(1.0, np.abs(c).max() + 100)


@settings(max_examples=60, deadline=None)
@given(centroid_arrays, st.floats(-math.pi, math.pi))
def test_z_rotation_angle_addition(cents, alpha):
    c = np.array(cents)
    flat = np.abs(c[:, None, :2] - c[None, :, :2]).max(axis=-1) < 1e-6
    rot = np.array([[math.cos(alpha), -math.sin(alpha), 0], [math.sin(alpha), math.cos(alpha), 0], [0, 0, 1]])
    a = isr.spatial_features(isr.pair_geometry(c)).s
    b = isr.spatial_features(isr.pair_geometry(c @ rot.T)).s
    keep = ~flat
    tol = 1e-10 * max(1.0, np.abs(c).max())
    assert np.abs(b[..., 2:] - a[..., 2:])[keep].max(initial=0.0) < tol
    want_sin = a[..., 0] * math.cos(alpha) + a[..., 1] * math.sin(alpha)
    want_cos = a[..., 1] * math.cos(alpha) - a[..., 0] * math.sin(alpha)
    assert np.abs(b[..., 0] - want_sin)[keep].max(initial=0.0) < tol
    assert np.abs(b[..., 1] - want_cos)[keep].max(initial=0.0) < tol


def test_position_embed_examples():
    pe = isr.position_embed(np.zeros((1, 3)), 12)
    assert np.array_equal(pe[0, 0::2], np.zeros(6)) and np.array_equal(pe[0, 1::2], np.ones(6))
    pe = isr.position_embed([[1.0, 2, 3], [5.0, 2, 3]], 12)
    assert np.array_equal(pe[0, 4:], pe[1, 4:]) and not np.array_equal(pe[0, :4], pe[1, :4])
    # D=12: per-axis width 4, frequencies 1 and 10000^(-1/2)
    hand = []
    for x in (1.0, 2.0, 3.0):
        hand += [math.sin(x), math.cos(x), math.sin(x / 100), math.cos(x / 100)]
    assert np.abs(isr.position_embed([[1.0, 2, 3]], 12)[0] - hand).max() < 1e-12
    with pytest.raises(ValueError):
        isr.position_embed(np.zeros((1, 3)), 8)


def test_conditioned_weights_examples(rng):
    pe, tok = rng.standard_normal((4, 12)), rng.standard_normal((4, 12))
    assert not isr.spatial_conditioned_weights(pe, tok, np.zeros((12, 5))).data.any()
    assert not isr.spatial_conditioned_weights(pe, -pe, rng.standard_normal((12, 5))).data.any()
    w = rng.standard_normal((12, 5))
    got = isr.spatial_conditioned_weights(pe, tok, w).data
    assert np.abs(got - oracles.conditioned_weights_scalar(pe, tok, w)).max() < 1e-12
    with pytest.raises(ValueError):
        isr.spatial_conditioned_weights(pe, tok, np.zeros((12, 4)))


def test_attention_map_examples(rng):
    s = isr.spatial_features(isr.pair_geometry(rng.standard_normal((5, 3))))
    assert not isr.attention_map(np.zeros((5, 5)), s).data.any()
    l0 = rng.standard_normal((1, 5))
    one = isr.attention_map(l0, isr.spatial_features(isr.pair_geometry(np.zeros((1, 3))))).data
    assert abs(one[0, 0] - (l0[0, 1] ** 2 + l0[0, 3] ** 2)) < 1e-12
    lw = rng.standard_normal((5, 5))
    assert np.abs(isr.attention_map(lw, s).data - oracles.attention_map_scalar(lw, s.s)).max() < 1e-12


def test_relation_aggregate_examples(rng):
    tok = rng.standard_normal((4, 8))
    for mode in isr.AGGREGATE_OVER:
        assert np.array_equal(isr.relation_aggregate(np.eye(4), tok, mode).data, tok)
        assert not isr.relation_aggregate(np.zeros((4, 4)), tok, mode).data.any()
        om = rng.standard_normal((4, 4))
        want = oracles.relation_aggregate_scalar(om, tok, mode)
        assert np.abs(isr.relation_aggregate(om, tok, mode).data - want).max() < 1e-12
    with pytest.raises(ValueError):
        isr.relation_aggregate(np.eye(4), tok, "both")


def _isr(cfg, seed=0):
    return isr.init_isr_params(ParamStore(seed), cfg)


def test_scene_project_single_token_and_permutation(rng):
    cfg = isr.IsrConfig(D=12, heads=2, n_scene_tokens=3)
    s = _isr(cfg)
    out = isr.scene_project(rng.standard_normal((1, 12)), s, cfg)
    assert out.shape == (3, 12)
    f = rng.standard_normal((7, 12))
    perm = rng.permutation(7)
    assert np.abs(isr.scene_project(f, s, cfg).data - isr.scene_project(f[perm], s, cfg).data).max() < 1e-10


def test_zero_wp_collapses_to_constant(rng):
    cfg = isr.IsrConfig(D=12, heads=2)
    s = _isr(cfg)
    s.set("isr.W_P", np.zeros((12, 5)))
    a = isr.isr_forward(rng.standard_normal((3, 12)), rng.standard_normal((3, 3)), s, cfg)
    b = isr.isr_forward(rng.standard_normal((5, 12)), rng.standard_normal((5, 3)), s, cfg)
    assert not a.relation_features.data.any()
    assert np.abs(a.scene_tokens.data - b.scene_tokens.data).max() < 1e-12


def test_instance_tokens_pass_through(rng):
    cfg = isr.IsrConfig(D=12, heads=2)
    tok = rng.standard_normal((3, 12))
    out = isr.isr_forward(tok, rng.standard_normal((3, 3)), _isr(cfg), cfg)
    assert np.array_equal(out.instance_tokens.data, tok)
    with pytest.raises(ValueError):
        isr.isr_forward(tok, rng.standard_normal((4, 3)), _isr(cfg), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        isr.IsrConfig(D=16)
    with pytest.raises(ValueError):
        isr.IsrConfig(D=12, heads=5)
    with pytest.raises(ValueError):
        isr.IsrConfig(spatial_mode="angles")


@pytest.mark.parametrize("mode", isr.AGGREGATE_OVER)
def test_isr_grad_check(rng, mode):
    cfg = isr.IsrConfig(D=12, heads=2, layers=1, aggregate_over=mode)
    s = _isr(cfg, 4)
    tok = Tensor(0.3 * rng.standard_normal((3, 12)), requires_grad=True)
    cent = rng.standard_normal((3, 3))
    build = lambda: isr.isr_forward(tok, cent, s, cfg).scene_tokens  # noqa: E731
    proj = random_projection(build(), 1)
    assert grad_check(lambda: proj(build()), [tok, *s.tensors()]).max_rel_err < 1e-3


def test_distance_only_ignores_rotation(rng):
    cfg = isr.IsrConfig(D=12, heads=2, spatial_mode="distance_only")
    s = _isr(cfg)
    tok, c = rng.standard_normal((4, 12)), rng.standard_normal((4, 3))
    rot = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
    with no_grad():
        a = isr.isr_forward(tok, c, s, cfg).scene_tokens.data
        b = isr.isr_forward(tok, c, s, cfg, pair_centroids=c @ rot.T).scene_tokens.data
    assert np.abs(a - b).max() < 1e-12
