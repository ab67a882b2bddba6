import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inst3d import oracles
from inst3d.tensor import NonFiniteError, Tensor, grad_check, no_grad, ops, random_projection
from inst3d.tensor.container import ContainerError, load_named, load_params, save_named, save_params
from inst3d.tensor.nn import ParamStore, init_attention, multi_head_attention


def leaf(a):
    return Tensor(a, requires_grad=True)


def check(build, leaves, seed=0, tol=1e-4):
    proj = random_projection(build(), seed)
    rep = grad_check(lambda: proj(build()), leaves)
    assert rep.max_rel_err < tol, rep


def test_matmul_hand_values():
    x = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(ops.matmul(np.eye(3), x).data, x)
    assert np.array_equal(ops.matmul([[1.0, 2.0], [3.0, 4.0]], [[5.0], [6.0]]).data, [[17.0], [39.0]])
    with pytest.raises(ValueError):
        ops.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        ops.matmul(np.ones(3), np.ones((3, 1)))


def test_matmul_grad(rng):
    a, b = leaf(rng.standard_normal((7, 5))), leaf(rng.standard_normal((5, 4)))
    check(lambda: ops.matmul(a, b), [a, b])


def test_sum_matmul_grad_very_tight(rng):
    a, b = leaf(rng.standard_normal((4, 3))), leaf(rng.standard_normal((3, 2)))
    assert grad_check(lambda: ops.sum(ops.matmul(a, b)), [a, b]).max_rel_err < 1e-6


def test_softmax_examples(rng):
    assert np.abs(ops.softmax(Tensor(np.zeros(4))).data - 0.25).max() < 1e-12
    assert np.array_equal(ops.softmax(Tensor([1000.0, 0.0])).data, [1.0, 0.0])
    x = leaf(rng.standard_normal(6))
    check(lambda: ops.softmax(x), [x])


def test_layer_norm_examples(rng):
    g, b = Tensor(np.ones(3)), Tensor([0.5, -1.0, 2.0])
    assert np.allclose(ops.layer_norm(Tensor(np.full((1, 3), 7.0)), g, b).data, b.data, atol=0, rtol=0)
    y = ops.layer_norm(Tensor([[1.0, 2.0, 3.0]]), g, Tensor(np.zeros(3)), eps=0.0).data
    assert abs(y.mean()) < 1e-15 and abs(y.var() - 1.0) < 1e-12
    x = leaf(rng.standard_normal((4, 8)))
    gamma, beta = leaf(1 + 0.2 * rng.standard_normal(8)), leaf(rng.standard_normal(8))
    check(lambda: ops.layer_norm(x, gamma, beta), [x, gamma, beta])


def test_gelu_examples(rng):
    assert ops.gelu(Tensor(0.0)).item() == 0.0
    assert abs(ops.gelu(Tensor(10.0)).item() - 10.0) < 1e-4
    x = leaf(rng.standard_normal(9))
    check(lambda: ops.gelu(x), [x])


def test_max_pool_examples(rng):
    assert np.array_equal(ops.max_pool(Tensor([[1.0, 5.0], [3.0, 2.0]]), axis=0).data, [3.0, 5.0])
    x = np.array([[2.0, -1.0]])
    assert np.array_equal(ops.max_pool(Tensor(x), axis=0).data, x[0])
    y = leaf(rng.standard_normal((5, 4)))
    check(lambda: ops.max_pool(y, axis=0), [y])


def test_broadcast_grads(rng):
    a, b = leaf(rng.standard_normal((2, 3, 4))), leaf(rng.standard_normal((3, 1)))
    check(lambda: ops.mul(ops.add(a, b), ops.sub(a, b)), [a, b])


def test_attention_single_key_ignores_query(rng):
    store = ParamStore(0)
    init_attention(store, "a", 8)
    v = Tensor(rng.standard_normal((1, 1, 8)))
    o1 = multi_head_attention(store.scope("a"), Tensor(rng.standard_normal((1, 2, 8))), v, v, 2).data
    o2 = multi_head_attention(store.scope("a"), Tensor(rng.standard_normal((1, 2, 8))), v, v, 2).data
    assert np.abs(o1 - o2).max() < 1e-12 and np.abs(o1[0, 0] - o1[0, 1]).max() < 1e-12


def test_attention_selector_limit():
    store = ParamStore(0)
    init_attention(store, "a", 4)
    for name in ("q", "k", "v", "o"):
        store.set(f"a.{name}.w", np.eye(4))
        if f"a.{name}.b" in store:
            store.set(f"a.{name}.b", np.zeros(4))
    keys = np.eye(4)[None] * 10.0  # logit gap 100 / sqrt(4) = 50
    vals = np.arange(16.0).reshape(1, 4, 4)
    q = keys[:, 2:3]
    out = multi_head_attention(store.scope("a"), Tensor(q), Tensor(keys), Tensor(vals), 1).data
    assert np.abs(out[0, 0] - vals[0, 2]).max() < 1e-9


def test_attention_grad_all_inputs(rng):
    store = ParamStore(3)
    init_attention(store, "a", 8)
    q, k, v = (leaf(rng.standard_normal(s)) for s in ((2, 3, 8), (2, 4, 8), (2, 4, 8)))
    check(lambda: multi_head_attention(store.scope("a"), q, k, v, 2), [q, k, v, *store.tensors()])


def test_attention_matches_dense_oracle(rng):
    store = ParamStore(5)
    init_attention(store, "a", 4)
    q, k = rng.standard_normal((2, 4)), rng.standard_normal((3, 4))
    got = multi_head_attention(store.scope("a"), Tensor(q[None]), Tensor(k[None]), Tensor(k[None]), 1).data[0]
    want = oracles.dense_attention(q, k, k, heads=1, **oracles.attention_params(store, "a"))
    assert np.abs(got - want).max() < 1e-12


def test_attention_shape_errors():
    store = ParamStore(0)
    init_attention(store, "a", 4)
    with pytest.raises(ValueError):
        multi_head_attention(store.scope("a"), Tensor(np.ones((1, 2, 4))), Tensor(np.ones((1, 2, 3))),
                             Tensor(np.ones((1, 2, 3))), 1)
    with pytest.raises(ValueError):
        multi_head_attention(store.scope("a"), Tensor(np.ones((1, 2, 4))), Tensor(np.ones((1, 2, 4))),
                             Tensor(np.ones((1, 2, 4))), 3)


def test_grad_check_rejects_non_scalar():
    x = leaf(np.ones(3))
    with pytest.raises(ValueError):
        grad_check(lambda: ops.mul(x, 2.0), [x])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_raises():
    with pytest.raises(NonFiniteError):
        ops.mul(Tensor([np.inf]), 0.0)


def test_no_grad_records_nothing():
    x = leaf(np.ones(2))
    with no_grad():
        y = ops.mul(x, 3.0)
    assert not y.requires_grad


def test_backward_accumulates_over_reuse():
    x = leaf([2.0])
    ops.sum(ops.add(ops.mul(x, x), x)).backward()
    assert x.grad[0] == 5.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(2, 5))
def test_softmax_rows_sum_to_one(seed, rows, cols):
    x = np.random.default_rng(seed).standard_normal((rows, cols)) * 30
    y = ops.softmax(Tensor(x)).data
    assert np.allclose(y.sum(axis=-1), 1.0, atol=1e-12) and np.all(y >= 0)


def test_param_init_is_keyed_by_name():
    a, b = ParamStore(7), ParamStore(7)
    a.create("x", (3, 2), "uniform_fan_in")
    b.create("other", (4,), "normal_0.02")
    b.create("x", (3, 2), "uniform_fan_in")
    assert np.array_equal(a["x"].data, b["x"].data)
    assert np.abs(a["x"].data).max() <= 1 / np.sqrt(3)
    with pytest.raises(KeyError):
        a.create("x", (1,), "zeros")


def test_container_round_trip(tmp_path, rng):
    arr = rng.standard_normal((2, 3))
    save_named(tmp_path / "t.json", {"a": arr}, "thing", {"note": 1})
    tensors, meta = load_named(tmp_path / "t.json", "thing")
    assert np.array_equal(tensors["a"], arr) and meta == {"note": 1}
    with pytest.raises(ContainerError):
        load_named(tmp_path / "t.json", "other")
    doc = json.loads((tmp_path / "t.json").read_text())
    doc["tensors"]["a"]["shape"] = [4, 4]
    (tmp_path / "t.json").write_text(json.dumps(doc))
    with pytest.raises(ContainerError):
        load_named(tmp_path / "t.json")


def test_params_round_trip(tmp_path):
    store = ParamStore(1)
    init_attention(store, "a", 4)
    save_params(tmp_path / "p.json", store)
    fresh = ParamStore(99)
    init_attention(fresh, "a", 4)
    load_params(tmp_path / "p.json", fresh)
    for name, t in store.items():
        assert np.array_equal(t.data, fresh[name].data)
