"""Named parameters and the small layers built from tensor ops."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import ops
from .core import Tensor


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    seed: int
    scheme: str  # "uniform_fan_in" | "normal_0.02" | "zeros" | "ones" | "external"
    fan_in: int = 0


def _init_array(spec: ParamSpec) -> np.ndarray:
    # per-name substream so adding a parameter never shifts another's values
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, zlib.crc32(spec.name.encode())]))
    if spec.scheme == "uniform_fan_in":
        bound = 1.0 / math.sqrt(spec.fan_in or spec.shape[0])
        return rng.uniform(-bound, bound, size=spec.shape)
    if spec.scheme == "normal_0.02":
        return rng.normal(0.0, 0.02, size=spec.shape)
    if spec.scheme == "zeros":
        return np.zeros(spec.shape)
    if spec.scheme == "ones":
        return np.ones(spec.shape)
    raise ValueError(f"unknown init scheme {spec.scheme!r}")


class ParamStore:
    """Flat map of dotted names to parameter tensors plus their init metadata."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._tensors: dict[str, Tensor] = {}
        self._specs: dict[str, ParamSpec] = {}

    def create(self, name: str, shape, scheme: str, fan_in: int | None = None) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"duplicate parameter name {name!r}")
        spec = ParamSpec(name, tuple(int(s) for s in shape), self.seed, scheme, fan_in or 0)
        t = Tensor(_init_array(spec), requires_grad=True, op="param")
        self._tensors[name] = t
        self._specs[name] = spec
        return t

    def add(self, name: str, data, scheme: str = "external") -> Tensor:
        if name in self._tensors:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=True, op="param")
        self._tensors[name] = t
        self._specs[name] = ParamSpec(name, t.shape, self.seed, scheme)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def spec(self, name: str) -> ParamSpec:
        return self._specs[name]

    def scope(self, prefix: str) -> "ParamScope":
        return ParamScope(self, prefix)

    def tensors(self, prefix: str = "") -> list[Tensor]:
        return [t for n, t in self._tensors.items() if n.startswith(prefix)]

    def set(self, name: str, data) -> None:
        t = self._tensors[name]
        arr = np.array(data, dtype=np.float64)
        if arr.shape != t.shape:
            raise ValueError(f"{name}: shape {arr.shape} != {t.shape}")
        t.data = arr

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def num_params(self) -> int:
        return int(np.sum([t.data.size for t in self._tensors.values()]))


class ParamScope:
    def __init__(self, store: ParamStore, prefix: str):
        self.store = store
        self.prefix = prefix

    def __getitem__(self, name: str) -> Tensor:
        return self.store[f"{self.prefix}.{name}"]

    def scope(self, name: str) -> "ParamScope":
        return ParamScope(self.store, f"{self.prefix}.{name}")


# -- layer constructors -----------------------------------------------------

def init_linear(store: ParamStore, name: str, d_in: int, d_out: int, bias: bool = True) -> None:
    store.create(f"{name}.w", (d_in, d_out), "uniform_fan_in")
    if bias:
        # biases take the bound of the weight they belong to
        store.create(f"{name}.b", (d_out,), "uniform_fan_in", fan_in=d_in)


def init_layer_norm(store: ParamStore, name: str, d: int) -> None:
    store.create(f"{name}.gamma", (d,), "ones")
    store.create(f"{name}.beta", (d,), "zeros")


def init_mlp_ln(store: ParamStore, name: str, d_in: int, d_hidden: int, d_out: int) -> None:
    """Linear -> LayerNorm -> GELU -> Linear."""
    init_linear(store, f"{name}.fc1", d_in, d_hidden)
    init_layer_norm(store, f"{name}.ln", d_hidden)
    init_linear(store, f"{name}.fc2", d_hidden, d_out)


def init_mlp(store: ParamStore, name: str, d_in: int, d_hidden: int, d_out: int) -> None:
    """Linear -> GELU -> Linear."""
    init_linear(store, f"{name}.fc1", d_in, d_hidden)
    init_linear(store, f"{name}.fc2", d_hidden, d_out)


def init_attention(store: ParamStore, name: str, d: int) -> None:
    init_linear(store, f"{name}.q", d, d)
    # no key bias: softmax is invariant to it, so it would carry an identically-zero gradient
    init_linear(store, f"{name}.k", d, d, bias=False)
    init_linear(store, f"{name}.v", d, d)
    init_linear(store, f"{name}.o", d, d)


# -- forward functions ------------------------------------------------------

def apply_linear(p: ParamScope, x: Tensor) -> Tensor:
    b = p.store[f"{p.prefix}.b"] if f"{p.prefix}.b" in p.store else None
    return ops.linear(x, p["w"], b)


def apply_mlp_ln(p: ParamScope, x: Tensor) -> Tensor:
    h = apply_linear(p.scope("fc1"), x)
    h = ops.gelu(ops.layer_norm(h, p["ln.gamma"], p["ln.beta"]))
    return apply_linear(p.scope("fc2"), h)


def apply_mlp(p: ParamScope, x: Tensor) -> Tensor:
    return apply_linear(p.scope("fc2"), ops.gelu(apply_linear(p.scope("fc1"), x)))


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, n, d = x.shape
    return ops.swapaxes(ops.reshape(x, (b, n, heads, d // heads)), 1, 2)


def multi_head_attention(p: ParamScope, q: Tensor, k: Tensor, v: Tensor, heads: int,
                         mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention with ``heads`` heads.

    Args:
        q: [B, Lq, D] queries.
        k, v: [B, Lk, D] keys and values.
        mask: optional boolean array broadcastable to [B, Lq, Lk]; False
            entries get logit ``MASK_FILL`` before the softmax.

    Returns:
        [B, Lq, D] tensor after the output projection.
    """
    if q.ndim != 3 or k.ndim != 3 or v.ndim != 3:
        raise ValueError("attention inputs must be rank 3 [B, L, D]")
    b, lq, d = q.shape
    if k.shape[0] != b or v.shape[0] != b or k.shape[2] != d or v.shape[2] != d or k.shape[1] != v.shape[1]:
        raise ValueError(f"attention shape mismatch: q{q.shape} k{k.shape} v{v.shape}")
    if d % heads:
        raise ValueError(f"width {d} not divisible by {heads} heads")
    dh = d // heads
    qh = _split_heads(apply_linear(p.scope("q"), q), heads)
    kh = _split_heads(apply_linear(p.scope("k"), k), heads)
    vh = _split_heads(apply_linear(p.scope("v"), v), heads)
    logits = ops.mul(ops.matmul(qh, ops.swapaxes(kh, -1, -2)), 1.0 / math.sqrt(dh))
    if mask is not None:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), (b, lq, k.shape[1]))
        logits = ops.add(logits, np.where(m, 0.0, ops.MASK_FILL)[:, None, :, :])
    attn = ops.softmax(logits, axis=-1)
    out = ops.matmul(attn, vh)  # [B, H, Lq, dh]
    out = ops.reshape(ops.swapaxes(out, 1, 2), (b, lq, d))
    return apply_linear(p.scope("o"), out)


def encoder_layer(p: ParamScope, x: Tensor, heads: int) -> Tensor:
    """Pre-LayerNorm transformer block: attention then feed-forward, each with a residual."""
    h = ops.layer_norm(x, p["ln1.gamma"], p["ln1.beta"])
    x = ops.add(x, multi_head_attention(p.scope("attn"), h, h, h, heads))
    h = ops.layer_norm(x, p["ln2.gamma"], p["ln2.beta"])
    return ops.add(x, apply_mlp(p.scope("ffn"), h))


def init_encoder_layer(store: ParamStore, name: str, d: int, ffn_mult: int) -> None:
    init_layer_norm(store, f"{name}.ln1", d)
    init_attention(store, f"{name}.attn", d)
    init_layer_norm(store, f"{name}.ln2", d)
    init_mlp(store, f"{name}.ffn", d, ffn_mult * d, d)
