"""Instance spatial relations: pairwise geometry, spatially conditioned attention, scene tokens.

Geometry (distances, angles, position embeddings) is computed in numpy from
the instance centroids and treated as constant input; gradients flow through
the learned parts (W_P, the scene encoder and the scene MLP heads) and into
the instance tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, as_tensor, ops
from .tensor.nn import ParamStore, apply_mlp, encoder_layer, init_encoder_layer, init_mlp

SPATIAL_MODES = ("full", "distance_only", "orientation_only")
AGGREGATE_OVER = ("self", "others")
COINCIDENT_EPS = 1e-9


@dataclass(frozen=True)
class IsrConfig:
    D: int = 48
    heads: int = 4
    layers: int = 2
    ffn_mult: int = 2
    pe_base: float = 10000.0
    spatial_mode: str = "full"
    aggregate_over: str = "self"
    n_scene_tokens: int = 1

    def __post_init__(self):
        if self.D % 6:
            raise ValueError(f"D={self.D} must be divisible by 6 for the per-axis sin/cos embedding")
        if self.D % self.heads:
            raise ValueError(f"D={self.D} not divisible by heads={self.heads}")
        if self.spatial_mode not in SPATIAL_MODES:
            raise ValueError(f"spatial_mode must be one of {SPATIAL_MODES}")
        if self.aggregate_over not in AGGREGATE_OVER:
            raise ValueError(f"aggregate_over must be one of {AGGREGATE_OVER}")
        if self.n_scene_tokens < 1 or self.layers < 0:
            raise ValueError("n_scene_tokens must be >= 1 and layers >= 0")


@dataclass(frozen=True)
class PairGeometry:
    d: np.ndarray  # [N, N]
    theta_h: np.ndarray  # [N, N]
    theta_v: np.ndarray  # [N, N]
    coincident: np.ndarray  # [N, N] bool, off-diagonal pairs closer than COINCIDENT_EPS


@dataclass(frozen=True)
class SpatialFeatures:
    s: np.ndarray  # [N, N, 5]: sin h, cos h, sin v, cos v, d
    mode: str = "full"


@dataclass
class IsrOutput:
    instance_tokens: Tensor  # [N, D], passed through unchanged
    scene_tokens: Tensor  # [n_scene_tokens, D]
    relation_features: Tensor  # [N, D]
    omega: Tensor  # [N, N]
    geometry: PairGeometry
    features: SpatialFeatures


def init_isr_params(store: ParamStore, cfg: IsrConfig, prefix: str = "isr") -> ParamStore:
    store.create(f"{prefix}.W_P", (cfg.D, 5), "uniform_fan_in")
    for layer in range(cfg.layers):
        init_encoder_layer(store, f"{prefix}.encoder.{layer}", cfg.D, cfg.ffn_mult)
    for head in range(cfg.n_scene_tokens):
        init_mlp(store, f"{prefix}.scene_mlp.{head}", cfg.D, cfg.D, cfg.D)
    return store


def pair_geometry(centroids) -> PairGeometry:
    """Distances and horizontal/vertical angles from instance i to instance j.

    theta_h = atan2(y_j - y_i, x_j - x_i) (0 when the horizontal offset is
    zero), theta_v = arcsin((z_j - z_i) / d_ij). The diagonal and coincident
    pairs get zero angles.
    """
    c = np.asarray(centroids, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != 3 or len(c) < 1:
        raise ValueError(f"centroids must be [N, 3] with N >= 1, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("centroids must be finite")
    delta = c[None, :, :] - c[:, None, :]  # [i, j] = C_j - C_i
    d = np.sqrt((delta ** 2).sum(axis=-1))
    n = len(c)
    off = ~np.eye(n, dtype=bool)
    coincident = off & (d < COINCIDENT_EPS)
    far = off & ~coincident
    flat = (delta[..., 0] == 0) & (delta[..., 1] == 0)
    theta_h = np.where(far & ~flat, np.arctan2(delta[..., 1], delta[..., 0]), 0.0)
    ratio = np.divide(delta[..., 2], d, out=np.zeros_like(d), where=far)
    theta_v = np.where(far, np.arcsin(np.clip(ratio, -1.0, 1.0)), 0.0)
    d = np.where(off, d, 0.0)
    return PairGeometry(d, theta_h, theta_v, coincident)


def spatial_features(geom: PairGeometry, mode: str = "full") -> SpatialFeatures:
    """Five pair channels [sin h, cos h, sin v, cos v, d]; ablation modes zero one family."""
    if mode not in SPATIAL_MODES:
        raise ValueError(f"unknown spatial mode {mode!r}")
    s = np.stack([np.sin(geom.theta_h), np.cos(geom.theta_h),
                  np.sin(geom.theta_v), np.cos(geom.theta_v), geom.d], axis=-1)
    if mode == "distance_only":
        s[..., :4] = 0.0
    elif mode == "orientation_only":
        s[..., 4] = 0.0
    return SpatialFeatures(s, mode)


def position_embed(centroids, dim: int, base: float = 10000.0) -> np.ndarray:
    """Sinusoidal embedding of each coordinate axis in D/3 channels, concatenated x|y|z.

    Within an axis chunk, channel 2m is sin(c / base^(2m / (D/3))) and
    channel 2m+1 the matching cos.
    """
    if dim % 6:
        raise ValueError(f"embedding width {dim} must be divisible by 6")
    c = np.asarray(centroids, dtype=np.float64)
    per_axis = dim // 3
    freqs = base ** (-np.arange(0, per_axis, 2) / per_axis)  # [per_axis / 2]
    angles = c[:, :, None] * freqs[None, None, :]  # [N, 3, per_axis / 2]
    chunks = np.empty((len(c), 3, per_axis))
    chunks[..., 0::2] = np.sin(angles)
    chunks[..., 1::2] = np.cos(angles)
    return chunks.reshape(len(c), dim)


def spatial_conditioned_weights(pos_embed, tokens, w_p) -> Tensor:
    """l_i = W_P^T (P_i + O_I,i), one 5-vector per instance; no bias."""
    tokens, w_p = as_tensor(tokens), as_tensor(w_p)
    pos_embed = as_tensor(pos_embed)
    if pos_embed.shape != tokens.shape or w_p.shape != (tokens.shape[1], 5):
        raise ValueError(f"shape mismatch: P{pos_embed.shape} O{tokens.shape} W_P{w_p.shape}")
    return ops.matmul(ops.add(pos_embed, tokens), w_p)


def attention_map(weights, feats: SpatialFeatures) -> Tensor:
    """omega_ij = sum_c l_i[c] * s_ij[c] * l_j[c]; unnormalised."""
    weights = as_tensor(weights)
    n = weights.shape[0]
    if feats.s.shape != (n, n, 5) or weights.shape != (n, 5):
        raise ValueError(f"shape mismatch: l{weights.shape} s{feats.s.shape}")
    li = ops.reshape(weights, (n, 1, 5))
    lj = ops.reshape(weights, (1, n, 5))
    return ops.sum(ops.mul(ops.mul(li, feats.s), lj), axis=-1)


def relation_aggregate(omega, tokens, aggregate_over: str = "self") -> Tensor:
    """Relation features F [N, D].

    ``self``: F_i = (sum_j omega_ij) * O_I,i, the printed form in which the
    sum runs over j but the token index stays i. ``others``: F_i =
    sum_j omega_ij * O_I,j, the usual attention read.
    """
    omega, tokens = as_tensor(omega), as_tensor(tokens)
    if aggregate_over == "self":
        return ops.mul(ops.sum(omega, axis=1, keepdims=True), tokens)
    if aggregate_over == "others":
        return ops.matmul(omega, tokens)
    raise ValueError(f"unknown aggregate_over {aggregate_over!r}")


def scene_project(relation_feats, store: ParamStore, cfg: IsrConfig, prefix: str = "isr") -> Tensor:
    """Encoder over the N tokens, max-pool over instances, then one MLP head per scene token."""
    f = as_tensor(relation_feats)
    n, d = f.shape
    x = ops.reshape(f, (1, n, d))
    for layer in range(cfg.layers):
        x = encoder_layer(store.scope(f"{prefix}.encoder.{layer}"), x, cfg.heads)
    pooled = ops.max_pool(ops.reshape(x, (n, d)), axis=0)
    heads = [apply_mlp(store.scope(f"{prefix}.scene_mlp.{h}"), pooled) for h in range(cfg.n_scene_tokens)]
    return ops.stack(heads, axis=0)


def isr_forward(tokens, centroids, store: ParamStore, cfg: IsrConfig, prefix: str = "isr",
                pair_centroids=None) -> IsrOutput:
    """Relation-aware scene tokens from instance tokens [N, D] and centroids [N, 3].

    ``pair_centroids`` (probe use only) feeds the pairwise geometry from a
    different set of centroids while the position embedding keeps ``centroids``.
    """
    tokens = as_tensor(tokens)
    c = np.asarray(centroids, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape != (len(c), cfg.D):
        raise ValueError(f"tokens {tokens.shape} do not match {len(c)} centroids and D={cfg.D}")
    geom = pair_geometry(c if pair_centroids is None else pair_centroids)
    feats = spatial_features(geom, cfg.spatial_mode)
    pe = position_embed(c, cfg.D, cfg.pe_base)
    weights = spatial_conditioned_weights(pe, tokens, store[f"{prefix}.W_P"])
    omega = attention_map(weights, feats)
    rel = relation_aggregate(omega, tokens, cfg.aggregate_over)
    scene = scene_project(rel, store, cfg, prefix)
    return IsrOutput(tokens, scene, rel, omega, geom, feats)
