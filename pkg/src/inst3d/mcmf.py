"""Multi-view cross-modal fusion: 2D multi-view semantics injected into 3D instance features.

Data flow for N instances with K view slots each::

    o3d [1, N, D3d] --MLP--> o3d' --(+ self-attn)--> o3d''  (queries)
    o2d [K, N, D2d] --MLP--> o2d' --CLS aggregation per view--> keys [K, N, D]
    o_f = cross-attn(o3d'', keys) over each instance's own K view tokens
    O_I = o_f + o3d''

A "view" for CLS aggregation is one camera frame: every valid slot whose
instance selected that frame contributes a token, and the frame's updated
CLS token fills all of those slots. Without frame ids each valid slot is
treated as its own view.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, as_tensor, ops
from .tensor.nn import (
    ParamStore,
    apply_mlp_ln,
    init_attention,
    init_mlp_ln,
    multi_head_attention,
)

AGGREGATIONS = ("cls_token", "max_pool")


@dataclass(frozen=True)
class McmfConfig:
    D: int = 48
    D3d: int = 24
    D2d: int = 32
    K: int = 5
    heads: int = 4
    aggregation: str = "cls_token"

    def __post_init__(self):
        if self.D % self.heads:
            raise ValueError(f"D={self.D} not divisible by heads={self.heads}")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")


@dataclass
class McmfOutput:
    instance_tokens: Tensor  # [N, D]
    no_valid_view: np.ndarray  # [N] bool, instances that skipped injection
    trace: dict[str, Tensor] = field(default_factory=dict)


def init_mcmf_params(store: ParamStore, cfg: McmfConfig, prefix: str = "mcmf") -> ParamStore:
    init_mlp_ln(store, f"{prefix}.proj3d", cfg.D3d, cfg.D, cfg.D)
    init_mlp_ln(store, f"{prefix}.proj2d", cfg.D2d, cfg.D, cfg.D)
    store.create(f"{prefix}.cls", (cfg.D,), "normal_0.02")
    init_attention(store, f"{prefix}.view_attn", cfg.D)
    init_attention(store, f"{prefix}.inst_attn", cfg.D)
    init_attention(store, f"{prefix}.cross_attn", cfg.D)
    return store


def project_features(o3d, o2d, store: ParamStore, prefix: str = "mcmf") -> tuple[Tensor, Tensor]:
    """Separate LayerNorm-GELU MLPs map both branches to width D."""
    o3d, o2d = as_tensor(o3d), as_tensor(o2d)
    if o3d.ndim != 3 or o3d.shape[0] != 1 or o2d.ndim != 3 or o2d.shape[1] != o3d.shape[1]:
        raise ValueError(f"expected o3d [1, N, D3d] and o2d [K, N, D2d], got {o3d.shape} and {o2d.shape}")
    return apply_mlp_ln(store.scope(f"{prefix}.proj3d"), o3d), apply_mlp_ln(store.scope(f"{prefix}.proj2d"), o2d)


def instance_self_attention(o3d: Tensor, store: ParamStore, heads: int, prefix: str = "mcmf") -> Tensor:
    return ops.add(o3d, multi_head_attention(store.scope(f"{prefix}.inst_attn"), o3d, o3d, o3d, heads))


def _aggregate_groups(tokens: Tensor, members: np.ndarray, counts: np.ndarray, store: ParamStore,
                      heads: int, aggregation: str, prefix: str) -> Tensor:
    """Aggregate padded token groups.

    Args:
        tokens: [R, D] token rows.
        members: [G, M] row indices per group, padded by repeating the first member.
        counts: [G] real member counts.

    Returns:
        [G, D] one summary vector per group.
    """
    grouped = ops.gather_rows(tokens, members)  # [G, M, D]
    g, m = members.shape
    if aggregation == "max_pool":
        # padding repeats a real member, so it never changes the max
        return ops.max_pool(grouped, axis=1)
    d = tokens.shape[1]
    cls = ops.mul(np.ones((g, 1, 1)), ops.reshape(store[f"{prefix}.cls"], (1, 1, d)))
    seq = ops.concat([cls, grouped], axis=1)  # [G, M + 1, D]
    key_ok = np.concatenate([np.ones((g, 1), dtype=bool), np.arange(m)[None, :] < counts[:, None]], axis=1)
    out = multi_head_attention(store.scope(f"{prefix}.view_attn"), seq, seq, seq, heads, mask=key_ok[:, None, :])
    return ops.take(out, 0, axis=1)


def aggregate_view(view_tokens, store: ParamStore, heads: int, aggregation: str = "cls_token",
                   prefix: str = "mcmf") -> Tensor:
    """Summarise one view's [M, D] instance tokens into a single D-vector.

    With ``cls_token`` the shared learnable CLS vector is prepended, the M+1
    tokens go through self-attention, and the updated CLS token is returned.
    With ``max_pool`` the tokens are max-pooled elementwise.
    """
    view_tokens = as_tensor(view_tokens)
    m = view_tokens.shape[0]
    if m < 1:
        raise ValueError("a view needs at least one token")
    out = _aggregate_groups(view_tokens, np.arange(m)[None, :], np.array([m]), store, heads, aggregation, prefix)
    return ops.reshape(out, (view_tokens.shape[1],))


def view_groups(validity: np.ndarray, view_frames: np.ndarray | None = None) -> list[list[tuple[int, int]]]:
    """Group valid (slot, instance) pairs by the frame they came from.

    Groups are ordered by frame id; members by (slot, instance).
    """
    k, n = validity.shape
    slots = [(s, i) for s in range(k) for i in range(n) if validity[s, i]]
    if view_frames is None:
        return [[si] for si in slots]
    by_frame: dict[int, list[tuple[int, int]]] = {}
    for s, i in slots:
        by_frame.setdefault(int(view_frames[s, i]), []).append((s, i))
    return [by_frame[f] for f in sorted(by_frame)]


def build_multiview_keys(o2d_proj, validity: np.ndarray, store: ParamStore, cfg: McmfConfig,
                         view_frames: np.ndarray | None = None, prefix: str = "mcmf") -> Tensor:
    """Per-instance lists of aggregated view tokens, arranged [K, N, D].

    Slot (k, i) holds the summary token of the view behind instance i's k-th
    selected frame; invalid slots hold zeros.
    """
    o2d_proj = as_tensor(o2d_proj)
    k, n, d = o2d_proj.shape
    validity = np.asarray(validity, dtype=bool)
    if validity.shape != (k, n):
        raise ValueError(f"validity shape {validity.shape} does not match features {(k, n)}")
    groups = view_groups(validity, view_frames)
    if not groups:
        return Tensor(np.zeros((k, n, d)))
    slot_group = np.full((k, n), len(groups), dtype=np.int64)  # index of the zero row
    width = max(len(g) for g in groups)
    members = np.empty((len(groups), width), dtype=np.int64)
    counts = np.empty(len(groups), dtype=np.int64)
    for gi, grp in enumerate(groups):
        rows = [s * n + i for s, i in grp]
        members[gi] = rows + [rows[0]] * (width - len(rows))
        counts[gi] = len(rows)
        for s, i in grp:
            slot_group[s, i] = gi
    flat = ops.reshape(o2d_proj, (k * n, d))
    summaries = _aggregate_groups(flat, members, counts, store, cfg.heads, cfg.aggregation, prefix)
    table = ops.concat([summaries, np.zeros((1, d))], axis=0)
    return ops.gather_rows(table, slot_group)


def cross_modal_inject(o3d_q, keys, validity: np.ndarray, store: ParamStore, heads: int,
                       prefix: str = "mcmf") -> tuple[Tensor, np.ndarray]:
    """Each instance query attends over its own K view tokens; invalid slots are masked.

    Returns the injected features [1, N, D] and the mask of instances that
    had no valid view (their output rows are exactly zero).
    """
    o3d_q, keys = as_tensor(o3d_q), as_tensor(keys)
    k, n, d = keys.shape
    if o3d_q.shape != (1, n, d):
        raise ValueError(f"query shape {o3d_q.shape} does not match keys {keys.shape}")
    validity = np.asarray(validity, dtype=bool)
    q = ops.reshape(o3d_q, (n, 1, d))
    kv = ops.swapaxes(keys, 0, 1)  # [N, K, D]
    out = multi_head_attention(store.scope(f"{prefix}.cross_attn"), q, kv, kv, heads,
                               mask=validity.T[:, None, :])
    empty = ~validity.any(axis=0)
    out = ops.mul(out, (~empty).astype(np.float64)[:, None, None])
    return ops.reshape(out, (1, n, d)), empty


def mcmf_forward(o3d, o2d, validity, store: ParamStore, cfg: McmfConfig,
                 view_frames: np.ndarray | None = None, trace: bool = False,
                 prefix: str = "mcmf") -> McmfOutput:
    """Fuse 3D instance features with their multi-view 2D features into [N, D] tokens."""
    o3d, o2d = as_tensor(o3d), as_tensor(o2d)
    if o3d.shape[2] != cfg.D3d or o2d.shape[2] != cfg.D2d or o2d.shape[0] != cfg.K:
        raise ValueError(f"inputs {o3d.shape}, {o2d.shape} do not match config {cfg}")
    validity = np.asarray(validity, dtype=bool)
    p3, p2 = project_features(o3d, o2d, store, prefix)
    q = instance_self_attention(p3, store, cfg.heads, prefix)
    keys = build_multiview_keys(p2, validity, store, cfg, view_frames, prefix)
    o_f, empty = cross_modal_inject(q, keys, validity, store, cfg.heads, prefix)
    n = o3d.shape[1]
    tokens = ops.reshape(ops.add(o_f, q), (n, cfg.D))
    tr = {"o3d_proj": p3, "o3d_self": q, "o2d_proj": p2, "keys": keys, "o_f": o_f} if trace else {}
    return McmfOutput(tokens, empty, tr)
