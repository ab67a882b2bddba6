"""End-to-end forward pass: scene -> lifted features -> fused instance tokens -> scene tokens."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import isr, mcmf
from .projection import (
    CROP_RATIO,
    DELTA_OCC,
    LiftedFeatures,
    lift_instance_features,
    select_top_k_views,
    visibility_report,
)
from .scene import Scene, instance_centroids
from .stubs import HashEmbedder, HashPointEncoder, OracleSegmenter
from .tensor import no_grad
from .tensor.container import dumps_named, load_named
from .tensor.nn import ParamStore

REPORT_SCHEMA_VERSION = 1

# token cost per instance of the fusion schemes the efficiency comparison uses
BASELINE_TOKENS_PER_INSTANCE = {
    "separate_encoding": 6,
    "parallel_projection": 3,
    "cross_attention": 2,
}


@dataclass(frozen=True)
class PipelineConfig:
    K: int = 5
    L: int = 3
    k_sample: int = 5
    D: int = 48
    D3d: int = 24
    D2d: int = 32
    heads: int = 4
    aggregation: str = "cls_token"
    spatial_mode: str = "full"
    aggregate_over: str = "self"
    n_scene_tokens: int = 1
    isr_layers: int = 2
    isr_heads: int = 4
    data_seed: int = 0
    param_seed: int = 0
    delta_occ: float = DELTA_OCC
    crop_ratio: float = CROP_RATIO

    def __post_init__(self):
        for name in ("K", "L", "k_sample", "D", "D3d", "D2d", "heads", "n_scene_tokens", "isr_heads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.delta_occ <= 0 or self.crop_ratio <= 0:
            raise ValueError("delta_occ and crop_ratio must be positive")
        self.mcmf_config()
        self.isr_config()

    def mcmf_config(self) -> mcmf.McmfConfig:
        return mcmf.McmfConfig(self.D, self.D3d, self.D2d, self.K, self.heads, self.aggregation)

    def isr_config(self) -> isr.IsrConfig:
        return isr.IsrConfig(D=self.D, heads=self.isr_heads, layers=self.isr_layers,
                             spatial_mode=self.spatial_mode, aggregate_over=self.aggregate_over,
                             n_scene_tokens=self.n_scene_tokens)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TokenBundle:
    instance_ids: list[int]
    instance_tokens: np.ndarray  # [N, D]
    scene_tokens: np.ndarray  # [n_scene_tokens, D]

    @property
    def token_count(self) -> int:
        return len(self.instance_tokens) + len(self.scene_tokens)

    def dumps(self) -> str:
        return dumps_named({"instance_tokens": self.instance_tokens, "scene_tokens": self.scene_tokens},
                           "token_bundle", {"instance_ids": self.instance_ids, "token_count": self.token_count})

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "TokenBundle":
        tensors, meta = load_named(path, "token_bundle")
        b = cls(list(meta["instance_ids"]), tensors["instance_tokens"], tensors["scene_tokens"])
        if meta.get("token_count") != b.token_count:
            raise ValueError(f"{path}: token_count {meta.get('token_count')} != {b.token_count}")
        return b


def token_accounting(n_instances: int, n_scene_tokens: int) -> dict:
    acc = {"instance_tokens": n_instances, "scene_tokens": n_scene_tokens,
           "total": n_instances + n_scene_tokens}
    acc["baselines"] = {k: v * n_instances for k, v in BASELINE_TOKENS_PER_INSTANCE.items()}
    return acc


@dataclass
class RunReport:
    schema_version: int
    config: dict
    shapes: dict
    tokens: dict
    views: dict
    unobserved_instances: list[int]
    timings: dict
    checks: dict
    trace: dict = field(default_factory=dict, repr=False)  # arrays for figures; not serialised

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trace")
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def init_params(cfg: PipelineConfig) -> ParamStore:
    store = ParamStore(cfg.param_seed)
    mcmf.init_mcmf_params(store, cfg.mcmf_config())
    isr.init_isr_params(store, cfg.isr_config())
    return store


@dataclass
class PipelineInputs:
    reports: dict
    selections: dict
    lifted: LiftedFeatures
    o3d: np.ndarray  # [1, N, D3d]
    centroids: np.ndarray  # [N, 3]
    seconds: float


def prepare_inputs(scene: Scene, cfg: PipelineConfig, segmenter=None, embedder=None,
                   point_encoder=None) -> PipelineInputs:
    """Visibility, view selection, 2D lifting and the 3D stub encoder."""
    segmenter = segmenter or OracleSegmenter(scene, cfg.delta_occ)
    embedder = embedder or HashEmbedder(cfg.D2d)
    point_encoder = point_encoder or HashPointEncoder(cfg.D3d)
    t0 = time.perf_counter()
    reports = {i: visibility_report(scene, i, cfg.delta_occ) for i in scene.instance_ids}
    selections = {i: select_top_k_views(scene, i, cfg.K, report=reports[i]) for i in scene.instance_ids}
    lifted = lift_instance_features(scene, selections, segmenter, embedder, cfg.K, cfg.L, cfg.k_sample,
                                    cfg.data_seed, cfg.crop_ratio, cfg.delta_occ, reports)
    o3d = point_encoder.encode_scene(scene)
    return PipelineInputs(reports, selections, lifted, o3d, instance_centroids(scene), time.perf_counter() - t0)


def run_pipeline(scene: Scene, cfg: PipelineConfig, params: ParamStore | None = None,
                 segmenter=None, embedder=None, point_encoder=None) -> tuple[TokenBundle, RunReport]:
    """Full forward pass on one scene; unobserved instances are reported, not fatal."""
    params = params if params is not None else init_params(cfg)
    inputs = prepare_inputs(scene, cfg, segmenter, embedder, point_encoder)
    reports, selections, lifted, o3d = inputs.reports, inputs.selections, inputs.lifted, inputs.o3d
    centroids = inputs.centroids
    timings = {"lift": inputs.seconds}

    t0 = time.perf_counter()
    with no_grad():
        fused = mcmf.mcmf_forward(o3d, lifted.features, lifted.validity, params, cfg.mcmf_config(),
                                  view_frames=lifted.view_frames, trace=True)
        timings["mcmf"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        rel = isr.isr_forward(fused.instance_tokens, centroids, params, cfg.isr_config())
    timings["isr"] = time.perf_counter() - t0

    bundle = TokenBundle(scene.instance_ids, rel.instance_tokens.data.copy(), rel.scene_tokens.data.copy())
    n = len(scene.instance_ids)
    s = rel.features.s
    off = ~np.eye(n, dtype=bool)
    checks = {
        "token_identity": bundle.token_count == n + cfg.n_scene_tokens,
        "finite": bool(np.all(np.isfinite(bundle.instance_tokens)) and np.all(np.isfinite(bundle.scene_tokens))),
        "distance_symmetric": bool(np.allclose(s[..., 4], s[..., 4].T, rtol=0, atol=1e-12)),
        "sin_v_antisymmetric": bool(np.allclose(s[..., 2][off], -s[..., 2].T[off], rtol=0, atol=1e-12)),
        "passthrough_exact": bool(np.array_equal(fused.instance_tokens.data[fused.no_valid_view],
                                                 fused.trace["o3d_self"].data[0][fused.no_valid_view])),
    }
    report = RunReport(
        schema_version=REPORT_SCHEMA_VERSION,
        config=cfg.to_dict(),
        shapes={
            "o3d": list(o3d.shape),
            "o2d": list(lifted.features.shape),
            "validity": list(lifted.validity.shape),
            "instance_tokens": list(bundle.instance_tokens.shape),
            "scene_tokens": list(bundle.scene_tokens.shape),
        },
        tokens=token_accounting(n, cfg.n_scene_tokens),
        views={str(i): {"frames": list(sel.frames), "counts": list(sel.counts), "status": sel.status}
               for i, sel in selections.items()},
        unobserved_instances=[i for i, sel in selections.items() if not sel.observed],
        timings=timings,
        checks=checks,
        trace={"omega": rel.omega.data, "centroids": centroids, "validity": lifted.validity,
               "visible_counts": {i: reports[i].counts() for i in scene.instance_ids}},
    )
    return bundle, report
