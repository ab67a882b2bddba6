"""Ablation runner: fusion baselines and module switches compared by output-space probes.

A grid document looks like::

    {
      "scenes": [{"seed": 0, "instances": 4, "frames": 8}],
      "base": {"D": 48},
      "variants": [
        {"name": "mcmf"},
        {"name": "concat", "fusion": "concat"},
        {"name": "max_pool", "config": {"aggregation": "max_pool"}},
        {"name": "dist_only", "config": {"spatial_mode": "distance_only"}}
      ]
    }

Every variant runs on the same scenes with the same parameter seed. The
metrics are geometry-level probes of the produced tokens, not task accuracy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import isr, mcmf
from .pipeline import PipelineConfig, PipelineInputs, TokenBundle, init_params, prepare_inputs
from .synth import synth_scene
from .tensor import Tensor, no_grad, ops
from .tensor.nn import ParamStore, apply_mlp_ln, init_mlp_ln

FUSIONS = ("mcmf", "concat", "parallel", "cross_attention")
PROBE_ANGLE = 0.7  # radians, z-rotation applied to the pair geometry in the sensitivity probe
METRIC_COLUMNS = ("token_norm", "cosine_mean", "cosine_spread", "scene_norm", "rotation_sensitivity",
                  "token_count")


class AblationError(ValueError):
    pass


@dataclass(frozen=True)
class Variant:
    name: str
    fusion: str = "mcmf"
    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    instances: int
    frames: int


@dataclass
class Grid:
    scenes: list[SceneSpec]
    variants: list[Variant]
    base: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "Grid":
        unknown = set(doc) - {"scenes", "variants", "base"}
        if unknown:
            raise AblationError(f"unknown grid keys: {sorted(unknown)}")
        try:
            scenes = [SceneSpec(int(s["seed"]), int(s["instances"]), int(s["frames"]))
                      for s in doc.get("scenes", [{"seed": 0, "instances": 4, "frames": 8}])]
            variants = []
            for v in doc["variants"]:
                fusion = v.get("fusion", "mcmf")
                if fusion not in FUSIONS:
                    raise AblationError(f"variant {v.get('name')!r}: unknown fusion {fusion!r}, "
                                        f"expected one of {FUSIONS}")
                variants.append(Variant(str(v["name"]), fusion, dict(v.get("config", {}))))
        except KeyError as exc:
            raise AblationError(f"grid entry missing field {exc}") from None
        if not variants:
            raise AblationError("grid has no variants")
        names = [v.name for v in variants]
        if len(set(names)) != len(names):
            raise AblationError(f"duplicate variant names in {names}")
        return cls(scenes, variants, dict(doc.get("base", {})))

    @classmethod
    def load(cls, path) -> "Grid":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def config_for(self, variant: Variant) -> PipelineConfig:
        return PipelineConfig.from_dict({**self.base, **variant.overrides})


@dataclass
class AblationRow:
    variant: str
    fusion: str
    scene_seed: int
    n_instances: int
    metrics: dict
    bundle: TokenBundle = field(repr=False, default=None)

    def flat(self) -> dict:
        return {"variant": self.variant, "fusion": self.fusion, "scene_seed": self.scene_seed,
                "n_instances": self.n_instances, **self.metrics}


def init_baseline_params(store: ParamStore, cfg: PipelineConfig, prefix: str = "baseline") -> ParamStore:
    # parameter init is keyed by name, so adding these leaves the shared weights untouched
    init_mlp_ln(store, f"{prefix}.concat", cfg.D3d + cfg.D2d, cfg.D, cfg.D)
    return store


def mean_view_feature(features: np.ndarray, validity: np.ndarray) -> np.ndarray:
    """Average of each instance's valid view features [K, N, C] -> [1, N, C]; zeros when none."""
    w = validity.astype(np.float64)
    total = (features * w[..., None]).sum(axis=0)
    n = w.sum(axis=0)[:, None]
    return np.divide(total, n, out=np.zeros_like(total), where=n > 0)[None]


def fuse(fusion: str, inputs: PipelineInputs, store: ParamStore, cfg: PipelineConfig) -> Tensor:
    """Instance tokens [N, D] from one of the fusion schemes."""
    mc = cfg.mcmf_config()
    lifted = inputs.lifted
    n = inputs.o3d.shape[1]
    if fusion == "mcmf":
        return mcmf.mcmf_forward(inputs.o3d, lifted.features, lifted.validity, store, mc,
                                 view_frames=lifted.view_frames).instance_tokens
    mean2d = mean_view_feature(lifted.features, lifted.validity)
    if fusion == "concat":
        joined = np.concatenate([inputs.o3d, mean2d], axis=-1)
        out = apply_mlp_ln(store.scope("baseline.concat"), Tensor(joined))
    elif fusion == "parallel":
        p3, p2 = mcmf.project_features(inputs.o3d, mean2d, store)
        out = ops.add(p3, p2)
    elif fusion == "cross_attention":
        # no view aggregation: the projected per-slot features are the keys directly
        p3, p2 = mcmf.project_features(inputs.o3d, lifted.features, store)
        q = mcmf.instance_self_attention(p3, store, mc.heads)
        o_f, _ = mcmf.cross_modal_inject(q, p2, lifted.validity, store, mc.heads)
        out = ops.add(o_f, q)
    else:
        raise AblationError(f"unknown fusion {fusion!r}")
    return ops.reshape(out, (n, cfg.D))


def rotate_z(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    centre = points.mean(axis=0)
    return (points - centre) @ rot.T + centre


def token_metrics(tokens: np.ndarray) -> dict:
    norms = np.linalg.norm(tokens, axis=1)
    unit = tokens / np.maximum(norms, 1e-12)[:, None]
    cos = unit @ unit.T
    off = cos[~np.eye(len(tokens), dtype=bool)]
    return {
        "token_norm": float(norms.mean()),
        "cosine_mean": float(off.mean()) if off.size else 0.0,
        "cosine_spread": float(off.std()) if off.size else 0.0,
    }


def run_variant(scene, variant: Variant, cfg: PipelineConfig, probe_angle: float = PROBE_ANGLE):
    """One variant on one scene; returns the bundle and its metric dict."""
    store = init_baseline_params(init_params(cfg), cfg)
    inputs = prepare_inputs(scene, cfg)
    icfg = cfg.isr_config()
    with no_grad():
        tokens = fuse(variant.fusion, inputs, store, cfg)
        rel = isr.isr_forward(tokens, inputs.centroids, store, icfg)
        turned = isr.isr_forward(tokens, inputs.centroids, store, icfg,
                                 pair_centroids=rotate_z(inputs.centroids, probe_angle))
    bundle = TokenBundle(scene.instance_ids, rel.instance_tokens.data.copy(), rel.scene_tokens.data.copy())
    scene_norm = float(np.linalg.norm(bundle.scene_tokens))
    delta = float(np.linalg.norm(turned.scene_tokens.data - bundle.scene_tokens))
    metrics = token_metrics(bundle.instance_tokens)
    metrics.update(scene_norm=scene_norm, rotation_sensitivity=delta / max(scene_norm, 1e-12),
                   token_count=bundle.token_count)
    return bundle, metrics


def run_grid(grid: Grid) -> list[AblationRow]:
    configs = {v.name: grid.config_for(v) for v in grid.variants}  # validate every variant up front
    scenes = [synth_scene(s.seed, s.instances, s.frames) for s in grid.scenes]
    rows = []
    for spec, scene in zip(grid.scenes, scenes):
        for v in grid.variants:
            bundle, metrics = run_variant(scene, v, configs[v.name])
            rows.append(AblationRow(v.name, v.fusion, spec.seed, spec.instances, metrics, bundle))
    return rows


def summarise(rows: list[AblationRow]) -> dict[str, dict]:
    """Per-variant means of each metric, in first-seen variant order."""
    out: dict[str, dict] = {}
    for name in dict.fromkeys(r.variant for r in rows):
        mine = [r.metrics for r in rows if r.variant == name]
        out[name] = {k: float(np.mean([m[k] for m in mine])) for k in METRIC_COLUMNS}
    return out


def write_outputs(rows: list[AblationRow], out_dir, figures: bool = True) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "ablation.csv", "json": out / "ablation.json"}
    flat = [r.flat() for r in rows]
    with open(paths["csv"], "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(flat[0]))
        writer.writeheader()
        writer.writerows(flat)
    summary = summarise(rows)
    paths["json"].write_text(json.dumps({"schema_version": 1, "rows": flat, "summary": summary},
                                        indent=2, sort_keys=True))
    if figures:
        from .plotting import plot_ablation

        paths["png"] = plot_ablation(summary, out / "ablation.png")
    return paths
