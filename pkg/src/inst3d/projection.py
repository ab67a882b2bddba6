"""Lifting instance proposals into posed RGB-D frames.

Covers pinhole projection, depth-buffer visibility, top-K view ranking,
seeded prompt sampling, multi-level crops, and the per-view 2D feature
extraction that produces the [K, N, D2d] feature block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scene import CameraFrame, Scene

Z_NEAR = 1e-4
DELTA_OCC = 0.05
CROP_RATIO = 0.5

Bbox = tuple[float, float, float, float]


class UnobservedInstanceError(ValueError):
    """An instance has no visible points in any frame."""


@dataclass(frozen=True)
class FrameVisibility:
    instance_id: int
    frame_id: int
    visible_count: int
    pixels: np.ndarray  # [M, 3] rows (u, v, z_cam) of visible points, u/v unrounded
    point_index: np.ndarray  # [M] scene point indices of the visible points

    def pixel_coords(self) -> np.ndarray:
        """Integer (u, v) pixel of each visible point."""
        return pixel_index(self.pixels[:, :2])


@dataclass(frozen=True)
class VisibilityReport:
    instance_id: int
    entries: tuple[FrameVisibility, ...]

    def counts(self) -> dict[int, int]:
        return {e.frame_id: e.visible_count for e in self.entries}

    def entry(self, frame_id: int) -> FrameVisibility:
        for e in self.entries:
            if e.frame_id == frame_id:
                return e
        raise KeyError(f"no visibility entry for frame {frame_id}")


@dataclass(frozen=True)
class ViewSelection:
    instance_id: int
    frames: tuple[int, ...]
    counts: tuple[int, ...]
    status: str = "ok"  # "ok" | "unobserved"

    @property
    def observed(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class PromptSample:
    instance_id: int
    frame_id: int
    pixels: np.ndarray  # [m, 2] integer (u, v)


@dataclass(frozen=True)
class Crop:
    frame_id: int
    level: int
    bbox: Bbox


@dataclass
class LiftedFeatures:
    """The 2D multi-view feature block and its bookkeeping.

    ``features[k, i]`` is the level-averaged embedding of instance i in its
    k-th selected view; empty slots are zero with ``validity[k, i] = False``
    and ``view_frames[k, i] = -1``.
    """

    features: np.ndarray  # [K, N, D2d]
    validity: np.ndarray  # [K, N] bool
    view_frames: np.ndarray  # [K, N] int
    instance_ids: list[int]
    crops: dict[tuple[int, int], list[Crop]] = field(default_factory=dict)
    confidences: dict[tuple[int, int], float] = field(default_factory=dict)


def pixel_index(uv: np.ndarray) -> np.ndarray:
    """Round-half-up to integer pixel indices."""
    return np.floor(np.asarray(uv) + 0.5).astype(np.int64)


def nearest_per_pixel(frame: CameraFrame, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-buffer: for each covered pixel, the index of the nearest in-frustum point.

    Returns (point indices, pixel [M, 2] integer (u, v), z_cam [M]).
    """
    uv, z, front = project_points(frame, points)
    pix = pixel_index(uv)
    ok = front & (pix[:, 0] >= 0) & (pix[:, 0] < frame.width) & (pix[:, 1] >= 0) & (pix[:, 1] < frame.height)
    idx = np.flatnonzero(ok)
    lin = pix[idx, 1] * frame.width + pix[idx, 0]
    order = np.lexsort((idx, z[idx], lin))
    _, first = np.unique(lin[order], return_index=True)
    win = idx[order[first]]
    return win, pix[win], z[win]


def project_point(frame: CameraFrame, p) -> tuple[float, float, float] | None:
    """Project one world point; ``None`` when it is not in front of the camera."""
    xc, yc, zc = (frame.pose @ np.append(np.asarray(p, dtype=np.float64), 1.0))[:3]
    if zc <= Z_NEAR:
        return None
    return frame.fx * xc / zc + frame.cx, frame.fy * yc / zc + frame.cy, float(zc)


def project_points(frame: CameraFrame, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised projection.

    Returns:
        uv [M, 2], z_cam [M], and a boolean mask of points with z_cam > Z_NEAR.
        uv rows for masked-out points are NaN-free but meaningless.
    """
    cam = points @ frame.pose[:3, :3].T + frame.pose[:3, 3]
    z = cam[:, 2]
    front = z > Z_NEAR
    zs = np.where(front, z, 1.0)
    uv = np.stack([frame.fx * cam[:, 0] / zs + frame.cx, frame.fy * cam[:, 1] / zs + frame.cy], axis=1)
    return uv, z, front


def _visible_mask(frame: CameraFrame, uv, z, front, delta_occ: float) -> tuple[np.ndarray, np.ndarray]:
    pix = pixel_index(uv)
    inside = front & (pix[:, 0] >= 0) & (pix[:, 0] < frame.width) & (pix[:, 1] >= 0) & (pix[:, 1] < frame.height)
    d = np.zeros(len(z))
    d[inside] = frame.depth[pix[inside, 1], pix[inside, 0]]
    ok = inside & ((d == 0) | (np.abs(z - d) <= delta_occ))
    return ok, pix


def visible_points(frame: CameraFrame, scene: Scene, instance_id: int,
                   delta_occ: float = DELTA_OCC) -> FrameVisibility:
    """Visible points of one instance in one frame.

    A point is visible when it lies in front of the camera, its rounded pixel
    falls inside the image, and the depth image either has no measurement
    there or agrees with the point's camera depth within ``delta_occ``.
    """
    idx = np.flatnonzero(scene.instance(instance_id).mask)
    uv, z, front = project_points(frame, scene.positions[idx])
    ok, _ = _visible_mask(frame, uv, z, front, delta_occ)
    pixels = np.column_stack([uv[ok], z[ok]])
    return FrameVisibility(instance_id, frame.id, int(ok.sum()), pixels, idx[ok])


def visibility_report(scene: Scene, instance_id: int, delta_occ: float = DELTA_OCC) -> VisibilityReport:
    return VisibilityReport(instance_id, tuple(visible_points(fr, scene, instance_id, delta_occ)
                                               for fr in scene.frames))


def rank_views(counts: Mapping[int, int], k: int) -> list[int]:
    """Frame ids with positive counts, by count descending then id ascending, truncated to k."""
    if k < 1:
        raise ValueError("K must be at least 1")
    ranked = sorted((fid for fid, c in counts.items() if c > 0), key=lambda fid: (-counts[fid], fid))
    return ranked[:k]


def select_top_k_views(scene: Scene, instance_id: int, k: int, delta_occ: float = DELTA_OCC,
                       report: VisibilityReport | None = None) -> ViewSelection:
    report = report or visibility_report(scene, instance_id, delta_occ)
    counts = report.counts()
    frames = rank_views(counts, k)
    status = "ok" if frames else "unobserved"
    return ViewSelection(instance_id, tuple(frames), tuple(counts[f] for f in frames), status)


def pair_rng(seed: int, instance_id: int, frame_id: int) -> np.random.Generator:
    """Independent stream per (instance, frame) so evaluation order never matters."""
    return np.random.default_rng(np.random.SeedSequence([seed, instance_id & 0xFFFFFFFF, frame_id & 0xFFFFFFFF]))


def sample_prompt_points(entry: FrameVisibility, k_sample: int, seed: int) -> PromptSample:
    """Uniformly pick up to ``k_sample`` distinct visible pixels without replacement."""
    if entry.visible_count < 1:
        raise UnobservedInstanceError(
            f"instance {entry.instance_id} has no visible points in frame {entry.frame_id}")
    pix = np.unique(entry.pixel_coords(), axis=0)
    m = min(k_sample, len(pix))
    pick = pair_rng(seed, entry.instance_id, entry.frame_id).choice(len(pix), size=m, replace=False)
    return PromptSample(entry.instance_id, entry.frame_id, pix[np.sort(pick)])


def mask_bbox(mask: np.ndarray) -> Bbox:
    """Tight pixel bbox (u_min, v_min, u_max, v_max) with exclusive max edges."""
    vs, us = np.nonzero(mask)
    if us.size == 0:
        raise ValueError("empty mask has no bounding box")
    return float(us.min()), float(vs.min()), float(us.max() + 1), float(vs.max() + 1)


def multi_level_crops(frame: CameraFrame, bbox: Bbox, levels: int, ratio: float = CROP_RATIO) -> list[Crop]:
    """Crops grown about the bbox centre by ``1 + level * ratio`` and clamped to the image."""
    if levels < 1:
        raise ValueError("L must be at least 1")
    u0, v0, u1, v1 = bbox
    if not (u1 > u0 and v1 > v0):
        raise ValueError(f"degenerate bbox {bbox}")
    cu, cv = (u0 + u1) / 2, (v0 + v1) / 2
    w, h = u1 - u0, v1 - v0
    crops = []
    for level in range(levels):
        s = 1.0 + level * ratio
        box = (max(0.0, cu - s * w / 2), max(0.0, cv - s * h / 2),
               min(float(frame.width), cu + s * w / 2), min(float(frame.height), cv + s * h / 2))
        if not (box[2] > box[0] and box[3] > box[1]):
            raise ValueError(f"bbox {bbox} lies outside frame {frame.id}")
        crops.append(Crop(frame.id, level, box))
    return crops


def crop_pixels(frame: CameraFrame, crop: Crop) -> np.ndarray:
    u0, v0, u1, v1 = crop.bbox
    return frame.rgb[int(math.floor(v0)):int(math.ceil(v1)), int(math.floor(u0)):int(math.ceil(u1))]


class LiftError(RuntimeError):
    pass


def lift_instance_features(scene: Scene, selections: Mapping[int, ViewSelection], segmenter, embedder,
                           k: int, levels: int, k_sample: int = 5, seed: int = 0,
                           ratio: float = CROP_RATIO, delta_occ: float = DELTA_OCC,
                           reports: Mapping[int, VisibilityReport] | None = None) -> LiftedFeatures:
    """Build the [K, N, D2d] 2D multi-view feature block.

    For each instance and each of its selected views: sample prompt pixels,
    keep the segmenter's most confident mask, crop ``levels`` context levels
    around the mask bbox, embed every crop, and average the level embeddings.
    """
    ids = scene.instance_ids
    d2d = embedder.dim
    feats = np.zeros((k, len(ids), d2d))
    valid = np.zeros((k, len(ids)), dtype=bool)
    frames_used = np.full((k, len(ids)), -1, dtype=np.int64)
    out = LiftedFeatures(feats, valid, frames_used, ids)
    for col, iid in enumerate(ids):
        sel = selections[iid]
        report = reports[iid] if reports is not None else visibility_report(scene, iid, delta_occ)
        for slot, fid in enumerate(sel.frames[:k]):
            frame = scene.frame(fid)
            try:
                prompts = sample_prompt_points(report.entry(fid), k_sample, seed)
                candidates = list(segmenter(frame, prompts.pixels))
                if not candidates:
                    raise LiftError("segmenter returned no mask")
                mask, conf = max(candidates, key=lambda mc: mc[1])
                crops = multi_level_crops(frame, mask_bbox(mask), levels, ratio)
                level_feats = [np.asarray(embedder(crop_pixels(frame, c)), dtype=np.float64) for c in crops]
            except Exception as e:
                raise LiftError(f"instance {iid}, frame {fid}: {e}") from e
            feats[slot, col] = np.mean(level_feats, axis=0)
            valid[slot, col] = True
            frames_used[slot, col] = fid
            out.crops[(iid, fid)] = crops
            out.confidences[(iid, fid)] = float(conf)
    return out


def expected_validity_count(selections: Sequence[ViewSelection], k: int) -> int:
    return sum(min(k, len(s.frames)) for s in selections)
