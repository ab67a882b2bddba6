"""Deterministic stand-ins for the frozen foundation models.

``ForegroundSegmenter``: (frame, prompt pixels [m, 2]) -> iterable of
(mask [H, W] bool, confidence in [0, 1]).
``ImageEmbedder``: rgb crop [h, w, 3] -> vector of length ``dim``.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Protocol

import numpy as np

from .projection import DELTA_OCC, nearest_per_pixel, visible_points
from .scene import CameraFrame, Scene


class ForegroundSegmenter(Protocol):
    def __call__(self, frame: CameraFrame, prompts: np.ndarray) -> Iterable[tuple[np.ndarray, float]]: ...


class ImageEmbedder(Protocol):
    dim: int

    def __call__(self, crop: np.ndarray) -> np.ndarray: ...


def hash_unit_vector(payload: bytes, dim: int, salt: bytes = b"") -> np.ndarray:
    digest = hashlib.blake2b(salt + payload, digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class HashEmbedder:
    """Pseudo-random unit vector keyed by the crop's bytes and shape."""

    def __init__(self, dim: int):
        self.dim = dim

    def __call__(self, crop: np.ndarray) -> np.ndarray:
        arr = np.ascontiguousarray(crop, dtype=np.float64)
        return hash_unit_vector(np.asarray(arr.shape, dtype=np.int64).tobytes() + arr.tobytes(), self.dim, b"2d")


class HashPointEncoder:
    """3D encoder stand-in: instance point coordinates and colours -> unit vector."""

    def __init__(self, dim: int):
        self.dim = dim

    def __call__(self, positions: np.ndarray, colors: np.ndarray) -> np.ndarray:
        payload = np.ascontiguousarray(np.hstack([positions, colors]), dtype=np.float64).tobytes()
        return hash_unit_vector(payload, self.dim, b"3d")

    def encode_scene(self, scene: Scene) -> np.ndarray:
        """[1, N, dim] features in instance order."""
        rows = [self(scene.positions[inst.mask], scene.colors[inst.mask]) for inst in scene.instances]
        return np.stack(rows)[None]


class OracleSegmenter:
    """Returns the true projected mask of whichever instance the prompts land on.

    Each pixel is labelled with the instance owning the nearest point that
    projects there; the prompted instance is the majority label over the
    prompt pixels (smallest id on ties). Its mask is the set of pixels hit by
    its visible points.
    """

    def __init__(self, scene: Scene, delta_occ: float = DELTA_OCC):
        self.scene = scene
        self.delta_occ = delta_occ
        owner = np.full(scene.num_points, -1, dtype=np.int64)
        for inst in reversed(scene.instances):
            owner[inst.mask] = inst.id
        self._owner = owner
        self._labels: dict[int, np.ndarray] = {}

    def label_image(self, frame: CameraFrame) -> np.ndarray:
        if frame.id not in self._labels:
            idx, pix, _ = nearest_per_pixel(frame, self.scene.positions)
            labels = np.full((frame.height, frame.width), -1, dtype=np.int64)
            labels[pix[:, 1], pix[:, 0]] = self._owner[idx]
            self._labels[frame.id] = labels
        return self._labels[frame.id]

    def __call__(self, frame: CameraFrame, prompts: np.ndarray):
        prompts = np.asarray(prompts, dtype=np.int64).reshape(-1, 2)
        labels = self.label_image(frame)[prompts[:, 1], prompts[:, 0]]
        labels = labels[labels >= 0]
        mask = np.zeros((frame.height, frame.width), dtype=bool)
        if labels.size:
            ids, counts = np.unique(labels, return_counts=True)
            vis = visible_points(frame, self.scene, int(ids[np.argmax(counts)]), self.delta_occ)
            if vis.visible_count:
                pix = vis.pixel_coords()
                mask[pix[:, 1], pix[:, 0]] = True
                return [(mask, 1.0)]
        # prompts landed on background only: fall back to the prompt pixels themselves
        mask[prompts[:, 1], prompts[:, 0]] = True
        return [(mask, 0.0)]
