"""Deterministic synthetic RGB-D scenes: boxes on a floor seen from a camera ring."""

from __future__ import annotations

import numpy as np

from .projection import nearest_per_pixel
from .scene import CameraFrame, InstanceProposal, Scene

ROOM_HALF = 2.0
MAX_PLACEMENT_TRIES = 200
BACKGROUND_RGB = 0.5


class PlacementError(RuntimeError):
    pass


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-to-camera pose for a camera at ``eye`` looking at ``target`` (x right, y down, z forward)."""
    eye, target, up = (np.asarray(a, dtype=np.float64) for a in (eye, target, up))
    fwd = target - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    pose = np.eye(4)
    pose[:3, :3] = rot
    pose[:3, 3] = -rot @ eye
    return pose


def _box_surface(rng, center, half, n) -> np.ndarray:
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]]).repeat(2)
    faces = rng.choice(6, size=n, p=areas / areas.sum())
    pts = rng.uniform(-1.0, 1.0, size=(n, 3))
    axis = faces // 2
    pts[np.arange(n), axis] = np.where(faces % 2 == 0, -1.0, 1.0)
    return center + pts * half


def render(frame_like: CameraFrame, positions: np.ndarray, colors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Splat points into (rgb, depth) keeping the nearest point per pixel."""
    h, w = frame_like.height, frame_like.width
    idx, pix, z = nearest_per_pixel(frame_like, positions)
    depth = np.zeros((h, w))
    rgb = np.full((h, w, 3), BACKGROUND_RGB)
    depth[pix[:, 1], pix[:, 0]] = z
    rgb[pix[:, 1], pix[:, 0]] = colors[idx]
    return rgb, depth


def synth_scene(seed: int, n_instances: int, n_frames: int, points_per_instance: int = 200,
                width: int = 80, height: int = 60, floor_points: int = 400,
                look_away: bool = False) -> Scene:
    """Boxes at non-overlapping random positions, photographed from a ring of cameras.

    ``look_away`` turns every camera to face outward so no instance is observed.
    """
    if min(n_instances, n_frames, points_per_instance) < 1:
        raise ValueError("counts must be at least 1")
    rng = np.random.default_rng(seed)
    centers, halves = [], []
    for _ in range(n_instances):
        for _ in range(MAX_PLACEMENT_TRIES):
            half = rng.uniform(0.1, 0.3, size=3)
            c = np.array([*rng.uniform(-ROOM_HALF + 0.3, ROOM_HALF - 0.3, size=2), half[2]])
            if all(np.any(np.abs(c[:2] - oc[:2]) > half[:2] + oh[:2] + 0.05) for oc, oh in zip(centers, halves)):
                centers.append(c)
                halves.append(half)
                break
        else:
            raise PlacementError(f"could not place instance {len(centers)} after {MAX_PLACEMENT_TRIES} tries")

    pos, col, owner = [], [], []
    for i, (c, hf) in enumerate(zip(centers, halves)):
        pos.append(_box_surface(rng, c, hf, points_per_instance))
        base = rng.uniform(0.15, 0.85, size=3)
        col.append(np.clip(base + rng.normal(0, 0.05, size=(points_per_instance, 3)), 0.0, 1.0))
        owner.append(np.full(points_per_instance, i))
    if floor_points:
        fp = np.column_stack([rng.uniform(-ROOM_HALF, ROOM_HALF, size=(floor_points, 2)), np.zeros(floor_points)])
        pos.append(fp)
        col.append(np.full((floor_points, 3), 0.3))
        owner.append(np.full(floor_points, -1))
    positions = np.concatenate(pos)
    colors = np.concatenate(col)
    owner = np.concatenate(owner)

    fx = fy = 0.9 * width
    target = np.array([0.0, 0.0, 0.3])
    frames = []
    for f in range(n_frames):
        a = 2 * np.pi * f / n_frames + rng.uniform(-0.1, 0.1)
        eye = np.array([3.5 * np.cos(a), 3.5 * np.sin(a), 1.6])
        look = eye + np.array([np.cos(a), np.sin(a), 0.0]) if look_away else target
        stub = CameraFrame(f, fx, fy, width / 2, height / 2, look_at(eye, look),
                           np.zeros((height, width, 3)), np.zeros((height, width)))
        rgb, depth = render(stub, positions, colors)
        frames.append(CameraFrame(f, fx, fy, width / 2, height / 2, stub.pose, rgb, depth))

    instances = tuple(InstanceProposal(i, owner == i) for i in range(n_instances))
    return Scene(positions, colors, tuple(frames), instances).validate()
