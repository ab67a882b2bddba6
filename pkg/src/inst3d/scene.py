"""Scenes, camera frames, instance proposals, and the scene file format.

Positions are metres in a z-up world frame. Camera poses are world-to-camera
rigid transforms with the OpenCV axis convention (x right, y down, z forward).
A depth value of 0 means "no measurement".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCENE_VERSION = 1
ROTATION_TOL = 1e-6


class SceneFormatError(ValueError):
    """The scene document cannot be parsed."""


class SceneInvariantError(ValueError):
    """A parsed or constructed scene violates a data-model invariant."""


@dataclass(frozen=True, eq=False)
class CameraFrame:
    id: int
    fx: float
    fy: float
    cx: float
    cy: float
    pose: np.ndarray  # [4, 4] world-to-camera
    rgb: np.ndarray  # [H, W, 3] in [0, 1]
    depth: np.ndarray  # [H, W] metres, 0 = invalid

    @property
    def width(self) -> int:
        return int(self.depth.shape[1])

    @property
    def height(self) -> int:
        return int(self.depth.shape[0])

    @property
    def intrinsics(self) -> tuple[float, float, float, float]:
        return self.fx, self.fy, self.cx, self.cy

    def validate(self) -> None:
        where = f"frame {self.id}"
        if not (self.fx > 0 and self.fy > 0):
            raise SceneInvariantError(f"{where}: focal lengths must be positive")
        if self.pose.shape != (4, 4) or not np.all(np.isfinite(self.pose)):
            raise SceneInvariantError(f"{where}: pose must be a finite 4x4 matrix")
        r = self.pose[:3, :3]
        if np.abs(r @ r.T - np.eye(3)).max() > ROTATION_TOL or abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
            raise SceneInvariantError(f"{where}: pose rotation is not orthonormal with det +1")
        if np.abs(self.pose[3] - [0, 0, 0, 1]).max() > 0:
            raise SceneInvariantError(f"{where}: pose last row must be [0, 0, 0, 1]")
        h, w = self.depth.shape
        if self.rgb.shape != (h, w, 3):
            raise SceneInvariantError(f"{where}: rgb shape {self.rgb.shape} does not match depth {self.depth.shape}")
        if not np.all(np.isfinite(self.depth)) or self.depth.min(initial=0.0) < 0:
            raise SceneInvariantError(f"{where}: depth must be finite and nonnegative")
        if not np.all(np.isfinite(self.rgb)) or self.rgb.min(initial=0.0) < 0 or self.rgb.max(initial=0.0) > 1:
            raise SceneInvariantError(f"{where}: rgb values must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class InstanceProposal:
    id: int
    mask: np.ndarray  # bool [P]

    @property
    def num_points(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class Scene:
    positions: np.ndarray  # [P, 3]
    colors: np.ndarray  # [P, 3]
    frames: tuple[CameraFrame, ...] = ()
    instances: tuple[InstanceProposal, ...] = ()
    _by_id: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        for arr in (self.positions, self.colors):
            arr.setflags(write=False)
        for fr in self.frames:
            for arr in (fr.pose, fr.rgb, fr.depth):
                arr.setflags(write=False)
        for inst in self.instances:
            inst.mask.setflags(write=False)
        self._by_id.update({inst.id: inst for inst in self.instances})

    @property
    def num_points(self) -> int:
        return int(self.positions.shape[0])

    @property
    def instance_ids(self) -> list[int]:
        return [inst.id for inst in self.instances]

    def instance(self, instance_id: int) -> InstanceProposal:
        try:
            return self._by_id[instance_id]
        except KeyError:
            raise KeyError(f"unknown instance id {instance_id}") from None

    def frame(self, frame_id: int) -> CameraFrame:
        for fr in self.frames:
            if fr.id == frame_id:
                return fr
        raise KeyError(f"unknown frame id {frame_id}")

    def instance_points(self, instance_id: int) -> np.ndarray:
        return self.positions[self.instance(instance_id).mask]

    def validate(self) -> "Scene":
        """Raise ``SceneInvariantError`` naming the first failed invariant."""
        p = self.num_points
        if self.positions.shape != (p, 3) or self.colors.shape != (p, 3):
            raise SceneInvariantError("points: positions and colors must both be [P, 3]")
        if not np.all(np.isfinite(self.positions)):
            raise SceneInvariantError("points: positions must be finite")
        if not np.all(np.isfinite(self.colors)) or self.colors.min(initial=0) < 0 or self.colors.max(initial=0) > 1:
            raise SceneInvariantError("points: colors must lie in [0, 1]")
        if not self.instances:
            raise SceneInvariantError("instances: scene needs at least one instance")
        ids = [inst.id for inst in self.instances]
        if len(set(ids)) != len(ids):
            raise SceneInvariantError("instances: ids must be unique")
        for inst in self.instances:
            if inst.mask.shape != (p,):
                raise SceneInvariantError(f"instance {inst.id}: mask length {inst.mask.shape[0]} != point count {p}")
            if not inst.mask.any():
                raise SceneInvariantError(f"instance {inst.id}: mask is empty")
        fids = [fr.id for fr in self.frames]
        if len(set(fids)) != len(fids):
            raise SceneInvariantError("frames: ids must be unique")
        for fr in self.frames:
            fr.validate()
        return self


def make_scene(positions, colors, frames=(), instances=()) -> Scene:
    """Build and validate a scene from array-likes."""
    scene = Scene(
        np.array(positions, dtype=np.float64).reshape(-1, 3),
        np.array(colors, dtype=np.float64).reshape(-1, 3),
        tuple(frames),
        tuple(instances),
    )
    return scene.validate()


def instance_centroid(scene: Scene, instance_id: int) -> np.ndarray:
    """Unweighted mean of the instance's point positions."""
    return scene.instance_points(instance_id).mean(axis=0)


def instance_centroids(scene: Scene) -> np.ndarray:
    return np.stack([instance_centroid(scene, i) for i in scene.instance_ids])


# -- file format --------------------------------------------------------------

def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": SCENE_VERSION,
        "points": [{"p": p.tolist(), "c": c.tolist()} for p, c in zip(scene.positions, scene.colors)],
        "frames": [
            {
                "id": fr.id,
                "fx": fr.fx, "fy": fr.fy, "cx": fr.cx, "cy": fr.cy,
                "pose": fr.pose.reshape(-1).tolist(),
                "width": fr.width, "height": fr.height,
                "rgb": fr.rgb.reshape(-1).tolist(),
                "depth": fr.depth.reshape(-1).tolist(),
            }
            for fr in scene.frames
        ],
        "instances": [{"id": inst.id, "mask": inst.mask.astype(int).tolist()} for inst in scene.instances],
    }


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SceneFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def _reals(values, n: int | None, where: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise SceneFormatError(f"{where}: expected numbers ({e})") from None
    if arr.ndim != 1 or (n is not None and arr.size != n):
        raise SceneFormatError(f"{where}: expected {n if n is not None else 'a flat list of'} numbers")
    return arr


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SceneFormatError("top level: expected an object")
    if _field(doc, "version", "top level") != SCENE_VERSION:
        raise SceneFormatError(f"top level: unsupported version {doc['version']!r}")
    pts = _field(doc, "points", "top level")
    pos = np.empty((len(pts), 3))
    col = np.empty((len(pts), 3))
    for i, pt in enumerate(pts):
        pos[i] = _reals(_field(pt, "p", f"points[{i}]"), 3, f"points[{i}].p")
        col[i] = _reals(_field(pt, "c", f"points[{i}]"), 3, f"points[{i}].c")
    frames = []
    for i, fd in enumerate(_field(doc, "frames", "top level")):
        where = f"frames[{i}]"
        w = int(_field(fd, "width", where))
        h = int(_field(fd, "height", where))
        frames.append(CameraFrame(
            id=int(_field(fd, "id", where)),
            fx=float(_field(fd, "fx", where)), fy=float(_field(fd, "fy", where)),
            cx=float(_field(fd, "cx", where)), cy=float(_field(fd, "cy", where)),
            pose=_reals(_field(fd, "pose", where), 16, f"{where}.pose").reshape(4, 4),
            rgb=_reals(_field(fd, "rgb", where), h * w * 3, f"{where}.rgb").reshape(h, w, 3),
            depth=_reals(_field(fd, "depth", where), h * w, f"{where}.depth").reshape(h, w),
        ))
    instances = []
    for i, idoc in enumerate(_field(doc, "instances", "top level")):
        where = f"instances[{i}]"
        mask = _reals(_field(idoc, "mask", where), None, f"{where}.mask")
        if not np.all((mask == 0) | (mask == 1)):
            raise SceneFormatError(f"{where}.mask: entries must be 0 or 1")
        instances.append(InstanceProposal(int(_field(idoc, "id", where)), mask.astype(bool)))
    return Scene(pos, col, tuple(frames), tuple(instances)).validate()


def load_scene(path) -> Scene:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    return scene_from_dict(doc)


def save_scene(scene: Scene, path) -> None:
    scene.validate()
    Path(path).write_text(json.dumps(scene_to_dict(scene)))


def scenes_equal(a: Scene, b: Scene) -> bool:
    """Field-by-field exact equality."""
    if not (np.array_equal(a.positions, b.positions) and np.array_equal(a.colors, b.colors)):
        return False
    if len(a.frames) != len(b.frames) or len(a.instances) != len(b.instances):
        return False
    for fa, fb in zip(a.frames, b.frames):
        if (fa.id, fa.fx, fa.fy, fa.cx, fa.cy) != (fb.id, fb.fx, fb.fy, fb.cx, fb.cy):
            return False
        if not all(np.array_equal(x, y) for x, y in ((fa.pose, fb.pose), (fa.rgb, fb.rgb), (fa.depth, fb.depth))):
            return False
    return all(ia.id == ib.id and np.array_equal(ia.mask, ib.mask) for ia, ib in zip(a.instances, b.instances))
