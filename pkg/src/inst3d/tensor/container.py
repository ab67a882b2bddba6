"""Versioned JSON container for named tensors (parameters, bundles, traces)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .nn import ParamStore

CONTAINER_VERSION = 1


class ContainerError(ValueError):
    pass


def dumps_named(tensors: Mapping[str, Any], kind: str, meta: Mapping[str, Any] | None = None) -> str:
    body = {
        "version": CONTAINER_VERSION,
        "kind": kind,
        "meta": dict(meta or {}),
        "tensors": {
            name: {"shape": list(np.shape(arr)), "data": np.asarray(arr, dtype=np.float64).reshape(-1).tolist()}
            for name, arr in tensors.items()
        },
    }
    return json.dumps(body, sort_keys=True)


def save_named(path, tensors: Mapping[str, Any], kind: str, meta: Mapping[str, Any] | None = None) -> None:
    Path(path).write_text(dumps_named(tensors, kind, meta))


def load_named(path, kind: str | None = None) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ContainerError(f"{path}: line {e.lineno}: {e.msg}") from e
    if doc.get("version") != CONTAINER_VERSION:
        raise ContainerError(f"{path}: unsupported container version {doc.get('version')!r}")
    if kind is not None and doc.get("kind") != kind:
        raise ContainerError(f"{path}: expected kind {kind!r}, found {doc.get('kind')!r}")
    out = {}
    for name, entry in doc["tensors"].items():
        shape = tuple(entry["shape"])
        data = np.array(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise ContainerError(f"{path}: tensor {name!r} has {data.size} values for shape {shape}")
        out[name] = data.reshape(shape)
    return out, doc.get("meta", {})


def save_params(path, store: ParamStore) -> None:
    meta = {
        "seed": store.seed,
        "init": {n: {"scheme": store.spec(n).scheme, "fan_in": store.spec(n).fan_in} for n in store},
    }
    save_named(path, {n: t.data for n, t in store.items()}, "params", meta)


def load_params(path, store: ParamStore) -> ParamStore:
    """Overwrite the values of ``store`` from a checkpoint; names and shapes must match."""
    tensors, _ = load_named(path, "params")
    missing = set(store) - set(tensors)
    extra = set(tensors) - set(store)
    if missing or extra:
        raise ContainerError(f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    for name, arr in tensors.items():
        store.set(name, arr)
    return store
