"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Tensor, no_grad

STEP = 1e-4


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_coords: int
    per_tensor: list[float] = field(default_factory=list)

    def passed(self, tol: float) -> bool:
        return self.max_rel_err < tol


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = STEP) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``f()`` against central differences.

    Every coordinate of every tensor in ``params`` is perturbed by +-h. The
    tensors must have ``requires_grad=True``.
    """
    for p in params:
        p.grad = None
    out = f()
    if out.data.size != 1:
        raise ValueError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.reshape(p.shape) for p in params]

    per_tensor = []
    n = 0
    with no_grad():
        for p, ga in zip(params, analytic):
            flat = p.data.reshape(-1)  # view into p.data
            numeric = np.empty(flat.size)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = f().item()
                flat[i] = orig - h
                fm = f().item()
                flat[i] = orig
                numeric[i] = (fp - fm) / (2 * h)
            err = relative_error(ga.reshape(-1), numeric)
            per_tensor.append(float(err.max()) if err.size else 0.0)
            n += flat.size
    return GradCheckReport(max(per_tensor, default=0.0), n, per_tensor)


def random_projection(out: Tensor, seed: int = 0) -> Callable[[Tensor], Tensor]:
    """Fixed random weights turning an array output into a scalar for checking."""
    from . import ops

    w = np.random.default_rng(seed).standard_normal(out.shape)
    return lambda y: ops.sum(ops.mul(y, w))
