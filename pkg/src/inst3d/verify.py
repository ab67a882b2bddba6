"""Verification suites: finite-difference gradients, geometric invariants, oracle equivalence.

Each suite returns a list of named checks. ``run_verify`` bundles them into a
machine-readable report whose ``passed`` flag drives the CLI exit status.

Fault flags deliberately break one piece of the implementation for the
duration of a run, so the harness can prove that each suite is able to fail::

    grad-softmax          softmax backward drops its normalisation term
    spatial-antisymmetry  theta_v loses its sign, so sin(theta_v) becomes symmetric
    residual-leak         instances with no valid view receive attention output
    view-tie-order        view ranking breaks count ties by descending frame id
"""

from __future__ import annotations

import contextlib
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import isr, mcmf, oracles, projection
from .scene import CameraFrame
from .synth import synth_scene
from .tensor import Tensor, as_tensor, grad_check, no_grad, ops, random_projection
from .tensor.nn import ParamStore, init_attention, multi_head_attention

SCHEMA_VERSION = 1
SUITES = ("gradients", "invariants", "oracles")
OP_TOL = 1e-4
MODULE_TOL = 1e-3
ORACLE_TOL = 1e-12
INVARIANT_TOL = 1e-10


@dataclass
class Check:
    name: str
    suite: str
    passed: bool
    value: float
    tol: float
    detail: str = ""


@dataclass
class VerifyReport:
    suites: list[str]
    fault: str | None
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [f"{c.suite}/{c.name}" for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "suites": self.suites, "fault": self.fault,
                "passed": self.passed, "failed": self.failed, "seconds": self.seconds,
                "checks": [asdict(c) for c in self.checks]}


def _check(suite, name, value, tol, detail="", strict=False) -> Check:
    ok = value == 0.0 if strict else bool(value < tol)
    return Check(name, suite, ok, float(value), float(tol), detail)


# -- faults -----------------------------------------------------------------

def _softmax_missing_term(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    return Tensor.from_op(y, (x,), lambda g: (y * g,), "softmax")


def _unsigned_pair_geometry(centroids):
    g = _ORIGINALS["isr.pair_geometry"](centroids)
    return isr.PairGeometry(g.d, g.theta_h, np.abs(g.theta_v), g.coincident)


def _leaky_inject(o3d_q, keys, validity, store, heads, prefix="mcmf"):
    o3d_q, keys = as_tensor(o3d_q), as_tensor(keys)
    k, n, d = keys.shape
    q = ops.reshape(o3d_q, (n, 1, d))
    kv = ops.swapaxes(keys, 0, 1)
    out = multi_head_attention(store.scope(f"{prefix}.cross_attn"), q, kv, kv, heads,
                               mask=np.asarray(validity, dtype=bool).T[:, None, :])
    return ops.reshape(out, (1, n, d)), ~np.asarray(validity, dtype=bool).any(axis=0)


def _reversed_tie_rank(counts, k):
    ranked = sorted((f for f, c in counts.items() if c > 0), key=lambda f: (-counts[f], -f))
    return ranked[:k]


_ORIGINALS = {
    "ops.softmax": ops.softmax,
    "isr.pair_geometry": isr.pair_geometry,
    "mcmf.cross_modal_inject": mcmf.cross_modal_inject,
    "projection.rank_views": projection.rank_views,
}
FAULTS = {
    "grad-softmax": (ops, "softmax", _softmax_missing_term),
    "spatial-antisymmetry": (isr, "pair_geometry", _unsigned_pair_geometry),
    "residual-leak": (mcmf, "cross_modal_inject", _leaky_inject),
    "view-tie-order": (projection, "rank_views", _reversed_tie_rank),
}
# the suite that must catch each fault
FAULT_SUITE = {
    "grad-softmax": "gradients",
    "spatial-antisymmetry": "invariants",
    "residual-leak": "invariants",
    "view-tie-order": "oracles",
}


@contextlib.contextmanager
def inject_fault(name: str | None):
    if name is None:
        yield
        return
    if name not in FAULTS:
        raise ValueError(f"unknown fault {name!r}; expected one of {sorted(FAULTS)}")
    module, attr, broken = FAULTS[name]
    saved = getattr(module, attr)
    setattr(module, attr, broken)
    try:
        yield
    finally:
        setattr(module, attr, saved)


# -- gradients --------------------------------------------------------------

def _leaf(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _op_cases(rng):
    """(name, build function, leaves); ops are looked up at call time so faults apply."""
    a, b = _leaf(rng, 3, 4), _leaf(rng, 4)
    c, d = _leaf(rng, 2, 3), _leaf(rng, 2, 1)
    m1, m2 = _leaf(rng, 2, 3, 4), _leaf(rng, 4, 5)
    x = _leaf(rng, 3, 6)
    gamma, beta = Tensor(1.0 + 0.3 * rng.standard_normal(6), requires_grad=True), _leaf(rng, 6)
    w, bias = _leaf(rng, 6, 4), _leaf(rng, 4)
    p, q = _leaf(rng, 2, 3), _leaf(rng, 4, 3)
    idx = np.array([[0, 2], [2, 1], [0, 0]])
    return [
        ("add", lambda: ops.add(a, b), [a, b]),
        ("sub", lambda: ops.sub(c, d), [c, d]),
        ("mul", lambda: ops.mul(a, b), [a, b]),
        ("matmul", lambda: ops.matmul(m1, m2), [m1, m2]),
        ("reshape", lambda: ops.reshape(m1, (6, 4)), [m1]),
        ("swapaxes", lambda: ops.swapaxes(m1, 0, 2), [m1]),
        ("concat", lambda: ops.concat([p, q], axis=0), [p, q]),
        ("stack", lambda: ops.stack([c, c * 2.0, d * c], axis=1), [c, d]),
        ("take", lambda: ops.take(m1, 1, axis=1), [m1]),
        ("sum", lambda: ops.sum(m1, axis=1), [m1]),
        ("mean", lambda: ops.mean(m1, axis=2, keepdims=True), [m1]),
        ("softmax", lambda: ops.softmax(x, axis=-1), [x]),
        ("layer_norm", lambda: ops.layer_norm(x, gamma, beta), [x, gamma, beta]),
        ("gelu", lambda: ops.gelu(x), [x]),
        ("max_pool", lambda: ops.max_pool(x, axis=0), [x]),
        ("linear", lambda: ops.linear(x, w, bias), [x, w, bias]),
        ("gather_rows", lambda: ops.gather_rows(x, idx), [x]),
    ]


def _jitter(store: ParamStore, rng, scale: float = 0.3) -> ParamStore:
    # move off the init point so no gradient is vanishingly small relative to rounding noise
    for name, t in store.items():
        store.set(name, t.data + scale * rng.standard_normal(t.shape))
    return store


def _scalar_check(build, leaves, seed):
    proj = random_projection(build(), seed)
    return grad_check(lambda: proj(build()), leaves)


def gradient_checks(seeds: int = 10) -> list[Check]:
    checks = []
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 1])
        for name, build, leaves in _op_cases(rng):
            rep = _scalar_check(build, leaves, seed)
            checks.append(_check("gradients", f"op.{name}[seed={seed}]", rep.max_rel_err, OP_TOL))

        # attention with a key mask, its own case since it composes several ops
        store = ParamStore(seed)
        init_attention(store, "att", 8)
        _jitter(store, rng)
        qx, kx = _leaf(rng, 2, 3, 8), _leaf(rng, 2, 4, 8)
        mask = np.array([[True, True, False, True], [True, False, False, False]])[:, None, :]
        rep = _scalar_check(lambda: multi_head_attention(store.scope("att"), qx, kx, kx, 2, mask=mask),
                            [qx, kx, *store.tensors()], seed)
        checks.append(_check("gradients", f"module.attention[seed={seed}]", rep.max_rel_err, MODULE_TOL))

        # fusion module: N=4, K=3, D=8, frames shared between instances so groups have several members
        cfg = mcmf.McmfConfig(D=8, D3d=6, D2d=5, K=3, heads=2)
        store = _jitter(mcmf.init_mcmf_params(ParamStore(seed), cfg), rng)
        o3d, o2d = _leaf(rng, 1, 4, 6), _leaf(rng, 3, 4, 5)
        validity = rng.random((3, 4)) < 0.7
        validity[:, 3] = False  # one instance with no view exercises the masked path
        validity[0, 0] = True
        frames = np.where(validity, rng.integers(0, 3, size=(3, 4)), -1)
        rep = _scalar_check(lambda: mcmf.mcmf_forward(o3d, o2d, validity, store, cfg, frames).instance_tokens,
                            [o3d, o2d, *store.tensors()], seed)
        checks.append(_check("gradients", f"module.mcmf_forward[seed={seed}]", rep.max_rel_err, MODULE_TOL))

        # relation module: N=4, D=6, alternating aggregation and scene-token count
        icfg = isr.IsrConfig(D=6, heads=2, layers=2, aggregate_over=("self", "others")[seed % 2],
                             n_scene_tokens=1 + seed % 2)
        # moderate scales: the unnormalised relation weights grow quadratically with the tokens, and
        # saturated GELU units then carry gradients near 1e-11 that central differences cannot resolve
        store = _jitter(isr.init_isr_params(ParamStore(seed), icfg), rng, 0.1)
        tokens = _leaf(rng, 4, 6, scale=0.2)
        cent = rng.standard_normal((4, 3))
        rep = _scalar_check(lambda: isr.isr_forward(tokens, cent, store, icfg).scene_tokens,
                            [tokens, *store.tensors()], seed)
        checks.append(_check("gradients", f"module.isr_forward[seed={seed}]", rep.max_rel_err, MODULE_TOL))
    return checks


# -- invariants -------------------------------------------------------------

def _rotation_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def geometry_invariant_checks(seeds: int = 100) -> list[Check]:
    sym = anti = trans = rot = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 2])
        n = int(rng.integers(2, 9))
        c = rng.standard_normal((n, 3)) * 2.0
        s = isr.spatial_features(isr.pair_geometry(c)).s
        off = ~np.eye(n, dtype=bool)
        st = np.swapaxes(s, 0, 1)
        # d and cos(theta_v) symmetric; sin(theta_v) and both theta_h channels antisymmetric
        sym = max(sym, np.abs(s[..., [3, 4]] - st[..., [3, 4]])[off].max())
        anti = max(anti, np.abs(s[..., [0, 1, 2]] + st[..., [0, 1, 2]])[off].max())

        t = rng.standard_normal(3) * 5.0
        s_t = isr.spatial_features(isr.pair_geometry(c + t)).s
        trans = max(trans, np.abs(s_t - s).max())

        alpha = rng.uniform(-math.pi, math.pi)
        s_r = isr.spatial_features(isr.pair_geometry(c @ _rotation_z(alpha).T)).s
        ca, sa = math.cos(alpha), math.sin(alpha)
        want_sin = s[..., 0] * ca + s[..., 1] * sa
        want_cos = s[..., 1] * ca - s[..., 0] * sa
        err = np.concatenate([
            np.abs(s_r[..., 0] - want_sin)[off], np.abs(s_r[..., 1] - want_cos)[off],
            np.abs(s_r[..., 2:] - s[..., 2:]).reshape(-1)])
        rot = max(rot, err.max())
    return [
        _check("invariants", "spatial.symmetric_channels", sym, INVARIANT_TOL, "d, cos(theta_v)"),
        _check("invariants", "spatial.antisymmetric_channels", anti, INVARIANT_TOL,
               "sin/cos(theta_h), sin(theta_v)"),
        _check("invariants", "spatial.translation", trans, INVARIANT_TOL),
        _check("invariants", "spatial.z_rotation", rot, INVARIANT_TOL, "theta_h shifts by the angle"),
    ]


def symmetry_checks(seeds: int = 10) -> list[Check]:
    view = pool = scene = equiv = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 3])
        cfg = mcmf.McmfConfig(D=8, D3d=6, D2d=5, K=3, heads=2)
        store = mcmf.init_mcmf_params(ParamStore(seed), cfg)
        toks = rng.standard_normal((5, 8))
        perm = rng.permutation(5)
        with no_grad():
            for agg in mcmf.AGGREGATIONS:
                a = mcmf.aggregate_view(toks, store, 2, agg).data
                b = mcmf.aggregate_view(toks[perm], store, 2, agg).data
                if agg == "cls_token":
                    view = max(view, np.abs(a - b).max())
                else:
                    pool = max(pool, np.abs(a - b).max())

            icfg = isr.IsrConfig(D=12, heads=2, layers=2, n_scene_tokens=2)
            istore = isr.init_isr_params(ParamStore(seed), icfg)
            rel = rng.standard_normal((6, 12))
            p6 = rng.permutation(6)
            a = isr.scene_project(rel, istore, icfg).data
            b = isr.scene_project(rel[p6], istore, icfg).data
            scene = max(scene, np.abs(a - b).max())

            n = 5
            o3d, o2d = rng.standard_normal((1, n, 6)), rng.standard_normal((3, n, 5))
            validity = rng.random((3, n)) < 0.7
            frames = np.where(validity, rng.integers(0, 4, size=(3, n)), -1)
            pn = rng.permutation(n)
            a = mcmf.mcmf_forward(o3d, o2d, validity, store, cfg, frames).instance_tokens.data
            b = mcmf.mcmf_forward(o3d[:, pn], o2d[:, pn], validity[:, pn], store, cfg,
                                  frames[:, pn]).instance_tokens.data
            equiv = max(equiv, np.abs(a[pn] - b).max())
    return [
        _check("invariants", "symmetry.aggregate_view_cls", view, INVARIANT_TOL),
        _check("invariants", "symmetry.aggregate_view_max_pool", pool, INVARIANT_TOL),
        _check("invariants", "symmetry.scene_project", scene, INVARIANT_TOL),
        _check("invariants", "symmetry.mcmf_equivariance", equiv, INVARIANT_TOL),
    ]


def passthrough_checks(seeds: int = 10) -> list[Check]:
    zeroed = empty = 0
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 4])
        cfg = mcmf.McmfConfig(D=8, D3d=6, D2d=5, K=3, heads=2)
        store = mcmf.init_mcmf_params(ParamStore(seed), cfg)
        n = 4
        o3d, o2d = rng.standard_normal((1, n, 6)), rng.standard_normal((3, n, 5))
        validity = rng.random((3, n)) < 0.6
        validity[:, seed % n] = False
        with no_grad():
            out = mcmf.mcmf_forward(o3d, o2d, validity, store, cfg, trace=True)
            q = out.trace["o3d_self"].data[0]
            dead = ~validity.any(axis=0)
            empty += int(np.count_nonzero(out.instance_tokens.data[dead] != q[dead]))
            store.set("mcmf.cross_attn.o.w", np.zeros((8, 8)))
            store.set("mcmf.cross_attn.o.b", np.zeros(8))
            out = mcmf.mcmf_forward(o3d, o2d, validity, store, cfg, trace=True)
            zeroed += int(np.count_nonzero(out.instance_tokens.data != out.trace["o3d_self"].data[0]))

    scene = synth_scene(7, 3, 4, points_per_instance=60, look_away=True)
    from .pipeline import PipelineConfig, run_pipeline

    _, report = run_pipeline(scene, PipelineConfig(D=12, D3d=6, D2d=8, K=3, heads=2, isr_heads=2))
    away = 0 if (report.checks["passthrough_exact"] and report.checks["finite"]) else 1
    return [
        _check("invariants", "residual.zeroed_output_projection", zeroed, 0, "mismatched entries", strict=True),
        _check("invariants", "residual.no_valid_view", empty, 0, "mismatched entries", strict=True),
        _check("invariants", "residual.unobserved_scene", away, 0, "cameras facing away", strict=True),
    ]


def invariant_checks(seeds: int = 100) -> list[Check]:
    return geometry_invariant_checks(seeds) + symmetry_checks(min(seeds, 10)) + passthrough_checks(min(seeds, 10))


# -- oracles ----------------------------------------------------------------

def random_centroids(rng, n: int) -> np.ndarray:
    """Random centroids with occasional coincident and vertically stacked pairs."""
    c = rng.uniform(-3, 3, size=(n, 3))
    for i in range(1, n):
        r = rng.random()
        if r < 0.1:
            c[i] = c[rng.integers(i)]
        elif r < 0.2:
            c[i, :2] = c[rng.integers(i), :2]
    return c


def spatial_oracle_checks(scenes: int = 100) -> list[Check]:
    worst = {k: 0.0 for k in ("pair_geometry", "spatial_features", "position_embed",
                              "conditioned_weights", "attention_map", "relation_aggregate")}
    for seed in range(scenes):
        rng = np.random.default_rng([seed, 5])
        n = int(rng.integers(1, 17))
        dim = 12
        c = random_centroids(rng, n)
        g = isr.pair_geometry(c)
        d, th, tv = oracles.pair_geometry_scalar(c)
        worst["pair_geometry"] = max(worst["pair_geometry"], np.abs(g.d - d).max(),
                                     np.abs(g.theta_h - th).max(), np.abs(g.theta_v - tv).max())
        for mode in isr.SPATIAL_MODES:
            s = isr.spatial_features(g, mode).s
            worst["spatial_features"] = max(worst["spatial_features"],
                                            np.abs(s - oracles.spatial_features_scalar(c, mode)).max())
        pe = isr.position_embed(c, dim)
        pe_ref = np.array([oracles.position_embed_scalar(ci, dim) for ci in c])
        worst["position_embed"] = max(worst["position_embed"], np.abs(pe - pe_ref).max())
        tokens = rng.standard_normal((n, dim))
        w_p = rng.standard_normal((dim, 5)) * 0.3
        with no_grad():
            lw = isr.spatial_conditioned_weights(pe, tokens, w_p).data
            s = isr.spatial_features(g).s
            om = isr.attention_map(lw, isr.SpatialFeatures(s)).data
            rel = {m: isr.relation_aggregate(om, tokens, m).data for m in isr.AGGREGATE_OVER}
        worst["conditioned_weights"] = max(worst["conditioned_weights"],
                                           np.abs(lw - oracles.conditioned_weights_scalar(pe, tokens, w_p)).max())
        worst["attention_map"] = max(worst["attention_map"], np.abs(om - oracles.attention_map_scalar(lw, s)).max())
        for m, r in rel.items():
            worst["relation_aggregate"] = max(worst["relation_aggregate"],
                                              np.abs(r - oracles.relation_aggregate_scalar(om, tokens, m)).max())
    return [_check("oracles", f"spatial.{k}", v, ORACLE_TOL) for k, v in worst.items()]


def _report_from_counts(counts: dict) -> projection.VisibilityReport:
    empty = np.zeros((0, 3))
    entries = tuple(projection.FrameVisibility(0, f, c, empty, np.zeros(0, dtype=np.int64))
                    for f, c in counts.items())
    return projection.VisibilityReport(0, entries)


def view_selection_checks(tables: int = 1000) -> list[Check]:
    mismatches = 0
    first = ""
    for seed in range(tables):
        rng = np.random.default_rng([seed, 6])
        n_frames = int(rng.integers(1, 12))
        ids = rng.choice(50, size=n_frames, replace=False)  # shuffled, non-contiguous ids
        counts = {int(f): int(rng.integers(0, 4)) for f in ids}  # small range forces ties
        k = int(rng.integers(1, 7))
        got = list(projection.select_top_k_views(None, 0, k, report=_report_from_counts(counts)).frames)
        want = oracles.top_k_scalar(counts, k)
        if got != want:
            mismatches += 1
            first = first or f"counts={counts} k={k}: got {got}, want {want}"
    sel = projection.select_top_k_views(None, 0, 2, report=_report_from_counts({2: 7, 0: 7, 1: 3}))
    tie = 0 if list(sel.frames) == [0, 2] else 1
    return [
        _check("oracles", "views.top_k_vs_sort", mismatches, 0, first, strict=True),
        _check("oracles", "views.tie_example", tie, 0, f"got {list(sel.frames)}", strict=True),
    ]


def visibility_oracle_checks(scenes: int = 5) -> list[Check]:
    mismatches = 0
    for seed in range(scenes):
        scene = synth_scene(seed, 1 + seed % 4, 3, points_per_instance=60)
        for iid in scene.instance_ids:
            pts = scene.instance_points(iid)
            for fr in scene.frames:
                got = projection.visible_points(fr, scene, iid, projection.DELTA_OCC).visible_count
                if got != oracles.visible_count_scalar(fr, pts, projection.DELTA_OCC):
                    mismatches += 1
    return [_check("oracles", "projection.visible_counts", mismatches, 0, "mismatched (instance, frame)",
                   strict=True)]


def attention_oracle_checks(seeds: int = 10) -> list[Check]:
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 7])
        store = ParamStore(seed)
        init_attention(store, "att", 8)
        q, k = rng.standard_normal((3, 8)), rng.standard_normal((5, 8))
        mask = rng.random(5) < 0.7
        mask[0] = True
        with no_grad():
            got = multi_head_attention(store.scope("att"), Tensor(q[None]), Tensor(k[None]), Tensor(k[None]), 2,
                                       mask=mask[None, None, :]).data[0]
        want = oracles.dense_attention(q, k, k, heads=2, key_mask=mask, **oracles.attention_params(store, "att"))
        worst = max(worst, np.abs(got - want).max())
    return [_check("oracles", "attention.dense_loop", worst, ORACLE_TOL)]


def hand_value_checks() -> list[Check]:
    s = isr.spatial_features(isr.pair_geometry([[0, 0, 0], [3, 4, 0]])).s[0, 1]
    e345 = np.abs(s - np.array([0.8, 0.6, 0.0, 1.0, 5.0])).max()
    frame = CameraFrame(0, 100.0, 100.0, 50.0, 50.0, np.eye(4), np.zeros((100, 100, 3)), np.zeros((100, 100)))
    u, v, z = projection.project_point(frame, (0.0, 0.0, 2.0))
    u2, v2, z2 = projection.project_point(frame, (1.0, 0.0, 2.0))
    eproj = max(abs(u - 50), abs(v - 50), abs(z - 2), abs(u2 - 100), abs(v2 - 50), abs(z2 - 2))
    with no_grad():
        sm = ops.softmax(Tensor(np.full(4, 1.7))).data
    esm = np.abs(sm - 0.25).max()
    return [
        _check("oracles", "hand.spatial_3_4_5", e345, ORACLE_TOL),
        _check("oracles", "hand.principal_axis_projection", eproj, ORACLE_TOL),
        _check("oracles", "hand.softmax_uniform", esm, ORACLE_TOL),
    ]


def oracle_checks(scenes: int = 100) -> list[Check]:
    return (spatial_oracle_checks(scenes) + view_selection_checks(10 * scenes) + visibility_oracle_checks()
            + attention_oracle_checks() + hand_value_checks())


# -- driver -----------------------------------------------------------------

SUITE_RUNNERS = {
    "gradients": gradient_checks,
    "invariants": invariant_checks,
    "oracles": oracle_checks,
}


def run_verify(suite: str = "all", fault: str | None = None, size: int | None = None) -> VerifyReport:
    """Run one suite or all of them, optionally under a fault flag.

    ``size`` overrides the number of seeds / scenes per suite (for quick runs).
    """
    names = list(SUITES) if suite == "all" else [suite]
    for n in names:
        if n not in SUITE_RUNNERS:
            raise ValueError(f"unknown suite {n!r}; expected one of {SUITES} or 'all'")
    report = VerifyReport(names, fault)
    t0 = time.perf_counter()
    with inject_fault(fault):
        for n in names:
            runner = SUITE_RUNNERS[n]
            report.checks += runner() if size is None else runner(size)
    report.seconds = time.perf_counter() - t0
    return report


def fault_selftest(size: int = 2) -> dict[str, bool]:
    """For every fault flag, whether its paired suite fails (True is the desired outcome)."""
    return {f: not run_verify(FAULT_SUITE[f], fault=f, size=size).passed for f in FAULTS}
