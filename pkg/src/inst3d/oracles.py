"""Naive reference implementations used to cross-check the vectorised code.

Everything here is written with plain Python loops and ``math`` so it shares
no code path with the numpy / autodiff implementations it checks.
"""

from __future__ import annotations

import math

import numpy as np


def project_point_scalar(fx, fy, cx, cy, pose, p, z_near=1e-4):
    pose = [[float(v) for v in row] for row in np.asarray(pose)]
    x, y, z = (float(v) for v in p)
    cam = [pose[r][0] * x + pose[r][1] * y + pose[r][2] * z + pose[r][3] for r in range(3)]
    if cam[2] <= z_near:
        return None
    return fx * cam[0] / cam[2] + cx, fy * cam[1] / cam[2] + cy, cam[2]


def visible_count_scalar(frame, points, delta_occ, z_near=1e-4) -> int:
    count = 0
    for p in points:
        proj = project_point_scalar(frame.fx, frame.fy, frame.cx, frame.cy, frame.pose, p, z_near)
        if proj is None:
            continue
        u, v, z = proj
        iu, iv = math.floor(u + 0.5), math.floor(v + 0.5)
        if not (0 <= iu < frame.width and 0 <= iv < frame.height):
            continue
        d = float(frame.depth[iv][iu])
        if d == 0.0 or abs(z - d) <= delta_occ:
            count += 1
    return count


def top_k_scalar(counts: dict, k: int) -> list:
    """Full sort of every (count, frame) pair, then filter and truncate."""
    rows = [(-c, f) for f, c in counts.items()]
    rows.sort()
    return [f for negc, f in rows if -negc > 0][:k]


def pair_geometry_scalar(centroids):
    n = len(centroids)
    d = [[0.0] * n for _ in range(n)]
    th = [[0.0] * n for _ in range(n)]
    tv = [[0.0] * n for _ in range(n)]
    for i in range(n):
        xi, yi, zi = (float(v) for v in centroids[i])
        for j in range(n):
            if i == j:
                continue
            xj, yj, zj = (float(v) for v in centroids[j])
            dx, dy, dz = xj - xi, yj - yi, zj - zi
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            d[i][j] = dist
            if dist < 1e-9:
                continue
            th[i][j] = 0.0 if (dx == 0 and dy == 0) else math.atan2(dy, dx)
            tv[i][j] = math.asin(max(-1.0, min(1.0, dz / dist)))
    return np.array(d), np.array(th), np.array(tv)


def spatial_features_scalar(centroids, mode="full"):
    d, th, tv = pair_geometry_scalar(centroids)
    n = len(centroids)
    s = np.zeros((n, n, 5))
    for i in range(n):
        for j in range(n):
            row = [math.sin(th[i][j]), math.cos(th[i][j]), math.sin(tv[i][j]), math.cos(tv[i][j]), d[i][j]]
            if mode == "distance_only":
                row[:4] = [0.0] * 4
            elif mode == "orientation_only":
                row[4] = 0.0
            s[i, j] = row
    return s


def position_embed_scalar(c, dim, base=10000.0):
    per_axis = dim // 3
    out = []
    for axis in range(3):
        for m in range(per_axis // 2):
            w = base ** (2 * m / per_axis)
            out += [math.sin(c[axis] / w), math.cos(c[axis] / w)]
    return np.array(out)


def conditioned_weights_scalar(pos_embed, tokens, w_p):
    n, dim = np.shape(tokens)
    out = np.zeros((n, 5))
    for i in range(n):
        for c in range(5):
            acc = 0.0
            for k in range(dim):
                acc += float(w_p[k][c]) * (float(pos_embed[i][k]) + float(tokens[i][k]))
            out[i, c] = acc
    return out


def attention_map_scalar(weights, s):
    n = len(weights)
    om = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for c in range(5):
                acc += float(weights[i][c]) * float(s[i][j][c]) * float(weights[j][c])
            om[i, j] = acc
    return om


def relation_aggregate_scalar(omega, tokens, aggregate_over="self"):
    n, dim = np.shape(tokens)
    out = np.zeros((n, dim))
    for i in range(n):
        for j in range(n):
            src = i if aggregate_over == "self" else j
            for k in range(dim):
                out[i, k] += float(omega[i][j]) * float(tokens[src][k])
    return out


def dense_attention(q, k, v, wq, bq, wk, wv, bv, wo, bo, heads, key_mask=None):
    """Single-batch multi-head attention with explicit loops over heads and rows.

    q: [Lq, D]; k, v: [Lk, D]; weights [D, D] applied as x @ W.
    """
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    lq, dim = q.shape
    lk = k.shape[0]
    dh = dim // heads
    qp, kp, vp = q @ wq + bq, k @ wk, v @ wv + bv
    out = np.zeros((lq, dim))
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        for a in range(lq):
            logits = []
            for b in range(lk):
                if key_mask is not None and not key_mask[b]:
                    logits.append(-math.inf)
                    continue
                logits.append(sum(qp[a, sl][t] * kp[b, sl][t] for t in range(dh)) / math.sqrt(dh))
            m = max(logits)
            ws = [math.exp(x - m) if x != -math.inf else 0.0 for x in logits]
            z = sum(ws)
            for b in range(lk):
                out[a, sl] += ws[b] / z * vp[b, sl]
    return out @ wo + bo


def attention_params(store, prefix):
    return dict(wq=store[f"{prefix}.q.w"].data, bq=store[f"{prefix}.q.b"].data,
                wk=store[f"{prefix}.k.w"].data, wv=store[f"{prefix}.v.w"].data,
                bv=store[f"{prefix}.v.b"].data, wo=store[f"{prefix}.o.w"].data, bo=store[f"{prefix}.o.b"].data)
