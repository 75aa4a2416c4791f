"""Hot numeric kernels: numba @njit implementations with a numpy fallback.

The fallback is selected by setting the environment variable
``GRAINFLOW_NUMBA=0`` (or when numba is not importable).  Both paths cull
kernel evaluations at the same hard support radius, so they agree to fp
rounding; ``benchmarks/bench_kernels.py`` times one against the other.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("GRAINFLOW_NUMBA", "").strip().lower()
if _env in ("0", "false", "off", "no"):
    _HAVE_NUMBA = False
else:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        _HAVE_NUMBA = False

USING_NUMBA = _HAVE_NUMBA

_CELL_OFF = np.int64(1) << 20
_CELL_MOD = np.int64(1) << 21


def cell_key(ci, cj):
    return (ci + _CELL_OFF) * _CELL_MOD + (cj + _CELL_OFF)


def build_cell_index(points, cell):
    """Sort point indices by grid cell; returns (keys_unique, starts, order)."""
    ci = np.floor(points[:, 0] / cell).astype(np.int64)
    cj = np.floor(points[:, 1] / cell).astype(np.int64)
    keys = cell_key(ci, cj)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    uniq, starts = np.unique(sorted_keys, return_index=True)
    starts = np.append(starts, len(order))
    return uniq, starts.astype(np.int64), order.astype(np.int64)


def _psi_np(s):
    """Radial cutoff: 1 on [0, 1/2], quintic smoothstep down to 0 at 1."""
    u = np.clip((s - 0.5) * 2.0, 0.0, 1.0)
    return 1.0 - u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def dilate_cells(ci, cj, k):
    """Union of (2k+1)^2 index boxes around the given cells, as sorted keys.

    Minkowski dilation by a square is separable: dilate in j, then in i via
    per-column interval merging, so the cost scales with the output size.
    """
    keys = np.unique(cell_key(np.asarray(ci, np.int64), np.asarray(cj, np.int64)))
    if len(keys) == 0:
        return keys
    ci = keys // _CELL_MOD - _CELL_OFF
    cj = keys % _CELL_MOD - _CELL_OFF
    jj = (cj[:, None] + np.arange(-k, k + 1, dtype=np.int64)[None, :]).ravel()
    ii = np.repeat(ci, 2 * k + 1)
    keys = np.unique(cell_key(ii, jj))
    ii = keys // _CELL_MOD - _CELL_OFF
    jj = keys % _CELL_MOD - _CELL_OFF
    order = np.lexsort((ii, jj))
    ii, jj = ii[order], jj[order]
    start = np.ones(len(ii), dtype=bool)
    start[1:] = (jj[1:] != jj[:-1]) | (ii[1:] - ii[:-1] > 2 * k)
    idx = np.nonzero(start)[0]
    ends = np.append(idx[1:], len(ii)) - 1
    lo = ii[idx] - k
    hi = ii[ends] + k
    cols = jj[idx]
    lengths = hi - lo + 1
    total = int(lengths.sum())
    reps = np.repeat(np.arange(len(lengths)), lengths)
    offs = np.arange(total) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return np.sort(cell_key(lo[reps] + offs, cols[reps]))


# ---------------------------------------------------------------------------
# lattice field evaluation:  Phi_eps * deltaV (vertex formula) and
# Phi_eps * ||V|| (segment quadrature) at the lattice nodes
# ---------------------------------------------------------------------------


def eval_lattice_fields_numpy(nodes, verts, vert_t, qx, qw, eps, c_eps, reff):
    norm = c_eps / (2.0 * np.pi * eps * eps)
    inv2 = 1.0 / (2.0 * eps * eps)
    r2 = reff * reff
    psi_active = reff > 0.5
    Q = len(nodes)
    sfv = np.zeros((Q, 2))
    sw = np.zeros(Q)
    chunk = max(1, int(4e6 // max(len(verts) + len(qx), 1)))
    for lo in range(0, Q, chunk):
        hi = min(Q, lo + chunk)
        blk = nodes[lo:hi]
        if len(verts):
            d = verts[None, :, :] - blk[:, None, :]
            d2 = (d * d).sum(-1)
            k = np.where(d2 <= r2, norm * np.exp(-d2 * inv2), 0.0)
            if psi_active:
                k *= _psi_np(np.sqrt(d2))
            sfv[lo:hi] = -(k[:, :, None] * vert_t[None, :, :]).sum(1)
        if len(qx):
            d = qx[None, :, :] - blk[:, None, :]
            d2 = (d * d).sum(-1)
            k = np.where(d2 <= r2, norm * np.exp(-d2 * inv2), 0.0)
            if psi_active:
                k *= _psi_np(np.sqrt(d2))
            sw[lo:hi] = k @ qw
    return sfv, sw


def outer_convolution_numpy(points, node_keys, node_u, delta, k_box, eps, c_eps, reff):
    norm = c_eps / (2.0 * np.pi * eps * eps)
    inv2 = 1.0 / (2.0 * eps * eps)
    r2 = reff * reff
    psi_active = reff > 0.5
    rng = np.arange(-k_box, k_box + 1, dtype=np.int64)
    oi, oj = np.meshgrid(rng, rng, indexing="ij")
    oi = oi.ravel()
    oj = oj.ravel()
    out = np.zeros((len(points), 2))
    for p in range(len(points)):
        x, y = points[p]
        ci = np.int64(np.floor(x / delta + 0.5))
        cj = np.int64(np.floor(y / delta + 0.5))
        keys = cell_key(ci + oi, cj + oj)
        rows = np.searchsorted(node_keys, keys)
        rows = np.minimum(rows, len(node_keys) - 1)
        found = node_keys[rows] == keys
        px = (ci + oi[found]) * delta
        py = (cj + oj[found]) * delta
        d2 = (px - x) ** 2 + (py - y) ** 2
        mask = d2 <= r2
        k = norm * np.exp(-d2[mask] * inv2)
        if psi_active:
            k *= _psi_np(np.sqrt(d2[mask]))
        u = node_u[rows[found]][mask]
        out[p] = -(k[:, None] * u).sum(0) * delta * delta
    return out


def segment_intersections_numpy(a, b, endpoints, tol):
    n = len(a)
    out = []
    if n < 2:
        return np.zeros((0, 4))
    lo = np.minimum(a, b) - tol
    hi = np.maximum(a, b) + tol
    for i in range(n - 1):
        cand = np.nonzero(
            (lo[i + 1 :, 0] <= hi[i, 0]) & (hi[i + 1 :, 0] >= lo[i, 0])
            & (lo[i + 1 :, 1] <= hi[i, 1]) & (hi[i + 1 :, 1] >= lo[i, 1])
        )[0] + i + 1
        for j in cand:
            if (
                endpoints[i, 0] == endpoints[j, 0] or endpoints[i, 0] == endpoints[j, 1]
                or endpoints[i, 1] == endpoints[j, 0] or endpoints[i, 1] == endpoints[j, 1]
            ):
                continue
            hit = _seg_cross(a[i], b[i], a[j], b[j], tol)
            if hit is not None:
                out.append((float(i), float(j), hit[0], hit[1]))
    return np.array(out).reshape(-1, 4)


def _seg_cross(p0, p1, q0, q1, tol):
    r = p1 - p0
    u = q1 - q0
    den = r[0] * u[1] - r[1] * u[0]
    w = q0 - p0
    lr = np.hypot(*r)
    lu = np.hypot(*u)
    if abs(den) <= tol * max(lr * lu, 1e-300):
        return None
    t = (w[0] * u[1] - w[1] * u[0]) / den
    s = (w[0] * r[1] - w[1] * r[0]) / den
    tt = tol / max(lr, tol)
    ts = tol / max(lu, tol)
    if tt < t < 1.0 - tt and ts < s < 1.0 - ts:
        pt = p0 + t * r
        return float(pt[0]), float(pt[1])
    return None


if _HAVE_NUMBA:

    @njit(cache=True, fastmath=True)
    def _psi_nb(s):
        u = (s - 0.5) * 2.0
        if u <= 0.0:
            return 1.0
        if u >= 1.0:
            return 0.0
        return 1.0 - u * u * u * (u * (6.0 * u - 15.0) + 10.0)

    @njit(cache=True, fastmath=True)
    def _eval_lattice_fields_nb(
        nodes, verts, vert_t, qx, qw, eps, c_eps, reff,
        vkeys, vstarts, vorder, qkeys, qstarts, qorder, cell,
    ):
        Q = nodes.shape[0]
        sfv = np.zeros((Q, 2))
        sw = np.zeros(Q)
        norm = c_eps / (2.0 * np.pi * eps * eps)
        inv2 = 1.0 / (2.0 * eps * eps)
        r2 = reff * reff
        psi_active = reff > 0.5
        for q in range(Q):
            px = nodes[q, 0]
            py = nodes[q, 1]
            ci = np.int64(np.floor(px / cell))
            cj = np.int64(np.floor(py / cell))
            ax = 0.0
            ay = 0.0
            s = 0.0
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    key = (ci + di + _CELL_OFF) * _CELL_MOD + (cj + dj + _CELL_OFF)
                    pos = np.searchsorted(vkeys, key)
                    if pos < vkeys.shape[0] and vkeys[pos] == key:
                        for n in range(vstarts[pos], vstarts[pos + 1]):
                            v = vorder[n]
                            dx = verts[v, 0] - px
                            dy = verts[v, 1] - py
                            d2 = dx * dx + dy * dy
                            if d2 <= r2:
                                k = norm * np.exp(-d2 * inv2)
                                if psi_active:
                                    k *= _psi_nb(np.sqrt(d2))
                                ax -= k * vert_t[v, 0]
                                ay -= k * vert_t[v, 1]
                    pos = np.searchsorted(qkeys, key)
                    if pos < qkeys.shape[0] and qkeys[pos] == key:
                        for n in range(qstarts[pos], qstarts[pos + 1]):
                            m = qorder[n]
                            dx = qx[m, 0] - px
                            dy = qx[m, 1] - py
                            d2 = dx * dx + dy * dy
                            if d2 <= r2:
                                k = norm * np.exp(-d2 * inv2)
                                if psi_active:
                                    k *= _psi_nb(np.sqrt(d2))
                                s += k * qw[m]
            sfv[q, 0] = ax
            sfv[q, 1] = ay
            sw[q] = s
        return sfv, sw

    def eval_lattice_fields_numba(nodes, verts, vert_t, qx, qw, eps, c_eps, reff):
        cell = reff
        vkeys, vstarts, vorder = build_cell_index(verts.reshape(-1, 2), cell)
        qkeys, qstarts, qorder = build_cell_index(qx.reshape(-1, 2), cell)
        return _eval_lattice_fields_nb(
            nodes, verts.reshape(-1, 2), vert_t.reshape(-1, 2),
            qx.reshape(-1, 2), qw, eps, c_eps, reff,
            vkeys, vstarts, vorder, qkeys, qstarts, qorder, cell,
        )

    @njit(cache=True, fastmath=True)
    def _outer_conv_nb(points, node_keys, node_u, delta, k_box, eps, c_eps, reff):
        P = points.shape[0]
        nkeys = node_keys.shape[0]
        out = np.zeros((P, 2))
        norm = c_eps / (2.0 * np.pi * eps * eps)
        inv2 = 1.0 / (2.0 * eps * eps)
        r2 = reff * reff
        psi_active = reff > 0.5
        for p in range(P):
            x = points[p, 0]
            y = points[p, 1]
            ci = np.int64(np.floor(x / delta + 0.5))
            cj = np.int64(np.floor(y / delta + 0.5))
            hx = 0.0
            hy = 0.0
            for di in range(-k_box, k_box + 1):
                ii = ci + di
                px = ii * delta
                dx = px - x
                if dx * dx > r2:
                    continue
                # keys of one lattice row are consecutive: search once, walk
                base = (ii + _CELL_OFF) * _CELL_MOD + (cj - k_box + _CELL_OFF)
                pos = np.searchsorted(node_keys, base)
                for dj in range(-k_box, k_box + 1):
                    target = base + (dj + k_box)
                    while pos < nkeys and node_keys[pos] < target:
                        pos += 1
                    if pos >= nkeys:
                        break
                    if node_keys[pos] == target:
                        dy = (cj + dj) * delta - y
                        d2 = dx * dx + dy * dy
                        if d2 <= r2:
                            k = norm * np.exp(-d2 * inv2)
                            if psi_active:
                                k *= _psi_nb(np.sqrt(d2))
                            hx -= k * node_u[pos, 0]
                            hy -= k * node_u[pos, 1]
            out[p, 0] = hx * delta * delta
            out[p, 1] = hy * delta * delta
        return out

    def outer_convolution_numba(points, node_keys, node_u, delta, k_box, eps, c_eps, reff):
        return _outer_conv_nb(points, node_keys, node_u, delta, k_box, eps, c_eps, reff)

    @njit(cache=True, fastmath=True)
    def _seg_intersections_nb(a, b, endpoints, tol, keys, starts, order, cell):
        hits = []
        n = a.shape[0]
        for i in range(n):
            mx = 0.5 * (a[i, 0] + b[i, 0])
            my = 0.5 * (a[i, 1] + b[i, 1])
            ci = np.int64(np.floor(mx / cell))
            cj = np.int64(np.floor(my / cell))
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    key = (ci + di + _CELL_OFF) * _CELL_MOD + (cj + dj + _CELL_OFF)
                    pos = np.searchsorted(keys, key)
                    if pos >= keys.shape[0] or keys[pos] != key:
                        continue
                    for nn in range(starts[pos], starts[pos + 1]):
                        j = order[nn]
                        if j <= i:
                            continue
                        if (
                            endpoints[i, 0] == endpoints[j, 0]
                            or endpoints[i, 0] == endpoints[j, 1]
                            or endpoints[i, 1] == endpoints[j, 0]
                            or endpoints[i, 1] == endpoints[j, 1]
                        ):
                            continue
                        rx = b[i, 0] - a[i, 0]
                        ry = b[i, 1] - a[i, 1]
                        ux = b[j, 0] - a[j, 0]
                        uy = b[j, 1] - a[j, 1]
                        den = rx * uy - ry * ux
                        lr = np.sqrt(rx * rx + ry * ry)
                        lu = np.sqrt(ux * ux + uy * uy)
                        if abs(den) <= tol * max(lr * lu, 1e-300):
                            continue
                        wx = a[j, 0] - a[i, 0]
                        wy = a[j, 1] - a[i, 1]
                        t = (wx * uy - wy * ux) / den
                        s = (wx * ry - wy * rx) / den
                        tt = tol / max(lr, tol)
                        ts = tol / max(lu, tol)
                        if tt < t < 1.0 - tt and ts < s < 1.0 - ts:
                            hits.append((float(i), float(j), a[i, 0] + t * rx, a[i, 1] + t * ry))
        out = np.zeros((len(hits), 4))
        for m, h in enumerate(hits):
            out[m, 0] = h[0]
            out[m, 1] = h[1]
            out[m, 2] = h[2]
            out[m, 3] = h[3]
        return out

    def segment_intersections_numba(a, b, endpoints, tol):
        if len(a) < 2:
            return np.zeros((0, 4))
        lengths = np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
        cell = max(float(lengths.max()), tol, 1e-12)
        mids = 0.5 * (a + b)
        keys, starts, order = build_cell_index(mids, cell)
        return _seg_intersections_nb(a, b, endpoints, tol, keys, starts, order, cell)


if USING_NUMBA:
    eval_lattice_fields = eval_lattice_fields_numba
    outer_convolution = outer_convolution_numba
    segment_intersections = segment_intersections_numba
else:  # pragma: no cover - exercised via GRAINFLOW_NUMBA=0
    eval_lattice_fields = eval_lattice_fields_numpy
    outer_convolution = outer_convolution_numpy
    segment_intersections = segment_intersections_numpy
