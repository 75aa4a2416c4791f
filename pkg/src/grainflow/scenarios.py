"""Scenario construction: canonical initial networks and random partitions."""

from __future__ import annotations

import numpy as np

from .geometry import LabeledNetwork

SCENARIO_KINDS = (
    "circle",
    "two-circles",
    "lens",
    "double-bubble",
    "steiner-junction",
    "line",
    "grid-grains",
    "voronoi-random",
)


class ScenarioError(ValueError):
    pass


def _chain_rows(start_idx, count, left, right, closed=False):
    idx = np.arange(start_idx, start_idx + count)
    nxt = np.roll(idx, -1) if closed else idx[1:]
    cur = idx if closed else idx[:-1]
    return np.column_stack([
        cur, nxt, np.full(len(cur), left, dtype=np.int64), np.full(len(cur), right, dtype=np.int64),
    ])


def subdivide(net, spacing):
    """Split edges longer than `spacing` into equal collinear parts."""
    if spacing <= 0:
        raise ScenarioError("spacing must be positive")
    verts = [net.vertices]
    rows = []
    base = len(net.vertices)
    for t, h, l, r in net.edges:
        a, b = net.vertices[t], net.vertices[h]
        n = int(np.ceil(np.linalg.norm(b - a) / spacing))
        if n <= 1:
            rows.append((t, h, l, r))
            continue
        s = np.arange(1, n)[:, None] / n
        mids = a + s * (b - a)
        ids = [t] + list(range(base, base + n - 1)) + [h]
        verts.append(mids)
        base += n - 1
        for k in range(n):
            rows.append((ids[k], ids[k + 1], l, r))
    return net.replace(vertices=np.vstack(verts), edges=np.array(rows, dtype=np.int64))


def _arc_points(center, radius, a0, a1, n):
    th = np.linspace(a0, a1, n)
    return np.column_stack([
        center[0] + radius * np.cos(th), center[1] + radius * np.sin(th),
    ])


def circle(r0=0.5, segments=256, center=(0.0, 0.0)):
    """Closed polygon: grain 1 inside, grain 2 outside."""
    th = 2 * np.pi * np.arange(segments) / segments
    verts = np.column_stack([
        center[0] + r0 * np.cos(th), center[1] + r0 * np.sin(th),
    ])
    edges = _chain_rows(0, segments, 1, 2, closed=True)
    return LabeledNetwork(verts, edges, 2)


def two_circles(r0=0.3, spacing_between=1.0, segments=192):
    th = 2 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([r0 * np.cos(th), r0 * np.sin(th)])
    left = ring + [-spacing_between / 2, 0.0]
    right = ring + [spacing_between / 2, 0.0]
    edges = np.vstack([
        _chain_rows(0, segments, 1, 3, closed=True),
        _chain_rows(segments, segments, 2, 3, closed=True),
    ])
    return LabeledNetwork(np.vstack([left, right]), edges, 3)


def lens(half_width=0.4, bulge=0.2, segments_per_arc=96):
    a, b = half_width, bulge
    r = (a * a + b * b) / (2 * b)
    cy = b - r
    th0 = np.arctan2(0.0 - cy, -a)
    th1 = np.arctan2(0.0 - cy, a)
    upper = _arc_points((0.0, cy), r, th1, th0, segments_per_arc + 1)
    lower = _arc_points((0.0, -cy), r, -th0, -th1, segments_per_arc + 1)
    verts = np.vstack([upper, lower[1:-1]])
    n_up = len(upper)
    ids_upper = np.arange(n_up)
    ids_lower = np.concatenate([[n_up - 1], np.arange(n_up, n_up + segments_per_arc - 1), [0]])
    rows = [
        np.column_stack([ids_upper[:-1], ids_upper[1:],
                         np.ones(n_up - 1, np.int64), 2 * np.ones(n_up - 1, np.int64)]),
        np.column_stack([ids_lower[:-1], ids_lower[1:],
                         np.ones(len(ids_lower) - 1, np.int64), 2 * np.ones(len(ids_lower) - 1, np.int64)]),
    ]
    return LabeledNetwork(verts, np.vstack(rows), 2)


def double_bubble(r=0.3, spacing=None, rotate=0.0):
    """Two equal lobes of radius r: 240-degree arcs, straight middle interface,
    two 120-degree triple junctions."""
    if spacing is None:
        spacing = max(r * 0.03, 1e-3)
    h = np.sqrt(3.0) * r / 2.0
    n_mid = max(2, int(np.ceil(2 * h / spacing)))
    n_arc = max(8, int(np.ceil(r * 4 * np.pi / 3 / spacing)))
    mid = np.column_stack([np.zeros(n_mid + 1), np.linspace(-h, h, n_mid + 1)])
    left_arc = _arc_points((-r / 2, 0.0), r, np.pi / 3, 5 * np.pi / 3, n_arc + 1)
    right_arc = _arc_points((r / 2, 0.0), r, -2 * np.pi / 3, 2 * np.pi / 3, n_arc + 1)
    # shared junction vertices: mid[0] = J- = (0,-h), mid[-1] = J+ = (0,h)
    verts = [mid]
    jm, jp = 0, n_mid
    base = n_mid + 1
    left_ids = [jp] + list(range(base, base + n_arc - 1)) + [jm]
    verts.append(left_arc[1:-1])
    base += n_arc - 1
    right_ids = [jm] + list(range(base, base + n_arc - 1)) + [jp]
    verts.append(right_arc[1:-1])
    verts = np.vstack(verts)
    if rotate:
        c, s = np.cos(rotate), np.sin(rotate)
        verts = verts @ np.array([[c, s], [-s, c]])
    rows = [np.column_stack([np.arange(n_mid), np.arange(1, n_mid + 1),
                             np.ones(n_mid, np.int64), 2 * np.ones(n_mid, np.int64)])]
    li = np.array(left_ids)
    rows.append(np.column_stack([li[:-1], li[1:],
                                 np.ones(n_arc, np.int64), 3 * np.ones(n_arc, np.int64)]))
    ri = np.array(right_ids)
    rows.append(np.column_stack([ri[:-1], ri[1:],
                                 2 * np.ones(n_arc, np.int64), 3 * np.ones(n_arc, np.int64)]))
    return LabeledNetwork(verts, np.vstack(rows), 3)


def line(half_length=6.0, spacing=0.025):
    """A straight interface under test, closed far away through two balanced
    120-degree junctions (a large theta).  The middle edge is exactly straight
    and its interior sits outside the kernel support of every curved part."""
    r = 2.0 * half_length / np.sqrt(3.0)
    return double_bubble(r=r, spacing=spacing, rotate=np.pi / 2)


def steiner_junction(spoke=8.0, spacing=0.025):
    """Three-petal flower: central exact 120-degree junction, three straight
    spokes, and half-circle petal arcs meeting the spoke tips at 120 degrees."""
    tips = [np.array([spoke * np.cos(a), spoke * np.sin(a)]) for a in
            (0.0, 2 * np.pi / 3, 4 * np.pi / 3)]
    rho = spoke * np.sqrt(3.0) / 2.0
    n_spoke = max(2, int(np.ceil(spoke / spacing)))
    n_arc = max(8, int(np.ceil(np.pi * rho / spacing)))
    verts = [np.zeros((1, 2))]
    rows = []
    base = 1
    tip_ids = []
    for k, tip in enumerate(tips):
        pts = np.linspace(0, 1, n_spoke + 1)[1:, None] * tip[None, :]
        verts.append(pts)
        ids = [0] + list(range(base, base + n_spoke))
        base += n_spoke
        tip_ids.append(ids[-1])
        left = k + 1            # petal ccw of the spoke
        right = (k - 1) % 3 + 1  # petal cw of the spoke
        ids = np.array(ids)
        rows.append(np.column_stack([ids[:-1], ids[1:],
                                     np.full(n_spoke, left, np.int64),
                                     np.full(n_spoke, right, np.int64)]))
    for k in range(3):
        a0 = -np.pi / 6 + 2 * np.pi * k / 3
        center = (spoke / 2) * np.array([np.cos(np.pi / 3 + 2 * np.pi * k / 3),
                                         np.sin(np.pi / 3 + 2 * np.pi * k / 3)])
        arc = _arc_points(center, rho, a0, a0 + np.pi, n_arc + 1)
        verts.append(arc[1:-1])
        ids = [tip_ids[k]] + list(range(base, base + n_arc - 1)) + [tip_ids[(k + 1) % 3]]
        base += n_arc - 1
        ids = np.array(ids)
        rows.append(np.column_stack([ids[:-1], ids[1:],
                                     np.full(n_arc, k + 1, np.int64),
                                     np.full(n_arc, 4, np.int64)]))
    return LabeledNetwork(np.vstack(verts), np.vstack(rows), 4)


def grid_grains(count=3, cell=0.4):
    """count x count square grains: every interior lattice vertex is a
    degree-4 crossing (junction-split material)."""
    n = count
    ext = n * n + 1

    def vid(i, j):
        return j * (n + 1) + i

    verts = np.array([[i * cell, j * cell] for j in range(n + 1) for i in range(n + 1)])
    rows = []
    for j in range(n + 1):
        for i in range(n):
            above = i + j * n + 1 if j < n else ext
            below = i + (j - 1) * n + 1 if j > 0 else ext
            if above != below:
                rows.append((vid(i, j), vid(i + 1, j), above, below))
    for i in range(n + 1):
        for j in range(n):
            left = (i - 1) + j * n + 1 if i > 0 else ext
            right = i + j * n + 1 if i < n else ext
            if left != right:
                rows.append((vid(i, j), vid(i, j + 1), left, right))
    return LabeledNetwork(verts, np.array(rows, dtype=np.int64), ext)


def voronoi_random(n_cells=6, seed=7, box=1.0, n_labels=None, margin=0.15):
    """Bounded Voronoi partition of a box (mirror-point construction), with an
    exterior grain outside the box.  `n_labels` < n_cells duplicates labels and
    so produces interior-boundary edges."""
    from scipy.spatial import Voronoi

    rng = np.random.default_rng(seed)
    pts = rng.uniform(margin * box, (1 - margin) * box, size=(n_cells, 2))
    mirrors = [pts.copy() for _ in range(4)]
    mirrors[0][:, 0] = -pts[:, 0]
    mirrors[1][:, 0] = 2 * box - pts[:, 0]
    mirrors[2][:, 1] = -pts[:, 1]
    mirrors[3][:, 1] = 2 * box - pts[:, 1]
    allpts = np.vstack([pts] + mirrors)
    vor = Voronoi(allpts)
    if n_labels is None:
        cell_label = np.arange(1, n_cells + 1)
        n_grains = n_cells + 1
    else:
        cell_label = rng.integers(1, n_labels + 1, size=n_cells)
        n_grains = n_labels + 1
    ext = n_grains

    used = {}
    verts = []
    rows = []

    def vert_id(k):
        if k not in used:
            used[k] = len(verts)
            verts.append(vor.vertices[k])
        return used[k]

    for (p, q), rv in zip(vor.ridge_points, vor.ridge_vertices):
        if -1 in rv:
            continue
        if p >= n_cells and q >= n_cells:
            continue
        lab_p = cell_label[p] if p < n_cells else ext
        lab_q = cell_label[q] if q < n_cells else ext
        v1, v2 = rv
        a, b = vor.vertices[v1], vor.vertices[v2]
        d = b - a
        to_p = allpts[p] - a
        if d[0] * to_p[1] - d[1] * to_p[0] > 0:
            left, right = lab_p, lab_q
        else:
            left, right = lab_q, lab_p
        rows.append((vert_id(v1), vert_id(v2), int(left), int(right)))
    net = LabeledNetwork(np.array(verts), np.array(rows, dtype=np.int64), n_grains, exterior=ext)
    return net


def star_polygon(seed=0, n=96, r0=0.4, wobble=0.25):
    """Random smooth star-shaped polygon (grain 1 inside)."""
    rng = np.random.default_rng(seed)
    th = 2 * np.pi * np.arange(n) / n
    r = np.full(n, r0)
    for k in range(2, 6):
        r += r0 * wobble / k * rng.uniform(-1, 1) * np.cos(k * th + rng.uniform(0, 2 * np.pi))
    verts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    return LabeledNetwork(verts, _chain_rows(0, n, 1, 2, closed=True), 2)


_BUILDERS = {
    "circle": lambda p: circle(
        r0=p.get("r0", 0.5), segments=int(p.get("segments", 256)),
        center=(p.get("cx", 0.0), p.get("cy", 0.0))),
    "two-circles": lambda p: two_circles(
        r0=p.get("r0", 0.3), spacing_between=p.get("spacing_between", 1.0),
        segments=int(p.get("segments", 192))),
    "lens": lambda p: lens(
        half_width=p.get("half_width", 0.4), bulge=p.get("bulge", 0.2),
        segments_per_arc=int(p.get("segments_per_arc", 96))),
    "double-bubble": lambda p: double_bubble(
        r=p.get("r", 0.3), spacing=p.get("spacing", None)),
    "steiner-junction": lambda p: steiner_junction(
        spoke=p.get("spoke", 8.0), spacing=p.get("spacing", 0.025)),
    "line": lambda p: line(
        half_length=p.get("half_length", 6.0), spacing=p.get("spacing", 0.025)),
    "grid-grains": lambda p: grid_grains(
        count=int(p.get("count", 3)), cell=p.get("cell", 0.4)),
    "voronoi-random": lambda p: voronoi_random(
        n_cells=int(p.get("cells", 6)), seed=int(p.get("seed", 7)),
        box=p.get("box", 1.0),
        n_labels=int(p["labels"]) if "labels" in p else None),
}


def build_scenario(kind, params=None, h_res=None):
    """Construct a named scenario; optionally subdivide to a target spacing.

    The produced network always passes validate().
    """
    params = dict(params or {})
    if kind not in _BUILDERS:
        raise ScenarioError(f"unknown scenario kind {kind!r}; choose from {SCENARIO_KINDS}")
    net = _BUILDERS[kind](params)
    if h_res is not None:
        net = subdivide(net, h_res)
    problems = net.validate()
    if problems:
        raise ScenarioError(f"scenario {kind} failed validation: {problems[:3]}")
    return net
