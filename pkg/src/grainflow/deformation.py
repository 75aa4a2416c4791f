"""Volume-controlled deformation moves: catalog, admissibility, greedy search.

A move is admissible when (a) its displacement is at most 1/j^2, (b) each
grain's symmetric-difference volume is at most the global weighted mass drop
divided by j, and (d) the boundary mass inside the move's support C drops by
the factor exp(-j diam C).  Conditions (a), (b) match the deformation-class
definition directly; (d) is the localized sufficient condition that makes a
mass-reducing move monotone against every admissible test weight.  The best
achievable drop is an infimum over an uncountable map class; the greedy
catalog search below produces a certified lower bound on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import segment_omega_mass

KIND_ORDER = (
    "remove-interior-edge",
    "collapse-short-edge",
    "straighten-chain",
    "vanish-small-grain",
    "split-junction",
)


@dataclass
class DeformationMove:
    kind: str
    anchor: int                      # edge/vertex/grain id used for tie-breaking
    support: tuple                   # (xmin, ymin, xmax, ymax)
    displacement: float
    volume_deltas: dict              # label -> signed area change
    sym_diff: dict                   # label -> symmetric-difference bound
    mass_delta: float                # weighted; negative = reduction
    local_len_before: float          # unweighted length of the move's own old edges
    local_len_after: float
    moved: dict = field(default_factory=dict)        # vertex id -> new position
    removed_edges: tuple = ()
    added_edges: tuple = ()          # rows (tail, head, left, right); -1 tail/head = new vertex
    new_vertices: tuple = ()
    relabels: tuple = ()             # (edge id, new left, new right)
    rewires: tuple = ()              # (edge id, endpoint slot 0/1, new vertex id)

    @property
    def mass_drop(self):
        return -self.mass_delta

    def sort_key(self):
        return (-self.mass_drop, KIND_ORDER.index(self.kind), self.anchor)


@dataclass
class AdmissibilityReport:
    cond_a: bool
    cond_b: bool
    cond_d: bool
    displacement: float
    displacement_limit: float
    volume_budget: float             # mass drop / j
    max_sym_diff: float
    support_mass_before: float
    support_mass_after: float
    support_decay_limit: float

    @property
    def admissible(self):
        return self.cond_a and self.cond_b and self.cond_d


@dataclass
class DeltaVcEstimate:
    achieved_drop: float
    moves: list
    note: str = "greedy catalog lower bound on the optimal volume-controlled drop"


# ---------------------------------------------------------------------------
# move construction helpers
# ---------------------------------------------------------------------------


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _bbox_of(points, pad):
    pts = np.atleast_2d(points)
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def _bbox_diam(box):
    return float(np.hypot(box[2] - box[0], box[3] - box[1]))


def _edge_effects(net, moved, removed, added, weight):
    """Exact per-grain area deltas, swept-area bounds and weighted mass change
    for a local edit (vertex moves / edge removals / edge additions)."""
    vol = {}
    swept = {}
    touched = set(removed)
    for e, (t, h, l, r) in enumerate(net.edges):
        if t in moved or h in moved:
            touched.add(e)
    old_a, old_b, old_lab = [], [], []
    new_a, new_b, new_lab = [], [], []
    for e in sorted(touched):
        t, h, l, r = net.edges[e]
        a = net.vertices[t]
        b = net.vertices[h]
        old_a.append(a)
        old_b.append(b)
        old_lab.append((l, r))
        if e in removed:
            continue
        a2 = np.asarray(moved.get(t, a), dtype=np.float64)
        b2 = np.asarray(moved.get(h, b), dtype=np.float64)
        new_a.append(a2)
        new_b.append(b2)
        new_lab.append((l, r))
        sweep = 0.5 * (
            abs(_cross2(b - a, a2 - a)) + abs(_cross2(b - a2, b2 - a2))
        )
        for lab in {l, r}:
            swept[lab] = swept.get(lab, 0.0) + sweep
    for t, h, l, r, pa, pb in added:
        new_a.append(np.asarray(pa, dtype=np.float64))
        new_b.append(np.asarray(pb, dtype=np.float64))
        new_lab.append((l, r))

    def _accumulate(a_list, b_list, labs, sign):
        for a, b, (l, r) in zip(a_list, b_list, labs):
            if l == r:
                continue
            c = 0.5 * float(_cross2(a, b))
            vol[l] = vol.get(l, 0.0) + sign * c
            vol[r] = vol.get(r, 0.0) - sign * c

    _accumulate(new_a, new_b, new_lab, +1.0)
    _accumulate(old_a, old_b, old_lab, -1.0)

    def _mass(a_list, b_list):
        if not a_list:
            return 0.0, 0.0
        a_arr = np.array(a_list)
        b_arr = np.array(b_list)
        lens = float(np.linalg.norm(b_arr - a_arr, axis=1).sum())
        wmass = float(segment_omega_mass(a_arr, b_arr, weight).sum()) if not weight.is_constant else lens
        return lens, wmass

    len_old, wmass_old = _mass(old_a, old_b)
    len_new, wmass_new = _mass(new_a, new_b)
    geometry = np.array(old_a + old_b + new_a + new_b) if old_a or new_a else np.zeros((1, 2))
    return vol, swept, wmass_new - wmass_old, len_old, len_new, geometry


def _prune(d, tol=1e-15):
    return {k: v for k, v in d.items() if abs(v) > tol}


# ---------------------------------------------------------------------------
# catalog enumeration
# ---------------------------------------------------------------------------


def enumerate_moves(net, j, weight):
    """Candidate moves: interior-edge removals, short-edge collapses, chain
    straightenings, small-grain vanishings and junction splits."""
    moves = []
    tol = net.geom_tol()
    lengths = net.edge_lengths()
    degrees = net.vertex_degrees()
    moves += _interior_edge_moves(net, weight, tol)
    moves += _collapse_moves(net, j, weight, lengths, degrees, tol)
    moves += _straighten_moves(net, j, weight, degrees, tol)
    moves += _vanish_moves(net, j, weight, tol)
    moves += _split_moves(net, j, weight, lengths, degrees, tol)
    return moves


def _interior_edge_moves(net, weight, tol):
    moves = []
    for e in net.interior_edge_ids():
        t, h = net.edges[e, 0], net.edges[e, 1]
        a, b = net.vertices[t], net.vertices[h]
        vol, swept, dmass, lo, ln, geom = _edge_effects(net, {}, {int(e)}, [], weight)
        moves.append(DeformationMove(
            kind="remove-interior-edge",
            anchor=int(e),
            support=_bbox_of(geom, tol),
            displacement=0.0,
            volume_deltas={},
            sym_diff={},
            mass_delta=dmass,
            local_len_before=lo,
            local_len_after=ln,
            removed_edges=(int(e),),
        ))
    return moves


def _collapse_moves(net, j, weight, lengths, degrees, tol):
    moves = []
    limit = 1.0 / (2.0 * j * j)
    for e in np.nonzero((lengths < limit) & (lengths > 0))[0]:
        t, h, l, r = (int(x) for x in net.edges[e])
        if l == r:
            continue  # interior edges get removal instead
        parallel = [
            k for k, (t2, h2, _, _) in enumerate(net.edges)
            if k != e and {int(t2), int(h2)} == {t, h}
        ]
        if parallel:
            continue  # collapsing one side of a bigon would leave a loop
        mid = 0.5 * (net.vertices[t] + net.vertices[h])
        vol, swept, dmass, lo, ln, geom = _edge_effects(
            net, {t: mid, h: mid}, {int(e)}, [], weight)
        rewires = []
        for k, (t2, h2, _, _) in enumerate(net.edges):
            if k == e:
                continue
            if int(t2) == h:
                rewires.append((int(k), 0, t))
            if int(h2) == h:
                rewires.append((int(k), 1, t))
        moves.append(DeformationMove(
            kind="collapse-short-edge",
            anchor=int(e),
            support=_bbox_of(geom, tol),
            displacement=float(lengths[e]) / 2.0,
            volume_deltas=_prune(vol),
            sym_diff=_prune(swept),
            mass_delta=dmass,
            local_len_before=lo,
            local_len_after=ln,
            moved={t: mid},
            removed_edges=(int(e),),
            rewires=tuple(rewires),
        ))
    return moves


def _straighten_moves(net, j, weight, degrees, tol):
    # 3-vertex windows (a, m, b) with m of degree 2 and consistent labels
    moves = []
    limit = 1.0 / (4.0 * j * j)
    by_vertex = {}
    for e, (t, h, l, r) in enumerate(net.edges):
        by_vertex.setdefault(int(t), []).append((e, int(h), (int(l), int(r))))
        by_vertex.setdefault(int(h), []).append((e, int(t), (int(r), int(l))))
    for m, inc in by_vertex.items():
        if degrees[m] != 2 or len(inc) != 2:
            continue
        (e1, a, lab1), (e2, b, lab2) = inc
        if lab1 != tuple(reversed(lab2)):
            continue  # labels must run consistently along the path a-m-b
        pa, pm, pb = net.vertices[a], net.vertices[m], net.vertices[b]
        chord = pb - pa
        clen = float(np.linalg.norm(chord))
        if clen <= tol:
            continue
        s = float(np.clip(np.dot(pm - pa, chord) / (clen * clen), 0.0, 1.0))
        proj = pa + s * chord
        dev = float(np.linalg.norm(pm - proj))
        if dev <= tol or dev >= limit:
            continue
        # necessary form of the support-decay condition, from the window alone
        pts = np.array([pa, pm, pb])
        diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))) + 2 * tol
        len_before = float(np.linalg.norm(pm - pa) + np.linalg.norm(pb - pm))
        len_after = float(np.linalg.norm(proj - pa) + np.linalg.norm(pb - proj))
        if len_before - len_after < (1.0 - np.exp(-j * diam)) * len_before:
            continue
        moved = {m: proj}
        vol, swept, dmass, lo, ln, geom = _edge_effects(net, moved, set(), [], weight)
        if dmass >= 0:
            continue
        moves.append(DeformationMove(
            kind="straighten-chain",
            anchor=int(min(e1, e2)),
            support=_bbox_of(geom, tol),
            displacement=dev,
            volume_deltas=_prune(vol),
            sym_diff=_prune(swept),
            mass_delta=dmass,
            local_len_before=lo,
            local_len_after=ln,
            moved=moved,
        ))
    return moves


def vanish_move_for(net, i, weight, tol=None):
    """Vanish grain `i` into its dominant neighbor (the one sharing the most
    boundary); shared edges vanish, other edges of `i` are relabeled."""
    if tol is None:
        tol = net.geom_tol()
    left, right = net.edges[:, 2], net.edges[:, 3]
    eids = np.nonzero(((left == i) | (right == i)) & (left != right))[0]
    if len(eids) == 0 or i == net.exterior:
        return None
    vids = np.unique(net.edges[eids, :2])
    pts = net.vertices[vids]
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    try:
        area = net.grain_area(i)
    except Exception:
        return None
    other = np.where(left[eids] == i, right[eids], left[eids])
    lens = net.edge_lengths()[eids]
    shared = {}
    for lab, ln in zip(other, lens):
        shared[int(lab)] = shared.get(int(lab), 0.0) + float(ln)
    dom = max(shared, key=shared.get)
    removed = {
        int(e) for e in eids
        if (left[e] == i and right[e] == dom) or (right[e] == i and left[e] == dom)
    }
    relabels = tuple(
        (int(e), dom if left[e] == i else int(left[e]), dom if right[e] == i else int(right[e]))
        for e in eids if int(e) not in removed
    )
    a = net.vertices[net.edges[sorted(removed), 0]] if removed else np.zeros((0, 2))
    b = net.vertices[net.edges[sorted(removed), 1]] if removed else np.zeros((0, 2))
    raw_len = float(np.linalg.norm(b - a, axis=1).sum()) if len(a) else 0.0
    if weight.is_constant:
        dmass = -raw_len
    else:
        dmass = -float(segment_omega_mass(a, b, weight).sum()) if len(a) else 0.0
    return DeformationMove(
        kind="vanish-small-grain",
        anchor=int(i),
        support=_bbox_of(pts, tol),
        displacement=diam / 2.0,
        volume_deltas=_prune({int(i): -area, dom: area}),
        sym_diff=_prune({int(i): area, dom: area}),
        mass_delta=dmass,
        local_len_before=raw_len,
        local_len_after=0.0,
        removed_edges=tuple(sorted(removed)),
        relabels=relabels,
    )


def _vanish_moves(net, j, weight, tol):
    moves = []
    limit = 1.0 / (j * j)
    left, right = net.edges[:, 2], net.edges[:, 3]
    for i in range(1, net.n_grains + 1):
        if i == net.exterior:
            continue
        eids = np.nonzero(((left == i) | (right == i)) & (left != right))[0]
        if len(eids) == 0:
            continue
        vids = np.unique(net.edges[eids, :2])
        pts = net.vertices[vids]
        diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        if diam >= limit:
            continue
        mv = vanish_move_for(net, int(i), weight, tol)
        if mv is not None:
            moves.append(mv)
    return moves


def _split_moves(net, j, weight, lengths, degrees, tol):
    moves = []
    hubs = np.nonzero(degrees >= 4)[0]
    for v in hubs:
        mv = _best_split(net, int(v), j, weight, tol)
        if mv is not None:
            moves.append(mv)
    return moves


def _best_split(net, v, j, weight, tol, break_factor=3.0):
    """Steiner split of a degree >= 4 vertex into two junctions joined by a
    short edge.

    Each stub is broken at a short distance from the junction and only the
    near piece swings to the new junction, so both the volume-control budget
    and the localized decay condition see a support of a few gap widths.
    """
    stubs = []  # (angle, edge id, at_tail, other vertex, ccw label, cw label)
    for e, (t, h, l, r) in enumerate(net.edges):
        if t == v:
            d = net.vertices[h] - net.vertices[v]
            stubs.append((float(np.arctan2(d[1], d[0])), e, True, int(h), int(l), int(r)))
        elif h == v:
            d = net.vertices[t] - net.vertices[v]
            stubs.append((float(np.arctan2(d[1], d[0])), e, False, int(t), int(r), int(l)))
    stubs.sort()
    d = len(stubs)
    if d < 4:
        return None
    pos = net.vertices[v]
    lengths = np.array([
        float(np.linalg.norm(net.vertices[s[3]] - pos)) for s in stubs
    ])
    dirs = np.array([
        (net.vertices[s[3]] - pos) / max(ln, tol) for s, ln in zip(stubs, lengths)
    ])
    c = break_factor
    best = None
    for start in range(d):
        for size in range(2, d - 1):
            g1 = [(start + k) % d for k in range(size)]
            g2 = [(start + size + k) % d for k in range(d - size)]
            t1 = dirs[g1].sum(axis=0)
            t2 = dirs[g2].sum(axis=0)
            n1, n2 = np.linalg.norm(t1), np.linalg.norm(t2)
            if n1 <= tol or n2 <= tol:
                continue
            d1, d2 = t1 / n1, t2 / n2
            # finite-break gain per unit gap: every length scales with delta
            gain = -float(np.linalg.norm(d1 - d2))
            for grp, dj in ((g1, d1), (g2, d2)):
                for k in grp:
                    gain += c - float(np.linalg.norm(c * dirs[k] - dj))
            if gain <= 0:
                continue
            if best is None or gain > best[0]:
                best = (gain, g1, g2, d1, d2)
    if best is None:
        return None
    gain, g1, g2, d1, d2 = best
    # all lengths scale linearly with the gap, the decay requirement
    # quadratically; size the gap to beat it with a factor-2 margin
    bbox_rate = float(np.linalg.norm(
        np.vstack([c * dirs, [d1, d2]]).max(axis=0)
        - np.vstack([c * dirs, [d1, d2]]).min(axis=0)
    ))
    mass_rate = d * c + 2.0
    delta = min(
        1.0 / (4.0 * j * j),
        float(lengths.min()) / (2.0 * c),
        gain / (2.0 * j * bbox_rate * mass_rate),
    )
    if delta <= 4 * tol:
        return None
    p1 = pos + delta * d1
    p2 = pos + delta * d2
    # the split separates the two sectors flanking the group boundary; the
    # sector just ccw of a stub carries that stub's ccw label
    lab_a = stubs[g1[-1]][4]   # sector between the end of group 1 and group 2
    lab_b = stubs[g2[-1]][4]   # sector between the end of group 2 and group 1
    if lab_a == lab_b:
        return None
    nrm = np.array([-(p2 - p1)[1], (p2 - p1)[0]])
    mid_a = dirs[g1[-1]] + dirs[g2[0]]
    left_lab, right_lab = (lab_a, lab_b) if float(np.dot(nrm, mid_a)) > 0 else (lab_b, lab_a)

    new_edges = []
    new_vertices = [tuple(p1), tuple(p2)]
    vol: dict[int, float] = {}
    swept: dict[int, float] = {}
    pieces_old = []
    pieces_new = []
    removed = []
    for grp, p, pid in ((g1, p1, -1), (g2, p2, -2)):
        for k in grp:
            _, e, at_tail, other, _, _ = stubs[k]
            t, h, l, r = (int(x) for x in net.edges[e])
            far = net.vertices[other]
            ln = lengths[k]
            removed.append(int(e))
            if ln > 2 * c * delta:
                brk = pos + (c * delta) * dirs[k]
                bid = -(len(new_vertices) + 1)
                new_vertices.append(tuple(brk))
            else:
                brk, bid = far, None
            # near piece swings from the junction to the new anchor, oriented
            # along the original edge so the side labels stay meaningful
            if at_tail:
                pieces_old.append((pos, brk, l, r))
                pieces_new.append((np.asarray(p), brk, l, r))
            else:
                pieces_old.append((brk, pos, l, r))
                pieces_new.append((brk, np.asarray(p), l, r))
            if l != r:
                a_o, b_o = pieces_old[-1][:2]
                a_n, b_n = pieces_new[-1][:2]
                dc = 0.5 * (_cross2(np.asarray(a_n), np.asarray(b_n))
                            - _cross2(np.asarray(a_o), np.asarray(b_o)))
                vol[l] = vol.get(l, 0.0) + dc
                vol[r] = vol.get(r, 0.0) - dc
            sweep = 0.5 * abs(_cross2(brk - pos, np.asarray(p) - pos))
            for lab in {l, r}:
                swept[lab] = swept.get(lab, 0.0) + sweep
            if bid is None:
                tgt = h if at_tail else t
                if at_tail:
                    new_edges.append((pid, tgt, l, r, p, far))
                else:
                    new_edges.append((tgt, pid, l, r, far, p))
            else:
                if at_tail:
                    new_edges.append((pid, bid, l, r, p, brk))
                    new_edges.append((bid, h, l, r, brk, far))
                else:
                    new_edges.append((bid, pid, l, r, brk, p))
                    new_edges.append((t, bid, l, r, far, brk))
    new_edges.append((-1, -2, int(left_lab), int(right_lab), p1, p2))
    pieces_new.append((p1, p2, int(left_lab), int(right_lab)))
    dc = 0.5 * _cross2(p1, p2)
    vol[left_lab] = vol.get(left_lab, 0.0) + dc
    vol[right_lab] = vol.get(right_lab, 0.0) - dc
    gap_sliver = 0.5 * float(np.linalg.norm(p2 - p1)) * delta
    for lab in (left_lab, right_lab):
        swept[lab] = swept.get(lab, 0.0) + gap_sliver

    def piece_mass(pieces):
        if not pieces:
            return 0.0, 0.0
        a = np.array([q[0] for q in pieces])
        b = np.array([q[1] for q in pieces])
        raw = float(np.linalg.norm(b - a, axis=1).sum())
        if weight.is_constant:
            return raw, raw
        return raw, float(segment_omega_mass(a, b, weight).sum())

    len_old, wmass_old = piece_mass(pieces_old)
    len_new, wmass_new = piece_mass(pieces_new)
    dmass = wmass_new - wmass_old
    if dmass >= 0:
        return None
    geom = np.vstack([np.array([q[0] for q in pieces_old + pieces_new]),
                      np.array([q[1] for q in pieces_old + pieces_new])])
    return DeformationMove(
        kind="split-junction",
        anchor=int(v),
        support=_bbox_of(geom, tol),
        displacement=float(delta),
        volume_deltas=_prune(vol),
        sym_diff=_prune(swept),
        mass_delta=dmass,
        local_len_before=len_old,
        local_len_after=len_new,
        removed_edges=tuple(sorted(set(removed))),
        added_edges=tuple(new_edges),
        new_vertices=tuple(new_vertices),
    )


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


def _clip_length_in_box(a, b, box):
    """Total length of segments clipped to an axis-aligned box (Liang-Barsky)."""
    if len(a) == 0:
        return 0.0
    d = b - a
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    keep = np.ones(len(a), dtype=bool)
    for axis, (lo, hi) in enumerate(((box[0], box[2]), (box[1], box[3]))):
        p = d[:, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - a[:, axis]) / p
            tb = (hi - a[:, axis]) / p
        enter = np.where(p >= 0, ta, tb)
        leave = np.where(p >= 0, tb, ta)
        para = p == 0
        inside = (a[:, axis] >= lo) & (a[:, axis] <= hi)
        keep &= ~(para & ~inside)
        enter = np.where(para, 0.0, enter)
        leave = np.where(para, 1.0, leave)
        t0 = np.maximum(t0, enter)
        t1 = np.minimum(t1, leave)
    keep &= t1 > t0
    seg = np.linalg.norm(d, axis=1) * np.clip(t1 - t0, 0.0, 1.0)
    return float(seg[keep].sum())


def check_admissible(net, move, j, weight):
    """Evaluate conditions (a), (b) and the localized decay condition (d)."""
    limit_a = 1.0 / (j * j)
    cond_a = move.displacement <= limit_a + 1e-15

    drop = move.mass_drop
    budget = drop / j
    max_sym = max(move.sym_diff.values(), default=0.0)
    cond_b = drop >= -1e-15 and max_sym <= budget + 1e-15

    box = move.support
    a = net.vertices[net.edges[:, 0]]
    b = net.vertices[net.edges[:, 1]]
    before = _clip_length_in_box(a, b, box)
    # the support contains the move's own geometry entirely
    after = before - move.local_len_before + move.local_len_after
    decay = float(np.exp(-j * _bbox_diam(box)))
    cond_d = after <= decay * before + 1e-15
    return AdmissibilityReport(
        cond_a=bool(cond_a),
        cond_b=bool(cond_b),
        cond_d=bool(cond_d),
        displacement=move.displacement,
        displacement_limit=limit_a,
        volume_budget=budget,
        max_sym_diff=max_sym,
        support_mass_before=before,
        support_mass_after=max(after, 0.0),
        support_decay_limit=decay,
    )


def _fast_reject(move, j):
    """Necessary version of condition (d) using only the move's own lengths."""
    decay = np.exp(-j * _bbox_diam(move.support))
    drop_len = move.local_len_before - move.local_len_after
    return drop_len < (1.0 - decay) * move.local_len_before - 1e-15


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------


def apply_moves(net, moves):
    """Apply moves with pairwise disjoint supports in one edit pass.

    All edge/vertex ids reference `net`, so the edits commute; the network is
    compacted once at the end.
    """
    verts = net.vertices.copy()
    extra_rows = []
    bases = []
    for mv in moves:
        for vid, p in mv.moved.items():
            verts[vid] = p
        bases.append(len(verts) + len(extra_rows))
        extra_rows.extend(mv.new_vertices)
    if extra_rows:
        verts = np.vstack([verts, np.array(extra_rows, dtype=np.float64).reshape(-1, 2)])
    edges = net.edges.copy()
    removed = set()
    for mv in moves:
        for e, l, r in mv.relabels:
            edges[e, 2] = l
            edges[e, 3] = r
        for e, slot, vid in mv.rewires:
            edges[e, slot] = vid
        removed.update(mv.removed_edges)
    keep = np.ones(len(edges), dtype=bool)
    if removed:
        keep[list(removed)] = False
    new_rows = []
    for mv, base in zip(moves, bases):
        for t, h, l, r, _, _ in mv.added_edges:
            tt = base - 1 - t if t < 0 else t   # -1 -> base, -2 -> base + 1
            hh = base - 1 - h if h < 0 else h
            new_rows.append((tt, hh, l, r))
    edges = edges[keep]
    if new_rows:
        edges = np.vstack([edges, np.array(new_rows, dtype=np.int64)])
    return compact(net.replace(vertices=verts, edges=edges))


def apply_move(net, move):
    """Apply one move, returning the edited network (no validity check here)."""
    return apply_moves(net, [move])


def compact(net):
    """Drop unused vertices and remap edge endpoints."""
    if len(net.edges) == 0:
        return net.replace(vertices=np.zeros((0, 2)), edges=np.zeros((0, 4), dtype=np.int64))
    used = np.unique(net.edges[:, :2])
    remap = -np.ones(len(net.vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    edges = net.edges.copy()
    edges[:, 0] = remap[edges[:, 0]]
    edges[:, 1] = remap[edges[:, 1]]
    return net.replace(vertices=net.vertices[used], edges=edges)


def _boxes_overlap(b1, b2):
    return not (b1[2] < b2[0] or b2[2] < b1[0] or b1[3] < b2[1] or b2[3] < b1[1])


def _box_contains(outer, inner):
    return (
        outer[0] <= inner[0] and outer[1] <= inner[1]
        and outer[2] >= inner[2] and outer[3] >= inner[3]
    )


def apply_best_moves(net, j, weight, log=None, within=None):
    """Greedy pass: admissible moves with pairwise disjoint supports, largest
    weighted drop first.  Returns the deformed network and the achieved drop.

    Disjoint supports make the per-move drops additive, so the reported drop
    is exactly the realized global mass reduction.  `within` restricts the
    search to moves supported inside a compact box.
    """
    candidates = enumerate_moves(net, j, weight)
    admissible = []
    for mv in candidates:
        if mv.mass_delta >= -1e-15:
            continue
        if within is not None and not _box_contains(within, mv.support):
            continue
        if _fast_reject(mv, j):
            continue
        rep = check_admissible(net, mv, j, weight)
        if rep.admissible:
            admissible.append((mv, rep))
    admissible.sort(key=lambda pair: pair[0].sort_key())
    taken = []
    accepted = []
    for mv, rep in admissible:
        if any(_boxes_overlap(mv.support, box) for box in taken):
            continue
        taken.append(mv.support)
        accepted.append((mv, rep))

    # screen each move alone before committing the batch
    applied = []
    for mv, rep in accepted:
        problems = apply_move(net, mv).validate()
        if problems:
            if log is not None:
                log.append(f"rolled back {mv.kind} at {mv.anchor}: {problems[0]}")
            continue
        applied.append((mv, rep))
    if not applied:
        return net, DeltaVcEstimate(achieved_drop=0.0, moves=[])
    out = apply_moves(net, [mv for mv, _ in applied])
    problems = out.validate()
    if problems:
        # disjoint supports should not interact; keep only the best move
        if log is not None:
            log.append(f"batch conflict, keeping best move only: {problems[0]}")
        applied = applied[:1]
        out = apply_moves(net, [applied[0][0]])
    drop = sum(mv.mass_drop for mv, _ in applied)
    return out, DeltaVcEstimate(achieved_drop=drop, moves=applied)
