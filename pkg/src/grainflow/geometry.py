"""Labeled planar partitions: grains, polygonal boundaries, areas and masses.

A network is a straight-segment embedding of the boundary of a labeled open
partition of the plane.  Each edge carries the grain label on either side of
its (tail -> head) direction; edges with equal labels on both sides are
"interior boundary" (counted in mass, excluded from every reduced boundary).
Exactly one label marks the unbounded grain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GEOM_TOL_FACTOR = 1e-9


class TopologyError(Exception):
    """Grain boundary structure is inconsistent (open cycles, bad labels)."""


class InfiniteAreaError(ValueError):
    """Area was requested for the unbounded (exterior) grain."""


@dataclass(frozen=True)
class GrainLabel:
    index: int
    is_exterior: bool = False


@dataclass(frozen=True)
class GrainSummary:
    label: int
    area: float           # inf for the exterior grain
    reduced_perimeter: float


class LabeledNetwork:
    """Immutable snapshot of a labeled planar network.

    Parameters
    ----------
    vertices : (K, 2) float array of vertex positions.
    edges : (M, 4) int array of rows (tail, head, left_label, right_label);
        labels are 1-based and the label left/right of the directed segment
        tail -> head identifies the adjacent grain.
    n_grains : total number of labels N (N >= 2).
    exterior : label of the unbounded grain (default N).
    time : epoch time carried by the snapshot.
    """

    def __init__(self, vertices, edges, n_grains, exterior=None, time=0.0):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 2)
        self.edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 4)
        self.n_grains = int(n_grains)
        self.exterior = int(exterior) if exterior is not None else self.n_grains
        self.time = float(time)
        if self.n_grains < 2:
            raise TopologyError("a partition needs at least two grains")
        if not (1 <= self.exterior <= self.n_grains):
            raise TopologyError(f"exterior label {self.exterior} out of range")

    # -- basic derived quantities -------------------------------------------

    def replace(self, vertices=None, edges=None, time=None):
        return LabeledNetwork(
            self.vertices if vertices is None else vertices,
            self.edges if edges is None else edges,
            self.n_grains,
            self.exterior,
            self.time if time is None else time,
        )

    @property
    def labels(self):
        return [GrainLabel(i, i == self.exterior) for i in range(1, self.n_grains + 1)]

    def edge_vectors(self):
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    def edge_lengths(self):
        return np.linalg.norm(self.edge_vectors(), axis=1)

    def edge_midpoints(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def interior_edge_ids(self):
        """Edges with the same grain on both sides (dE_i minus the reduced part)."""
        return np.nonzero(self.edges[:, 2] == self.edges[:, 3])[0]

    def bounding_box(self):
        if len(self.vertices) == 0:
            return np.zeros(2), np.zeros(2)
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def geom_tol(self):
        lo, hi = self.bounding_box()
        diam = float(np.linalg.norm(hi - lo))
        return GEOM_TOL_FACTOR * max(diam, 1.0)

    def vertex_degrees(self):
        deg = np.zeros(len(self.vertices), dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    # -- areas ----------------------------------------------------------------

    def directed_boundary(self, label):
        """Directed edge index/orientation pairs with grain `label` on the left.

        Returns (edge_ids, signs): sign +1 keeps tail->head, -1 reverses.
        Interior-boundary edges are excluded (they would cancel pairwise).
        """
        left = self.edges[:, 2]
        right = self.edges[:, 3]
        distinct = left != right
        pos = np.nonzero(distinct & (left == label))[0]
        neg = np.nonzero(distinct & (right == label))[0]
        ids = np.concatenate([pos, neg])
        signs = np.concatenate([np.ones(len(pos), np.int64), -np.ones(len(neg), np.int64)])
        return ids, signs

    def _check_closed(self, label, ids, signs):
        # every vertex of the directed boundary must balance in/out degree
        balance: dict[int, int] = {}
        for e, s in zip(ids, signs):
            t, h = self.edges[e, 0], self.edges[e, 1]
            if s < 0:
                t, h = h, t
            balance[t] = balance.get(t, 0) + 1
            balance[h] = balance.get(h, 0) - 1
        bad = [v for v, b in balance.items() if b != 0]
        if bad:
            raise TopologyError(f"grain {label}: boundary cycle does not close at vertices {bad[:4]}")

    def grain_area(self, label):
        """Area of a bounded grain via signed shoelace over its oriented boundary."""
        if isinstance(label, GrainLabel):
            label = label.index
        if label == self.exterior:
            raise InfiniteAreaError(f"grain {label} is the exterior grain")
        if not 1 <= label <= self.n_grains:
            raise TopologyError(f"label {label} out of range")
        ids, signs = self.directed_boundary(label)
        if len(ids) == 0:
            raise TopologyError(f"grain {label} has no boundary edges")
        self._check_closed(label, ids, signs)
        a = self.vertices[self.edges[ids, 0]]
        b = self.vertices[self.edges[ids, 1]]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        area = 0.5 * float(np.sum(signs * cross))
        if area < -self.geom_tol():
            raise TopologyError(f"grain {label}: negative oriented area {area}")
        return max(area, 0.0)

    def grain_areas(self):
        """Map label -> area for the bounded grains; emptied grains report 0."""
        out = {}
        for i in range(1, self.n_grains + 1):
            if i == self.exterior:
                continue
            try:
                out[i] = self.grain_area(i)
            except TopologyError:
                ids, _ = self.directed_boundary(i)
                if len(ids):
                    raise
                out[i] = 0.0
        return out

    def reduced_boundary(self, label):
        """Edges of the reduced boundary of `label` with outward unit normals.

        Returns (edge_ids, normals); on a shared edge the normals seen from the
        two grains are opposite.  The outward normal is the tangent rotated by
        -90 deg when the grain lies on the left of tail -> head.
        """
        if isinstance(label, GrainLabel):
            label = label.index
        ids, signs = self.directed_boundary(label)
        vec = self.edge_vectors()[ids]
        lengths = np.linalg.norm(vec, axis=1)
        lengths[lengths == 0.0] = 1.0
        tang = vec / lengths[:, None]
        # grain on the left of the directed edge: outward normal points right
        normals = np.column_stack([tang[:, 1], -tang[:, 0]]) * signs[:, None]
        return ids, normals

    def grain_summaries(self):
        areas = self.grain_areas()
        out = []
        for lab in self.labels:
            area = np.inf if lab.is_exterior else areas[lab.index]
            ids, _ = self.reduced_boundary(lab.index)
            perim = float(self.edge_lengths()[ids].sum())
            out.append(GrainSummary(lab.index, area, perim))
        return out

    # -- mass -----------------------------------------------------------------

    def total_mass(self, weight=None):
        """Weighted boundary measure: sum over edges of the line integral of Omega.

        With `weight` None (or the constant-one weight) this is the total edge
        length.  Interior-boundary edges are included.
        """
        lengths = self.edge_lengths()
        if weight is None or getattr(weight, "is_constant", False):
            return float(lengths.sum())
        return float(np.sum(segment_omega_mass(
            self.vertices[self.edges[:, 0]], self.vertices[self.edges[:, 1]], weight)))

    # -- validation ------------------------------------------------------------

    def validate(self):
        """Return a list of invariant violations (empty when valid)."""
        problems: list[str] = []
        K = len(self.vertices)
        if len(self.edges) == 0:
            return problems
        if self.edges[:, :2].min() < 0 or self.edges[:, :2].max() >= K:
            problems.append("edge endpoint index out of range")
            return problems
        labs = self.edges[:, 2:]
        if labs.min() < 1 or labs.max() > self.n_grains:
            problems.append("edge label out of range")
        tol = self.geom_tol()
        lengths = self.edge_lengths()
        for e in np.nonzero(lengths <= tol)[0]:
            problems.append(f"degenerate edge {e} (length {lengths[e]:.3e})")
        problems.extend(self._label_consistency())
        problems.extend(self._intersections(tol))
        for i in range(1, self.n_grains + 1):
            if i == self.exterior or len(self.directed_boundary(i)[0]) == 0:
                continue  # emptied grains are legitimate
            try:
                self.grain_area(i)
            except TopologyError as err:
                problems.append(str(err))
        return problems

    def _label_consistency(self):
        """Around each vertex the cyclic sector labels must close up.

        An incident edge seen from the vertex has a label on the ccw and the cw
        side of its outward ray; consecutive rays in angular order must agree
        on the sector between them.
        """
        problems = []
        incident: dict[int, list[tuple[float, int, int]]] = {}
        vec = self.edge_vectors()
        for e, (t, h, l, r) in enumerate(self.edges):
            ang_out = np.arctan2(vec[e, 1], vec[e, 0])
            ang_in = np.arctan2(-vec[e, 1], -vec[e, 0])
            # v = tail: outward ray along +vec; left label sits ccw of the ray
            incident.setdefault(int(t), []).append((float(ang_out), int(l), int(r)))
            # v = head: outward ray along -vec; the edge's left side is cw of it
            incident.setdefault(int(h), []).append((float(ang_in), int(r), int(l)))
        for v, rays in incident.items():
            rays.sort()
            d = len(rays)
            for k in range(d):
                ccw_here = rays[k][1]
                cw_next = rays[(k + 1) % d][2]
                if ccw_here != cw_next:
                    problems.append(
                        f"label inconsistency at vertex {v}: sector sees {ccw_here} vs {cw_next}"
                    )
                    break
        return problems

    def _intersections(self, tol):
        from . import _accel

        pairs = _accel.segment_intersections(
            self.vertices[self.edges[:, 0]].copy(),
            self.vertices[self.edges[:, 1]].copy(),
            self.edges[:, :2].copy(),
            tol,
        )
        problems = []
        for i, j, px, py in pairs[:8]:
            problems.append(
                f"self-intersection of edges {int(i)} and {int(j)} near ({px:.6g}, {py:.6g})"
            )
        if len(pairs) > 8:
            problems.append(f"... {len(pairs) - 8} further intersections")
        return problems


def segment_omega_mass(a, b, weight, min_nodes=2):
    """Per-segment Gauss-Legendre line integral of a weight function."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    lengths = np.linalg.norm(b - a, axis=1)
    # 8-point Gauss-Legendre resolves the weights in use to ~1e-12 per segment
    nodes, w = np.polynomial.legendre.leggauss(max(8, min_nodes))
    s = 0.5 * (nodes + 1.0)
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    vals = weight.value(pts.reshape(-1, 2)).reshape(len(a), -1)
    return lengths * 0.5 * (vals * w[None, :]).sum(axis=1)


def snapshot_dict(net):
    """JSON-ready snapshot with areas and interior edge ids."""
    return {
        "time": net.time,
        "n_grains": net.n_grains,
        "exterior": net.exterior,
        "vertices": [[float(x), float(y)] for x, y in net.vertices],
        "edges": [[int(t), int(h), int(l), int(r)] for t, h, l, r in net.edges],
        "grain_areas": {str(k): float(v) for k, v in net.grain_areas().items()},
        "interior_edge_ids": [int(i) for i in net.interior_edge_ids()],
    }


def network_from_snapshot(obj):
    return LabeledNetwork(
        np.asarray(obj["vertices"], dtype=np.float64).reshape(-1, 2),
        np.asarray(obj["edges"], dtype=np.int64).reshape(-1, 4),
        obj["n_grains"],
        obj["exterior"],
        obj["time"],
    )
