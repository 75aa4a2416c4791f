"""Epoch loop: deformation step, curvature advection, resampling, surgery.

Each epoch applies (1) the greedy volume-controlled deformation pass, then
(2) moves every vertex by dt * h_eps, (3) resamples edges toward the target
spacing (area changes are recorded in the error ledger, junction vertices are
never touched), and (4) repairs or aborts on self-intersections.  The time
step is the largest dyadic 2^-p below eps^kappa, halved per epoch while the
measured max |grad h_eps| violates the diffeomorphism guard dt * g <= 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel, deformation
from .geometry import LabeledNetwork
from .kernels import KernelSuite, WeightOmega
from .varifold import CurvatureField, DiscreteVarifold, gradient_bound_check


class RunAborted(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


def dyadic_floor(x):
    """Largest 2^-p (integer p >= 0) not exceeding x."""
    if x <= 0:
        raise ValueError("time step must be positive")
    p = max(0, math.ceil(-math.log2(x) - 1e-12))
    return 2.0 ** (-p)


@dataclass
class EpochSchedule:
    j: int
    eps: float
    kappa: float = 2.0
    T: float = 0.1
    dt: float | None = None
    h_res: float | None = None

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.dt is None:
            self.dt = dyadic_floor(self.eps**self.kappa)
        else:
            self.dt = dyadic_floor(self.dt)
        if self.h_res is None:
            self.h_res = self.eps / 2.0

    def check_weight(self, weight):
        need = max(1, math.ceil(weight.c1))
        if self.j < need:
            raise ValueError(f"j = {self.j} below max(1, ceil(c1)) = {need}")


@dataclass
class EpochRecord:
    k: int
    t0: float
    t1: float
    dt: float
    mass_start: float
    mass_after_deform: float
    mass_end: float
    mass_drop: float
    moves_applied: int
    max_volume_delta: float
    energy: float
    max_h: float
    max_grad_h: float
    guard_halvings: int
    fluxes: dict
    areas: dict
    resample_area: dict
    resample_area_abs: float
    resample_mass_abs: float
    dissipation_lhs: float
    dissipation_rhs: float
    dissipation_ok: bool
    side_flips: int
    surgeries: int = 0
    flagged_surgeries: int = 0
    log: list = field(default_factory=list)


@dataclass
class FlowState:
    net: LabeledNetwork
    k: int = 0
    t: float = 0.0


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------


def resample(net, h_res):
    """Split long edges, merge chains of short edges; junctions stay fixed.

    Returns (net', per-grain signed area change, |area| ledger, |mass| ledger).
    Splits are collinear (zero area and mass change); a merge replaces the
    path a-m-b by the chord a-b, cutting the triangle (a, m, b).
    """
    degrees = net.vertex_degrees()
    lengths = net.edge_lengths()
    area_delta: dict[int, float] = {}
    area_abs = 0.0
    mass_abs = 0.0

    # merges: degree-2 vertices whose incident edges are both short
    by_vertex: dict[int, list] = {}
    for e, (t, h, l, r) in enumerate(net.edges):
        by_vertex.setdefault(int(t), []).append(e)
        by_vertex.setdefault(int(h), []).append(e)
    removed_edges = set()
    removed_vertices = set()
    new_rows = []
    for m, inc in by_vertex.items():
        if degrees[m] != 2 or len(inc) != 2:
            continue
        e1, e2 = inc
        if e1 in removed_edges or e2 in removed_edges:
            continue
        if lengths[e1] >= 0.5 * h_res or lengths[e2] >= 0.5 * h_res:
            continue
        t1, h1, l1, r1 = (int(x) for x in net.edges[e1])
        t2, h2, l2, r2 = (int(x) for x in net.edges[e2])
        # orient both along the path a -> m -> b
        if h1 == m:
            a, lab = t1, (l1, r1)
        else:
            a, lab = h1, (r1, l1)
        if t2 == m:
            b, lab2 = h2, (l2, r2)
        else:
            b, lab2 = t2, (r2, l2)
        if lab != lab2 or a == b:
            continue
        pa, pm, pb = net.vertices[a], net.vertices[m], net.vertices[b]
        tri = 0.5 * float(
            (pa[0] - pm[0]) * (pb[1] - pm[1]) - (pa[1] - pm[1]) * (pb[0] - pm[0])
        )
        # path a->m->b replaced by the chord a->b: the grain on the left
        # gains the signed triangle (a, m, b)
        l, r = lab
        if l != r:
            area_delta[l] = area_delta.get(l, 0.0) + tri
            area_delta[r] = area_delta.get(r, 0.0) - tri
        area_abs += abs(tri)
        mass_abs += float(np.linalg.norm(pa - pm) + np.linalg.norm(pm - pb)
                          - np.linalg.norm(pa - pb))
        removed_edges.update((e1, e2))
        removed_vertices.add(m)
        new_rows.append((a, b, l, r))

    keep = np.ones(len(net.edges), dtype=bool)
    if removed_edges:
        keep[list(removed_edges)] = False
    edges = net.edges[keep]
    if new_rows:
        edges = np.vstack([edges, np.array(new_rows, dtype=np.int64)])
    net = deformation.compact(net.replace(edges=edges))

    # splits
    lengths = net.edge_lengths()
    long = np.nonzero(lengths > 1.5 * h_res)[0]
    if len(long):
        verts = [net.vertices]
        rows = [r for e, r in enumerate(net.edges) if e not in set(long.tolist())]
        base = len(net.vertices)
        for e in long:
            t, h, l, r = (int(x) for x in net.edges[e])
            a, b = net.vertices[t], net.vertices[h]
            n = int(np.ceil(lengths[e] / h_res))
            s = np.arange(1, n)[:, None] / n
            verts.append(a + s * (b - a))
            ids = [t] + list(range(base, base + n - 1)) + [h]
            base += n - 1
            rows.extend((ids[q], ids[q + 1], l, r) for q in range(n))
        net = net.replace(vertices=np.vstack(verts), edges=np.array(rows, dtype=np.int64))
    return net, area_delta, area_abs, mass_abs


# ---------------------------------------------------------------------------
# surgery
# ---------------------------------------------------------------------------


def _surgery(net, j, weight, log):
    """Resolve self-intersections by vanishing the tiny grains involved.

    Each repair is pushed through the admissibility checker; repairs failing
    the volume-control condition are still applied but flagged.
    """
    tol = net.geom_tol()
    hits = _accel.segment_intersections(
        net.vertices[net.edges[:, 0]].copy(), net.vertices[net.edges[:, 1]].copy(),
        net.edges[:, :2].copy(), tol,
    )
    if len(hits) == 0:
        return net, 0, 0
    involved = set()
    for i, jd, _, _ in hits:
        for e in (int(i), int(jd)):
            for lab in net.edges[e, 2:]:
                if lab != net.exterior:
                    involved.add(int(lab))
    surgeries = 0
    flagged = 0
    for lab in sorted(involved):
        mv = deformation.vanish_move_for(net, lab, weight)
        if mv is None:
            continue
        rep = deformation.check_admissible(net, mv, j, weight)
        if not rep.admissible:
            flagged += 1
            log.append(f"flagged surgery: vanish grain {lab} fails admissibility")
        net = deformation.apply_move(net, mv)
        surgeries += 1
        log.append(f"surgery: vanished grain {lab}")
    hits = _accel.segment_intersections(
        net.vertices[net.edges[:, 0]].copy(), net.vertices[net.edges[:, 1]].copy(),
        net.edges[:, :2].copy(), tol,
    )
    if len(hits):
        raise RunAborted(f"unresolvable self-intersection ({len(hits)} pairs)", state=net)
    return net, surgeries, flagged


def _side_flip_count(net, old_verts, new_verts, tol):
    """Vertices swapping sides of an incident edge in one step (should be 0)."""
    flips = 0
    neighbors: dict[int, set] = {}
    for t, h, _, _ in net.edges:
        neighbors.setdefault(int(t), set()).add(int(h))
        neighbors.setdefault(int(h), set()).add(int(t))
    def cross(u, v):
        return u[0] * v[1] - u[1] * v[0]

    for t, h, _, _ in net.edges:
        t, h = int(t), int(h)
        for w in (neighbors.get(t, set()) | neighbors.get(h, set())) - {t, h}:
            b0 = cross(old_verts[h] - old_verts[t], old_verts[w] - old_verts[t])
            b1 = cross(new_verts[h] - new_verts[t], new_verts[w] - new_verts[t])
            if abs(b0) > tol and abs(b1) > tol and np.sign(b0) != np.sign(b1):
                flips += 1
    return flips


# ---------------------------------------------------------------------------
# the epoch
# ---------------------------------------------------------------------------


def _grad_sample_points(net):
    degrees = net.vertex_degrees()
    junctions = np.nonzero(degrees >= 3)[0]
    stride = max(1, len(net.vertices) // 32)
    strided = np.arange(0, len(net.vertices), stride)
    ids = np.unique(np.concatenate([junctions, strided]))
    return net.vertices[ids]


def advance_epoch(state, schedule, suite, weight, record_sink=None):
    """One epoch; returns the new state (records appended to record_sink)."""
    log: list[str] = []
    net0 = state.net
    mass0 = net0.total_mass(weight)

    net1, est = deformation.apply_best_moves(net0, schedule.j, weight, log=log)
    mass1 = net1.total_mass(weight)
    max_vol_delta = max(
        (abs(v) for mv, _ in est.moves for v in mv.volume_deltas.values()), default=0.0,
    )

    if len(net1.edges) == 0:
        dt = schedule.dt
        record = EpochRecord(
            k=state.k + 1, t0=state.t, t1=state.t + dt, dt=dt,
            mass_start=mass0, mass_after_deform=mass1, mass_end=mass1,
            mass_drop=est.achieved_drop, moves_applied=len(est.moves),
            max_volume_delta=max_vol_delta, energy=0.0, max_h=0.0, max_grad_h=0.0,
            guard_halvings=0, fluxes={}, areas={}, resample_area={},
            resample_area_abs=0.0, resample_mass_abs=0.0,
            dissipation_lhs=(mass1 - mass0 + est.achieved_drop) / dt,
            dissipation_rhs=suite.eps**0.125 + 0.5 * weight.c1**2 * mass0,
            dissipation_ok=True, side_flips=0, log=log,
        )
        if record_sink is not None:
            record_sink.append(record)
        return FlowState(net1.replace(time=state.t + dt), state.k + 1, state.t + dt)

    dv = DiscreteVarifold.from_network(net1)
    mids = net1.edge_midpoints()
    samples = _grad_sample_points(net1)
    fd = suite.eps / 50.0
    stencil = np.concatenate([
        samples + [fd, 0], samples - [fd, 0], samples + [0, fd], samples - [0, fd],
    ])
    anchors = np.concatenate([net1.vertices, mids, stencil])
    fld = CurvatureField(dv, suite, weight).prepare(anchors)
    h_v = fld.evaluate(net1.vertices)
    h_mid = fld.evaluate(mids)
    max_h = float(np.linalg.norm(h_v, axis=1).max()) if len(h_v) else 0.0
    max_grad = gradient_bound_check(dv, suite, weight, samples, field=fld, step=fd)
    energy = fld.energy()

    dt = schedule.dt
    halvings = 0
    while dt * max_grad > 0.5 and halvings < 60:
        dt *= 0.5
        halvings += 1
        log.append(f"guard: dt halved to {dt}")

    # per-grain flux integral of h . nu over reduced boundaries (midpoint rule)
    lengths = net1.edge_lengths()
    fluxes = {}
    for i in range(1, net1.n_grains + 1):
        if i == net1.exterior:
            continue
        ids, normals = net1.reduced_boundary(i)
        if len(ids) == 0:
            fluxes[i] = 0.0
        else:
            fluxes[i] = float(np.sum((h_mid[ids] * normals).sum(axis=1) * lengths[ids]))

    new_verts = net1.vertices + dt * h_v
    flips = _side_flip_count(net1, net1.vertices, new_verts, net1.geom_tol() ** 2)
    net2 = net1.replace(vertices=new_verts, time=state.t + dt)

    net3, res_area, res_area_abs, res_mass_abs = resample(net2, schedule.h_res)

    surgeries = flagged = 0
    problems = [p for p in net3._intersections(net3.geom_tol())]
    if problems:
        net3, surgeries, flagged = _surgery(net3, schedule.j, weight, log)

    mass3 = net3.total_mass(weight)
    c1 = weight.c1
    slack = 2.0 * res_mass_abs / dt + 1e-9 * max(mass0, 1.0)
    lhs = (mass3 - mass0) / dt + est.achieved_drop / dt + 0.25 * energy
    rhs = suite.eps**0.125 + 0.5 * c1 * c1 * mass0 + slack
    record = EpochRecord(
        k=state.k + 1, t0=state.t, t1=state.t + dt, dt=dt,
        mass_start=mass0, mass_after_deform=mass1, mass_end=mass3,
        mass_drop=est.achieved_drop, moves_applied=len(est.moves),
        max_volume_delta=max_vol_delta, energy=energy, max_h=max_h,
        max_grad_h=max_grad, guard_halvings=halvings, fluxes=fluxes,
        areas=net3.grain_areas(), resample_area=res_area,
        resample_area_abs=res_area_abs, resample_mass_abs=res_mass_abs,
        dissipation_lhs=lhs, dissipation_rhs=rhs, dissipation_ok=bool(lhs <= rhs),
        side_flips=flips, surgeries=surgeries, flagged_surgeries=flagged, log=log,
    )
    if record_sink is not None:
        record_sink.append(record)
    return FlowState(net3, state.k + 1, state.t + dt)


@dataclass
class Trajectory:
    suite: KernelSuite
    weight: WeightOmega
    schedule: EpochSchedule
    snapshots: list            # LabeledNetwork at the snapshot cadence
    records: list              # every EpochRecord
    extinction_time: float | None = None
    aborted: bool = False
    abort_reason: str = ""

    def snapshot_at(self, t):
        """Snapshot closest to time t."""
        times = np.array([s.time for s in self.snapshots])
        return self.snapshots[int(np.argmin(np.abs(times - t)))]

    def bounded_area(self, net):
        return sum(net.grain_areas().values())


def run(net, schedule, suite=None, weight=None, snapshot_every=4):
    """Run the epoch loop from `net` until T, extinction, or abort."""
    suite = suite if suite is not None else KernelSuite(schedule.eps)
    weight = weight if weight is not None else WeightOmega()
    schedule.check_weight(weight)
    problems = net.validate()
    if problems:
        raise RunAborted(f"initial network invalid: {problems[:3]}", state=net)
    state = FlowState(net.replace(time=0.0))
    records: list[EpochRecord] = []
    snapshots = [state.net]
    traj = Trajectory(suite, weight, schedule, snapshots, records)
    while state.t < schedule.T - 1e-15:
        try:
            state = advance_epoch(state, schedule, suite, weight, record_sink=records)
        except RunAborted as err:
            traj.aborted = True
            traj.abort_reason = str(err)
            snapshots.append(state.net)
            return traj
        if state.k % snapshot_every == 0:
            snapshots.append(state.net)
        if len(state.net.edges) == 0 or sum(state.net.grain_areas().values()) <= 0.0:
            traj.extinction_time = state.t
            break
    if snapshots[-1] is not state.net:
        snapshots.append(state.net)
    return traj
