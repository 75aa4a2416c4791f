"""Trajectory diagnostics: every identity and inequality checkable on a run.

Each operation reports the quantities on both sides of the relation it checks
together with the tolerance used, so a failure is attributable to either the
computation or the constant calibration.  The curvature entering all checks
is the epoch-wise smoothed mean curvature, the trajectory's only curvature
object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import cutoff_eta
from .varifold import CurvatureField, DiscreteVarifold

OMEGA_1 = 2.0  # volume of the 1-dimensional unit ball


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


@dataclass
class BumpTestFunction:
    """Compactly supported C^2 bump A (1 - |x-c|^2 / R^2)_+^3."""

    center: tuple
    radius: float
    amplitude: float = 1.0

    def _s(self, x):
        d2 = ((np.atleast_2d(x) - np.asarray(self.center)) ** 2).sum(axis=1)
        return d2 / self.radius**2

    def value(self, x, t=0.0):
        s = self._s(x)
        return self.amplitude * np.clip(1.0 - s, 0.0, None) ** 3

    def gradient(self, x, t=0.0):
        x2 = np.atleast_2d(x)
        s = self._s(x2)
        base = np.clip(1.0 - s, 0.0, None) ** 2
        coef = -6.0 * self.amplitude * base / self.radius**2
        return coef[:, None] * (x2 - np.asarray(self.center))

    def hessian(self, x, t=0.0):
        x2 = np.atleast_2d(x)
        s = self._s(x2)
        d = x2 - np.asarray(self.center)
        base = np.clip(1.0 - s, 0.0, None)
        eye = np.eye(2)[None]
        out = (
            24.0 * self.amplitude * base[:, None, None] / self.radius**4
            * d[:, :, None] * d[:, None, :]
            - 6.0 * self.amplitude * (base**2)[:, None, None] / self.radius**2 * eye
        )
        return out

    def dt(self, x, t=0.0):
        return np.zeros(len(np.atleast_2d(x)))


@dataclass
class BumpVectorField:
    """C^1 compactly supported vector field: bump profile times a direction
    field (constant, or radial about the bump center)."""

    center: tuple
    radius: float
    direction: tuple | None = None   # None -> radial

    def _bump(self):
        return BumpTestFunction(self.center, self.radius)

    def value(self, x):
        x2 = np.atleast_2d(x)
        prof = self._bump().value(x2)
        if self.direction is not None:
            return prof[:, None] * np.asarray(self.direction, dtype=np.float64)
        return prof[:, None] * (x2 - np.asarray(self.center))

    def jacobian(self, x):
        x2 = np.atleast_2d(x)
        prof = self._bump().value(x2)
        grad = self._bump().gradient(x2)
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=np.float64)
            return d[None, :, None] * grad[:, None, :]
        d = x2 - np.asarray(self.center)
        return d[:, :, None] * grad[:, None, :] + prof[:, None, None] * np.eye(2)[None]

    def divergence(self, x):
        jac = self.jacobian(x)
        return jac[:, 0, 0] + jac[:, 1, 1]

    def grad_mass(self, x, w):
        return float(np.sum(np.linalg.norm(self.jacobian(x), axis=(1, 2)) * w))


# ---------------------------------------------------------------------------
# per-snapshot curvature cache
# ---------------------------------------------------------------------------


class TrajectoryFieldCache:
    """Quadrature nodes and smoothed curvature per stored snapshot."""

    def __init__(self, traj, spacing=None):
        self.traj = traj
        self.spacing = spacing if spacing is not None else traj.suite.eps / 2.0
        self._cache = {}

    def at(self, idx):
        if idx not in self._cache:
            net = self.traj.snapshots[idx]
            dv = DiscreteVarifold.from_network(net)
            if dv.is_empty():
                self._cache[idx] = (np.zeros((0, 2)), np.zeros(0), np.zeros(0, np.int64),
                                    np.zeros((0, 2)))
            else:
                qx, qw, eids = dv.quadrature(self.spacing)
                fld = CurvatureField(dv, self.traj.suite, self.traj.weight).prepare(qx)
                self._cache[idx] = (qx, qw, eids, fld.evaluate(qx))
        return self._cache[idx]

    def snapshot_indices(self, t1, t2, tol=1e-12):
        times = np.array([s.time for s in self.traj.snapshots])
        return [int(i) for i in np.nonzero((times >= t1 - tol) & (times <= t2 + tol))[0]]


def phi_boundary_mass(net, phi, t=None, spacing=None):
    """||V_t||(phi) by per-segment Gauss quadrature."""
    dv = DiscreteVarifold.from_network(net)
    if dv.is_empty():
        return 0.0
    spacing = spacing if spacing is not None else max(net.edge_lengths().max(), 1e-12)
    qx, qw, _ = dv.quadrature(spacing)
    tt = net.time if t is None else t
    return float(np.asarray(phi.value(qx, tt)) @ qw)


# ---------------------------------------------------------------------------
# Brakke inequality residual
# ---------------------------------------------------------------------------


@dataclass
class BrakkeResult:
    t1: float
    t2: float
    lhs: float
    rhs: float
    residual: float
    dissipation: float       # integral of phi |h|^2
    tolerance: float
    deformation_free: bool
    passed: bool
    asserted: bool = True    # False when transport dwarfs the dissipation and
                             # the dissipation-relative tolerance is vacuous


def brakke_residual(traj, phi, t1, t2, cache=None, tol_factor=0.10, atol=1e-10):
    """LHS - RHS of the mass-change inequality for one test function.

    LHS is the change of the weighted boundary measure of phi; RHS integrates
    (-phi |h|^2 + grad phi . h + phi_t) over the trajectory (trapezoid in time
    over stored snapshots).  On smooth intervals the relation is an identity;
    epochs with applied deformation moves push the residual negative.
    """
    lo, hi = traj.snapshots[0].bounding_box()
    grid = np.linspace(0, 1, 9)
    gx, gy = np.meshgrid(lo[0] + (hi[0] - lo[0]) * grid, lo[1] + (hi[1] - lo[1]) * grid)
    if np.any(np.asarray(phi.value(np.column_stack([gx.ravel(), gy.ravel()]))) < -1e-12):
        raise ValueError("test function must be nonnegative")
    cache = cache if cache is not None else TrajectoryFieldCache(traj)
    idxs = cache.snapshot_indices(t1, t2)
    if len(idxs) < 2:
        raise ValueError(f"need at least two snapshots in [{t1}, {t2}]")
    snaps = [traj.snapshots[i] for i in idxs]
    times = np.array([s.time for s in snaps])
    lhs = (
        phi_boundary_mass(snaps[-1], phi, times[-1], spacing=traj.suite.eps / 2)
        - phi_boundary_mass(snaps[0], phi, times[0], spacing=traj.suite.eps / 2)
    )
    integrand = np.zeros(len(idxs))
    diss = np.zeros(len(idxs))
    for n, i in enumerate(idxs):
        qx, qw, _, h = cache.at(i)
        if len(qx) == 0:
            continue
        t = traj.snapshots[i].time
        pv = np.asarray(phi.value(qx, t))
        pg = np.asarray(phi.gradient(qx, t))
        pt = np.asarray(phi.dt(qx, t))
        h2 = (h * h).sum(axis=1)
        integrand[n] = float(
            np.sum((-pv * h2 + (pg * h).sum(axis=1) + pt) * qw)
        )
        diss[n] = float(np.sum(pv * h2 * qw))
    rhs = float(np.trapezoid(integrand, times))
    dissipation = float(np.trapezoid(diss, times))
    residual = lhs - rhs
    tolerance = tol_factor * dissipation + atol
    deformation_free = all(
        rec.moves_applied == 0 and rec.surgeries == 0
        for rec in traj.records if rec.t1 > times[0] + 1e-15 and rec.t0 < times[-1] - 1e-15
    )
    if deformation_free:
        passed = abs(residual) <= tolerance
    else:
        passed = residual <= tolerance
    asserted = dissipation >= 0.05 * (abs(lhs) + abs(rhs))
    return BrakkeResult(float(times[0]), float(times[-1]), lhs, rhs, residual,
                        dissipation, tolerance, deformation_free, passed, asserted)


# ---------------------------------------------------------------------------
# volume identity
# ---------------------------------------------------------------------------


@dataclass
class VolumeIdentityResult:
    grain: int
    t1: float
    t2: float
    dvol: float
    flux: float
    residual: float


def volume_identity_residual(traj, grain, t1, t2):
    """Grain volume change against the accumulated flux of h . nu over its
    reduced boundary (midpoint rule per epoch, recorded during the run)."""
    snaps = [s for s in traj.snapshots if t1 - 1e-12 <= s.time <= t2 + 1e-12]
    if len(snaps) < 2:
        raise ValueError("interval contains fewer than two snapshots")
    first, last = snaps[0], snaps[-1]
    if grain == first.exterior:
        raise ValueError("volume identity applies to bounded grains")
    a1 = first.grain_areas().get(grain, 0.0)
    a2 = last.grain_areas().get(grain, 0.0)
    flux = sum(
        rec.dt * rec.fluxes.get(grain, 0.0)
        for rec in traj.records
        if rec.t0 >= first.time - 1e-12 and rec.t1 <= last.time + 1e-12
    )
    dvol = a2 - a1
    return VolumeIdentityResult(grain, first.time, last.time, dvol, flux, dvol - flux)


# ---------------------------------------------------------------------------
# localized kernel masses, Huisken monotonicity, clearing out, density
# ---------------------------------------------------------------------------


def _near_varifold(net, y, radius):
    a = net.vertices[net.edges[:, 0]]
    b = net.vertices[net.edges[:, 1]]
    d = b - a
    ll = (d * d).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.clip(((np.asarray(y) - a) * d).sum(axis=1) / np.where(ll == 0, 1, ll), 0, 1)
    near = a + s[:, None] * d
    dist = np.linalg.norm(near - np.asarray(y), axis=1)
    keep = dist <= radius
    return DiscreteVarifold(a[keep], b[keep], np.zeros((0, 2)), np.zeros((0, 2)))


def kernel_line_mass(net, y, fn, radius, spacing):
    """Line integral over the boundary of a radial profile fn(|x - y|)."""
    dv = _near_varifold(net, y, radius)
    if dv.is_empty():
        return 0.0
    qx, qw, _ = dv.quadrature(spacing)
    d = np.linalg.norm(qx - np.asarray(y), axis=1)
    return float(np.asarray(fn(d)) @ qw)


def ball_mass(net, y, r):
    """Exact length of the boundary inside the open ball U_r(y)."""
    a = net.vertices[net.edges[:, 0]]
    b = net.vertices[net.edges[:, 1]]
    if len(a) == 0:
        return 0.0
    d = b - a
    y = np.asarray(y, dtype=np.float64)
    aa = (d * d).sum(axis=1)
    bb = 2.0 * ((a - y) * d).sum(axis=1)
    cc = ((a - y) ** 2).sum(axis=1) - r * r
    disc = bb * bb - 4 * aa * cc
    mask = (disc > 0) & (aa > 0)
    t0 = np.clip((-bb[mask] - np.sqrt(disc[mask])) / (2 * aa[mask]), 0.0, 1.0)
    t1 = np.clip((-bb[mask] + np.sqrt(disc[mask])) / (2 * aa[mask]), 0.0, 1.0)
    return float(np.sum((t1 - t0) * np.sqrt(aa[mask])))


@dataclass
class HuiskenResult:
    y: tuple
    s: float
    r: float
    t1: float
    t2: float
    lhs: float
    rhs: float
    residual: float
    cn: float
    passed: bool


def huisken_residual(traj, y, s, r, t1, t2, cn=40.0, tol=1e-9):
    """Change of the truncated Gaussian-weighted mass against the local-mass
    bound; nonpositive residual is the monotonicity statement."""
    if not (t1 < t2 < s):
        raise ValueError("need t1 < t2 < s")
    y = np.asarray(y, dtype=np.float64)

    def mass_at(t):
        net = traj.snapshot_at(t)
        sigma = math.sqrt(2.0 * (s - net.time))
        spacing = min(r, sigma) / 6.0
        return kernel_line_mass(
            net, y,
            lambda d: cutoff_eta(d / r) * np.exp(-d * d / (4 * (s - net.time)))
            / math.sqrt(4 * math.pi * (s - net.time)),
            2.0 * r, spacing,
        ), net.time

    m2, tt2 = mass_at(t2)
    m1, tt1 = mass_at(t1)
    lhs = m2 - m1
    sup_ratio = 0.0
    for snap in traj.snapshots:
        if tt1 - 1e-12 <= snap.time <= tt2 + 1e-12:
            sup_ratio = max(sup_ratio, ball_mass(snap, y, 2 * r) / r)
    rhs = cn * (tt2 - tt1) / r**2 * sup_ratio
    residual = lhs - rhs
    return HuiskenResult((float(y[0]), float(y[1])), s, r, tt1, tt2, lhs, rhs, residual, cn,
                         bool(residual <= tol))


@dataclass
class DensityReport:
    t: float
    sup_ratio: float
    threshold: float
    passed: bool
    worst: tuple = ()


def density_report(traj, t, radii, points=None, delta0=0.1):
    """Sup over sample points and radii of mass(B_r(x)) / (omega_1 r); flags
    initial data at or above 2 - delta0."""
    net = traj.snapshot_at(t)
    if points is None:
        points = np.vstack([net.vertices, net.edge_midpoints()])
    points = np.atleast_2d(points)
    sup = 0.0
    worst = ()
    for r in radii:
        if not (0 < r <= 1):
            raise ValueError("radii must lie in (0, 1]")
        for p in points:
            ratio = ball_mass(net, p, r) / (OMEGA_1 * r)
            if ratio > sup:
                sup = ratio
                worst = (float(p[0]), float(p[1]), float(r))
    threshold = 2.0 - delta0
    return DensityReport(net.time, sup, threshold, bool(sup < threshold), worst)


@dataclass
class ClearingOutResult:
    y: tuple
    t: float
    r: float
    delta0: float
    kernel_mass: float
    kernel_predicts: bool
    density_ratio: float
    theta0: float
    density_predicts: bool
    check_time: float
    distance: float
    outcome: bool


def clearing_out_check(traj, y, t, r, delta0=0.01):
    """Clearing out: low Gaussian-weighted (or low density-ratio) mass at
    scale r predicts no boundary near y at time t + delta0 r^2."""
    if not (0 < r < 0.5):
        raise ValueError("r must lie in (0, 1/2)")
    y = np.asarray(y, dtype=np.float64)
    net = traj.snapshot_at(t)
    sigma = r * math.sqrt(2.0 * delta0)
    kmass = kernel_line_mass(
        net, y,
        lambda d: cutoff_eta(d / r) * np.exp(-d * d / (4 * delta0 * r * r))
        / math.sqrt(4 * math.pi * delta0 * r * r),
        2.0 * r, min(sigma, r) / 6.0,
    )
    kernel_predicts = kmass < 0.5
    ratio = ball_mass(net, y, r) / r
    theta0 = math.sqrt(4 * math.pi * delta0) / 4.0   # (4 pi d0)^{n/2} / 2^{n+1}, n = 1
    density_predicts = ratio < theta0
    t_check = net.time + delta0 * r * r
    later = traj.snapshot_at(t_check)
    if len(later.edges) == 0:
        dist = math.inf
    else:
        a = later.vertices[later.edges[:, 0]]
        b = later.vertices[later.edges[:, 1]]
        d = b - a
        ll = (d * d).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.clip(((y - a) * d).sum(axis=1) / np.where(ll == 0, 1, ll), 0, 1)
        dist = float(np.linalg.norm(a + s[:, None] * d - y, axis=1).min())
    tol = net.geom_tol() if len(net.edges) else 0.0
    outcome = (not (kernel_predicts or density_predicts)) or dist > tol
    return ClearingOutResult((float(y[0]), float(y[1])), net.time, r, delta0, kmass, kernel_predicts,
                             ratio, theta0, density_predicts, t_check, dist, outcome)


# ---------------------------------------------------------------------------
# extinction
# ---------------------------------------------------------------------------


@dataclass
class ExtinctionReport:
    measured: float
    bound: float
    reached: bool
    passed: bool
    tolerance: float


def extinction_report(traj, tol=0.05):
    """Lower bound 2 (|E(0)| / mass(0))^2 against the measured extinction time.

    If the run ended before extinction the measured value is only a lower
    estimate and the report is flagged (reached = False).
    """
    first = traj.snapshots[0]
    area0 = sum(first.grain_areas().values())
    mass0 = first.total_mass()   # unweighted length of the initial boundary
    bound = 2.0 * (area0 / mass0) ** 2 if mass0 > 0 else 0.0
    if traj.extinction_time is not None:
        measured = traj.extinction_time
        reached = True
    else:
        measured = traj.snapshots[-1].time
        reached = False
    passed = measured >= bound * (1.0 - tol) or not reached
    return ExtinctionReport(measured, bound, reached, bool(passed), tol)


# ---------------------------------------------------------------------------
# BV flow checks
# ---------------------------------------------------------------------------


@dataclass
class BVChecksResult:
    reflection_structural: bool
    weak_form_residual: float
    weak_form_scale: float
    weak_form_ratio: float
    dissipation_lhs: float
    dissipation_rhs: float
    dissipation_passed: bool


def bv_flow_checks(traj, g, t1, t2, cache=None):
    """Weak-form curvature residual for a test vector field plus the
    interface-measure dissipation inequality, with velocities h . nu.

    The reflection condition holds structurally: the curvature is evaluated
    once per edge and the normals seen from the two sides are opposite.
    """
    cache = cache if cache is not None else TrajectoryFieldCache(traj)
    idxs = cache.snapshot_indices(t1, t2)
    if len(idxs) < 2:
        raise ValueError("need two snapshots")
    times = []
    weak = []
    vsq = []
    scale = []
    for i in idxs:
        net = traj.snapshots[i]
        qx, qw, eids, h = cache.at(i)
        times.append(net.time)
        if len(qx) == 0:
            weak.append(0.0)
            vsq.append(0.0)
            scale.append(0.0)
            continue
        vec = net.edge_vectors()
        lens = np.where(net.edge_lengths() == 0, 1, net.edge_lengths())
        tang = vec / lens[:, None]
        nrm = np.column_stack([tang[:, 1], -tang[:, 0]])
        distinct = net.edges[:, 2] != net.edges[:, 3]
        mask = distinct[eids]
        nu = nrm[eids[mask]]
        w = qw[mask]
        hh = h[mask]
        gv = g.value(qx[mask])
        jac = g.jacobian(qx[mask])
        div = jac[:, 0, 0] + jac[:, 1, 1]
        nn_grad = np.einsum("ki,kij,kj->k", nu, jac, nu)
        hnu = (hh * nu).sum(axis=1)
        term = div - nn_grad + hnu * (nu * gv).sum(axis=1)
        weak.append(2.0 * float(np.sum(term * w)))
        vsq.append(2.0 * float(np.sum(hnu * hnu * w)))
        scale.append(2.0 * g.grad_mass(qx[mask], w))
    times = np.array(times)
    weak_res = float(np.trapezoid(np.array(weak), times))
    weak_scale = float(np.trapezoid(np.array(scale), times)) or 1e-300
    d_int = float(np.trapezoid(np.array(vsq), times))

    def interface_measure(net):
        distinct = net.edges[:, 2] != net.edges[:, 3]
        return 2.0 * float(net.edge_lengths()[distinct].sum())

    e1 = interface_measure(traj.snapshots[idxs[0]])
    e2 = interface_measure(traj.snapshots[idxs[-1]])
    lhs = e2 + d_int
    # trapezoid-in-time and edge-midline quadrature both carry O(dt_snap) slack
    rhs = e1 * (1.0 + 0.02) + 1e-9
    return BVChecksResult(
        reflection_structural=True,
        weak_form_residual=weak_res,
        weak_form_scale=weak_scale,
        weak_form_ratio=abs(weak_res) / weak_scale,
        dissipation_lhs=lhs,
        dissipation_rhs=rhs,
        dissipation_passed=bool(lhs <= rhs),
    )


# ---------------------------------------------------------------------------
# junctions and tangential alignment
# ---------------------------------------------------------------------------


def _chain_from(net, vertex, first_edge, max_len):
    """Walk degree-2 vertices away from `vertex`, returning the polyline."""
    degrees = net.vertex_degrees()
    by_vertex: dict[int, list] = {}
    for e, (t, h, _, _) in enumerate(net.edges):
        by_vertex.setdefault(int(t), []).append((e, int(h)))
        by_vertex.setdefault(int(h), []).append((e, int(t)))
    pts = [net.vertices[vertex]]
    prev_edge = first_edge
    t, h = (int(x) for x in net.edges[first_edge, :2])
    cur = h if t == vertex else t
    length = 0.0
    while True:
        pts.append(net.vertices[cur])
        length += float(np.linalg.norm(pts[-1] - pts[-2]))
        if length >= max_len or degrees[cur] != 2:
            break
        nxt = [(e, o) for e, o in by_vertex[cur] if e != prev_edge]
        if len(nxt) != 1:
            break
        prev_edge, cur = nxt[0]
    return np.array(pts)


def _extrapolated_ray(pts, s_min):
    """Tangent direction at the chain start, from a linear fit of chord angle
    against arclength outside the smoothing boundary layer."""
    seg = np.diff(pts, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    ang = np.unwrap(np.arctan2(seg[:, 1], seg[:, 0]))
    s = np.concatenate([[0.0], np.cumsum(lens)])
    mid = 0.5 * (s[:-1] + s[1:])
    sel = mid >= s_min
    if sel.sum() < 2:
        return float(ang[0])
    coef = np.polyfit(mid[sel], ang[sel], 1)
    return float(np.polyval(coef, 0.0))


def junction_angles(net, fit_radius=0.0):
    """Sector angles (degrees) at each vertex of degree >= 3.

    With fit_radius = 0 the incident chord directions are used directly.  A
    positive fit_radius instead extrapolates each incident curve's tangent to
    the junction from chords at arclength [fit_radius/3, fit_radius], stepping
    over the smoothing-scale boundary layer around the junction.
    """
    rays: dict[int, list] = {}
    vec = net.edge_vectors()
    degrees = net.vertex_degrees()
    for e, (t, h, _, _) in enumerate(net.edges):
        a = math.atan2(vec[e, 1], vec[e, 0])
        for v, base in ((int(t), a), (int(h), a + math.pi)):
            if degrees[v] < 3:
                continue
            if fit_radius > 0:
                pts = _chain_from(net, v, e, fit_radius)
                base = _extrapolated_ray(pts, fit_radius / 3.0)
            rays.setdefault(v, []).append(base)
    out = {}
    for v, angles in rays.items():
        if len(angles) < 3:
            continue
        angles = np.sort(np.mod(angles, 2 * math.pi))
        gaps = np.diff(np.append(angles, angles[0] + 2 * math.pi))
        out[v] = sorted(float(np.degrees(g)) for g in gaps)
    return out


@dataclass
class TangentialReport:
    sup_ratio: float
    mean_ratio: float
    samples: int


def tangential_component_report(traj, t=None, cache=None):
    """Sup of |h . tau| / (|h| + eps) over smooth (degree-2) boundary samples."""
    cache = cache if cache is not None else TrajectoryFieldCache(traj)
    net = traj.snapshot_at(t if t is not None else traj.snapshots[0].time)
    idx = [i for i, s in enumerate(traj.snapshots) if s is net][0]
    qx, qw, eids, h = cache.at(idx)
    if len(qx) == 0:
        return TangentialReport(0.0, 0.0, 0)
    degrees = net.vertex_degrees()
    smooth_edges = np.array([
        degrees[t] == 2 and degrees[h] == 2 for t, h, _, _ in net.edges
    ])
    mask = smooth_edges[eids]
    if not mask.any():
        return TangentialReport(0.0, 0.0, 0)
    vec = net.edge_vectors()
    lens = np.where(net.edge_lengths() == 0, 1, net.edge_lengths())
    tang = (vec / lens[:, None])[eids[mask]]
    hh = h[mask]
    ratio = np.abs((hh * tang).sum(axis=1)) / (np.linalg.norm(hh, axis=1) + traj.suite.eps)
    return TangentialReport(float(ratio.max()), float(ratio.mean()), int(mask.sum()))


# ---------------------------------------------------------------------------
# aggregate report
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    brakke: list = field(default_factory=list)
    volume_identity: list = field(default_factory=list)
    dissipation_ok: bool = True
    dissipation_failures: int = 0
    huisken: list = field(default_factory=list)
    density: list = field(default_factory=list)
    clearing_out: list = field(default_factory=list)
    extinction: ExtinctionReport | None = None
    angles: dict = field(default_factory=dict)
    bv: BVChecksResult | None = None
    tangential: TangentialReport | None = None
    notes: list = field(default_factory=list)

    def all_passed(self):
        checks = [r.passed for r in self.brakke if r.asserted]
        checks += [self.dissipation_ok]
        checks += [r.passed for r in self.huisken]
        checks += [r.passed for r in self.density]
        checks += [r.outcome for r in self.clearing_out]
        if self.extinction is not None:
            checks.append(self.extinction.passed)
        if self.bv is not None:
            checks.append(self.bv.dissipation_passed)
        return all(checks) if checks else True


def run_standard_diagnostics(traj, n_intervals=6, cn=40.0, delta0_clear=0.01,
                             delta0_density=0.1, r0_density=0.05):
    """The battery the diagnose command runs over a stored trajectory."""
    rep = DiagnosticsReport()
    cache = TrajectoryFieldCache(traj)
    snaps = traj.snapshots
    t_end = snaps[-1].time
    first = snaps[0]
    lo, hi = first.bounding_box()
    center = 0.5 * (lo + hi)
    diam = float(np.linalg.norm(hi - lo))

    def pt(arr):
        return (float(arr[0]), float(arr[1]))

    bumps = [
        BumpTestFunction(pt(center), max(diam, 1e-3)),
        BumpTestFunction(pt(center + [0.3 * diam, 0]), 0.45 * diam),
        BumpTestFunction(pt(center - [0.3 * diam, 0]), 0.45 * diam),
        BumpTestFunction(pt(center + [0, 0.3 * diam]), 0.45 * diam),
        BumpTestFunction(pt(center), 0.3 * diam),
    ]
    times = [s.time for s in snaps]
    marks = np.linspace(times[0], t_end, n_intervals + 1)
    for phi in bumps[: max(1, min(5, len(bumps)))]:
        for k in range(n_intervals):
            t1, t2 = float(marks[k]), float(marks[k + 1])
            try:
                rep.brakke.append(brakke_residual(traj, phi, t1, t2, cache=cache))
            except ValueError:
                continue

    for grain in range(1, first.n_grains + 1):
        if grain == first.exterior:
            continue
        try:
            rep.volume_identity.append(
                volume_identity_residual(traj, grain, times[0], t_end))
        except ValueError:
            continue

    rep.dissipation_failures = sum(1 for r in traj.records if not r.dissipation_ok)
    rep.dissipation_ok = rep.dissipation_failures == 0

    r_h = min(0.45, 0.25 * diam)
    if t_end > 0 and r_h > 0:
        rep.huisken.append(huisken_residual(
            traj, center, t_end * 1.05 + 1e-6, r_h, times[0], t_end * 0.95, cn=cn))

    radii = [r for r in (r0_density, r0_density / 2, r0_density / 4) if r > 0]
    rep.density.append(density_report(traj, times[0], radii, delta0=delta0_density))

    probe_r = min(0.4, max(0.05, 0.1 * diam))
    probes = [center, center + [0.45 * diam, 0.45 * diam], lo - 1.0]
    for p in probes:
        if t_end >= delta0_clear * probe_r**2:
            rep.clearing_out.append(
                clearing_out_check(traj, p, times[0], probe_r, delta0_clear))

    rep.extinction = extinction_report(traj)
    rep.angles = junction_angles(snaps[-1] if len(snaps[-1].edges) else snaps[0])
    g = BumpVectorField(pt(center), max(diam, 1e-3))
    try:
        rep.bv = bv_flow_checks(traj, g, times[0], t_end, cache=cache)
    except ValueError:
        rep.bv = None
    rep.tangential = tangential_component_report(traj, times[0], cache=cache)
    if traj.aborted:
        rep.notes.append(f"run aborted: {traj.abort_reason}")
    flagged = sum(r.flagged_surgeries for r in traj.records)
    if flagged:
        rep.notes.append(f"{flagged} flagged surgeries; run excluded from assertions")
    return rep
