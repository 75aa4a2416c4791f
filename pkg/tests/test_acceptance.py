"""Acceptance criteria, one test per criterion, one printed verdict line each.

The trajectories are produced once per session by fixtures; JIT compilation
is triggered by a tiny warmup run so the timed run measures the solver, not
the compiler.
"""

import time

import numpy as np
import pytest

from grainflow import scenarios as sc
from grainflow.deformation import apply_best_moves
from grainflow.diagnostics import (
    BumpTestFunction,
    TrajectoryFieldCache,
    brakke_residual,
    clearing_out_check,
    density_report,
    extinction_report,
    junction_angles,
    volume_identity_residual,
)
from grainflow.kernels import KernelSuite, WeightOmega
from grainflow.stepper import EpochSchedule, run
from grainflow.varifold import DiscreteVarifold, smoothed_first_variation

from test_varifold import quadrature_first_variation_oracle

EPS = 0.02
R0 = 0.5

VERDICTS = []


def verdict(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    VERDICTS.append(line)
    return ok


@pytest.fixture(scope="session")
def warmup():
    net = sc.circle(r0=0.2, segments=48)
    run(net, EpochSchedule(j=8, eps=0.05, T=0.002), weight=WeightOmega(),
        snapshot_every=64)


@pytest.fixture(scope="session")
def circle_run(warmup):
    net = sc.circle(r0=R0, segments=256)
    sched = EpochSchedule(j=8, eps=EPS, kappa=2.0, T=0.2)
    t0 = time.time()
    traj = run(net, sched, suite=KernelSuite(EPS), weight=WeightOmega(),
               snapshot_every=4)
    elapsed = time.time() - t0
    print(f"\n[circle run: {len(traj.records)} epochs, {elapsed:.1f} s]")
    return traj, elapsed


@pytest.fixture(scope="session")
def circle_fine_run(warmup):
    net = sc.circle(r0=R0, segments=512)
    sched = EpochSchedule(j=8, eps=EPS / 2, kappa=2.0, T=0.05, dt=2.0**-13,
                          h_res=EPS / 4)
    t0 = time.time()
    traj = run(net, sched, suite=KernelSuite(EPS / 2), weight=WeightOmega(),
               snapshot_every=4)
    print(f"\n[fine circle run: {len(traj.records)} epochs, {time.time()-t0:.1f} s]")
    return traj


@pytest.fixture(scope="session")
def bubble_run(warmup):
    net = sc.double_bubble(r=0.4, spacing=EPS / 2)
    sched = EpochSchedule(j=8, eps=EPS, kappa=2.0, T=0.05)
    t0 = time.time()
    traj = run(net, sched, suite=KernelSuite(EPS), weight=WeightOmega(),
               snapshot_every=4)
    print(f"\n[double-bubble run: {len(traj.records)} epochs, {time.time()-t0:.1f} s]")
    return traj


@pytest.fixture(scope="session")
def line_run(warmup):
    net = sc.line(half_length=6.0, spacing=0.025)
    sched = EpochSchedule(j=8, eps=0.05, kappa=2.0, T=0.05)
    t0 = time.time()
    traj = run(net, sched, suite=KernelSuite(0.05), weight=WeightOmega(),
               snapshot_every=8)
    print(f"\n[line run: {len(traj.records)} epochs, {time.time()-t0:.1f} s]")
    return traj


@pytest.fixture(scope="session")
def steiner_run(warmup):
    net = sc.steiner_junction(spoke=8.0, spacing=0.025)
    sched = EpochSchedule(j=8, eps=0.05, kappa=2.0, T=0.05)
    t0 = time.time()
    traj = run(net, sched, suite=KernelSuite(0.05), weight=WeightOmega(),
               snapshot_every=8)
    print(f"\n[steiner run: {len(traj.records)} epochs, {time.time()-t0:.1f} s]")
    return traj


def _radius_errors(traj):
    rows = []
    for rec in traj.records:
        area = rec.areas.get(1, 0.0)
        arg = R0 * R0 - 2 * rec.t1
        if area <= 0 or arg <= 0:
            continue
        r_ref = np.sqrt(arg)
        if r_ref < 4 * EPS:
            continue
        r_meas = np.sqrt(area / np.pi)
        rows.append((rec.t1, r_meas, r_ref, abs(r_meas - r_ref) / r_ref))
    return rows


def test_criterion_01_shrinking_circle_law(circle_run):
    traj, elapsed = circle_run
    assert not traj.aborted
    assert verdict("01b-runtime", elapsed <= 120.0, f"{elapsed:.1f} s <= 120 s"), elapsed
    rows = _radius_errors(traj)
    worst = max(r[3] for r in rows)
    t_ok = max((t for t, _, _, e in rows if e <= 0.02), default=0.0)
    r_at = np.sqrt(R0 * R0 - 2 * t_ok)
    ok = worst <= 0.02
    verdict(
        "01-radius-law",
        ok,
        f"max rel err {worst*100:.1f}% over r_ref >= 4 eps (tolerance 2%); "
        f"2% holds down to r = {r_at:.3f} = {r_at/EPS:.1f} eps",
    )
    assert ok, (
        f"radius lags the sharp-flow law by {worst*100:.1f}% at r = 4 eps: the "
        "smoothed curvature of the kernel-regularized first variation "
        "underestimates 1/r by about (eps/r)^2 plus the eps-regularizer "
        "damping, and the deficit integrates along the trajectory; "
        "unattainable at eps = 0.02 without altering the curvature formula"
    )


def test_criterion_02_extinction_sharp_bound(circle_run):
    traj, _ = circle_run
    rep = extinction_report(traj, tol=0.05)
    measured = traj.extinction_time
    in_window = measured is not None and 0.125 * 0.95 <= measured <= 0.125 * 1.10
    ok = in_window and rep.passed and rep.reached
    assert verdict(
        "02-extinction", ok,
        f"measured T* = {measured}, window [{0.125*0.95}, {0.125*1.10}], "
        f"lower bound {rep.bound:.5f} (sharp)",
    )


def _window_residual(traj, grain, t_hi):
    snaps = [s.time for s in traj.snapshots]
    t2 = snaps[int(np.argmin(np.abs(np.array(snaps) - t_hi)))]
    return volume_identity_residual(traj, grain, 0.0, t2)


def test_criterion_03_volume_identity(circle_run, circle_fine_run, bubble_run):
    traj, _ = circle_run
    res = _window_residual(traj, 1, 0.05)
    ok1 = abs(res.residual) <= 0.05 * abs(res.dvol)
    detail = f"circle residual {res.residual:.2e} vs 5% of |dVol| = {0.05*abs(res.dvol):.2e}"
    for grain in (1, 2):
        rb = _window_residual(bubble_run, grain, 0.05)
        ok1 = ok1 and abs(rb.residual) <= 0.05 * abs(rb.dvol)
        detail += f"; bubble grain {grain} {rb.residual:.2e} vs {0.05*abs(rb.dvol):.2e}"
    fine = _window_residual(circle_fine_run, 1, res.t2)
    ratio = abs(res.residual) / max(abs(fine.residual), 1e-300)
    ok2 = ratio >= 1.5
    detail += f"; halving (eps, dt, h_res) shrinks the residual {ratio:.1f}x (need >= 1.5)"
    assert verdict("03-volume-identity", ok1 and ok2, detail)


def _hausdorff_displacement(first, last):
    if len(first.vertices) == len(last.vertices):
        return float(np.linalg.norm(last.vertices - first.vertices, axis=1).max())

    def one_sided(a, b):
        worst = 0.0
        for p in a.vertices:
            seg_a = b.vertices[b.edges[:, 0]]
            seg_d = b.vertices[b.edges[:, 1]] - seg_a
            ll = (seg_d * seg_d).sum(axis=1)
            s = np.clip(((p - seg_a) * seg_d).sum(axis=1) / np.where(ll == 0, 1, ll), 0, 1)
            worst = max(worst, float(np.linalg.norm(seg_a + s[:, None] * seg_d - p, axis=1).min()))
        return worst

    return max(one_sided(first, last), one_sided(last, first))


@pytest.mark.parametrize("fixture_name", ["line_run", "steiner_run"])
def test_criterion_04_stationarity(fixture_name, request):
    traj = request.getfixturevalue(fixture_name)
    assert not traj.aborted
    first, last = traj.snapshots[0], traj.snapshots[-1]
    lo, hi = first.bounding_box()
    diam = float(np.linalg.norm(hi - lo))
    moved = _hausdorff_displacement(first, last)
    ok = moved <= 1e-3 * diam
    assert verdict(
        f"04-stationarity-{fixture_name}", ok,
        f"max vertex displacement {moved:.4f} <= 1e-3 diam = {1e-3*diam:.4f} "
        f"over T = {last.time}",
    )


def test_criterion_05_brakke_inequality(circle_run):
    traj, _ = circle_run
    cache = TrajectoryFieldCache(traj)
    bumps = [
        BumpTestFunction((0.0, 0.0), 0.7),
        BumpTestFunction((0.5, 0.0), 0.35),
        BumpTestFunction((-0.5, 0.0), 0.35),
        BumpTestFunction((0.0, 0.5), 0.35),
        BumpTestFunction((0.3, 0.3), 0.3),
    ]
    snaps = [s.time for s in traj.snapshots]
    marks = [snaps[5 * k] for k in range(11)]  # ten intervals over [0, ~0.049]
    worst = (0.0, None)
    all_ok = True
    checked = 0
    for phi in bumps:
        for k in range(10):
            res = brakke_residual(traj, phi, marks[k], marks[k + 1], cache=cache)
            checked += 1
            assert res.deformation_free
            ok = abs(res.residual) <= res.tolerance
            all_ok = all_ok and ok
            rel = abs(res.residual) / max(res.dissipation, 1e-300)
            if rel > worst[0]:
                worst = (rel, res)
    assert verdict(
        "05-brakke", all_ok,
        f"{checked} (bump, interval) residuals within 10% of the dissipation "
        f"integral; worst |residual| = {worst[0]*100:.1f}% of it",
    )


def test_criterion_06_kernel_and_curvature_bounds(circle_run, circle_fine_run,
                                                  bubble_run, line_run, steiner_run):
    masses = {eps: KernelSuite(eps).mass_quadrature_2d() for eps in (0.01, 0.02, 0.05)}
    ok = all(abs(m - 1.0) <= 1e-6 for m in masses.values())
    runs = [circle_run[0], circle_fine_run, bubble_run, line_run, steiner_run]
    worst_h = worst_g = 0.0
    for traj in runs:
        eps = traj.suite.eps
        for rec in traj.records:
            worst_h = max(worst_h, rec.max_h * eps**2 / 2.0)
            worst_g = max(worst_g, rec.max_grad_h * eps**4 / 2.0)
    ok = ok and worst_h <= 1.0 and worst_g <= 1.0
    assert verdict(
        "06-bounds", ok,
        f"kernel mass errors {max(abs(m-1) for m in masses.values()):.2e} <= 1e-6; "
        f"max |h| at {worst_h*100:.2f}% and max |grad h| at {worst_g*100:.4f}% "
        f"of their bounds over every evaluated point of every run",
    )


def test_criterion_07_first_variation_identity(warmup):
    suite = KernelSuite(EPS)
    rng = np.random.default_rng(2026)
    worst = 0.0
    for case in range(100):
        if case % 2 == 0:
            net = sc.star_polygon(seed=case, n=36, r0=0.15)
        else:
            net = sc.voronoi_random(n_cells=4 + case % 4, seed=case, box=0.4)
        dv = DiscreteVarifold.from_network(net)
        # query near the boundary, where the smoothed field is meaningful
        base = net.vertices[int(rng.integers(len(net.vertices)))]
        y = base + rng.normal(scale=suite.eps, size=2)
        got = smoothed_first_variation(dv, suite, y)
        oracle = quadrature_first_variation_oracle(dv, suite, y)
        scale = max(np.linalg.norm(oracle), 1e-9)
        worst = max(worst, float(np.linalg.norm(got - oracle) / scale))
    ok = worst <= 1e-6
    assert verdict(
        "07-first-variation", ok,
        f"vertex formula vs dense segment quadrature on 100 networks: "
        f"worst relative deviation {worst:.2e} <= 1e-6",
    )


def test_criterion_08_admissibility_suite(warmup):
    weight = WeightOmega()
    rng = np.random.default_rng(7)
    applied = 0
    violations = 0
    mass_increase = 0
    for seed in range(200):
        cells = int(rng.integers(4, 9))
        labels = int(rng.integers(2, cells))
        net = sc.voronoi_random(n_cells=cells, seed=seed, n_labels=labels)
        j = int(rng.integers(4, 12))
        mass0 = net.total_mass(weight)
        out, est = apply_best_moves(net, j, weight)
        for mv, rep in est.moves:
            applied += 1
            if not (rep.cond_a and rep.cond_b and rep.cond_d):
                violations += 1
        if out.total_mass(weight) > mass0 + 1e-12 * max(mass0, 1.0):
            mass_increase += 1
    ok = violations == 0 and mass_increase == 0 and applied > 0
    assert verdict(
        "08-admissibility", ok,
        f"200 randomized networks, {applied} applied moves, "
        f"{violations} condition violations, {mass_increase} mass increases",
    )


def test_criterion_09_dissipation(circle_run, circle_fine_run, bubble_run,
                                  line_run, steiner_run):
    runs = {
        "circle": circle_run[0], "fine": circle_fine_run, "bubble": bubble_run,
        "line": line_run, "steiner": steiner_run,
    }
    failures = 0
    mass_viol = 0
    for name, traj in runs.items():
        ledger = 0.0
        mass0 = traj.records[0].mass_start if traj.records else 0.0
        for rec in traj.records:
            if not rec.dissipation_ok:
                failures += 1
            ledger += rec.resample_mass_abs
            if rec.mass_end > mass0 + ledger + 1e-9 * max(mass0, 1.0):
                mass_viol += 1
    ok = failures == 0 and mass_viol == 0
    assert verdict(
        "09-dissipation", ok,
        f"per-epoch inequality holds in {sum(len(t.records) for t in runs.values())} "
        f"epochs across 5 runs ({failures} failures); total mass non-increasing "
        f"within the resampling ledger ({mass_viol} violations)",
    )


def test_criterion_10_junction_relaxation(bubble_run):
    snap = bubble_run.snapshot_at(0.02)
    fitted = junction_angles(snap, fit_radius=8 * EPS)
    raw = junction_angles(snap)
    devs = [abs(a - 120.0) for sectors in fitted.values() for a in sectors]
    worst = max(devs)
    ok = len(fitted) == 2 and worst <= 2.0
    raw_worst = max(abs(a - 120.0) for s in raw.values() for a in s)
    verdict(
        "10-junction-angles", ok,
        f"triple-junction angles at t = {snap.time:.4f}: worst deviation "
        f"{worst:.2f} deg (tangent fit outside the smoothing layer; raw chords "
        f"{raw_worst:.1f} deg) vs tolerance 2 deg",
    )
    assert ok, (
        "the junction neighborhood equilibrates where the kernel-averaged "
        "velocity deficit balances the discrete tangent imbalance, an "
        "eps-independent O(5-10 deg) offset; the greedy deformation catalog "
        "cannot certify junction rebalancing through the localized decay "
        "condition, so nothing restores the 120-degree layer at finite eps"
    )


def test_criterion_11_density_and_clearing_out(circle_run, bubble_run):
    radii = [0.05, 0.025, 0.0125]
    ok = True
    details = []
    for name, traj in (("circle", circle_run[0]), ("bubble", bubble_run)):
        rep = density_report(traj, 0.0, radii, delta0=0.1)
        ok = ok and rep.passed
        details.append(f"{name} sup ratio {rep.sup_ratio:.3f} < 1.9")
    traj = circle_run[0]
    issued = 0
    borne_out = 0
    grid = np.linspace(-0.8, 0.8, 7)
    probes = [(x, y) for x in grid for y in grid] + [(2.0, 2.0)]
    for p in probes:
        res = clearing_out_check(traj, p, 0.0, r=0.2, delta0=0.01)
        if res.kernel_predicts or res.density_predicts:
            issued += 1
            if res.outcome:
                borne_out += 1
    ok = ok and issued > 0 and borne_out == issued
    details.append(f"clearing-out predictions issued {issued}, borne out {borne_out}")
    assert verdict("11-density-clearing", ok, "; ".join(details))
