import math

import numpy as np
import pytest

from grainflow import _accel
from grainflow import scenarios as sc
from grainflow.varifold import (
    CurvatureField,
    DiscreteVarifold,
    gradient_bound_check,
    smoothed_first_variation,
    smoothed_mean_curvature,
    smoothed_weight,
)

from conftest import make_polyline


def quadrature_first_variation_oracle(dv, suite, y, nodes_per_panel=24):
    """Dense composite quadrature of the projected kernel gradient along every
    segment (panels no longer than half the kernel scale)."""
    total = np.zeros(2)
    gl, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    for a, b, tau, ln in zip(dv.seg_a, dv.seg_b, dv.tangents, dv.lengths):
        panels = max(1, int(np.ceil(ln / (suite.eps / 2))))
        edges = np.linspace(0.0, 1.0, panels + 1)
        lo = edges[:-1]
        width = edges[1] - edges[0]
        s = (lo[:, None] + width * 0.5 * (gl[None, :] + 1.0)).ravel()
        pts = a[None, :] + s[:, None] * (b - a)[None, :]
        g = suite.grad_phi(pts - y)
        ww = np.tile(w, panels) * (width / 2.0)
        total += tau * float(np.sum(ww * (g @ tau))) * ln
    return total


def test_single_segment_telescopes(suite02):
    a, b = np.array([0.0, 0.0]), np.array([0.05, 0.0])
    dv = DiscreteVarifold([a], [b], np.array([a, b]), np.array([[1, 0], [-1, 0]]))
    y = np.array([0.02, 0.01])
    got = smoothed_first_variation(dv, suite02, y)
    tau = np.array([1.0, 0.0])
    expected = (suite02.phi(b - y) - suite02.phi(a - y)) * tau
    assert np.allclose(got, expected, rtol=1e-12)
    oracle = quadrature_first_variation_oracle(dv, suite02, y)
    assert np.linalg.norm(got - oracle) <= 1e-6 * max(np.linalg.norm(oracle), 1e-12)


def test_straight_polyline_interior_cancels(suite02):
    net = make_polyline(np.column_stack([np.linspace(-1, 1, 81), np.zeros(81)]))
    dv = DiscreteVarifold.from_network(net)
    y = np.array([0.012, 0.003])  # near the middle, far from the endpoints
    assert np.linalg.norm(smoothed_first_variation(dv, suite02, y)) <= 1e-12


def test_symmetric_triple_junction_cancels(suite02):
    center = np.zeros(2)
    spokes = [np.array([np.cos(a), np.sin(a)]) for a in
              (0.0, 2 * np.pi / 3, 4 * np.pi / 3)]
    verts = np.vstack([center] + spokes)
    T = np.zeros((4, 2))
    for k, d in enumerate(spokes):
        T[0] += d
        T[k + 1] -= d
    dv = DiscreteVarifold([center] * 3, spokes, verts, T)
    # three unit tangents cancel to fp rounding, scaled by the kernel peak
    assert np.linalg.norm(smoothed_first_variation(dv, suite02, center)) <= 1e-12


def test_first_variation_linearity(suite02):
    net1 = sc.circle(r0=0.2, segments=64, center=(0.0, 0.0))
    net2 = sc.circle(r0=0.15, segments=48, center=(0.03, 0.01))
    dv1 = DiscreteVarifold.from_network(net1)
    dv2 = DiscreteVarifold.from_network(net2)
    union = DiscreteVarifold(
        np.vstack([dv1.seg_a, dv2.seg_a]), np.vstack([dv1.seg_b, dv2.seg_b]),
        np.vstack([dv1.vertex_pos, dv2.vertex_pos]),
        np.vstack([dv1.vertex_t, dv2.vertex_t]),
    )
    y = np.array([0.18, 0.02])
    lhs = smoothed_first_variation(union, suite02, y)
    rhs = smoothed_first_variation(dv1, suite02, y) + smoothed_first_variation(dv2, suite02, y)
    assert np.allclose(lhs, rhs, atol=1e-15)


@pytest.mark.parametrize("seed", range(8))
def test_vertex_formula_matches_dense_quadrature(seed, suite02):
    rng = np.random.default_rng(seed)
    if seed % 2:
        net = sc.voronoi_random(n_cells=4 + seed % 3, seed=seed, box=0.4)
    else:
        net = sc.star_polygon(seed=seed, n=40, r0=0.15)
    dv = DiscreteVarifold.from_network(net)
    lo, hi = net.bounding_box()
    y = rng.uniform(lo, hi)
    got = smoothed_first_variation(dv, suite02, y)
    oracle = quadrature_first_variation_oracle(dv, suite02, y)
    scale = max(np.linalg.norm(oracle), 1e-9)
    assert np.linalg.norm(got - oracle) <= 1e-6 * scale


def test_smoothed_weight_long_line(suite02):
    # marginal of the truncated Gaussian: c(eps) (2 pi eps^2)^{-1/2} erf-correction
    net = make_polyline(np.column_stack([np.linspace(-10, 10, 2001), np.zeros(2001)]))
    dv = DiscreteVarifold.from_network(net)
    y = np.array([0.0, 0.0])
    got = smoothed_weight(dv, suite02, y)
    reff = suite02.cutoff_radius
    oracle = (suite02.c_eps / math.sqrt(2 * math.pi * suite02.eps**2)
              * math.erf(reff / (math.sqrt(2) * suite02.eps)))
    assert got == pytest.approx(oracle, rel=1e-4)


def test_smoothed_weight_empty_and_far(suite02):
    empty = DiscreteVarifold(np.zeros((0, 2)), np.zeros((0, 2)),
                             np.zeros((0, 2)), np.zeros((0, 2)))
    assert smoothed_weight(empty, suite02, np.zeros(2)) == 0.0
    net = make_polyline([[0.0, 0.0], [1.0, 0.0]])
    dv = DiscreteVarifold.from_network(net)
    far = np.array([0.5, suite02.cutoff_radius + 1e-3])
    assert smoothed_weight(dv, suite02, far) == 0.0


def test_circle_curvature_magnitude(suite02, weight_one):
    net = sc.circle(r0=0.5, segments=315)  # spacing ~ eps/2
    dv = DiscreteVarifold.from_network(net)
    x = net.vertices[0]
    h = smoothed_mean_curvature(dv, suite02, weight_one, x)
    inward = -x / np.linalg.norm(x)
    assert np.linalg.norm(h) == pytest.approx(2.0, rel=0.05)
    assert (h @ inward) / np.linalg.norm(h) > 0.999


def test_straight_line_curvature_negligible(suite02, weight_one):
    net = make_polyline(np.column_stack([np.linspace(-2, 2, 401), np.zeros(401)]))
    dv = DiscreteVarifold.from_network(net)
    h = smoothed_mean_curvature(dv, suite02, weight_one, np.array([0.0, 0.0]))
    assert np.linalg.norm(h) <= 1e-6 / suite02.eps**2


def test_curvature_bound_and_gradient_bound(suite02, weight_one):
    net = sc.circle(r0=0.5, segments=315)
    dv = DiscreteVarifold.from_network(net)
    pts = net.vertices[::16]
    h = smoothed_mean_curvature(dv, suite02, weight_one, pts)
    assert np.linalg.norm(h, axis=1).max() <= 2.0 / suite02.eps**2
    measured = gradient_bound_check(dv, suite02, weight_one, pts)
    assert measured <= 2.0 / suite02.eps**4
    # on-curve samples see the tangential variation, of order 1/r^2
    assert measured < 100.0


def test_reflection_symmetry(suite02, weight_one):
    net = sc.circle(r0=0.5, segments=128)  # symmetric under y -> -y
    dv = DiscreteVarifold.from_network(net)
    x = np.array([0.5, 0.0])
    h = smoothed_mean_curvature(dv, suite02, weight_one, x)
    assert abs(h[1]) <= 1e-8


def test_batch_order_independent(suite02, weight_one):
    net = sc.circle(r0=0.3, segments=96)
    dv = DiscreteVarifold.from_network(net)
    pts = net.vertices[:20]
    fld = CurvatureField(dv, suite02, weight_one).prepare(pts)
    a = fld.evaluate(pts)
    b = fld.evaluate(pts[::-1])[::-1]
    assert np.array_equal(a, b)
    single = smoothed_mean_curvature(dv, suite02, weight_one, pts[3])
    assert np.allclose(single, a[3], rtol=1e-12, atol=1e-14)


def test_numba_and_numpy_paths_agree(suite02, weight_one):
    if not _accel.USING_NUMBA:
        pytest.skip("numba path disabled")
    net = sc.star_polygon(seed=5, n=60, r0=0.2)
    dv = DiscreteVarifold.from_network(net)
    fld = CurvatureField(dv, suite02, weight_one).prepare(net.vertices[:16])
    nodes = fld._node_pos
    qx, qw, _ = dv.quadrature(suite02.lattice_delta)
    args = (nodes, dv.vertex_pos, dv.vertex_t, qx, qw,
            suite02.eps, suite02.c_eps, suite02.cutoff_radius)
    sfv_nb, sw_nb = _accel.eval_lattice_fields_numba(*args)
    sfv_np, sw_np = _accel.eval_lattice_fields_numpy(*args)
    assert np.allclose(sfv_nb, sfv_np, atol=1e-11)
    assert np.allclose(sw_nb, sw_np, atol=1e-11)
    pts = net.vertices[:16]
    h_nb = _accel.outer_convolution_numba(
        pts, fld._node_keys, fld._node_u, fld.delta, fld.k_box,
        suite02.eps, suite02.c_eps, suite02.cutoff_radius)
    h_np = _accel.outer_convolution_numpy(
        pts, fld._node_keys, fld._node_u, fld.delta, fld.k_box,
        suite02.eps, suite02.c_eps, suite02.cutoff_radius)
    # fma rounding can flip inclusion of nodes exactly on the support circle,
    # where the kernel carries ~1e-8 of its peak weight
    assert np.allclose(h_nb, h_np, atol=1e-9)


def test_energy_matches_circle_dissipation(suite02, weight_one):
    # energy integral approximates the squared-curvature energy 2 pi / r
    net = sc.circle(r0=0.5, segments=315)
    dv = DiscreteVarifold.from_network(net)
    fld = CurvatureField(dv, suite02, weight_one).prepare(net.vertices)
    assert fld.energy() == pytest.approx(2 * np.pi / 0.5, rel=0.02)
