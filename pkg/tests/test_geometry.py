import math

import numpy as np
import pytest

from grainflow.geometry import (
    InfiniteAreaError,
    LabeledNetwork,
    TopologyError,
    segment_omega_mass,
)
from grainflow.kernels import WeightOmega
from grainflow import scenarios as sc

from conftest import fan_area_oracle, make_polyline, make_square


def test_unit_square_area(unit_square):
    assert unit_square.grain_area(1) == pytest.approx(1.0, abs=1e-14)


def test_regular_64gon_area():
    net = sc.circle(r0=1.0, segments=64)
    expected = 64 / 2 * math.sin(2 * math.pi / 64)
    assert net.grain_area(1) == pytest.approx(expected, rel=1e-14)
    assert net.grain_area(1) == pytest.approx(fan_area_oracle(net, 1), rel=1e-12)


def test_zero_edge_grain_is_topology_error():
    net = make_square()
    net3 = LabeledNetwork(net.vertices, net.edges, 3, exterior=2)
    with pytest.raises(TopologyError):
        net3.grain_area(3)
    # but bulk queries report vanished grains as empty
    assert net3.grain_areas()[3] == 0.0


def test_exterior_area_signals_infinite(unit_square):
    with pytest.raises(InfiniteAreaError):
        unit_square.grain_area(2)
    summaries = {s.label: s for s in unit_square.grain_summaries()}
    assert summaries[2].area == math.inf
    assert summaries[1].area == pytest.approx(1.0)


def test_open_cycle_is_topology_error():
    verts = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]])
    edges = np.array([[0, 1, 1, 2], [1, 2, 1, 2], [2, 3, 1, 2]])  # not closed
    net = LabeledNetwork(verts, edges, 2)
    with pytest.raises(TopologyError):
        net.grain_area(1)


def test_area_additive_over_disjoint_grains():
    a = make_square()
    b = make_square(origin=(2.0, 0.0))
    edges_b = b.edges.copy()
    edges_b[:, :2] += len(a.vertices)
    edges_b[:, 2] = 2
    edges = np.vstack([a.edges.copy(), edges_b])
    edges[: len(a.edges), 3] = 3
    edges[len(a.edges):, 3] = 3
    net = LabeledNetwork(np.vstack([a.vertices, b.vertices]), edges, 3)
    assert net.grain_area(1) + net.grain_area(2) == pytest.approx(2.0)


def test_total_mass_single_segment():
    net = make_polyline([[0.0, 0.0], [0.7, 0.0]])
    assert net.total_mass() == pytest.approx(0.7)


def test_total_mass_256gon_perimeter():
    net = sc.circle(r0=1.0, segments=256)
    expected = 256 * 2 * math.sin(math.pi / 256)
    assert net.total_mass(WeightOmega()) == pytest.approx(expected, rel=1e-13)


def test_total_mass_weighted_matches_adaptive_quadrature(weight_exp):
    from scipy.integrate import quad

    net = make_polyline([[0.0, 0.0], [1.0, 0.0]])
    oracle, err = quad(lambda s: math.exp(-math.sqrt(1 + s * s)), 0.0, 1.0,
                       epsabs=1e-12)
    assert err < 1e-10
    assert net.total_mass(weight_exp) == pytest.approx(oracle, abs=1e-8)


def test_total_mass_constant_weight_equals_length_sum(weight_one):
    net = sc.star_polygon(seed=3)
    assert net.total_mass(weight_one) == pytest.approx(net.edge_lengths().sum(), rel=1e-15)


def test_reduced_boundary_circle_normals_point_outward():
    net = sc.circle(r0=0.5, segments=64)
    ids, normals = net.reduced_boundary(1)
    assert len(ids) == 64
    mids = net.edge_midpoints()[ids]
    radial = mids / np.linalg.norm(mids, axis=1, keepdims=True)
    assert np.all((normals * radial).sum(axis=1) > 0.99)


def test_reduced_boundary_antisymmetric_on_shared_edges():
    net = sc.double_bubble(r=0.3)
    ids1, n1 = net.reduced_boundary(1)
    ids2, n2 = net.reduced_boundary(2)
    shared = sorted(set(ids1) & set(ids2))
    assert shared
    m1 = {e: v for e, v in zip(ids1, n1)}
    m2 = {e: v for e, v in zip(ids2, n2)}
    for e in shared:
        assert np.allclose(m1[e], -m2[e])


def test_interior_edges_excluded_from_reduced_boundary():
    net = make_square()
    slit = np.array([[0.3, 0.5], [0.7, 0.5]])
    verts = np.vstack([net.vertices, slit])
    edges = np.vstack([net.edges, [[4, 5, 1, 1]]])
    net2 = LabeledNetwork(verts, edges, 2)
    assert list(net2.interior_edge_ids()) == [4]
    ids, _ = net2.reduced_boundary(1)
    assert 4 not in set(ids)
    # interior boundary still carries mass
    assert net2.total_mass() == pytest.approx(4.0 + 0.4)
    # and does not perturb the area
    assert net2.grain_area(1) == pytest.approx(1.0)


def test_validate_clean_square(unit_square):
    assert unit_square.validate() == []


def test_validate_detects_crossing():
    verts = np.array([[0.0, 0], [1, 1], [0, 1], [1, 0]])
    edges = np.array([[0, 1, 1, 1], [2, 3, 1, 1]])
    net = LabeledNetwork(verts, edges, 2)
    problems = net.validate()
    assert any("self-intersection" in p for p in problems)


def test_validate_detects_label_mismatch():
    net = make_square()
    edges = net.edges.copy()
    edges[1, 2:] = [2, 1]  # one side flipped: sectors disagree at the shared vertex
    bad = LabeledNetwork(net.vertices, edges, 2)
    assert any("label inconsistency" in p for p in bad.validate())


def test_reduced_boundaries_cover_distinct_edges_twice():
    for seed in (0, 1, 2):
        net = sc.voronoi_random(n_cells=6, seed=seed)
        count = np.zeros(len(net.edges), dtype=int)
        for i in range(1, net.n_grains + 1):
            ids, _ = net.reduced_boundary(i)
            count[ids] += 1
        distinct = net.edges[:, 2] != net.edges[:, 3]
        assert np.all(count[distinct] == 2)
        assert np.all(count[~distinct] == 0)


@pytest.mark.parametrize("seed", range(20))
def test_grain_area_matches_fan_oracle_random(seed):
    if seed % 2 == 0:
        net = sc.star_polygon(seed=seed)
        labels = [1]
    else:
        net = sc.voronoi_random(n_cells=5 + seed % 4, seed=seed)
        labels = [i for i in range(1, net.n_grains) ]
    for lab in labels:
        assert net.grain_area(lab) == pytest.approx(
            abs(fan_area_oracle(net, lab)), rel=1e-10, abs=1e-12)


def test_segment_omega_mass_constant_weight(weight_one):
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    b = np.array([[3.0, 4.0], [1.0, 2.0]])
    out = segment_omega_mass(a, b, weight_one)
    assert out == pytest.approx([5.0, 1.0])


def test_snapshot_roundtrip_preserves_network():
    from grainflow.geometry import network_from_snapshot, snapshot_dict

    net = sc.voronoi_random(n_cells=5, seed=11)
    obj = snapshot_dict(net)
    back = network_from_snapshot(obj)
    assert np.array_equal(back.vertices, net.vertices)
    assert np.array_equal(back.edges, net.edges)
    assert back.n_grains == net.n_grains and back.exterior == net.exterior
