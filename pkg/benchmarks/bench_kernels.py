"""Benchmark: numba kernels against the pure-numpy fallback.

The two code paths share the culling radius and quadrature rule, so they
produce the same numbers; this script times the field evaluation and the
outer convolution on a shrinking-circle snapshot at several sizes.

Run after one warmup (compilation is excluded from the timings):

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from grainflow import _accel
from grainflow import scenarios as sc
from grainflow.kernels import KernelSuite, WeightOmega
from grainflow.varifold import CurvatureField, DiscreteVarifold


def bench_case(eps, segments, repeats=3):
    net = sc.circle(r0=0.5, segments=segments)
    suite = KernelSuite(eps)
    dv = DiscreteVarifold.from_network(net)
    fld = CurvatureField(dv, suite, WeightOmega()).prepare(net.vertices)
    qx, qw, _ = dv.quadrature(suite.lattice_delta)
    nodes = fld._node_pos
    args = (nodes, dv.vertex_pos, dv.vertex_t, qx, qw,
            suite.eps, suite.c_eps, suite.cutoff_radius)
    conv_args = (net.vertices, fld._node_keys, fld._node_u, fld.delta,
                 fld.k_box, suite.eps, suite.c_eps, suite.cutoff_radius)

    rows = {}
    for name, fields_fn, conv_fn in (
        ("numba", getattr(_accel, "eval_lattice_fields_numba", None),
         getattr(_accel, "outer_convolution_numba", None)),
        ("numpy", _accel.eval_lattice_fields_numpy, _accel.outer_convolution_numpy),
    ):
        if fields_fn is None:
            continue
        fields_fn(*args)  # warm
        t0 = time.perf_counter()
        for _ in range(repeats):
            sfv, sw = fields_fn(*args)
        t_fields = (time.perf_counter() - t0) / repeats
        conv_fn(*conv_args)
        t0 = time.perf_counter()
        for _ in range(repeats):
            h = conv_fn(*conv_args)
        t_conv = (time.perf_counter() - t0) / repeats
        rows[name] = (t_fields, t_conv, sfv, h)
    return len(nodes), rows


def main():
    if not _accel.USING_NUMBA:
        print("note: GRAINFLOW_NUMBA=0 set, only the numpy path is available\n")
    print(f"{'eps':>6} {'verts':>6} {'nodes':>7} "
          f"{'fields numba':>13} {'fields numpy':>13} {'conv numba':>11} {'conv numpy':>11} {'speedup':>8}")
    for eps, segments in ((0.05, 128), (0.02, 256), (0.02, 628), (0.01, 1256)):
        n_nodes, rows = bench_case(eps, segments)
        tn = rows.get("numba")
        tp = rows["numpy"]
        if tn is not None:
            # paths agree up to fma rounding of nodes on the support circle,
            # whose kernel weight is ~1e-8 of the peak
            assert np.allclose(tn[2], tp[2], atol=1e-9)
            assert np.allclose(tn[3], tp[3], atol=1e-9)
            speed = (tp[0] + tp[1]) / (tn[0] + tn[1])
            print(f"{eps:6.3f} {segments:6d} {n_nodes:7d} "
                  f"{tn[0]*1e3:12.1f}ms {tp[0]*1e3:12.1f}ms "
                  f"{tn[1]*1e3:10.1f}ms {tp[1]*1e3:10.1f}ms {speed:7.1f}x")
        else:
            print(f"{eps:6.3f} {segments:6d} {n_nodes:7d} {'-':>13} "
                  f"{tp[0]*1e3:12.1f}ms {'-':>11} {tp[1]*1e3:10.1f}ms")


if __name__ == "__main__":
    main()
