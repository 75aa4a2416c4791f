"""Command line entry points: run, diagnose, scenarios, export-plots."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORTED = 2
EXIT_DIAGNOSTIC = 3


def _cmd_run(args):
    from .io import ConfigError, execute_run, load_config
    from .scenarios import ScenarioError
    from .stepper import RunAborted

    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.out_dir = args.out
        traj = execute_run(cfg)
    except (ConfigError, ScenarioError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except RunAborted as err:
        print(f"run aborted: {err}", file=sys.stderr)
        return EXIT_ABORTED
    if traj.aborted:
        print(f"run aborted: {traj.abort_reason}", file=sys.stderr)
        print(f"state dump in {cfg.out_dir}/snapshots (last snapshot)", file=sys.stderr)
        return EXIT_ABORTED
    msg = f"run complete: {len(traj.records)} epochs -> {cfg.out_dir}"
    if traj.extinction_time is not None:
        msg += f" (extinction at t = {traj.extinction_time})"
    print(msg)
    return EXIT_OK


def _cmd_diagnose(args):
    from .diagnostics import run_standard_diagnostics
    from .io import load_trajectory, render_report
    from .varifold import CurvatureField, DiscreteVarifold

    try:
        traj = load_trajectory(args.trajdir)
    except OSError as err:
        print(f"cannot load trajectory: {err}", file=sys.stderr)
        return EXIT_CONFIG
    rep = run_standard_diagnostics(traj)
    text = render_report(rep)
    out = Path(args.trajdir) / "report.txt"
    out.write_text(text)
    for tag, idx in (("first", 0), ("last", len(traj.snapshots) - 1)):
        net = traj.snapshots[idx]
        if len(net.edges) == 0:
            continue
        dv = DiscreteVarifold.from_network(net)
        fld = CurvatureField(dv, traj.suite, traj.weight).prepare(net.vertices)
        h = fld.evaluate(net.vertices)
        lines = ["x,y,hx,hy,|h|"]
        for p, v in zip(net.vertices, h):
            lines.append(",".join(repr(float(x)) for x in
                                  (p[0], p[1], v[0], v[1], float(np.hypot(*v)))))
        (Path(args.trajdir) / f"hfield_{tag}.csv").write_text("\n".join(lines) + "\n")
    print(text, end="")
    print(f"report written to {out}")
    return EXIT_OK if rep.all_passed() else EXIT_DIAGNOSTIC


def _cmd_scenarios(_args):
    from .scenarios import SCENARIO_KINDS

    descriptions = {
        "circle": "shrinking disc; params: r0, segments, cx, cy",
        "two-circles": "two disjoint discs; params: r0, spacing_between, segments",
        "lens": "two-arc lens; params: half_width, bulge, segments_per_arc",
        "double-bubble": "two lobes with straight interface; params: r, spacing",
        "steiner-junction": "three-petal flower around an exact 120-degree junction; params: spoke, spacing",
        "line": "straight interface closed through balanced far junctions; params: half_length, spacing",
        "grid-grains": "square grid of grains (degree-4 crossings); params: count, cell",
        "voronoi-random": "seeded Voronoi partition; params: cells, seed, box, labels",
    }
    for kind in SCENARIO_KINDS:
        print(f"{kind:18s} {descriptions.get(kind, '')}")
    return EXIT_OK


def _cmd_export_plots(args):
    from .io import export_plot_data

    try:
        paths = export_plot_data(args.trajdir)
    except OSError as err:
        print(f"cannot read trajectory: {err}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="grainflow",
        description="Multi-phase mean curvature flow of labeled planar networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a flow from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override output.dir")
    p_run.set_defaults(func=_cmd_run)

    p_diag = sub.add_parser("diagnose", help="evaluate diagnostics on a trajectory directory")
    p_diag.add_argument("trajdir")
    p_diag.set_defaults(func=_cmd_diagnose)

    p_sc = sub.add_parser("scenarios", help="list scenario kinds")
    p_sc.set_defaults(func=_cmd_scenarios)

    p_ex = sub.add_parser("export-plots", help="emit plot-data CSVs for a trajectory")
    p_ex.add_argument("trajdir")
    p_ex.set_defaults(func=_cmd_export_plots)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
