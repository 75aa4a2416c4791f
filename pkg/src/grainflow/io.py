"""Run configuration, trajectory persistence and report rendering.

Config files are flat ``key = value`` text with dotted key paths; trajectory
directories hold ``config.copy``, ``series.csv``, ``snapshots/NNNNNN.snap``
(JSON, one object per snapshot), ``deformations.csv``, ``epochs.csv`` with
the full per-epoch bookkeeping, and ``report.txt`` once diagnosed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import network_from_snapshot, snapshot_dict
from .kernels import KernelSuite, WeightOmega
from .scenarios import SCENARIO_KINDS, build_scenario
from .stepper import EpochRecord, EpochSchedule, Trajectory, run


class ConfigError(ValueError):
    pass


def _parse_scalar(text):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_config_text(text):
    """Flat dotted-key config text -> dict."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = _parse_scalar(val)
    return out


@dataclass
class RunConfig:
    scenario: str
    scenario_params: dict = field(default_factory=dict)
    eps: float = 0.02
    quad_factor: float = 4.0
    weight_variant: str = "constant-one"
    validation_grid: int = 201
    j: int = 8
    kappa: float = 2.0
    T: float = 0.1
    dt: float | None = None
    h_res: float | None = None
    out_dir: str = "out/run"
    snapshot_every: int = 4
    seed: int = 0
    source_text: str = ""

    def __post_init__(self):
        if self.scenario not in SCENARIO_KINDS:
            raise ConfigError(f"scenario: unknown kind {self.scenario!r}")
        for name in ("eps", "quad_factor", "T", "kappa"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.eps < 1:
            raise ConfigError("kernel.eps must lie in (0, 1)")
        if self.kappa < 1:
            raise ConfigError("schedule.kappa must be >= 1")
        if self.snapshot_every < 1:
            raise ConfigError("output.snapshot_every must be >= 1")


def config_from_dict(d, source_text=""):
    d = dict(d)
    kind = d.pop("scenario", None)
    if kind is None:
        raise ConfigError("missing key: scenario")
    params = {}
    plain = {}
    for key, val in d.items():
        if key.startswith("scenario."):
            params[key.split(".", 1)[1]] = val
        else:
            plain[key] = val
    seed = plain.get("seed", 0)
    params.setdefault("seed", seed)
    try:
        return RunConfig(
            scenario=str(kind),
            scenario_params=params,
            eps=float(plain.get("kernel.eps", 0.02)),
            quad_factor=float(plain.get("varifold.quad_factor", 4.0)),
            weight_variant=str(plain.get("weight.variant", "constant-one")),
            validation_grid=int(plain.get("weight.validation_grid", 201)),
            j=int(plain.get("schedule.j", 8)),
            kappa=float(plain.get("schedule.kappa", 2.0)),
            T=float(plain.get("schedule.T", 0.1)),
            dt=float(plain["schedule.dt"]) if "schedule.dt" in plain else None,
            h_res=float(plain["schedule.h_res"]) if "schedule.h_res" in plain else None,
            out_dir=str(plain.get("output.dir", "out/run")),
            snapshot_every=int(plain.get("output.snapshot_every", 4)),
            seed=int(seed),
            source_text=source_text,
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return config_from_dict(parse_config_text(text), source_text=text)


# ---------------------------------------------------------------------------
# running and persistence
# ---------------------------------------------------------------------------


def execute_run(cfg):
    """Build the scenario, run the flow, persist the trajectory directory."""
    net = build_scenario(cfg.scenario, cfg.scenario_params)
    suite = KernelSuite(cfg.eps, cfg.quad_factor)
    weight = WeightOmega(cfg.weight_variant, cfg.validation_grid)
    schedule = EpochSchedule(j=cfg.j, eps=cfg.eps, kappa=cfg.kappa, T=cfg.T,
                             dt=cfg.dt, h_res=cfg.h_res)
    traj = run(net, schedule, suite=suite, weight=weight,
               snapshot_every=cfg.snapshot_every)
    save_trajectory(traj, cfg.out_dir, cfg)
    return traj


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _bounded_labels(net):
    return [i for i in range(1, net.n_grains + 1) if i != net.exterior]


def save_trajectory(traj, out_dir, cfg=None):
    out = Path(out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    first = traj.snapshots[0]
    labels = _bounded_labels(first)

    if cfg is not None:
        text = cfg.source_text or "\n".join(
            [f"scenario = {cfg.scenario}"]
            + [f"scenario.{k} = {v}" for k, v in cfg.scenario_params.items()]
            + [
                f"kernel.eps = {cfg.eps!r}",
                f"weight.variant = {cfg.weight_variant}",
                f"schedule.j = {cfg.j}",
                f"schedule.kappa = {cfg.kappa!r}",
                f"schedule.T = {cfg.T!r}",
                f"output.dir = {cfg.out_dir}",
                f"output.snapshot_every = {cfg.snapshot_every}",
                f"seed = {cfg.seed}",
            ]
        ) + "\n"
        (out / "config.copy").write_text(text)

    for n, snap in enumerate(traj.snapshots):
        write_snapshot(snap, out / "snapshots" / f"{n:06d}.snap")

    area0 = {i: first.grain_areas().get(i, 0.0) for i in labels}
    flux_cum = {i: 0.0 for i in labels}
    header = (
        ["t", "total_mass"] + [f"area_{i}" for i in labels]
        + ["max_h", "mass_drop", "volume_residual"]
    )
    lines = [",".join(header)]
    for rec in traj.records:
        for i in labels:
            flux_cum[i] += rec.dt * rec.fluxes.get(i, 0.0)
        residual = max(
            (abs(rec.areas.get(i, 0.0) - area0[i] - flux_cum[i]) for i in labels),
            default=0.0,
        )
        row = [_fmt(rec.t1), _fmt(rec.mass_end)]
        row += [_fmt(rec.areas.get(i, 0.0)) for i in labels]
        row += [_fmt(rec.max_h), _fmt(rec.mass_drop), _fmt(residual)]
        lines.append(",".join(row))
    (out / "series.csv").write_text("\n".join(lines) + "\n")

    lines = ["epoch,k,moves_applied,mass_drop,max_volume_delta,volume_budget"]
    for rec in traj.records:
        budget = rec.mass_drop / traj.schedule.j
        lines.append(",".join([
            _fmt(rec.t0), str(rec.k), str(rec.moves_applied),
            _fmt(rec.mass_drop), _fmt(rec.max_volume_delta), _fmt(budget),
        ]))
    (out / "deformations.csv").write_text("\n".join(lines) + "\n")

    header = (
        ["k", "t0", "t1", "dt", "mass_start", "mass_after_deform", "mass_end",
         "mass_drop", "moves_applied", "max_volume_delta", "energy", "max_h",
         "max_grad_h", "guard_halvings", "resample_area_abs", "resample_mass_abs",
         "dissipation_lhs", "dissipation_rhs", "dissipation_ok", "side_flips",
         "surgeries", "flagged_surgeries"]
        + [f"flux_{i}" for i in labels] + [f"area_{i}" for i in labels]
    )
    lines = [",".join(header)]
    for rec in traj.records:
        row = [str(rec.k), _fmt(rec.t0), _fmt(rec.t1), _fmt(rec.dt),
               _fmt(rec.mass_start), _fmt(rec.mass_after_deform), _fmt(rec.mass_end),
               _fmt(rec.mass_drop), str(rec.moves_applied), _fmt(rec.max_volume_delta),
               _fmt(rec.energy), _fmt(rec.max_h), _fmt(rec.max_grad_h),
               str(rec.guard_halvings), _fmt(rec.resample_area_abs),
               _fmt(rec.resample_mass_abs), _fmt(rec.dissipation_lhs),
               _fmt(rec.dissipation_rhs), _fmt(rec.dissipation_ok),
               str(rec.side_flips), str(rec.surgeries), str(rec.flagged_surgeries)]
        row += [_fmt(rec.fluxes.get(i, 0.0)) for i in labels]
        row += [_fmt(rec.areas.get(i, 0.0)) for i in labels]
        lines.append(",".join(row))
    (out / "epochs.csv").write_text("\n".join(lines) + "\n")

    meta = {
        "eps": traj.suite.eps,
        "quad_factor": traj.suite.quad_factor,
        "weight_variant": traj.weight.variant,
        "j": traj.schedule.j,
        "kappa": traj.schedule.kappa,
        "T": traj.schedule.T,
        "dt": traj.schedule.dt,
        "h_res": traj.schedule.h_res,
        "n_grains": first.n_grains,
        "exterior": first.exterior,
        "extinction_time": traj.extinction_time,
        "aborted": traj.aborted,
        "abort_reason": traj.abort_reason,
        "snapshots": len(traj.snapshots),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return out


def write_snapshot(net, path):
    Path(path).write_text(
        json.dumps(snapshot_dict(net), sort_keys=True, separators=(",", ":")) + "\n"
    )


def read_snapshot(path):
    return network_from_snapshot(json.loads(Path(path).read_text()))


def load_trajectory(traj_dir):
    out = Path(traj_dir)
    meta = json.loads((out / "meta.json").read_text())
    snaps = [read_snapshot(p) for p in sorted((out / "snapshots").glob("*.snap"))]
    suite = KernelSuite(meta["eps"], meta.get("quad_factor", 4.0))
    weight = WeightOmega(meta.get("weight_variant", "constant-one"))
    schedule = EpochSchedule(j=meta["j"], eps=meta["eps"], kappa=meta["kappa"],
                             T=meta["T"], dt=meta["dt"], h_res=meta["h_res"])
    records = _read_epochs(out / "epochs.csv")
    return Trajectory(
        suite=suite, weight=weight, schedule=schedule, snapshots=snaps,
        records=records, extinction_time=meta.get("extinction_time"),
        aborted=bool(meta.get("aborted", False)),
        abort_reason=meta.get("abort_reason", ""),
    )


def _read_epochs(path):
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split(",")
    col = {name: k for k, name in enumerate(header)}
    labels = [int(name.split("_", 1)[1]) for name in header if name.startswith("flux_")]
    records = []
    for line in text[1:]:
        cells = line.split(",")

        def get(name, cast=float):
            return cast(cells[col[name]])

        records.append(EpochRecord(
            k=get("k", int), t0=get("t0"), t1=get("t1"), dt=get("dt"),
            mass_start=get("mass_start"), mass_after_deform=get("mass_after_deform"),
            mass_end=get("mass_end"), mass_drop=get("mass_drop"),
            moves_applied=get("moves_applied", int),
            max_volume_delta=get("max_volume_delta"), energy=get("energy"),
            max_h=get("max_h"), max_grad_h=get("max_grad_h"),
            guard_halvings=get("guard_halvings", int),
            fluxes={i: get(f"flux_{i}") for i in labels},
            areas={i: get(f"area_{i}") for i in labels},
            resample_area={}, resample_area_abs=get("resample_area_abs"),
            resample_mass_abs=get("resample_mass_abs"),
            dissipation_lhs=get("dissipation_lhs"),
            dissipation_rhs=get("dissipation_rhs"),
            dissipation_ok=bool(int(cells[col["dissipation_ok"]])),
            side_flips=get("side_flips", int), surgeries=get("surgeries", int),
            flagged_surgeries=get("flagged_surgeries", int),
        ))
    return records


# ---------------------------------------------------------------------------
# report rendering and plot data
# ---------------------------------------------------------------------------


def render_report(rep):
    lines = []

    def section(name):
        lines.append(f"[{name}]")

    section("brakke")
    asserted = [r for r in rep.brakke if r.asserted]
    lines.append(f"checks = {len(rep.brakke)}")
    lines.append(f"advisory = {len(rep.brakke) - len(asserted)}")
    if asserted:
        worst = max(asserted, key=lambda r: abs(r.residual) - r.tolerance)
        lines.append(f"worst_interval = {worst.t1!r} {worst.t2!r}")
        lines.append(f"worst_residual = {worst.residual!r}")
        lines.append(f"worst_tolerance = {worst.tolerance!r}")
    lines.append(f"pass = {all(r.passed for r in asserted)}")
    lines.append("")

    section("volume_identity")
    for r in rep.volume_identity:
        lines.append(f"grain_{r.grain} = dvol {r.dvol!r} flux {r.flux!r} residual {r.residual!r}")
    lines.append("")

    section("dissipation")
    lines.append(f"failures = {rep.dissipation_failures}")
    lines.append(f"pass = {rep.dissipation_ok}")
    lines.append("")

    section("huisken")
    for r in rep.huisken:
        lines.append(
            f"query = y {r.y} s {r.s!r} r {r.r!r} lhs {r.lhs!r} rhs {r.rhs!r} "
            f"cn {r.cn!r} pass {r.passed}"
        )
    lines.append("")

    section("density")
    for r in rep.density:
        lines.append(f"t = {r.t!r} sup_ratio = {r.sup_ratio!r} threshold = {r.threshold!r} pass = {r.passed}")
    lines.append("")

    section("clearing_out")
    for r in rep.clearing_out:
        lines.append(
            f"y = {r.y} kernel_mass = {r.kernel_mass!r} predicts = {r.kernel_predicts or r.density_predicts} "
            f"distance = {r.distance!r} outcome = {r.outcome}"
        )
    lines.append("")

    section("extinction")
    if rep.extinction:
        r = rep.extinction
        lines.append(f"measured = {r.measured!r}")
        lines.append(f"bound = {r.bound!r}")
        lines.append(f"reached = {r.reached}")
        lines.append(f"pass = {r.passed}")
    lines.append("")

    section("angles")
    degs = [a for angles in rep.angles.values() for a in angles]
    lines.append(f"junctions = {len(rep.angles)}")
    if degs:
        lines.append(f"min = {min(degs)!r}")
        lines.append(f"max = {max(degs)!r}")
    lines.append("")

    section("bv_checks")
    if rep.bv:
        lines.append("reflection = structural pass")
        lines.append(f"weak_form_ratio = {rep.bv.weak_form_ratio!r}")
        lines.append(
            f"dissipation = lhs {rep.bv.dissipation_lhs!r} rhs {rep.bv.dissipation_rhs!r} "
            f"pass {rep.bv.dissipation_passed}"
        )
    lines.append("")

    section("tangential")
    if rep.tangential:
        lines.append(f"sup_ratio = {rep.tangential.sup_ratio!r}")
        lines.append(f"mean_ratio = {rep.tangential.mean_ratio!r}")
        lines.append(f"samples = {rep.tangential.samples}")
    lines.append("")

    for note in rep.notes:
        lines.append(f"# {note}")
    lines.append(f"all_passed = {rep.all_passed()}")
    return "\n".join(lines) + "\n"


def export_plot_data(traj_dir):
    """Emit plot-ready CSVs (radius, mass, residual vs time) from series.csv."""
    out = Path(traj_dir)
    rows = (out / "series.csv").read_text().strip().splitlines()
    header = rows[0].split(",")
    cols = {name: k for k, name in enumerate(header)}
    area_cols = [name for name in header if name.startswith("area_")]
    data = [r.split(",") for r in rows[1:]]

    lines = ["t," + ",".join(c.replace("area", "radius") for c in area_cols)]
    for r in data:
        rads = [repr(float(np.sqrt(max(float(r[cols[c]]), 0.0) / np.pi))) for c in area_cols]
        lines.append(",".join([r[cols["t"]]] + rads))
    (out / "radius_vs_time.csv").write_text("\n".join(lines) + "\n")

    lines = ["t,total_mass"]
    lines += [f"{r[cols['t']]},{r[cols['total_mass']]}" for r in data]
    (out / "mass_vs_time.csv").write_text("\n".join(lines) + "\n")

    lines = ["t,volume_residual"]
    lines += [f"{r[cols['t']]},{r[cols['volume_residual']]}" for r in data]
    (out / "residual_vs_time.csv").write_text("\n".join(lines) + "\n")
    return [out / n for n in ("radius_vs_time.csv", "mass_vs_time.csv", "residual_vs_time.csv")]
