"""Command-line entry point: ``stueck <command> [options]``.

Exit codes: 0 success, 1 selftest failure, 2 invalid input or config,
3 numerical failure or infeasible data.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from collections import deque
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, acceptance, cosmology, massmodel, oscillation
from .bohmian import (chetaev_action, continuity_residual, decompose, hamilton_jacobi_residual,
                      stability_functional)
from .config import ConfigError, RunConfig, load, reference
from .constants import ModelConstants
from .evolution import EvolveConfig, Potential, evolve, expectation_K
from .fieldgrid import SCHEMA_VERSION, GridSpec, MetricSignature, field_to_csv, gaussian_packet, plane_wave
from .trajectories import TrajectoryEnsemble, equivariance_test, integrate_trajectories

log = logging.getLogger("stueck")

EXIT_OK, EXIT_SELFTEST, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

MASS_CHOICE = "|m2| (heaviest state) feeds the cloud-diameter relation"


class UsageError(ValueError):
    pass


# ---- output helpers


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _csv_text(header, rows, meta=None) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    return json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, stem: str, payload: dict, header, rows, meta=None) -> None:
    if args.format == "json":
        _write(args, f"{stem}.json", _json_text(payload))
    else:
        _write(args, f"{stem}.csv", _csv_text(header, rows, meta))


# ---- model construction from config


def _metric(cfg: RunConfig) -> MetricSignature:
    spec, ndim = cfg.grid.metric, cfg.grid.ndim
    if spec == "euclidean":
        return MetricSignature.euclidean(ndim)
    if spec == "minkowski":
        return MetricSignature.minkowski(ndim)
    if isinstance(spec, list):
        metric = MetricSignature(tuple(spec))
        if metric.ndim != ndim:
            raise UsageError(f"[grid] metric has {metric.ndim} entries, ndim is {ndim}")
        return metric
    raise UsageError(f"[grid] metric must be 'euclidean', 'minkowski' or a list of signs, got {spec!r}")


def _grid(cfg: RunConfig) -> GridSpec:
    g = cfg.grid
    return GridSpec.uniform(g.lo, g.hi, g.n, g.ndim)


def _potential(cfg: RunConfig) -> Potential:
    p = cfg.potential
    if p.kind == "zero":
        return Potential.zero()
    if p.kind == "harmonic":
        return Potential.harmonic(p.omega)
    if p.kind == "expression":
        return Potential("expression", expression=p.expression)
    raise UsageError(f"[potential] kind must be zero, harmonic or expression, got {p.kind!r}")


def _initial_field(cfg: RunConfig, grid: GridSpec, metric: MetricSignature):
    ev = cfg.evolution
    if ev.preset == "free-gaussian":
        return gaussian_packet(grid, metric, sigma=ev.sigma, center=ev.center, wavenumber=ev.wavenumber)
    if ev.preset == "plane-wave":
        for ax in grid.axes:
            cycles = ev.wavenumber * ax.length / (2.0 * math.pi)
            if abs(cycles - round(cycles)) > 1e-9:
                raise UsageError(f"plane-wave wavenumber {ev.wavenumber} is not periodic on the box")
        return plane_wave(grid, metric, wavenumber=ev.wavenumber)
    raise UsageError(f"[evolution] preset must be 'free-gaussian' or 'plane-wave', got {ev.preset!r}")


def _setup(cfg: RunConfig):
    grid, metric = _grid(cfg), _metric(cfg)
    constants = ModelConstants(cfg.evolution.hbar, cfg.evolution.mass)
    ev = cfg.evolution
    step_cfg = EvolveConfig(ev.ds, ev.n_steps, ev.scheme, 1)
    return grid, metric, constants, step_cfg, _potential(cfg), _initial_field(cfg, grid, metric)


def _is_output(j: int, cfg: RunConfig) -> bool:
    return j % cfg.evolution.snapshot_stride == 0 or j == cfg.evolution.n_steps


# ---- commands


def cmd_evolve(args, cfg: RunConfig) -> int:
    grid, metric, constants, step_cfg, U, field0 = _setup(cfg)
    out = _out_dir(args, "stueck-evolve")
    n_traj = cfg.trajectories.n_traj
    norm0 = field0.norm()
    window = deque(maxlen=3)
    all_snaps = [] if n_traj > 0 else None
    index, diag = [], {}

    def record(snap, j):
        name = f"snapshot_{j:06d}.csv"
        (out / name).write_text(field_to_csv(snap))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ek = expectation_K(snap, constants)
        index.append({"s": snap.s, "norm": snap.norm(), "expectation_K": ek, "filename": name})
        polar = decompose(snap, constants=constants)
        diag[j] = {
            "s": snap.s,
            "norm": snap.norm(),
            "norm_drift": abs(snap.norm() - norm0),
            "L2_continuity": math.nan,
            "L2_HJ": math.nan,
            "chetaev_action": chetaev_action(snap, polar, constants, cfg.grid.backend).value,
            "max_abs_lambda": stability_functional(polar, constants, cfg.grid.backend).max_abs_lambda,
            "KS": math.nan,
        }

    def residuals(triple, j):
        diag[j]["L2_continuity"] = continuity_residual(triple, constants, cfg.grid.backend).l2
        diag[j]["L2_HJ"] = hamilton_jacobi_residual(triple, U, constants, backend=cfg.grid.backend).l2

    def on_snapshot(snap):
        j = round((snap.s - field0.s) / step_cfg.ds)
        window.append(snap)
        if all_snaps is not None:
            all_snaps.append(snap)
        if _is_output(j, cfg):
            record(snap, j)
        if len(window) == 3 and _is_output(j - 1, cfg):
            residuals(list(window), j - 1)

    evolve(field0, U, step_cfg, constants, callback=on_snapshot, keep_snapshots=False)

    if all_snaps is not None:
        t = cfg.trajectories
        ens = TrajectoryEnsemble(n_traj, seed=t.seed, integrator=t.integrator,
                                 record_stride=cfg.evolution.snapshot_stride)
        ens = integrate_trajectories(all_snaps, ens, constants)
        report = equivariance_test(all_snaps, ens)
        for s, ks in zip(report.s, report.ks):
            j = round((s - field0.s) / step_cfg.ds)
            if j in diag:
                diag[j]["KS"] = float(ks)

    (out / "index.json").write_text(_json_text({"snapshots": index}))
    cols = ["s", "norm", "norm_drift", "L2_continuity", "L2_HJ", "chetaev_action", "max_abs_lambda", "KS"]
    rows = [[diag[j][c] for c in cols] for j in sorted(diag)]
    if args.format == "json":
        (out / "diagnostics.json").write_text(_json_text({"diagnostics": [diag[j] for j in sorted(diag)]}))
    else:
        (out / "diagnostics.csv").write_text(_csv_text(cols, rows))
    return EXIT_OK


def cmd_trajectories(args, cfg: RunConfig) -> int:
    grid, metric, constants, step_cfg, U, field0 = _setup(cfg)
    out = _out_dir(args, "stueck-trajectories")
    snaps = evolve(field0, U, step_cfg, constants)
    t = cfg.trajectories
    ens = TrajectoryEnsemble(t.n_traj, seed=t.seed, integrator=t.integrator, record_stride=t.record_stride)
    ens = integrate_trajectories(snaps, ens, constants)
    report = equivariance_test(snaps, ens)
    header = ["traj_id", "s"] + [f"q_{a}" for a in range(grid.ndim)]
    rows = []
    for i in range(t.n_traj):
        for k, s in enumerate(ens.s):
            rows.append([i, s, *ens.positions[k, i]])
    meta = {"resampled": ens.resampled, "dead": ens.dead}
    (out / "trajectories.csv").write_text(_csv_text(header, rows, meta))
    eq_rows = list(zip(report.s, report.ks))
    if args.format == "json":
        (out / "equivariance.json").write_text(_json_text(
            {"n_traj": t.n_traj, "seed": t.seed, "s": report.s, "ks": report.ks}))
    else:
        (out / "equivariance.csv").write_text(_csv_text(["s", "ks"], eq_rows))
    return EXIT_OK


def cmd_oscillate(args, cfg: RunConfig) -> int:
    o = cfg.oscillation
    sc = oscillation.MixingScenario(o.m1, o.m2, o.theta, o.L, o.E_nu, o.beta)
    if o.num < 1:
        raise UsageError("[oscillation] num must be >= 1")
    values = np.linspace(o.start, o.stop, o.num)
    table = oscillation.survival_sweep(sc, o.axis, values)
    header = ["x", "survival_standard", "survival_prqm"]
    payload = {"axis": o.axis, "scenario": {k: v for k, v in asdict(sc).items() if k != "model"},
               "columns": header, "rows": table}
    _emit(args, "oscillation", payload, header, table.tolist(), {"axis": o.axis})
    return EXIT_OK


def _solve(m, model: str):
    model = oscillation.Model.parse(model).value
    scale = 2.0 if model == "prqm" else 1.0
    data = massmodel.OscillationData(m.dm2_21 * scale, m.dm2_32 * scale, m.tan2_theta12)
    sol = massmodel.solve_masses(data)
    report = massmodel.sum_mass_check(sol.triplet)
    body = sol.to_dict()
    body.update({
        "model": model,
        "input": asdict(data),
        "sum": report.total,
        "bound": report.bound,
        "bound_pass": report.passed,
        "printed_coefficients": list(massmodel.PRINTED_COEFFICIENTS),
        "alternate_branch": None if sol.alternate is None else sol.alternate.to_dict(),
    })
    return sol, body


def cmd_masses(args, cfg: RunConfig) -> int:
    sol, body = _solve(cfg.masses, cfg.masses.model)
    header = ["index", "mass_signed", "mass_abs"]
    rows = [[i + 1, sol.triplet.signed[i], sol.triplet.abs[i]] for i in range(3)]
    meta = {"model": body["model"], "sum": _fmt(body["sum"]), "bound_pass": body["bound_pass"]}
    _emit(args, "masses", body, header, rows, meta)
    return EXIT_OK


def cmd_table1(args, cfg: RunConfig) -> int:
    columns = {}
    for model in ("standard", "prqm"):
        sol, body = _solve(cfg.masses, model)
        printed = np.array(massmodel.PRINTED_TABLE1[model]["masses_abs"])
        body["printed_abs"] = printed.tolist()
        body["relative_delta"] = ((sol.triplet.abs - printed) / printed).tolist()
        columns[model] = body
    header = ["quantity", "standard", "prqm", "printed_standard", "printed_prqm",
              "rel_delta_standard", "rel_delta_prqm"]
    std, prqm = columns["standard"], columns["prqm"]

    def row(label, a, b, pa, pb):
        return [label, a, b, pa, pb, (a - pa) / pa, (b - pb) / pb]

    rows = [row(key, std["input"][key], prqm["input"][key],
                massmodel.PRINTED_TABLE1["standard"][key], massmodel.PRINTED_TABLE1["prqm"][key])
            for key in ("dm2_21", "dm2_32")]
    for i in range(3):
        rows.append(row(f"|m{i + 1}|", std["masses_abs"][i], prqm["masses_abs"][i],
                        std["printed_abs"][i], prqm["printed_abs"][i]))
    rows.append(row("sum", std["sum"], prqm["sum"], sum(std["printed_abs"]), sum(prqm["printed_abs"])))
    _emit(args, "table1", {"columns": columns}, header, rows)
    return EXIT_OK


def cmd_cosmo(args, cfg: RunConfig) -> int:
    c = cfg.cosmo
    band = (c.band_lo, c.band_hi)
    diameter = cosmology.cloud_diameter(c.m_nu)
    muraki = cosmology.lss_compare(diameter, c.lss_scale, band)
    cloud = cosmology.self_consistent_cloud(c.m_nu, c.number_density, c.mass_multiplier, c.lss_scale)
    derived = cosmology.lss_compare(cloud.diameter, c.lss_scale, band)
    payload = {
        "m_nu": c.m_nu,
        "lss_scale": c.lss_scale,
        "band": list(band),
        "muraki": {"coefficient": cosmology.CLOUD_DIAMETER_COEFFICIENT, "diameter": diameter,
                   "ratio": muraki.ratio, "verdict": muraki.verdict},
        "self_consistent": dict(cloud.to_dict(), verdict=derived.verdict),
    }
    header = ["relation", "diameter_Mpc", "ratio", "verdict", "coefficient"]
    rows = [["muraki", diameter, muraki.ratio, muraki.verdict, cosmology.CLOUD_DIAMETER_COEFFICIENT],
            ["self_consistent", cloud.diameter, cloud.ratio, derived.verdict, cloud.coefficient]]
    _emit(args, "cosmo", payload, header, rows)
    return EXIT_OK


def cmd_pipeline(args, cfg: RunConfig) -> int:
    c = cfg.cosmo
    results = []
    for model in ("standard", "prqm"):
        sol, _ = _solve(cfg.masses, model)
        m_nu = float(sol.triplet.abs[1])
        d = cosmology.cloud_diameter(m_nu)
        cmp = cosmology.lss_compare(d, c.lss_scale, (c.band_lo, c.band_hi))
        results.append({"model": model, "mass_eV": m_nu, "diameter_Mpc": d,
                        "ratio": cmp.ratio, "verdict": cmp.verdict})
    header = ["model", "mass_eV", "diameter_Mpc", "ratio", "verdict"]
    rows = [[r[h] for h in header] for r in results]
    payload = {"lss_scale": c.lss_scale, "mass_choice": MASS_CHOICE, "results": results}
    _emit(args, "pipeline", payload, header, rows, {"lss_scale": _fmt(c.lss_scale), "mass_choice": MASS_CHOICE})
    return EXIT_OK


def cmd_selftest(args, cfg: RunConfig) -> int:
    checks = []
    for check in acceptance.CHECKS:
        result = check()
        checks.append(result)
        print(result.line(), flush=True)
    n_pass = sum(c.passed for c in checks)
    print(f"{n_pass}/{len(checks)} criteria passed")
    return EXIT_OK if n_pass == len(checks) else EXIT_SELFTEST


COMMANDS = {
    "evolve": (cmd_evolve, "evolve a field and write snapshots plus diagnostics"),
    "trajectories": (cmd_trajectories, "integrate a guided trajectory ensemble"),
    "oscillate": (cmd_oscillate, "two-flavor survival probability sweep"),
    "masses": (cmd_masses, "see-saw neutrino masses from oscillation data"),
    "table1": (cmd_table1, "regenerate both mass columns against the published values"),
    "cosmo": (cmd_cosmo, "neutrino cloud size and LSS comparison"),
    "pipeline": (cmd_pipeline, "masses -> cloud diameter -> LSS verdict for both models"),
    "selftest": (cmd_selftest, "run the acceptance checks"),
}


def _global_options(parser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="TOML run configuration")
    parser.add_argument("--seed", type=int, default=default, help="trajectory RNG seed (overrides config)")
    parser.add_argument("--out", default=default, help="output directory (default: stdout or a per-command dir)")
    parser.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS if suppress else "csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stueck", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--dump-config", action="store_true", help="print every config key with its default and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command")
    subs = {}
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        subs[name] = p
    for name in ("masses", "table1", "pipeline"):
        p = subs[name]
        p.add_argument("--dm21", type=float, help="solar splitting dm2_21 [eV^2]")
        p.add_argument("--dm32", type=float, help="atmospheric splitting dm2_32 [eV^2]")
        p.add_argument("--tan2theta", type=float, help="tan^2 of the solar angle")
    subs["masses"].add_argument("--model", choices=("standard", "prqm"))
    for name in ("cosmo", "pipeline"):
        subs[name].add_argument("--lss", type=float, help="LSS scale [Mpc]")
    subs["cosmo"].add_argument("--mass", type=float, help="neutrino mass [eV]")
    subs["cosmo"].add_argument("--density", type=float, help="number density [m^-3]")
    subs["cosmo"].add_argument("--multiplier", type=float, help="total-to-neutrino mass density factor")
    p = subs["oscillate"]
    p.add_argument("--axis", choices=("L", "E"))
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int)
    p = subs["evolve"]
    p.add_argument("--preset", choices=("free-gaussian", "plane-wave"))
    return parser


def _apply_overrides(args, cfg: RunConfig) -> RunConfig:
    def pick(section, mapping):
        updates = {key: getattr(args, flag) for flag, key in mapping.items()
                   if getattr(args, flag, None) is not None}
        return replace(getattr(cfg, section), **updates) if updates else getattr(cfg, section)

    cfg = replace(
        cfg,
        masses=pick("masses", {"dm21": "dm2_21", "dm32": "dm2_32", "tan2theta": "tan2_theta12", "model": "model"}),
        cosmo=pick("cosmo", {"mass": "m_nu", "lss": "lss_scale", "density": "number_density",
                             "multiplier": "mass_multiplier"}),
        oscillation=pick("oscillation", {"axis": "axis", "start": "start", "stop": "stop", "num": "num"}),
        evolution=pick("evolution", {"preset": "preset"}),
        trajectories=pick("trajectories", {"seed": "seed"}),
    )
    return cfg


def _check_threads() -> None:
    raw = os.environ.get("STUECK_THREADS")
    if raw is None:
        return
    try:
        ok = int(raw) >= 1
    except ValueError:
        ok = False
    if not ok:
        raise UsageError(f"STUECK_THREADS must be a positive integer, got {raw!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_threads()
        cfg = load(args.config) if args.config else RunConfig()
        if args.dump_config:
            sys.stdout.write(reference(cfg))
            return EXIT_OK
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        cfg = _apply_overrides(args, cfg)
        handler = COMMANDS[args.command][0]
        return handler(args, cfg)
    except massmodel.InfeasibleDataError as exc:
        print(f"error: infeasible data: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, UsageError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
