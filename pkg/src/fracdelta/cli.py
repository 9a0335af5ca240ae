"""Command-line experiment runner.

    fracdelta evolve --config run.yaml --out runs/a --set model.beta=-1

Every subcommand writes ``manifest.json``, one or more CSV files and a
gnuplot script into the output directory.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .blowup_lab import critical_mass, gn_constant_estimate, run_regime, write_report
from .charge_equation import SolverOptions, TimeGrid, self_convergence, solve_charge
from .initial_data import datum_from_config
from .observables import observable_series
from .spectral_kernels import (
    ModelParams,
    build_grid,
    calibrate_grid,
    const_a,
    const_a_quadrature,
    const_b,
    green_at_origin,
    green_form_identity_check,
    green_jump_check,
    green_origin_quadrature,
)
from .standing_waves import build_standing_wave, classify, dynamic_residual, standing_energy, standing_energy_quadrature
from .wavefunction import march_snapshots, snapshot_psi_x

log = logging.getLogger("fracdelta")

KINDS = ("evolve", "standing-wave", "blowup-scan", "green-check", "convergence")

DEFAULTS: dict = {
    "model": {"s": 0.75, "beta": -1.0, "sigma": 0.4, "lam": 1.0},
    "datum": {"family": "gaussian", "amplitude_re": 0.25, "amplitude_im": 0.0, "width": 1.0, "center_frequency": 0.0},
    "time": {"h": 1 / 512, "T_final": 2.0, "solver": "fixed_point", "tol": 1e-12, "max_iter": 200,
             "blow_up_threshold": None},
    "grid": {"K_max": None, "order": 20, "tol": 1e-8},
    "snapshots": {"times": [0.0, 1.0, 2.0], "x_min": -8.0, "x_max": 8.0, "nx": 161, "observable_every": 8,
                  "virial_stride": 16},
    "standing": {"omegas": [0.5, 1.0, 2.0], "periods": 1.0},
    "blowup": {"nus": [1.0, 0.5, 0.25], "threshold_factor": 20.0, "C_s": None},
    "convergence": {"h_list": [1 / 128, 1 / 256, 1 / 512, 1 / 1024]},
    "green": {"s_list": [0.6, 0.75, 0.9, 1.0], "lam_list": [1.0, 4.0]},
}


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def _merge(base: dict, upd: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in upd.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _parse_value(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value {text!r}") from exc


def apply_override(cfg: dict, item: str) -> dict:
    """Apply one ``section.key=value`` override."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not KEY=VALUE")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    upd: dict = {}
    cur = upd
    for part in parts[:-1]:
        cur = cur.setdefault(part, {})
    cur[parts[-1]] = _parse_value(raw)
    return _merge(cfg, upd)


def load_config(path: str | None, overrides=(), kind: str | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        text = Path(path).read_text()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        cfg = _merge(cfg, data)
    for item in overrides:
        cfg = apply_override(cfg, item)
    validate(cfg, kind)
    return cfg


def _num(x, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{name} must be a number, got {x!r}")
    return float(x)


def validate(cfg: dict, kind: str | None = None):
    """Check every key before any computation starts; snapshot times only matter for ``evolve``."""
    m = cfg["model"]
    try:
        ModelParams(_num(m["s"], "model.s"), _num(m["beta"], "model.beta"), _num(m["sigma"], "model.sigma"),
                    _num(m["lam"], "model.lam"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    t = cfg["time"]
    if _num(t["h"], "time.h") <= 0 or _num(t["T_final"], "time.T_final") <= 0:
        raise ConfigError("time.h and time.T_final must be positive")
    if t["solver"] not in ("fixed_point", "newton"):
        raise ConfigError("time.solver must be fixed_point or newton")
    n = t["T_final"] / t["h"]
    if abs(n - round(n)) > 1e-9 * n:
        raise ConfigError("time.T_final must be a multiple of time.h")
    if cfg["datum"]["family"] not in ("gaussian", "gaussian_packet"):
        raise ConfigError("datum.family must be gaussian or gaussian_packet")
    for x in cfg["snapshots"]["times"]:
        if not 0 <= _num(x, "snapshots.times") <= t["T_final"] and kind in (None, "evolve"):
            raise ConfigError("snapshot times must lie in [0, T_final]")
    if int(cfg["snapshots"]["observable_every"]) < 1:
        raise ConfigError("snapshots.observable_every must be >= 1")
    hl = sorted(cfg["convergence"]["h_list"], reverse=True)
    if len(hl) < 3:
        raise ConfigError("convergence.h_list needs at least three steps")
    for om in cfg["standing"]["omegas"]:
        if _num(om, "standing.omegas") <= 0:
            raise ConfigError("standing.omegas must be positive")
    for nu in cfg["blowup"]["nus"]:
        if _num(nu, "blowup.nus") <= 0:
            raise ConfigError("blowup.nus must be positive")


def model_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    return ModelParams(float(m["s"]), float(m["beta"]), float(m["sigma"]), float(m["lam"]))


def solver_options(cfg: dict) -> SolverOptions:
    t = cfg["time"]
    return SolverOptions(solver=t["solver"], tol=float(t["tol"]), max_iter=int(t["max_iter"]),
                         blow_up_threshold=t["blow_up_threshold"])


def spectral_grid(cfg: dict, params: ModelParams, t_resolve: float):
    g = cfg["grid"]
    if g["K_max"] is None:
        return calibrate_grid(params, t_resolve=t_resolve, tol=float(g["tol"]), order=int(g["order"]))
    grid = build_grid(params, K_max=float(g["K_max"]), t_resolve=t_resolve, order=int(g["order"]), tol=float(g["tol"]))
    grid.require_calibrated()
    return grid


# ----------------------------------------------------------------- output


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


PLOT_EVOLVE = """\
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 1200,900
set output 'evolve.png'
set multiplot layout 3,2
plot 'charge.csv' using 1:4 with lines title '|q(t)|'
plot 'observables.csv' using 1:2 with lines title 'M(t)'
plot 'observables.csv' using 1:3 with lines title 'E(t)'
plot 'observables.csv' using 1:4 with lines title 'I(t)'
plot 'observables.csv' using 1:8 with lines title 'virial residual'
set view map
splot 'heatmap.csv' using 1:2:3 with pm3d title '|psi(t,x)|'
unset multiplot
"""


def _plot_simple(csv_name: str, xcol: int, ycol: int, title: str, logy: bool = False) -> str:
    return (
        "set datafile separator ','\nset key autotitle columnhead\n"
        "set terminal pngcairo size 900,600\n"
        f"set output '{csv_name.replace('.csv', '.png')}'\n"
        + ("set logscale y\n" if logy else "")
        + f"plot '{csv_name}' using {xcol}:{ycol} with linespoints title '{title}'\n"
    )


def run_evolve(cfg: dict, out: Path) -> dict:
    p = model_params(cfg)
    datum = datum_from_config(cfg["datum"], p)
    tcfg, scfg = cfg["time"], cfg["snapshots"]
    grid = spectral_grid(cfg, p, t_resolve=float(tcfg["T_final"]))
    traj = solve_charge(datum, TimeGrid.from_final(float(tcfg["T_final"]), float(tcfg["h"])), solver_options(cfg))
    traj.to_csv(out / "charge.csv")
    series = observable_series(traj, datum, grid, stride=int(scfg["virial_stride"]), every=int(scfg["observable_every"]))
    series.to_csv(out / "observables.csv")
    x = np.linspace(float(scfg["x_min"]), float(scfg["x_max"]), int(scfg["nx"]))
    idx = sorted({min(int(round(t / traj.h)), traj.n_nodes - 1) for t in scfg["times"]})
    heat = []
    files = ["charge.csv", "observables.csv", "heatmap.csv", "plot.gp"]
    for i, snap in enumerate(march_snapshots(traj, datum, grid, indices=idx, with_dk=False)):
        psi = snapshot_psi_x(snap, x, p, grid)
        snap.write_csv(out / f"snapshot_{i}_k.csv", out / f"snapshot_{i}_x.csv")
        files += [f"snapshot_{i}_k.csv", f"snapshot_{i}_x.csv"]
        heat.extend((snap.t, xi, abs(v)) for xi, v in zip(x, psi))
    _write_rows(out / "heatmap.csv", ["t", "x", "abs_psi"], heat)
    (out / "plot.gp").write_text(PLOT_EVOLVE)
    return {
        "status": traj.status,
        "mass_drift": series.mass_drift(),
        "energy_drift": series.energy_drift(),
        "virial_error": series.virial_error(),
        "max_residual_raw": float(np.max(traj.residual_raw)),
        "files": files,
    }


def run_standing(cfg: dict, out: Path) -> dict:
    p = model_params(cfg)
    h = float(cfg["time"]["h"])
    rows = []
    omegas = [None] if p.sigma == 0.0 else [float(w) for w in cfg["standing"]["omegas"]]
    for om in omegas:
        wave = build_standing_wave(om, p)
        grid = spectral_grid(cfg, wave.params, t_resolve=0.0)
        dyn, _, _ = dynamic_residual(wave, h, float(cfg["standing"]["periods"]))
        rows.append([wave.omega, standing_energy(wave), standing_energy_quadrature(wave, grid), classify(wave), dyn])
    _write_rows(out / "standing_waves.csv", ["omega", "E_closed_form", "E_quadrature", "classification",
                                             "dynamic_residual"], rows)
    (out / "plot.gp").write_text(_plot_simple("standing_waves.csv", 1, 5, "dynamic residual", logy=True))
    return {"status": "completed", "files": ["standing_waves.csv", "plot.gp"],
            "max_dynamic_residual": max(r[4] for r in rows)}


def run_blowup(cfg: dict, out: Path) -> dict:
    p = model_params(cfg)
    datum = datum_from_config(cfg["datum"], p)
    b = cfg["blowup"]
    C_s = b["C_s"] if b["C_s"] is not None else gn_constant_estimate(p)
    reports = [
        run_regime(datum, float(cfg["time"]["T_final"]), float(cfg["time"]["h"]), float(nu),
                   threshold_factor=float(b["threshold_factor"]), C_s=float(C_s))
        for nu in b["nus"]
    ]
    write_report(reports, out / "blowup.csv")
    (out / "plot.gp").write_text(_plot_simple("blowup.csv", 4, 5, "E0 vs nu"))
    return {"status": "completed", "files": ["blowup.csv", "plot.gp"], "C_s": float(C_s),
            "critical_mass": critical_mass(p, float(C_s)) if p.beta < 0 else math.inf,
            "outcomes": [str(r.outcome) for r in reports]}


def run_green(cfg: dict, out: Path) -> dict:
    rows = []
    for s in cfg["green"]["s_list"]:
        for lam in cfg["green"]["lam_list"]:
            p = ModelParams(float(s), 0.0, 0.0, float(lam))
            grid = calibrate_grid(p)
            jump = green_jump_check(p, grid)
            rows.append(["jump", s, lam, jump, -1.0, 1e-4, abs(jump + 1.0) < 1e-4])
            form = green_form_identity_check(p, grid)
            rows.append(["form_identity", s, lam, form, 0.0, 1e-8, form < 1e-8])
            g0, gq = green_at_origin(p), green_origin_quadrature(p)
            rows.append(["green_origin", s, lam, gq, g0, 1e-8, abs(gq - g0) / g0 < 1e-8])
        p = ModelParams(float(s), 0.0, 0.0, 1.0)
        a, aq = const_a(p), const_a_quadrature(p)
        rows.append(["const_a", s, "", abs(aq - a), 0.0, 1e-6, abs(aq - a) < 1e-6])
        rel = abs(const_b(p) * (2 * s - 1) + 2j * s * a)
        rows.append(["const_b_relation", s, "", rel, 0.0, 1e-14, rel < 1e-14])
    table = [[*r[:6], "PASS" if r[6] else "FAIL"] for r in rows]
    _write_rows(out / "green_check.csv", ["check", "s", "lam", "value", "target", "tol", "result"], table)
    (out / "plot.gp").write_text(_plot_simple("green_check.csv", 2, 4, "identity values"))
    n_fail = sum(1 for r in rows if not r[6])
    return {"status": "completed" if n_fail == 0 else "failed", "failures": n_fail, "files": ["green_check.csv", "plot.gp"]}


def run_convergence(cfg: dict, out: Path) -> dict:
    p = model_params(cfg)
    datum = datum_from_config(cfg["datum"], p)
    rep = self_convergence(datum, float(cfg["time"]["T_final"]), cfg["convergence"]["h_list"], solver_options(cfg))
    rows = []
    for i, h in enumerate(rep.h):
        err = rep.errors[i] if i < len(rep.errors) else math.nan
        order = rep.orders[i - 1] if (rep.orders and 1 <= i <= len(rep.orders)) else math.nan
        rows.append([h, rep.q_final[i].real, rep.q_final[i].imag, err, order, rep.expected])
    _write_rows(out / "convergence.csv", ["h", "re_q_final", "im_q_final", "successive_diff", "observed_order",
                                          "expected_order"], rows)
    (out / "plot.gp").write_text(_plot_simple("convergence.csv", 1, 4, "successive difference", logy=True))
    return {"status": "completed", "orders": rep.orders, "expected_order": rep.expected,
            "files": ["convergence.csv", "plot.gp"]}


RUNNERS = {
    "evolve": run_evolve,
    "standing-wave": run_standing,
    "blowup-scan": run_blowup,
    "green-check": run_green,
    "convergence": run_convergence,
}


def run(kind: str, cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = RUNNERS[kind](cfg, out)
    manifest = {
        "kind": kind,
        "config": cfg,
        "versions": {"fracdelta": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "wall_time_s": time.perf_counter() - t0,
        "result": result,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))
    return 0 if result.get("status") in ("completed", "threshold") else 1


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracdelta", description="Fractional Schroedinger equation with a point nonlinearity.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="YAML or JSON config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. model.beta=-1 (repeatable)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.overrides, args.kind)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        ap.error(str(exc))
    try:
        return run(args.kind, cfg, Path(args.out))
    except Exception as exc:  # propagate module diagnostics with context
        log.error("%s failed: %s: %s", args.kind, type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
