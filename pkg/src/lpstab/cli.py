"""
Command line runner.

    lpstab satellite --set k=0 --out runs/sat
    lpstab --scenario mhd --config mhd.cfg
    lpstab verify --seed 7
    lpstab sweep --set parameter=gamma

Parameters come from a flat ``key=value`` file (``--config``), then from
``--set key=value`` overrides (repeatable); ``--key value`` is accepted as a
shorthand.  Exit status is 0 when every verdict passes, 1 when a scenario
criterion fails and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, mhd2d, satellite
from .analysis import CasimirProfile, gain_threshold_satellite, second_variation
from .dynamics import ScenarioReport, Trajectory
from .verify import structural_suite

SCENARIOS = ("satellite", "mhd", "verify", "sweep")

DEFAULTS: Dict[str, Dict[str, object]] = {
    "satellite": dict(lambda1=1.0, lambda2=2.0, I3=3.0, i3=1.0, k=2.0, s=1, perturbation=1e-2,
                      horizon=200.0, step=1e-3, curvature=1.0, monitor_stride=10, csv_stride=1),
    "mhd": dict(L=2.0, W=2.0, gamma=0.8, e=1.0, Nx=24, Ny=24, dealias=False, s=-1, amplitude=1e-2,
                mode_m=1, mode_n=1, horizon=50.0, step=1e-3, monitor_stride=10, csv_stride=50,
                uncontrolled=True),
    "verify": dict(n_states=100, mhd_modes=8),
    "sweep": dict(parameter="k", grid="auto", lambda1=1.0, lambda2=2.0, I3=3.0, i3=1.0, s=0,
                  L=2.0, W=2.0, e=1.0, modes=8, workers=4),
}

SWEEP_GRIDS = {"k": "0:3:0.1", "gamma": "0:0.9:0.1"}


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------

def _coerce(value: str, default):
    if isinstance(default, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    try:
        if isinstance(default, int):
            f = float(value)
            if f != int(f):
                raise ConfigError(f"not an integer: {value!r}")
            return int(f)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"bad number: {value!r}") from None
    return value


def parse_pairs(pairs: Sequence[str]) -> Dict[str, str]:
    out = {}
    for p in pairs:
        if "=" not in p:
            raise ConfigError(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_config(path: str) -> Dict[str, str]:
    lines = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                lines.append(line)
    return parse_pairs(lines)


def resolve(scenario: str, overrides: Dict[str, str]) -> Dict[str, object]:
    defaults = DEFAULTS[scenario]
    params = dict(defaults)
    unknown = sorted(set(overrides) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown keys for {scenario}: {', '.join(unknown)}")
    for k, v in overrides.items():
        params[k] = _coerce(v, defaults[k])
    return params


# -- output -------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def provenance(scenario: str, params: Dict[str, object], seed: Optional[int]) -> List[str]:
    lines = [f"# lpstab {__version__}", f"# scenario: {scenario}"]
    if seed is not None:
        lines.append(f"# seed: {seed}")
    for k in sorted(params):
        lines.append(f"# {k}: {json.dumps(params[k])}")
    return lines


def write_trajectory_csv(path: str, traj: Trajectory, header: List[str], stride: int = 1) -> None:
    n = traj.states.shape[1]
    names = ["t"] + [f"z{i}" for i in range(n)] + list(traj.monitors)
    with open(path, "w") as fh:
        for h in header:
            fh.write(h + "\n")
        fh.write(",".join(names) + "\n")
        idx = list(range(0, len(traj.times), stride))
        if idx[-1] != len(traj.times) - 1:
            idx.append(len(traj.times) - 1)
        for i in idx:
            row = [traj.times[i], *traj.states[i], *(traj.monitors[m][i] for m in traj.monitors)]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_table_csv(path: str, columns: List[str], rows: List[Sequence], header: List[str]) -> None:
    with open(path, "w") as fh:
        for h in header:
            fh.write(h + "\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in r) + "\n")


def write_json(path: str, obj) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return str(o)

    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def write_plots(out: str, prefix: str, report: ScenarioReport) -> List[str]:
    """One SVG per monitor series; skipped silently when matplotlib is absent."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return []
    matplotlib.rcParams["svg.hashsalt"] = "lpstab"
    files = []
    for tname, tr in report.trajectories.items():
        for m, series in tr.monitors.items():
            fig, ax = plt.subplots(figsize=(5, 3))
            y = np.asarray(series, float)
            if np.all(y > 0) and y.max() / max(y.min(), 1e-300) > 1e3:
                ax.set_yscale("log")
            ax.plot(tr.times, y, lw=1)
            ax.set_xlabel("t")
            ax.set_ylabel(m)
            ax.set_title(f"{prefix} {tname}")
            fig.tight_layout()
            path = os.path.join(out, f"{prefix}_{tname}_{m}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            files.append(path)
    return files


# -- scenarios ----------------------------------------------------------------

def run_satellite(params, out, seed, plot) -> ScenarioReport:
    p = satellite.SatelliteParams(params["lambda1"], params["lambda2"], params["I3"], params["i3"], params["k"])
    rep = satellite.scenario_middle_axis(p, params["perturbation"], params["horizon"], params["step"],
                                         params["s"], params["curvature"], params["monitor_stride"])
    head = provenance("satellite", params, seed)
    for name, tr in rep.trajectories.items():
        write_trajectory_csv(os.path.join(out, f"satellite_{name}.csv"), tr, head, params["csv_stride"])
    if plot:
        write_plots(out, "satellite", rep)
    return rep


def run_mhd(params, out, seed, plot) -> ScenarioReport:
    cfg = mhd2d.ChannelConfig(params["L"], params["W"], params["gamma"], params["e"],
                              params["Nx"], params["Ny"], params["dealias"])
    rep = mhd2d.scenario_shear(cfg, params["amplitude"], (params["mode_m"], params["mode_n"]),
                               params["horizon"], params["step"], params["s"], params["monitor_stride"],
                               params["uncontrolled"])
    head = provenance("mhd", params, seed)
    for name, tr in rep.trajectories.items():
        write_trajectory_csv(os.path.join(out, f"mhd_{name}.csv"), tr, head, params["csv_stride"])
        n = cfg.size
        for label, i in (("initial", 0), ("final", -1)):
            g = 0.0 if name == "uncontrolled" else cfg.gamma
            mhd2d.export_snapshot(os.path.join(out, f"mhd_{name}_domega_{label}.txt"),
                                  cfg, tr.states[i][:n].reshape(cfg.shape), float(tr.times[i]), g)
    if plot:
        write_plots(out, "mhd", rep)
    return rep


def run_verify(params, out, seed, plot) -> ScenarioReport:
    if seed is None:
        raise ConfigError("verify needs --seed")
    checks = structural_suite(seed, params["n_states"], params["mhd_modes"])
    rep = ScenarioReport("verify", params={**params, "seed": seed})
    for c in checks:
        rep.verdicts[c.name] = c.passed
        rep.metrics[c.name] = c.residual
        if c.detail:
            rep.notes[c.name] = c.detail
    rows = [(c.name, c.residual, c.tol, "pass" if c.passed else "FAIL") for c in checks]
    write_table_csv(os.path.join(out, "verify.csv"), ["check", "residual", "tol", "status"], rows,
                    provenance("verify", params, seed))
    return rep


def parse_grid(spec: str) -> np.ndarray:
    """'a:b:step' (inclusive of b) or a comma-separated list."""
    spec = spec.strip()
    if not spec:
        raise ConfigError("empty sweep grid")
    if ":" in spec:
        try:
            a, b, h = (float(x) for x in spec.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid {spec!r}") from None
        if h <= 0 or b < a:
            raise ConfigError(f"empty sweep grid {spec!r}")
        n = int(math.floor((b - a) / h + 1e-9))
        return np.round(a + h * np.arange(n + 1), 12)
    try:
        vals = np.array([float(x) for x in spec.split(",") if x.strip()])
    except ValueError:
        raise ConfigError(f"bad grid {spec!r}") from None
    if vals.size == 0:
        raise ConfigError("empty sweep grid")
    return vals


def _k_point(params, k):
    s = params["s"] or 1
    p = satellite.SatelliteParams(params["lambda1"], params["lambda2"], params["I3"], params["i3"], k)
    sys = satellite.build_satellite(p, s=s)
    rep = second_variation(sys, satellite.default_profile(p), np.array([0.0, 1.0, 0.0, 0.0]))
    target = "positive-definite" if s == 1 else "negative-definite"
    return rep.classification, float(rep.eigenvalues.min() if s == 1 else -rep.eigenvalues.max()), \
        rep.classification == target


def _gamma_point(params, g):
    s = params["s"] or -1
    n = params["modes"]
    cfg = mhd2d.ChannelConfig(params["L"], params["W"], g, params["e"], n, n)
    sys = mhd2d.build_mhd_system(cfg, s=s)
    prof = CasimirProfile.linear("enstrophy", -1.0 / (2.0 * (1.0 - g)))
    rep = second_variation(sys, prof, np.zeros(2 * cfg.size))
    target = "negative-definite" if s == -1 else "positive-definite"
    return rep.classification, mhd2d.stability_margin(cfg), rep.classification == target


def run_sweep(params, out, seed, plot) -> ScenarioReport:
    par = params["parameter"]
    if par not in SWEEP_GRIDS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_GRIDS)}")
    grid = parse_grid(SWEEP_GRIDS[par] if params["grid"] == "auto" else params["grid"])
    if par == "k":
        p0 = satellite.SatelliteParams(params["lambda1"], params["lambda2"], params["I3"], params["i3"], 0.0)
        analytic = gain_threshold_satellite(p0)
        fn = _k_point
    else:
        if np.any(grid >= 1) or np.any(grid < 0):
            raise ConfigError("gamma grid must lie in [0, 1)")
        cfg = mhd2d.ChannelConfig(params["L"], params["W"], 0.0, params["e"])
        # margin(gamma) = 0  <=>  1/((1-gamma) L^2) = 1 - 1/W^2
        r = 1.0 - 1.0 / cfg.W ** 2
        analytic = 1.0 - 1.0 / (cfg.L ** 2 * r) if r > 0 else float("nan")
        fn = _gamma_point
    try:
        with ThreadPoolExecutor(max_workers=max(1, params["workers"])) as ex:
            results = list(ex.map(lambda v: fn(params, float(v)), grid))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [(v, cls, m, float(d)) for v, (cls, m, d) in zip(grid, results)]
    write_table_csv(os.path.join(out, f"sweep_{par}.csv"), [par, "classification", "margin", "definite"],
                    rows, provenance("sweep", params, seed))
    rep = ScenarioReport("sweep", params={**params, "grid_values": grid.tolist()})
    rep.metrics["analytic_threshold"] = analytic
    flips = [i for i in range(1, len(grid)) if results[i][2] != results[i - 1][2]]
    if flips:
        i = flips[0]
        lo, hi = float(grid[i - 1]), float(grid[i])
        rep.metrics["bracket_low"] = lo
        rep.metrics["bracket_high"] = hi
        # the degenerate grid point at the threshold itself counts as not definite
        rep.verdicts["threshold_bracketed"] = lo - 1e-12 <= analytic <= hi + 1e-12
    else:
        rep.verdicts["threshold_bracketed"] = False
        rep.notes["bracket"] = "no sign change on grid"
    return rep


RUNNERS = {"satellite": run_satellite, "mhd": run_mhd, "verify": run_verify, "sweep": run_sweep}


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpstab", description="Run stabilization scenarios and checks.")
    ap.add_argument("scenario_pos", nargs="?", choices=SCENARIOS, metavar="scenario",
                    help="one of: " + ", ".join(SCENARIOS))
    ap.add_argument("--scenario", choices=SCENARIOS)
    ap.add_argument("--out", default="runs", help="output directory (default: runs)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--config", help="flat key=value file")
    ap.add_argument("--plot", action="store_true", help="also write SVG plots of monitor series")
    return ap


def _extra_overrides(extra: List[str]) -> List[str]:
    """Turn ``--key value`` / ``--key=value`` leftovers into key=value pairs."""
    out = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or tok == "--":
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            out.append(key)
            i += 1
            continue
        if i + 1 >= len(extra):
            raise ConfigError(f"missing value for {tok}")
        out.append(f"{key}={extra[i + 1]}")
        i += 2
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args, extra = ap.parse_known_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        scen = args.scenario or args.scenario_pos
        if scen is None:
            raise ConfigError("no scenario given")
        if args.scenario and args.scenario_pos and args.scenario != args.scenario_pos:
            raise ConfigError("conflicting scenarios")
        pairs = read_config(args.config) if args.config else {}
        pairs.update(parse_pairs(args.overrides + _extra_overrides(extra)))
        params = resolve(scen, pairs)
        os.makedirs(args.out, exist_ok=True)
        report = RUNNERS[scen](params, args.out, args.seed, args.plot)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid parameters: {exc}", file=sys.stderr)
        return 2
    write_json(os.path.join(args.out, f"{scen}_report.json"), report.to_dict())
    for name, ok in report.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if report.passed:
        return 0
    print(f"failed: {report.first_failure()}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
