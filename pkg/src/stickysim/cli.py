"""Scenario-driven command line front end.

``stickysim run <config>`` executes a YAML scenario (bundled name or path)
and writes manifest.json, bounds.csv, estimates.csv, curves.csv and
report.json into the output directory.  ``stickysim bounds <config>`` runs
only the analytic part; ``stickysim list`` shows the bundled scenarios.

Exit codes: 0 success, 1 input/config error, 2 a numeric consistency check
failed (results are still written).

Outputs are deterministic functions of (config, seed): the manifest embeds
the fully resolved configuration and rerunning from it (``stickysim run
manifest.json``) reproduces every number bitwise, independent of --threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from importlib import resources

import numpy as np
import yaml

from . import __version__
from . import bounds as bnd
from . import casestudies as cs
from . import engine as eng
from . import estimators as est
from .model import (DriftSpec, KappaSpec, LKRProfile, ModelError,
                    builtin_models)

BUNDLED = {
    "ou-demo": "Shifted Ornstein-Uhlenbeck pair: exact TV curve vs coupling "
               "estimate vs analytic bound (sandwich check)",
    "cbm-demo": "Confined Brownian motion: two-regime upper bound vs the "
                "explicit stationary lower bounds",
    "sticky-ergodic": "Long sticky radial path: boundary atom and "
                      "local-time identity vs quadrature",
    "mkv-demo": "Mean-field particle pair: empirical W1 decay vs the "
                "time-dependent bound curve",
}


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _trajectory_rows(ensemble):
    """Columnar trajectory rows (time, path_id, fields) for an ensemble."""
    rows = []
    if isinstance(ensemble, eng.CouplingEnsemble):
        header = ["time", "path_id", "r_tilde", "r_comp"]
        for p in range(ensemble.paths):
            for j, t in enumerate(ensemble.times):
                rows.append([t, p, ensemble.r_tilde[p, j],
                             ensemble.r_comp[p, j]])
    else:
        header = ["time", "path_id", "r"]
        for p in range(ensemble.paths):
            for j, t in enumerate(ensemble.times):
                rows.append([t, p, ensemble.r[p, j]])
    return header, rows


def _load_config(spec: str) -> dict:
    if spec in BUNDLED:
        ref = resources.files("stickysim.scenarios").joinpath(f"{spec}.yaml")
        text = ref.read_text()
        return yaml.safe_load(text)
    if not os.path.exists(spec):
        raise ConfigError(f"config file or bundled scenario {spec!r} not found")
    with open(spec) as fh:
        if spec.endswith(".json"):
            payload = json.load(fh)
            if "resolved_config" in payload:  # manifest rerun
                return payload["resolved_config"]
            return payload
        return yaml.safe_load(fh)


def _require(cfg: dict, key: str, ctx: str):
    if key not in cfg:
        raise ConfigError(f"missing {key!r} in {ctx}")
    return cfg[key]


def _resolve_model(mcfg: dict):
    kind = _require(mcfg, "kind", "model")
    params = mcfg.get("params", {})
    try:
        return builtin_models(kind, params)
    except (ModelError, KeyError) as exc:
        raise ConfigError(f"bad model config: {exc}") from exc


def _sim_config(scfg: dict, seed: int) -> eng.SimConfig:
    try:
        return eng.SimConfig(
            step_h=float(_require(scfg, "step_h", "simulation")),
            horizon_T=float(_require(scfg, "horizon_T", "simulation")),
            delta=float(scfg.get("delta", 0.05)),
            reg_n=int(scfg.get("reg_n", 100)),
            paths=int(scfg.get("paths", 1)),
            seed=seed,
            dimension=int(scfg.get("dimension", 1)),
        )
    except eng.EngineError as exc:
        raise ConfigError(f"bad simulation config: {exc}") from exc


def run_scenario(config_spec: str, *, seed=None, threads: int = 1,
                 out_dir=None, analytics_only: bool = False) -> int:
    """Execute a scenario; returns the process exit code."""
    config = _load_config(config_spec)
    name = config.get("name", "scenario")
    if seed is not None:
        config["seed"] = int(seed)
    config.setdefault("seed", 0)

    root = out_dir or os.environ.get("STICKYSIM_OUT_ROOT", "out")
    outdir = os.path.join(root, name)
    os.makedirs(outdir, exist_ok=True)

    report = {"name": name, "seed": config["seed"], "checks": {}}
    bounds_rows = []
    estimate_rows = []
    curve_header, curve_rows = None, []

    kind = config.get("case", "generic")
    runner = {
        "ou_tv": _run_ou_case,
        "cbm": _run_cbm_case,
        "sticky_ergodic": _run_sticky_case,
        "meanfield": _run_mkv_case,
        "generic": _run_generic,
    }.get(kind)
    if runner is None:
        raise ConfigError(f"unknown case kind {kind!r}")
    failed_checks = runner(config, threads, analytics_only, bounds_rows,
                           estimate_rows, report)

    curve = report.pop("_curve", None)
    if curve is not None:
        curve_header, curve_rows = curve
    traj = report.pop("_trajectories", None)

    manifest = {
        "name": name,
        "resolved_config": config,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "backend": eng.BACKEND,
        "rng_algorithm": eng.RNG_ALGORITHM,
        "outputs": ["manifest.json", "bounds.csv", "estimates.csv",
                    "curves.csv", "report.json"],
        "analytics_only": analytics_only,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    _write_csv(os.path.join(outdir, "bounds.csv"),
               ["op", "args", "quantity", "value"], bounds_rows)
    _write_csv(os.path.join(outdir, "estimates.csv"),
               ["estimator", "args", "value", "std_error", "paths"],
               estimate_rows)
    if curve_header is not None:
        _write_csv(os.path.join(outdir, "curves.csv"), curve_header, curve_rows)
    if traj is not None:
        _write_csv(os.path.join(outdir, "trajectories.csv"), traj[0], traj[1])
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=float)
    print(f"[{name}] wrote {outdir}/ (backend: {eng.BACKEND})")
    for cname, ok in report["checks"].items():
        print(f"  check {cname}: {'PASS' if ok else 'FAIL'}")
    return 2 if failed_checks else 0


# ---------------------------------------------------------------------------
# case runners

def _run_ou_case(config, threads, analytics_only, bounds_rows, estimate_rows,
                 report):
    pair = _resolve_model(_require(config, "model", "config"))
    if pair.name != "ou":
        raise ConfigError("ou_tv case needs the ou model")
    kappa = pair.kappa
    times = [float(t) for t in config.get("times", [1.0, 2.0, 5.0, 10.0])]

    kit0 = bnd.modified_kit(kappa)
    pi = bnd.sticky_invariant_measure(pair.M, kappa)
    bounds_rows += [
        ["lyapunov_kit", "M=0", "c", kit0.c],
        ["lyapunov_kit", "M=0", "epsilon", kit0.epsilon],
        ["sticky_invariant_measure", f"M={pair.M}", "atom_mass", pi.atom_mass],
        ["sticky_invariant_measure", f"M={pair.M}", "tail_mass", pi.tail_mass],
    ]
    ubs = {}
    for t in times:
        ub = bnd.modified_upper_bound(kappa, pi, t, 0.0)
        ubs[t] = ub.value
        bounds_rows.append(["modified_upper_bound", f"t={t},r0=0", "value", ub.value])

    m_vec = 2.0 * pair.b_tilde.constant
    case = cs.OUCase(m=m_vec, x=np.zeros(pair.dimension),
                     y=np.zeros(pair.dimension))

    rows = []
    ok_all = True
    mc = {}
    if not analytics_only:
        scfg = _require(config, "simulation", "config")
        cfg = _sim_config(scfg, config["seed"])
        tol = float(scfg.get("tol", 10.0 * cfg.delta))
        ens = eng.simulate_delta_coupling(
            pair, kappa, np.zeros(pair.dimension), np.zeros(pair.dimension),
            cfg, record_times=times, threads=threads)
        for t in times:
            e = est.meet_probability(ens, t, tol)
            mc[t] = e
            estimate_rows.append(["meet_probability", f"t={t},tol={tol}",
                                  e.value, e.std_error, e.paths_used])
        comp = est.comparison_violations(ens)
        estimate_rows.append(["comparison_violations",
                              f"slack={ens.slack_specs[0]}",
                              comp.violation_count, 0.0, comp.paths])
        report["comparison"] = {"violations": comp.violation_count,
                                "grid_points": comp.grid_points}
        report["diverged_paths"] = int(ens.diverged.sum())
        if scfg.get("save_trajectories", False):
            report["_trajectories"] = _trajectory_rows(ens)
    for t in times:
        d_exact = cs.ou_exact_tv(case, t)
        row = [t, d_exact]
        if mc:
            e = mc[t]
            not_met = 1.0 - e.value
            row.append(not_met)
            lower_ok = d_exact <= not_met + 3.0 * e.std_error
            upper_ok = not_met <= ubs[t] + 3.0 * e.std_error
            ok_all = ok_all and lower_ok and upper_ok
        else:
            row.append(math.nan)
        row.append(ubs[t])
        rows.append(row)
    report["_curve"] = (["t", "exact_tv", "mc_meet_complement", "thm2_bound"], rows)
    if not analytics_only:
        report["checks"]["tv_sandwich"] = bool(ok_all)
        report["checks"]["comparison_zero_violations"] = \
            report["comparison"]["violations"] == 0
        return not (ok_all and report["checks"]["comparison_zero_violations"])
    return False


def _run_cbm_case(config, threads, analytics_only, bounds_rows, estimate_rows,
                  report):
    params = config.get("params", {})
    R = float(params.get("R", 1.0))
    k = float(params.get("k", 1.0))
    ms = [float(m) for m in params.get("m_values", [1e-3, 1e-2, 1e-1])]
    profile = LKRProfile(L=0.0, K=k / 6.0, R_script=3.0 * R)
    bounds_rows.append(["ctilde_inverse_bound", f"L=0,K={k/6},R={3*R}",
                        "value", bnd.ctilde_inverse_bound(profile)])
    rows = []
    ok = True
    summaries = []
    for m in ms:
        case = cs.ConfinedBMCase(R=R, k=k, m=m)
        s = cs.cbm_summary(case)
        summaries.append(s)
        bounds_rows.append(["alpha_closed_form", f"M={m/2}", "alpha",
                            s.closed_form_alpha])
        rows.append([m, s.tv8_value if s.tv8_value is not None else math.nan,
                     s.closed_form_tail, s.lower1,
                     s.lower2 if s.lower2 is not None else math.nan,
                     case.Z_f, case.Z_g])
        ok = ok and s.upper_dominates and case.Z_g >= case.Z_f
    # small-m slope of the improved lower bound vs its limit value
    m0 = min(ms)
    s0 = [s for s in summaries if s.case.m == m0][0]
    lim = 0.25 * (R + math.sqrt(2.0 / math.pi) / math.sqrt(k))
    ratio = ((s0.lower2 if s0.lower2 is not None else s0.lower1) / m0) / lim
    report["liminf_ratio"] = ratio
    ok = ok and abs(ratio - 1.0) <= 0.01
    report["_curve"] = (["m", "tv8_upper", "closed_form_tail", "lower1", "lower2",
                         "Z_f", "Z_g"], rows)
    report["checks"]["upper_dominates_lower"] = all(
        s.upper_dominates for s in summaries)
    report["checks"]["liminf_ratio_within_1pct"] = abs(ratio - 1.0) <= 0.01
    return not ok


def _run_sticky_case(config, threads, analytics_only, bounds_rows,
                     estimate_rows, report):
    params = config.get("params", {})
    M = float(params.get("M", 1.0))
    kappa = KappaSpec.constant(float(params.get("kappa", -0.5)))
    pi = bnd.sticky_invariant_measure(M, kappa)
    bounds_rows += [
        ["sticky_invariant_measure", f"M={M}", "atom_mass", pi.atom_mass],
        ["sticky_invariant_measure", f"M={M}", "Z", pi.Z],
    ]
    if analytics_only:
        return False
    scfg = _require(config, "simulation", "config")
    cfg = _sim_config(scfg, config["seed"])
    burn_in = float(scfg.get("burn_in", cfg.horizon_T / 10.0))
    bins = int(scfg.get("bins", 24))
    ens = eng.simulate_sticky_1d((M, kappa), cfg, r0=float(scfg.get("r0", 0.0)),
                                 full_record=True, threads=threads)
    occ = est.ergodic_occupation(ens, burn_in, bins, pi.truncation_radius)
    estimate_rows.append(["ergodic_occupation", f"burn_in={burn_in}",
                          occ.atom_estimate, 0.0, 1])
    if scfg.get("save_trajectories", False):
        report["_trajectories"] = _trajectory_rows(ens)
    sticky = est.stickiness_identity_check(ens, M)
    for band, rep in sorted(sticky.items()):
        estimate_rows.append(["stickiness_ratio", f"band={band}",
                              rep.aggregate_ratio, rep.std_error, ens.paths])
    centers = 0.5 * (occ.bin_edges[:-1] + occ.bin_edges[1:])
    rows = [[c, d, float(pi.density(c))]
            for c, d in zip(centers, occ.bin_density)]
    report["_curve"] = (["r", "empirical_density", "pi_density"], rows)
    report["atom"] = {"estimate": occ.atom_estimate, "quadrature": pi.atom_mass}
    atom_ok = abs(occ.atom_estimate - pi.atom_mass) <= 0.03
    band1 = 1.0 / cfg.reg_n
    ratio_ok = 0.9 <= sticky[band1].aggregate_ratio <= 1.1
    report["checks"]["atom_within_0.03"] = bool(atom_ok)
    report["checks"]["stickiness_ratio_window"] = bool(ratio_ok)
    return not (atom_ok and ratio_ok)


def _run_mkv_case(config, threads, analytics_only, bounds_rows, estimate_rows,
                  report):
    params = config.get("params", {})
    kappa = KappaSpec.constant(float(params.get("kappa", -0.5)))
    d = int(params.get("dimension", 1))
    eta = DriftSpec(dim=d, linear=-0.5 * np.eye(d))
    case = cs.MKVCase(
        eta=eta, interaction=np.eye(d) * float(params.get("g", 1.0)),
        tau=float(params.get("tau", 0.05)), L_theta=float(params.get("L_theta", 1.0)),
        A=float(params.get("A", 1.0)), lam=float(params.get("lam", 0.25)),
        x0=params.get("x0", [1.0]), y0=params.get("y0", [-1.0]),
        N=int(params.get("N", 300)), kappa=kappa)
    bc = bnd.mkv_bound_curve(L_theta=case.L_theta, A=case.A, lam=case.lam,
                             tau=case.tau, r0=case.r0, kappa=kappa,
                             t_grid=config.get("times", np.linspace(0.0, 20.0, 21)))
    bounds_rows.append(["mkv_bound_curve", f"tau={case.tau}", "fitted_rate",
                        bc.fitted_rate])
    if analytics_only:
        return False
    scfg = _require(config, "simulation", "config")
    cfg = _sim_config(scfg, config["seed"])
    sim = cs.mkv_simulate(case, cfg,
                          record_times=config.get("times"), )
    rows = [[t, w, v] for t, w, v in
            zip(sim.times, sim.w1_curve, sim.bound_curve.values)]
    report["_curve"] = (["t", "w1_empirical", "tv_bound"], rows)
    estimate_rows.append(["mkv_fitted_rate", f"tau={case.tau}",
                          sim.fitted_rate, 0.0, case.N])
    decay_ok = sim.fitted_rate > 0.0
    bound_ok = (np.all(np.isfinite(sim.bound_curve.values))
                and np.all(sim.bound_curve.values > 0.0)
                and sim.bound_curve.fitted_rate > 0.0)
    report["mkv"] = {"fitted_rate": sim.fitted_rate,
                     "bound_fitted_rate": sim.bound_curve.fitted_rate,
                     "small_tau": sim.small_tau}
    report["checks"]["w1_decays"] = bool(decay_ok)
    report["checks"]["bound_curve_decays"] = bool(bound_ok)
    return not (decay_ok and bound_ok)


def _run_generic(config, threads, analytics_only, bounds_rows, estimate_rows,
                 report):
    """Plain bound computations for a declared model (no simulation)."""
    pair = _resolve_model(_require(config, "model", "config"))
    kappa = pair.kappa
    if kappa is None:
        raise ConfigError("generic case needs a model with a kappa profile")
    kit = bnd.lyapunov_kit((pair.M, kappa))
    pi = bnd.sticky_invariant_measure(pair.M, kappa)
    bounds_rows += [
        ["effective_radii", f"M={pair.M}", "R0", kit.R0],
        ["effective_radii", f"M={pair.M}", "R1", kit.R1],
        ["lyapunov_kit", f"M={pair.M}", "c", kit.c],
        ["lyapunov_kit", f"M={pair.M}", "epsilon", kit.epsilon],
        ["sticky_invariant_measure", f"M={pair.M}", "atom_mass", pi.atom_mass],
    ]
    for t in config.get("times", [1.0, 10.0]):
        ub = bnd.coupling_upper_bound(kit, pi, float(t), float(config.get("r0", 0.0)))
        bounds_rows.append(["coupling_upper_bound", f"t={t}", "value", ub.value])
    return False


# ---------------------------------------------------------------------------

def list_builtins() -> str:
    lines = [f"{name:16s} {desc}" for name, desc in BUNDLED.items()]
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stickysim",
        description="sticky couplings: bounds, simulations, reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario (bounds + simulation)")
    p_run.add_argument("config", help="bundled scenario name, YAML path, or "
                                      "manifest.json for a bitwise rerun")
    p_bounds = sub.add_parser("bounds", help="analytics only, no simulation")
    p_bounds.add_argument("config")
    for p in (p_run, p_bounds):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out-dir", default=None)
    sub.add_parser("list", help="list bundled scenarios")

    args = parser.parse_args(argv)
    if args.command == "list":
        print(list_builtins())
        return 0
    try:
        return run_scenario(args.config, seed=args.seed, threads=args.threads,
                            out_dir=args.out_dir,
                            analytics_only=args.command == "bounds")
    except (ConfigError, eng.EngineError, ModelError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
