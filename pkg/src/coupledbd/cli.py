"""Command line front end.

Subcommands: check, invariant, evolve, simulate, ergodicity, averaging.
Each reads a JSON configuration, runs, writes artifacts into the output
directory (CSV data, JSON summaries and a run manifest with the config
hash) and prints a short report.

Exit codes: 0 success, 2 configuration or model errors, 3 no feasible
contraction regime, 4 runtime failures (divergence, instability, explosion
guard, numeric contradiction).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .conditions import (
    SpotCheckSettings,
    check_regime,
    env_constants,
    scan_feasible,
    spectral_gap,
)
from .config import (
    config_hash,
    load_config,
    model_from_config,
    torus_from_config,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    EvaluationError,
    ExplosionGuardError,
    InfeasibleRegimeError,
    ModelError,
    SizeLimitError,
    StabilityError,
)
from .experiments import averaging_experiment, ergodicity_experiment
from .geometry import MarkedConfiguration
from .hierarchy import (
    component_form,
    evolve_hierarchy,
    invariant_summary,
    ks_solve,
    lenard_spot_check,
)
from .models import build_averaged_model, validate_model_on_torus
from .simulate import (
    SimulationSettings,
    estimate_density,
    poisson_configuration,
    replicate,
)
from .tables import CorrelationTable, GridSpec

_CONFIG_EXIT = 2
_INFEASIBLE_EXIT = 3
_RUNTIME_EXIT = 4


def _write_csv(path: str, header: List[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _write_json(path: str, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _manifest(out_dir: str, command: str, cfg: dict, outputs: List[str],
              summary: dict) -> None:
    man = {
        "command": command,
        "config_hash": config_hash(cfg),
        "package_version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(outputs),
        "summary": summary,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), man)


def _solve_component(cfg: dict, m, torus, section: dict):
    """KS fixed point for the requested component; 'averaged' first solves
    the environment and integrates it out."""
    grid = GridSpec(torus=torus, points_per_axis=int(section.get("grid_points", 64)))
    order = int(section.get("order", 3))
    tol = float(section.get("tol", 1e-12))
    max_iter = int(section.get("max_iter", 500))
    closure = section.get("closure", "poisson")
    component = section.get("component", "environment")
    if component == "environment":
        form = component_form(m, "environment")
        return ks_solve(form, grid, order, tol, max_iter, closure), grid, form
    env_form = component_form(m, "environment")
    env_sol = ks_solve(env_form, grid, order, tol, max_iter, closure)
    am = build_averaged_model(m, env_sol.table, torus)
    form = component_form(am, "system")
    return ks_solve(form, grid, order, tol, max_iter, closure), grid, form


def _cmd_check(cfg: dict, m, torus, out_dir: str, seed: Optional[int]) -> int:
    section = cfg.get("check", {})
    rho_inv = section.get("rho_inv")
    outputs = []
    scanned = None
    if section.get("scan") or "c_minus" not in section or "c_plus" not in section:
        scanned = scan_feasible(m, torus.dim, rho_inv=rho_inv)
        path = os.path.join(out_dir, "scan.csv")
        _write_csv(path, ["c_minus", "c_plus", "a_env", "a_sys", "a_avg",
                          "lambda0", "feasible"],
                   [[r["c_minus"], r["c_plus"], r["a_env"], r["a_sys"],
                     r["a_avg"], r["lambda0"], int(r["feasible"])]
                    for r in scanned.rows])
        outputs.append("scan.csv")
        if scanned.best is None:
            _manifest(out_dir, "check", cfg, outputs,
                      {"feasible": False, "scanned": scanned.evaluated})
            print(f"scanned {scanned.evaluated} weight pairs: none feasible")
            return _INFEASIBLE_EXIT
        c_minus = scanned.best["c_minus"]
        c_plus = scanned.best["c_plus"]
        print(f"scan: best weights c_minus={c_minus:.6g} c_plus={c_plus:.6g} "
              f"({scanned.feasible_count}/{scanned.evaluated} feasible)")
    else:
        c_minus = float(section["c_minus"])
        c_plus = float(section["c_plus"])

    spot = None
    if "spot_check" in section:
        kw = dict(section["spot_check"])
        if seed is not None:
            kw["seed"] = seed
        spot = SpotCheckSettings(**kw)
    report = check_regime(m, c_minus, c_plus, torus=torus, rho_inv=rho_inv,
                          spot=spot)
    _write_json(os.path.join(out_dir, "report.json"), report.as_dict())
    outputs.append("report.json")
    summary = {"feasible": report.feasible,
               "a_env": report.environment.a,
               "a_sys": report.system.a,
               "a_avg": report.averaged.a,
               "gap_env": report.gap_env}
    _manifest(out_dir, "check", cfg, outputs, summary)
    for line in report.summary_lines():
        print(line)
    if report.spot is not None and not report.spot.ok:
        print("numeric spot check contradicts the closed-form bounds",
              file=sys.stderr)
        return _RUNTIME_EXIT
    if not report.feasible:
        return _INFEASIBLE_EXIT
    return 0


def _cmd_invariant(cfg: dict, m, torus, out_dir: str, seed: Optional[int]) -> int:
    section = cfg.get("invariant", {})
    sol, grid, _form = _solve_component(cfg, m, torus, section)
    summ = invariant_summary(sol.table)
    lenard = lenard_spot_check(sol.table)
    rows = list(zip(summ.pair_r, summ.pair_g))
    _write_csv(os.path.join(out_dir, "correlations.csv"),
               ["r", "pair_correlation"], rows)
    out = {
        "density": summ.density,
        "iterations": sol.iterations,
        "final_residual": sol.residuals[-1] if sol.residuals else 0.0,
        "converged": sol.converged,
        "sup_by_order": list(summ.sup_by_order),
        "positivity_ok": lenard.ok,
        "min_entry": lenard.min_entry,
        "symmetry_defect": lenard.symmetry_defect,
        "min_pairing": lenard.min_pairing,
    }
    _write_json(os.path.join(out_dir, "summary.json"), out)
    _manifest(out_dir, "invariant", cfg, ["correlations.csv", "summary.json"],
              {"density": summ.density, "iterations": sol.iterations})
    print(f"invariant density: {summ.density:.8g} "
          f"({sol.iterations} iterations, residual {out['final_residual']:.3e})")
    print(f"positivity check: {'ok' if lenard.ok else 'FAILED'}")
    return 0


def _cmd_evolve(cfg: dict, m, torus, out_dir: str, seed: Optional[int]) -> int:
    section = cfg.get("evolve", {})
    grid = GridSpec(torus=torus, points_per_axis=int(section.get("grid_points", 64)))
    order = int(section.get("order", 3))
    closure = section.get("closure", "poisson")
    component = section.get("component", "environment")
    if component == "environment":
        form = component_form(m, "environment")
    else:
        env_sol, grid, _ = _solve_component(cfg, m, torus,
                                            {**section, "component": "environment"})
        am = build_averaged_model(m, env_sol.table, torus)
        form = component_form(am, "system")
    rho0 = float(section.get("initial_density", 1.0))
    initial = CorrelationTable.poisson(grid, order, rho0)
    traj = evolve_hierarchy(initial, form, float(section["t_final"]),
                            dt=float(section.get("dt", 0.01)),
                            record_every=int(section.get("record_every", 10)),
                            closure=closure)
    _write_csv(os.path.join(out_dir, "trajectory.csv"), ["t", "density"],
               list(zip(traj.times, traj.density)))
    final = traj.final()
    _write_json(os.path.join(out_dir, "summary.json"), {
        "t_final": float(traj.times[-1]),
        "final_density": final.k1,
        "initial_density": rho0,
        "records": len(traj.times),
    })
    _manifest(out_dir, "evolve", cfg, ["trajectory.csv", "summary.json"],
              {"final_density": final.k1})
    print(f"evolved to t={traj.times[-1]:.6g}: density {final.k1:.8g}")
    return 0


def _cmd_simulate(cfg: dict, m, torus, out_dir: str, seed: Optional[int]) -> int:
    section = cfg.get("simulate", {})
    t_end = float(section["t_end"])
    n_times = int(section.get("n_times", 21))
    times = tuple(np.linspace(0.0, t_end, n_times))
    components = tuple(section.get("components", ["system", "environment"]))
    master_seed = int(section.get("seed", 12345)) if seed is None else seed
    settings = SimulationSettings(
        t_end=t_end,
        epsilon=float(section.get("epsilon", 1.0)),
        master_seed=master_seed,
        record_times=times,
        max_events=int(section.get("max_events", 10_000_000)),
    )
    sys_rho = float(section.get("sys_density", 1.0))
    env_rho = float(section.get("env_density", 1.0))

    def factory(rng):
        return MarkedConfiguration(
            plus=poisson_configuration(rng, torus, sys_rho if "system" in components else 0.0),
            minus=poisson_configuration(rng, torus, env_rho if "environment" in components else 0.0),
        )

    records = replicate(m, torus, factory, settings,
                        int(section.get("n_replicas", 10)), components)
    est = estimate_density(records, torus)
    _write_csv(os.path.join(out_dir, "densities.csv"),
               ["t", "mean_plus", "se_plus", "mean_minus", "se_minus"],
               list(zip(est.times, est.mean_plus, est.se_plus,
                        est.mean_minus, est.se_minus)))
    events = {"total_events": int(sum(r.events for r in records)),
              "virtual_events": int(sum(r.virtual_events for r in records)),
              "n_replicas": est.n_replicas}
    _write_json(os.path.join(out_dir, "events.json"), events)
    _manifest(out_dir, "simulate", cfg, ["densities.csv", "events.json"], {
        "final_mean_plus": float(est.mean_plus[-1]),
        "final_mean_minus": float(est.mean_minus[-1]),
        **events,
    })
    print(f"simulated {est.n_replicas} replicas to t={t_end:.6g} "
          f"({events['total_events']} events, {events['virtual_events']} virtual)")
    print(f"final densities: system {est.mean_plus[-1]:.6g} "
          f"+- {est.se_plus[-1]:.2g}, environment {est.mean_minus[-1]:.6g} "
          f"+- {est.se_minus[-1]:.2g}")
    return 0


def _cmd_ergodicity(cfg: dict, m, torus, out_dir: str, seed: Optional[int]) -> int:
    section = cfg["ergodicity"] if "ergodicity" in cfg else {}
    if not section:
        raise ConfigError("ergodicity section is required for this command")
    target = section.get("target_density")
    if target is None:
        grid = GridSpec(torus=torus,
                        points_per_axis=int(section.get("grid_points", 64)))
        sol = ks_solve(component_form(m, "environment"), grid)
        target = invariant_summary(sol.table).density
    lambda_0 = None
    if "c_minus" in section:
        env = env_constants(m, float(section["c_minus"]), torus.dim)
        lambda_0 = spectral_gap(env.a, env.m_star)
    result = ergodicity_experiment(
        m, torus,
        n_replicas=int(section["n_replicas"]),
        t_end=float(section["t_end"]),
        initial_density=float(section["initial_density"]),
        target_density=float(target),
        n_times=int(section.get("n_times", 21)),
        master_seed=int(section.get("seed", 2024)) if seed is None else seed,
        lambda_0=lambda_0,
    )
    _write_csv(os.path.join(out_dir, "gaps.csv"), ["t", "gap", "se"],
               list(zip(result.times, result.gaps, result.density.se_minus)))
    fit = {
        "rate": result.fit.rate,
        "rate_stderr": result.fit.stderr,
        "n_used": result.fit.n_used,
        "noise_floor": result.noise_floor,
        "target_density": result.target_density,
        "lambda_0": lambda_0,
        "rate_consistent_with_gap": result.rate_consistent_with_gap,
    }
    _write_json(os.path.join(out_dir, "fit.json"), fit)
    _manifest(out_dir, "ergodicity", cfg, ["gaps.csv", "fit.json"],
              {"rate": result.fit.rate, "lambda_0": lambda_0})
    print(f"fitted relaxation rate: {result.fit.rate:.4f} "
          f"+- {result.fit.stderr:.4f} ({result.fit.n_used} points)")
    if lambda_0 is not None:
        verdict = "consistent" if result.rate_consistent_with_gap else "INCONSISTENT"
        print(f"proven lower bound {lambda_0:.4f}: {verdict}")
    return 0


def _cmd_averaging(cfg: dict, m, torus, out_dir: str, seed: Optional[int]) -> int:
    section = cfg["averaging"] if "averaging" in cfg else {}
    if not section:
        raise ConfigError("averaging section is required for this command")
    result = averaging_experiment(
        m, torus,
        epsilons=tuple(section.get("epsilons", (1.0, 0.5, 0.2, 0.1))),
        n_replicas=int(section["n_replicas"]),
        t_end=float(section["t_end"]),
        sys_density0=float(section["sys_density"]),
        env_density0=section.get("env_density"),
        n_times=int(section.get("n_times", 21)),
        master_seed=int(section.get("seed", 77)) if seed is None else seed,
        grid_points=int(section.get("grid_points", 64)),
    )
    _write_csv(os.path.join(out_dir, "distances.csv"),
               ["epsilon", "distance", "se", "argmax_time"],
               list(zip(result.epsilons, result.distances, result.distance_ses,
                        result.argmax_times)))
    header = ["t", "averaged_mean", "averaged_se"]
    cols = [result.times, result.averaged.mean_plus, result.averaged.se_plus]
    for e in result.epsilons:
        est = result.coupled[float(e)]
        header += [f"eps{e:g}_mean", f"eps{e:g}_se"]
        cols += [est.mean_plus, est.se_plus]
    _write_csv(os.path.join(out_dir, "densities.csv"), header,
               list(zip(*cols)))
    out = {
        "epsilons": [float(e) for e in result.epsilons],
        "distances": [float(d) for d in result.distances],
        "distance_ses": [float(s) for s in result.distance_ses],
        "monotone_ok": result.monotone_ok,
        "smallest_within_se": result.smallest_within_se,
        "lambda_bar": result.lambda_bar,
        "env_density": result.env_density,
    }
    _write_json(os.path.join(out_dir, "result.json"), out)
    _manifest(out_dir, "averaging", cfg,
              ["distances.csv", "densities.csv", "result.json"],
              {"distances": out["distances"], "monotone_ok": result.monotone_ok})
    for e, d, s in zip(result.epsilons, result.distances, result.distance_ses):
        print(f"epsilon={e:g}: sup density gap {d:.6g} +- {s:.2g}")
    print(f"gap decreasing with epsilon: {'yes' if result.monotone_ok else 'NO'}")
    print(f"smallest epsilon within noise: "
          f"{'yes' if result.smallest_within_se else 'NO'}")
    return 0


_COMMANDS = {
    "check": _cmd_check,
    "invariant": _cmd_invariant,
    "evolve": _cmd_evolve,
    "simulate": _cmd_simulate,
    "ergodicity": _cmd_ergodicity,
    "averaging": _cmd_averaging,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coupledbd",
        description="Coupled spatial birth-death processes: regime checks, "
                    "correlation hierarchies, exact simulation.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "check": "contraction-regime report and weight scan",
        "invariant": "invariant correlation functions by fixed point",
        "evolve": "integrate the truncated correlation hierarchy",
        "simulate": "exact stochastic simulation ensemble",
        "ergodicity": "fit the environment relaxation rate",
        "averaging": "coupled versus averaged dynamics over epsilon",
    }
    for name, h in helps.items():
        q = sub.add_parser(name, help=h)
        q.add_argument("config", help="JSON configuration file")
        q.add_argument("--out", default=None, help="artifact directory")
        q.add_argument("--seed", type=int, default=None,
                       help="override the configured seed")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        m = model_from_config(cfg)
        torus = torus_from_config(cfg)
        validate_model_on_torus(m, torus)
        out_dir = args.out or f"runs/{args.command}_{config_hash(cfg)}"
        os.makedirs(out_dir, exist_ok=True)
        return _COMMANDS[args.command](cfg, m, torus, out_dir, args.seed)
    except (ConfigError, ModelError, SizeLimitError, ValueError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return _CONFIG_EXIT
    except InfeasibleRegimeError as e:
        print(f"infeasible regime: {e}", file=sys.stderr)
        return _INFEASIBLE_EXIT
    except (ConvergenceError, StabilityError, ExplosionGuardError,
            EvaluationError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return _RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
