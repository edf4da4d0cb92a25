"""Command-line driver: single runs, sweeps and the acceptance check.

Every computing command evaluates the configured output groups at each point
of the sweep grid and writes one CSV row per point. With ``--out`` a JSON
manifest (configuration echo, overrides, seed, version, columns) is written
next to the CSV.
"""

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from dataclasses import replace
from importlib import metadata

import numpy as np

from . import cell_analytics as cell
from . import fog_analytics as fog
from . import kernels
from .config import SWEEPABLE, emit_config, load_config, parse_sweep_values
from .errors import ConfigError, NumericalError, ParameterError, SingularityError
from .montecarlo import TrialConfig, simulate

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4
SCHEMA_VERSION = 1

COMMAND_OUTPUTS = {
    "fog-analytic": ("fog_analytic",),
    "cell-analytic": ("cell_analytic",),
    "fog-sim": ("fog_sim",),
    "cell-sim": ("cell_sim",),
}

BASE_COLUMNS = ("point", "lambda_a", "lambda_u", "load_ratio", "q_count", "r_in", "epsilon",
                "eta", "m_antennas", "l_pilots", "n_p", "seed", "trials", "overhead_T")

GROUP_COLUMNS = {
    "copilot": ("lambda", "lambda_tilde_closed", "lambda_tilde_semianalytic",
                "lambda_tilde_sim", "lambda_tilde_sim_ci", "r_in_maximizer"),
    "fog_analytic": ("fog_theta_source", "fog_lambda_tilde", "fog_active_rrh_density",
                     "fog_expected_served", "fog_avg_rrh_power", "fog_user_se",
                     "fog_per_pilot_area_se", "fog_area_se", "fog_outage_void",
                     "fog_outage_not_allowed"),
    "fog_sim": ("fog_sim_user_se", "fog_sim_user_se_ci", "fog_sim_user_se_all",
                "fog_sim_per_pilot_area_se", "fog_sim_per_pilot_area_se_ci",
                "fog_sim_area_se", "fog_sim_area_se_ci", "fog_sim_outage_not_allowed",
                "fog_sim_outage_not_allowed_ci", "fog_sim_outage_void",
                "fog_sim_lambda_tilde", "fog_sim_lambda_tilde_ci", "fog_sim_mean_load",
                "fog_sim_errors", "fog_sim_false_trust"),
    "cell_analytic": ("cell_p_a", "cell_expected_served", "cell_user_se", "cell_area_se"),
    "cell_sim": ("cell_sim_user_se", "cell_sim_user_se_ci", "cell_sim_area_se",
                 "cell_sim_area_se_ci", "cell_sim_outage", "cell_sim_errors"),
}

FOG_SE_COLUMNS = ("fog_user_se", "fog_per_pilot_area_se", "fog_area_se", "fog_sim_user_se",
                  "fog_sim_user_se_ci", "fog_sim_user_se_all", "fog_sim_per_pilot_area_se",
                  "fog_sim_per_pilot_area_se_ci", "fog_sim_area_se", "fog_sim_area_se_ci")
CELL_SE_COLUMNS = ("cell_user_se", "cell_area_se", "cell_sim_user_se", "cell_sim_user_se_ci",
                   "cell_sim_area_se", "cell_sim_area_se_ci")


def report_overhead(se_value, L, T):
    """Scale a spectral efficiency by the pilot overhead factor ``1 - L / T``."""
    if T is None:
        return se_value
    if not 0 < L < T:
        raise ParameterError(f"need 0 < L < T, got L={L}, T={T}")
    return se_value * (1.0 - L / T)


def version():
    try:
        return metadata.version("fogmimo")
    except metadata.PackageNotFoundError:
        return "unknown"


# --- evaluation of one grid point --------------------------------------------------

def _fog_params(cfg):
    return fog.FogParams(cfg.lambda_a, cfg.user_density, cfg.q_count, cfg.disks, cfg.eta,
                         cfg.n_max)


def _cell_params(cfg):
    return cell.CellParams(cfg.lambda_a, cfg.user_density, cfg.l_pilots, cfg.n_p, cfg.eta,
                           cfg.c_shape)


def _trial_config(cfg, system):
    return TrialConfig(
        system=system, lambda_a=cfg.lambda_a, lambda_u=cfg.user_density, eta=cfg.eta,
        q_count=cfg.q_count, qprime=cfg.qprime,
        disks=cfg.disks if system == "fog" else None,
        l_pilots=cfg.l_pilots, n_p=cfg.n_p, m_antennas=cfg.m_antennas,
        trust_mode=cfg.trust_mode, noise=cfg.noise, fading_draws=cfg.fading_draws,
        trials=cfg.trials, seed=cfg.seed, window=cfg.window(), se_cap=cfg.se_cap,
        min_distance=cfg.min_distance, workers=cfg.workers)


def _eval_copilot(cfg, row):
    p = _fog_params(cfg)
    row["lambda"] = p.lam
    row["lambda_tilde_closed"] = fog.copilot_density(p, "closed_form")
    row["lambda_tilde_semianalytic"] = fog.copilot_density(p, "semi_analytic",
                                                           cfg.theta_trials, cfg.seed)
    rep = simulate(_trial_config(cfg, "fog"))
    row["lambda_tilde_sim"] = rep.lambda_tilde
    row["lambda_tilde_sim_ci"] = rep.ci_lambda_tilde
    row["r_in_maximizer"] = fog.copilot_density_maximizer(p)
    return rep.errors


def _eval_fog_analytic(cfg, row):
    p = _fog_params(cfg)
    source = fog.resolve_theta_source(p, cfg.theta_source)
    kw = dict(theta_trials=cfg.theta_trials, seed=cfg.seed)
    row["fog_theta_source"] = source
    row["fog_lambda_tilde"] = fog.copilot_density(p, source, **kw)
    row["fog_active_rrh_density"] = fog.active_rrh_density(p)
    row["fog_expected_served"] = fog.expected_served(p)
    row["fog_avg_rrh_power"] = fog.avg_rrh_power(p, cfg.ps_fog)
    row["fog_user_se"] = fog.avg_user_se_fog(p, source, cap=cfg.se_cap, **kw)
    per_pilot, total = fog.area_se_fog(p, source, cap=cfg.se_cap, **kw)
    row["fog_per_pilot_area_se"] = per_pilot
    row["fog_area_se"] = total
    row["fog_outage_void"] = fog.outage_probability(p, "void_disk")
    row["fog_outage_not_allowed"] = fog.outage_probability(p, "not_allowed", source, **kw)
    return 0


def _eval_fog_sim(cfg, row):
    r = simulate(_trial_config(cfg, "fog"))
    row.update({
        "fog_sim_user_se": r.mean_se_served, "fog_sim_user_se_ci": r.ci_se_served,
        "fog_sim_user_se_all": r.mean_se_all,
        "fog_sim_per_pilot_area_se": r.per_pilot_area_se,
        "fog_sim_per_pilot_area_se_ci": r.ci_per_pilot_area_se,
        "fog_sim_area_se": r.area_se, "fog_sim_area_se_ci": r.ci_area_se,
        "fog_sim_outage_not_allowed": r.outage_not_allowed,
        "fog_sim_outage_not_allowed_ci": r.ci_outage_not_allowed,
        "fog_sim_outage_void": r.outage_void,
        "fog_sim_lambda_tilde": r.lambda_tilde, "fog_sim_lambda_tilde_ci": r.ci_lambda_tilde,
        "fog_sim_mean_load": r.mean_load, "fog_sim_errors": r.errors,
        "fog_sim_false_trust": r.false_trust,
    })
    return r.errors


def _eval_cell_analytic(cfg, row):
    p = _cell_params(cfg)
    row["cell_p_a"] = cell.pilot_activity_prob(p)
    row["cell_expected_served"] = cell.expected_served_users(p)
    if p.lambda_u > 0:
        row["cell_user_se"] = cell.avg_user_se_cellular(p)
        row["cell_area_se"] = cell.area_se_cellular(p)
    else:
        row["cell_user_se"] = math.nan
        row["cell_area_se"] = 0.0
    return 0


def _eval_cell_sim(cfg, row):
    r = simulate(_trial_config(cfg, "cellular"))
    row.update({
        "cell_sim_user_se": r.mean_se_served, "cell_sim_user_se_ci": r.ci_se_served,
        "cell_sim_area_se": r.area_se, "cell_sim_area_se_ci": r.ci_area_se,
        "cell_sim_outage": r.outage_not_allowed, "cell_sim_errors": r.errors,
    })
    return r.errors


EVALUATORS = {
    "copilot": _eval_copilot,
    "fog_analytic": _eval_fog_analytic,
    "fog_sim": _eval_fog_sim,
    "cell_analytic": _eval_cell_analytic,
    "cell_sim": _eval_cell_sim,
}


def columns_for(groups, axes=()):
    cols = list(BASE_COLUMNS)
    cols += [a for a in axes if a not in cols]
    for g in groups:
        cols += [c for c in GROUP_COLUMNS[g] if c not in cols]
    return cols


def grid(cfg):
    """Configurations at every sweep point, in cartesian-product order."""
    if not cfg.sweep:
        yield cfg
        return
    axes = [a for a, _ in cfg.sweep]
    for combo in itertools.product(*(v for _, v in cfg.sweep)):
        point = cfg
        for axis, value in zip(axes, combo):
            point = point.set(axis, value)
        yield point


def evaluate_point(cfg, groups, index, overhead=None):
    row = {
        "point": index, "lambda_a": cfg.lambda_a, "lambda_u": cfg.user_density,
        "load_ratio": cfg.ratio, "q_count": cfg.q_count, "r_in": cfg.r_in,
        "epsilon": cfg.epsilon, "eta": cfg.eta, "m_antennas": cfg.m_antennas,
        "l_pilots": cfg.l_pilots, "n_p": cfg.n_p, "seed": cfg.seed, "trials": cfg.trials,
    }
    for axis, _ in cfg.sweep:
        row[axis] = getattr(cfg, axis)
    errors = 0
    for g in groups:
        errors += EVALUATORS[g](cfg, row)
    row["overhead_T"] = overhead
    if overhead:
        for cols, L in ((FOG_SE_COLUMNS, cfg.q_count + cfg.qprime),
                        (CELL_SE_COLUMNS, cfg.l_pilots)):
            for c in cols:
                if c in row:
                    row[c] = report_overhead(row[c], L, overhead)
    return row, errors


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def run_rows(cfg, groups, overhead=None, sink=None):
    """Evaluate all grid points; rows go to ``sink`` (a csv.DictWriter) as produced."""
    errors = 0
    rows = []
    for i, point in enumerate(grid(cfg)):
        row, err = evaluate_point(point, groups, i, overhead)
        errors += err
        rows.append(row)
        if sink is not None:
            sink.writerow({k: _fmt(v) for k, v in row.items()})
    return rows, errors


# --- argument handling -------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="fogmimo",
                                     description="Fog and cellular massive MIMO evaluator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fog-analytic", "cell-analytic", "fog-sim", "cell-sim", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", help="CSV output path (default: stdout, no manifest)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2,...")
        p.add_argument("--overhead", type=float, metavar="T",
                       help="scale spectral efficiencies by 1 - L/T")
    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--out", help="write the pass/fail table as CSV")
    return parser


def _split_pair(text, flag):
    if "=" not in text:
        raise ConfigError(f"{flag} expects KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def prepare(args):
    """Configuration with command-line overrides and sweep axes applied."""
    cfg = load_config(args.config)
    overrides = []
    for item in args.set:
        key, value = _split_pair(item, "--set")
        cfg = cfg.set(key, value)
        overrides.append(f"{key}={value}")
    if args.trials is not None:
        cfg = cfg.set("trials", args.trials)
    if args.seed is not None:
        cfg = cfg.set("seed", args.seed)
    sweep = list(cfg.sweep)
    for item in args.sweep:
        key, value = _split_pair(item, "--sweep")
        if key not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {key!r}")
        try:
            values = parse_sweep_values(key, value)
        except ValueError as exc:
            raise ConfigError(f"--sweep {key}: {exc}") from None
        sweep = [(a, v) for a, v in sweep if a != key] + [(key, values)]
    cfg = replace(cfg, sweep=tuple(sweep))
    return cfg, overrides


def _groups(command, cfg):
    if command == "sweep":
        if not cfg.outputs:
            raise ConfigError("sweep needs an 'outputs' key naming the output groups")
        return cfg.outputs
    return COMMAND_OUTPUTS[command]


def _manifest_path(out):
    stem = out[:-4] if out.endswith(".csv") else out
    return stem + ".manifest.json"


def run_compute(args):
    cfg, overrides = prepare(args)
    groups = _groups(args.command, cfg)
    cols = columns_for(groups, [a for a, _ in cfg.sweep])
    if args.overhead is not None and not args.overhead > 0:
        raise ConfigError("--overhead must be positive")
    handle = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(handle, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        _, errors = run_rows(cfg, groups, args.overhead, writer)
    finally:
        if args.out:
            handle.close()
    if args.out:
        manifest = {
            "schema": SCHEMA_VERSION, "command": args.command, "version": version(),
            "kernel_backend": kernels.BACKEND, "seed": cfg.seed, "overrides": overrides,
            "overhead_T": args.overhead, "outputs": list(groups), "columns": cols,
            "config": emit_config(cfg),
        }
        with open(_manifest_path(args.out), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if errors:
        log.error("%d trial evaluations failed", errors)
        return EXIT_NUMERIC
    return EXIT_OK


def run_validate(args):
    from .acceptance import CRITERIA, run_criteria
    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError:
            raise ConfigError("--only expects comma-separated integers") from None
        unknown = [n for n in only if n not in CRITERIA]
        if unknown:
            raise ConfigError(f"unknown criterion {unknown[0]}")
    results = run_criteria(only, echo=sys.stdout)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["criterion", "name", "passed", "seconds", "detail"])
            for r in results:
                w.writerow([r.number, r.name, int(r.passed), f"{r.seconds:.1f}", r.detail])
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return run_validate(args)
        return run_compute(args)
    except (ConfigError, ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SingularityError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
