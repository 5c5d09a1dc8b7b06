"""Batch command-line interface.

Subcommands: ``effects`` (bias-adjusted direct/indirect effects at given
sensitivity parameters), ``rv`` (robustness values plus the strength-to-t
curve), ``benchmark`` (worst cases against observed covariates), and
``simulate`` (the scalar-versus-vector robustness-value study).

Input is a headered CSV with ``.`` decimals and no missing cells; output is
a versioned JSON report (plus curve/table CSVs), a pure function of the
input bytes, flags and seed. Exit codes: 0 ok, 2 input error, 3 numerical
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .benchmarking import BenchmarkSpec, benchmark_worst, critical_delta, prepare_benchmark_stacks
from .errors import BkSensError
from .inference import bootstrap_moments, effect_report
from .mediation import (
    MediationData,
    NaturalSensitivity,
    direct_adjusted,
    fit_observed,
    indirect_adjusted_product,
    observed_indirect,
)
from .robustness import DEFAULT_RHO_GRID, robustness_value
from .simulation import S4Design, rv_ratio_study

SCHEMA_VERSION = 1


class InputError(Exception):
    """Invalid file contents or option combination (exit code 2)."""


def load_csv_columns(path: str) -> dict[str, np.ndarray]:
    """Strict CSV reader: header row, UTF-8, '.' decimals, no missing cells."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
            if len(set(header)) != len(header):
                raise InputError(f"{path}: duplicate column names in header")
            columns = {name: [] for name in header}
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise InputError(
                        f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
                for name, cell in zip(header, row):
                    cell = cell.strip()
                    if cell == "":
                        raise InputError(
                            f"{path}:{lineno}: missing value in column '{name}'")
                    try:
                        columns[name].append(float(cell))
                    except ValueError:
                        raise InputError(
                            f"{path}:{lineno}: column '{name}': "
                            f"cannot parse '{cell}' as a number") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not columns or not next(iter(columns.values())):
        raise InputError(f"{path}: no data rows")
    return {name: np.asarray(vals) for name, vals in columns.items()}


def _split_names(value: str | None) -> list[str]:
    if not value:
        return []
    return [v.strip() for v in value.split(",") if v.strip()]


def build_data(args) -> tuple[MediationData, list[str]]:
    columns = load_csv_columns(args.data)
    mediators = _split_names(args.mediators)
    covariates = _split_names(args.covariates)
    if not mediators:
        raise InputError("--mediators must name at least one column")
    roles = [args.outcome, args.exposure, *mediators, *covariates]
    if len(set(roles)) != len(roles):
        raise InputError("outcome/exposure/mediators/covariates must be disjoint")
    for name in roles:
        if name not in columns:
            raise InputError(f"column '{name}' not found in {args.data}")
    y = columns[args.outcome]
    a = columns[args.exposure]
    m = np.column_stack([columns[name] for name in mediators])
    c = np.column_stack([columns[name] for name in covariates]) if covariates else None
    try:
        data = MediationData.from_arrays(y=y, a=a, m=m, c=c)
    except BkSensError as exc:
        raise InputError(str(exc)) from exc
    return data, covariates


def _parse_grid(spec: str, name: str) -> list[float]:
    try:
        lo, hi, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise InputError(f"{name} must look like lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise InputError(f"{name}: need step > 0 and hi >= lo")
    count = int(round((hi - lo) / step)) + 1
    return [round(lo + k * step, 10) for k in range(count)]


def _parse_numbers(value: str | None, flag: str, cast=float) -> list:
    out = []
    for item in _split_names(value):
        try:
            out.append(cast(item))
        except ValueError:
            raise InputError(f"{flag}: cannot parse '{item}'") from None
    return out


def _sensitivity_from_args(args, q: int) -> NaturalSensitivity:
    r_m = _parse_numbers(args.rm, "--rm") if args.rm else [0.0] * q
    if len(r_m) != q:
        raise InputError(f"--rm needs {q} comma-separated values, got {len(r_m)}")
    r_a = 0.0 if args.randomized else (args.ra or 0.0)
    try:
        return NaturalSensitivity(r_y=args.ry or 0.0, r_m=np.asarray(r_m), r_a=r_a)
    except BkSensError as exc:
        raise InputError(str(exc)) from exc


def _report_dict(rep) -> dict:
    return {
        "estimate": rep.estimate,
        "std_err": rep.std_err,
        "t_stat": rep.t_stat,
        "ci_lower": rep.ci_lower,
        "ci_upper": rep.ci_upper,
        "effect_kind": rep.effect_kind,
        "method": rep.method,
    }


def _config_echo(args, extra=None) -> dict:
    skip = {"func"}
    config = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if extra:
        config.update(extra)
    return config


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _sidecar_path(out: str | None, default: str, suffix: str) -> Path:
    if out:
        base = Path(out)
        return base.with_name(f"{base.stem}_{suffix}.csv")
    return Path(default)


def cmd_effects(args) -> int:
    data, _ = build_data(args)
    s = _sensitivity_from_args(args, data.q)
    mm = fit_observed(data)
    plan = bootstrap_moments(data, n_resamples=args.bootstrap, seed=args.seed)
    direct = effect_report(mm, plan, lambda m: direct_adjusted(m, s),
                           "direct", "product")
    indirect = effect_report(mm, plan, lambda m: indirect_adjusted_product(m, s),
                             "indirect", "product")
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "effects",
        "config": _config_echo(args),
        "observed": {"direct": mm.theta1_obs, "indirect": observed_indirect(mm)},
        "direct": _report_dict(direct),
        "indirect": _report_dict(indirect),
    }
    _emit_json(payload, args.out)
    return 0


def cmd_rv(args) -> int:
    data, _ = build_data(args)
    mm = fit_observed(data)
    plan = bootstrap_moments(data, n_resamples=args.bootstrap, seed=args.seed)
    grid = _parse_grid(args.rho_grid, "--rho-grid") if args.rho_grid \
        else list(DEFAULT_RHO_GRID)
    mode = "vector_u" if args.vector_u else "scalar_u"
    estimators = {
        "direct": lambda m: m.theta1_obs,
        "indirect": observed_indirect,
    }
    reports = {}
    curves = {}
    summaries = {}
    for kind in ("direct", "indirect"):
        rep = robustness_value(mm, plan, kind, rho_grid=grid,
                               confounder_mode=mode, randomized=args.randomized,
                               full_curve=True)
        reports[kind] = rep
        curves[kind] = dict(rep.curve)
        summaries[kind] = effect_report(mm, plan, estimators[kind], kind, "product")
    decimals = max(len(f"{g}".split(".")[-1]) for g in grid)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "rv",
        "config": _config_echo(args, {"confounder_mode": mode}),
        "sign_flip": {k: reports[k].sign_flip for k in reports},
        "curve": [
            {"rho": rho,
             "min_t_direct": curves["direct"].get(rho),
             "min_t_indirect": curves["indirect"].get(rho)}
            for rho in grid
            if rho in curves["direct"] or rho in curves["indirect"]
        ],
    }
    for kind in ("direct", "indirect"):
        payload[kind] = {
            "estimate": summaries[kind].estimate,
            "std_err": summaries[kind].std_err,
            "t_stat": summaries[kind].t_stat,
            "rv_estimate": round(reports[kind].rv_estimate, decimals),
            "rv_ci": round(reports[kind].rv_ci, decimals),
            "observed_t": reports[kind].observed_t,
        }
    curve_file = _sidecar_path(args.out, "rv_curve.csv", "curve")
    with open(curve_file, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rho", "min_t_direct", "min_t_indirect"])
        for rho in grid:
            d = curves["direct"].get(rho)
            i = curves["indirect"].get(rho)
            if d is None and i is None:
                continue
            writer.writerow([rho,
                             "" if d is None else repr(d),
                             "" if i is None else repr(i)])
    _emit_json(payload, args.out)
    return 0


def cmd_benchmark(args) -> int:
    data, covariates = build_data(args)
    if not covariates:
        raise InputError("benchmarking needs at least one covariate")
    plan = bootstrap_moments(data, n_resamples=args.bootstrap, seed=args.seed)
    k_a = 0.0 if args.randomized else args.ka
    rows = []
    targets = covariates if args.j is None else [args.j]
    for name in targets:
        if name not in covariates:
            raise InputError(f"--j '{name}' is not one of the covariates")
        j = covariates.index(name)
        spec = BenchmarkSpec(j=j, k_a_bound=k_a, k_m_bound=args.km,
                             k_y_bound=args.ky)
        stacks = prepare_benchmark_stacks(data, j, plan)
        for kind in ("direct", "indirect"):
            res = benchmark_worst(data, spec, plan=plan, effect_kind=kind,
                                  stacks=stacks)
            rows.append({
                "covariate": name,
                "effect_kind": kind,
                "observed_estimate": res.observed_estimate,
                "observed_t": res.observed_t,
                "worst_estimate": res.worst_estimate.value,
                "worst_t": res.worst_t.t_stat,
                "k_ratios": res.worst_t.k_ratios,
            })
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "benchmark",
        "config": _config_echo(args, {"k_a_effective": k_a}),
        "worst_cases": rows,
    }

    bars_file = _sidecar_path(args.out, "benchmark_worst.csv", "worst")
    with open(bars_file, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["covariate", "effect_kind", "worst_estimate", "worst_t"])
        for row in rows:
            writer.writerow([row["covariate"], row["effect_kind"],
                             repr(row["worst_estimate"]), repr(row["worst_t"])])

    if args.j is not None and args.delta_grid:
        grid = _parse_grid(args.delta_grid, "--delta-grid")
        j = covariates.index(args.j)
        deltas = {}
        delta_curves = {}
        for kind in ("direct", "indirect"):
            d_est, curve_est = critical_delta(
                data, j, kind, threshold=0.0, delta_grid=grid, k_a_bound=k_a)
            d_ci, _ = critical_delta(
                data, j, kind, threshold=1.96, delta_grid=grid, k_a_bound=k_a,
                plan=plan)
            deltas[kind] = {"critical_delta_estimate": d_est,
                            "critical_delta_ci": d_ci}
            delta_curves[kind] = dict(curve_est)
        payload["critical_delta"] = deltas
        delta_file = _sidecar_path(args.out, "benchmark_delta.csv", "delta")
        merged = sorted(set(delta_curves["direct"]) | set(delta_curves["indirect"]))
        with open(delta_file, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["delta", "worst_estimate_direct",
                             "worst_estimate_indirect"])
            for delta in merged:
                writer.writerow([
                    delta,
                    repr(delta_curves["direct"].get(delta, "")),
                    repr(delta_curves["indirect"].get(delta, "")),
                ])
    _emit_json(payload, args.out)
    return 0


def cmd_simulate(args) -> int:
    dims = _parse_numbers(args.dim_m, "--dim-m", int) or [2]
    r2_ams = _parse_numbers(args.r2_am, "--r2-am") or [0.3]
    r2_yms = _parse_numbers(args.r2_ym, "--r2-ym") or [0.3]
    designs = [S4Design(dim_m=d, r2_am=ram, r2_ym=rym, n=args.n)
               for d in dims for ram in r2_ams for rym in r2_yms]
    rows = rv_ratio_study(designs, replications=args.reps, base_seed=args.seed)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": _config_echo(args),
        "cells": [{
            "dim_m": r.dim_m, "r2_am": r.r2_am, "r2_ym": r.r2_ym,
            "rv_scalar": r.rv_scalar, "rv_vector": r.rv_vector, "ratio": r.ratio,
        } for r in rows],
        "mean_ratio": float(np.mean([r.ratio for r in rows])),
    }
    table_file = _sidecar_path(args.out, "simulate_table.csv", "table")
    with open(table_file, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["dim_m", "r2_am", "r2_ym", "rv_scalar", "rv_vector",
                         "ratio"])
        for r in rows:
            writer.writerow([r.dim_m, r.r2_am, r.r2_ym, repr(r.rv_scalar),
                             repr(r.rv_vector), repr(r.ratio)])
    _emit_json(payload, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bksens",
        description="Sensitivity analysis for Baron-Kenny mediation under "
                    "unmeasured confounding")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_args(p):
        p.add_argument("--data", required=True, help="input CSV path")
        p.add_argument("--outcome", required=True)
        p.add_argument("--exposure", required=True)
        p.add_argument("--mediators", required=True,
                       help="comma-separated mediator columns")
        p.add_argument("--covariates", default="",
                       help="comma-separated covariate columns")
        p.add_argument("--bootstrap", type=int, default=1000, metavar="B")
        p.add_argument("--seed", type=int, default=0, metavar="S")
        p.add_argument("--randomized", action="store_true",
                       help="exposure is randomized (no exposure-confounder channel)")
        p.add_argument("--out", default=None, metavar="PATH",
                       help="JSON report path (stdout when omitted)")

    p_eff = sub.add_parser("effects", help="adjusted effects at given parameters")
    add_data_args(p_eff)
    p_eff.add_argument("--ry", type=float, default=0.0)
    p_eff.add_argument("--rm", default=None,
                       help="comma-separated mediator-confounder correlations")
    p_eff.add_argument("--ra", type=float, default=0.0)
    p_eff.set_defaults(func=cmd_effects)

    p_rv = sub.add_parser("rv", help="robustness values and min-t curve")
    add_data_args(p_rv)
    p_rv.add_argument("--rho-grid", dest="rho_grid", default=None,
                      metavar="lo:hi:step")
    p_rv.add_argument("--vector-u", dest="vector_u", action="store_true")
    p_rv.set_defaults(func=cmd_rv)

    p_bench = sub.add_parser("benchmark", help="worst cases against covariates")
    add_data_args(p_bench)
    p_bench.add_argument("--j", default=None, metavar="NAME",
                         help="single covariate to benchmark against")
    p_bench.add_argument("--ka", type=float, default=1.0)
    p_bench.add_argument("--km", type=float, default=1.0)
    p_bench.add_argument("--ky", type=float, default=1.0)
    p_bench.add_argument("--delta-grid", dest="delta_grid", default=None,
                         metavar="lo:hi:step")
    p_bench.set_defaults(func=cmd_benchmark)

    p_sim = sub.add_parser("simulate", help="scalar vs vector robustness values")
    p_sim.add_argument("--dim-m", dest="dim_m", default="2")
    p_sim.add_argument("--r2-am", dest="r2_am", default="0.3")
    p_sim.add_argument("--r2-ym", dest="r2_ym", default="0.3")
    p_sim.add_argument("--reps", type=int, default=20)
    p_sim.add_argument("--n", type=int, default=500)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default=None, metavar="PATH")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BkSensError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
