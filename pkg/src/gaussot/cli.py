"""Batch runner and command-line interface.

``gaussot suite <config.json>`` runs a declarative suite of checks over a
list of densities and writes a machine-readable report; ``gaussot solve``
runs the moment-measure solver for one density and exports the solution;
``gaussot report --merge`` concatenates report files.

Exit codes: 0 all checks passed (or skipped), 1 at least one check failed,
2 usage or configuration errors.  Reports are byte-identical across runs
for a fixed configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import corpus as corpus_mod
from .densities import (
    RelativeDensity,
    gaussian,
    gaussian_mixture,
    quartic_perturbation,
    recenter,
    scaled_gaussian,
    standard,
)
from .identities import IdentityUnavailable, bochner_identity, cross_identity, ent_iden
from .kesolver import (
    MomentSolution,
    apriori_checks,
    j_max_check,
    local_min_check,
    moment_and_exp_checks,
    solve_1d,
)
from .numerics import gauss_hermite
from .stability import DeficitReport, deficit_report, delta_lemma_checks

WORKERS_ENV = "GAUSSOT_WORKERS"
IDENTITY_TOL = 1e-4
KE_MARGIN_TOL = 1e-6

REPORT_FIELDS = (
    "density_id",
    "check",
    "lhs",
    "rhs",
    "margin",
    "status",
    "tolerance",
    "provenance",
)


class SuiteConfigError(ValueError):
    """The suite configuration is malformed."""


FAMILIES: dict[str, Callable[..., RelativeDensity]] = {
    "standard": lambda: standard(),
    "gaussian": gaussian,
    "scaled_gaussian": scaled_gaussian,
    "gaussian_mixture": gaussian_mixture,
    "quartic_perturbation": quartic_perturbation,
    "corpus": lambda name: corpus_mod.corpus_density(name),
}


def make_density(family: str, params: dict) -> RelativeDensity:
    if family not in FAMILIES:
        raise SuiteConfigError(
            f"unknown density family {family!r}; known: {sorted(FAMILIES)}"
        )
    try:
        return FAMILIES[family](**params)
    except TypeError as exc:
        raise SuiteConfigError(f"bad parameters for family {family!r}: {exc}") from exc


@dataclass(frozen=True)
class SuiteConfig:
    densities: list[dict]
    checks: list[str]
    quadrature_nodes: int = 200
    tolerances: dict = field(default_factory=dict)
    output_format: str = "csv"
    output_path: Optional[str] = None

    @staticmethod
    def from_dict(raw: dict) -> "SuiteConfig":
        if not isinstance(raw, dict):
            raise SuiteConfigError("config must be a JSON object")
        densities = raw.get("densities")
        if not isinstance(densities, list) or not densities:
            raise SuiteConfigError("config needs a nonempty 'densities' list")
        for entry in densities:
            if not isinstance(entry, dict) or "family" not in entry:
                raise SuiteConfigError(f"bad density entry {entry!r}")
        checks = raw.get("checks", ["all"])
        if checks in (["all"], "all"):
            checks = sorted(CHECKS)
        unknown = [c for c in checks if c not in CHECKS]
        if unknown:
            raise SuiteConfigError(
                f"unknown checks {unknown}; known: {sorted(CHECKS)}"
            )
        quad = raw.get("quadrature", {})
        tol = raw.get("tolerances", {})
        out = raw.get("output", {})
        fmt = out.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise SuiteConfigError(f"output format must be csv or json, got {fmt!r}")
        if not isinstance(tol, dict):
            raise SuiteConfigError("'tolerances' must be an object")
        return SuiteConfig(
            densities=densities,
            checks=list(checks),
            quadrature_nodes=int(quad.get("nodes", 200)),
            tolerances=tol,
            output_format=fmt,
            output_path=out.get("path"),
        )


@dataclass(frozen=True)
class Row:
    density_id: str
    check: str
    lhs: Optional[float]
    rhs: Optional[float]
    margin: Optional[float]
    status: str
    tolerance: float
    provenance: str = ""


class _DensityContext:
    """Lazy per-density cache shared by the checks of one suite row group."""

    def __init__(self, density_id: str, dens: RelativeDensity, config: SuiteConfig):
        self.density_id = density_id
        self.density = dens
        self.config = config
        self.rule = gauss_hermite(config.quadrature_nodes)
        self.margin_tol = float(config.tolerances.get("margin", 1e-6))
        self.identity_tol = float(
            config.tolerances.get("identity_residual", IDENTITY_TOL)
        )

    @cached_property
    def report(self) -> DeficitReport:
        return deficit_report(self.density, label=self.density_id, rule=self.rule)

    @cached_property
    def solution(self) -> MomentSolution:
        return solve_1d(self.density)

    @cached_property
    def apriori(self):
        return apriori_checks(self.solution)

    @cached_property
    def moments(self):
        return moment_and_exp_checks(self.solution)


def _bound_row(ctx: _DensityContext, name: str) -> list[Row]:
    for check in ctx.report.checks:
        if check.name == name:
            return [
                Row(
                    density_id=ctx.density_id,
                    check=name,
                    lhs=check.lhs,
                    rhs=check.rhs,
                    margin=check.margin,
                    status=check.status,
                    tolerance=check.tolerance,
                    provenance=check.provenance or check.note,
                )
            ]
    return [
        Row(ctx.density_id, name, None, None, None, "skipped:unavailable", 0.0, "")
    ]


def _identity_row(ctx: _DensityContext, name: str, fn) -> list[Row]:
    try:
        rep = fn()
    except IdentityUnavailable as exc:
        return [
            Row(ctx.density_id, name, None, None, None, "skipped:unavailable", ctx.identity_tol, str(exc))
        ]
    margin = ctx.identity_tol - rep.residual
    status = "pass" if margin >= 0 else "fail"
    return [
        Row(ctx.density_id, name, rep.lhs, rep.rhs, margin, status, ctx.identity_tol, "")
    ]


def _ke_solve_rows(ctx: _DensityContext) -> list[Row]:
    sol = ctx.solution
    ok = (
        sol.mass_error <= 1e-8
        and sol.barycenter_error <= 1e-8
        and sol.pushforward_residual <= 1e-6
        and sol.convexity_margin >= -1e-8
    )
    note = (
        f"mass={sol.mass_error:.3e} barycenter={sol.barycenter_error:.3e} "
        f"convexity={sol.convexity_margin:.3e}"
    )
    return [
        Row(
            ctx.density_id,
            "ke_solve",
            sol.pushforward_residual,
            1e-6,
            1e-6 - sol.pushforward_residual,
            "pass" if ok else "fail",
            1e-6,
            note,
        )
    ]


def _margin_row(ctx, name, value, tol=KE_MARGIN_TOL, provenance="") -> list[Row]:
    status = "pass" if value >= -tol else "fail"
    return [Row(ctx.density_id, name, value, 0.0, value, status, tol, provenance)]


def _ke_sdb_rows(ctx: _DensityContext) -> list[Row]:
    rep = ctx.apriori
    if rep.hessian_status.startswith("skipped"):
        return [
            Row(ctx.density_id, "ke_sdb", None, None, None, rep.hessian_status, 1e-3, "")
        ]
    rhs = 1.0 + rep.hessian_bound + 1e-3
    return [
        Row(
            ctx.density_id,
            "ke_sdb",
            rep.cp_solution,
            rhs,
            rep.hessian_cp_margin,
            rep.hessian_status,
            1e-3,
            rep.cp_provenance,
        )
    ]


def _ke_distcontrol_rows(ctx: _DensityContext) -> list[Row]:
    rep = ctx.apriori
    if rep.distcontrol_status.startswith("skipped"):
        return [
            Row(
                ctx.density_id,
                "ke_distcontrol",
                None,
                None,
                None,
                rep.distcontrol_status,
                1e-9,
                "",
            )
        ]
    return [
        Row(
            ctx.density_id,
            "ke_distcontrol",
            rep.w2_solution_to_target,
            rep.w2_solution_to_target + rep.distcontrol_margin,
            rep.distcontrol_margin,
            rep.distcontrol_status,
            1e-9,
            f"delta={rep.distcontrol_delta:.6g}",
        )
    ]


def _ke_exp_rows(ctx: _DensityContext) -> list[Row]:
    rep = ctx.moments
    if rep.exp_status.startswith("skipped"):
        return [
            Row(ctx.density_id, "ke_exp", None, None, None, rep.exp_status, 1e-6, "")
        ]
    return [
        Row(
            ctx.density_id,
            "ke_exp",
            rep.exp_lhs,
            rep.exp_rhs,
            rep.exp_margin,
            rep.exp_status,
            1e-6,
            "",
        )
    ]


def _ke_moments_rows(ctx: _DensityContext) -> list[Row]:
    rep = ctx.moments
    worst_infconv = min(row[3] for row in rep.infconv)
    finite = all(
        math.isfinite(v)
        for v in list(rep.phi_moments.values()) + list(rep.grad_moments.values())
    )
    status = "pass" if (finite and worst_infconv >= 0) else "fail"
    return [
        Row(
            ctx.density_id,
            "ke_moments",
            worst_infconv,
            0.0,
            worst_infconv,
            status,
            0.0,
            f"p-moments finite={finite}",
        )
    ]


CHECKS: dict[str, Callable[[_DensityContext], list[Row]]] = {
    "lsi": lambda ctx: _bound_row(ctx, "lsi"),
    "talagrand": lambda ctx: _bound_row(ctx, "talagrand"),
    "hwi": lambda ctx: _bound_row(ctx, "hwi"),
    "fil": lambda ctx: _bound_row(ctx, "fil"),
    "mainstab": lambda ctx: _bound_row(ctx, "mainstab"),
    "igncp": lambda ctx: _bound_row(ctx, "igncp"),
    "bgrs": lambda ctx: _bound_row(ctx, "bgrs"),
    "tal_w11": lambda ctx: _bound_row(ctx, "tal_w11"),
    "tal_w11_chain": lambda ctx: _bound_row(ctx, "tal_w11_chain"),
    "lsi_cost": lambda ctx: _bound_row(ctx, "lsi_cost"),
    "caffarelli": lambda ctx: _bound_row(ctx, "caffarelli"),
    "ent_iden": lambda ctx: _identity_row(
        ctx, "ent_iden", lambda: ent_iden(ctx.density, standard(), rule=ctx.rule)
    ),
    "bochner": lambda ctx: _identity_row(
        ctx, "bochner", lambda: bochner_identity(ctx.density, rule=ctx.rule)
    ),
    "cross_iden": lambda ctx: _identity_row(
        ctx, "cross_iden", lambda: cross_identity(ctx.density, rule=ctx.rule)
    ),
    "ke_solve": _ke_solve_rows,
    "ke_local_min": lambda ctx: _margin_row(
        ctx, "ke_local_min", local_min_check(ctx.solution)
    ),
    "ke_j_max": lambda ctx: _margin_row(ctx, "ke_j_max", j_max_check(ctx.solution)),
    "ke_sdb": _ke_sdb_rows,
    "ke_distcontrol": _ke_distcontrol_rows,
    "ke_exp": _ke_exp_rows,
    "ke_moments": _ke_moments_rows,
    "delta_lemma": None,  # handled globally, not per density
}


def _delta_lemma_rows() -> list[Row]:
    rep = delta_lemma_checks()
    worst = min(
        rep.convexity,
        rep.sqrt_concavity,
        rep.sqrt_subadditivity,
        rep.abs_domination,
        rep.min_quadratic,
        rep.conjugate_gap,
    )
    status = "pass" if rep.passed else "fail"
    return [
        Row("(global)", "delta_lemma", worst, 0.0, worst, status, 1e-12, f"samples={rep.samples}")
    ]


def run_suite(config: SuiteConfig) -> tuple[list[Row], int]:
    """Evaluate every (density, check) pair; returns rows and the exit code.

    Individual check failures never abort the suite; they only flip the
    exit code to 1.  Rows are assembled in configuration order regardless
    of the worker pool size, so output is deterministic.
    """
    density_checks = [c for c in config.checks if c != "delta_lemma"]
    contexts = []
    for i, entry in enumerate(config.densities):
        dens = make_density(entry["family"], entry.get("params", {}))
        density_id = entry.get("id") or f"{entry['family']}#{i}"
        contexts.append(_DensityContext(density_id, dens, config))

    def run_one(ctx: _DensityContext) -> list[Row]:
        rows: list[Row] = []
        for name in density_checks:
            try:
                rows.extend(CHECKS[name](ctx))
            except Exception as exc:  # a failed check must not abort the suite
                rows.append(
                    Row(ctx.density_id, name, None, None, None, "fail", 0.0, f"error: {exc}")
                )
        return rows

    workers = max(1, int(os.environ.get(WORKERS_ENV, "1")))
    if workers > 1 and len(contexts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grouped = list(pool.map(run_one, contexts))
    else:
        grouped = [run_one(ctx) for ctx in contexts]

    rows = [row for group in grouped for row in group]
    if "delta_lemma" in config.checks:
        rows.extend(_delta_lemma_rows())
    exit_code = 1 if any(r.status == "fail" for r in rows) else 0
    return rows, exit_code


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".12g")


def rows_to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for r in rows:
        writer.writerow(
            [
                r.density_id,
                r.check,
                _fmt(r.lhs),
                _fmt(r.rhs),
                _fmt(r.margin),
                r.status,
                _fmt(r.tolerance),
                r.provenance,
            ]
        )
    return buf.getvalue()


def rows_to_json(rows: list[Row]) -> str:
    payload = [
        {
            "density_id": r.density_id,
            "check": r.check,
            "lhs": _fmt(r.lhs),
            "rhs": _fmt(r.rhs),
            "margin": _fmt(r.margin),
            "status": r.status,
            "tolerance": _fmt(r.tolerance),
            "provenance": r.provenance,
        }
        for r in rows
    ]
    return json.dumps(payload, indent=2) + "\n"


def write_report(rows: list[Row], fmt: str, path: str) -> None:
    text = rows_to_csv(rows) if fmt == "csv" else rows_to_json(rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# -- solve export -----------------------------------------------------------------


def solve_and_export(
    family: str, params: dict, out_prefix: str
) -> tuple[str, str]:
    """Solve one density and write <prefix>.csv / <prefix>.json."""
    dens = make_density(family, params)
    if abs(dens.mean()) > 1e-8:
        print(
            f"warning: target barycenter {dens.mean():.6g} != 0; recentering",
            file=sys.stderr,
        )
        dens = recenter(dens)
    sol = solve_1d(dens)
    x = sol.grid.nodes
    t_vals = np.asarray(sol.transport_map(x))
    rho_vals = np.exp(-sol.phi)
    resid = np.abs(np.asarray(dens.cdf(t_vals)) - np.asarray(sol.rho.cdf(x)))

    csv_path = out_prefix + ".csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "phi", "rho", "T", "residual"])
        for i in range(x.size):
            writer.writerow(
                [
                    _fmt(x[i]),
                    _fmt(sol.phi[i]),
                    _fmt(rho_vals[i]),
                    _fmt(t_vals[i]),
                    _fmt(resid[i]),
                ]
            )

    apriori = apriori_checks(sol)
    diag = {
        "family": family,
        "params": params,
        "mass_error": _fmt(sol.mass_error),
        "barycenter_error": _fmt(sol.barycenter_error),
        "pushforward_residual": _fmt(sol.pushforward_residual),
        "convexity_margin": _fmt(sol.convexity_margin),
        "f_gamma": _fmt(sol.f_gamma_value),
        "w2sq_to_target": _fmt(sol.w2sq_to_target),
        "cp_solution": _fmt(apriori.cp_solution),
        "beta": _fmt(sol.beta),
        "shift": _fmt(sol.shift),
        "j_max_margin": _fmt(j_max_check(sol)),
    }
    json_path = out_prefix + ".json"
    with open(json_path, "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


# -- argument parsing ----------------------------------------------------------------


def _parse_param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise SuiteConfigError(f"--param expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussot",
        description="Gaussian-relative functional inequalities and the 1D "
        "moment-measure solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_suite = sub.add_parser("suite", help="run a configured check suite")
    p_suite.add_argument("config", help="path to the JSON suite configuration")
    p_suite.add_argument("--out", help="override the configured output path")

    p_solve = sub.add_parser("solve", help="solve the moment-measure problem")
    p_solve.add_argument("family", help="density family name")
    p_solve.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="family parameter (JSON-typed value); repeatable",
    )
    p_solve.add_argument("--out", default="moment_solution", help="output prefix")

    p_report = sub.add_parser("report", help="merge report files")
    p_report.add_argument("--merge", nargs="+", required=True, help="CSV reports")
    p_report.add_argument("--out", required=True, help="merged CSV path")
    return parser


def _merge_reports(paths: list[str], out: str) -> None:
    header: Optional[list[str]] = None
    body: list[list[str]] = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            first = next(reader)
            if header is None:
                header = first
            elif first != header:
                raise SuiteConfigError(f"{path}: header mismatch")
            body.extend(reader)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header or list(REPORT_FIELDS))
        writer.writerows(body)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "suite":
            try:
                with open(args.config) as fh:
                    raw = json.load(fh)
            except json.JSONDecodeError as exc:
                print(
                    f"config parse error at line {exc.lineno}, column {exc.colno}: "
                    f"{exc.msg}",
                    file=sys.stderr,
                )
                return 2
            except OSError as exc:
                print(f"cannot read config: {exc}", file=sys.stderr)
                return 2
            config = SuiteConfig.from_dict(raw)
            if args.out:
                config = SuiteConfig(
                    densities=config.densities,
                    checks=config.checks,
                    quadrature_nodes=config.quadrature_nodes,
                    tolerances=config.tolerances,
                    output_format=config.output_format,
                    output_path=args.out,
                )
            rows, code = run_suite(config)
            text = (
                rows_to_csv(rows)
                if config.output_format == "csv"
                else rows_to_json(rows)
            )
            if config.output_path:
                with open(config.output_path, "w", newline="") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            n_fail = sum(r.status == "fail" for r in rows)
            print(
                f"{len(rows)} rows, {n_fail} failures", file=sys.stderr
            )
            return code
        if args.command == "solve":
            params = dict(_parse_param(p) for p in args.param)
            csv_path, json_path = solve_and_export(args.family, params, args.out)
            print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
            return 0
        if args.command == "report":
            _merge_reports(args.merge, args.out)
            return 0
        parser.error(f"unknown command {args.command!r}")
        return 2
    except SuiteConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
