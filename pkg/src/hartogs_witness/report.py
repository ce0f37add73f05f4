"""Serialization of check results: JSON documents and plot-ready CSV tables.

Reports are deterministic by construction: keys are sorted, floats are
emitted with full round-trip precision, and nothing time- or host-dependent
is written, so identical seeds produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path

from .sampling import ComplexEstimate, Estimate
from .verify import (
    ConstantsEstimate,
    GammaTable,
    GramResult,
    MomentIdentityResult,
    NormRecord,
    WeightedMomentResult,
    WitnessReport,
)

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "constants_dict",
    "gamma_dict",
    "gram_dict",
    "identity_dict",
    "moments_dict",
    "norm_records_dict",
    "render_json",
    "summary_lines",
    "witness_dict",
    "write_csv_tables",
    "write_output",
]


def _finite(x: float):
    # strict JSON has no Infinity/NaN tokens
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def estimate_dict(e: Estimate) -> dict:
    return {
        "value": _finite(float(e.value)),
        "stderr": _finite(float(e.stderr)),
        "n": int(e.n_samples),
        "valid": bool(e.valid),
    }


def complex_estimate_dict(e: ComplexEstimate) -> dict:
    return {
        "re": _finite(float(e.value.real)),
        "im": _finite(float(e.value.imag)),
        "stderr": _finite(float(e.stderr)),
        "n": int(e.n_samples),
    }


def p_token(p: float):
    return "inf" if p == math.inf else float(p)


def gamma_dict(table: GammaTable) -> dict:
    return {
        "norm": {"k": table.norm.k, "p": p_token(table.norm.p)},
        "entries": [
            {
                "nu": nu,
                "ball": estimate_dict(table[nu].gamma_ball),
                "surface": estimate_dict(table[nu].gamma_surface),
                "consistent": table[nu].consistent,
            }
            for nu in table.nus
        ],
        "all_consistent": table.all_consistent,
    }


def identity_dict(result: MomentIdentityResult) -> dict:
    return {
        "nu": result.nu,
        "gamma_ball": estimate_dict(result.gamma_ball),
        "rows": [
            {
                "beta": row.beta,
                "moment": estimate_dict(row.moment),
                "rescaled": estimate_dict(row.rescaled),
                "z_vs_gamma": _finite(row.z_vs_gamma),
                "rel_vs_gamma": _finite(row.rel_vs_gamma),
            }
            for row in result.rows
        ],
        "max_pairwise_z": _finite(result.max_pairwise_z),
        "max_rel_vs_gamma": _finite(result.max_rel_vs_gamma),
        "passed": result.passed,
    }


def moments_dict(results: list[WeightedMomentResult]) -> dict:
    return {
        "rows": [
            {
                "nu": r.nu,
                "estimate": estimate_dict(r.estimate),
                "closed_form": _finite(r.closed_form),
                "closed_stderr": _finite(r.closed_stderr),
                "z": _finite(r.z),
                "rel_err": _finite(r.rel_err),
                "passed": r.passed,
            }
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }


def constants_dict(c: ConstantsEstimate) -> dict:
    return {"k1": _finite(c.k1), "k2": _finite(c.k2), "i_chi": _finite(c.i_chi)}


def norm_records_dict(records: list[NormRecord], lam: float) -> dict:
    return {
        "rows": [
            {
                "nu": r.nu,
                "u_norm_sq": estimate_dict(r.u_norm_sq),
                "closed_form": _finite(r.closed_form),
                "u_z": _finite(r.u_z),
                "u_rel_err": _finite(r.u_rel_err),
                "dbar_norm_sq": estimate_dict(r.dbar_norm_sq),
                "theta_norm_sq": estimate_dict(r.theta_norm_sq),
                "graph_norm": _finite(r.graph_norm),
                "graph_stderr": _finite(r.graph_stderr),
                "dbar_bound": _finite(r.dbar_bound),
                "bound_ok": r.bound_ok,
            }
            for r in records
        ],
        "lambda": _finite(lam),
        "lambda_sq": _finite(lam * lam),
    }


def gram_dict(g: GramResult) -> dict:
    return {
        "nus": list(g.nus),
        "entries": [[complex_estimate_dict(e) for e in row] for row in g.entries],
        "offdiag_max_z": _finite(g.offdiag_max_z),
        "offdiag_ok": g.offdiag_ok,
        "hermitian_error": _finite(g.hermitian_error),
        "diag_max_z": _finite(g.diag_max_z),
        "diag_consistent": g.diag_consistent,
        "min_pairwise_distance": _finite(g.min_pairwise_distance),
        "separation_bound": _finite(g.separation_bound),
        "separation_ok": g.separation_ok,
    }


def witness_dict(report: WitnessReport, config_echo: dict) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "witness",
        "config": config_echo,
        "incomplete": report.incomplete,
        "failed_stage": report.failed_stage,
        "failure": report.failure,
        "verdicts": dict(report.verdicts),
    }
    if report.gamma is not None:
        doc["gamma"] = gamma_dict(report.gamma)
    if report.constants is not None:
        doc["constants"] = constants_dict(report.constants)
    if report.records:
        doc["norms"] = norm_records_dict(report.records, report.lam)
        doc["sup_graph_norm"] = _finite(report.sup_graph_norm)
        doc["sup_graph_norm_first_half"] = _finite(report.sup_graph_norm_first_half)
        doc["bounded_allowance"] = _finite(report.bounded_allowance)
    if report.gram is not None:
        doc["gram"] = gram_dict(report.gram)
    return doc


def render_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# CSV tables


def _write_table(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _gamma_rows(table: GammaTable) -> tuple[list[str], list[list]]:
    header = ["nu", "gamma_ball", "gamma_ball_stderr", "gamma_surface",
              "gamma_surface_stderr", "consistent"]
    rows = [
        [nu, table[nu].gamma_ball.value, table[nu].gamma_ball.stderr,
         table[nu].gamma_surface.value, table[nu].gamma_surface.stderr,
         table[nu].consistent]
        for nu in table.nus
    ]
    return header, rows


def _norm_rows(records: list[NormRecord]) -> tuple[list[str], list[list]]:
    header = ["nu", "u_norm_sq", "u_norm_sq_stderr", "closed_form", "u_z", "u_rel_err",
              "dbar_norm_sq", "dbar_stderr", "theta_norm_sq", "theta_stderr",
              "graph_norm", "graph_stderr", "dbar_bound", "bound_ok"]
    rows = [
        [r.nu, r.u_norm_sq.value, r.u_norm_sq.stderr, r.closed_form, r.u_z, r.u_rel_err,
         r.dbar_norm_sq.value, r.dbar_norm_sq.stderr, r.theta_norm_sq.value,
         r.theta_norm_sq.stderr, r.graph_norm, r.graph_stderr, r.dbar_bound, r.bound_ok]
        for r in records
    ]
    return header, rows


def _gram_rows(g: GramResult) -> tuple[list[str], list[list]]:
    header = ["mu", "nu", "re", "im", "stderr"]
    rows = []
    for i, mu in enumerate(g.nus):
        for j, nu in enumerate(g.nus):
            e = g.entries[i][j]
            rows.append([mu, nu, e.value.real, e.value.imag, e.stderr])
    return header, rows


def write_csv_tables(report: WitnessReport, directory: Path) -> list[Path]:
    """Write the per-table CSV files of a witness report; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if report.gamma is not None:
        path = directory / "gamma.csv"
        _write_table(path, *_gamma_rows(report.gamma))
        written.append(path)
    if report.records:
        path = directory / "norms.csv"
        _write_table(path, *_norm_rows(report.records))
        written.append(path)
    if report.gram is not None:
        path = directory / "gram.csv"
        _write_table(path, *_gram_rows(report.gram))
        written.append(path)
    summary = directory / "summary.csv"
    header = ["key", "value"]
    rows = [["lambda", report.lam], ["sup_graph_norm", report.sup_graph_norm],
            ["incomplete", report.incomplete]]
    if report.gram is not None:
        rows.append(["min_pairwise_distance", report.gram.min_pairwise_distance])
        rows.append(["separation_bound", report.gram.separation_bound])
    for key, value in sorted(report.verdicts.items()):
        rows.append([f"verdict_{key}", value])
    _write_table(summary, header, rows)
    written.append(summary)
    return written


def write_output(doc: dict, fmt: str, out: Path | None) -> None:
    """Write a JSON document to ``out`` (or stdout when ``out`` is None)."""
    text = render_json(doc)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def summary_lines(report: WitnessReport) -> list[str]:
    lines = []
    if report.incomplete:
        lines.append(f"INCOMPLETE at stage {report.failed_stage}: {report.failure}")
        return lines
    lines.append(
        f"lambda = {report.lam:.6g}, sup graph norm = {report.sup_graph_norm:.6g} "
        f"(first half {report.sup_graph_norm_first_half:.6g})"
    )
    if report.gram is not None:
        lines.append(
            f"min pairwise distance = {report.gram.min_pairwise_distance:.6g} "
            f"(bound {report.gram.separation_bound:.6g})"
        )
    for key, value in sorted(report.verdicts.items()):
        lines.append(f"verdict {key}: {'pass' if value else 'FAIL'}")
    return lines
