"""Command-line front end: configure a domain, run checks, emit reports.

Subcommands: ``gamma``, ``lemma1``, ``moments``, ``norms``, ``gram``,
``witness``, ``constants``.  Configuration can come from a TOML file
(``--config``), with flags overriding file values; ``--dump-config`` writes
the effective configuration back out so a run can be reproduced exactly.
Exit status: 0 when every requested verdict passes, 1 on a verdict failure,
2 on a usage or configuration error.

The environment variable ``HARTOGS_WITNESS_THREADS`` caps worker threads;
by the determinism contract of the sampling layer it affects speed only,
never report content (reports do not echo the worker count).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .domain import make_domain
from .forms import CutoffSpec
from .report import (
    SCHEMA_VERSION,
    constants_dict,
    gamma_dict,
    gram_dict,
    identity_dict,
    moments_dict,
    norm_records_dict,
    summary_lines,
    witness_dict,
    write_csv_tables,
    write_output,
)
from .sampling import RngStream
from .verify import (
    ConfigurationError,
    chi_mass,
    estimate_constants,
    gamma_table,
    gram_check,
    moment_identity_check,
    norm_suite,
    run_witness,
    u_norm_closed_form,
    weighted_moment_check,
)

ENV_THREADS = "HARTOGS_WITNESS_THREADS"

_COMMANDS = ("gamma", "lemma1", "moments", "norms", "gram", "witness", "constants")


@dataclass
class RunConfig:
    """Effective run configuration; defaults match the documented desk-scale budget."""

    n1: int = 1
    n2: int = 1
    alpha: float = 1.0
    p1: float = 2.0
    p2: float = 2.0
    a: float = 0.5
    b: float = 0.75
    nu_min: int = 1
    nu_max: int = 20
    nu: int = 1
    betas: tuple = (0.0, 0.5, 1.0, 2.7)
    samples: int = 1_000_000
    seed: int = 42
    stream: int = 0
    workers: int = 1
    z_threshold: float = 4.0
    rel_tol: float = 0.02
    separation_slack: float = 0.05
    bounded_slack: float = 0.05
    format: str = "json"
    out: str | None = None

    def validate(self) -> list[str]:
        problems = []
        if self.n1 < 1:
            problems.append(f"n1 must be >= 1 (got {self.n1})")
        if self.n2 < 1:
            problems.append(f"n2 must be >= 1 (got {self.n2})")
        if not self.alpha > 0:
            problems.append(f"alpha must be > 0 (got {self.alpha})")
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if math.isnan(p) or p < 1:
                problems.append(f"{name} must satisfy 1 <= p <= inf (got {p})")
        if not 0 < self.a < self.b < 1:
            problems.append(f"cutoff requires 0 < a < b < 1 (got a={self.a}, b={self.b})")
        if self.nu_min < 1:
            problems.append(f"nu_min must be >= 1 (got {self.nu_min})")
        if self.nu_max < self.nu_min:
            problems.append(f"nu_max must be >= nu_min (got nu_min={self.nu_min}, nu_max={self.nu_max})")
        if self.nu < 1:
            problems.append(f"nu must be >= 1 (got {self.nu})")
        if any(b < 0 for b in self.betas):
            problems.append(f"betas must be >= 0 (got {list(self.betas)})")
        if self.samples < 2:
            problems.append(f"samples must be >= 2 (got {self.samples})")
        if self.workers < 1:
            problems.append(f"workers must be >= 1 (got {self.workers})")
        if self.z_threshold <= 0:
            problems.append(f"z_threshold must be > 0 (got {self.z_threshold})")
        if not 0 < self.rel_tol < 1:
            problems.append(f"rel_tol must lie in (0, 1) (got {self.rel_tol})")
        if not 0 <= self.separation_slack < 1:
            problems.append(f"separation_slack must lie in [0, 1) (got {self.separation_slack})")
        if not 0 <= self.bounded_slack < 1:
            problems.append(f"bounded_slack must lie in [0, 1) (got {self.bounded_slack})")
        if self.format not in ("json", "csv"):
            problems.append(f"format must be json or csv (got {self.format})")
        return problems

    def echo(self) -> dict:
        """Config fields echoed into reports: physics and budgets only.

        Worker count and output destination are deliberately excluded so that
        reports are byte-identical across scheduling choices.
        """
        return {
            "n1": self.n1, "n2": self.n2, "alpha": self.alpha,
            "p1": "inf" if self.p1 == math.inf else self.p1,
            "p2": "inf" if self.p2 == math.inf else self.p2,
            "a": self.a, "b": self.b,
            "nu_min": self.nu_min, "nu_max": self.nu_max,
            "nu": self.nu, "betas": list(self.betas),
            "samples": self.samples, "seed": self.seed, "stream": self.stream,
            "z_threshold": self.z_threshold, "rel_tol": self.rel_tol,
            "separation_slack": self.separation_slack,
            "bounded_slack": self.bounded_slack,
        }


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        if isinstance(value, float) and math.isinf(value):
            return '"inf"'
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot render {value!r} as TOML")


def dump_config(config: RunConfig, path: Path) -> None:
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        if f.name == "betas":
            rendered = "[" + ", ".join(repr(float(b)) for b in value) + "]"
        else:
            rendered = _toml_scalar(value)
        lines.append(f"{f.name} = {rendered}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config(path: Path) -> dict:
    with open(path, "rb") as handle:
        data = tomllib.load(handle)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("p1", "p2"):
        if key in data:
            data[key] = _parse_p(data[key])
    if "betas" in data:
        data["betas"] = tuple(float(b) for b in data["betas"])
    return data


def _parse_p(raw) -> float:
    if isinstance(raw, str):
        if raw.strip().lower() in ("inf", "infinity"):
            return math.inf
        return float(raw)
    return float(raw)


def _parse_betas(raw: str) -> tuple:
    try:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"betas must be a comma list of reals: {exc}")


def _int_arg(raw: str) -> int:
    return int(float(raw))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hartogs-witness",
        description="Monte Carlo verification on generalized Hartogs triangles",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_text = {
        "gamma": "boundary moment table (ball inversion vs surface sampling)",
        "lemma1": "radial moment identity sweep over weight exponents",
        "moments": "singular weighted moment vs closed form",
        "norms": "L2 and graph norm table for the coefficient sequence",
        "gram": "Gram matrix, orthogonality and separation",
        "witness": "full pipeline with noncompactness verdicts",
        "constants": "empirical gradient bounds and cutoff mass",
    }
    for name in _COMMANDS:
        cmd = sub.add_parser(name, help=help_text[name])
        cmd.add_argument("--config", type=Path, help="TOML config file (flags override)")
        cmd.add_argument("--dump-config", type=Path, metavar="PATH",
                         help="write the effective config as TOML and continue")
        cmd.add_argument("--n1", type=_int_arg)
        cmd.add_argument("--n2", type=_int_arg)
        cmd.add_argument("--alpha", type=float)
        cmd.add_argument("--p1", type=_parse_p, help="first-factor norm exponent ('inf' allowed)")
        cmd.add_argument("--p2", type=_parse_p, help="second-factor norm exponent ('inf' allowed)")
        cmd.add_argument("--a", type=float, help="cutoff plateau end")
        cmd.add_argument("--b", type=float, help="cutoff support end")
        cmd.add_argument("--nu-min", dest="nu_min", type=_int_arg)
        cmd.add_argument("--nu-max", dest="nu_max", type=_int_arg)
        cmd.add_argument("--nu", type=_int_arg, help="single index (lemma1)")
        cmd.add_argument("--beta", dest="betas", type=_parse_betas,
                         help="comma list of weight exponents (lemma1)")
        cmd.add_argument("--samples", type=_int_arg)
        cmd.add_argument("--seed", type=_int_arg)
        cmd.add_argument("--stream", type=_int_arg, help="substream id")
        cmd.add_argument("--workers", type=_int_arg)
        cmd.add_argument("--z-threshold", dest="z_threshold", type=float)
        cmd.add_argument("--rel-tol", dest="rel_tol", type=float)
        cmd.add_argument("--separation-slack", dest="separation_slack", type=float)
        cmd.add_argument("--bounded-slack", dest="bounded_slack", type=float)
        cmd.add_argument("--format", choices=("json", "csv"))
        cmd.add_argument("--out", type=Path, help="output file (json) or directory (csv)")
    return parser


def merge_config(args: argparse.Namespace) -> RunConfig:
    values = asdict(RunConfig())
    if args.config is not None:
        values.update(load_config(args.config))
    for f in fields(RunConfig):
        cli_value = getattr(args, f.name, None)
        if cli_value is not None:
            values[f.name] = cli_value
    if values["out"] is not None:
        values["out"] = str(values["out"])
    config = RunConfig(**values)
    return config


def _effective_workers(config: RunConfig) -> int:
    cap = os.environ.get(ENV_THREADS)
    workers = config.workers
    if cap is not None:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise ConfigurationError(f"{ENV_THREADS} must be an integer, got {cap!r}")
    return max(1, workers)


# ---------------------------------------------------------------------------
# subcommand handlers: each returns (document, passed, report-for-csv-or-None)


def _setup(config: RunConfig):
    params = make_domain(config.n1, config.n2, config.alpha, config.p1, config.p2)
    cutoff = CutoffSpec(config.a, config.b)
    rng = RngStream(config.seed, config.stream)
    nus = list(range(config.nu_min, config.nu_max + 1))
    return params, cutoff, rng, nus


def _base_doc(command: str, config: RunConfig) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": config.echo()}


def _run_gamma(config: RunConfig, workers: int):
    params, _, rng, nus = _setup(config)
    table = gamma_table(params.norm2, nus, config.samples, rng,
                        workers=workers, z_threshold=config.z_threshold)
    doc = _base_doc("gamma", config)
    doc["gamma"] = gamma_dict(table)
    return doc, table.all_consistent and table.all_valid, None


def _run_lemma1(config: RunConfig, workers: int):
    params, _, rng, _ = _setup(config)
    result = moment_identity_check(
        params.norm2, config.nu, list(config.betas), config.samples, rng,
        workers=workers, z_threshold=config.z_threshold, rel_tol=0.01,
    )
    doc = _base_doc("lemma1", config)
    doc["identity"] = identity_dict(result)
    return doc, result.passed, None


def _run_moments(config: RunConfig, workers: int):
    params, _, rng, nus = _setup(config)
    table = gamma_table(params.norm2, nus, config.samples, rng,
                        workers=workers, z_threshold=config.z_threshold)
    results = weighted_moment_check(
        params, nus, table, config.samples, rng, workers=workers,
        z_threshold=config.z_threshold, rel_tol=config.rel_tol,
    )
    doc = _base_doc("moments", config)
    doc["gamma"] = gamma_dict(table)
    doc["moments"] = moments_dict(results)
    return doc, all(r.passed for r in results), None


def _run_constants(config: RunConfig, workers: int):
    params, cutoff, rng, _ = _setup(config)
    consts = estimate_constants(params, cutoff, min(config.samples, 200_000), rng,
                                workers=workers)
    doc = _base_doc("constants", config)
    doc["constants"] = constants_dict(consts)
    ok = all(math.isfinite(v) and v > 0 for v in (consts.k1, consts.k2, consts.i_chi))
    return doc, ok, None


def _run_norms(config: RunConfig, workers: int):
    params, cutoff, rng, nus = _setup(config)
    table = gamma_table(params.norm2, nus, config.samples, rng,
                        workers=workers, z_threshold=config.z_threshold)
    consts = estimate_constants(params, cutoff, min(config.samples, 200_000), rng,
                                workers=workers)
    records, lam = norm_suite(
        params, cutoff, table, nus, config.samples, rng, constants=consts,
        workers=workers, z_threshold=config.z_threshold, rel_tol=config.rel_tol,
    )
    doc = _base_doc("norms", config)
    doc["gamma"] = gamma_dict(table)
    doc["constants"] = constants_dict(consts)
    doc["norms"] = norm_records_dict(records, lam)
    passed = all(
        r.bound_ok and r.u_z <= config.z_threshold and r.u_rel_err <= config.rel_tol
        for r in records
    )
    return doc, passed, None


def _run_gram(config: RunConfig, workers: int):
    params, cutoff, rng, nus = _setup(config)
    table = gamma_table(params.norm2, nus, config.samples, rng,
                        workers=workers, z_threshold=config.z_threshold)
    i_chi = chi_mass(cutoff, params.norm1)
    lam = math.sqrt(min(u_norm_closed_form(params, i_chi, nu) for nu in nus))
    result = gram_check(
        params, cutoff, table, nus, config.samples, rng, lam=lam, workers=workers,
        z_threshold=config.z_threshold, separation_slack=config.separation_slack,
    )
    doc = _base_doc("gram", config)
    doc["gamma"] = gamma_dict(table)
    doc["lambda"] = lam
    doc["gram"] = gram_dict(result)
    return doc, result.offdiag_ok and result.separation_ok, None


def _run_witness(config: RunConfig, workers: int):
    params, cutoff, rng, nus = _setup(config)
    report = run_witness(
        params, cutoff, nus, config.samples, rng, workers=workers,
        z_threshold=config.z_threshold, rel_tol=config.rel_tol,
        separation_slack=config.separation_slack, bounded_slack=config.bounded_slack,
    )
    doc = witness_dict(report, config.echo())
    passed = (not report.incomplete) and report.verdicts.get("witnessed", False)
    return doc, passed, report


_HANDLERS = {
    "gamma": _run_gamma,
    "lemma1": _run_lemma1,
    "moments": _run_moments,
    "norms": _run_norms,
    "gram": _run_gram,
    "witness": _run_witness,
    "constants": _run_constants,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = merge_config(args)
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    problems = config.validate()
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        return 2
    if config.format == "csv" and args.command != "witness":
        print("error: format csv is only available for the witness subcommand", file=sys.stderr)
        return 2
    if config.format == "csv" and config.out is None:
        print("error: format csv requires --out DIRECTORY", file=sys.stderr)
        return 2
    if args.dump_config is not None:
        dump_config(config, args.dump_config)
    try:
        workers = _effective_workers(config)
        doc, passed, report = _HANDLERS[args.command](config, workers)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if config.format == "csv":
        paths = write_csv_tables(report, Path(config.out))
        for path in paths:
            print(f"wrote {path}", file=sys.stderr)
    else:
        write_output(doc, config.format, Path(config.out) if config.out else None)
    if report is not None:
        for line in summary_lines(report):
            print(line, file=sys.stderr)
    else:
        print(f"{args.command}: {'pass' if passed else 'FAIL'}", file=sys.stderr)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
