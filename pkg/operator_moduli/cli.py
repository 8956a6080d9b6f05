"""Deterministic experiment runner.

Usage:
    python main.py <subcommand> [--config PATH] [--output-dir DIR] [flags]

Each run writes `<subcommand>.csv`, `config.json` and, where produced, `witnesses/*.json` under
the output directory.  Outputs are assembled in memory and written only once the run has
finished, so a configuration error never leaves partial artifacts.

Exit status: 0 on success, 1 when a checked invariant is violated, 2 on configuration errors.
"""
import argparse
import json
import logging
import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import pandas as pd
import pydantic
from pythonjsonlogger import jsonlogger
from rich.logging import RichHandler

from operator_moduli import errors
from operator_moduli.config import (
    ExperimentConfig,
    build_config,
    read_config_file,
    tolerance_overrides,
)
from operator_moduli.fourier import GridSettings, decay_statistic, fourier_check
from operator_moduli.functions import parse_function
from operator_moduli.holder import (
    halpha_lower,
    hn_lipschitz_check,
    holder_ratio_search,
    quasicommutator_experiment,
    substitution_delta,
)
from operator_moduli.lattice import (
    SEARCH_LIMIT,
    LatticeSpec,
    divided_difference,
    lattice_bound_row,
    lattice_points,
)
from operator_moduli.linalg import matrix_from_json, matrix_to_json, random_matrix
from operator_moduli.moduli import (
    ModulusEnvelope,
    ModulusKind,
    ModulusSpec,
    doi_check,
    mcc_sandwich_check,
    modulus_search_parallel,
    omega_transform,
    witness_from_json,
    witness_to_json,
)
from operator_moduli.schur import (
    diagonal_indicator,
    multiplier_lower_parallel,
    multiplier_upper,
    off_diagonal_indicator,
)
from operator_moduli.utils import quiet_progress, rng

logger = logging.getLogger("CliLogger")

FOURIER_TOLERANCE = 1e-3
DECAY_STABILITY = 0.10


def csv_columns() -> dict[str, list[str]]:
    "Fixed CSV column lists per subcommand, shipped as package data."
    text = resources.files("operator_moduli").joinpath("schemas/csv_columns.json").read_text()
    return json.loads(text)


@dataclass
class RunResult:
    "Everything a run produces, written to disk only after the run completes."

    subcommand: str
    rows: list[dict[str, Any]] = field(default_factory=list)
    witnesses: dict[str, dict[str, Any]] = field(default_factory=dict)
    attachments: dict[str, dict[str, Any]] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.violations else 0


# ----------------------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------------------


def _multnorm(config: ExperimentConfig) -> RunResult:
    result = RunResult("multnorm")
    f_key = ""
    match config.pattern:
        case "diagonal":
            phi = diagonal_indicator(config.dim)
        case "off_diagonal":
            phi = off_diagonal_indicator(config.dim)
        case "random":
            phi = random_matrix(config.dim, config.dim, rng(config.seed, 99)) * config.dim
        case "divided_difference":
            f = parse_function(config.function)
            points = lattice_points(LatticeSpec(config.delta, config.r))
            if points.size > SEARCH_LIMIT:
                raise errors.ArgumentError(
                    f"{points.size} lattice points exceed the dense limit {SEARCH_LIMIT}; "
                    "lower --r or raise --delta"
                )
            phi = divided_difference(f, points, points).matrix
            f_key = f.key
        case "file":
            try:
                phi = matrix_from_json(json.loads(Path(config.matrix_path).read_text()))
            except json.JSONDecodeError as e:
                raise errors.ArgumentError(
                    f"Malformed matrix file {config.matrix_path}: {e}"
                ) from e

    seeds = list(range(config.seed, config.seed + config.seeds))
    lower, best_seed = multiplier_lower_parallel(phi, config.budget, seeds, config.workers)
    upper = multiplier_upper(phi, config.iterations, config.seed)
    result.violations.extend(lower.check(phi) + upper.check(phi))
    if lower.lower > upper.upper + 1e-8:
        result.violations.append(f"lower {lower.lower:.12g} exceeds upper {upper.upper:.12g}")

    certificate = upper.upper_certificate
    result.rows.append(
        {
            "pattern": config.pattern,
            "function": f_key,
            "rows": phi.shape[0],
            "cols": phi.shape[1],
            "lower": lower.lower,
            "upper": upper.upper,
            "gap": upper.upper / lower.lower if lower.lower > 0 else math.inf,
            "best_seed": best_seed,
            "factorization_residual": certificate.residual(phi) if certificate else math.nan,
        }
    )
    if lower.lower_certificate is not None:
        result.attachments["lower_certificate"] = matrix_to_json(lower.lower_certificate)
    if certificate is not None:
        result.attachments["upper_certificate"] = certificate.to_json()
    return result


def _fourier_row(
    formula_id: str,
    grid: GridSettings,
    error: float,
    statistic: float,
    estimate: float,
    threshold: float,
    passed: bool,
) -> dict[str, Any]:
    return {
        "formula_id": formula_id,
        "grid_W": grid.half_width,
        "grid_N": grid.samples,
        "max_abs_error": error,
        "statistic": statistic,
        "grid_error_estimate": estimate,
        "threshold": threshold,
        "passed": passed,
    }


def _fourier_check(config: ExperimentConfig) -> RunResult:
    result = RunResult("fourier-check")
    settings = GridSettings(half_width=config.grid_half_width, samples=config.grid_samples)
    for formula_id in config.formulas:
        check = fourier_check(formula_id, settings)
        passed = check.max_abs_error <= FOURIER_TOLERANCE
        if not passed:
            result.violations.append(f"{formula_id}: error {check.max_abs_error:.3e}")
        result.rows.append(
            _fourier_row(
                formula_id,
                settings,
                check.max_abs_error,
                math.nan,
                check.grid_error_estimate,
                FOURIER_TOLERANCE,
                passed,
            )
        )

    # the tail statistic of |ψ̂|² must be stable when N doubles
    refined = GridSettings(half_width=config.grid_half_width, samples=2 * config.grid_samples)
    coarse_value, fine_value = decay_statistic(settings), decay_statistic(refined)
    change = abs(fine_value - coarse_value) / max(abs(coarse_value), 1e-300)
    passed = change <= DECAY_STABILITY
    if not passed:
        result.violations.append(f"decay statistic moved by {change:.1%} under refinement")
    for grid, value in ((settings, coarse_value), (refined, fine_value)):
        result.rows.append(
            _fourier_row(
                "psi_squared_decay", grid, change, value, math.nan, DECAY_STABILITY, passed
            )
        )
    return result


def _lattice_bound(config: ExperimentConfig) -> RunResult:
    result = RunResult("lattice-bound")
    f = parse_function(config.function)
    for r in config.r_grid or [config.r]:
        row = lattice_bound_row(
            config.delta, r, f, config.budget, config.iterations, config.seed
        )
        if row.lower > row.upper + 1e-8:
            result.violations.append(
                f"r = {r}: lower {row.lower:.12g} exceeds upper {row.upper:.12g}"
            )
        result.rows.append(row._asdict())
    return result


def _omega(config: ExperimentConfig) -> RunResult:
    result = RunResult("omega")
    modulus = ModulusSpec.parse(config.modulus)
    contract = modulus.check_contract()
    if not (contract.monotone and contract.subadditive):
        logger.warning(
            f"{config.modulus} breaks the modulus contract "
            f"(worst violation {contract.worst_violation:.3e})"
        )
    for delta in config.delta_grid:
        value = float(modulus(delta))
        star = omega_transform(modulus, delta, 1)
        star_star = omega_transform(modulus, delta, 2)
        if value > star + 1e-12 * max(1.0, value) or star > star_star + 1e-12 * max(1.0, star):
            result.violations.append(f"ω ≤ ω* ≤ ω** fails at δ = {delta}")
        result.rows.append(
            {
                "modulus": config.modulus,
                "delta": delta,
                "omega": value,
                "omega_star": star,
                "omega_star_star": star_star,
                "monotone": contract.monotone,
                "subadditive": contract.subadditive,
            }
        )
    return result


def _doi_check(config: ExperimentConfig) -> RunResult:
    result = RunResult("doi-check")
    f = parse_function(config.function)
    report = doi_check(
        f, config.instances, config.dim, config.seed, config.radius, config.workers
    )
    if not report.ok:
        result.violations.append(f"DOI residual {report.max_residual:.3e}")
    result.rows.append({**report._asdict(), "passed": report.ok})
    return result


def _search_extremal(config: ExperimentConfig) -> RunResult:
    result = RunResult("search-extremal")
    f = parse_function(config.function)
    seeds = list(range(config.seed, config.seed + config.seeds))
    witnesses = [
        modulus_search_parallel(
            config.kind,
            f,
            delta,
            config.dim,
            config.budget,
            seeds,
            config.workers,
            config.radius,
            config.support,
        )
        for delta in config.delta_grid
    ]
    envelope = ModulusEnvelope.from_witnesses(config.kind, witnesses, config.delta_grid)
    result.attachments["envelope"] = envelope.to_json()
    for index, (delta, witness) in enumerate(zip(config.delta_grid, witnesses)):
        name = f"{config.kind.value}_{index:03d}"
        result.witnesses[name] = witness_to_json(witness)
        result.rows.append(
            {
                "kind": config.kind.value,
                "function": f.key,
                "delta": delta,
                "witness_value": witness.value,
                "constraint": witness.constraint,
                "envelope_value": float(envelope.lower_values[index]),
                "seed": witness.seed,
                "witness": f"{name}.json",
            }
        )
    return result


def _holder_row(
    config: ExperimentConfig,
    experiment: str,
    alpha: float,
    value: float,
    instances: int,
    reference: float,
) -> dict[str, Any]:
    return {
        "alpha": alpha,
        "max_ratio": value,
        "instances": instances,
        "r_cap": config.radius,
        "seed": config.seed,
        "experiment": experiment,
        "reference": reference,
    }


def _holder(config: ExperimentConfig) -> RunResult:
    result = RunResult("holder")
    f = parse_function(config.function)
    seminorms: dict[str, Any] = {}
    match config.experiment:
        case "ratio":
            for alpha in config.alpha_grid:
                estimate = holder_ratio_search(
                    f, alpha, config.dim, config.budget, config.seed, config.radius, config.support
                )
                if estimate.witness is not None:
                    result.witnesses[f"holder_{alpha:g}"] = witness_to_json(estimate.witness)
                seminorm = estimate.formula_trace["seminorm"]
                seminorms[f"{alpha:g}"] = {
                    "value": seminorm,
                    "method": estimate.formula_trace["seminorm_method"],
                }
                result.rows.append(
                    _holder_row(config, "ratio", alpha, estimate.lower, config.budget, seminorm)
                )
        case "quasicommutator":
            for alpha in config.alpha_grid:
                report = quasicommutator_experiment(
                    f,
                    alpha,
                    config.instances,
                    config.dim,
                    config.seed,
                    config.radius,
                    config.workers,
                )
                seminorms[f"{alpha:g}"] = {
                    "value": report.seminorm.value,
                    "method": report.seminorm.method,
                }
                if report.violations:
                    result.violations.append(
                        f"α={alpha}: {report.violations} zero-constraint violations"
                    )
                result.rows.append(
                    _holder_row(
                        config,
                        "quasicommutator",
                        alpha,
                        report.max_ratio,
                        config.instances,
                        report.reference,
                    )
                )
        case "halpha":
            substituted = {substitution_delta(alpha) for alpha in config.alpha_grid}
            deltas = sorted(set(config.delta_grid) | substituted)
            seeds = list(range(config.seed, config.seed + config.seeds))
            witnesses = [
                modulus_search_parallel(
                    ModulusKind.PLAIN,
                    f,
                    delta,
                    config.dim,
                    config.budget,
                    seeds,
                    config.workers,
                    config.radius,
                    config.support,
                )
                for delta in deltas
            ]
            envelope = ModulusEnvelope.from_witnesses(ModulusKind.PLAIN, witnesses, deltas)
            result.attachments["envelope"] = envelope.to_json()
            estimates = halpha_lower(
                config.alpha_grid, f, envelope, config.radius, seed=config.seed
            )
            for estimate in estimates:
                delta = estimate.formula_trace["delta"]
                result.rows.append(
                    _holder_row(
                        config, "halpha", estimate.alpha, estimate.lower, config.budget, delta
                    )
                )
        case "hn":
            for n in config.n_grid:
                report = hn_lipschitz_check(
                    n, config.instances, config.dim, config.seed, config.workers
                )
                if not report.ok:
                    result.violations.append(f"h_{n}: {report.violations} ratio violations")
                result.rows.append(
                    _holder_row(
                        config,
                        f"hn:{n}",
                        math.nan,
                        report.max_ratio,
                        config.instances,
                        report.bound,
                    )
                )
    # the `reference` column is only an estimate when the method is "sampled"
    if seminorms:
        result.attachments["seminorms"] = seminorms
    return result


def _mcc_check(config: ExperimentConfig) -> RunResult:
    result = RunResult("mcc-check")
    f = parse_function(config.function)
    report = mcc_sandwich_check(
        f, config.instances, config.seed, config.dim, config.tau, config.radius, config.workers
    )
    if report.violations:
        result.violations.append(f"{report.violations} sandwich violations")
    result.rows.append(
        {"function": f.key, "dim_max": config.dim, "tau": config.tau, **report._asdict()}
    )
    return result


SUBCOMMANDS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "multnorm": _multnorm,
    "fourier-check": _fourier_check,
    "lattice-bound": _lattice_bound,
    "omega": _omega,
    "doi-check": _doi_check,
    "search-extremal": _search_extremal,
    "holder": _holder,
    "mcc-check": _mcc_check,
}


def run(config: ExperimentConfig) -> RunResult:
    "Execute the configured subcommand under its tolerance overrides."
    logger.info(f"Running {config.subcommand}")
    with tolerance_overrides(config.tolerances):
        return SUBCOMMANDS[config.subcommand](config)


# ----------------------------------------------------------------------------------------
# Persistence
# ----------------------------------------------------------------------------------------


def report_frame(result: RunResult) -> pd.DataFrame:
    """Rows as a DataFrame with exactly the schema's columns, in schema order.

    Raises:
        ConsistencyError: a row's columns differ from the schema's.
    """
    columns = csv_columns()[result.subcommand]
    for row in result.rows:
        if set(row) != set(columns):
            raise errors.ConsistencyError(
                f"{result.subcommand} row columns {sorted(row)} do not match the schema {columns}"
            )
    return pd.DataFrame(result.rows, columns=columns)


def write_outputs(config: ExperimentConfig, result: RunResult) -> list[str]:
    """Write the report, config echo and witness files; reload each witness to revalidate it.

    Returns:
        list[str]: witness files that failed revalidation.
    """
    frame = report_frame(result)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        out / f"{result.subcommand}.csv", index=False, float_format="%.12g", lineterminator="\n"
    )
    (out / "config.json").write_text(config.canonical_json() + "\n")
    for name, payload in result.attachments.items():
        (out / f"{name}.json").write_text(json.dumps(payload, indent=2) + "\n")

    failed = []
    if result.witnesses:
        witness_dir = out / "witnesses"
        witness_dir.mkdir(exist_ok=True)
        for name, payload in result.witnesses.items():
            path = witness_dir / f"{name}.json"
            path.write_text(json.dumps(payload, indent=2) + "\n")
            try:
                witness_from_json(json.loads(path.read_text()))
            except errors.ValidationError as e:
                logger.error(f"Witness {path} failed revalidation: {e}")
                failed.append(str(path))
    return failed


# ----------------------------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------------------------


def configure_logging(
    level: str = "WARNING", log_file: Path | None = None, quiet: bool = False
) -> None:
    "Rich console handler on stderr plus an optional JSON-lines file handler."
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    console = RichHandler(show_path=False)
    console.setLevel(level.upper())
    root.addHandler(console)
    root.setLevel(level.upper())
    if log_file is not None:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(
            jsonlogger.JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s")
        )
        file_handler.setLevel(logging.DEBUG)
        root.addHandler(file_handler)
        root.setLevel(logging.DEBUG)
    logging.captureWarnings(True)
    if quiet:
        quiet_progress.set()
    else:
        quiet_progress.clear()


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    add("--config", type=Path, default=None, help="JSON or YAML run configuration.")
    add(
        "--output-dir",
        type=Path,
        default=None,
        help="Default $OPERATOR_MODULI_OUTPUT_DIR or ./results.",
    )
    add("--workers", type=int, default=None, help="Concurrent seeds or instances.")
    add("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    add("--log-file", type=Path, default=None, help="JSON-lines log file.")
    add("--quiet", action="store_true", help="Hide progress bars.")
    add("--f", "--function", dest="function", default=None, help="Registry function id.")
    add("--seed", type=int, default=None)
    add("--seeds", type=int, default=None, help="Number of consecutive seeds to search.")
    add("--dim", type=int, default=None)
    add("--budget", type=int, default=None)
    add("--iterations", type=int, default=None)
    add("--instances", type=int, default=None)
    add("--radius", type=float, default=None, help="Radius of the spectral set F.")
    add("--support", choices=["disc", "line", "circle", "lattice"], default=None)
    add("--delta", type=float, default=None)
    add("--r", type=float, default=None)
    add("--delta-grid", type=_floats, default=None)
    add("--alpha-grid", type=_floats, default=None)
    add("--r-grid", type=_floats, default=None, help="lattice-bound: one row per r.")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="operator-moduli", description="Operator and commutator moduli."
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="subcommand", required=True)

    multnorm = sub.add_parser(
        "multnorm", parents=[common], help="Two-sided Schur multiplier norm."
    )
    multnorm.add_argument(
        "--pattern",
        choices=["diagonal", "off_diagonal", "random", "divided_difference", "file"],
        default=None,
    )
    multnorm.add_argument("--matrix-path", type=Path, default=None)

    fourier = sub.add_parser(
        "fourier-check", parents=[common], help="Bessel closed forms on FFT grids."
    )
    fourier.add_argument("--formulas", type=_names, default=None)
    fourier.add_argument("--grid-half-width", type=float, default=None)
    fourier.add_argument("--grid-samples", type=int, default=None)

    sub.add_parser("lattice-bound", parents=[common], help="‖D₀f‖_M bounds on a lattice in a disc.")

    omega = sub.add_parser("omega", parents=[common], help="ω, ω* and ω** on a δ grid.")
    omega.add_argument(
        "--modulus", default=None, help="power:α | bounded_power:α,cap | linear | table:t/v;…"
    )

    sub.add_parser("doi-check", parents=[common], help="Double operator integral identity.")

    search = sub.add_parser(
        "search-extremal", parents=[common], help="Witness search and envelope."
    )
    search.add_argument("--kind", choices=[k.value for k in ModulusKind], default=None)

    holder = sub.add_parser("holder", parents=[common], help="Hölder-regime experiments.")
    holder.add_argument(
        "--experiment", choices=["ratio", "quasicommutator", "halpha", "hn"], default=None
    )
    holder.add_argument("--n-grid", type=_ints, default=None)

    mcc = sub.add_parser("mcc-check", parents=[common], help="Dilation sandwich checks.")
    mcc.add_argument("--tau", type=float, default=None)
    return parser


_RUNNER_FLAGS = {"config", "log_level", "log_file", "quiet", "subcommand"}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_file, args.quiet)
    overrides = {k: v for k, v in vars(args).items() if k not in _RUNNER_FLAGS}
    try:
        file_values = read_config_file(args.config) if args.config is not None else {}
        config = build_config(args.subcommand, file_values, overrides)
    except (errors.ArgumentError, pydantic.ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        return 2

    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            result = run(config)
        except (
            errors.ArgumentError,
            errors.PreconditionError,
            errors.ValidationError,
            OSError,
        ) as e:
            logger.error(f"{config.subcommand} rejected its input: {e}")
            return 2
        except errors.ConsistencyError as e:
            logger.error(f"{config.subcommand} failed an internal recheck: {e}")
            return 1

    failed = write_outputs(config, result)
    result.violations.extend(f"witness {path} failed revalidation" for path in failed)
    for violation in result.violations:
        logger.error(f"Violation: {violation}")
    logger.info(f"Wrote {len(result.rows)} rows to {config.output_dir}")
    return result.exit_code


__all__ = [
    "RunResult",
    "SUBCOMMANDS",
    "build_parser",
    "configure_logging",
    "main",
    "run",
    "write_outputs",
]
