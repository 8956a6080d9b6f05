"""Run configuration for the experiment runner.

`ExperimentConfig` is the versioned, fully serializable description of one run; its
`model_dump_json()` is echoed next to every report so a run can be repeated byte for byte.
"""
import contextlib
import json
import logging
import os
from collections.abc import Iterator
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from operator_moduli import linalg
from operator_moduli.errors import ArgumentError
from operator_moduli.fourier import FOURIER_FORMULAS
from operator_moduli.functions import parse_function
from operator_moduli.moduli import ModulusKind, ModulusSpec

logger = logging.getLogger("ConfigLogger")

OUTPUT_DIR_ENV = "OPERATOR_MODULI_OUTPUT_DIR"
SCHEMA_VERSION = 1

Subcommand = Literal[
    "multnorm",
    "fourier-check",
    "lattice-bound",
    "omega",
    "doi-check",
    "search-extremal",
    "holder",
    "mcc-check",
]


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "./results"))


class Tolerances(BaseModel):
    "Per-run overrides of the numeric tolerances in `operator_moduli.linalg`."

    model_config = ConfigDict(extra="forbid", frozen=True)

    membership: float | None = Field(default=None, gt=0)
    normality: float | None = Field(default=None, gt=0)
    cluster: float | None = Field(default=None, ge=0)


class ExperimentConfig(BaseModel):
    """One run of one subcommand.

    Grids are sorted and deduplicated on load; every function id must resolve in the registry.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: Literal[1] = SCHEMA_VERSION
    subcommand: Subcommand

    function: str = "conj"
    kind: ModulusKind = ModulusKind.PLAIN
    support: Literal["disc", "line", "circle", "lattice"] = "disc"
    radius: float = Field(default=1.0, gt=0)

    alpha_grid: list[float] = [0.5, 0.7, 0.9]
    delta_grid: list[float] = [0.125, 0.25, 0.5, 1.0]
    # lattice-bound sweeps r_grid when given, else the single r
    r_grid: list[float] | None = None
    n_grid: list[int] = [-2, -1, 0, 1, 2, 3]
    delta: float = Field(default=1.0, gt=0)
    r: float = Field(default=32.0, gt=0)

    dim: int = Field(default=8, ge=1)
    budget: int = Field(default=64, ge=1)
    iterations: int = Field(default=50, ge=1)
    instances: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0)
    seeds: int = Field(default=1, ge=1)
    tau: float = Field(default=0.5, gt=0, lt=1)

    # multnorm
    pattern: Literal[
        "diagonal", "off_diagonal", "random", "divided_difference", "file"
    ] = "divided_difference"
    matrix_path: Path | None = None

    # fourier-check
    formulas: list[str] = list(FOURIER_FORMULAS)
    grid_half_width: float = Field(default=64.0, gt=0)
    grid_samples: int = Field(default=1024, ge=8)

    # omega
    modulus: str = "power:0.5"

    # holder
    experiment: Literal["ratio", "quasicommutator", "halpha", "hn"] = "ratio"

    output_dir: Path = Field(default_factory=default_output_dir)
    workers: int = Field(default=1, ge=1)
    tolerances: Tolerances = Tolerances()

    @field_validator("function")
    @classmethod
    def _known_function(cls, value: str) -> str:
        try:
            parse_function(value)
        except ArgumentError as e:
            raise ValueError(str(e)) from e
        return value

    @field_validator("modulus")
    @classmethod
    def _known_modulus(cls, value: str) -> str:
        try:
            ModulusSpec.parse(value)
        except ArgumentError as e:
            raise ValueError(str(e)) from e
        return value

    @field_validator("formulas")
    @classmethod
    def _known_formulas(cls, value: list[str]) -> list[str]:
        unknown = sorted(set(value) - set(FOURIER_FORMULAS))
        if unknown or not value:
            raise ValueError(
                f"Unknown Fourier formulas {unknown}; choose from {sorted(FOURIER_FORMULAS)}"
            )
        return value

    @field_validator("delta_grid", "r_grid")
    @classmethod
    def _positive_grid(cls, value: list[float] | None) -> list[float] | None:
        if value is None:
            return None
        if not value or min(value) <= 0:
            raise ValueError("grids must be nonempty and positive")
        return sorted(set(value))

    @field_validator("alpha_grid")
    @classmethod
    def _alpha_grid(cls, value: list[float]) -> list[float]:
        if not value or min(value) <= 0 or max(value) >= 1:
            raise ValueError("alpha values must lie in (0, 1)")
        return sorted(set(value))

    @field_validator("n_grid")
    @classmethod
    def _n_grid(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("n_grid must be nonempty")
        return sorted(set(value))

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if self.pattern == "file" and self.subcommand == "multnorm" and self.matrix_path is None:
            raise ValueError("pattern 'file' needs matrix_path")
        if self.grid_samples & (self.grid_samples - 1):
            raise ValueError(f"grid_samples must be a power of two, got {self.grid_samples}")
        return self

    def canonical_json(self) -> str:
        "Serialized form echoed as config.json; output_dir is left out so reruns elsewhere match."
        return self.model_dump_json(indent=2, exclude={"output_dir"})


def read_config_file(path: Path) -> dict[str, Any]:
    """JSON or YAML (by suffix) into a plain mapping.

    Raises:
        ArgumentError: unreadable file or a document that is not a mapping.
    """
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ArgumentError(f"Cannot read config {path}: {e}") from e
    try:
        if Path(path).suffix.lower() in (".yaml", ".yml"):
            payload = yaml.safe_load(text)
        else:
            payload = json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ArgumentError(f"Malformed config {path}: {e}") from e
    if not isinstance(payload, dict):
        raise ArgumentError(f"Config {path} must hold a mapping, got {type(payload).__name__}")
    return payload


def build_config(
    subcommand: str, file_values: dict[str, Any], overrides: dict[str, Any]
) -> ExperimentConfig:
    "File values first, then explicitly given CLI flags (None means not given)."
    values = dict(file_values)
    if values.get("subcommand", subcommand) != subcommand:
        raise ArgumentError(f"Config file is for {values['subcommand']!r}, not {subcommand!r}")
    values["subcommand"] = subcommand
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.model_validate(values)


@contextlib.contextmanager
def tolerance_overrides(tolerances: Tolerances) -> Iterator[None]:
    "Temporarily replace the module tolerances of `operator_moduli.linalg`."
    names = {
        "membership": "MEMBERSHIP_TOL",
        "normality": "NORMALITY_TOL",
        "cluster": "CLUSTER_TOL",
    }
    saved = {attr: getattr(linalg, attr) for attr in names.values()}
    try:
        for field_name, attr in names.items():
            value = getattr(tolerances, field_name)
            if value is not None:
                logger.info(f"Tolerance {attr} = {value:g}")
                setattr(linalg, attr, value)
        yield
    finally:
        for attr, value in saved.items():
            setattr(linalg, attr, value)
