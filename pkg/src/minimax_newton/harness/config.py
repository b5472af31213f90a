"""Experiment configuration: a JSON document validated by pydantic models.

Example document::

    {
      "schema_version": 1,
      "problem": {"name": "synthetic_quartic"},
      "solver": {"algorithm": "CN"},
      "init": {"x0": [0.02, 0.04], "y0": [0.03, 0.05]},
      "run": {"max_iter": 10, "dist_tol": 1e-8}
    }
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ArgumentError, ConfigError
from ..oracle import CgBudget
from ..problems import PROBLEMS
from ..solvers import Algorithm, Mode, SolverSpec

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "ProblemConfig",
    "CgConfig",
    "SolverConfig",
    "InitConfig",
    "RunConfig",
    "OutputConfig",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "dump_config",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemConfig(_Strict):
    name: str
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(0, ge=0)

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        if v not in PROBLEMS:
            raise ValueError(f"unknown problem {v!r}; expected one of {sorted(PROBLEMS)}")
        return v


class CgConfig(_Strict):
    max_iter_x: int = Field(32, ge=1)
    max_iter_y: int = Field(32, ge=1)
    tol: float = Field(0.0, ge=0)


class SolverConfig(_Strict):
    algorithm: Algorithm
    mode: Optional[Mode] = None
    alpha_L: float = Field(0.0, ge=0)
    alpha_F: float = Field(0.0, ge=0)
    k: int = Field(1, ge=1)
    beta: float = Field(0.0, ge=0, lt=1)
    gamma_x: float = Field(1.0, gt=0, le=1)
    gamma_y: float = Field(1.0, gt=0, le=1)
    lambda_x: float = Field(0.0, ge=0)
    lambda_y: float = Field(0.0, ge=0)
    cg: CgConfig = Field(default_factory=CgConfig)

    @model_validator(mode="after")
    def _requirements(self):
        self.to_spec()
        return self

    def to_spec(self) -> SolverSpec:
        try:
            return SolverSpec(
                algorithm=self.algorithm,
                mode=self.mode,
                alpha_L=self.alpha_L,
                alpha_F=self.alpha_F,
                k=self.k,
                beta=self.beta,
                gamma_x=self.gamma_x,
                gamma_y=self.gamma_y,
                lambda_x=self.lambda_x,
                lambda_y=self.lambda_y,
                budget=CgBudget(self.cg.max_iter_x, self.cg.max_iter_y, self.cg.tol),
            )
        except ArgumentError as exc:
            raise ValueError(str(exc)) from None


class InitConfig(_Strict):
    """Explicit start vectors (missing ones default to zeros) or a seeded
    zero-mean Gaussian with standard deviation ``stddev``."""

    mode: Literal["explicit", "seeded_gaussian"] = "explicit"
    x0: Optional[list[float]] = None
    y0: Optional[list[float]] = None
    stddev: float = Field(0.1, gt=0)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _consistent(self):
        if self.mode == "seeded_gaussian" and (self.x0 is not None or self.y0 is not None):
            raise ValueError("x0/y0 are only allowed with mode 'explicit'")
        return self


class RunConfig(_Strict):
    max_iter: int = Field(100, ge=0)
    grad_tol: Optional[float] = Field(None, ge=0)
    dist_tol: Optional[float] = Field(None, ge=0)


class OutputConfig(_Strict):
    """Output locations and formatting.

    ``float_precision`` of ``None`` writes CSV floats in shortest round-trip
    form; an integer ``p`` writes ``p`` significant digits instead.  Wall
    time is left blank unless ``record_wall_time`` is set, which keeps
    traces byte-identical between runs.
    """

    trace_path: str = "trace.csv"
    report_path: str = "report.json"
    float_precision: Optional[int] = Field(None, ge=1, le=17)
    record_wall_time: bool = False
    rate_burn_in: int = Field(5, ge=0)
    rate_tolerance: float = Field(0.02, gt=0)


class ExperimentConfig(_Strict):
    schema_version: Literal[1]
    name: Optional[str] = None
    problem: ProblemConfig
    solver: SolverConfig
    init: InitConfig = Field(default_factory=InitConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        out.append(f"{path}: {msg}")
    return out


def parse_config(document: Union[dict, str]) -> ExperimentConfig:
    """Validate a config given as a dict or JSON text.

    Raises :class:`ConfigError` whose ``problems`` list every violation as
    ``"<dotted.path>: <message>"``.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", [f"<root>: {exc}"]) from None
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object", ["<root>: not an object"])
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as exc:
        problems = _format_errors(exc)
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems), problems) from None


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", [f"<file>: {exc}"]) from None
    return parse_config(text)


def dump_config(config: ExperimentConfig) -> str:
    """Canonical JSON text; ``parse_config(dump_config(c)) == c``."""
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
