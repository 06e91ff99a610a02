"""Validated run configurations for the command-line interface.

A configuration is one TOML or JSON document. Top-level keys are
``subcommand``, ``seed``, ``model``, ``grid`` and one section named after
the subcommand (with ``-`` replaced by ``_``). Unknown keys are rejected
everywhere.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DomainError

SUBCOMMANDS = ("kernel-check", "simulate", "holder", "density", "capacity", "hausdorff", "hitting")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelConfig(_Strict):
    alpha: float = Field(gt=1.0, le=2.0)
    d: int = Field(default=1, ge=1, le=8)
    preset: Literal["additive", "bounded-smooth", "drift-only", "zero"] = "additive"
    coupling: Literal["walsh", "exact"] = "walsh"


class GridConfig(_Strict):
    T: float = Field(gt=0)
    L: float = Field(gt=0)
    nt: int = Field(ge=4)
    nx: int = Field(ge=4)
    tail_tol: float = Field(default=0.05, gt=0, le=1)


class KernelCheckConfig(_Strict):
    alphas: list[float] = [1.2, 1.5, 1.8, 2.0]
    tolerance: float = Field(default=1e-6, gt=0)

    @field_validator("alphas")
    @classmethod
    def _alphas(cls, v):
        if not v:
            raise ValueError("alpha list must not be empty")
        for a in v:
            if not (1.0 < a <= 2.0):
                raise ValueError(f"alpha must lie in (1, 2], got {a}")
        return v


class SimulateConfig(_Strict):
    n_samples: int = Field(default=1, ge=1)
    record: Literal["final", "all"] = "final"
    snapshots: bool = False


class HolderConfig(_Strict):
    n_samples: int = Field(default=16, ge=1)
    directions: list[Literal["time", "space"]] = ["time", "space"]
    p: float = Field(default=2.0, gt=0)
    time_nodes: int = Field(default=128, ge=1, description="space nodes recorded for the time fit")
    time_min_cells: int = Field(default=4, ge=1)
    space_samples: int = Field(default=200, ge=1)
    space_grid: Optional[GridConfig] = None
    space_min_cells: int = Field(default=16, ge=1)
    tolerance: float = Field(default=0.05, gt=0)


class PairConfig(_Strict):
    s: float = Field(gt=0)
    y: float = 0.0
    t: float = Field(gt=0)
    x: float = 0.0


class DensityConfig(_Strict):
    kind: Literal["one-point", "pair-exact"] = "one-point"
    n_samples: int = Field(default=10_000, ge=1000)
    x: float = 0.0
    pairs: list[PairConfig] = []
    z_points: int = Field(default=50, ge=5)
    poly_p: float = Field(default=2.0, gt=0)
    tolerance: float = Field(default=0.05, gt=0)


class BoxConfig(_Strict):
    lo: list[float]
    hi: list[float]


class TargetConfig(_Strict):
    d: int = Field(ge=1)
    boxes: list[BoxConfig] = []
    points: list[list[float]] = []
    point_mesh: float = Field(default=0.0, ge=0)
    M: Optional[float] = None


class CapacityConfig(_Strict):
    target: TargetConfig
    beta: float
    mesh: float = Field(gt=0)
    tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=100_000, ge=1)


class HausdorffConfig(_Strict):
    target: TargetConfig
    beta: float
    eps: list[float] = Field(min_length=1)

    @field_validator("eps")
    @classmethod
    def _eps(cls, v):
        if any(e <= 0 for e in v):
            raise ValueError("eps values must be positive")
        return v


class WindowConfig(_Strict):
    I: tuple[float, float]
    J: tuple[float, float]
    mode: Literal["space-time", "fixed-time", "fixed-space"] = "space-time"


class SmallBallConfig(_Strict):
    z: list[float]
    levels: list[int] = Field(min_length=3)
    n_samples: int = Field(default=2000, ge=100)
    eta_report: float = Field(default=0.2, ge=0)
    t_center: float = Field(default=0.5, gt=0)
    x_center: float = 0.0


class HittingConfig(_Strict):
    window: WindowConfig
    targets: list[TargetConfig] = Field(min_length=1)
    n_samples: int = Field(default=2000, ge=100)
    delta: Optional[float] = Field(default=None, ge=0)
    capacity_mesh: Optional[float] = Field(default=None, gt=0)
    hausdorff_eps: float = Field(default=0.05, gt=0)
    small_ball: Optional[SmallBallConfig] = None


_SECTION = {
    "kernel-check": ("kernel_check", KernelCheckConfig),
    "simulate": ("simulate", SimulateConfig),
    "holder": ("holder", HolderConfig),
    "density": ("density", DensityConfig),
    "capacity": ("capacity", CapacityConfig),
    "hausdorff": ("hausdorff", HausdorffConfig),
    "hitting": ("hitting", HittingConfig),
}
_NEEDS_MODEL = {"simulate", "holder", "density", "hitting"}


class RunConfig(_Strict):
    """One experiment: subcommand, model, grid, seed policy and experiment section."""

    subcommand: Literal["kernel-check", "simulate", "holder", "density", "capacity", "hausdorff", "hitting"]
    seed: int = Field(default=0, ge=0)
    model: Optional[ModelConfig] = None
    grid: Optional[GridConfig] = None
    kernel_check: Optional[KernelCheckConfig] = None
    simulate: Optional[SimulateConfig] = None
    holder: Optional[HolderConfig] = None
    density: Optional[DensityConfig] = None
    capacity: Optional[CapacityConfig] = None
    hausdorff: Optional[HausdorffConfig] = None
    hitting: Optional[HittingConfig] = None

    @model_validator(mode="after")
    def _consistent(self):
        name, cls = _SECTION[self.subcommand]
        for other, _ in _SECTION.values():
            if other != name and getattr(self, other) is not None:
                raise ValueError(f"section [{other}] does not belong to subcommand {self.subcommand!r}")
        if getattr(self, name) is None:
            try:
                object.__setattr__(self, name, cls())
            except ValidationError as err:
                raise ValueError(f"section [{name}] is required: {err}") from None
        needs_model = self.subcommand in _NEEDS_MODEL and not (
            self.subcommand == "density" and self.section.kind == "pair-exact")
        if needs_model and (self.model is None or self.grid is None):
            raise ValueError(f"subcommand {self.subcommand!r} needs [model] and [grid]")
        return self

    @property
    def section(self):
        return getattr(self, _SECTION[self.subcommand][0])

    def canonical_json(self) -> str:
        """Sorted, compact JSON of the fully resolved configuration."""
        return json.dumps(self.model_dump(mode="json", exclude_none=True), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        doc = self.model_dump(mode="json", exclude_none=True)
        for key, val in kw.items():
            if val is None:
                continue
            if "." in key:
                sec, field = key.split(".", 1)
                doc.setdefault(sec, {})[field] = val
            else:
                doc[key] = val
        return parse_config(doc)


def parse_config(doc: dict) -> RunConfig:
    """Validate a configuration mapping; raises ``DomainError`` with the pydantic report."""
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as err:
        raise DomainError(f"invalid configuration:\n{err}") from None


def load_config(path) -> RunConfig:
    """Read a ``.toml`` or ``.json`` configuration file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as err:
            raise DomainError(f"{path}: {err}") from None
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise DomainError(f"{path}: {err}") from None
    return parse_config(doc)
