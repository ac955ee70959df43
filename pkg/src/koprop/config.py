"""Experiment configuration: schema, defaults, strict loading, resolution.

The configuration file is YAML with nested sections.  Unknown keys are
rejected at every level, every default is echoed back into the resolved
dictionary written next to the outputs, and command-line flags override
file values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .basis import BoxDomain, BasisSet
from .dynamics import DuffingParams, SystemModel, duffing_system, harmonic_oscillator
from .errors import ConfigError
from .updf import GaussianPdf

__all__ = ["ExperimentConfig", "load_config", "resolve_config"]


@dataclass
class SystemConfig:
    kind: str = "duffing"
    mass: float = 1.0
    stiffness: float = 1.0
    unit_scale: float = 1.0
    nonlinearity: float = 0.01


@dataclass
class EdmdConfig:
    samples: int = 10_000
    dt: float = 0.1
    seed: int = 2024


@dataclass
class KoopmanConfig:
    source: str = "galerkin"
    edmd: EdmdConfig = field(default_factory=EdmdConfig)


@dataclass
class BasisConfig:
    order: int = 9
    # smallest symmetric box that still covers the prior's 5-sigma set and
    # the 500 s orbits of the sampled ensemble; see notes on map accuracy
    lower: list = field(default_factory=lambda: [-1.22, -1.22])
    upper: list = field(default_factory=lambda: [1.22, 1.22])
    quadrature_points: int | None = None
    density_quadrature_points: int = 80


@dataclass
class PriorConfig:
    mean: list = field(default_factory=lambda: [0.4, 0.6])
    sigma: float = 0.1
    covariance: list | None = None


@dataclass
class ScheduleConfig:
    legs: list = field(default_factory=lambda: [500.0])


@dataclass
class ReductionSettings:
    order: int = 4
    samples: int = 5000
    seed: int = 99
    level_window: float | None = 15.0


@dataclass
class GridConfig:
    points: int = 151
    lower: list = field(default_factory=lambda: [-1.5, -1.5])
    upper: list = field(default_factory=lambda: [1.5, 1.5])


@dataclass
class McConfig:
    samples: int = 100_000
    seed: int = 20_240_811
    max_step: float = 0.05
    bandwidth: float | None = None
    sample_export: int = 5000


@dataclass
class TimesConfig:
    start: float = 0.0
    stop: float = 500.0
    count: int = 101


@dataclass
class OutputConfig:
    directory: str | None = None


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    koopman: KoopmanConfig = field(default_factory=KoopmanConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    reduction: ReductionSettings = field(default_factory=ReductionSettings)
    grid: GridConfig = field(default_factory=GridConfig)
    mc: McConfig = field(default_factory=McConfig)
    times: TimesConfig = field(default_factory=TimesConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- construction of validated domain objects -------------------------

    def build_system(self) -> SystemModel:
        s = self.system
        if s.kind == "duffing":
            return duffing_system(
                DuffingParams(
                    mass=s.mass,
                    stiffness=s.stiffness,
                    unit_scale=s.unit_scale,
                    nonlinearity=s.nonlinearity,
                )
            )
        if s.kind == "harmonic":
            return harmonic_oscillator(mass=s.mass, stiffness=s.stiffness)
        raise ConfigError(f"system.kind must be 'duffing' or 'harmonic', got {s.kind!r}")

    def build_basis(self) -> BasisSet:
        try:
            domain = BoxDomain(self.basis.lower, self.basis.upper)
            return BasisSet.create(domain, self.basis.order)
        except ValueError as exc:
            raise ConfigError(f"basis: {exc}") from exc

    def build_prior(self) -> GaussianPdf:
        p = self.prior
        mean = np.asarray(p.mean, dtype=float)
        if p.covariance is not None:
            cov = np.asarray(p.covariance, dtype=float)
        else:
            if not p.sigma > 0:
                raise ConfigError("prior.sigma must be positive")
            cov = p.sigma**2 * np.eye(mean.size)
        try:
            return GaussianPdf(mean, cov)
        except ValueError as exc:
            raise ConfigError(f"prior: {exc}") from exc

    def grid_axes(self) -> list:
        g = self.grid
        lower = np.asarray(g.lower, dtype=float)
        upper = np.asarray(g.upper, dtype=float)
        if lower.shape != upper.shape or not (lower < upper).all():
            raise ConfigError("grid bounds must be ordered and of equal length")
        if g.points < 4:
            raise ConfigError("grid.points must be at least 4")
        return [np.linspace(lower[j], upper[j], g.points) for j in range(lower.size)]

    def validate(self) -> None:
        """Cross-field checks beyond what the domain objects enforce."""
        system = self.build_system()
        basis = self.build_basis()
        prior = self.build_prior()
        if basis.dimension != system.dimension or prior.dimension != system.dimension:
            raise ConfigError("system, basis, and prior dimensions must agree")
        self.grid_axes()
        if self.koopman.source not in ("galerkin", "edmd"):
            raise ConfigError("koopman.source must be 'galerkin' or 'edmd'")
        if self.koopman.edmd.samples < basis.size:
            raise ConfigError(
                f"koopman.edmd.samples ({self.koopman.edmd.samples}) must cover "
                f"the basis size ({basis.size})"
            )
        if not self.koopman.edmd.dt > 0:
            raise ConfigError("koopman.edmd.dt must be positive")
        if not self.schedule.legs or any(leg < 0 for leg in self.schedule.legs):
            raise ConfigError("schedule.legs must be a non-empty list of durations >= 0")
        if self.reduction.order < 1:
            raise ConfigError("reduction.order must be at least 1")
        if not self.reduction.order < 2 * self.basis.order:
            raise ConfigError(
                "reduction.order must stay below twice the basis order"
            )
        monomials = math.comb(basis.dimension + self.reduction.order, basis.dimension)
        if self.reduction.samples < monomials:
            raise ConfigError(
                f"reduction.samples must cover the monomial count ({monomials})"
            )
        if self.mc.samples < 1000:
            raise ConfigError("mc.samples must be at least 1000")
        if not self.mc.max_step > 0:
            raise ConfigError("mc.max_step must be positive")
        if self.mc.bandwidth is not None and not self.mc.bandwidth > 0:
            raise ConfigError("mc.bandwidth must be positive when given")
        if self.times.count < 1:
            raise ConfigError("times.count must be at least 1")
        if self.times.stop < self.times.start:
            raise ConfigError("times.stop must not precede times.start")


_SECTIONS = {f.name: f.type for f in fields(ExperimentConfig)}


def _fill(instance, data: dict, path: str):
    known = {f.name: f for f in fields(instance)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section {path or 'top level'!r}")
        current = getattr(instance, key)
        if hasattr(current, "__dataclass_fields__"):
            if not isinstance(value, dict):
                raise ConfigError(f"section {path + key!r} must be a mapping")
            _fill(current, value, f"{path}{key}.")
        else:
            setattr(instance, key, value)
    return instance


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Load YAML (or defaults when ``path`` is None), apply CLI overrides,
    and validate.  Raises :class:`ConfigError` for anything malformed."""
    config = ExperimentConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("top level of the config file must be a mapping")
        _fill(config, data, "")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, name = key.split(".")
        target = config
        for part in parents:
            target = getattr(target, part)
        if not hasattr(target, name):
            raise ConfigError(f"unknown override {key!r}")
        setattr(target, name, value)
    try:
        config.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


def resolve_config(config: ExperimentConfig) -> dict:
    """Fully resolved configuration dictionary (no silent defaults)."""

    def as_dict(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {f.name: as_dict(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, (list, tuple)):
            return [as_dict(v) for v in obj]
        if isinstance(obj, np.generic):
            return obj.item()
        return obj

    return as_dict(config)
