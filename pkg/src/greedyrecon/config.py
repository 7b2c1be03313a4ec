"""Experiment configuration: a single JSON document, validated strictly.

Schema (config_version 1): top-level keys are the fields of
ExperimentConfig; ``optim_coeff`` and ``optim_control`` are nested objects
with the fields of OptimConfig.  Unknown keys are rejected on load, and
every constraint of the owning types is re-validated.  Defaults follow the
reference experiment: unit half-width, bounds (-1,-1)..(1,1), couplings
gamma1 = gamma2 = 0.2, no relaxation, stopping tolerance at double
precision epsilon.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .forward import FixedPointConfig
from .greedy import GreedyConfig
from .grid import Grid, NegLaplacian
from .nonlinearity import CLOSED_FORM_KINDS, ClosedForm, MonomialBasis
from .objectives import ControlBox, SolverContext
from .optimize import OptimConfig

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def _default_optim_coeff() -> OptimConfig:
    return OptimConfig(grad_tol=1e-8, restarts=1)


def _default_optim_control() -> OptimConfig:
    return OptimConfig(grad_tol=1e-6, max_iters=80, restarts=1)


@dataclass
class ExperimentConfig:
    n: int = 64
    x_max: float = 1.0
    degree: int = 2
    truth: str = "bilinear"
    gamma1: float = 0.2
    gamma2: float = 0.2
    eps_a: tuple = (-1.0, -1.0)
    eps_b: tuple = (1.0, 1.0)
    alpha_max: float = 1.0
    nu: float = 1e-6
    tol1: float = float(np.finfo(float).eps)
    tol2: float = 1e-10
    lambda_a: float = 0.0
    ell_max: int = 200
    regularizer_sign: int = 1
    seed: int = 0
    threads: int = 1
    error_lattice_m: int = 101
    output_dir: str = "runs/out"
    optim_coeff: OptimConfig = field(default_factory=_default_optim_coeff)
    optim_control: OptimConfig = field(default_factory=_default_optim_control)

    def __post_init__(self):
        self.validate()

    def validate(self):
        # constructing the owning types re-checks their invariants
        try:
            Grid(self.n, self.x_max)
            MonomialBasis(self.degree)
            ControlBox(tuple(self.eps_a), tuple(self.eps_b))
            FixedPointConfig(self.lambda_a, self.tol2, self.ell_max)
            if self.truth not in CLOSED_FORM_KINDS:
                raise ValueError(f"unknown truth kind {self.truth!r}")
            if not (self.gamma1 >= self.gamma2 > 0):
                raise ValueError("need gamma1 >= gamma2 > 0")
            if self.alpha_max < 0 or self.nu < 0 or self.tol1 <= 0:
                raise ValueError("alpha_max, nu must be >= 0 and tol1 > 0")
            if self.regularizer_sign not in (1, -1):
                raise ValueError("regularizer_sign must be +1 or -1")
            if self.seed < 0 or self.threads < 1:
                raise ValueError("seed must be >= 0 and threads >= 1")
            if self.error_lattice_m < 2:
                raise ValueError("error_lattice_m must be >= 2")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {"config_version": CONFIG_VERSION}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, OptimConfig):
                out[f.name] = dataclasses.asdict(value)
            elif isinstance(value, tuple):
                out[f.name] = list(value)
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config_version {version}")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        optim_known = {f.name for f in fields(OptimConfig)}
        for key, value in data.items():
            if key in ("optim_coeff", "optim_control"):
                if not isinstance(value, dict):
                    raise ConfigError(f"{key} must be an object")
                bad = set(value) - optim_known
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
                base = dataclasses.asdict(
                    _default_optim_coeff() if key == "optim_coeff"
                    else _default_optim_control()
                )
                base.update(value)
                try:
                    kwargs[key] = OptimConfig(**base)
                except ValueError as exc:
                    raise ConfigError(f"{key}: {exc}") from exc
            elif key in ("eps_a", "eps_b"):
                kwargs[key] = tuple(float(v) for v in value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"malformed config file: {exc}") from exc
        return cls.from_dict(data)


def build_context(cfg: ExperimentConfig) -> SolverContext:
    grid = Grid(cfg.n, cfg.x_max)
    return SolverContext(
        op=NegLaplacian(grid),
        basis=MonomialBasis(cfg.degree),
        gamma1=cfg.gamma1,
        gamma2=cfg.gamma2,
        fp=FixedPointConfig(cfg.lambda_a, cfg.tol2, cfg.ell_max),
    )


def greedy_config(cfg: ExperimentConfig) -> GreedyConfig:
    return GreedyConfig(
        box=ControlBox(cfg.eps_a, cfg.eps_b),
        fp=FixedPointConfig(cfg.lambda_a, cfg.tol2, cfg.ell_max),
        optim_coeff=cfg.optim_coeff,
        optim_control=cfg.optim_control,
        tol1=cfg.tol1,
        nu=cfg.nu,
        alpha_max=cfg.alpha_max,
        reg_sign=cfg.regularizer_sign,
        seed=cfg.seed,
        threads=cfg.threads,
    )


def truth_nonlinearity(cfg: ExperimentConfig, kind: str | None = None) -> ClosedForm:
    return ClosedForm(cfg.gamma1, cfg.gamma2, kind=kind or cfg.truth)
