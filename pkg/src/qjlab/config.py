"""Experiment configuration: YAML in, validated model out, stable hash for provenance.

Unknown keys are rejected everywhere so a typo'd coupling can never silently
run with its default. The schema is versioned; bump schema_version on any
breaking layout change.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import classical as _classical
from . import models as _models
from .hilbert import chain_sz_values, random_state
from .trajectory import INITIAL_STATE_STREAM, TrajectoryConfig, trajectory_rng

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Configuration rejected, with the offending field path in the message."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TopModelConfig(_Strict):
    kind: Literal["top"] = "top"
    s: float = Field(gt=0)
    omega_z: float = 0.0
    g: float = 0.0
    omega_x: float = 0.0
    k: float = 0.0
    tau: float | None = None
    gamma: float = Field(default=0.0, ge=0)


class ChainModelConfig(_Strict):
    kind: Literal["chain"] = "chain"
    variant: Literal["A", "B", "C", "D"]
    L: int = Field(ge=2)
    J1: float = 0.0
    J2: float = 0.0
    Delta: float = 0.0
    gamma0: float = Field(default=0.0, ge=0)
    gamma1: float = Field(default=0.0, ge=0)
    gamma2: float = Field(default=0.0, ge=0)
    gamma3: float = Field(default=0.0, ge=0)
    bond_convention: Literal["half-amplitude", "half-rate"] = "half-amplitude"


ModelConfig = Union[TopModelConfig, ChainModelConfig]


class InitialStateConfig(_Strict):
    kind: Literal["haar", "haar_fixed_sz", "basis"] = "haar"
    sz: float | None = None
    index: int | None = None

    @model_validator(mode="after")
    def _required_fields(self) -> "InitialStateConfig":
        if self.kind == "haar_fixed_sz" and self.sz is None:
            raise ValueError("haar_fixed_sz needs the target sz")
        if self.kind == "basis" and self.index is None:
            raise ValueError("basis initial state needs an index")
        return self


class TrajectoryBlock(_Strict):
    dt: float = Field(gt=0)
    horizon: float = Field(gt=0)
    stride: int = Field(default=1, ge=1)
    n_trajectories: int = Field(ge=1)
    seed: int = 0
    initial_state: InitialStateConfig = InitialStateConfig()


class AnalysisBlock(_Strict):
    times: list[float] | None = None
    window_start: float | None = None
    window_end: float | None = None
    cutoff_fraction: float = Field(default=0.9, gt=0, le=1)
    n_list: list[int] | None = None
    delta_t: list[float] | None = None
    pareto_residual_threshold: float = Field(default=0.3, gt=0)

    @model_validator(mode="after")
    def _window_ordered(self) -> "AnalysisBlock":
        if (self.window_start is None) != (self.window_end is None):
            raise ValueError("window_start and window_end must be given together")
        if self.window_start is not None and not self.window_start < self.window_end:
            raise ValueError("window_start must precede window_end")
        return self


Shift = Union[float, tuple[float, float]]


class UnravelingBlock(_Strict):
    """Jump-operator gauge: a common shift or per-channel shifts, plus offset.

    Shifts are real numbers or [re, im] pairs; they apply to the folded
    operators and leave every ensemble average untouched.
    """

    shift: Shift | None = None
    shifts: list[Shift] | None = None
    energy_offset: float = 0.0

    @model_validator(mode="after")
    def _one_of(self) -> "UnravelingBlock":
        if self.shift is not None and self.shifts is not None:
            raise ValueError("give either shift (common) or shifts (per channel), not both")
        return self


class SweepBlock(_Strict):
    parameter: str
    values: list[float] = Field(min_length=1)


class SpectrumBlock(_Strict):
    sectors: Literal["auto", "whole", "split"] = "auto"
    ratio_convention: Literal["nn_over_nnn", "nnn_over_nn"] = "nn_over_nnn"
    reference: Literal["poisson2d", "ginibre"] = "ginibre"
    bins: int = Field(default=40, ge=4)
    dim_cap: int = Field(default=5000, ge=2)
    use_floquet: bool | None = None


class ClassicalBlock(_Strict):
    params: dict[str, float] = Field(default_factory=dict)
    dt: float = Field(gt=0)
    horizon: float = Field(gt=0)
    record_stride: int = Field(default=1, ge=1)
    initial_conditions: list[tuple[float, float, float]] | None = None
    n_random: int | None = Field(default=None, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _have_ics(self) -> "ClassicalBlock":
        if not self.initial_conditions and not self.n_random:
            raise ValueError("need initial_conditions or n_random")
        allowed = {"omega_z", "g", "omega_x", "gamma", "k", "tau"}
        unknown = set(self.params) - allowed
        if unknown:
            raise ValueError(f"unknown classical parameters {sorted(unknown)}")
        return self


class OracleBlock(_Strict):
    times: list[float] = Field(min_length=1)
    observables: list[str] | None = None
    z_threshold: float = Field(default=4.0, gt=0)


class ExperimentConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    model: ModelConfig = Field(discriminator="kind")
    trajectory: TrajectoryBlock | None = None
    analysis: AnalysisBlock | None = None
    unraveling: UnravelingBlock | None = None
    sweep: SweepBlock | None = None
    spectrum: SpectrumBlock | None = None
    classical: ClassicalBlock | None = None
    oracle: OracleBlock | None = None


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(raw, source=str(path))


def parse_config(raw: dict, source: str = "<dict>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [
            ".".join(str(p) for p in err["loc"]) + ": " + err["msg"] for err in exc.errors()
        ]
        raise ConfigError(f"{source}: " + "; ".join(lines)) from exc


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical YAML: sorted keys, defaults and Nones dropped on round trip."""
    data = cfg.model_dump(mode="json", exclude_none=True)
    return yaml.safe_dump(data, sort_keys=True)


def config_hash(cfg: ExperimentConfig) -> str:
    data = cfg.model_dump(mode="json", exclude_none=True)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# builders

def build_model(cfg: ExperimentConfig) -> _models.LindbladModel:
    """Base Lindblad model (no unraveling gauge applied)."""
    m = cfg.model
    try:
        if m.kind == "top":
            return _models.quantum_top_model(
                s=m.s, omega_z=m.omega_z, g=m.g, omega_x=m.omega_x,
                k=m.k, tau=m.tau, gamma=m.gamma,
            )
        return _models.chain_model(
            variant=m.variant, L=m.L, J1=m.J1, J2=m.J2, Delta=m.Delta,
            gamma0=m.gamma0, gamma1=m.gamma1, gamma2=m.gamma2, gamma3=m.gamma3,
            bond_convention=m.bond_convention,
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def _as_complex(shift: Shift) -> complex:
    if isinstance(shift, (tuple, list)):
        return complex(shift[0], shift[1])
    return complex(shift)


def resolve_gauge(
    cfg: ExperimentConfig, n_channels: int
) -> _models.UnravelingGauge | None:
    u = cfg.unraveling
    if u is None:
        return None
    if u.shifts is not None:
        if len(u.shifts) != n_channels:
            raise ConfigError(
                f"unraveling.shifts: got {len(u.shifts)} entries for {n_channels} channels"
            )
        shifts = tuple(_as_complex(s) for s in u.shifts)
    else:
        common = _as_complex(u.shift) if u.shift is not None else 0.0
        shifts = (common,) * n_channels
    return _models.UnravelingGauge(shifts=shifts, energy_offset=u.energy_offset)


def build_unraveled_model(cfg: ExperimentConfig) -> _models.LindbladModel:
    """Model with the unraveling gauge folded in, ready for the jump engine."""
    model = build_model(cfg)
    gauge = resolve_gauge(cfg, model.n_channels)
    if gauge is None:
        return model
    return _models.gauge_transform(model, gauge)


def build_initial_state(cfg: ExperimentConfig, dim: int) -> np.ndarray:
    """Initial state on the reserved RNG stream, fixed across the ensemble."""
    if cfg.trajectory is None:
        raise ConfigError("trajectory block required to build an initial state")
    spec = cfg.trajectory.initial_state
    rng = trajectory_rng(cfg.trajectory.seed, INITIAL_STATE_STREAM)
    if spec.kind == "haar":
        return random_state(dim, rng)
    if spec.kind == "haar_fixed_sz":
        if cfg.model.kind != "chain":
            raise ConfigError("initial_state: haar_fixed_sz applies to chain models only")
        sz = chain_sz_values(cfg.model.L)
        support = np.flatnonzero(np.abs(sz - spec.sz) < 1e-9)
        if support.size == 0:
            raise ConfigError(f"initial_state: no basis states with sz={spec.sz}")
        return random_state(dim, rng, support=support)
    if not 0 <= spec.index < dim:
        raise ConfigError(f"initial_state: basis index {spec.index} outside [0, {dim})")
    psi = np.zeros(dim, dtype=complex)
    psi[spec.index] = 1.0
    return psi


def build_trajectory_config(cfg: ExperimentConfig, seed: int | None = None) -> TrajectoryConfig:
    if cfg.trajectory is None:
        raise ConfigError("trajectory block missing")
    t = cfg.trajectory
    return TrajectoryConfig(
        dt=t.dt,
        horizon=t.horizon,
        snapshot_stride=t.stride,
        seed=t.seed if seed is None else seed,
    )


def build_classical_params(cfg: ExperimentConfig) -> _classical.ClassicalParams:
    if cfg.classical is None:
        raise ConfigError("classical block missing")
    return _classical.ClassicalParams(**cfg.classical.params)


_SWEEPABLE = {
    "model.omega_x", "model.k", "model.g", "model.omega_z", "model.gamma",
    "model.J1", "model.J2", "model.Delta",
    "model.gamma0", "model.gamma1", "model.gamma2", "model.gamma3",
    "unraveling.shift", "unraveling.energy_offset",
}


def sweep_configs(cfg: ExperimentConfig) -> list[tuple[float, ExperimentConfig]]:
    """Expand the sweep block into (value, config) points; identity if absent."""
    if cfg.sweep is None:
        return [(float("nan"), cfg)]
    param = cfg.sweep.parameter
    if param not in _SWEEPABLE:
        raise ConfigError(f"sweep.parameter: {param!r} is not sweepable ({sorted(_SWEEPABLE)})")
    block_name, field = param.split(".", 1)
    out = []
    for value in cfg.sweep.values:
        data = cfg.model_dump(mode="json", exclude_none=True)
        data.pop("sweep", None)
        block = data.get(block_name)
        if block is None:
            if block_name != "unraveling":
                raise ConfigError(f"sweep.parameter: config has no {block_name} block")
            block = data["unraveling"] = {}
        block[field] = value
        # variant D constrains the hopping rates to be equal; sweep them together
        if param == "model.gamma2" and block.get("variant") == "D":
            block["gamma3"] = value
        out.append((value, parse_config(data, source=f"sweep {param}={value}")))
    return out
