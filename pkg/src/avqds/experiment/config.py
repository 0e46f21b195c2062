"""Declarative experiment configuration.

Configs are JSON (YAML is accepted as a superset) and are validated in full,
with unknown keys rejected, before any computation starts.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..driver import AvqdsConfig
from ..models import (
    ConstantSchedule,
    lsm_hamiltonian,
    mfim_hamiltonian,
    schedule_lsm_ramp,
    schedule_quench,
)
from ..observables import Observable, ObservableSet

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "apply_overrides",
    "format_validation_error",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


# -- model ---------------------------------------------------------------


class LsmModel(_Strict):
    kind: Literal["lsm"]
    n: int = Field(ge=2)
    h_z: float
    J: float = 1.0
    gamma: float = 0.0  # only used by constant and quench schedules


class IsingModel(_Strict):
    kind: Literal["tfim", "mfim"]
    n: int = Field(ge=2)
    J: float = 1.0
    h_x: float
    h_z: float = 0.0
    periodic: bool = True

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "tfim" and self.h_z != 0.0:
            raise ValueError("tfim has no longitudinal field; use kind 'mfim'")
        if self.periodic and self.n < 3:
            raise ValueError("periodic chains need n >= 3")
        return self


ModelBlock = Annotated[Union[LsmModel, IsingModel], Field(discriminator="kind")]


# -- schedule ------------------------------------------------------------


class RampSchedule(_Strict):
    kind: Literal["lsm_linear_ramp"]
    T: float = Field(gt=0)


class QuenchSchedule(_Strict):
    kind: Literal["sudden_quench"]
    # model parameters that differ before the quench, e.g. {"h_x": 0, "h_z": 0}
    pre: dict[str, float]


class ConstSchedule(_Strict):
    kind: Literal["constant"]


ScheduleBlock = Annotated[
    Union[RampSchedule, QuenchSchedule, ConstSchedule], Field(discriminator="kind")
]


# -- method --------------------------------------------------------------


class AvqdsMethod(_Strict):
    kind: Literal["avqds"]
    l2_cut: float = Field(1e-3, gt=0)
    xi: float = Field(1e-6, gt=0)
    dtheta_max: float = Field(5e-3, gt=0)
    dt_max: float | None = Field(None, gt=0)
    max_adds_per_step: int | None = Field(None, ge=1)
    improvement_floor: float = Field(1e-8, gt=0)
    pool: Literal["hamiltonian", "two_local"] = "hamiltonian"
    dt_exact: float = Field(5e-4, gt=0)  # reference grid for fidelity observables

    def driver_config(self) -> AvqdsConfig:
        return AvqdsConfig(
            l2_cut=self.l2_cut, xi=self.xi, dtheta_max=self.dtheta_max, dt_max=self.dt_max,
            max_adds_per_step=self.max_adds_per_step, improvement_floor=self.improvement_floor,
        )


class TrotterMethod(_Strict):
    kind: Literal["trotter"]
    dt: float = Field(5e-3, gt=0)
    dt_exact: float = Field(5e-4, gt=0)


class ExactMethod(_Strict):
    kind: Literal["exact"]
    dt: float = Field(5e-4, gt=0)


MethodBlock = Annotated[
    Union[AvqdsMethod, TrotterMethod, ExactMethod], Field(discriminator="kind")
]


# -- initial state -------------------------------------------------------


class ProductInit(_Strict):
    kind: Literal["product"]
    bits: list[Literal[0, 1]] | None = None  # default: all spins up (|0...0>)


class DenseGroundInit(_Strict):
    kind: Literal["dense_ground"]


class AdaptVqeInit(_Strict):
    kind: Literal["adapt_vqe"]
    bits: list[Literal[0, 1]] | None = None
    pool: Literal["two_local", "hamiltonian"] = "two_local"
    grad_tol: float = Field(1e-3, gt=0)
    energy_tol: float = Field(1e-8, gt=0)
    max_operators: int = Field(100, ge=1)


class AnsatzFileInit(_Strict):
    kind: Literal["ansatz_file"]
    path: str


InitBlock = Annotated[
    Union[ProductInit, DenseGroundInit, AdaptVqeInit, AnsatzFileInit],
    Field(discriminator="kind"),
]


# -- observables and output -------------------------------------------------


class ObservableSpec(_Strict):
    name: str
    kind: Literal["energy", "pauli_correlator", "loschmidt", "fidelity", "infidelity"]
    axis: Literal["x", "y", "z"] | None = None
    sites: tuple[int, int] | None = None
    scale: float = 1.0


EXTRA_COLUMNS = ("n_theta", "n_cx", "L2", "dt")
AVAILABLE_COLUMNS = {
    "avqds": set(EXTRA_COLUMNS),
    "trotter": {"n_cx", "dt"},
    "exact": {"dt"},
}


class OutputBlock(_Strict):
    directory: str = "runs/out"
    # None selects every column the method provides
    columns: list[Literal["n_theta", "n_cx", "L2", "dt"]] | None = None
    snapshot_times: list[float] = []
    save_state: bool = True


class SweepBlock(_Strict):
    grid: dict[str, list[Any]]
    cut_times: list[float] = []
    fit_variable: str = "model.n"
    fit_columns: list[str] = ["n_theta", "n_two_qubit", "n_cx"]


class ExperimentConfig(_Strict):
    model: ModelBlock
    schedule: ScheduleBlock
    method: MethodBlock
    t_final: float = Field(gt=0)
    initial_state: InitBlock = ProductInit(kind="product")
    observables: list[ObservableSpec] = []
    output: OutputBlock = OutputBlock()
    sweep: SweepBlock | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.schedule.kind == "lsm_linear_ramp" and self.model.kind != "lsm":
            raise ValueError("lsm_linear_ramp schedules need an lsm model")
        if self.schedule.kind == "sudden_quench":
            allowed = set(type(self.model).model_fields) - {"kind", "n", "periodic"}
            bad = set(self.schedule.pre) - allowed
            if bad:
                raise ValueError(f"schedule.pre has unknown parameters {sorted(bad)}")
        if isinstance(self.initial_state, (ProductInit, AdaptVqeInit)):
            bits = self.initial_state.bits
            if bits is not None and len(bits) != self.model.n:
                raise ValueError("initial_state.bits must have one entry per site")
        self.observable_set()  # name uniqueness and site ranges
        if self.output.columns is not None:
            missing = set(self.output.columns) - AVAILABLE_COLUMNS[self.method.kind]
            if missing:
                raise ValueError(
                    f"{self.method.kind} runs do not provide columns {sorted(missing)}"
                )
        return self

    # -- builders ------------------------------------------------------

    @property
    def n_qubits(self) -> int:
        return self.model.n

    def columns(self) -> list[str]:
        """Output columns after defaults for the method are applied."""
        available = AVAILABLE_COLUMNS[self.method.kind]
        cols = [c for c in (self.output.columns or EXTRA_COLUMNS) if c in available]
        return ["t"] + [o.name for o in self.observables] + cols

    def hamiltonian(self, **overrides):
        p = self.model.model_dump() | overrides
        if p["kind"] == "lsm":
            return lsm_hamiltonian(p["n"], p["gamma"], p["h_z"], p["J"])
        return mfim_hamiltonian(p["n"], p["J"], p["h_x"], p["h_z"], p["periodic"])

    def schedule_obj(self):
        s = self.schedule
        if s.kind == "lsm_linear_ramp":
            return schedule_lsm_ramp(self.model.n, s.T, self.model.h_z, self.model.J)
        if s.kind == "sudden_quench":
            return schedule_quench(self.hamiltonian(**s.pre), self.hamiltonian())
        return ConstantSchedule(self.hamiltonian())

    def observable_set(self) -> ObservableSet:
        obs = [Observable(o.name, o.kind, o.axis, o.sites, o.scale) for o in self.observables]
        return ObservableSet(obs, self.model.n)


def _walk_loc(data: Any, loc: tuple) -> list[str]:
    """Key path of a pydantic error location, without discriminator tags."""
    path, node = [], data
    for part in loc:
        if isinstance(node, dict) and part not in node and node.get("kind") == part:
            continue  # union tag inserted by pydantic
        path.append(str(part))
        if isinstance(node, dict):
            node = node.get(part)
        elif isinstance(node, list) and isinstance(part, int) and part < len(node):
            node = node[part]
        else:
            node = None
    return path


def format_validation_error(err: ValidationError, data: Any) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(_walk_loc(data, e["loc"])) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def validate_config(data: Any) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(format_validation_error(err, data)) from None


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` assignments; values are parsed as JSON when possible."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        set_path(data, key, _parse_value(value))
    return data


def set_path(data: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: {part} is not a mapping")
    node[parts[-1]] = value


def get_path(data: dict, dotted: str) -> Any:
    node = data
    for part in dotted.split("."):
        node = node[part]
    return node


RECIPE_DIR = Path(__file__).parent / "recipes"


def resolve_config_path(name: str) -> Path:
    """A filesystem path, or the name of a bundled recipe."""
    path = Path(name)
    if path.exists():
        return path
    recipe = RECIPE_DIR / f"{name.removesuffix('.json')}.json"
    if recipe.exists():
        return recipe
    raise ConfigError(f"config {name!r} not found (and no bundled recipe of that name)")


def read_config_data(path: Path) -> dict:
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}: not valid JSON or YAML ({err})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_config(name: str, overrides: list[str] = ()) -> tuple[ExperimentConfig, Path]:
    """Read, override and validate a config; returns it with its source path."""
    path = resolve_config_path(name)
    data = apply_overrides(read_config_data(path), list(overrides))
    cfg = validate_config(data)
    if isinstance(cfg.initial_state, AnsatzFileInit):
        p = Path(cfg.initial_state.path)
        if not p.is_absolute():
            p = (path.parent / p).resolve()
        init = cfg.initial_state.model_copy(update={"path": str(p)})
        cfg = cfg.model_copy(update={"initial_state": init})
    return cfg, path
