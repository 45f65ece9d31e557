from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import Any, Dict, List, Optional, Tuple
import json
import os

from src.core.errors import ConfigError, LifespanError

MODES = ("fixed", "moving", "sphere", "verify")
GEOMETRIES = ("FlatBox", "PolarDisk")
MOTIONS = ("Stationary", "ShrinkingCircle", "PrescribedPoint1D")
RECIPES = ("constant-pair", "smooth-random", "user-file")


@dataclass
class StepConfig:
    max_iters: int = 5000
    tol_grad: float = 1e-8
    initial_step: Optional[float] = None  # None means initial_step_factor * h
    initial_step_factor: float = 0.5
    backtrack: float = 0.5
    armijo: float = 1e-4
    optimism: float = 2.0
    max_halvings: int = 60
    reorthogonalize_every: int = 50

    def first_step(self, h: float) -> float:
        return self.initial_step if self.initial_step is not None else self.initial_step_factor * h

    def validate(self, prefix: str = "stepper") -> None:
        _positive(self.max_iters, f"{prefix}.max_iters")
        _positive(self.tol_grad, f"{prefix}.tol_grad")
        _positive(self.initial_step_factor, f"{prefix}.initial_step_factor")
        if self.initial_step is not None:
            _positive(self.initial_step, f"{prefix}.initial_step")
        _open_unit(self.backtrack, f"{prefix}.backtrack")
        _open_unit(self.armijo, f"{prefix}.armijo")
        _positive(self.optimism, f"{prefix}.optimism")
        _positive(self.max_halvings, f"{prefix}.max_halvings")
        _positive(self.reorthogonalize_every, f"{prefix}.reorthogonalize_every")


@dataclass
class GridConfig:
    geometry: str = "FlatBox"
    dim: int = 1
    half_width: float = 1.0
    nodes_per_phase: int = 33
    transverse_nodes: Optional[int] = None
    interface_offset: float = 0.0
    radius: float = 1.0
    core_fraction: float = 0.05
    radial_nodes: int = 17
    angular_nodes: int = 32

    def validate(self, prefix: str = "grid") -> None:
        _choice(self.geometry, GEOMETRIES, f"{prefix}.geometry")
        if self.geometry == "FlatBox" and self.dim not in (1, 2):
            raise ConfigError("FlatBox supports dim 1 or 2", key=f"{prefix}.dim", value=self.dim)
        if self.geometry == "PolarDisk" and self.dim != 2:
            raise ConfigError("PolarDisk is two-dimensional", key=f"{prefix}.dim", value=self.dim)
        _at_least(self.nodes_per_phase, 2, f"{prefix}.nodes_per_phase")
        _at_least(self.radial_nodes, 2, f"{prefix}.radial_nodes")
        _at_least(self.angular_nodes, 3, f"{prefix}.angular_nodes")
        _positive(self.half_width, f"{prefix}.half_width")
        _positive(self.radius, f"{prefix}.radius")
        _open_unit(self.core_fraction, f"{prefix}.core_fraction")


@dataclass
class MotionConfig:
    kind: str = "Stationary"
    r0: float = 0.8
    point_coeffs: List[float] = field(default_factory=lambda: [0.0])
    profile_width: Optional[float] = None
    margin: float = 0.1

    def lifespan(self) -> float:
        return self.r0 ** 2 / 2.0 if self.kind == "ShrinkingCircle" else float("inf")

    def validate(self, prefix: str = "motion") -> None:
        _choice(self.kind, MOTIONS, f"{prefix}.kind")
        _positive(self.r0, f"{prefix}.r0")
        if self.profile_width is not None:
            _positive(self.profile_width, f"{prefix}.profile_width")
        if not 0.0 <= self.margin < 1.0:
            raise ConfigError("margin must lie in [0, 1)", key=f"{prefix}.margin", value=self.margin)


@dataclass
class InitialConfig:
    recipe: str = "smooth-random"
    n: int = 2
    amplitude: float = 0.5
    axis: Optional[List[float]] = None
    path: Optional[str] = None

    def validate(self, prefix: str = "initial") -> None:
        _choice(self.recipe, RECIPES, f"{prefix}.recipe")
        _at_least(self.n, 2, f"{prefix}.n")
        if self.recipe == "user-file" and not self.path:
            raise ConfigError("user-file initial data needs a path", key=f"{prefix}.path")
        if self.axis is not None and len(self.axis) != self.n:
            raise ConfigError("axis length must equal n", key=f"{prefix}.axis", value=self.axis)


@dataclass
class FlowConfig:
    T: float = 0.1
    N: int = 16
    lam: float = 0.9
    proximity: float = 2.0  # sphere flow only: coefficient c of (c/h)|u - u~|^2
    el_library_bumps: int = 3
    tol_el: float = 1e-6

    @property
    def h(self) -> float:
        return self.T / self.N

    def validate(self, prefix: str = "flow") -> None:
        _positive(self.T, f"{prefix}.T")
        _at_least(self.N, 2, f"{prefix}.N")
        if not 0.0 < self.lam < 1.0:
            raise ConfigError("lambda must lie in (0, 1)", key=f"{prefix}.lam", value=self.lam)
        _positive(self.proximity, f"{prefix}.proximity")
        _positive(self.el_library_bumps, f"{prefix}.el_library_bumps")
        _positive(self.tol_el, f"{prefix}.tol_el")


@dataclass
class SphereConfig:
    dim: int = 1
    nodes: int = 64
    period: float = 1.0
    target_dim: int = 3
    amplitude: float = 1.0

    def validate(self, prefix: str = "sphere") -> None:
        if self.dim not in (1, 2):
            raise ConfigError("sphere torus supports dim 1 or 2", key=f"{prefix}.dim", value=self.dim)
        _at_least(self.nodes, 3, f"{prefix}.nodes")
        _positive(self.period, f"{prefix}.period")
        _at_least(self.target_dim, 2, f"{prefix}.target_dim")


@dataclass
class VerifyConfig:
    n: int = 4
    trials: int = 1000
    sizes: Optional[List[int]] = None

    def dims(self) -> List[int]:
        return list(self.sizes) if self.sizes else [self.n]

    def validate(self, prefix: str = "verify") -> None:
        for value in self.dims():
            _at_least(value, 2, f"{prefix}.n")
        _positive(self.trials, f"{prefix}.trials")


@dataclass
class OutputConfig:
    root: str = "./output"
    name: Optional[str] = None
    snapshot_every: int = 0  # 0 writes only the initial and final snapshots

    def validate(self, prefix: str = "output") -> None:
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be non-negative", key=f"{prefix}.snapshot_every")


@dataclass
class RunConfig:
    mode: str = "fixed"
    seed: int = 0
    grid: GridConfig = field(default_factory=GridConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    stepper: StepConfig = field(default_factory=StepConfig)
    sphere: SphereConfig = field(default_factory=SphereConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object", key="")
        return _build(cls, data, "")

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", key="")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e.msg} (line {e.lineno})", key="")
        return cls.from_dict(data)

    @classmethod
    def from_env(cls):
        return cls(
            mode=os.getenv("FLOW_MODE", "fixed"),
            seed=int(os.getenv("FLOW_SEED", 0)),
            output=OutputConfig(root=os.getenv("FLOW_OUTPUT_ROOT", "./output")),
        )

    def apply_env_overrides(self) -> "RunConfig":
        root = os.getenv("FLOW_OUTPUT_ROOT")
        if root:
            self.output.root = root
        return self

    def validate(self) -> "RunConfig":
        _choice(self.mode, MODES, "mode")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key="seed", value=self.seed)
        self.output.validate()
        if self.mode == "verify":
            self.verify.validate()
            return self
        self.flow.validate()
        self.stepper.validate()
        if self.mode == "sphere":
            self.sphere.validate()
            return self
        self.grid.validate()
        self.motion.validate()
        self.initial.validate()
        if self.mode == "fixed" and self.motion.kind != "Stationary":
            raise ConfigError("fixed mode needs a Stationary motion", key="motion.kind")
        if self.mode == "moving":
            if self.motion.kind == "Stationary":
                raise ConfigError("moving mode needs a non-stationary motion", key="motion.kind")
            if self.motion.kind == "ShrinkingCircle" and self.grid.geometry != "PolarDisk":
                raise ConfigError("ShrinkingCircle runs on a PolarDisk grid", key="grid.geometry")
            if self.motion.kind == "PrescribedPoint1D" and not (
                    self.grid.geometry == "FlatBox" and self.grid.dim == 1):
                raise ConfigError("PrescribedPoint1D runs on a 1D FlatBox grid", key="grid.geometry")
            T0 = self.motion.lifespan()
            if self.flow.T >= T0 * (1.0 - self.motion.margin):
                raise LifespanError(
                    f"T = {self.flow.T} must stay below the lifespan T0 = r0^2/2 = {T0} "
                    f"with margin {self.motion.margin}", T=self.flow.T, T0=T0)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_value(self, param: str, value: Any) -> "RunConfig":
        """Copy with one swept parameter replaced: N, seed or lambda."""
        data = self.to_dict()
        if param == "N":
            data["flow"]["N"] = int(value)
        elif param == "seed":
            data["seed"] = int(value)
        elif param in ("lambda", "lam"):
            data["flow"]["lam"] = float(value)
        else:
            raise ConfigError(f"cannot sweep '{param}'; use N, seed or lambda", key="sweep.param")
        return RunConfig.from_dict(data)


def _build(cls, data: Dict[str, Any], prefix: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key == "lambda":
            key = "lam"
        if key not in known:
            raise ConfigError(f"unknown configuration key '{path}'", key=path)
        default = getattr(cls(), key)
        if is_dataclass(default):
            if not isinstance(value, dict):
                raise ConfigError(f"'{path}' must be an object", key=path)
            kwargs[key] = _build(type(default), value, path)
        else:
            kwargs[key] = _coerce(value, default, path)
    return cls(**kwargs)


def _coerce(value: Any, default: Any, path: str) -> Any:
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"'{path}' must be a boolean", key=path, value=value)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{path}' must be an integer", key=path, value=value)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{path}' must be a number", key=path, value=value)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"'{path}' must be a string", key=path, value=value)
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"'{path}' must be a list", key=path, value=value)
        return value
    return value


def _positive(value, key: str) -> None:
    if not value > 0:
        raise ConfigError(f"'{key}' must be positive", key=key, value=value)


def _at_least(value, low: int, key: str) -> None:
    if value < low:
        raise ConfigError(f"'{key}' must be at least {low}", key=key, value=value)


def _open_unit(value, key: str) -> None:
    if not 0.0 < value < 1.0:
        raise ConfigError(f"'{key}' must lie in (0, 1)", key=key, value=value)


def _choice(value, options: Tuple[str, ...], key: str) -> None:
    if value not in options:
        raise ConfigError(f"'{key}' must be one of {', '.join(options)}", key=key, value=value)
