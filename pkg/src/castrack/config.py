"""Versioned JSON configuration with strict validation.

Unknown keys are rejected. Errors name the offending field path, and JSON
syntax errors carry line and column.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agent import AgentLimits, AgentState, DynamicsParams
from .errors import CastrackError, ConfigError
from .estimator import FilterParams
from .planner import PlannerConfig, TrackingModel
from .sensor import DetectionModel, SensorConfig
from .world import ScenarioConfig, WaveSource, random_scenario

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FilterSettings:
    q_spectral: float = 0.05
    v0_var: float = 1.0


@dataclass(frozen=True)
class BaselineSettings:
    hover_altitude: float = 100.0
    lawnmower_altitude: float = 50.0
    lawnmower_spacing: float | None = None
    lawnmower_speed: float = 8.0


@dataclass(frozen=True)
class MonteCarloSettings:
    n_runs: int = 20
    init_radius: float = 100.0
    init_altitude: float = 30.0


@dataclass
class SimConfig:
    scenario: ScenarioConfig
    rho: float = 0.95
    mass: float = 1.5
    limits: AgentLimits = field(default_factory=AgentLimits)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    filter: FilterSettings = field(default_factory=FilterSettings)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    baselines: BaselineSettings = field(default_factory=BaselineSettings)
    monte_carlo: MonteCarloSettings = field(default_factory=MonteCarloSettings)

    @property
    def dynamics(self) -> DynamicsParams:
        return DynamicsParams(dt=self.scenario.dt, rho=self.rho, mass=self.mass)

    def model(self) -> TrackingModel:
        return TrackingModel(
            dynamics=self.dynamics,
            limits=self.limits,
            sensor=self.sensor,
            filter=FilterParams.white_acceleration(
                self.scenario.dt, self.filter.q_spectral, self.filter.v0_var
            ),
        )

    def with_scenario(self, scenario: ScenarioConfig) -> "SimConfig":
        return dataclasses.replace(self, scenario=scenario)


def default_config(scenario_seed: int = 0, **scenario_kw) -> SimConfig:
    return SimConfig(scenario=random_scenario(scenario_seed, **scenario_kw))


# -- decoding ---------------------------------------------------------------


def _check_keys(data: Any, allowed: set[str], path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{path or '<root>'}: unknown field(s) {unknown}")
    return data


def _flat(cls, data: Any, path: str, converters: dict | None = None):
    """Build a flat dataclass from ``data``, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    data = _check_keys(data, names, path)
    kwargs = {}
    for key, value in data.items():
        conv = (converters or {}).get(key)
        try:
            kwargs[key] = conv(value, f"{path}.{key}") if conv else value
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{key}: {exc}") from exc
    try:
        return cls(**kwargs)
    except CastrackError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _pair(value, path):
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{path}: expected a 2-element list")
    return (float(value[0]), float(value[1]))


def _triple(value, path):
    if not (isinstance(value, (list, tuple)) and len(value) == 3):
        raise ConfigError(f"{path}: expected a 3-element list")
    return tuple(float(v) for v in value)


def _agent_state(value, path):
    data = _check_keys(value, {"position", "velocity"}, path)
    if "position" not in data:
        raise ConfigError(f"{path}.position: required")
    vel = _triple(data.get("velocity", [0.0, 0.0, 0.0]), f"{path}.velocity")
    return AgentState.at(_triple(data["position"], f"{path}.position"), vel)


def _wave(value, path):
    return _flat(WaveSource, value, path, {"origin": _pair})


def _scenario(value, path) -> ScenarioConfig:
    allowed = {
        "seed", "n_castaways", "duration", "dt", "radar_sigma",
        "wave_sources", "initial_positions", "agent_init",
    }
    data = _check_keys(value, allowed, path)
    missing = sorted({"seed", "n_castaways", "duration", "dt", "wave_sources", "initial_positions"} - set(data))
    if missing:
        raise ConfigError(f"{path}: missing field(s) {missing}")
    if not isinstance(data["wave_sources"], list):
        raise ConfigError(f"{path}.wave_sources: expected a list")
    if not isinstance(data["initial_positions"], list):
        raise ConfigError(f"{path}.initial_positions: expected a list")
    for key in ("seed", "n_castaways", "duration"):
        if not isinstance(data[key], int) or isinstance(data[key], bool):
            raise ConfigError(f"{path}.{key}: expected an integer")
    kwargs = dict(
        seed=data["seed"],
        n_castaways=data["n_castaways"],
        duration=data["duration"],
        dt=float(data["dt"]),
        wave_sources=[_wave(w, f"{path}.wave_sources[{i}]") for i, w in enumerate(data["wave_sources"])],
        initial_positions=[
            _triple(p, f"{path}.initial_positions[{i}]") for i, p in enumerate(data["initial_positions"])
        ],
    )
    if "radar_sigma" in data:
        kwargs["radar_sigma"] = float(data["radar_sigma"])
    if "agent_init" in data:
        kwargs["agent_init"] = _agent_state(data["agent_init"], f"{path}.agent_init")
    return ScenarioConfig(**kwargs)


def _sensor(value, path) -> SensorConfig:
    return _flat(
        SensorConfig, value, path,
        {"detection": lambda v, p: _flat(DetectionModel, v, p)},
    )


def _agent_section(value, path) -> tuple[float, float, AgentLimits]:
    limit_names = {f.name for f in dataclasses.fields(AgentLimits)}
    data = _check_keys(value, limit_names | {"rho", "mass"}, path)
    rho = float(data.get("rho", 0.95))
    mass = float(data.get("mass", 1.5))
    lim = {k: v for k, v in data.items() if k in limit_names}
    conv = {k: _pair for k in ("x_bounds", "y_bounds", "z_bounds")}
    return rho, mass, _flat(AgentLimits, lim, path, conv)


def config_from_dict(data: dict) -> SimConfig:
    allowed = {
        "schema_version", "scenario", "agent", "sensor", "filter",
        "planner", "baselines", "monte_carlo",
    }
    data = _check_keys(data, allowed, "")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}"
        )
    scenario = _scenario(data["scenario"], "scenario") if "scenario" in data else random_scenario(0)
    kwargs: dict[str, Any] = {"scenario": scenario}
    if "agent" in data:
        kwargs["rho"], kwargs["mass"], kwargs["limits"] = _agent_section(data["agent"], "agent")
    if "sensor" in data:
        kwargs["sensor"] = _sensor(data["sensor"], "sensor")
    if "filter" in data:
        kwargs["filter"] = _flat(FilterSettings, data["filter"], "filter")
    if "planner" in data:
        kwargs["planner"] = _flat(PlannerConfig, data["planner"], "planner")
    if "baselines" in data:
        kwargs["baselines"] = _flat(BaselineSettings, data["baselines"], "baselines")
    if "monte_carlo" in data:
        kwargs["monte_carlo"] = _flat(MonteCarloSettings, data["monte_carlo"], "monte_carlo")
    sim = SimConfig(**kwargs)
    try:
        sim.scenario.validate()
        sim.dynamics  # validates rho and mass
    except CastrackError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    return sim


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# -- encoding ---------------------------------------------------------------


def scenario_to_dict(s: ScenarioConfig) -> dict:
    return {
        "seed": s.seed,
        "n_castaways": s.n_castaways,
        "duration": s.duration,
        "dt": s.dt,
        "radar_sigma": s.radar_sigma,
        "wave_sources": [w.to_dict() for w in s.wave_sources],
        "initial_positions": [list(map(float, p)) for p in s.initial_positions],
        "agent_init": {
            "position": s.agent_init.position.tolist(),
            "velocity": s.agent_init.velocity.tolist(),
        },
    }


def config_to_dict(sim: SimConfig) -> dict:
    limits = dataclasses.asdict(sim.limits)
    for key in ("x_bounds", "y_bounds", "z_bounds"):
        limits[key] = list(limits[key])
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario_to_dict(sim.scenario),
        "agent": {"rho": sim.rho, "mass": sim.mass, **limits},
        "sensor": {
            "theta_h": sim.sensor.theta_h,
            "theta_v": sim.sensor.theta_v,
            "gamma": sim.sensor.gamma,
            "detection": sim.sensor.detection.to_dict(),
        },
        "filter": dataclasses.asdict(sim.filter),
        "planner": dataclasses.asdict(sim.planner),
        "baselines": dataclasses.asdict(sim.baselines),
        "monte_carlo": dataclasses.asdict(sim.monte_carlo),
    }


def dump_config(sim: SimConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(sim), indent=2) + "\n")
