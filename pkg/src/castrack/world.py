"""Ground-truth castaway drift driven by small-amplitude surface waves.

Each wave source radiates a travelling wave whose along-propagation water
velocity at planar distance ``d`` and step ``k`` is::

    v = (omega * H / 2) * exp(-w_decay * d) * sin(q * d - omega * k * dt)

A castaway is pushed along the bearing from the source origin; the vertical
channel receives the same speed. Contributions from several sources add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agent import AgentState
from .errors import ParameterDomainError, ScenarioRejected

SMALL_AMPLITUDE_LIMIT = 0.1


def derive_wave_params(L: float, D: float, g: float) -> tuple[float, float, float, float]:
    """Return ``(q, K, T, omega)`` for wavelength ``L``, depth ``D`` and gravity ``g``."""
    for name, value in (("L", L), ("D", D), ("g", g)):
        if not (math.isfinite(value) and value > 0):
            raise ParameterDomainError(f"{name} must be positive and finite, got {value!r}")
    q = 2.0 * math.pi / L
    K = math.tanh(q * D)
    T = math.sqrt(2.0 * math.pi * L / (g * K))
    omega = 2.0 * math.pi / T
    return q, K, T, omega


def _tanh_deficit(x: float) -> float:
    # 1 - tanh(x) without cancellation; tanh(x) rounds to 1.0 once x > ~19
    if x > 350.0:
        return 0.0
    return 2.0 / (math.exp(2.0 * x) + 1.0)


@dataclass(frozen=True)
class WaveSource:
    """One wave train. ``q, K, T, omega`` are derived at construction."""

    origin: tuple[float, float]
    H: float
    L: float
    w_decay: float = 0.0
    D: float = 200.0
    g: float = 9.81
    q: float = field(init=False)
    K: float = field(init=False)
    T: float = field(init=False)
    omega: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.H) and self.H >= 0):
            raise ParameterDomainError(f"H must be >= 0, got {self.H!r}")
        if not (math.isfinite(self.w_decay) and self.w_decay >= 0):
            raise ParameterDomainError(f"w_decay must be >= 0, got {self.w_decay!r}")
        origin = tuple(float(c) for c in self.origin)
        if len(origin) != 2 or not all(math.isfinite(c) for c in origin):
            raise ParameterDomainError(f"origin must be a finite (x, y) pair, got {self.origin!r}")
        object.__setattr__(self, "origin", origin)
        q, K, T, omega = derive_wave_params(self.L, self.D, self.g)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "omega", omega)

    @property
    def amplitude(self) -> float:
        """Speed envelope ``omega * H / 2`` (m/s)."""
        return 0.5 * self.omega * self.H

    def regime_violations(self) -> list[str]:
        """Names of violated wave-regime conditions (empty when valid)."""
        problems = []
        if not self.q * self.H < SMALL_AMPLITUDE_LIMIT:
            problems.append(
                f"small-amplitude condition qH < {SMALL_AMPLITUDE_LIMIT} violated "
                f"(qH = {self.q * self.H:.4g})"
            )
        if not (self.K > 0 and _tanh_deficit(self.q * self.D) > 0):
            problems.append(f"deepwater condition 0 < K < 1 violated (qD = {self.q * self.D:.4g})")
        return problems

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "H": self.H,
            "L": self.L,
            "w_decay": self.w_decay,
            "D": self.D,
            "g": self.g,
        }


@dataclass(frozen=True)
class CastawayTruth:
    id: int
    position: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ParameterDomainError(f"castaway {self.id} position not finite: {pos}")
        object.__setattr__(self, "position", pos)


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce a set of ground-truth drifts."""

    seed: int
    n_castaways: int
    duration: int
    dt: float
    wave_sources: list[WaveSource]
    initial_positions: list[tuple[float, float, float]]
    radar_sigma: float = 25.0
    agent_init: AgentState = field(default_factory=lambda: AgentState.at((0.0, 0.0, 30.0)))

    def validate(self) -> None:
        """Raise :class:`ScenarioRejected` naming the first violated condition."""
        if self.n_castaways < 1:
            raise ScenarioRejected(f"C >= 1 required, got {self.n_castaways}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ScenarioRejected(f"dt > 0 required, got {self.dt}")
        if self.duration < 0:
            raise ScenarioRejected(f"duration >= 0 required, got {self.duration}")
        if not self.radar_sigma > 0:
            raise ScenarioRejected(f"radar_sigma > 0 required, got {self.radar_sigma}")
        if len(self.initial_positions) != self.n_castaways:
            raise ScenarioRejected(
                f"{len(self.initial_positions)} initial positions given for C = {self.n_castaways}"
            )
        for pos in self.initial_positions:
            if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
                raise ScenarioRejected(f"initial position {pos!r} is not a finite 3-vector")
        for i, src in enumerate(self.wave_sources):
            problems = src.regime_violations()
            if problems:
                raise ScenarioRejected(f"wave source {i}: {problems[0]}")


def stokes_velocity(src: WaveSource, d: float, k: int, dt: float = 1.0) -> float:
    """Along-propagation water speed at distance ``d`` from ``src`` at step ``k``."""
    if d < 0:
        raise ParameterDomainError(f"distance must be >= 0, got {d}")
    return src.amplitude * math.exp(-src.w_decay * d) * math.sin(src.q * d - src.omega * k * dt)


def _drift_velocity(xy: np.ndarray, sources: list[WaveSource], k: int, dt: float) -> np.ndarray:
    """Summed 3D water velocity for an ``(n, 2)`` array of planar positions."""
    vel = np.zeros((xy.shape[0], 3))
    for src in sources:
        rel = xy - np.asarray(src.origin)
        d = np.hypot(rel[:, 0], rel[:, 1])
        # bearing is undefined at the origin itself; use 0 there
        phi = np.where(d > 0, np.arctan2(rel[:, 1], rel[:, 0]), 0.0)
        speed = src.amplitude * np.exp(-src.w_decay * d) * np.sin(src.q * d - src.omega * k * dt)
        vel[:, 0] += speed * np.cos(phi)
        vel[:, 1] += speed * np.sin(phi)
        vel[:, 2] += speed
    return vel


def step_castaway(
    state: CastawayTruth, sources: list[WaveSource], k: int, dt: float
) -> CastawayTruth:
    vel = _drift_velocity(state.position[None, :2], sources, k, dt)[0]
    return CastawayTruth(state.id, state.position + vel * dt)


def simulate_truth(cfg: ScenarioConfig, n_steps: int) -> np.ndarray:
    """Positions of every castaway at steps ``0 .. n_steps - 1``, shape ``(C, n_steps, 3)``."""
    cfg.validate()
    out = np.empty((cfg.n_castaways, n_steps, 3))
    if n_steps == 0:
        return out
    pos = np.array(cfg.initial_positions, dtype=float)
    out[:, 0] = pos
    for k in range(n_steps - 1):
        pos = pos + _drift_velocity(pos[:, :2], cfg.wave_sources, k, cfg.dt) * cfg.dt
        out[:, k + 1] = pos
    return out


def generate_scenario(cfg: ScenarioConfig) -> np.ndarray:
    """Ground-truth trajectory table ``(C, duration, 3)``; row 0 is the initial position."""
    return simulate_truth(cfg, cfg.duration)


def random_wave_sources(
    rng: np.random.Generator,
    n_sources: int = 3,
    depth: float = 200.0,
    distance: tuple[float, float] = (300.0, 1500.0),
) -> list[WaveSource]:
    """Draw wave sources of varied height, wavelength and decay rate.

    Heights are drawn through the steepness ``qH`` so that every source sits
    inside the small-amplitude regime by construction.
    """
    sources = []
    for _ in range(n_sources):
        L = rng.uniform(40.0, 120.0)
        steepness = rng.uniform(0.02, 0.08)
        H = steepness * L / (2.0 * math.pi)
        w_decay = rng.uniform(1e-4, 1e-3)
        r = rng.uniform(*distance)
        bearing = rng.uniform(0.0, 2.0 * math.pi)
        sources.append(
            WaveSource(
                origin=(r * math.cos(bearing), r * math.sin(bearing)),
                H=H,
                L=L,
                w_decay=w_decay,
                D=depth,
            )
        )
    return sources


def random_scenario(
    seed: int,
    n_castaways: int = 4,
    duration: int = 1800,
    dt: float = 2.0,
    n_sources: int = 3,
    spread: float = 150.0,
    radar_sigma: float = 25.0,
) -> ScenarioConfig:
    """Default scenario: castaways scattered in a ``2 * spread`` square near the origin."""
    rng = np.random.default_rng(seed)
    sources = random_wave_sources(rng, n_sources)
    xy = rng.uniform(-spread, spread, size=(n_castaways, 2))
    positions = [(float(x), float(y), 0.0) for x, y in xy]
    cfg = ScenarioConfig(
        seed=seed,
        n_castaways=n_castaways,
        duration=duration,
        dt=dt,
        wave_sources=sources,
        initial_positions=positions,
        radar_sigma=radar_sigma,
        agent_init=AgentState.at((0.0, 0.0, 30.0)),
    )
    cfg.validate()
    return cfg
