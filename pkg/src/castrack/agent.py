"""Discrete-time double-integrator UAV with linear drag."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryViolation, ParameterDomainError

_VEL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AgentState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))

    @classmethod
    def at(cls, position, velocity=(0.0, 0.0, 0.0)) -> "AgentState":
        return cls(np.asarray(position, dtype=float), np.asarray(velocity, dtype=float))

    @classmethod
    def from_vector(cls, x) -> "AgentState":
        x = np.asarray(x, dtype=float)
        return cls(x[:3], x[3:])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @property
    def altitude(self) -> float:
        return float(self.position[2])


@dataclass(frozen=True)
class DynamicsParams:
    dt: float = 2.0
    rho: float = 0.95
    mass: float = 1.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterDomainError(f"dt must be positive, got {self.dt}")
        if not self.mass > 0:
            raise ParameterDomainError(f"mass must be positive, got {self.mass}")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterDomainError(f"rho must lie in [0, 1], got {self.rho}")

    @property
    def xi(self) -> float:
        """Force-to-velocity-increment factor ``dt / mass``."""
        return self.dt / self.mass


@dataclass(frozen=True)
class ControlLimits:
    """Per-axis force box ``|u_i| <= u_max[i]`` and smoothing box ``(u_i - prev_i)^2 <= du_sq[i]``."""

    u_max: np.ndarray
    du_sq: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_max", np.broadcast_to(np.asarray(self.u_max, float), (3,)).copy())
        object.__setattr__(self, "du_sq", np.broadcast_to(np.asarray(self.du_sq, float), (3,)).copy())
        if not (np.all(np.isfinite(self.u_max)) and np.all(np.isfinite(self.du_sq))):
            raise ParameterDomainError("control limits must be finite")

    @property
    def du_max(self) -> np.ndarray:
        return np.sqrt(self.du_sq)


@dataclass(frozen=True)
class AgentLimits:
    """State and actuation limits of the agent.

    Velocity and acceleration defaults are those of a small commercial
    quadrotor; the workspace box is an operating-area assumption.
    """

    v_h_max: float = 11.0
    v_v_max: float = 3.0
    a_max: float = 2.0
    x_bounds: tuple[float, float] = (-2000.0, 2000.0)
    y_bounds: tuple[float, float] = (-2000.0, 2000.0)
    z_bounds: tuple[float, float] = (5.0, 150.0)
    du_frac: float = 0.5

    def __post_init__(self):
        for lo, hi in (self.x_bounds, self.y_bounds, self.z_bounds):
            if not lo < hi:
                raise ParameterDomainError(f"workspace bounds must satisfy lo < hi, got {(lo, hi)}")
        if min(self.v_h_max, self.v_v_max, self.a_max, self.du_frac) <= 0:
            raise ParameterDomainError("velocity, acceleration and smoothing limits must be positive")

    @property
    def v_max(self) -> np.ndarray:
        return np.array([self.v_h_max, self.v_h_max, self.v_v_max])

    @property
    def pos_lo(self) -> np.ndarray:
        return np.array([self.x_bounds[0], self.y_bounds[0], self.z_bounds[0]])

    @property
    def pos_hi(self) -> np.ndarray:
        return np.array([self.x_bounds[1], self.y_bounds[1], self.z_bounds[1]])

    def control_limits(self, params: DynamicsParams) -> ControlLimits:
        # |u| * xi / dt <= a_max  ->  |u| <= a_max * mass
        u_max = self.a_max * params.dt / params.xi
        return ControlLimits(u_max=np.full(3, u_max), du_sq=np.full(3, (self.du_frac * u_max) ** 2))


def build_dynamics(params: DynamicsParams) -> tuple[np.ndarray, np.ndarray]:
    """Block matrices ``A`` (6x6) and ``B`` (6x3) of the agent transition."""
    I3 = np.eye(3)
    A = np.block([[I3, params.dt * I3], [np.zeros((3, 3)), params.rho * I3]])
    B = np.vstack([np.zeros((3, 3)), params.xi * I3])
    return A, B


def check_state(state: AgentState, limits: AgentLimits) -> None:
    """Raise :class:`BoundaryViolation` if ``state`` is outside the admissible set."""
    lo, hi = limits.pos_lo, limits.pos_hi
    for i in range(3):
        p = state.position[i]
        if not lo[i] <= p <= hi[i]:
            raise BoundaryViolation(i, "position", float(p), (float(lo[i]), float(hi[i])))
    vmax = limits.v_max
    for i in range(3):
        v = state.velocity[i]
        if abs(v) > vmax[i] + _VEL_TOL:
            raise BoundaryViolation(i + 3, "velocity", float(v), (-float(vmax[i]), float(vmax[i])))


def step_agent(
    state: AgentState, u, params: DynamicsParams, limits: AgentLimits | None = None
) -> AgentState:
    """Advance one step: ``p += dt * v``, ``v = rho * v + xi * u``.

    When ``limits`` is given the successor is checked against the workspace
    and velocity box and a :class:`BoundaryViolation` is raised on exit.
    """
    u = np.asarray(u, dtype=float).reshape(3)
    nxt = AgentState(
        state.position + params.dt * state.velocity,
        params.rho * state.velocity + params.xi * u,
    )
    if limits is not None:
        check_state(nxt, limits)
    return nxt


def clamp_control(u, prev, limits: ControlLimits) -> np.ndarray:
    """Project ``u`` onto the force box, then into the smoothing box around ``prev``."""
    u = np.clip(np.asarray(u, dtype=float), -limits.u_max, limits.u_max)
    prev = np.asarray(prev, dtype=float)
    step = limits.du_max
    return np.clip(u, prev - step, prev + step)


def velocity_feasible_controls(
    velocity: np.ndarray, params: DynamicsParams, limits: AgentLimits
) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis force interval keeping the next velocity inside the velocity box."""
    vmax = limits.v_max
    lo = (-vmax - params.rho * velocity) / params.xi
    hi = (vmax - params.rho * velocity) / params.xi
    return lo, hi
