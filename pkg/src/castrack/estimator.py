"""Per-target Kalman filter with intermittent (gated) observations.

Target state is ``[x, y, vx, vy]`` under a constant-velocity model; the
camera observes planar position only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError


@dataclass(frozen=True, eq=False)
class Belief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(4))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float).reshape(4, 4))

    @property
    def trace(self) -> float:
        return float(np.trace(self.cov))

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]


@dataclass(frozen=True, eq=False)
class FilterParams:
    """Transition, observation and process-noise matrices.

    Build with :meth:`white_acceleration` for the usual discretised
    white-noise-acceleration ``Q``.
    """

    A_c: np.ndarray
    C_obs: np.ndarray
    Q: np.ndarray
    dt: float
    v0_var: float = 1.0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ParameterDomainError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12:
            raise ParameterDomainError("Q must be positive semi-definite")
        if not self.v0_var > 0:
            raise ParameterDomainError(f"v0_var must be positive, got {self.v0_var}")

    @classmethod
    def white_acceleration(cls, dt: float, q_spectral: float = 0.05, v0_var: float = 1.0):
        if not dt > 0:
            raise ParameterDomainError(f"dt must be positive, got {dt}")
        if q_spectral < 0:
            raise ParameterDomainError(f"q_spectral must be >= 0, got {q_spectral}")
        I2 = np.eye(2)
        A = np.block([[I2, dt * I2], [np.zeros((2, 2)), I2]])
        C = np.hstack([I2, np.zeros((2, 2))])
        Q = q_spectral * np.block(
            [[dt**3 / 3.0 * I2, dt**2 / 2.0 * I2], [dt**2 / 2.0 * I2, dt * I2]]
        )
        return cls(A_c=A, C_obs=C, Q=Q, dt=dt, v0_var=v0_var)


def kf_init(radar_meas, radar_sigma: float, params: FilterParams) -> Belief:
    """Prior from one radar fix: zero velocity, isotropic position variance."""
    if not radar_sigma > 0:
        raise ParameterDomainError(f"radar_sigma must be positive, got {radar_sigma}")
    x, y = float(radar_meas[0]), float(radar_meas[1])
    s2 = radar_sigma**2
    return Belief(np.array([x, y, 0.0, 0.0]), np.diag([s2, s2, params.v0_var, params.v0_var]))


def kf_predict(b: Belief, params: FilterParams) -> Belief:
    A = params.A_c
    return Belief(A @ b.mean, A @ b.cov @ A.T + params.Q)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def kf_update(b_pred: Belief, meas, detected: bool, params: FilterParams) -> Belief:
    """Correct ``b_pred`` with ``meas`` when ``detected``; otherwise pass it through.

    ``meas`` is a :class:`~castrack.sensor.Measurement` (or anything with
    ``z_pos`` and ``sigma``).
    """
    if not detected:
        return b_pred
    if meas is None:
        raise ParameterDomainError("detected=True requires a measurement")
    C = params.C_obs
    P = b_pred.cov
    R = float(meas.sigma) ** 2 * np.eye(2)
    S = C @ P @ C.T + R
    if abs(np.linalg.det(S)) == 0.0:
        raise np.linalg.LinAlgError("singular innovation covariance")
    K = np.linalg.solve(S, C @ P).T
    innov = np.asarray(meas.z_pos, dtype=float) - C @ b_pred.mean
    mean = b_pred.mean + K @ innov
    cov = _symmetrize(P - K @ C @ P)
    return Belief(mean, cov)


def trace_objective(beliefs) -> float:
    beliefs = list(beliefs)
    if not beliefs:
        raise ParameterDomainError("trace objective needs at least one belief")
    return float(sum(np.trace(b.cov) for b in beliefs))
