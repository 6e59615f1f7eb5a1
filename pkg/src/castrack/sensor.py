"""Downward camera: ground footprint, altitude-dependent detection, noisy fixes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import AgentState
from .errors import FitError, ParameterDomainError

RECALL_PLATEAU = 0.99


@dataclass(frozen=True)
class DetectionModel:
    """Piecewise-linear map from altitude to detection probability.

    Probability is 1 up to ``alpha1``, ``p_min`` from ``alpha2`` on, and the
    line ``beta1 * z + beta2`` in between.
    """

    alpha1: float = 10.0
    alpha2: float = 100.0
    beta1: float = -0.0083
    beta2: float = 1.083
    p_min: float = 0.25

    def __post_init__(self):
        if not self.alpha1 < self.alpha2:
            raise ParameterDomainError(f"alpha1 < alpha2 required, got {self.alpha1}, {self.alpha2}")
        if abs(self.beta1 * self.alpha1 + self.beta2 - 1.0) > 1e-9:
            raise ParameterDomainError(
                "line must meet the unit plateau at alpha1 "
                f"(beta1*alpha1 + beta2 = {self.beta1 * self.alpha1 + self.beta2!r})"
            )
        if not 0.0 < self.p_min <= 1.0:
            raise ParameterDomainError(f"p_min must lie in (0, 1], got {self.p_min}")
        top = self.beta1 * self.alpha2 + self.beta2
        if not (0.0 <= top <= 1.0):
            raise ParameterDomainError(f"linear branch leaves [0, 1] at alpha2 (value {top})")

    @property
    def jump_at_alpha2(self) -> float:
        return abs(self.beta1 * self.alpha2 + self.beta2 - self.p_min)

    def to_dict(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "p_min": self.p_min,
        }


@dataclass(frozen=True)
class SensorConfig:
    theta_h: float = 69.0
    theta_v: float = 54.0
    gamma: float = 1.0
    detection: DetectionModel = field(default_factory=DetectionModel)

    def __post_init__(self):
        for name in ("theta_h", "theta_v"):
            val = getattr(self, name)
            if not 0.0 < val < 180.0:
                raise ParameterDomainError(f"{name} must lie in (0, 180) degrees, got {val}")
        if not self.gamma > 0:
            raise ParameterDomainError(f"gamma must be positive, got {self.gamma}")

    @property
    def tan_half_h(self) -> float:
        return math.tan(math.radians(self.theta_h) / 2.0)

    @property
    def tan_half_v(self) -> float:
        return math.tan(math.radians(self.theta_v) / 2.0)


@dataclass(frozen=True)
class FovRect:
    """Axis-aligned footprint: ``half_len_h`` along x, ``half_len_v`` along y."""

    cx: float
    cy: float
    half_len_h: float
    half_len_v: float


@dataclass(frozen=True)
class Measurement:
    target_id: int
    z_pos: np.ndarray
    sigma: float
    step: int


def fov_rect(agent: AgentState, cfg: SensorConfig) -> FovRect:
    z = agent.altitude
    if z < 0:
        raise ParameterDomainError(f"agent altitude must be >= 0, got {z}")
    return FovRect(
        float(agent.position[0]),
        float(agent.position[1]),
        z * cfg.tan_half_h,
        z * cfg.tan_half_v,
    )


def contains(rect: FovRect, pos) -> bool:
    """Inclusive point-in-footprint test, edge by edge."""
    x, y = float(pos[0]), float(pos[1])
    return (
        rect.cx - rect.half_len_h <= x <= rect.cx + rect.half_len_h
        and rect.cy - rect.half_len_v <= y <= rect.cy + rect.half_len_v
    )


def detection_prob(z, model: DetectionModel = DetectionModel()):
    """Detection probability at altitude ``z``; accepts scalars or arrays."""
    za = np.asarray(z, dtype=float)
    lin = np.clip(model.beta1 * za + model.beta2, model.p_min, 1.0)
    p = np.where(za <= model.alpha1, 1.0, np.where(za >= model.alpha2, model.p_min, lin))
    if p.ndim == 0:
        return float(p)
    return p


def measurement_sigma(z, cfg: SensorConfig):
    """Standard deviation of one camera fix: ``gamma / detection_prob(z)``."""
    return cfg.gamma / detection_prob(z, cfg.detection)


def sense(
    agent: AgentState,
    truths,
    cfg: SensorConfig,
    rng: np.random.Generator,
    step: int = 0,
) -> list[Measurement]:
    """Draw camera returns for ``truths`` seen from ``agent``.

    Targets outside the footprint never report. Each in-footprint target
    reports independently with probability ``detection_prob(z)``; the fix is
    the true planar position plus isotropic Gaussian noise.
    """
    rect = fov_rect(agent, cfg)
    p = detection_prob(agent.altitude, cfg.detection)
    sigma = measurement_sigma(agent.altitude, cfg)
    out = []
    for truth in truths:
        if not contains(rect, truth.position):
            continue
        if rng.random() >= p:
            continue
        noise = rng.normal(0.0, sigma, size=2)
        out.append(Measurement(truth.id, truth.position[:2] + noise, sigma, step))
    return out


def fit_detection_model(table) -> DetectionModel:
    """Fit the piecewise detection model to per-altitude detection counts.

    Args:
        table: iterable of ``(altitude, true_positives, false_negatives)``.
            Rows sharing an altitude are pooled.

    Returns:
        A :class:`DetectionModel` whose line passes through 1 at ``alpha1``.

    Raises:
        FitError: fewer than three usable altitudes, or negative counts.
    """
    pooled: dict[float, list[float]] = {}
    for alt, tp, fn in table:
        if tp < 0 or fn < 0:
            raise FitError(f"negative count at altitude {alt}")
        acc = pooled.setdefault(float(alt), [0.0, 0.0])
        acc[0] += tp
        acc[1] += fn
    usable = {a: c for a, c in pooled.items() if c[0] + c[1] > 0}
    if len(usable) < 3:
        raise FitError(f"need at least 3 altitudes with non-zero counts, got {len(usable)}")

    alts = np.array(sorted(usable))
    recall = np.array([usable[a][0] / (usable[a][0] + usable[a][1]) for a in alts])
    p_min = float(recall.min())

    plateau = alts[recall >= RECALL_PLATEAU]
    alpha1 = float(plateau.max()) if plateau.size else float(alts[0])

    if p_min >= RECALL_PLATEAU:
        # no measurable falloff: flat model
        return DetectionModel(alpha1=float(alts[-1]), alpha2=float(alts[-1]) + 1.0,
                              beta1=0.0, beta2=1.0, p_min=1.0)

    z_floor = float(alts[np.argmax(recall <= p_min)])
    if z_floor <= alpha1:
        raise FitError(f"minimum recall at {z_floor} m is not above the plateau end {alpha1} m")
    mask = (alts >= alpha1) & (alts <= z_floor)
    if mask.sum() >= 2:
        beta1 = float(np.polyfit(alts[mask], recall[mask], 1)[0])
    else:
        beta1 = (p_min - 1.0) / (z_floor - alpha1)
    if not beta1 < 0:
        raise FitError(f"fitted slope {beta1:.4g} is not decreasing")
    beta2 = 1.0 - beta1 * alpha1
    alpha2 = (p_min - beta2) / beta1
    return DetectionModel(alpha1=alpha1, alpha2=alpha2, beta1=beta1, beta2=beta2, p_min=p_min)


def read_detection_table(path) -> list[tuple[float, float, float]]:
    """Read a CSV with columns ``altitude_m, tp, fn``."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"altitude_m", "tp", "fn"} - set(reader.fieldnames or ())
        if missing:
            raise FitError(f"detection table missing columns: {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["altitude_m"]), float(row["tp"]), float(row["fn"])))
            except (TypeError, ValueError) as exc:
                raise FitError(f"line {line_no}: {exc}") from exc
    return rows
