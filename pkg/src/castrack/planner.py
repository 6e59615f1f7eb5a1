"""Receding-horizon planner minimising summed predicted covariance traces.

The in-footprint indicators are deterministic functions of the agent
trajectory and of the predicted target means, and the Kalman covariance
recursion does not depend on measurement values. The horizon objective is
therefore an exact, deterministic function of the control sequence, so it
can be evaluated by forward simulation (:func:`rollout_batch`) instead of a
mixed-integer solver. The sequence is optimised with a seeded cross-entropy
search; :func:`exhaustive_lattice` enumerates a discretised control set and
serves as the reference optimum.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .agent import AgentLimits, AgentState, ControlLimits, DynamicsParams
from .errors import ParameterDomainError, SizeGuardError
from .estimator import Belief, FilterParams
from .sensor import SensorConfig, detection_prob

log = logging.getLogger(__name__)

LATTICE_GUARD = 1_000_000
_TOL = 1e-9

MARGIN_CAP = 0.3  # default fraction of the ceiling footprint, see PlannerConfig.margin_cap


@dataclass(frozen=True)
class TrackingModel:
    """Agent, camera and filter models shared by planner and simulator."""

    dynamics: DynamicsParams
    limits: AgentLimits
    sensor: SensorConfig
    filter: FilterParams

    @property
    def control_limits(self) -> ControlLimits:
        return self.limits.control_limits(self.dynamics)


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 5
    population: int = 64
    elite_frac: float = 0.125
    iterations: int = 8
    init_std_frac: float = 0.5
    min_std_frac: float = 0.05
    seed: int = 0
    lattice_levels: int = 3
    noisy_pseudo: bool = False
    reacquire: bool = True
    fov_margin_sigma: float = 1.0
    margin_cap: float = MARGIN_CAP
    extremal_seeds: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ParameterDomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.iterations < 1:
            raise ParameterDomainError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.elite_frac <= 0.5:
            raise ParameterDomainError(f"elite_frac must lie in (0, 0.5], got {self.elite_frac}")
        if self.population < 2 * self.n_elite:
            raise ParameterDomainError(
                f"population {self.population} must be at least twice the elite count {self.n_elite}"
            )
        if self.lattice_levels < 2:
            raise ParameterDomainError(f"lattice_levels must be >= 2, got {self.lattice_levels}")
        if not 0.0 < self.margin_cap <= 1.0:
            raise ParameterDomainError(f"margin_cap must lie in (0, 1], got {self.margin_cap}")
        if self.fov_margin_sigma < 0:
            raise ParameterDomainError(f"fov_margin_sigma must be >= 0, got {self.fov_margin_sigma}")
        if self.init_std_frac <= 0 or self.min_std_frac < 0:
            raise ParameterDomainError("sampling std fractions must be positive")

    @property
    def n_elite(self) -> int:
        return max(1, int(round(self.elite_frac * self.population)))

    @property
    def margin_kw(self) -> dict:
        return {"margin": self.fov_margin_sigma, "margin_cap": self.margin_cap}


@dataclass
class Plan:
    controls: np.ndarray
    cost: float
    predicted_traces: np.ndarray
    binaries: np.ndarray
    feasible: bool = True
    warning: str | None = None
    solve_time_s: float = field(default=0.0, compare=False)
    n_evaluated: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "controls": self.controls.tolist(),
            "cost": self.cost if np.isfinite(self.cost) else None,
            "predicted_traces": self.predicted_traces.tolist(),
            "binaries": self.binaries.astype(int).tolist(),
            "feasible": self.feasible,
            "warning": self.warning,
            "solve_time_s": self.solve_time_s,
        }


def margin_caps(model: TrackingModel, frac: float = MARGIN_CAP) -> tuple[float, float]:
    """Largest sigma box still counted as seen: ``frac`` of the ceiling footprint."""
    z_top = model.limits.z_bounds[1]
    return (
        frac * z_top * model.sensor.tan_half_h,
        frac * z_top * model.sensor.tan_half_v,
    )


@dataclass
class RolloutResult:
    costs: np.ndarray  # (M,)
    traces: np.ndarray  # (M, N, C)
    binaries: np.ndarray  # (M, N, C)
    feasible: np.ndarray  # (M,)


def _agent_trajectories(controls, agent0: AgentState, model: TrackingModel):
    dyn, lim = model.dynamics, model.limits
    M, N, _ = controls.shape
    p = np.broadcast_to(agent0.position, (M, 3)).copy()
    v = np.broadcast_to(agent0.velocity, (M, 3)).copy()
    pos = np.empty((M, N, 3))
    ok = np.ones(M, dtype=bool)
    lo, hi, vmax = lim.pos_lo, lim.pos_hi, lim.v_max
    for t in range(N):
        p = p + dyn.dt * v
        v = dyn.rho * v + dyn.xi * controls[:, t]
        ok &= np.all((p >= lo) & (p <= hi), axis=1)
        ok &= np.all(np.abs(v) <= vmax + _TOL, axis=1)
        pos[:, t] = p
    return pos, ok


def rollout_batch(
    controls,
    agent0: AgentState,
    beliefs0: list[Belief],
    model: TrackingModel,
    suppress: np.ndarray | None = None,
    noisy: bool = False,
    rng: np.random.Generator | None = None,
    margin: float = 0.0,
    margin_cap: float = MARGIN_CAP,
) -> RolloutResult:
    """Evaluate ``M`` control sequences of shape ``(M, N, 3)`` in one pass.

    Per step: move the agent, predict every target, update each target whose
    predicted mean lies in the footprint using a pseudo-measurement with
    standard deviation ``gamma / detection_prob(z)``, and accumulate the
    posterior traces. Sequences leaving the workspace or velocity box cost
    ``inf``.

    ``suppress`` is an optional ``(N, C)`` boolean mask forcing indicators to
    zero (ablation hook). ``noisy`` perturbs pseudo-measurements with their
    noise, which makes the footprint test depend on ``rng``.

    ``margin`` shrinks the footprint by ``margin`` predicted standard
    deviations per axis, so a target counts as seen only when its
    ``margin``-sigma box fits inside. The box is capped at ``margin_cap`` of
    the footprint at the altitude ceiling so no target becomes unobservable.
    Zero tests the mean point alone.
    """
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 2:
        controls = controls[None]
    M, N, _ = controls.shape
    C = len(beliefs0)
    pos, feasible = _agent_trajectories(controls, agent0, model)

    z = np.maximum(pos[..., 2], 0.0)
    half_h = z * model.sensor.tan_half_h
    half_v = z * model.sensor.tan_half_v
    sig2 = (model.sensor.gamma / detection_prob(z, model.sensor.detection)) ** 2
    x_lo, x_hi = pos[..., 0] - half_h, pos[..., 0] + half_h
    y_lo, y_hi = pos[..., 1] - half_v, pos[..., 1] + half_v

    cap_h, cap_v = margin_caps(model, margin_cap)

    A, Q = model.filter.A_c, model.filter.Q
    traces = np.empty((M, N, C))
    binaries = np.zeros((M, N, C), dtype=bool)
    if noisy and rng is None:
        raise ParameterDomainError("noisy pseudo-measurements need an rng")

    for i, b in enumerate(beliefs0):
        P = np.broadcast_to(b.cov, (M, 4, 4)).copy()
        mean = np.broadcast_to(b.mean, (M, 4)).copy()
        for t in range(N):
            P = A @ P @ A.T + Q
            mean = mean @ A.T
            tx, ty = mean[:, 0], mean[:, 1]
            if margin:
                mx = np.minimum(margin * np.sqrt(P[:, 0, 0]), cap_h)
                my = np.minimum(margin * np.sqrt(P[:, 1, 1]), cap_v)
                inside = (
                    (x_lo[:, t] + mx <= tx) & (tx <= x_hi[:, t] - mx)
                    & (y_lo[:, t] + my <= ty) & (ty <= y_hi[:, t] - my)
                )
            else:
                inside = (x_lo[:, t] <= tx) & (tx <= x_hi[:, t]) & (y_lo[:, t] <= ty) & (ty <= y_hi[:, t])
            if suppress is not None and suppress[t, i]:
                inside[:] = False
            binaries[:, t, i] = inside
            if inside.any():
                s2 = sig2[:, t]
                a = P[:, 0, 0] + s2
                d = P[:, 1, 1] + s2
                c = P[:, 0, 1]
                det = a * d - c * c
                Sinv = np.empty((M, 2, 2))
                Sinv[:, 0, 0] = d / det
                Sinv[:, 1, 1] = a / det
                Sinv[:, 0, 1] = Sinv[:, 1, 0] = -c / det
                K = P[:, :, :2] @ Sinv
                P_post = P - K @ P[:, :2, :]
                P_post = 0.5 * (P_post + np.swapaxes(P_post, 1, 2))
                P = np.where(inside[:, None, None], P_post, P)
                if noisy:
                    n = rng.normal(size=(M, 2)) * np.sqrt(s2)[:, None]
                    mean = mean + np.where(inside[:, None], np.einsum("mij,mj->mi", K, n), 0.0)
            traces[:, t, i] = P[:, 0, 0] + P[:, 1, 1] + P[:, 2, 2] + P[:, 3, 3]

    costs = traces.sum(axis=(1, 2))
    costs = np.where(feasible, costs, np.inf)
    return RolloutResult(costs, traces, binaries, feasible)


def rollout(controls, agent0: AgentState, beliefs0: list[Belief], model: TrackingModel, **kw):
    """Single-sequence rollout: returns ``(cost, traces (N, C), binaries (N, C))``."""
    res = rollout_batch(np.asarray(controls, dtype=float)[None], agent0, beliefs0, model, **kw)
    return float(res.costs[0]), res.traces[0], res.binaries[0]


def project_sequences(raw, agent0: AgentState, prev_u, model: TrackingModel) -> np.ndarray:
    """Map raw ``(M, N, 3)`` sequences onto the admissible control set.

    Each step is clipped to the force box and the smoothing box around the
    preceding control, then, where possible, to the forces that keep the next
    velocity inside the velocity box and the following position inside the
    workspace. When those sets do not intersect the nearest admissible force
    is kept and the rollout will flag the sequence infeasible.
    """
    dyn, lim = model.dynamics, model.limits
    ulim = model.control_limits
    raw = np.asarray(raw, dtype=float)
    M, N, _ = raw.shape
    out = np.empty_like(raw)
    p = np.broadcast_to(agent0.position, (M, 3)).copy()
    v = np.broadcast_to(agent0.velocity, (M, 3)).copy()
    prev = np.broadcast_to(np.asarray(prev_u, dtype=float), (M, 3)).copy()
    vmax, plo, phi = lim.v_max, lim.pos_lo, lim.pos_hi
    for t in range(N):
        lo = np.maximum(-ulim.u_max, prev - ulim.du_max)
        hi = np.minimum(ulim.u_max, prev + ulim.du_max)
        p = p + dyn.dt * v
        # next velocity must respect the velocity box and not carry the
        # following position outside the workspace
        v_lo = np.maximum(-vmax, (plo - p) / dyn.dt)
        v_hi = np.minimum(vmax, (phi - p) / dyn.dt)
        f_lo = (v_lo - dyn.rho * v) / dyn.xi
        f_hi = (v_hi - dyn.rho * v) / dyn.xi
        # viability: the smoothing box at the following step must still reach
        # a force that keeps that step's velocity inside the box
        g_lo = ((-vmax - dyn.rho**2 * v) / dyn.xi - ulim.du_max) / (1.0 + dyn.rho)
        g_hi = ((vmax - dyn.rho**2 * v) / dyn.xi + ulim.du_max) / (1.0 + dyn.rho)
        u = np.clip(raw[:, t], lo, hi)
        ilo, ihi = np.maximum(lo, f_lo), np.minimum(hi, f_hi)
        ok = ilo <= ihi
        jlo, jhi = np.maximum(ilo, g_lo), np.minimum(ihi, g_hi)
        viable = jlo <= jhi
        u = np.where(
            viable,
            np.clip(u, jlo, jhi),
            np.where(ok, np.clip(u, ilo, ihi), np.where(f_hi < lo, lo, hi)),
        )
        out[:, t] = u
        v = dyn.rho * v + dyn.xi * u
        prev = u
    return out


def extremal_seeds(horizon: int, u_max) -> np.ndarray:
    """Full-force sequences: each per-axis sign pattern held for the first ``h`` steps, then zero.

    Returns ``27 * horizon`` raw sequences of shape ``(horizon, 3)``.
    """
    u_max = np.broadcast_to(np.asarray(u_max, dtype=float), (3,))
    signs = np.array(np.meshgrid(*([(-1.0, 0.0, 1.0)] * 3), indexing="ij")).reshape(3, -1).T
    out = np.zeros((len(signs) * horizon, horizon, 3))
    for h in range(1, horizon + 1):
        block = out[(h - 1) * len(signs):h * len(signs)]
        block[:, :h] = (signs * u_max)[:, None, :]
    return out


def _order(costs: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Indices sorted by cost, then total squared control, then lexicographically."""
    flat = controls.reshape(len(controls), -1)
    sumsq = np.einsum("ij,ij->i", flat, flat)
    keys = tuple(flat[:, j] for j in range(flat.shape[1] - 1, -1, -1)) + (sumsq, costs)
    return np.lexsort(keys)


def _precedes(cost_a, ctrl_a, cost_b, ctrl_b) -> bool:
    """True when candidate ``a`` strictly wins the tie-broken ordering over ``b``."""
    if cost_a != cost_b:
        return bool(cost_a < cost_b)
    sa, sb = float(np.sum(ctrl_a**2)), float(np.sum(ctrl_b**2))
    if sa != sb:
        return sa < sb
    for x, y in zip(np.ravel(ctrl_a), np.ravel(ctrl_b)):
        if x != y:
            return bool(x < y)
    return False


def shifted_mean(warm: Plan | None, horizon: int) -> np.ndarray:
    """Initial sampling mean: warm plan shifted one step with its last control repeated."""
    if warm is None:
        return np.zeros((horizon, 3))
    prev = np.asarray(warm.controls, dtype=float)
    shifted = np.concatenate([prev[1:], prev[-1:]], axis=0)
    if len(shifted) >= horizon:
        return shifted[:horizon].copy()
    pad = np.repeat(shifted[-1:], horizon - len(shifted), axis=0)
    return np.concatenate([shifted, pad], axis=0)


def _make_plan(controls, res: RolloutResult, k: int, **kw) -> Plan:
    cost = float(res.costs[k])
    return Plan(
        controls=np.array(controls[k]),
        cost=cost,
        predicted_traces=res.traces[k].copy(),
        binaries=res.binaries[k].copy(),
        feasible=bool(np.isfinite(cost)),
        **kw,
    )


def plan(
    agent: AgentState,
    beliefs: list[Belief],
    cfg: PlannerConfig,
    model: TrackingModel,
    warm: Plan | None = None,
    prev_u=None,
    rng: np.random.Generator | None = None,
) -> Plan:
    """Cross-entropy search for the horizon control sequence of least cost.

    The projected zero-control sequence and the current sampling mean are
    always among the candidates, so the result never costs more than the
    zero plan. Before sampling, the :func:`extremal_seeds` are evaluated
    once; the best of them becomes the sampling mean when it beats the
    warm start. The footprint indicators make the objective piecewise
    constant, and full-force manoeuvres reaching a narrow observation window
    are rarely drawn from a Gaussian centred on zero.
    """
    t0 = time.perf_counter()
    if not beliefs:
        raise ParameterDomainError("planning needs at least one target belief")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    N = cfg.horizon
    prev_u = np.zeros(3) if prev_u is None else np.asarray(prev_u, dtype=float)
    u_max = model.control_limits.u_max
    mu = shifted_mean(warm, N)
    std = np.broadcast_to(cfg.init_std_frac * u_max, (N, 3)).copy()
    std_floor = cfg.min_std_frac * u_max
    E = cfg.n_elite

    zero = project_sequences(np.zeros((1, N, 3)), agent, prev_u, model)
    best_controls = zero[0]
    res0 = rollout_batch(zero, agent, beliefs, model, **cfg.margin_kw)
    best = _make_plan(zero, res0, 0)
    n_eval = 1

    if cfg.extremal_seeds:
        seeds = project_sequences(extremal_seeds(N, u_max), agent, prev_u, model)
        res_s = rollout_batch(seeds, agent, beliefs, model, **cfg.margin_kw)
        n_eval += len(seeds)
        k = _order(res_s.costs, seeds)[0]
        mean_cost = rollout_batch(project_sequences(mu[None], agent, prev_u, model), agent, beliefs, model,
                                  **cfg.margin_kw).costs[0]
        if res_s.costs[k] < mean_cost:
            mu = seeds[k].copy()
        if _precedes(res_s.costs[k], seeds[k], best.cost, best.controls):
            best = _make_plan(seeds, res_s, k)

    for it in range(cfg.iterations):
        raw = mu + std * rng.standard_normal((cfg.population, N, 3))
        raw[0] = mu
        cand = project_sequences(raw, agent, prev_u, model)
        if it == 0:
            cand[1] = best_controls
        noise_rng = rng if cfg.noisy_pseudo else None
        res = rollout_batch(
            cand, agent, beliefs, model, noisy=cfg.noisy_pseudo, rng=noise_rng,
            **cfg.margin_kw,
        )
        n_eval += len(cand)
        order = _order(res.costs, cand)
        top = order[0]
        if _precedes(res.costs[top], cand[top], best.cost, best.controls):
            best = _make_plan(cand, res, top)
        finite = order[np.isfinite(res.costs[order])]
        if finite.size == 0:
            std = np.minimum(std * 1.5, u_max)
            continue
        elites = cand[finite[:E]]
        mu = elites.mean(axis=0)
        std = np.maximum(elites.std(axis=0), std_floor)

    if not best.feasible:
        best.warning = "no feasible candidate; returning projected zero-control plan"
        best.controls = zero[0].copy()
        log.warning(best.warning)
    best.solve_time_s = time.perf_counter() - t0
    best.n_evaluated = n_eval
    return best


def lattice_values(levels: int, u_max: np.ndarray) -> np.ndarray:
    """Per-step control lattice of shape ``(levels**3, 3)``."""
    if levels < 1:
        raise ParameterDomainError(f"levels must be >= 1, got {levels}")
    axes = [np.linspace(-u, u, levels) if levels > 1 else np.zeros(1) for u in u_max]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return grid.reshape(-1, 3)


def exhaustive_lattice(
    agent: AgentState,
    beliefs: list[Belief],
    cfg: PlannerConfig,
    model: TrackingModel,
    prev_u=None,
    levels: int | None = None,
    batch: int = 20_000,
) -> Plan:
    """Exact minimiser over every control sequence on a per-axis lattice.

    Sequences violating the smoothing box (including the jump from
    ``prev_u``) are discarded before evaluation.

    Raises:
        SizeGuardError: when ``levels ** (3 * N)`` exceeds ``LATTICE_GUARD``.
    """
    t0 = time.perf_counter()
    levels = cfg.lattice_levels if levels is None else levels
    N = cfg.horizon
    n_total = levels ** (3 * N)
    if n_total > LATTICE_GUARD:
        raise SizeGuardError(f"lattice of {n_total} sequences exceeds guard {LATTICE_GUARD}")
    ulim = model.control_limits
    prev_u = np.zeros(3) if prev_u is None else np.asarray(prev_u, dtype=float)
    steps = lattice_values(levels, ulim.u_max)
    n_step = len(steps)

    best_c, best_res, best_k = None, None, None
    for start in range(0, n_total, batch):
        idx = np.arange(start, min(start + batch, n_total))
        digits = np.empty((len(idx), N), dtype=np.int64)
        rem = idx.copy()
        for t in range(N - 1, -1, -1):
            digits[:, t] = rem % n_step
            rem //= n_step
        ctrl = steps[digits]
        seq = np.concatenate([np.broadcast_to(prev_u, (len(idx), 1, 3)), ctrl], axis=1)
        ok = np.all(np.diff(seq, axis=1) ** 2 <= ulim.du_sq + _TOL, axis=(1, 2))
        if not ok.any():
            continue
        ctrl = ctrl[ok]
        res = rollout_batch(ctrl, agent, beliefs, model, **cfg.margin_kw)
        k = _order(res.costs, ctrl)[0]
        if best_c is None:
            best_c, best_res, best_k = ctrl, res, k
            continue
        if _precedes(res.costs[k], ctrl[k], best_res.costs[best_k], best_c[best_k]):
            best_c, best_res, best_k = ctrl, res, k

    if best_c is None:
        raise ParameterDomainError("no lattice sequence satisfies the smoothing box")
    out = _make_plan(best_c, best_res, best_k)
    if not out.feasible:
        out.warning = "no feasible lattice sequence"
    out.solve_time_s = time.perf_counter() - t0
    out.n_evaluated = n_total
    return out


def steer_toward(agent: AgentState, target, speed_h: float, prev_u, model: TrackingModel) -> np.ndarray:
    """Force that steers toward ``target`` under the velocity, force and smoothing limits."""
    dt = model.dynamics.dt
    err = np.asarray(target, dtype=float) - agent.position
    v_des = 0.3 * err / dt
    h = np.hypot(v_des[0], v_des[1])
    cap = min(speed_h, model.limits.v_h_max)
    if h > cap:
        v_des[:2] *= cap / h
    v_des[2] = np.clip(v_des[2], -model.limits.v_v_max, model.limits.v_v_max)
    raw = (v_des - model.dynamics.rho * agent.velocity) / model.dynamics.xi
    return project_sequences(raw[None, None], agent, prev_u, model)[0, 0]


def lost_targets(
    beliefs: list[Belief], margin: float, model: TrackingModel, cap: float = MARGIN_CAP
) -> list[int]:
    """Targets whose sigma box already fills the capped footprint."""
    if not margin:
        return []
    cap_h, cap_v = margin_caps(model, cap)
    return [
        i for i, b in enumerate(beliefs)
        if margin * np.sqrt(b.cov[0, 0]) >= cap_h or margin * np.sqrt(b.cov[1, 1]) >= cap_v
    ]


def reacquire_point(beliefs: list[Belief], model: TrackingModel, anchor=None) -> np.ndarray:
    """Waypoint over the most uncertain estimate, high enough to frame two sigma of it.

    ``anchor`` replaces the estimate's planar mean when given, e.g. with the
    target's last confirmed position.
    """
    b = max(beliefs, key=lambda b: b.trace)
    std = np.sqrt(max(b.cov[0, 0], b.cov[1, 1]))
    z_lo, z_hi = model.limits.z_bounds
    z = float(np.clip(2.0 * std / model.sensor.tan_half_v, z_lo, z_hi))
    xy = b.mean[:2] if anchor is None else np.asarray(anchor, dtype=float)[:2]
    return np.array([xy[0], xy[1], z])


class MPCController:
    """Receding-horizon loop: plan, apply the first control, keep the plan as warm start.

    With ``cfg.reacquire`` set, two situations hand the step to a steering
    law instead:

    * some target is lost (see :func:`lost_targets`): fly at the ceiling
      over the most uncertain lost target's last known position, taken from
      ``anchors`` when given and from its mean otherwise. The estimate of a
      lost target has usually wandered on a poorly observed velocity;
    * the best plan observes nothing over the whole horizon, so the
      objective is flat: fly toward the most uncertain estimate.
    """

    def __init__(self, model: TrackingModel, cfg: PlannerConfig, seed: int = 0):
        self.model = model
        self.cfg = cfg
        self.seed = seed
        self.warm: Plan | None = None
        self.prev_u = np.zeros(3)
        self.last_plan: Plan | None = None
        self.n_reacquire = 0

    def _reacquire_goal(self, p: Plan, beliefs: list[Belief], anchors) -> np.ndarray | None:
        if not self.cfg.reacquire:
            return None
        lost = lost_targets(beliefs, self.cfg.fov_margin_sigma, self.model, self.cfg.margin_cap)
        if lost:
            i = max(lost, key=lambda j: beliefs[j].trace)
            return reacquire_point([beliefs[i]], self.model, None if anchors is None else anchors[i])
        if not p.binaries.any():
            return reacquire_point(beliefs, self.model)
        return None

    def mpc_step(self, agent: AgentState, beliefs: list[Belief], step: int = 0, anchors=None) -> np.ndarray:
        """One receding-horizon step; ``anchors`` are per-target last known positions."""
        rng = np.random.default_rng([self.seed, step])
        p = plan(agent, beliefs, self.cfg, self.model, warm=self.warm, prev_u=self.prev_u, rng=rng)
        self.last_plan = p
        goal = self._reacquire_goal(p, beliefs, anchors)
        if goal is not None:
            u = steer_toward(agent, goal, self.model.limits.v_h_max, self.prev_u, self.model)
            self.warm = None
            self.n_reacquire += 1
        else:
            u = p.controls[0].copy()
            self.warm = p
        self.prev_u = u
        return u
