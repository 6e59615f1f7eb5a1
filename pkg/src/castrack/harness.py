"""Closed-loop episodes, scripted baselines, Monte Carlo and timing sweeps."""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .agent import AgentState, check_state, step_agent
from .config import SimConfig
from .errors import BoundaryViolation, ParameterDomainError, SizeGuardError
from .estimator import Belief, kf_init, kf_predict, kf_update
from .planner import MPCController, PlannerConfig, TrackingModel, plan, steer_toward
from .sensor import sense
from .world import CastawayTruth, random_scenario, simulate_truth

log = logging.getLogger(__name__)

THREADS_ENV = "CASTRACK_THREADS"


# -- policies ---------------------------------------------------------------


@dataclass(frozen=True)
class MPCPolicy:
    name: str = "mpc"


@dataclass(frozen=True)
class HoverAt:
    """Fly to the centroid of the current estimates and hold altitude ``z``."""

    z: float = 100.0

    @property
    def name(self) -> str:
        return f"hover:{self.z:g}"


@dataclass(frozen=True)
class Lawnmower:
    """Boustrophedon sweep of the initial estimates' bounding box at altitude ``z``."""

    z: float = 50.0
    spacing: float | None = None
    speed: float = 8.0

    @property
    def name(self) -> str:
        return "lawnmower"


@dataclass(frozen=True)
class OpenLoop:
    """Hold the initial state with the camera disabled (prediction only)."""

    name: str = "openloop"


Policy = MPCPolicy | HoverAt | Lawnmower | OpenLoop


def parse_policy(text: str, sim: SimConfig | None = None) -> Policy:
    """Parse ``mpc``, ``hover[:Z]``, ``lawnmower[:Z]`` or ``openloop``."""
    base = sim.baselines if sim is not None else None
    head, _, arg = text.partition(":")
    head = head.strip().lower()
    try:
        value = float(arg) if arg else None
    except ValueError:
        raise ParameterDomainError(f"bad policy argument in {text!r}") from None
    if head == "mpc" and value is None:
        return MPCPolicy()
    if head == "hover":
        return HoverAt(value if value is not None else (base.hover_altitude if base else 100.0))
    if head == "lawnmower":
        z = value if value is not None else (base.lawnmower_altitude if base else 50.0)
        if base is None:
            return Lawnmower(z)
        return Lawnmower(z, base.lawnmower_spacing, base.lawnmower_speed)
    if head == "openloop" and value is None:
        return OpenLoop()
    raise ParameterDomainError(f"unknown policy {text!r}")


class _Controller:
    sensing = True

    def control(self, step: int, agent: AgentState, beliefs: list[Belief], anchors) -> tuple[np.ndarray, float]:
        """Force for this step and planner wall time in ms; ``anchors`` are last fixes."""
        raise NotImplementedError


class _MPC(_Controller):
    def __init__(self, model: TrackingModel, cfg: PlannerConfig, seed: int):
        self.inner = MPCController(model, cfg, seed)

    def control(self, step, agent, beliefs, anchors):
        u = self.inner.mpc_step(agent, beliefs, step, anchors)
        return u, self.inner.last_plan.solve_time_s * 1e3


class _Hover(_Controller):
    def __init__(self, model: TrackingModel, z: float):
        self.model, self.z = model, z
        self.prev_u = np.zeros(3)

    def control(self, step, agent, beliefs, anchors):
        c = np.mean([b.position for b in beliefs], axis=0)
        u = steer_toward(agent, (c[0], c[1], self.z), self.model.limits.v_h_max, self.prev_u, self.model)
        self.prev_u = u
        return u, 0.0


class _Lawnmower(_Controller):
    def __init__(self, model: TrackingModel, policy: Lawnmower, beliefs: list[Belief]):
        self.model = model
        self.z = policy.z
        self.speed = policy.speed
        half_h = policy.z * model.sensor.tan_half_h
        half_v = policy.z * model.sensor.tan_half_v
        spacing = policy.spacing if policy.spacing is not None else 1.8 * half_v
        pts = np.array([b.position for b in beliefs])
        # cover two sigma of the initial uncertainty around every estimate
        pad = 2.0 * max(np.sqrt(max(b.cov[0, 0], b.cov[1, 1])) for b in beliefs)
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        inner = (lo[1] + 0.5 * half_v, hi[1] - 0.5 * half_v)
        n_legs = max(1, int(np.ceil((inner[1] - inner[0]) / spacing)) + 1)
        ys = np.linspace(inner[0], inner[1], n_legs) if inner[1] > inner[0] else np.array([0.5 * (lo[1] + hi[1])])
        wps = []
        for j, y in enumerate(ys):
            xs = (lo[0], hi[0]) if j % 2 == 0 else (hi[0], lo[0])
            wps += [(xs[0], y), (xs[1], y)]
        # sweep forward then retrace, so the pattern repeats without a long transit
        self.waypoints = wps + wps[-2:0:-1]
        self.idx = 0
        self.prev_u = np.zeros(3)
        self.reach = max(policy.speed * model.dynamics.dt, 5.0)

    def control(self, step, agent, beliefs, anchors):
        wx, wy = self.waypoints[self.idx]
        if np.hypot(wx - agent.position[0], wy - agent.position[1]) < self.reach:
            self.idx = (self.idx + 1) % len(self.waypoints)
            wx, wy = self.waypoints[self.idx]
        u = steer_toward(agent, (wx, wy, self.z), self.speed, self.prev_u, self.model)
        self.prev_u = u
        return u, 0.0


class _OpenLoop(_Controller):
    sensing = False

    def control(self, step, agent, beliefs, anchors):
        return np.zeros(3), 0.0


def _controller(policy: Policy, sim: SimConfig, model, beliefs, seed: int) -> _Controller:
    if isinstance(policy, MPCPolicy):
        return _MPC(model, sim.planner, seed)
    if isinstance(policy, HoverAt):
        return _Hover(model, policy.z)
    if isinstance(policy, Lawnmower):
        return _Lawnmower(model, policy, beliefs)
    if isinstance(policy, OpenLoop):
        return _OpenLoop()
    raise ParameterDomainError(f"unsupported policy {policy!r}")


# -- episodes ---------------------------------------------------------------


@dataclass
class EpisodeLog:
    """Per-step arrays of one closed-loop run; index ``k`` is step ``k + 1``."""

    policy: str
    seed: int
    steps: np.ndarray
    agent: np.ndarray  # (D, 6)
    control: np.ndarray  # (D, 3)
    truth: np.ndarray  # (D, C, 3)
    mean: np.ndarray  # (D, C, 4)
    trace: np.ndarray  # (D, C)
    detected: np.ndarray  # (D, C)
    plan_ms: np.ndarray  # (D,)
    initial_trace: np.ndarray  # (C,)
    bound_events: int = 0
    reacquire_steps: int = 0

    def __len__(self) -> int:
        return len(self.steps)

    def summary(self) -> dict:
        n = len(self)
        if n == 0:
            C = len(self.initial_trace)
            return {
                "mean_trace_per_target": [0.0] * C,
                "mean_summed_trace": 0.0,
                "final_summed_trace": 0.0,
                "total_detections": 0,
                "mean_plan_ms": 0.0,
                "max_plan_ms": 0.0,
                "bound_events": 0,
                "reacquire_steps": 0,
            }
        return {
            "mean_trace_per_target": self.trace.mean(axis=0).tolist(),
            "mean_summed_trace": float(self.trace.sum(axis=1).mean()),
            "final_summed_trace": float(self.trace[-1].sum()),
            "total_detections": int(self.detected.sum()),
            "mean_plan_ms": float(self.plan_ms.mean()),
            "max_plan_ms": float(self.plan_ms.max()),
            "bound_events": int(self.bound_events),
            "reacquire_steps": int(self.reacquire_steps),
        }


def _saturate(agent: AgentState, model: TrackingModel) -> AgentState:
    lim = model.limits
    pos = np.clip(agent.position, lim.pos_lo, lim.pos_hi)
    vel = np.clip(agent.velocity, -lim.v_max, lim.v_max)
    return AgentState(pos, vel)


def run_episode(sim: SimConfig, policy: Policy, seed: int) -> EpisodeLog:
    """Simulate one episode; fully determined by ``sim`` and ``seed``."""
    sc = sim.scenario
    model = sim.model()
    D, C = sc.duration, sc.n_castaways
    truth = simulate_truth(sc, D + 1)

    radar_ss, sense_ss, plan_ss = np.random.SeedSequence(seed).spawn(3)
    radar_rng = np.random.default_rng(radar_ss)
    sense_rng = np.random.default_rng(sense_ss)
    plan_seed = int(plan_ss.generate_state(1)[0])

    fixes = truth[:, 0, :2] + radar_rng.normal(0.0, sc.radar_sigma, size=(C, 2))
    beliefs = [kf_init(fixes[i], sc.radar_sigma, model.filter) for i in range(C)]
    anchors = fixes.copy()  # last known position of each target
    agent = sc.agent_init
    check_state(agent, model.limits)
    ctrl = _controller(policy, sim, model, beliefs, plan_seed)

    out_agent = np.empty((D, 6))
    out_u = np.empty((D, 3))
    out_mean = np.empty((D, C, 4))
    out_trace = np.empty((D, C))
    out_det = np.zeros((D, C), dtype=bool)
    out_ms = np.empty(D)
    bound_events = 0
    initial_trace = np.array([b.trace for b in beliefs])

    for k in range(D):
        u, ms = ctrl.control(k, agent, beliefs, anchors)
        try:
            agent = step_agent(agent, u, model.dynamics, model.limits)
        except BoundaryViolation as exc:
            bound_events += 1
            log.warning("step %d: %s; saturating state", k + 1, exc)
            agent = _saturate(step_agent(agent, u, model.dynamics), model)
        truths = [CastawayTruth(i, truth[i, k + 1]) for i in range(C)]
        meas = sense(agent, truths, model.sensor, sense_rng, step=k + 1) if ctrl.sensing else []
        by_id = {m.target_id: m for m in meas}
        new = []
        for i, b in enumerate(beliefs):
            m = by_id.get(i)
            new.append(kf_update(kf_predict(b, model.filter), m, m is not None, model.filter))
            out_det[k, i] = m is not None
            if m is not None:
                anchors[i] = m.z_pos
        beliefs = new
        out_agent[k] = agent.vector
        out_u[k] = u
        out_mean[k] = [b.mean for b in beliefs]
        out_trace[k] = [b.trace for b in beliefs]
        out_ms[k] = ms

    return EpisodeLog(
        policy=policy.name,
        seed=seed,
        steps=np.arange(1, D + 1),
        agent=out_agent,
        control=out_u,
        truth=np.transpose(truth[:, 1:], (1, 0, 2)) if D else np.empty((0, C, 3)),
        mean=out_mean,
        trace=out_trace,
        detected=out_det,
        plan_ms=out_ms,
        initial_trace=initial_trace,
        bound_events=bound_events,
        reacquire_steps=ctrl.inner.n_reacquire if isinstance(ctrl, _MPC) else 0,
    )


# -- Monte Carlo ------------------------------------------------------------


SUMMARY_METRICS = ("mean_summed_trace", "final_summed_trace", "total_detections", "mean_plan_ms")


def thread_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParameterDomainError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _run_setup(sim: SimConfig, child: np.random.SeedSequence) -> tuple[SimConfig, int]:
    """Randomise the agent start near the castaways and derive an episode seed."""
    mc = sim.monte_carlo
    # spawn() advances the parent's counter, so work on a fresh copy: every
    # policy and every worker process then sees the same streams for a run
    fresh = np.random.SeedSequence(child.entropy, spawn_key=child.spawn_key, pool_size=child.pool_size)
    init_ss, episode_ss = fresh.spawn(2)
    rng = np.random.default_rng(init_ss)
    centroid = np.mean(np.asarray(sim.scenario.initial_positions)[:, :2], axis=0)
    r = mc.init_radius * np.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * np.pi)
    start = (centroid[0] + r * np.cos(theta), centroid[1] + r * np.sin(theta), mc.init_altitude)
    scenario = dataclasses.replace(sim.scenario, agent_init=AgentState.at(start))
    return sim.with_scenario(scenario), int(episode_ss.generate_state(1)[0])


def _mc_task(args):
    sim, policy, child, run = args
    run_sim, seed = _run_setup(sim, child)
    summary = run_episode(run_sim, policy, seed).summary()
    summary["run"] = run
    summary["seed"] = seed
    return summary


def monte_carlo(
    sim: SimConfig,
    policies: list[Policy],
    n_runs: int,
    base_seed: int,
    workers: int | None = None,
) -> dict:
    """Run ``n_runs`` seeded episodes per policy and tabulate mean and std.

    Runs share their random streams across policies (common random numbers),
    so a policy listed twice produces identical rows.
    """
    if n_runs < 1:
        raise ParameterDomainError(f"n_runs must be >= 1, got {n_runs}")
    children = np.random.SeedSequence(base_seed).spawn(n_runs)
    tasks = [(sim, p, children[r], r) for p in policies for r in range(n_runs)]
    workers = thread_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mc_task, tasks))
    else:
        results = [_mc_task(t) for t in tasks]

    rows = []
    for j, policy in enumerate(policies):
        runs = sorted(results[j * n_runs:(j + 1) * n_runs], key=lambda s: s["run"])
        stats = {}
        for metric in SUMMARY_METRICS:
            vals = np.array([r[metric] for r in runs], dtype=float)
            stats[metric] = {"mean": float(vals.mean()), "std": float(vals.std())}
        rows.append({"policy": policy.name, "n_runs": n_runs, "metrics": stats, "runs": runs})
    return {"base_seed": base_seed, "n_runs": n_runs, "rows": rows}


# -- timing -----------------------------------------------------------------

MAX_SWEEP_HORIZON = 30
MAX_SWEEP_TARGETS = 64
MAX_SWEEP_WORK = 5_000_000


def timing_sweep(
    sim: SimConfig,
    horizons,
    target_counts,
    n_solves: int,
    seed: int = 0,
) -> dict:
    """Mean wall time of one planner call for every ``(N, C)`` cell.

    Each solve plans from a fresh random agent state over freshly drawn
    beliefs, so cells are not helped by caching or warm starts.
    """
    horizons, target_counts = list(horizons), list(target_counts)
    if n_solves < 1:
        raise ParameterDomainError(f"n_solves must be >= 1, got {n_solves}")
    if not horizons or not target_counts:
        raise ParameterDomainError("need at least one horizon and one target count")
    pc = sim.planner
    for N in horizons:
        for C in target_counts:
            work = pc.population * pc.iterations * N * C
            if N > MAX_SWEEP_HORIZON or C > MAX_SWEEP_TARGETS or work > MAX_SWEEP_WORK or N < 1 or C < 1:
                raise SizeGuardError(
                    f"cell N={N}, C={C} exceeds guards (N <= {MAX_SWEEP_HORIZON}, "
                    f"C <= {MAX_SWEEP_TARGETS}, work {work} <= {MAX_SWEEP_WORK})"
                )
    model = sim.model()
    rng = np.random.default_rng(seed)

    def one_cell(N, C):
        cfg = dataclasses.replace(pc, horizon=N)
        sc = random_scenario(int(rng.integers(2**31)), n_castaways=C, duration=0, dt=sim.scenario.dt)
        times = []
        for _ in range(n_solves):
            beliefs = [
                kf_init(np.asarray(p[:2]) + rng.normal(0, sc.radar_sigma, 2), sc.radar_sigma, model.filter)
                for p in sc.initial_positions
            ]
            start = (*rng.uniform(-60.0, 60.0, 2), rng.uniform(20.0, 60.0))
            agent = AgentState.at(start)
            p = plan(agent, beliefs, cfg, model, rng=np.random.default_rng(int(rng.integers(2**31))))
            times.append(p.solve_time_s)
        return float(np.mean(times)), float(np.std(times))

    one_cell(horizons[0], target_counts[0])  # warm-up
    cells = []
    for N in horizons:
        for C in target_counts:
            mean_s, std_s = one_cell(N, C)
            cells.append({"N": N, "C": C, "mean_s": mean_s, "std_s": std_s, "n_solves": n_solves})

    grid = {(c["N"], c["C"]): c["mean_s"] for c in cells}
    hs, cs = sorted(horizons), sorted(target_counts)
    mono_n = all(grid[(a, c)] <= grid[(b, c)] for c in cs for a, b in zip(hs, hs[1:]))
    mono_c = all(grid[(n, a)] <= grid[(n, b)] for n in hs for a, b in zip(cs, cs[1:]))
    if not (mono_n and mono_c):
        log.warning("plan time is not monotone over the sweep grid")
    return {"seed": seed, "cells": cells, "monotone_in_N": mono_n, "monotone_in_C": mono_c}
