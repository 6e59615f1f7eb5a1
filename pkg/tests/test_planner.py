import dataclasses
import itertools
import math

import numpy as np
import pytest

from castrack.agent import AgentState
from castrack.config import default_config
from castrack.errors import ParameterDomainError, SizeGuardError
from castrack.estimator import Belief, FilterParams, kf_predict
from castrack.planner import (
    MPCController,
    PlannerConfig,
    _agent_trajectories,
    exhaustive_lattice,
    extremal_seeds,
    lattice_values,
    lost_targets,
    margin_caps,
    plan,
    reacquire_point,
    rollout,
    rollout_batch,
    shifted_mean,
)

DT, RHO, MASS, GAMMA, QS = 2.0, 0.95, 1.5, 1.0, 0.05


def _model(**limit_kw):
    sim = default_config(0)
    if limit_kw:
        sim = dataclasses.replace(sim, limits=dataclasses.replace(sim.limits, **limit_kw))
    return sim.model()


def _belief(x, y, sd, vx=0.0, vy=0.0, vvar=1.0):
    return Belief([x, y, vx, vy], np.diag([sd**2, sd**2, vvar, vvar]))


# -- straight-line oracle --------------------------------------------------


def _p_detect(z):
    if z <= 10.0:
        return 1.0
    if z < 100.0:
        return -0.0083 * z + 1.083
    return 0.25


def _matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


def _oracle_cost(controls, p, v, beliefs, margin=0.0, cap=0.3, z_top=150.0, v_max=(11.0, 11.0, 3.0)):
    """Step-by-step horizon cost with plain lists and the default constants."""
    A = [[1, 0, DT, 0], [0, 1, 0, DT], [0, 0, 1, 0], [0, 0, 0, 1]]
    At = [list(r) for r in zip(*A)]
    q3, q2, q1 = QS * DT**3 / 3, QS * DT**2 / 2, QS * DT
    Q = [[q3, 0, q2, 0], [0, q3, 0, q2], [q2, 0, q1, 0], [0, q2, 0, q1]]
    th, tv = math.tan(math.radians(34.5)), math.tan(math.radians(27.0))
    cap_h, cap_v = cap * z_top * th, cap * z_top * tv
    p, v = list(p), list(v)
    agent = []
    for u in controls:
        p = [p[i] + DT * v[i] for i in range(3)]
        v = [RHO * v[i] + DT / MASS * u[i] for i in range(3)]
        if any(abs(v[i]) > v_max[i] + 1e-9 for i in range(3)) or not 5.0 <= p[2] <= 150.0:
            return math.inf
        agent.append(list(p))
    total = 0.0
    for b in beliefs:
        m = [[x] for x in b.mean.tolist()]
        P = b.cov.tolist()
        for ax, ay, az in agent:
            P = _matmul(_matmul(A, P), At)
            P = [[P[i][j] + Q[i][j] for j in range(4)] for i in range(4)]
            m = _matmul(A, m)
            hh, hv = az * th, az * tv
            mx = min(margin * math.sqrt(P[0][0]), cap_h) if margin else 0.0
            my = min(margin * math.sqrt(P[1][1]), cap_v) if margin else 0.0
            tx, ty = m[0][0], m[1][0]
            if ax - hh + mx <= tx <= ax + hh - mx and ay - hv + my <= ty <= ay + hv - my:
                s2 = (GAMMA / _p_detect(az)) ** 2
                a, d, c = P[0][0] + s2, P[1][1] + s2, P[0][1]
                det = a * d - c * c
                Sinv = [[d / det, -c / det], [-c / det, a / det]]
                K = _matmul([row[:2] for row in P], Sinv)
                KP = _matmul(K, P[:2])
                P = [[P[i][j] - KP[i][j] for j in range(4)] for i in range(4)]
            total += sum(P[i][i] for i in range(4))
    return total


ORACLE_AGENT = AgentState.at((0.0, 0.0, 20.0), (2.0, 1.0, 0.0))
ORACLE_CONTROLS = np.array([[1.0, -0.5, 0.3], [0.5, 0.2, -0.4]])


def _oracle_belief():
    cov = np.diag([9.0, 16.0, 1.0, 1.0])
    cov[0, 1] = cov[1, 0] = 0.5
    return Belief([8.0, 6.0, 0.2, -0.1], cov)


@pytest.mark.parametrize("margin", [0.0, 1.0])
def test_rollout_matches_straight_line_oracle(margin):
    b = _oracle_belief()
    cost, _, bins = rollout(ORACLE_CONTROLS, ORACLE_AGENT, [b], _model(), margin=margin)
    expect = _oracle_cost(ORACLE_CONTROLS.tolist(), ORACLE_AGENT.position, ORACLE_AGENT.velocity, [b], margin)
    assert bins.any()
    assert cost == pytest.approx(expect, rel=1e-12)


def test_rollout_open_loop_when_out_of_reach():
    model = _model()
    b = _belief(1500.0, 1500.0, 25.0)
    cost, traces, bins = rollout(np.zeros((4, 3)), AgentState.at((0.0, 0.0, 50.0)), [b], model)
    assert not bins.any()
    expect, cur = 0.0, b
    for _ in range(4):
        cur = kf_predict(cur, model.filter)
        expect += cur.trace
    assert cost == pytest.approx(expect, rel=1e-13)


def test_rollout_update_contracts():
    model = _model()
    agent = AgentState.at((0.0, 0.0, 10.0))
    b = _belief(0.0, 0.0, 3.0, vvar=0.0)
    seen, _, bins = rollout(np.zeros((1, 3)), agent, [b], model)
    blind, _, _ = rollout(np.zeros((1, 3)), agent, [b], model, suppress=np.ones((1, 1), dtype=bool))
    assert bins[0, 0]
    assert seen < blind


def test_rollout_flags_infeasible():
    # full downward force from 6 m leaves the altitude box
    cost, _, _ = rollout(np.array([[0, 0, -3.0]] * 3), AgentState.at((0, 0, 6.0), (0, 0, -2.0)),
                         [_belief(0, 0, 1)], _model())
    assert cost == math.inf


def test_rollout_deterministic():
    args = (ORACLE_CONTROLS, ORACLE_AGENT, [_oracle_belief()], _model())
    assert rollout(*args)[0] == rollout(*args)[0]


def test_ablation_never_decreases_cost():
    model = _model()
    rng = np.random.default_rng(5)
    for _ in range(50):
        agent = AgentState.at((0.0, 0.0, rng.uniform(10, 60)))
        beliefs = [_belief(*rng.uniform(-30, 30, 2), rng.uniform(1, 10)) for _ in range(2)]
        ctrl = rng.uniform(-1, 1, (4, 3))
        for margin in (0.0, 1.0):
            base, _, bins = rollout(ctrl, agent, beliefs, model, margin=margin)
            mask = bins & (rng.random(bins.shape) < 0.5)
            ablated, _, _ = rollout(ctrl, agent, beliefs, model, suppress=mask, margin=margin)
            assert ablated >= base


def test_margin_cap_keeps_targets_observable():
    model = _model()
    cap_h, cap_v = margin_caps(model)
    assert cap_h < 150.0 * model.sensor.tan_half_h
    huge = _belief(0.0, 0.0, 1e4)
    _, _, bins = rollout(np.zeros((1, 3)), AgentState.at((0.0, 0.0, 150.0)), [huge], model, margin=1.0)
    assert bins[0, 0]
    assert lost_targets([huge, _belief(0, 0, 1.0)], 1.0, model) == [0]
    assert lost_targets([huge], 0.0, model) == []


# -- plan ------------------------------------------------------------------


def test_plan_deterministic():
    model, cfg = _model(), PlannerConfig(horizon=4, seed=3)
    agent, beliefs = AgentState.at((0, 0, 30.0)), [_belief(20, -10, 5), _belief(-30, 15, 8)]
    a, b = plan(agent, beliefs, cfg, model), plan(agent, beliefs, cfg, model)
    np.testing.assert_array_equal(a.controls, b.controls)
    assert a.cost == b.cost


def test_plan_never_worse_than_zero_plan():
    model = _model()
    rng = np.random.default_rng(9)
    for s in range(20):
        cfg = PlannerConfig(horizon=3, seed=s, iterations=2)
        agent = AgentState.at((0.0, 0.0, rng.uniform(10, 80)), (*rng.uniform(-4, 4, 2), 0.0))
        beliefs = [_belief(*rng.uniform(-80, 80, 2), rng.uniform(1, 30)) for _ in range(1 + s % 3)]
        zero, _, _ = rollout(np.zeros((3, 3)), agent, beliefs, model, **cfg.margin_kw)
        assert plan(agent, beliefs, cfg, model).cost <= zero


def test_plan_degenerate_objective_returns_zero_controls():
    model = _model()
    f = model.filter
    model = dataclasses.replace(model, filter=FilterParams(f.A_c, f.C_obs, np.zeros((4, 4)), f.dt))
    p = plan(AgentState.at((0, 0, 30.0)), [Belief(np.zeros(4), np.zeros((4, 4)))], PlannerConfig(horizon=3), model)
    assert p.cost == 0.0
    np.testing.assert_array_equal(p.controls, np.zeros((3, 3)))


def test_plan_rejects_empty_beliefs():
    with pytest.raises(ParameterDomainError):
        plan(AgentState.at((0, 0, 30.0)), [], PlannerConfig(), _model())


def test_plan_respects_smoothing_from_previous_control():
    model = _model()
    lim = model.control_limits
    prev = np.array([3.0, -3.0, 0.0])
    p = plan(AgentState.at((0, 0, 30.0)), [_belief(-40, 40, 5)], PlannerConfig(horizon=3), model, prev_u=prev)
    seq = np.vstack([prev, p.controls])
    assert np.all(np.diff(seq, axis=0) ** 2 <= lim.du_sq + 1e-9)
    assert np.all(np.abs(p.controls) <= lim.u_max + 1e-12)


def test_extremal_seeds_shape():
    seeds = extremal_seeds(3, np.full(3, 2.0))
    assert seeds.shape == (81, 3, 3)
    assert {float(v) for v in np.unique(seeds)} == {-2.0, 0.0, 2.0}
    # hold length h: steps past h are zero
    assert np.all(seeds[:27, 1:] == 0.0)


def test_planner_config_validation():
    for kw in ({"horizon": 0}, {"elite_frac": 0.9}, {"population": 1}, {"fov_margin_sigma": -1.0}):
        with pytest.raises(ParameterDomainError):
            PlannerConfig(**kw)


def test_shifted_mean():
    assert np.all(shifted_mean(None, 3) == 0.0)
    p = plan(AgentState.at((0, 0, 30.0)), [_belief(10, 0, 3)], PlannerConfig(horizon=3), _model())
    p.controls = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(shifted_mean(p, 3), [[3, 4, 5], [6, 7, 8], [6, 7, 8]])
    np.testing.assert_array_equal(shifted_mean(p, 4)[-1], [6, 7, 8])


# -- lattice oracle --------------------------------------------------------


def test_lattice_single_level_is_zero_plan():
    model = _model()
    agent, b = AgentState.at((0, 0, 40.0)), [_belief(30, 0, 5)]
    cfg = PlannerConfig(horizon=3)
    out = exhaustive_lattice(agent, b, cfg, model, levels=1)
    np.testing.assert_array_equal(out.controls, np.zeros((3, 3)))
    assert out.cost == rollout(np.zeros((3, 3)), agent, b, model, **cfg.margin_kw)[0]


def test_lattice_guard():
    with pytest.raises(SizeGuardError):
        exhaustive_lattice(AgentState.at((0, 0, 40.0)), [_belief(0, 0, 1)], PlannerConfig(horizon=5), _model())


def test_lattice_values():
    v = lattice_values(3, np.array([3.0, 3.0, 3.0]))
    assert v.shape == (27, 3)
    assert {tuple(r) for r in v} == set(itertools.product((-3.0, 0.0, 3.0), repeat=3))


def test_lattice_mirror_symmetry():
    model = _model(du_frac=2.0)
    cfg = PlannerConfig(horizon=2)
    agent = AgentState.at((0.0, 0.0, 20.0))
    east = exhaustive_lattice(agent, [_belief(16.0, 0.0, 2.0)], cfg, model)
    west = exhaustive_lattice(agent, [_belief(-16.0, 0.0, 2.0)], cfg, model)
    assert east.cost == pytest.approx(west.cost, rel=1e-12)
    mirrored = west.controls * np.array([-1.0, 1.0, 1.0])
    assert rollout(mirrored, agent, [_belief(16.0, 0.0, 2.0)], model, margin=1.0)[0] == pytest.approx(east.cost)
    assert east.controls[0, 0] > 0 > west.controls[0, 0]


def test_lattice_matches_re_enumeration():
    model = _model(du_frac=1.0)
    du_sq = model.control_limits.du_sq[0]
    agent = AgentState.at((0.0, 0.0, 20.0))
    beliefs = [_belief(15.0, 3.0, 2.0)]
    out = exhaustive_lattice(agent, beliefs, PlannerConfig(horizon=2), model)
    best = None
    axis = (-3.0, 0.0, 3.0)
    for u1 in itertools.product(axis, repeat=3):
        for u2 in itertools.product(axis, repeat=3):
            seq = [u1, u2]
            steps = [(0.0, 0.0, 0.0), u1, u2]
            if any((b - a) ** 2 > du_sq + 1e-9 for s, t in zip(steps, steps[1:]) for a, b in zip(s, t)):
                continue
            c = _oracle_cost(seq, agent.position, agent.velocity, beliefs, margin=1.0)
            key = (c, sum(x * x for u in seq for x in u), tuple(x for u in seq for x in u))
            if best is None or key < best:
                best = key
    assert out.cost == pytest.approx(best[0], rel=1e-12)
    assert tuple(out.controls.ravel()) == best[2]
    assert out.binaries.any()


def test_plan_not_below_lattice_when_snapped():
    model = _model(du_frac=2.0)
    cfg = PlannerConfig(horizon=3)
    agent = AgentState.at((0.0, 0.0, 25.0))
    beliefs = [_belief(30.0, -10.0, 3.0), _belief(-20.0, 15.0, 4.0)]
    lattice = exhaustive_lattice(agent, beliefs, cfg, model)
    p = plan(agent, beliefs, cfg, model)
    u = model.control_limits.u_max[0]
    snapped = np.round(p.controls / u) * u
    assert rollout(snapped, agent, beliefs, model, margin=1.0)[0] >= lattice.cost
    assert p.cost <= 1.05 * lattice.cost


def test_altitude_trade_off():
    # two targets too far apart to frame at low altitude: the optimum climbs
    model = _model(du_frac=2.0, a_max=1.0)
    cfg = PlannerConfig(horizon=3)
    agent = AgentState.at((0.0, 0.0, 15.0))
    east, west = _belief(12.0, 0.0, 1.0, vvar=0.1), _belief(-12.0, 0.0, 1.0, vvar=0.1)
    one = exhaustive_lattice(agent, [east], cfg, model)
    two = exhaustive_lattice(agent, [east, west], cfg, model)
    z_one = _agent_trajectories(one.controls[None], agent, model)[0][0, -1, 2]
    z_two = _agent_trajectories(two.controls[None], agent, model)[0][0, -1, 2]
    assert z_two > z_one


# -- receding horizon ------------------------------------------------------


def test_mpc_step_clamp_contract_and_warm_start():
    model = _model()
    lim = model.control_limits
    ctl = MPCController(model, PlannerConfig(horizon=3, iterations=3, reacquire=False), seed=1)
    agent = AgentState.at((0.0, 0.0, 30.0))
    beliefs = [_belief(15.0, 5.0, 4.0), _belief(-10.0, -20.0, 6.0)]
    prev = np.zeros(3)
    for k in range(5):
        u = ctl.mpc_step(agent, beliefs, k)
        assert np.all(np.abs(u) <= lim.u_max + 1e-12)
        assert np.all((u - prev) ** 2 <= lim.du_sq + 1e-9)
        np.testing.assert_array_equal(u, ctl.last_plan.controls[0])
        assert ctl.warm is ctl.last_plan
        prev = u
        agent = AgentState.from_vector(
            np.concatenate([agent.position + DT * agent.velocity, RHO * agent.velocity + DT / MASS * u])
        )


def test_mpc_reacquires_lost_target_at_anchor():
    model = _model()
    ctl = MPCController(model, PlannerConfig(horizon=3, iterations=2), seed=0)
    lost = _belief(0.0, 0.0, 2000.0)
    agent = AgentState.at((0.0, 0.0, 30.0))
    u = ctl.mpc_step(agent, [lost], 0, anchors=[np.array([500.0, 0.0])])
    assert ctl.n_reacquire == 1 and ctl.warm is None
    assert u[0] > 0 and u[2] > 0  # toward the anchor and up to the ceiling
    goal = reacquire_point([lost], model, anchor=(500.0, 0.0))
    np.testing.assert_allclose(goal, [500.0, 0.0, 150.0])


def test_reacquire_point_frames_two_sigma():
    model = _model()
    g = reacquire_point([_belief(5.0, 6.0, 10.0), _belief(1.0, 1.0, 1.0)], model)
    assert g[:2].tolist() == [5.0, 6.0]
    assert g[2] == pytest.approx(20.0 / model.sensor.tan_half_v)


def test_rollout_batch_noisy_requires_rng():
    with pytest.raises(ParameterDomainError):
        rollout_batch(np.zeros((1, 2, 3)), ORACLE_AGENT, [_oracle_belief()], _model(), noisy=True)
