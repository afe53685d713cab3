import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratagem.controllers import home_policy, uniform_controller, JointPolicy
from stratagem.ctf import (
    ConfigError, EligibilityError, MacroObservation, SimConfig, SimulationError, SwitchingTactics,
    TEAM_TACTICS, eligible_macros, evaluate_blackbox, observe, reset, reward_bounds, run_episode,
    run_macro_step, start_macro, step_primitive,
)
from stratagem.ctf.world import STAY, UP, TAG, simulate_compiled

E1 = SwitchingTactics.stationary(TEAM_TACTICS[1])


def stay(n=6):
    return np.zeros(n, dtype=np.int64)


# ---------------------------------------------------------------- config

def test_default_layout_counts():
    cfg = SimConfig()
    assert cfg.vantage_points_per_side == 10
    kinds = [m.kind for m in cfg.macro_catalog()]
    assert kinds.count("Sentry") == 5 and kinds.count("Pincer") == 3 and kinds.count("Tag") == 1
    assert cfg.n_actions == 29


@pytest.mark.parametrize("kwargs", [
    dict(spawns=((3, 0), (3, 0), (9, 0))),
    dict(flag_rule=("12", "random")),
    dict(gamma=0.0),
    dict(horizon=-1),
    dict(tag_range=-1),
    dict(team_sizes=(4, 3)),
    dict(vantage_points=((1, 1), (1, 7))),
])
def test_invalid_config_rejected(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(**kwargs)


def test_config_hash_stable_and_sensitive():
    assert SimConfig().config_hash() == SimConfig().config_hash()
    assert SimConfig().config_hash() != SimConfig(horizon=100).config_hash()


def test_from_mapping_parses_strings():
    cfg = SimConfig.from_mapping({"horizon": "50", "flag_rule": "3, random", "slip_prob": "0"})
    assert cfg.horizon == 50 and cfg.flag_rule == ("3", "random") and cfg.slip_prob == 0.0
    with pytest.raises(ConfigError):
        SimConfig.from_mapping({"bogus": "1"})


# ----------------------------------------------------------------- reset

def test_reset_deterministic():
    a, b = reset(SimConfig(), 7), reset(SimConfig(), 7)
    assert a.same_as(b)


def test_reset_fixed_flag():
    s = reset(SimConfig(flag_rule=("3", "random")), 0)
    assert tuple(s.flag[0]) == SimConfig().vantage(0, 3)


def test_reset_seeds_differ_only_in_flags():
    cfg = SimConfig()
    candidates = {cfg.vantage(t, c) for t in (0, 1) for c in cfg.flag_candidates}
    flags = set()
    for seed in range(40):
        s = reset(cfg, seed)
        assert np.array_equal(s.pos, reset(cfg, 8).pos)
        assert s.clock == 0 and not s.done
        flags.add((tuple(s.flag[0]), tuple(s.flag[1])))
        assert {tuple(s.flag[0]), tuple(s.flag[1])} <= candidates
    assert len(flags) > 1


def test_reset_positions_on_spawns():
    cfg = SimConfig()
    s = reset(cfg, 1)
    for t in (0, 1):
        for r in range(3):
            assert tuple(s.pos[3 * t + r]) == cfg.spawn(t, r)


# --------------------------------------------------------------- observe

def _blank_state():
    s = reset(SimConfig(flag_rule=("random", "1"), slip_prob=0.0), 0)
    s.pos[3:] = [(0, 6), (11, 6), (0, 7)]
    return s


def test_observe_home_nothing_visible():
    s = reset(SimConfig(), 0)
    o = observe(s, 0)
    assert o.bits == (1, 0, 0, 0, 0, 0) and o.index == 1


def test_observe_enemy_flag_in_sight():
    s = _blank_state()
    s.pos[0] = (6, 8)          # red flag at (6, 10)
    o = observe(s, 0)
    assert o.bits == (0, 1, 0, 0, 0, 0) and o.index == 2


def test_observe_ally_close():
    s = reset(SimConfig(), 0)
    s.pos[1] = (4, 0)
    assert observe(s, 0).index == 17


def test_macro_observation_roundtrip():
    for i in range(64):
        assert MacroObservation.from_index(i).index == i
    with pytest.raises(ValueError):
        MacroObservation.from_index(64)


@given(st.integers(0, 11), st.integers(0, 11), st.integers(0, 2 ** 31))
@settings(max_examples=60, deadline=None)
def test_observation_soundness(x, y, seed):
    s = reset(SimConfig(), seed)
    if any((x, y) == tuple(p) for p in s.pos[1:]):
        return
    s.pos[0] = (x, y)
    o = observe(s, 0)
    assert o.bits[0] == int(y < 6)
    if o.bits[1]:
        fx, fy = s.flag[1]
        assert abs(x - fx) + abs(y - fy) <= s.config.flag_sight_range


# ----------------------------------------------------------------- steps

def test_step_no_events_rewards():
    s = reset(SimConfig(slip_prob=0.0), 0)
    s2, rew, events = step_primitive(s, stay())
    assert list(rew) == [-3.0, -3.0] and events == [] and s2.clock == 1
    assert s.clock == 0  # input state untouched


def test_step_tag_event():
    s = _blank_state()
    s.pos[0], s.pos[3] = (5, 4), (5, 5)     # red intruder next to a blue robot at home
    intents = stay()
    intents[0] = TAG
    s2, rew, events = step_primitive(s, intents)
    assert list(rew) == [10.0 - 3.0, -10.0 - 3.0]
    assert [(e.kind, e.robot, e.other) for e in events] == [("tag", 0, 3)]
    assert tuple(s2.pos[3]) == SimConfig().spawn(1, 0)


def test_step_tag_needs_own_territory():
    s = _blank_state()
    s.pos[0], s.pos[3] = (5, 6), (5, 7)     # blue robot stands in red territory
    intents = stay()
    intents[0] = TAG
    _, rew, events = step_primitive(s, intents)
    assert list(rew) == [-3.0, -3.0] and events == []


def test_step_capture_ends_episode():
    s = _blank_state()
    s.pos[1] = (6, 9)
    intents = stay()
    intents[1] = UP
    s2, rew, events = step_primitive(s, intents)
    assert list(rew) == [500.0 - 3.0, -500.0 - 3.0]
    assert s2.done and s2.winner == 0
    assert [e.kind for e in events] == ["capture", "episode-end"]
    with pytest.raises(SimulationError):
        step_primitive(s2, stay())


def test_blocked_moves_become_stay():
    s = _blank_state()
    s.pos[0], s.pos[1] = (5, 2), (7, 2)
    intents = stay()
    intents[0], intents[1] = 4, 3        # both step into (6, 2)
    s2, _, _ = step_primitive(s, intents)
    assert tuple(s2.pos[0]) == (6, 2) and tuple(s2.pos[1]) == (7, 2)


def test_step_rejects_bad_intents():
    s = reset(SimConfig(), 0)
    with pytest.raises(SimulationError):
        step_primitive(s, np.zeros(5, dtype=np.int64))
    with pytest.raises(SimulationError):
        step_primitive(s, np.full(6, 9))


def test_hand_traced_capture_at_step_40():
    cfg = SimConfig(flag_rule=("random", "1"), slip_prob=0.0)
    s = reset(cfg, 3)
    total = 0.0
    for t in range(40):
        intents = stay()
        if t >= 30:
            intents[1] = UP      # (6, 0) -> (6, 10) in the last ten steps
        s, rew, _ = step_primitive(s, intents)
        total += rew[0]
    assert s.done and s.winner == 0 and s.clock == 40
    assert total == 380.0


# ---------------------------------------------------------------- macros

def test_move_already_there_terminates():
    s = reset(SimConfig(), 0)
    s.pos[0] = SimConfig().vantage(0, 0)
    assert start_macro(s, 0, 0) is True


def test_tag_macro_lasts_one_step():
    s = _blank_state()
    s.pos[0], s.pos[3] = (5, 4), (5, 5)
    tag = s.config.tag_action
    start_macro(s, 0, tag)
    assert run_macro_step(s, 0) == (TAG, True)
    s.macro[3] = 10
    s2, _, _ = step_primitive(s, np.array([TAG, 0, 0, 0, 0, 0]))
    assert s2.macro[0] == -1


def test_tag_ineligible_raises():
    s = reset(SimConfig(), 0)
    with pytest.raises(EligibilityError) as err:
        start_macro(s, 0, s.config.tag_action)
    assert err.value.robot == 0 and "Tag" in str(err.value)
    assert not eligible_macros(s, 0)[-1]


def test_sentry_one_loop():
    cfg = SimConfig(slip_prob=0.0)
    s = reset(cfg, 0)
    p1, p2, p3 = (cfg.vantage(0, j) for j in cfg.sentries[0])
    s.pos[0] = p1
    start_macro(s, 0, 2 * cfg.vantage_points_per_side)
    visited = []
    while s.macro[0] >= 0:
        intent, _ = run_macro_step(s, 0)
        s, _, _ = step_primitive(s, np.array([intent, 0, 0, 0, 0, 0]))
        visited.append(tuple(s.pos[0]))
    assert visited[-1] == p1
    i2, i3 = visited.index(p2), visited.index(p3)
    assert i2 < i3 < len(visited) - 1
    assert p1 not in visited[:i3]


def test_run_macro_step_needs_active_macro():
    with pytest.raises(SimulationError):
        run_macro_step(reset(SimConfig(), 0), 0)


# --------------------------------------------------------------- episodes

class _BadPolicy:
    def start(self, config, team):
        return self

    def decide(self, agent, view):
        return view.eligible.size - 1   # Tag, never eligible at spawn


def test_run_episode_ineligible_policy():
    with pytest.raises(EligibilityError) as err:
        run_episode(_BadPolicy(), E1, SimConfig(), 0)
    assert err.value.robot == 0


def test_horizon_zero_returns_zero():
    res = run_episode(home_policy(SimConfig(horizon=0)), E1, SimConfig(horizon=0), 0)
    assert (res.blue_return, res.red_return, res.steps) == (0.0, 0.0, 0)


def test_always_stay_vs_e1():
    cfg = SimConfig(horizon=60)
    rep = evaluate_blackbox(home_policy(cfg), E1, 20, 5, cfg)
    assert rep.mean_return == -3 * 60 and rep.std_error == 0.0


def test_episode_determinism_and_trace(tmp_path):
    cfg = SimConfig()
    team = JointPolicy((uniform_controller(2, cfg.n_actions),) * 3)
    a = run_episode(team, E1, cfg, 11, trace=True)
    b = run_episode(team, E1, cfg, 11, trace=True)
    assert a.trace == b.trace and a.blue_return == b.blue_return
    path = tmp_path / "trace.jsonl"
    a.write_trace(path)
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"step", "robot", "position", "macro", "intent", "events", "reward"}


def test_decisions_match_terminations():
    cfg = SimConfig()
    team = JointPolicy((uniform_controller(2, cfg.n_actions),) * 3)
    res = run_episode(team, SwitchingTactics.stationary(TEAM_TACTICS[4]), cfg, 2, trace=True)
    for robot in range(6):
        starts = sum(1 for d in res.decisions if d[1] == robot)
        rows = [r for r in res.trace if r["robot"] == robot]
        # every decision but possibly the last one ends inside the episode
        assert starts >= 1 and len(rows) == res.steps


def test_evaluate_single_episode():
    cfg = SimConfig()
    team = JointPolicy((uniform_controller(2, cfg.n_actions),) * 3)
    rep = evaluate_blackbox(team, E1, 1, 4, cfg)
    assert rep.episodes == 1 and rep.std_error == 0.0
    assert rep.mean_return == run_episode(team, E1, cfg, 4).blue_return
    with pytest.raises(ValueError):
        evaluate_blackbox(team, E1, 0, 4, cfg)


def test_evaluate_reproducible():
    cfg = SimConfig()
    team = JointPolicy((uniform_controller(3, cfg.n_actions),) * 3)
    a = evaluate_blackbox(team, E1, 100, 9, cfg)
    b = evaluate_blackbox(team, E1, 100, 9, cfg)
    assert a.mean_return == b.mean_return and np.array_equal(a.returns, b.returns)
    assert a.returns.min() <= a.mean_return <= a.returns.max()


@pytest.mark.parametrize("tactic", [1, 2, 3, 4])
def test_python_loop_matches_compiled_engine(tactic):
    cfg = SimConfig()
    team = JointPolicy((uniform_controller(3, cfg.n_actions),) * 3)
    adv = SwitchingTactics.stationary(TEAM_TACTICS[tactic])
    rows = simulate_compiled(team, adv, cfg, 15, 21)
    for e in range(15):
        res = run_episode(team, adv, cfg, 21, episode=e)
        assert (res.blue_return, res.red_return, res.steps) == (rows[e, 0], rows[e, 1], rows[e, 2])


def test_zero_sum_event_components():
    cfg = SimConfig()
    team = JointPolicy((uniform_controller(3, cfg.n_actions),) * 3)
    rows = simulate_compiled(team, SwitchingTactics.stationary(TEAM_TACTICS[3]), cfg, 300, 1)
    # strip the step penalties; what remains is +/- tag and capture awards
    steps = rows[:, 2]
    blue_events = rows[:, 0] + 3 * steps
    red_events = rows[:, 1] + 3 * steps
    assert np.array_equal(blue_events, -red_events)


def test_reward_bounds_default():
    assert reward_bounds(SimConfig()) == (-4100.0, 3500.0)
