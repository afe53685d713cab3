import numpy as np
import pytest

from stratagem.controllers import home_policy
from stratagem.ctf import (SimConfig, SwitchingTactics, TEAM_TACTICS, TacticId, observe, parse_team_tactic,
                           reset, run_episode, scripted_tactic_step)
from stratagem.ctf.tactics import roster_columns
from stratagem.ctf.world import simulate_compiled

RED0 = 3   # first red robot


def _memory():
    return np.zeros(4, dtype=np.int64)


def test_team_tactics_table():
    assert TEAM_TACTICS[1] == (TacticId.DL, TacticId.DC, TacticId.DR)
    assert TEAM_TACTICS[2] == (TacticId.DL, TacticId.AS, TacticId.DR)
    assert TEAM_TACTICS[3] == (TacticId.AA, TacticId.DC, TacticId.AS)
    assert TEAM_TACTICS[4] == (TacticId.AS, TacticId.AA, TacticId.AS)


def test_parse_team_tactic():
    assert parse_team_tactic("dl, DC,DR") == TEAM_TACTICS[1]
    with pytest.raises(ValueError):
        parse_team_tactic("DL,XX,DR")


def test_dl_patrols_left_flank():
    cfg = SimConfig()
    s = reset(cfg, 0)
    macro = scripted_tactic_step(TacticId.DL, s, RED0, observe(s, RED0).index, _memory())
    cat = cfg.macro_catalog()
    assert cat[macro].kind == "Sentry"
    xs = [cfg.vantage(1, p)[0] for p in cat[macro].points]
    assert max(xs) < cfg.grid_width // 2


def test_defender_tags_intruder():
    cfg = SimConfig()
    s = reset(cfg, 0)
    s.pos[0] = (s.pos[RED0][0], s.pos[RED0][1] - 1)    # blue robot right in front of red robot 0
    macro = scripted_tactic_step(TacticId.DL, s, RED0, observe(s, RED0).index, _memory())
    assert macro == cfg.tag_action


def test_aa_retreats_when_threatened():
    cfg = SimConfig()
    s = reset(cfg, 0)
    s.pos[RED0] = (5, 3)          # on blue ground
    s.pos[0] = (5, 2)             # blue robot in close range
    obs = observe(s, RED0)
    assert obs.bits[0] == 0 and obs.bits[2] == 1
    macro = scripted_tactic_step(TacticId.AA, s, RED0, obs.index, _memory())
    assert macro == cfg.aa_safe_point      # Move(own vantage safe point)


def test_as_pincers_seen_flag():
    cfg = SimConfig(flag_rule=("2", "random"))
    s = reset(cfg, 0)
    fx, fy = cfg.vantage(0, 2)
    s.pos[RED0] = (fx, fy + 2)
    obs = observe(s, RED0)
    assert obs.bits[1] == 1 and obs.bits[0] == 0
    macro = scripted_tactic_step(TacticId.AS, s, RED0, obs.index, _memory())
    entry = cfg.macro_catalog()[macro]
    assert entry.kind == "Pincer" and entry.points[3] == 2


def test_identity_switching_recovers_stationary():
    cfg = SimConfig()
    roster = roster_columns([TEAM_TACTICS[s] for s in (1, 2, 3, 4)])
    team = home_policy(cfg)
    for s in range(4):
        fixed = SwitchingTactics(roster, initial=[s] * 3)
        plain = SwitchingTactics.stationary(TEAM_TACTICS[s + 1])
        a = simulate_compiled(team, fixed, cfg, 30, 4)
        b = simulate_compiled(team, plain, cfg, 30, 4)
        assert np.array_equal(a, b)


def test_switching_history_python_loop():
    cfg = SimConfig()
    roster = roster_columns([TEAM_TACTICS[s] for s in (1, 2, 3, 4)])
    sw = np.zeros((3, 4, 4))
    sw[:, :, 1] = 1.0                      # always switch to tactic index 1
    adv = SwitchingTactics(roster, sw, initial=[0, 0, 0])
    ctx_holder = {}

    class Spy:
        def start(self, config, team):
            ctx_holder["ctx"] = adv.start(config, team)
            return ctx_holder["ctx"]

    run_episode(home_policy(cfg), Spy(), cfg, 0)
    hist = ctx_holder["ctx"].history
    for agent in range(3):
        seq = [s for _, a, s in hist if a == agent]
        assert seq[0] == 0 and all(x == 1 for x in seq[1:]) and len(seq) > 1


def test_switching_validation():
    roster = roster_columns([TEAM_TACTICS[s] for s in (1, 2)])
    with pytest.raises(ValueError):
        SwitchingTactics(roster, np.ones((3, 2, 2)))
    with pytest.raises(ValueError):
        SwitchingTactics(roster, np.ones((2, 2, 2)) / 2)
