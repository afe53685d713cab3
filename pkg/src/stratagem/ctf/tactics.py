"""Scripted adversary tactics and the team tactics built from them.

Individual tactics:

* ``DL`` patrols the left-flank sentry loop, ``DC`` the middle-front loop;
  both tag an intruder as soon as one is within tagging range.
* ``DR`` shuttles between the two right-flank points with ``Move``.
* ``AS`` scouts enemy vantage points and, once the enemy flag is in sight,
  launches the pincer aimed at the flag candidate it estimates holds the flag.
* ``AA`` behaves like ``AS`` but retreats to a safe point at home whenever an
  opponent is in close proximity on foreign ground.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np

from .. import rng
from . import _engine as eng
from .policy import AgentView, CompiledTeam


class TacticId(IntEnum):
    DL = eng.DL
    DR = eng.DR
    DC = eng.DC
    AS = eng.AS
    AA = eng.AA


DL, DR, DC, AS, AA = TacticId.DL, TacticId.DR, TacticId.DC, TacticId.AS, TacticId.AA

# team tactics E^1..E^4 of the three-robot opposition
TEAM_TACTICS = {
    1: (DL, DC, DR),
    2: (DL, AS, DR),
    3: (AA, DC, AS),
    4: (AS, AA, AS),
}


def parse_team_tactic(text: str) -> tuple[TacticId, ...]:
    """``"DL,DC,DR"`` -> ``(DL, DC, DR)``."""
    try:
        return tuple(TacticId[t.strip().upper()] for t in text.split(",") if t.strip())
    except KeyError as exc:
        raise ValueError(f"unknown tactic {exc.args[0]!r} in {text!r}") from None


def roster_columns(team_tactics) -> np.ndarray:
    """Per-agent tactic rosters: row k lists agent k's tactic in each team tactic."""
    rows = [list(tt) for tt in team_tactics]
    if len({len(r) for r in rows}) != 1:
        raise ValueError("team tactics must all have the same size")
    return np.array(rows, dtype=np.int64).T.copy()


def scripted_tactic_step(tactic, state, robot: int, observation: int, memory: np.ndarray) -> int:
    """Macro chosen by ``tactic`` for ``robot``; ``memory`` (4 ints) is updated in place."""
    a = state.config.arrays
    mask = np.zeros(state.config.n_actions, dtype=np.bool_)
    eng.eligible_mask(a["ip"], state.pos, robot, mask)
    return int(eng.script_decide(a["ip"], a["vp"], a["pincer"], a["cand"], a["scout"],
                                 int(tactic), robot, state.pos, int(observation),
                                 bool(mask[-1]), memory))


class _SwitchingContext:
    def __init__(self, policy, config):
        self.policy = policy
        self.config = config
        n = policy.roster.shape[0]
        self.current = np.full(n, -1, dtype=np.int64)
        self.memory = np.zeros((n, 4), dtype=np.int64)
        self.history: list[tuple[int, int, int]] = []

    def decide(self, agent: int, view: AgentView) -> int:
        p = self.policy
        r = p.roster.shape[1]
        if self.current[agent] < 0:
            init = -1 if p.initial is None else p.initial[agent]
            if init >= 0:
                self.current[agent] = init
            else:
                first = view.robot - view.agent
                u = rng.uniform(rng.to_key(view.key), 0, first, rng.EDGE)
                self.current[agent] = min(int(u * r), r - 1)
        else:
            s2 = eng.categorical(p.switch[agent, self.current[agent]], r, view.draw(rng.EDGE))
            if s2 != self.current[agent]:
                self.current[agent] = s2
                self.memory[agent] = 0
        self.history.append((view.step, agent, int(self.current[agent])))
        tactic = p.roster[agent, self.current[agent]]
        a = self.config.arrays
        return int(eng.script_decide(a["ip"], a["vp"], a["pincer"], a["cand"], a["scout"],
                                     int(tactic), view.robot, _own_position(view),
                                     view.observation, bool(view.eligible[-1]), self.memory[agent]))


def _own_position(view):
    # script_decide reads only the deciding robot's own row
    pos = np.zeros((view.robot + 1, 2), dtype=np.int64)
    pos[view.robot] = view.position
    return pos


class SwitchingTactics:
    """Scripted team whose agents switch tactics at their own macro terminations.

    ``roster[k]`` lists the tactics available to agent ``k``; ``switch[k]`` is
    its row-stochastic tactic-to-tactic matrix; ``initial`` fixes the starting
    tactic index per agent.  With ``initial=None`` one index is drawn
    uniformly per episode and shared by the whole team, so the team opens with
    one complete team tactic.
    """

    def __init__(self, roster, switch=None, initial=None):
        self.roster = np.asarray(roster, dtype=np.int64)
        if self.roster.ndim != 2:
            raise ValueError("roster must be (agents, tactics)")
        n, r = self.roster.shape
        if switch is None:
            switch = np.broadcast_to(np.eye(r), (n, r, r))
        self.switch = np.array(switch, dtype=np.float64)
        if self.switch.shape != (n, r, r):
            raise ValueError(f"switch weights must have shape {(n, r, r)}")
        if (self.switch < 0).any() or not np.allclose(self.switch.sum(-1), 1.0, atol=1e-9):
            raise ValueError("switch weights must be row-stochastic")
        self.initial = None if initial is None else tuple(int(s) for s in initial)

    @classmethod
    def stationary(cls, team_tactic) -> "SwitchingTactics":
        """A fixed team tactic such as ``(DL, DC, DR)``."""
        return cls(np.array([[int(t)] for t in team_tactic]), initial=[0] * len(team_tactic))

    @property
    def n_agents(self) -> int:
        return self.roster.shape[0]

    def start(self, config, team: int):
        if config.team_sizes[team] != self.n_agents:
            raise ValueError(f"tactic has {self.n_agents} agents, team {team} has {config.team_sizes[team]}")
        return _SwitchingContext(self, config)

    def compile(self, config, team: int) -> CompiledTeam:
        n, r = self.roster.shape
        if config.team_sizes[team] != n:
            raise ValueError(f"tactic has {n} agents, team {team} has {config.team_sizes[team]}")
        out = CompiledTeam.empty(n, config.n_actions, tactics=r)
        out.kind[:] = 1
        out.roster[:] = self.roster
        out.switch[:] = self.switch
        out.init_tac[:] = -1 if self.initial is None else self.initial
        out.ntac[:] = r
        return out

    def __repr__(self):
        names = [[TacticId(t).name for t in row] for row in self.roster]
        return f"SwitchingTactics({names})"
