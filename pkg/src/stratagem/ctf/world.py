"""Seedable capture-the-flag world with asynchronous macro-action execution.

Public surface: :func:`reset`, :func:`observe`, :func:`step_primitive`,
:func:`start_macro`, :func:`run_macro_step`, :func:`run_episode` and
:func:`evaluate_blackbox`.  The heavy lifting lives in the compiled engine;
this module wraps it with value types, validation and tracing.

Each episode has a 64-bit key, ``episode_key(derive_key(seed, "episodes"), e)``
for episode index ``e``; every random draw in the episode is addressed by
``(key, step, robot, channel)``, so episode ``e`` of any evaluation is the same
game no matter how evaluations are scheduled.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .. import rng
from . import _engine as eng
from .config import ConfigError, SimConfig
from .policy import AgentView, merge_teams

INTENT_NAMES = ("stay", "up", "down", "left", "right", "tag")
STAY, UP, DOWN, LEFT, RIGHT, TAG = range(6)


class SimulationError(RuntimeError):
    """Misuse of the simulator, e.g. stepping a finished episode."""


class EligibilityError(SimulationError):
    """A policy chose a macro-action whose initiation rule does not hold."""

    def __init__(self, robot: int, macro: int, name: str):
        super().__init__(f"robot {robot} may not initiate macro {macro} ({name}) here")
        self.robot = robot
        self.macro = macro


@dataclass(frozen=True)
class MacroObservation:
    """Six yes/no answers, (a) first: own territory, enemy flag in sight,
    opponent close, opponent further away, ally nearby, allied pincer signal."""

    bits: tuple

    @property
    def index(self) -> int:
        return sum(int(b) << k for k, b in enumerate(self.bits))

    @classmethod
    def from_index(cls, index: int) -> "MacroObservation":
        if not 0 <= index < 64:
            raise ValueError("macro-observation index must lie in [0, 64)")
        return cls(tuple((index >> k) & 1 for k in range(6)))


@dataclass(frozen=True)
class Event:
    kind: str               # "tag", "capture" or "episode-end"
    robot: int = -1         # tagger / capturing robot
    other: int = -1         # tagged robot
    team: int = -1


@dataclass
class WorldState:
    config: SimConfig
    key: int
    pos: np.ndarray
    macro: np.ndarray
    stage: np.ndarray
    msteps: np.ndarray
    budget: np.ndarray
    flag: np.ndarray
    meta: np.ndarray

    @property
    def clock(self) -> int:
        return int(self.meta[0])

    @property
    def done(self) -> bool:
        return bool(self.meta[1])

    @property
    def winner(self) -> int | None:
        w = int(self.meta[2])
        return None if w < 0 else w

    @property
    def captured(self) -> frozenset:
        """Teams whose flag has been taken."""
        w = self.winner
        return frozenset() if w is None else frozenset({1 - w})

    def pincer_signals(self) -> list[tuple[int, tuple]]:
        """(emitter, cell) for every robot currently running a Pincer."""
        lo = 2 * self.config.vantage_points_per_side + len(self.config.sentries)
        hi = lo + len(self.config.pincers)
        return [(i, tuple(self.pos[i])) for i in range(len(self.macro)) if lo <= self.macro[i] < hi]

    def team(self, robot: int) -> int:
        return 0 if robot < self.config.team_sizes[0] else 1

    def copy(self) -> "WorldState":
        return WorldState(self.config, self.key, self.pos.copy(), self.macro.copy(), self.stage.copy(),
                          self.msteps.copy(), self.budget.copy(), self.flag.copy(), self.meta.copy())

    def same_as(self, other: "WorldState") -> bool:
        names = ("pos", "macro", "stage", "msteps", "budget", "flag", "meta")
        return self.config == other.config and all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)


@dataclass
class EvalReport:
    mean_return: float
    std_error: float
    episodes: int
    returns: np.ndarray | None = None
    wins: int = 0
    losses: int = 0

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("an evaluation covers at least one episode")

    @classmethod
    def from_returns(cls, returns, winners=None, keep=True) -> "EvalReport":
        x = np.asarray(returns, dtype=np.float64)
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        wins = losses = 0
        if winners is not None:
            winners = np.asarray(winners)
            wins, losses = int((winners == 0).sum()), int((winners == 1).sum())
        return cls(float(x.mean()), se, len(x), x if keep else None, wins, losses)

    def __str__(self):
        return f"{self.mean_return:.3f} ± {self.std_error:.3f}"


@dataclass
class EpisodeResult:
    blue_return: float
    red_return: float
    steps: int
    winner: int | None
    decisions: list = field(default_factory=list)   # (step, robot, macro, observation)
    trace: list | None = None

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.trace or ():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def episode_key(seed: int, episode: int = 0) -> int:
    return int(rng.episode_key(rng.to_key(rng.derive_key(seed, "episodes")), episode))


def _new_state(config: SimConfig, key: int) -> WorldState:
    n = config.n_robots
    i64 = np.int64
    state = WorldState(config, key, np.zeros((n, 2), i64), np.zeros(n, i64), np.zeros(n, i64),
                       np.zeros(n, i64), np.zeros(n, i64), np.zeros((2, 2), i64), np.zeros(3, i64))
    a = config.arrays
    eng.reset(a["ip"], a["vp"], a["spawn"], a["cand"], rng.to_key(key), state.pos, state.macro,
              state.stage, state.msteps, state.budget, state.flag, state.meta)
    return state


def reset(config: SimConfig, seed: int, episode: int = 0) -> WorldState:
    """Initial state: robots on spawn cells, flags placed, clock 0."""
    if not isinstance(config, SimConfig):
        raise ConfigError("reset needs a SimConfig")
    config.validate()
    return _new_state(config, episode_key(seed, episode))


def observe(state: WorldState, robot: int) -> MacroObservation:
    if not 0 <= robot < state.config.n_robots:
        raise IndexError(f"no robot {robot}")
    a = state.config.arrays
    idx = eng.observe(a["ip"], a["vp"], state.pos, state.flag, state.macro, robot)
    return MacroObservation.from_index(int(idx))


def eligible_macros(state: WorldState, robot: int) -> np.ndarray:
    mask = np.zeros(state.config.n_actions, dtype=np.bool_)
    eng.eligible_mask(state.config.arrays["ip"], state.pos, robot, mask)
    return mask


def _macro_name(config, macro):
    cat = config.macro_catalog()
    return cat[macro].name if 0 <= macro < len(cat) else "?"


def start_macro(state: WorldState, robot: int, macro: int) -> bool:
    """Assign ``macro`` to ``robot`` in place; True if it terminated on the spot."""
    a = state.config.arrays
    if not eng.eligible(a["ip"], state.pos, robot, macro):
        raise EligibilityError(robot, macro, _macro_name(state.config, macro))
    return bool(eng.start_macro(a["ip"], a["vp"], a["sentry"], a["pincer"], state.pos, state.macro,
                                state.stage, state.msteps, state.budget, robot, macro))


def run_macro_step(state: WorldState, robot: int) -> tuple[int, bool]:
    """Next primitive intent of ``robot``'s active macro and whether the macro ends with it.

    A macro whose termination rule already holds yields ``(STAY, True)``;
    ``Tag`` always yields ``(TAG, True)`` since it lasts exactly one step.
    """
    if state.macro[robot] < 0:
        raise SimulationError(f"robot {robot} has no active macro-action")
    a = state.config.arrays
    if eng.macro_kind(a["ip"], state.macro[robot]) == eng.K_TAG:
        return TAG, True
    probe = state.copy()
    if eng.advance(a["ip"], a["vp"], a["sentry"], a["pincer"], probe.pos, probe.macro, probe.stage,
                   probe.msteps, probe.budget, robot, False):
        return STAY, True
    intent = eng.macro_intent(a["ip"], a["vp"], a["sentry"], a["pincer"], probe.pos, probe.macro,
                              probe.stage, robot)
    return int(intent), False


def _events(buf, tagged_any=True) -> list[Event]:
    out = [Event("tag", int(buf[k, 0]), int(buf[k, 1])) for k in range(1, int(buf[0, 0]) + 1)]
    if buf[0, 1] >= 0:
        out.append(Event("capture", team=int(buf[0, 1])))
    return out


def step_primitive(state: WorldState, intents) -> tuple[WorldState, np.ndarray, list[Event]]:
    """Apply one joint primitive step; returns the new state, per-team rewards and events.

    ``intents`` holds one of STAY/UP/DOWN/LEFT/RIGHT/TAG per robot.  Tags
    resolve on pre-move positions, moves are simultaneous (blocked moves stay,
    ties go to the lower robot id), then flag captures are checked.
    """
    if state.done:
        raise SimulationError("episode already terminated")
    cfg = state.config
    intents = np.asarray(intents, dtype=np.int64)
    if intents.shape != (cfg.n_robots,) or ((intents < 0) | (intents > TAG)).any():
        raise SimulationError("one intent in 0..5 per robot")
    new = state.copy()
    a = cfg.arrays
    n = cfg.n_robots
    rew = np.zeros(2)
    tagged = np.zeros(n, dtype=np.int64)
    buf = np.zeros((n + 1, 2), dtype=np.int64)
    term = np.zeros(n, dtype=np.int64)
    eng.step_world(a["ip"], a["fp"], a["spawn"], new.pos, new.flag, new.meta, intents,
                   rng.to_key(new.key), rew, tagged, buf)
    eng.post_step(a["ip"], a["vp"], a["sentry"], a["pincer"], new.pos, new.macro, new.stage,
                  new.msteps, new.budget, tagged, term)
    events = _events(buf)
    if new.done:
        events.append(Event("episode-end", team=-1 if new.winner is None else new.winner))
    return new, rew, events


def run_episode(team_policy, adversary_policy, config: SimConfig, seed: int,
                trace: bool = False, episode: int = 0) -> EpisodeResult:
    """Play one episode with arbitrary policy objects (blue = ``team_policy``).

    Robots choose a new macro only when their current one has terminated.
    Returns discounted team returns.  Raises :class:`EligibilityError` when a
    policy picks a macro it may not initiate.
    """
    state = reset(config, seed, episode)
    a = config.arrays
    ip, fp, vp, spawn, sentry, pincer = a["ip"], a["fp"], a["vp"], a["spawn"], a["sentry"], a["pincer"]
    n = config.n_robots
    nb = config.team_sizes[0]
    contexts = (team_policy.start(config, 0), adversary_policy.start(config, 1))
    key = rng.to_key(state.key)
    mask = np.zeros(config.n_actions, dtype=np.bool_)
    intents = np.zeros(n, dtype=np.int64)
    rew = np.zeros(2)
    tagged = np.zeros(n, dtype=np.int64)
    buf = np.zeros((n + 1, 2), dtype=np.int64)
    term = np.zeros(n, dtype=np.int64)
    ret = np.zeros(2)
    disc = 1.0
    decisions = []
    records = [] if trace else None
    catalog = config.macro_catalog() if trace else None
    while not state.done:
        t = state.clock
        for i in range(n):
            if state.macro[i] >= 0:
                continue
            team = 0 if i < nb else 1
            agent = i if team == 0 else i - nb
            obs = int(eng.observe(ip, vp, state.pos, state.flag, state.macro, i))
            eng.eligible_mask(ip, state.pos, i, mask)
            view = AgentView(t, i, agent, team, obs, mask.copy(), (int(state.pos[i, 0]), int(state.pos[i, 1])),
                             int(state.key))
            m = int(contexts[team].decide(agent, view))
            if not (0 <= m < config.n_actions) or not mask[m]:
                raise EligibilityError(i, m, _macro_name(config, m))
            decisions.append((t, i, m, obs))
            eng.start_macro(ip, vp, sentry, pincer, state.pos, state.macro, state.stage, state.msteps,
                            state.budget, i, m)
        active = state.macro.copy()
        eng.advance_world(ip, fp, vp, spawn, sentry, pincer, state.pos, state.macro, state.stage,
                          state.msteps, state.budget, state.flag, state.meta, key, intents, rew,
                          tagged, buf, term)
        ret += disc * rew
        disc *= config.gamma
        if trace:
            evs = _events(buf)
            for i in range(n):
                team = 0 if i < nb else 1
                mine = [e.kind for e in evs if i in (e.robot, e.other)
                        or (e.kind == "capture" and e.team == team)]
                records.append({
                    "step": t,
                    "robot": i,
                    "position": [int(state.pos[i, 0]), int(state.pos[i, 1])],
                    "macro": catalog[active[i]].name if active[i] >= 0 else None,
                    "intent": INTENT_NAMES[int(intents[i])],
                    "events": mine,
                    "reward": float(rew[team]),
                })
    return EpisodeResult(float(ret[0]), float(ret[1]), state.clock, state.winner, decisions, records)


def _compiled(policy, config, team):
    compile_fn = getattr(policy, "compile", None)
    return None if compile_fn is None else compile_fn(config, team)


def simulate_compiled(team_policy, adversary_policy, config: SimConfig, episodes: int, seed: int,
                      first: int = 0) -> np.ndarray | None:
    """Run episodes in the compiled engine; rows are (blue, red, steps, winner).

    Returns ``None`` when either policy cannot be compiled.
    """
    blue = _compiled(team_policy, config, 0)
    red = _compiled(adversary_policy, config, 1)
    if blue is None or red is None:
        return None
    args = merge_teams(blue, red)
    a = config.arrays
    out = np.zeros((episodes, 4))
    base = rng.to_key(rng.derive_key(seed, "episodes"))
    eng.run_batch(a["ip"], a["fp"], a["vp"], a["spawn"], a["sentry"], a["pincer"], a["cand"], a["scout"],
                  *args, base, first, episodes, out)
    return out


def evaluate_blackbox(team_policy, adversary_policy, episodes: int, seed: int,
                      config: SimConfig | None = None, keep_returns: bool = True,
                      compiled: bool = True, first_episode: int = 0) -> EvalReport:
    """Mean blue return (with standard error) over ``episodes`` seeded episodes.

    Plays episodes ``first_episode .. first_episode + episodes - 1`` of the
    stream of ``seed``.  The adversary is only ever played against, never
    inspected.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    config = config or SimConfig()
    rows = None
    if compiled:
        rows = simulate_compiled(team_policy, adversary_policy, config, episodes, seed, first_episode)
    if rows is None:
        res = [run_episode(team_policy, adversary_policy, config, seed, episode=first_episode + e)
               for e in range(episodes)]
        returns = [r.blue_return for r in res]
        winners = [-1 if r.winner is None else r.winner for r in res]
    else:
        returns, winners = rows[:, 0], rows[:, 3]
    return EvalReport.from_returns(returns, winners, keep=keep_returns)


def reward_bounds(config: SimConfig) -> tuple[float, float]:
    """Extremal blue returns ``(R_min, R_max)`` implied by the reward rules.

    A robot can only be tagged while standing in enemy territory and is sent
    home when tagged, so it needs at least one move before it can be tagged
    again: each robot suffers at most ``ceil(H / 2)`` tags.  Step penalties
    accrue for every robot on every step, and at most one capture happens.
    The bounds hold for any policies and any ``gamma`` in (0, 1].
    """
    h = config.horizon
    nb, nr = config.team_sizes
    per_robot = math.ceil(h / 2)
    r_min = -(nb * abs(config.step_penalty) * h + abs(config.capture_reward)
              + abs(config.tagged_penalty) * nb * per_robot)
    r_max = abs(config.capture_reward) + abs(config.tag_reward) * nr * per_robot
    return float(r_min), float(r_max)
