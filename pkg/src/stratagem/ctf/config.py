"""Capture-the-flag configuration, layout and macro-action catalogue.

The blue team owns the lower half of the grid (``y < grid_height // 2``) and
the red team the upper half.  Layout coordinates (vantage points, spawns) are
given for blue; red's are the mirror image ``(x, grid_height - 1 - y)`` so the
two sides share every index.

Team-local macro-action ids, with ``V`` vantage points per side, ``S`` sentry
and ``P`` pincer instances::

    [0, V)            Move(own vantage point j)
    [V, 2V)           Move(enemy vantage point j - V)
    [2V, 2V+S)        Sentry(instance)
    [2V+S, 2V+S+P)    Pincer(instance)
    2V+S+P            Tag
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np


class ConfigError(ValueError):
    """Raised for an invalid simulator or experiment configuration."""


# indices into the integer parameter vector handed to the kernels
P_W, P_H, P_MID, P_TAG, P_CLOSE, P_FAR, P_SIGHT, P_HORIZON = range(8)
P_NB, P_NR, P_V, P_S, P_PN, P_A = range(8, 14)
P_DL, P_DC, P_DR_A, P_DR_B, P_SAFE = range(14, 19)
P_FLAG_BLUE, P_FLAG_RED, P_NSCOUT, P_NCAND = range(19, 23)
N_IPARAMS = 23
# indices into the float parameter vector
F_GAMMA, F_SLIP, F_STEP, F_TAG, F_TAGGED, F_CAPTURE = range(6)

DEFAULT_VANTAGE = (
    (1, 1), (6, 1), (10, 1),          # back row: flag candidates
    (1, 3), (4, 3), (7, 3), (10, 3),  # middle
    (1, 5), (5, 5), (10, 5),          # front
)
DEFAULT_SENTRIES = (
    (7, 3, 0),  # left flank
    (9, 6, 2),  # right flank
    (8, 4, 5),  # middle front
    (0, 1, 2),  # back line
    (7, 8, 9),  # front line
)
# (role-0 staging, role-1 staging, role-2 staging, target); enemy vantage indices
DEFAULT_PINCERS = (
    (3, 7, 4, 0),
    (4, 8, 5, 1),
    (6, 9, 5, 2),
)

MOVE, SENTRY, PINCER, TAG = "Move", "Sentry", "Pincer", "Tag"


@dataclass(frozen=True)
class MacroActionDef:
    """One entry of a team's macro-action catalogue.

    ``points`` holds vantage indices; for ``Move`` it is ``(side, index)``
    with side 0 for own territory and 1 for the enemy's.
    """

    id: int
    kind: str
    points: tuple[int, ...] = ()

    @property
    def name(self) -> str:
        if self.kind == MOVE:
            side = "own" if self.points[0] == 0 else "enemy"
            return f"Move({side}:{self.points[1]})"
        if self.kind == TAG:
            return "Tag"
        return f"{self.kind}({','.join(map(str, self.points))})"


def _parse_flag_rule(value) -> int:
    if isinstance(value, str):
        value = value.strip().lower()
        if value == "random":
            return -1
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"flag rule must be 'random' or a vantage index, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class SimConfig:
    grid_width: int = 12
    grid_height: int = 12
    vantage_points: tuple = DEFAULT_VANTAGE
    team_sizes: tuple = (3, 3)
    spawns: tuple = ((3, 0), (6, 0), (9, 0))
    horizon: int = 200
    gamma: float = 1.0
    tag_range: int = 1
    close_range: int = 2
    far_range: int = 5
    flag_sight_range: int = 3
    step_penalty: float = -1.0
    tag_reward: float = 10.0
    tagged_penalty: float = -10.0
    capture_reward: float = 500.0
    slip_prob: float = 0.1
    # per team: "random" (uniform over flag_candidates) or a vantage index
    flag_rule: tuple = ("random", "random")
    flag_candidates: tuple = (0, 1, 2)
    sentries: tuple = DEFAULT_SENTRIES
    pincers: tuple = DEFAULT_PINCERS
    # scripted-tactic parameters
    dl_sentry: int = 0
    dc_sentry: int = 2
    dr_points: tuple = (9, 6)
    aa_safe_point: int = 4
    scout_points: tuple = (5, 3, 6)
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def vantage_points_per_side(self) -> int:
        return len(self.vantage_points)

    @property
    def n_robots(self) -> int:
        return int(sum(self.team_sizes))

    @property
    def n_actions(self) -> int:
        return 2 * len(self.vantage_points) + len(self.sentries) + len(self.pincers) + 1

    @property
    def tag_action(self) -> int:
        return self.n_actions - 1

    def owns(self, team: int, y: int) -> bool:
        mid = self.grid_height // 2
        return y < mid if team == 0 else y >= mid

    def vantage(self, team: int, index: int) -> tuple[int, int]:
        x, y = self.vantage_points[index]
        return (x, y) if team == 0 else (x, self.grid_height - 1 - y)

    def spawn(self, team: int, role: int) -> tuple[int, int]:
        x, y = self.spawns[role]
        return (x, y) if team == 0 else (x, self.grid_height - 1 - y)

    def validate(self) -> None:
        w, h = self.grid_width, self.grid_height
        if w < 2 or h < 2 or h % 2:
            raise ConfigError("grid must be at least 2x2 with an even height")
        if self.horizon < 0:
            raise ConfigError("horizon must be non-negative")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if not 0.0 <= self.slip_prob < 1.0:
            raise ConfigError("slip_prob must lie in [0, 1)")
        for name in ("tag_range", "close_range", "far_range", "flag_sight_range"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if len(self.team_sizes) != 2 or not all(2 <= n <= 3 for n in self.team_sizes):
            raise ConfigError("each team has 2 or 3 robots")
        v = len(self.vantage_points)
        if v < 1:
            raise ConfigError("at least one vantage point per side")
        if len(set(map(tuple, self.vantage_points))) != v:
            raise ConfigError("vantage points must be distinct")
        for team in (0, 1):
            for j in range(v):
                x, y = self.vantage(team, j)
                if not (0 <= x < w and self.owns(team, y) and 0 <= y < h):
                    raise ConfigError(f"vantage point {j} of team {team} lies outside its territory")
        if len(self.spawns) < max(self.team_sizes):
            raise ConfigError("not enough spawn cells for the largest team")
        cells = set()
        for team in (0, 1):
            for role in range(self.team_sizes[team]):
                x, y = self.spawn(team, role)
                if not (0 <= x < w and 0 <= y < h and self.owns(team, y)):
                    raise ConfigError(f"spawn {role} of team {team} lies outside its territory")
                if (x, y) in cells:
                    raise ConfigError(f"overlapping spawn cell {(x, y)}")
                cells.add((x, y))
        for team in (0, 1):
            rule = _parse_flag_rule(self.flag_rule[team])
            if rule != -1 and not 0 <= rule < v:
                raise ConfigError(f"flag of team {team} must sit on one of its vantage points")
        if not self.flag_candidates or not all(0 <= c < v for c in self.flag_candidates):
            raise ConfigError("flag candidates must be valid vantage indices")
        for s in self.sentries:
            if len(s) != 3 or not all(0 <= p < v for p in s):
                raise ConfigError(f"bad sentry instance {s}")
        for p in self.pincers:
            if len(p) != 4 or not all(0 <= q < v for q in p):
                raise ConfigError(f"bad pincer instance {p}")
        if not 0 <= self.dl_sentry < len(self.sentries) or not 0 <= self.dc_sentry < len(self.sentries):
            raise ConfigError("scripted sentry index out of range")
        if len(self.dr_points) != 2 or not all(0 <= p < v for p in self.dr_points):
            raise ConfigError("dr_points must be two vantage indices")
        if not 0 <= self.aa_safe_point < v:
            raise ConfigError("aa_safe_point out of range")
        if not self.scout_points or not all(0 <= p < v for p in self.scout_points):
            raise ConfigError("scout points must be valid vantage indices")

    def macro_catalog(self) -> list[MacroActionDef]:
        v = len(self.vantage_points)
        out = [MacroActionDef(j, MOVE, (0, j)) for j in range(v)]
        out += [MacroActionDef(v + j, MOVE, (1, j)) for j in range(v)]
        base = 2 * v
        out += [MacroActionDef(base + i, SENTRY, tuple(s)) for i, s in enumerate(self.sentries)]
        base += len(self.sentries)
        out += [MacroActionDef(base + i, PINCER, tuple(p)) for i, p in enumerate(self.pincers)]
        out.append(MacroActionDef(self.n_actions - 1, TAG))
        return out

    def config_hash(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        """Flat arrays consumed by the compiled engine."""
        v = len(self.vantage_points)
        ip = np.zeros(N_IPARAMS, dtype=np.int64)
        ip[P_W], ip[P_H], ip[P_MID] = self.grid_width, self.grid_height, self.grid_height // 2
        ip[P_TAG], ip[P_CLOSE], ip[P_FAR] = self.tag_range, self.close_range, self.far_range
        ip[P_SIGHT], ip[P_HORIZON] = self.flag_sight_range, self.horizon
        ip[P_NB], ip[P_NR] = self.team_sizes
        ip[P_V], ip[P_S], ip[P_PN], ip[P_A] = v, len(self.sentries), len(self.pincers), self.n_actions
        ip[P_DL], ip[P_DC] = self.dl_sentry, self.dc_sentry
        ip[P_DR_A], ip[P_DR_B] = self.dr_points
        ip[P_SAFE] = self.aa_safe_point
        ip[P_FLAG_BLUE] = _parse_flag_rule(self.flag_rule[0])
        ip[P_FLAG_RED] = _parse_flag_rule(self.flag_rule[1])
        ip[P_NSCOUT], ip[P_NCAND] = len(self.scout_points), len(self.flag_candidates)
        fp = np.array([self.gamma, self.slip_prob, self.step_penalty, self.tag_reward,
                       self.tagged_penalty, self.capture_reward], dtype=np.float64)
        vp = np.array([[self.vantage(t, j) for j in range(v)] for t in (0, 1)], dtype=np.int64)
        nmax = max(self.team_sizes)
        spawn = np.array([[self.spawn(t, r) for r in range(nmax)] for t in (0, 1)], dtype=np.int64)
        arrays = {
            "ip": ip,
            "fp": fp,
            "vp": vp,
            "spawn": spawn,
            "sentry": np.array(self.sentries, dtype=np.int64).reshape(-1, 3),
            "pincer": np.array(self.pincers, dtype=np.int64).reshape(-1, 4),
            "cand": np.array(self.flag_candidates, dtype=np.int64),
            "scout": np.array(self.scout_points, dtype=np.int64),
        }
        for a in arrays.values():
            a.setflags(write=False)
        return arrays

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "SimConfig":
        """Build from string key/values as found in a config file section."""
        kwargs = {}
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            if key not in fields:
                raise ConfigError(f"unknown simulator key {key!r}")
            default = fields[key].default
            try:
                kwargs[key] = _coerce(raw, default)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
        return cls(**kwargs)


def _coerce(raw, default):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        if default and isinstance(default[0], tuple):
            # "x,y; x,y; ..." style nested tuples
            return tuple(tuple(int(t) for t in part.split(",")) for part in raw.split(";") if part.strip())
        items = [t.strip() for t in raw.split(",") if t.strip()]
        if default and isinstance(default[0], str):
            return tuple(items)
        return tuple(int(t) for t in items)
    return raw


def read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return parser

