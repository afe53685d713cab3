"""Finite-state macro-action controllers and unified switching controllers.

A :class:`Controller` has ``p`` nodes.  Node ``q`` emits macro-action ``a``
with probability ``lam[q, a]``; after the macro terminates with
macro-observation ``o`` the controller moves to node ``q'`` with probability
``delta[q, o, q']``.

A :class:`UnifiedController` links ``r`` frozen controllers with ``k`` nodes
each.  After the intra-controller move lands on node ``v`` of controller
``s``, it jumps with probability ``gates[s, v]`` to a node of another
controller drawn from ``edges[s * k + v]``.  Edge rows are stored compactly
over the ``(r - 1) * k`` foreign nodes, in global-node order with the own
block removed.

Controllers are immutable; the current node lives in the caller's episode
context, so one object can be shared freely between evaluations.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .ctf import _engine as eng
from .ctf.policy import CompiledTeam
from .rng import ACTION, EDGE, GATE, NODE

N_OBS = eng.N_OBS
_TOL = 1e-9


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _check_stochastic(name, a):
    if not np.isfinite(a).all() or (a < 0).any():
        raise ValueError(f"{name} must hold finite non-negative probabilities")
    if a.shape[-1] and not np.allclose(a.sum(-1), 1.0, rtol=0, atol=_TOL):
        raise ValueError(f"every {name} row must sum to 1")


class Controller:
    """Stochastic finite-state controller over macro-actions."""

    def __init__(self, lam, delta):
        lam = _frozen(lam)
        delta = _frozen(delta)
        if lam.ndim != 2 or lam.shape[0] < 1 or lam.shape[1] < 1:
            raise ValueError("lambda must be (nodes, actions)")
        p = lam.shape[0]
        if delta.shape != (p, N_OBS, p):
            raise ValueError(f"delta must have shape {(p, N_OBS, p)}, got {delta.shape}")
        _check_stochastic("lambda", lam)
        _check_stochastic("delta", delta)
        self.lam = lam
        self.delta = delta

    @property
    def node_count(self) -> int:
        return self.lam.shape[0]

    @property
    def n_actions(self) -> int:
        return self.lam.shape[1]

    def __eq__(self, other):
        return (isinstance(other, Controller) and np.array_equal(self.lam, other.lam)
                and np.array_equal(self.delta, other.delta))

    def __hash__(self):
        return hash((self.lam.tobytes(), self.delta.tobytes()))

    def __repr__(self):
        return f"Controller(nodes={self.node_count}, actions={self.n_actions})"

    # text format: "controller <nodes> <actions> <observations>", then "lambda",
    # nodes rows, "delta", nodes*observations rows; values at 17 significant digits
    def to_text(self) -> str:
        out = io.StringIO()
        _write_controller(out, self)
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Controller":
        lines = _Lines(text)
        return _read_controller(lines)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "Controller":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def uniform_controller(p: int, actions: int) -> Controller:
    """Controller whose output and transition rows are all uniform."""
    if p < 1 or actions < 1:
        raise ValueError("a controller needs at least one node and one action")
    return Controller(np.full((p, actions), 1.0 / actions), np.full((p, N_OBS, p), 1.0 / p))


def deterministic_controller(actions, transitions, n_actions: int) -> Controller:
    """One-hot controller: node ``q`` emits ``actions[q]`` and moves to ``transitions[q, o]``."""
    actions = np.asarray(actions, dtype=np.int64)
    transitions = np.asarray(transitions, dtype=np.int64)
    p = len(actions)
    if transitions.shape != (p, N_OBS):
        raise ValueError(f"transitions must have shape {(p, N_OBS)}")
    lam = np.zeros((p, n_actions))
    lam[np.arange(p), actions] = 1.0
    delta = np.zeros((p, N_OBS, p))
    q, o = np.indices(transitions.shape)
    delta[q, o, transitions] = 1.0
    return Controller(lam, delta)


def _uniform_draw(rng) -> float:
    return float(rng) if isinstance(rng, (float, np.floating)) else float(rng.random())


def sample_action(controller: Controller, node: int, rng) -> int:
    """Macro-action drawn from the output row of ``node``.

    ``rng`` is a ``numpy.random.Generator`` or a single uniform in [0, 1).
    """
    if not 0 <= node < controller.node_count:
        raise IndexError(f"node {node} out of range")
    return int(eng.categorical(controller.lam[node], controller.n_actions, _uniform_draw(rng)))


def next_node(controller: Controller, node: int, observation: int, rng) -> int:
    if not 0 <= node < controller.node_count:
        raise IndexError(f"node {node} out of range")
    if not 0 <= observation < N_OBS:
        raise IndexError(f"observation {observation} out of range")
    row = controller.delta[node, observation]
    return int(eng.categorical(row, controller.node_count, _uniform_draw(rng)))


class UnifiedController:
    """``r`` frozen controllers joined by gated inter-controller edges."""

    def __init__(self, sub_controllers, gates=None, edges=None, initial: int = 0):
        subs = tuple(sub_controllers)
        if not subs:
            raise ValueError("need at least one sub-controller")
        k, a = subs[0].node_count, subs[0].n_actions
        if any(c.node_count != k or c.n_actions != a for c in subs):
            raise ValueError("sub-controllers must share node count and action set")
        r = len(subs)
        gates = np.zeros((r, k)) if gates is None else np.array(gates, dtype=np.float64)
        if gates.shape != (r, k):
            raise ValueError(f"gates must have shape {(r, k)}")
        if not np.isfinite(gates).all() or (gates < 0).any() or (gates > 1).any():
            raise ValueError("gates must lie in [0, 1]")
        width = (r - 1) * k
        if edges is None:
            edges = np.full((r * k, width), 1.0 / width if width else 0.0)
        edges = np.array(edges, dtype=np.float64)
        if edges.shape != (r * k, width):
            raise ValueError(f"edges must have shape {(r * k, width)}")
        _check_stochastic("edge", edges)
        if not 0 <= initial < r:
            raise ValueError("initial sub-controller out of range")
        self.subs = subs
        self.gates = _frozen(gates)
        self.edges = _frozen(edges)
        self.initial = int(initial)

    @property
    def r(self) -> int:
        return len(self.subs)

    @property
    def k(self) -> int:
        return self.subs[0].node_count

    @property
    def n_actions(self) -> int:
        return self.subs[0].n_actions

    @property
    def parameter_count(self) -> int:
        return self.gates.size + self.edges.size

    def with_switching(self, gates, edges, initial=None) -> "UnifiedController":
        return UnifiedController(self.subs, gates, edges, self.initial if initial is None else initial)

    def foreign_node(self, s: int, column: int) -> tuple[int, int]:
        """(controller, node) addressed by compact edge column ``column`` of controller ``s``."""
        g = column if column < s * self.k else column + self.k
        return g // self.k, g % self.k

    def full_edges(self) -> np.ndarray:
        """(r*k, r*k) edge matrix over global nodes, zero on each own block."""
        r, k = self.r, self.k
        out = np.zeros((r * k, r * k))
        for s in range(r):
            rows = slice(s * k, (s + 1) * k)
            cols = [c for c in range(r * k) if c // k != s]
            out[rows, cols] = self.edges[rows]
        return out

    def initial_position(self) -> tuple[int, int]:
        return self.initial, 0

    def __eq__(self, other):
        return (isinstance(other, UnifiedController) and self.subs == other.subs
                and np.array_equal(self.gates, other.gates) and np.array_equal(self.edges, other.edges)
                and self.initial == other.initial)

    def __hash__(self):
        return hash((self.subs, self.gates.tobytes(), self.edges.tobytes(), self.initial))

    def __repr__(self):
        return f"UnifiedController(r={self.r}, k={self.k}, actions={self.n_actions})"

    # text format: "unified <r> <k> <actions> <initial>", r controller blocks,
    # "gates" with r rows, "edges" with r*k rows
    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"unified {self.r} {self.k} {self.n_actions} {self.initial}\n")
        for c in self.subs:
            _write_controller(out, c)
        out.write("gates\n")
        _write_rows(out, self.gates)
        out.write("edges\n")
        _write_rows(out, self.edges)
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "UnifiedController":
        lines = _Lines(text)
        head = lines.expect("unified")
        r, k, _, initial = (int(t) for t in head)
        subs = [_read_controller(lines) for _ in range(r)]
        lines.expect("gates")
        gates = lines.matrix(r, k)
        lines.expect("edges")
        edges = lines.matrix(r * k, (r - 1) * k)
        return cls(subs, gates, edges, initial)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "UnifiedController":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def as_unified(controller) -> UnifiedController:
    return controller if isinstance(controller, UnifiedController) else UnifiedController([controller])


def unified_step(unified: UnifiedController, position, observation: int, rng) -> tuple[int, int]:
    """Move from ``position = (s, node)`` after a macro terminated with ``observation``.

    The frozen sub-controller's transition is taken first; the gate of the
    node reached then decides whether to jump to a foreign node.  ``rng`` is a
    generator or a triple of uniforms (node, gate, edge).
    """
    s, node = position
    if isinstance(rng, (tuple, list)):
        u_node, u_gate, u_edge = rng
    else:
        u_node, u_gate, u_edge = rng.random(3)
    v = next_node(unified.subs[s], node, observation, u_node)
    if unified.r > 1 and u_gate < unified.gates[s, v]:
        col = int(eng.categorical(unified.edges[s * unified.k + v], unified.edges.shape[1], u_edge))
        return unified.foreign_node(s, col)
    return s, v


def switch_weight_count(n: int, r: int, k: int) -> int:
    """Free switching parameters of ``n`` agents: gates plus foreign edges."""
    if min(n, r, k) < 1:
        raise ValueError("n, r and k must be >= 1")
    return n * (r * k + r * k * (r - 1) * k)


@dataclass(frozen=True)
class JointPolicy:
    """One controller (plain or unified) per agent of a team.

    Each agent reads only its own macro-observation and its own current node;
    the joint policy holds no state shared between agents.
    """

    agents: tuple

    def __post_init__(self):
        agents = tuple(self.agents)
        if not agents:
            raise ValueError("a joint policy needs at least one agent")
        a = agents[0].n_actions
        if any(c.n_actions != a for c in agents):
            raise ValueError("agents must share the macro-action set")
        object.__setattr__(self, "agents", agents)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def n_actions(self) -> int:
        return self.agents[0].n_actions

    def _check(self, config, team):
        if config.team_sizes[team] != self.n_agents:
            raise ValueError(f"policy has {self.n_agents} agents, team {team} has {config.team_sizes[team]}")
        if config.n_actions != self.n_actions:
            raise ValueError(f"policy has {self.n_actions} macro-actions, simulator offers {config.n_actions}")

    def start(self, config, team: int) -> "_JointContext":
        self._check(config, team)
        return _JointContext(self, config)

    def compile(self, config, team: int) -> CompiledTeam:
        self._check(config, team)
        units = [as_unified(c) for c in self.agents]
        r = max(u.r for u in units)
        k = max(u.k for u in units)
        out = CompiledTeam.empty(self.n_agents, self.n_actions, r=r, k=k)
        for i, u in enumerate(units):
            for s, c in enumerate(u.subs):
                out.lam[i, s, :u.k] = c.lam
                out.dlt[i, s, :u.k, :, :u.k] = c.delta
            out.gate[i, :u.r, :u.k] = u.gates
            out.edge[i, :u.r * u.k, :u.r * u.k] = u.full_edges()
            out.init_sub[i] = u.initial
            out.nsub[i] = u.r
            out.nnode[i] = u.k
        return out


class _JointContext:
    """Per-episode execution state: the current (controller, node) of each agent."""

    def __init__(self, policy: JointPolicy, config):
        self.units = [as_unified(c) for c in policy.agents]
        self.config = config
        self.position: list = [None] * policy.n_agents
        self.trace: list[tuple[int, int, int, int]] = []   # (step, agent, node, macro)

    def decide(self, agent: int, view) -> int:
        u = self.units[agent]
        if self.position[agent] is None:
            pos = u.initial_position()
        else:
            pos = unified_step(u, self.position[agent], view.observation,
                               (view.draw(NODE), view.draw(GATE), view.draw(EDGE)))
        self.position[agent] = pos
        s, node = pos
        row = u.subs[s].lam[node]
        cells = np.zeros((view.robot + 1, 2), dtype=np.int64)
        cells[view.robot] = view.position
        a = self.config.arrays
        macro = int(eng.controller_choice(a["ip"], a["vp"], cells, view.robot, row,
                                          view.eligible, view.draw(ACTION)))
        self.trace.append((view.step, agent, s * u.k + node, macro))
        return macro


def home_policy(config, team: int = 0, vantage: int = 0) -> JointPolicy:
    """Team that walks to one of its own vantage points and never leaves home."""
    n = config.team_sizes[team]
    c = deterministic_controller([vantage], np.zeros((1, N_OBS), dtype=np.int64), config.n_actions)
    return JointPolicy((c,) * n)


# ---------------------------------------------------------------- text I/O

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_rows(out, m):
    for row in np.asarray(m).reshape(m.shape[0], -1):
        out.write(" ".join(_fmt(v) for v in row) + "\n")


def _write_controller(out, c: Controller):
    out.write(f"controller {c.node_count} {c.n_actions} {N_OBS}\n")
    out.write("lambda\n")
    _write_rows(out, c.lam)
    out.write("delta\n")
    _write_rows(out, c.delta.reshape(c.node_count * N_OBS, c.node_count))


class _Lines:
    def __init__(self, text):
        self.lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        self.i = 0

    def next(self):
        if self.i >= len(self.lines):
            raise ValueError("unexpected end of controller text")
        self.i += 1
        return self.lines[self.i - 1]

    def expect(self, word):
        parts = self.next().split()
        if parts[0] != word:
            raise ValueError(f"line {self.i}: expected {word!r}, found {parts[0]!r}")
        return parts[1:]

    def matrix(self, rows, cols):
        m = np.zeros((rows, cols))
        if cols == 0:
            return m
        for j in range(rows):
            vals = self.next().split()
            if len(vals) != cols:
                raise ValueError(f"line {self.i}: expected {cols} values")
            m[j] = [float(v) for v in vals]
        return m


def _read_controller(lines: _Lines) -> Controller:
    p, a, obs = (int(t) for t in lines.expect("controller"))
    if obs != N_OBS:
        raise ValueError(f"controller text has {obs} observations, expected {N_OBS}")
    lines.expect("lambda")
    lam = lines.matrix(p, a)
    lines.expect("delta")
    delta = lines.matrix(p * N_OBS, p).reshape(p, N_OBS, p)
    return Controller(lam, delta)
