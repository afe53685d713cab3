"""Fusing trained stratagems into switching controllers.

Each agent's ``r`` stratagem controllers are frozen and joined into a
:class:`~stratagem.controllers.UnifiedController`; only the switching gates,
the inter-controller edges and the starting sub-controller are searched.
The objective is the average return against ``m`` adversaries whose
tactic-switching weights ``u`` are drawn from a prior::

    J(w) = (1/m) * sum_i  L(C(w), E(u_i))

With a single known ``u`` this is the good-for-one problem; with ``m`` prior
draws it is the good-for-all problem.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .controllers import JointPolicy, UnifiedController
from .ctf._engine import categorical
from .ctf.config import SimConfig
from .ctf.tactics import TEAM_TACTICS, SwitchingTactics, roster_columns
from .ctf.world import evaluate_blackbox
from .gdice import BlockSpec, CandidateWeights, GDiceConfig, SamplingDistribution, optimize

DEFAULT_GATE = 0.1


@dataclass(frozen=True)
class AdversarySwitchWeights:
    """Row-stochastic ``(agents, r, r)`` tactic-to-tactic switching matrices."""

    matrices: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrices, dtype=np.float64)
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise ValueError("switch weights must have shape (agents, r, r)")
        if (m < 0).any() or not np.allclose(m.sum(-1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("switch weights must be row-stochastic")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @property
    def n_agents(self) -> int:
        return self.matrices.shape[0]

    @property
    def r(self) -> int:
        return self.matrices.shape[1]

    @classmethod
    def identity(cls, n_agents: int, r: int) -> "AdversarySwitchWeights":
        return cls(np.broadcast_to(np.eye(r), (n_agents, r, r)))

    def adversary(self, roster=None, initial=None) -> SwitchingTactics:
        """Scripted opposition E(u): agent ``k`` runs ``roster[k][s]`` and switches by ``u``."""
        roster = default_roster() if roster is None else np.asarray(roster)
        return SwitchingTactics(roster, self.matrices, initial)

    def __eq__(self, other):
        return isinstance(other, AdversarySwitchWeights) and np.array_equal(self.matrices, other.matrices)

    def __hash__(self):
        return hash(self.matrices.tobytes())


def default_roster() -> np.ndarray:
    """Per-agent tactic rosters of the four team tactics."""
    return roster_columns([TEAM_TACTICS[s] for s in sorted(TEAM_TACTICS)])


@dataclass(frozen=True)
class SwitchWeightPrior:
    """Independent symmetric Dirichlet prior on every switching row."""

    n_agents: int = 3
    r: int = 4
    concentration: float = 1.0
    m: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.concentration <= 0:
            raise ValueError("concentration must be > 0")
        if self.m < 1 or self.n_agents < 1 or self.r < 1:
            raise ValueError("m, n_agents and r must be >= 1")

    def candidates(self, label: str = "train", count: int | None = None) -> list[AdversarySwitchWeights]:
        """``count`` (default ``m``) independent draws under the labelled stream."""
        g = rngmod.generator(self.seed, "switch-weights", label)
        return [sample_switch_weights(self, g) for _ in range(self.m if count is None else count)]


def sample_switch_weights(prior: SwitchWeightPrior, rng: np.random.Generator) -> AdversarySwitchWeights:
    alpha = np.full(prior.r, prior.concentration)
    draw = rng.dirichlet(alpha, size=(prior.n_agents, prior.r))
    # re-normalise: large concentrations can leave rounding error above 1e-9
    return AdversarySwitchWeights(draw / draw.sum(-1, keepdims=True))


def adversary_switch_step(current: int, weights, rng) -> int:
    """Next tactic of one agent; ``weights`` is its ``(r, r)`` matrix.

    ``rng`` is a generator or a single uniform in [0, 1).
    """
    w = np.asarray(weights, dtype=np.float64)
    u = float(rng) if isinstance(rng, (float, np.floating)) else float(rng.random())
    return int(categorical(w[current], w.shape[1], u))


def write_switch_weights_csv(path, weights: Sequence[AdversarySwitchWeights], header: str | None = None):
    """One row per (candidate, agent, from-tactic); columns hold the row's probabilities."""
    r = weights[0].r
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidate", "agent", "from"] + [f"to_{j}" for j in range(r)])
        for c, u in enumerate(weights):
            for a in range(u.n_agents):
                for s in range(r):
                    w.writerow([c, a, s] + [repr(float(x)) for x in u.matrices[a, s]])


def read_switch_weights_csv(path) -> list[AdversarySwitchWeights]:
    rows = {}
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    next(reader)
    for rec in reader:
        c, a, s = (int(x) for x in rec[:3])
        rows.setdefault(c, {}).setdefault(a, {})[s] = [float(x) for x in rec[3:]]
    out = []
    for c in sorted(rows):
        agents = rows[c]
        out.append(AdversarySwitchWeights(np.array([[agents[a][s] for s in sorted(agents[a])]
                                                    for a in sorted(agents)])))
    return out


def build_unified(stratagems: Sequence[JointPolicy], gate: float = DEFAULT_GATE,
                  initial: int = 0) -> JointPolicy:
    """Join the ``r`` stratagem teams into one team of unified controllers.

    Agent ``i`` gets the ``i``-th controller of every stratagem, copied
    verbatim; gates start at ``gate`` and edges uniform.
    """
    if not stratagems:
        raise ValueError("need at least one stratagem")
    n = stratagems[0].n_agents
    if any(s.n_agents != n for s in stratagems):
        raise ValueError("stratagems must have the same number of agents")
    agents = []
    for i in range(n):
        subs = [s.agents[i] for s in stratagems]
        if any(isinstance(c, UnifiedController) for c in subs):
            raise ValueError("stratagems must be plain controllers")
        r, k = len(subs), subs[0].node_count
        agents.append(UnifiedController(subs, np.full((r, k), gate), None, initial))
    return JointPolicy(tuple(agents))


@dataclass(frozen=True)
class SwitchingShape:
    """Search space of switching parameters over a fixed set of unified agents.

    Blocks: ``"gate"`` (one on/off choice per agent node), ``"edge"`` (one
    foreign target per agent node) and ``"initial"`` (starting stratagem per
    agent).
    """

    base: JointPolicy

    @property
    def n(self) -> int:
        return self.base.n_agents

    @property
    def r(self) -> int:
        return self.base.agents[0].r

    @property
    def k(self) -> int:
        return self.base.agents[0].k

    @property
    def blocks(self) -> tuple[BlockSpec, ...]:
        n, r, k = self.n, self.r, self.k
        return (BlockSpec("gate", n * r * k, 2), BlockSpec("edge", n * r * k, max((r - 1) * k, 1)),
                BlockSpec("initial", n, r))

    def initial_distribution(self, floor: float) -> SamplingDistribution:
        n, r, k = self.n, self.r, self.k
        gates = np.concatenate([a.gates.reshape(-1) for a in self.base.agents])
        init = np.zeros((n, r))
        init[np.arange(n), [a.initial for a in self.base.agents]] = 1.0
        init = 0.5 * init + 0.5 / r
        edge_w = max((r - 1) * k, 1)
        return SamplingDistribution({
            "gate": np.stack([1 - gates, gates], axis=1),
            "edge": np.full((n * r * k, edge_w), 1.0 / edge_w),
            "initial": init,
        }, floor)

    def decode(self, candidate: CandidateWeights) -> JointPolicy:
        n, r, k = self.n, self.r, self.k
        gates = candidate.choices["gate"].reshape(n, r, k).astype(np.float64)
        targets = candidate.choices["edge"].reshape(n, r * k)
        init = candidate.choices["initial"]
        agents = []
        for i, a in enumerate(self.base.agents):
            width = (r - 1) * k
            edges = np.zeros((r * k, width))
            if width:
                edges[np.arange(r * k), targets[i]] = 1.0
            else:
                gates[i] = 0.0
            agents.append(a.with_switching(gates[i], edges, int(init[i])))
        return JointPolicy(tuple(agents))


def surrogate_objective(policy: JointPolicy, candidates: Sequence[AdversarySwitchWeights], episodes: int,
                        seed: int, config: SimConfig | None = None, roster=None,
                        with_error: bool = False, stagger: bool = False):
    """Average return of ``policy`` over the adversaries E(u) for each candidate ``u``.

    By default every candidate is played on the same episodes of the seed's
    stream.  With ``stagger`` candidate ``i`` plays the ``i``-th block of
    ``episodes`` episodes instead, so the ``m`` evaluations see different
    flag placements; any two policies still meet identical episodes.  With
    ``with_error`` the standard error of the average, treating the ``m``
    evaluations as independent, is returned too.
    """
    if not candidates:
        raise ValueError("need at least one switching-weight candidate")
    config = config or SimConfig()
    reports = [evaluate_blackbox(policy, u.adversary(roster), episodes, seed, config, keep_returns=False,
                                 first_episode=i * episodes if stagger else 0)
               for i, u in enumerate(candidates)]
    mean = float(np.mean([r.mean_return for r in reports]))
    if not with_error:
        return mean
    se = float(np.sqrt(np.sum([r.std_error ** 2 for r in reports])) / len(reports))
    return mean, se


@dataclass
class FusionProblem:
    stratagems: Sequence[JointPolicy]
    gdice: GDiceConfig
    prior: SwitchWeightPrior = field(default_factory=SwitchWeightPrior)
    sim: SimConfig = field(default_factory=SimConfig)
    roster: np.ndarray | None = None
    # good-for-one when set: optimise against these weights only
    known_weights: AdversarySwitchWeights | None = None
    initial: int = 0
    gate: float = DEFAULT_GATE

    def __post_init__(self):
        r = len(self.stratagems)
        roster = default_roster() if self.roster is None else np.asarray(self.roster)
        if roster.shape[1] != r:
            raise ValueError(f"{r} stratagems but the adversary roster has {roster.shape[1]} tactics")
        self.roster = roster

    def candidates(self) -> list[AdversarySwitchWeights]:
        if self.known_weights is not None:
            return [self.known_weights]
        return self.prior.candidates("train")


@dataclass
class FusionResult:
    policy: JointPolicy
    candidate: CandidateWeights
    distribution: SamplingDistribution
    curve: object
    weights: list


def optimize_switching(problem: FusionProblem, label: str = "fusion") -> FusionResult:
    """Search gates, edges and starting stratagems; sub-controllers stay frozen."""
    base = build_unified(problem.stratagems, problem.gate, problem.initial)
    shape = SwitchingShape(base)
    weights = problem.candidates()

    def blackbox(candidate, episodes, seed):
        return surrogate_objective(shape.decode(candidate), weights, episodes, seed, problem.sim, problem.roster,
                                   stagger=True)

    best, dist, curve = optimize(problem.gdice, blackbox, shape,
                                 shape.initial_distribution(problem.gdice.floor), label=label)
    return FusionResult(shape.decode(best), best, dist, curve, weights)
