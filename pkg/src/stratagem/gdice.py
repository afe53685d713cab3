"""Graph-based direct cross-entropy search over categorical parameter blocks.

The search space is a product of categoricals grouped in named blocks; a
block of shape ``(rows, choices)`` contributes ``rows`` independent choices.
A candidate fixes one choice per row.  Each iteration samples candidates from
the current distribution, scores them on a black-box under common random
numbers, keeps the best few (elites) and moves every row towards the elites'
empirical choice frequencies::

    theta <- alpha * freq + (1 - alpha) * theta,   then floor and renormalise

Controller search uses the blocks ``"lambda"`` (one row per agent node, one
choice per macro-action) and ``"delta"`` (one row per agent node and
macro-observation, one choice per successor node); see
:class:`ControllerShape`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import rng as rngmod
from .controllers import N_OBS, JointPolicy, deterministic_controller


@dataclass(frozen=True)
class BlockSpec:
    name: str
    rows: int
    choices: int


def _as_specs(shape) -> tuple[BlockSpec, ...]:
    if hasattr(shape, "blocks"):
        shape = shape.blocks
    specs = tuple(s if isinstance(s, BlockSpec) else BlockSpec(*s) for s in shape)
    if not specs:
        raise ValueError("search space needs at least one block")
    for s in specs:
        if s.rows < 0 or s.choices < 1:
            raise ValueError(f"bad block {s}")
    return specs


def _floor_normalise(p: np.ndarray, floor: float) -> np.ndarray:
    """Raise entries to at least ``floor`` while keeping rows on the simplex."""
    c = p.shape[-1]
    if floor <= 0 or c == 1:
        return p / p.sum(-1, keepdims=True)
    if floor * c > 1:
        raise ValueError(f"floor {floor} infeasible for {c} choices")
    p = p / p.sum(-1, keepdims=True)
    # mix with uniform just enough to lift the smallest entry to the floor
    low = p.min(-1, keepdims=True)
    gap = np.maximum(1.0 / c - low, np.finfo(float).tiny)   # zero only on uniform rows
    w = np.where(low < floor, (floor - low) / gap, 0.0)
    return (1 - w) * p + w / c


class SamplingDistribution:
    """Independent categoricals, one per row of each named block."""

    def __init__(self, blocks: Mapping[str, np.ndarray], floor: float = 1e-3):
        self.floor = float(floor)
        self.blocks: dict[str, np.ndarray] = {}
        for name, p in blocks.items():
            p = np.array(p, dtype=np.float64)
            if p.ndim != 2:
                raise ValueError(f"block {name!r} must be 2-D")
            if (p < 0).any() or not np.isfinite(p).all():
                raise ValueError(f"block {name!r} has invalid probabilities")
            if p.shape[0] and not np.allclose(p.sum(-1), 1.0, rtol=0, atol=1e-9):
                raise ValueError(f"block {name!r} rows must sum to 1")
            p.setflags(write=False)
            self.blocks[name] = p

    @classmethod
    def uniform(cls, shape, floor: float = 1e-3) -> "SamplingDistribution":
        return cls({s.name: np.full((s.rows, s.choices), 1.0 / s.choices) for s in _as_specs(shape)}, floor)

    @classmethod
    def degenerate(cls, candidate: "CandidateWeights", shape) -> "SamplingDistribution":
        blocks = {}
        for s in _as_specs(shape):
            p = np.zeros((s.rows, s.choices))
            p[np.arange(s.rows), candidate.choices[s.name]] = 1.0
            blocks[s.name] = p
        return cls(blocks, floor=0.0)

    @property
    def specs(self) -> tuple[BlockSpec, ...]:
        return tuple(BlockSpec(n, *p.shape) for n, p in self.blocks.items())

    def __getitem__(self, name) -> np.ndarray:
        return self.blocks[name]

    def probability(self, candidate: "CandidateWeights") -> float:
        logp = sum(np.log(p[np.arange(len(p)), candidate.choices[n]]).sum() for n, p in self.blocks.items())
        return float(np.exp(logp))

    def mode(self) -> "CandidateWeights":
        """Most likely candidate (lowest index on ties)."""
        return CandidateWeights({n: p.argmax(-1) for n, p in self.blocks.items()})


@dataclass(frozen=True)
class CandidateWeights:
    """One concrete choice per categorical row, keyed by block name."""

    choices: Mapping[str, np.ndarray]

    def __post_init__(self):
        frozen = {}
        for name, c in self.choices.items():
            c = np.array(c, dtype=np.int64)
            c.setflags(write=False)
            frozen[name] = c
        object.__setattr__(self, "choices", frozen)

    def encoding(self) -> tuple:
        """Flat choice tuple in block order; ties between candidates break on it."""
        return tuple(int(x) for c in self.choices.values() for x in c)

    def validate(self, shape) -> None:
        for s in _as_specs(shape):
            c = self.choices.get(s.name)
            if c is None or c.shape != (s.rows,) or (c < 0).any() or (c >= s.choices).any():
                raise ValueError(f"candidate block {s.name!r} out of range")

    def __eq__(self, other):
        return isinstance(other, CandidateWeights) and self.encoding() == other.encoding() \
            and list(self.choices) == list(other.choices)

    def __hash__(self):
        return hash(self.encoding())


def sample_candidate(dist: SamplingDistribution, rng: np.random.Generator) -> CandidateWeights:
    """Draw every row's choice independently by inverse CDF."""
    out = {}
    for name, p in dist.blocks.items():
        u = rng.random(p.shape[0])
        cdf = np.cumsum(p, axis=1)
        idx = (u[:, None] >= cdf).sum(1)
        out[name] = np.minimum(idx, p.shape[1] - 1)
    return CandidateWeights(out)


def update_distribution(dist: SamplingDistribution, elites: Sequence[CandidateWeights],
                        alpha: float, floor: float | None = None) -> SamplingDistribution:
    """Smoothed maximum-likelihood refit of every categorical to ``elites``."""
    if not elites:
        raise ValueError("need at least one elite")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    floor = dist.floor if floor is None else floor
    new = {}
    for name, p in dist.blocks.items():
        rows, c = p.shape
        freq = np.zeros_like(p)
        for e in elites:
            freq[np.arange(rows), e.choices[name]] += 1.0
        freq /= len(elites)
        q = alpha * freq + (1.0 - alpha) * p
        new[name] = _floor_normalise(q, floor) if rows else q
    return SamplingDistribution(new, floor)


@dataclass(frozen=True)
class GDiceConfig:
    iterations: int = 300
    samples: int = 50
    elites: int = 5
    learning_rate: float = 0.2
    episodes: int = 30
    floor: float = 1e-3
    retain_best: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 1 <= self.elites <= self.samples:
            raise ValueError("need 1 <= elites <= samples")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not 0.0 <= self.floor < 1.0:
            raise ValueError("floor must lie in [0, 1)")


@dataclass
class LearningCurve:
    best_so_far: list = field(default_factory=list)
    iter_mean: list = field(default_factory=list)
    iter_stderr: list = field(default_factory=list)
    best_stderr: list = field(default_factory=list)

    def append(self, best, mean, stderr, best_se=0.0):
        self.best_so_far.append(float(best))
        self.iter_mean.append(float(mean))
        self.iter_stderr.append(float(stderr))
        self.best_stderr.append(float(best_se))

    def __len__(self):
        return len(self.best_so_far)

    def is_monotone(self) -> bool:
        b = self.best_so_far
        return all(b[i + 1] >= b[i] for i in range(len(b) - 1))

    def rows(self):
        for i in range(len(self)):
            yield i + 1, self.best_so_far[i], self.iter_mean[i], self.iter_stderr[i]

    def write_csv(self, path, header: str | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "best_so_far", "iter_mean", "iter_stderr"])
            for it, b, m, s in self.rows():
                w.writerow([it, repr(b), repr(m), repr(s)])


def _score(value) -> tuple[float, float]:
    mean = getattr(value, "mean_return", value)
    se = getattr(value, "std_error", 0.0)
    return float(mean), float(se)


def optimize(config: GDiceConfig, blackbox: Callable, shape, initial: SamplingDistribution | None = None,
             label: str = "gdice"):
    """Run the cross-entropy search; returns ``(best, final distribution, curve)``.

    ``blackbox(candidate, episodes, seed)`` returns a mean return (or an
    object with ``mean_return``/``std_error``).  All candidates of one
    iteration share the evaluation seed, so their values differ only through
    the candidates themselves.  Elites are ranked by value, ties broken by
    the lexicographically smallest encoding.

    The incumbent (best candidate so far) is re-scored every iteration on
    the same episodes as the new samples and is replaced only by a candidate
    that beats it there; with ``retain_best`` it always takes part in the
    refit.  The curve's best-so-far column is the running maximum of the
    incumbent's and the iteration's top values.
    """
    if config.iterations < 1:
        raise ValueError("optimize needs at least one iteration")
    specs = _as_specs(shape)
    dist = initial if initial is not None else SamplingDistribution.uniform(specs, config.floor)
    if dist.specs != specs:
        raise ValueError("initial distribution does not match the search space")
    curve = LearningCurve()
    best = None
    running = -math.inf
    for it in range(config.iterations):
        draw = rngmod.generator(config.seed, label, "sample", it)
        eval_seed = rngmod.derive_key(config.seed, label, "evaluate", it)
        cands = [sample_candidate(dist, draw) for _ in range(config.samples)]
        scored = [(*_score(blackbox(c, config.episodes, eval_seed)), c) for c in cands]
        values = np.array([s[0] for s in scored])
        order = sorted(range(len(scored)), key=lambda j: (-scored[j][0], scored[j][2].encoding()))
        elites = [scored[j][2] for j in order[:config.elites]]
        top_value, top_se, top = scored[order[0]]
        if best is None:
            best, best_value, best_se = top, top_value, top_se
        else:
            hit = next((s for s in scored if s[2] == best), None)
            best_value, best_se = hit[:2] if hit else _score(blackbox(best, config.episodes, eval_seed))
            if (-top_value, top.encoding()) < (-best_value, best.encoding()):
                best, best_value, best_se = top, top_value, top_se
        if config.retain_best and best not in elites:
            elites[-1] = best
        dist = update_distribution(dist, elites, config.learning_rate, config.floor)
        running = max(running, best_value, top_value)
        se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        curve.append(running, values.mean(), se, best_se)
    return best, dist, curve


def evaluate_candidate(candidate: CandidateWeights, blackbox: Callable, episodes: int, seed: int,
                       decode: Callable | None = None) -> float:
    """Mean return of ``candidate`` decoded to a policy and scored by ``blackbox``.

    ``blackbox(policy, episodes, seed)`` returns an ``EvalReport`` (or a mean);
    ``decode`` maps the candidate to a policy (identity if omitted).
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    policy = candidate if decode is None else decode(candidate)
    return _score(blackbox(policy, episodes, seed))[0]


@dataclass(frozen=True)
class ControllerShape:
    """Search space of deterministic ``k``-node controllers for ``n`` agents."""

    n_agents: int
    nodes: int
    n_actions: int

    @property
    def blocks(self) -> tuple[BlockSpec, ...]:
        n, k, a = self.n_agents, self.nodes, self.n_actions
        return (BlockSpec("lambda", n * k, a), BlockSpec("delta", n * k * N_OBS, k))

    def decode(self, candidate: CandidateWeights) -> JointPolicy:
        n, k = self.n_agents, self.nodes
        lam = candidate.choices["lambda"].reshape(n, k)
        dlt = candidate.choices["delta"].reshape(n, k, N_OBS)
        return JointPolicy(tuple(deterministic_controller(lam[i], dlt[i], self.n_actions) for i in range(n)))

    def encode(self, policy: JointPolicy) -> CandidateWeights:
        """Inverse of :meth:`decode` for one-hot controllers."""
        lam = np.stack([c.lam.argmax(-1) for c in policy.agents]).reshape(-1)
        dlt = np.stack([c.delta.argmax(-1) for c in policy.agents]).reshape(-1)
        return CandidateWeights({"lambda": lam, "delta": dlt})
