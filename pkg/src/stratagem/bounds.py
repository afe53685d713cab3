"""Performance-gap bounds for fused switching policies and an empirical check.

All logarithms are natural.  ``m`` is the number of sampled adversary
switching-weight candidates, ``delta`` the failure probability, ``kl`` the
divergence of the search distribution from the uniform distribution over
optimal weights and ``eps`` a user-supplied high-probability bound on that
divergence.

==================  =====================================================
``pac_bayes_gap``   sqrt((kl + ln(4m/delta)) / (2m - 1))
``lemma2_gap``      sqrt((eps + ln(8m/delta)) / (2m - 1))
``hoeffding_gap``   sqrt(ln(1/delta) / (2m))
``theorem1_gap``    2 * sqrt((eps + ln(16m/delta)) / (2m - 1))
==================  =====================================================

The bounds assume losses in [0, 1]; :func:`rescale_returns` maps raw
returns into that range given the extremal returns of the domain.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod


def _check(m, delta):
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _check_nonneg(name, x):
    if not x >= 0:
        raise ValueError(f"{name} must be >= 0, got {x}")


def pac_bayes_gap(kl: float, m: int, delta: float) -> float:
    """Generalisation gap holding for every search distribution at once."""
    _check(m, delta)
    _check_nonneg("kl", kl)
    return math.sqrt((kl + math.log(4 * m / delta)) / (2 * m - 1))


def lemma2_gap(eps: float, m: int, delta: float) -> float:
    """Generalisation gap of the distribution found by the search."""
    _check(m, delta)
    _check_nonneg("eps", eps)
    return math.sqrt((eps + math.log(8 * m / delta)) / (2 * m - 1))


def hoeffding_gap(m: int, delta: float) -> float:
    """Slack between the empirical optimum and the best true performance."""
    _check(m, delta)
    return math.sqrt(math.log(1 / delta) / (2 * m))


def theorem1_gap(eps: float, m: int, delta: float) -> float:
    """Gap between the search distribution's true performance and the optimum."""
    _check(m, delta)
    _check_nonneg("eps", eps)
    return 2.0 * math.sqrt((eps + math.log(16 * m / delta)) / (2 * m - 1))


def h_dimension(n: int, r: int, k: int) -> int:
    """Number of inter-controller transitions of ``n`` agents: n r (r-1) k^2."""
    if min(n, r, k) < 1:
        raise ValueError("n, r and k must be >= 1")
    return n * r * (r - 1) * k * k


def gap_row(m: int, delta: float, eps: float = 0.0) -> dict:
    return {
        "m": m, "delta": delta, "eps": eps,
        "gap_eq5": pac_bayes_gap(eps, m, delta),
        "gap_eq6": lemma2_gap(eps, m, delta),
        "gap_eq9": hoeffding_gap(m, delta),
        "gap_eq12": theorem1_gap(eps, m, delta),
    }


def kl_categorical(q, p) -> float:
    """KL(q || p) in nats, summed over matching component categoricals.

    ``q`` and ``p`` are arrays (or sequences of arrays) whose last axis holds
    the categories.  Returns ``math.inf`` when ``q`` puts mass where ``p``
    has none.
    """
    qs = [q] if isinstance(q, np.ndarray) else list(q)
    ps = [p] if isinstance(p, np.ndarray) else list(p)
    if len(qs) != len(ps):
        raise ValueError("q and p must have the same number of components")
    total = 0.0
    for qa, pa in zip(qs, ps):
        qa = np.asarray(qa, dtype=np.float64)
        pa = np.asarray(pa, dtype=np.float64)
        if qa.shape != pa.shape:
            raise ValueError(f"shape mismatch {qa.shape} vs {pa.shape}")
        if (qa < 0).any() or (pa < 0).any():
            raise ValueError("probabilities must be non-negative")
        mass = qa > 0
        if (mass & (pa <= 0)).any():
            return math.inf
        total += float(np.sum(qa[mass] * np.log(qa[mass] / pa[mass])))
    return total


class RangeError(ValueError):
    """Raw returns outside the declared extremal range."""

    def __init__(self, offending):
        self.offending = list(offending)
        super().__init__(f"returns outside [R_min, R_max]: {self.offending}")


@dataclass(frozen=True)
class RescaledReturns:
    raw: np.ndarray
    r_min: float
    r_max: float
    values: np.ndarray


def rescale_returns(raw, r_min: float, r_max: float) -> RescaledReturns:
    """Affine map of ``raw`` from [r_min, r_max] onto [0, 1]."""
    if not r_max > r_min:
        raise ValueError("need R_max > R_min")
    raw = np.atleast_1d(np.asarray(raw, dtype=np.float64))
    bad = raw[(raw < r_min) | (raw > r_max)]
    if bad.size:
        raise RangeError(bad.tolist())
    return RescaledReturns(raw, float(r_min), float(r_max), (raw - r_min) / (r_max - r_min))


# ---------------------------------------------------------------- coverage

@dataclass(frozen=True)
class ToyProblem:
    """Enumerable selection problem: ``rewards[w, j]`` in [0, 1] for support point ``j``.

    Adversary candidates ``u`` are drawn i.i.d. from ``probs`` over the
    support; ``L(w) = sum_j probs[j] * rewards[w, j]`` is exact.
    """

    rewards: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=np.float64)
        p = np.asarray(self.probs, dtype=np.float64)
        if r.ndim != 2 or p.ndim != 1 or r.shape[1] != p.shape[0]:
            raise ValueError("rewards must be (candidates, support) and probs (support,)")
        if r.shape[0] < 1 or p.shape[0] < 1:
            raise ValueError("toy problem needs candidates and a non-empty support")
        if (r < 0).any() or (r > 1).any():
            raise ValueError("toy rewards must lie in [0, 1]")
        if (p < 0).any() or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("support probabilities must form a distribution")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "probs", p)

    def true_values(self) -> np.ndarray:
        return self.rewards @ self.probs

    def best_value(self) -> float:
        return float(self.true_values().max())


# shipped toy: two candidates, four equally likely switching behaviours
DEFAULT_TOY = ToyProblem(rewards=np.array([[0.9, 0.1, 0.6, 0.4],
                                           [0.2, 0.8, 0.5, 0.5]]),
                         probs=np.full(4, 0.25))
CONSTANT_TOY = ToyProblem(rewards=np.full((2, 4), 0.5), probs=np.full(4, 0.25))

_MAX_ENUMERATION = 1 << 20


@dataclass(frozen=True)
class CoverageReport:
    trials: int
    m: int
    delta: float
    gap: float
    violations: int
    threshold: float
    exact_probability: float | None

    @property
    def fraction(self) -> float:
        return self.violations / self.trials

    @property
    def passed(self) -> bool:
        return self.fraction <= self.threshold


def _violates(toy: ToyProblem, counts: np.ndarray, m: int, gap: float) -> np.ndarray:
    # counts: (trials, support) multiplicities of each support point in the m draws
    empirical = counts @ toy.rewards.T / m          # (trials, candidates)
    return empirical.max(axis=1) > toy.best_value() + gap


def exact_violation_probability(toy: ToyProblem, m: int, delta: float) -> float:
    """Probability, by enumerating every ordered draw of ``m`` candidates,
    that the empirical optimum exceeds the true optimum by more than the
    Hoeffding slack."""
    s = toy.probs.shape[0]
    if s ** m > _MAX_ENUMERATION:
        raise ValueError(f"toy problem not enumerable: {s}^{m} draw sequences")
    gap = hoeffding_gap(m, delta)
    draws = np.array(list(itertools.product(range(s), repeat=m)), dtype=np.int64).reshape(-1, m)
    counts = np.stack([(draws == j).sum(1) for j in range(s)], axis=1)
    weight = np.prod(toy.probs[draws], axis=1)
    return float(weight[_violates(toy, counts, m, gap)].sum())


def empirical_coverage_check(toy: ToyProblem, trials: int, m: int, delta: float,
                             seed: int = 0) -> CoverageReport:
    """Monte Carlo check of the Hoeffding slack on an enumerable toy problem.

    Each trial draws ``m`` candidates, picks the empirically best ``w`` and
    records a violation when its empirical value exceeds ``L(w*)`` by more
    than ``hoeffding_gap(m, delta)``.  The report passes when the violation
    fraction is at most ``delta + 2 * sqrt(delta * (1 - delta) / trials)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gap = hoeffding_gap(m, delta)
    s = toy.probs.shape[0]
    exact = exact_violation_probability(toy, m, delta) if s ** m <= _MAX_ENUMERATION else None
    g = rngmod.generator(seed, "coverage", m, repr(delta))
    counts = g.multinomial(m, toy.probs, size=trials)
    violations = int(_violates(toy, counts, m, gap).sum())
    threshold = delta + 2.0 * math.sqrt(delta * (1 - delta) / trials)
    return CoverageReport(trials, m, delta, gap, violations, threshold, exact)
