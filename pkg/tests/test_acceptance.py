"""Acceptance criteria, one test each.

Every test prints a single ``[criterion n] PASS|FAIL ...`` line (also listed
in the terminal summary).  The two desk-profile pipeline runs take several
minutes on one core.
"""
import itertools
import time

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from helpers import controller_trace
from stratagem import bounds, harness
from stratagem.controllers import N_OBS, Controller, JointPolicy, UnifiedController
from stratagem.ctf import SimConfig, SwitchingTactics, TEAM_TACTICS, reset, reward_bounds, step_primitive
from stratagem.ctf.world import STAY, UP, simulate_compiled
from stratagem.fusion import SwitchWeightPrior
from stratagem.gdice import ControllerShape, GDiceConfig, optimize

Z90 = 1.2815515655446004          # one-sided 90% normal quantile


def report(number, passed, detail):
    line = f"[criterion {number}] {'PASS' if passed else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def pooled(a, b):
    return float(np.hypot(a.std_error, b.std_error))


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    config = harness.ExperimentConfig.for_profile("desk", master_seed=0)
    first, second = tmp_path_factory.mktemp("desk_a"), tmp_path_factory.mktemp("desk_b")
    result = harness.run_pipeline(config, first)
    return config, result, first, second


# ------------------------------------------------------------ 1. bounds

def test_criterion_1_bound_arithmetic():
    mpmath.mp.dps = 60
    grid = list(itertools.product((1, 2, 7, 50, 1000), (0.01, 0.1, 0.5, 0.9), (0.0, 0.3, 4.0, 25.0, 300.0)))
    assert len(grid) == 100

    def oracle(x, m, d):
        x, m, d = mpmath.mpf(x), mpmath.mpf(m), mpmath.mpf(d)
        return (mpmath.sqrt((x + mpmath.log(4 * m / d)) / (2 * m - 1)),
                mpmath.sqrt((x + mpmath.log(8 * m / d)) / (2 * m - 1)),
                mpmath.sqrt(mpmath.log(1 / d) / (2 * m)),
                2 * mpmath.sqrt((x + mpmath.log(16 * m / d)) / (2 * m - 1)))

    wanted = [tuple(float(v) for v in oracle(eps, m, d)) for m, d, eps in grid]
    start = time.perf_counter()
    got = [(bounds.pac_bayes_gap(eps, m, d), bounds.lemma2_gap(eps, m, d), bounds.hoeffding_gap(m, d),
            bounds.theorem1_gap(eps, m, d)) for m, d, eps in grid]
    elapsed = time.perf_counter() - start
    worst = max(abs(g - w) / w for gs, ws in zip(got, wanted) for g, w in zip(gs, ws))
    ok = report(1, worst <= 1e-12 and elapsed < 1.0, f"max rel err {worst:.2e} over 100 points, {elapsed:.4f}s")
    assert ok


# ---------------------------------------------------------- 2. coverage

def test_criterion_2_coverage():
    start = time.perf_counter()
    rep = bounds.empirical_coverage_check(bounds.DEFAULT_TOY, 1000, 4, 0.1, seed=0)
    elapsed = time.perf_counter() - start
    limit = 0.1 + 2 * np.sqrt(0.09 / 1000)
    ok = report(2, rep.fraction <= limit and elapsed < 60,
                f"violation fraction {rep.fraction:.4f} <= {limit:.4f} (exact {rep.exact_probability:.4f}), "
                f"{elapsed:.2f}s")
    assert ok


# ----------------------------------------------------------- 3. G-DICE

def test_criterion_3_gdice_optimality():
    shape = ControllerShape(1, 1, 4)
    values = (0.2, 0.7, 1.0, 0.4)           # action 2 is the unique optimum

    def blackbox(candidate, episodes, seed):
        return values[candidate.choices["lambda"][0]]

    start = time.perf_counter()
    hits, monotone = 0, True
    for seed in range(100):
        best, _, curve = optimize(GDiceConfig(iterations=20, seed=seed), blackbox, shape)
        hits += best.choices["lambda"][0] == 2
        monotone &= curve.is_monotone()
    elapsed = time.perf_counter() - start
    ok = report(3, hits >= 95 and monotone and elapsed < 60,
                f"optimum found in {hits}/100 runs, all curves monotone={monotone}, {elapsed:.2f}s")
    assert ok


# --------------------------------------------------- 4. diagonal dominance

def test_criterion_4_diagonal_dominance(desk_runs):
    _, result, _, _ = desk_runs
    cross = result.cross
    held = []
    for s in range(1, 5):
        own = cross.report(f"C{s}", f"E{s}")
        margins = [own.mean_return - cross.report(f"C{s}", f"E{t}").mean_return
                   - 2 * pooled(own, cross.report(f"C{s}", f"E{t}")) for t in range(1, 5) if t != s]
        held.append(min(margins) >= 0)
    ok = report(4, sum(held) >= 3, f"{sum(held)}/4 stratagems dominate their column by 2 pooled SE "
                f"(per stratagem: {held})")
    assert ok


# ------------------------------------------------ 5. switching vs E(u)

def test_criterion_5_switching_beats_pure(desk_runs):
    _, result, _, _ = desk_runs
    cross = result.cross
    fused = cross.report("C(w)", "E(u)")
    margins = []
    for s in range(1, 5):
        pure = cross.report(f"C{s}", "E(u)")
        margins.append(fused.mean_return - pure.mean_return - 2 * pooled(fused, pure))
    ok = report(5, min(margins) >= 0, f"C(w) {fused.mean_return:.2f} on E(u); margin beyond 2 pooled SE "
                f"per stratagem: {[round(m, 2) for m in margins]}")
    assert ok


# ------------------------------------------- 6. good-for-all vs one

def test_criterion_6_good_for_all(desk_runs):
    _, result, _, _ = desk_runs
    diff, se = result.unseen.margin()
    lower = diff - Z90 * se
    ok = report(6, lower >= 0, f"good-for-all minus good-for-one {diff:.3f} +/- {se:.3f}; "
                f"one-sided 90% lower bound {lower:.3f} (needs >= 0)")
    assert ok


# ------------------------------------------------ 7. zero-gate equivalence

def test_criterion_7_zero_gate_equivalence():
    cfg = SimConfig()
    start = time.perf_counter()
    matches = 0
    for seed in range(50):
        g = np.random.default_rng(seed)
        r, k = int(g.integers(2, 5)), int(g.integers(1, 4))
        active = int(g.integers(r))
        subs = [[Controller(g.dirichlet(np.ones(cfg.n_actions), size=k),
                            g.dirichlet(np.ones(k), size=(k, N_OBS))) for _ in range(r)] for _ in range(3)]
        unified = JointPolicy(tuple(UnifiedController(subs[i], np.zeros((r, k)), None, active) for i in range(3)))
        plain = JointPolicy(tuple(subs[i][active] for i in range(3)))
        adversary = SwitchingTactics.stationary(TEAM_TACTICS[1 + seed % 4])
        a, ra = controller_trace(unified, adversary, cfg, seed)
        b, rb = controller_trace(plain, adversary, cfg, seed)
        matches += a == b and ra.blue_return == rb.blue_return
    elapsed = time.perf_counter() - start
    ok = report(7, matches == 50 and elapsed < 10, f"{matches}/50 traces identical, {elapsed:.2f}s")
    assert ok


# ---------------------------------------------------- 8. determinism

def test_criterion_8_determinism(desk_runs):
    config, _, first, second = desk_runs
    harness.run_pipeline(config, second)
    a, b = harness.output_files(first), harness.output_files(second)
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    ok = report(8, not differing and len(a) > 0, f"{len(a)} output files, {len(differing)} differ {differing[:3]}")
    assert ok


# ------------------------------------------------ 9. reward accounting

def test_criterion_9_reward_accounting():
    cfg = SimConfig(flag_rule=("random", "1"), slip_prob=0.0)
    state = reset(cfg, 3)
    total = 0.0
    for t in range(40):
        intents = np.full(6, STAY, dtype=np.int64)
        if t >= 30:
            intents[1] = UP
        state, rewards, _ = step_primitive(state, intents)
        total += rewards[0]
    traced = state.done and state.clock == 40 and total == 380.0

    default = SimConfig()
    low, high = reward_bounds(default)
    prior = SwitchWeightPrior(seed=9)
    g = np.random.default_rng(9)
    extremes = [np.inf, -np.inf]
    episodes = 0
    for batch in range(100):
        k = int(g.integers(1, 4))
        team = JointPolicy(tuple(Controller(g.dirichlet(np.full(default.n_actions, 0.3), size=k),
                                            g.dirichlet(np.ones(k), size=(k, N_OBS))) for _ in range(3)))
        adversary = prior.candidates(f"batch-{batch}", 1)[0].adversary()
        rows = simulate_compiled(team, adversary, default, 1000, batch)
        returns = rows[:, :2]
        extremes = [min(extremes[0], returns.min()), max(extremes[1], returns.max())]
        episodes += len(rows)
    inside = low <= extremes[0] and extremes[1] <= high
    ok = report(9, traced and inside and episodes == 10 ** 5,
                f"hand trace return {total:.0f}; {episodes} episodes span [{extremes[0]:.0f}, {extremes[1]:.0f}] "
                f"within [{low:.0f}, {high:.0f}]")
    assert ok
