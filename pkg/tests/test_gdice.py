import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratagem import rng
from stratagem.controllers import home_policy
from stratagem.ctf import SimConfig, SwitchingTactics, TEAM_TACTICS, evaluate_blackbox
from stratagem.gdice import (
    BlockSpec, CandidateWeights, ControllerShape, GDiceConfig, LearningCurve, SamplingDistribution,
    evaluate_candidate, optimize, sample_candidate, update_distribution,
)

TOY = ControllerShape(1, 1, 4)      # one node, four actions


def pick_three(candidate, episodes, seed):
    return 1.0 if candidate.choices["lambda"][0] == 3 else 0.0


def test_degenerate_sampling():
    cand = CandidateWeights({"a": [1, 0, 2]})
    dist = SamplingDistribution.degenerate(cand, [BlockSpec("a", 3, 3)])
    g = rng.generator(0, "t")
    assert all(sample_candidate(dist, g) == cand for _ in range(20))


def test_uniform_sampling_frequency():
    dist = SamplingDistribution.uniform([BlockSpec("a", 1, 2)])
    g = rng.generator(1, "t")
    draws = [sample_candidate(dist, g).choices["a"][0] for _ in range(100_000)]
    assert abs(np.mean(np.array(draws) == 0) - 0.5) < 0.01


def test_sampling_seeded():
    dist = SamplingDistribution.uniform(ControllerShape(3, 2, 29))
    a = sample_candidate(dist, rng.generator(5, "x"))
    b = sample_candidate(dist, rng.generator(5, "x"))
    assert a == b and hash(a) == hash(b)


def test_update_examples():
    spec = [BlockSpec("a", 1, 2)]
    dist = SamplingDistribution.uniform(spec, floor=0.0)
    e0 = CandidateWeights({"a": [0]})
    assert np.allclose(update_distribution(dist, [e0, e0], 0.2)["a"], [[0.6, 0.4]])
    assert np.allclose(update_distribution(dist, [e0], 1.0)["a"], [[1.0, 0.0]])
    assert np.array_equal(update_distribution(dist, [e0], 0.0)["a"], dist["a"])
    with pytest.raises(ValueError):
        update_distribution(dist, [], 0.2)


@given(st.integers(1, 6), st.integers(1, 5), st.floats(0.0, 1.0), st.floats(0.0, 0.15),
       st.integers(0, 2 ** 32 - 1))
@settings(max_examples=80, deadline=None)
def test_update_preserves_simplex_and_floor(rows, choices, alpha, floor, seed):
    spec = [BlockSpec("a", rows, choices)]
    g = np.random.default_rng(seed)
    dist = SamplingDistribution({"a": g.dirichlet(np.ones(choices), size=rows)}, floor=floor)
    elites = [CandidateWeights({"a": g.integers(choices, size=rows)}) for _ in range(3)]
    new = update_distribution(dist, elites, alpha)
    p = new["a"]
    assert np.allclose(p.sum(1), 1.0, atol=1e-12)
    eff = min(floor, 1.0 / choices)
    assert (p >= eff - 1e-12).all()


def test_optimize_finds_action_three():
    best, dist, curve = optimize(GDiceConfig(iterations=20, seed=3), pick_three, TOY)
    assert best.choices["lambda"][0] == 3
    assert curve.is_monotone() and len(curve) == 20


def test_optimize_zero_iterations_errors():
    with pytest.raises(ValueError):
        optimize(GDiceConfig(iterations=0), pick_three, TOY)


def test_constant_blackbox():
    cfg = GDiceConfig(iterations=15, samples=10, elites=3, floor=0.01)
    best, dist, curve = optimize(cfg, lambda c, e, s: 2.5, TOY)
    assert curve.best_so_far == [2.5] * 15
    p = dist["lambda"]
    assert (p >= 0.01 - 1e-12).all() and np.allclose(p.sum(1), 1.0)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=25, deadline=None)
def test_best_so_far_monotone_noisy(seed):
    # noisy black-box: the curve must still never decrease
    def noisy(c, episodes, s):
        return float(c.choices["lambda"][0]) + np.random.default_rng(s).normal()

    _, _, curve = optimize(GDiceConfig(iterations=8, samples=6, elites=2, seed=seed), noisy, TOY)
    assert curve.is_monotone()


def test_kl_to_optimum_decreases():
    # divergence of the point mass on the enumerated optimum from theta
    cfg = GDiceConfig(iterations=20, samples=20, elites=3, seed=0)
    initial = SamplingDistribution.uniform(TOY, cfg.floor)
    _, final, _ = optimize(cfg, pick_three, TOY, initial)

    def kl(dist):
        return -math.log(dist["lambda"][0, 3])

    assert kl(final) < kl(initial) == pytest.approx(math.log(4))


def test_elite_tie_break_deterministic():
    a = optimize(GDiceConfig(iterations=5, samples=8, elites=2, seed=9), lambda c, e, s: 0.0, TOY)
    b = optimize(GDiceConfig(iterations=5, samples=8, elites=2, seed=9), lambda c, e, s: 0.0, TOY)
    assert a[0] == b[0]
    assert all(np.array_equal(a[1][n], b[1][n]) for n in a[1].blocks)


def test_config_validation():
    with pytest.raises(ValueError):
        GDiceConfig(samples=4, elites=5)
    with pytest.raises(ValueError):
        GDiceConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        GDiceConfig(episodes=0)


def test_curve_csv(tmp_path):
    curve = LearningCurve()
    curve.append(1.0, 0.5, 0.1)
    curve.append(2.0, 1.5, 0.2)
    path = tmp_path / "c.csv"
    curve.write_csv(path, "config_hash=x seed=0")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=x seed=0"
    assert lines[1] == "iteration,best_so_far,iter_mean,iter_stderr"
    assert lines[3] == "2,2.0,1.5,0.2"


# ------------------------------------------------------- controller search

def test_controller_shape_roundtrip():
    shape = ControllerShape(3, 2, 29)
    cand = sample_candidate(SamplingDistribution.uniform(shape), rng.generator(0, "s"))
    assert shape.encode(shape.decode(cand)) == cand


def test_evaluate_candidate_examples():
    cfg = SimConfig(horizon=50)
    adv = SwitchingTactics.stationary(TEAM_TACTICS[1])
    shape = ControllerShape(3, 1, cfg.n_actions)
    stay = shape.encode(home_policy(cfg))

    def bb(policy, episodes, seed):
        return evaluate_blackbox(policy, adv, episodes, seed, cfg)

    assert evaluate_candidate(stay, bb, 10, 1, shape.decode) == -3 * 50
    cand = sample_candidate(SamplingDistribution.uniform(shape), rng.generator(2, "c"))
    single = evaluate_blackbox(shape.decode(cand), adv, 1, 7, cfg).returns[0]
    assert evaluate_candidate(cand, bb, 1, 7, shape.decode) == single
    assert evaluate_candidate(cand, bb, 5, 7, shape.decode) == evaluate_candidate(cand, bb, 5, 7, shape.decode)
    with pytest.raises(ValueError):
        evaluate_candidate(cand, bb, 0, 7, shape.decode)


def test_optimize_improves_controller():
    cfg = SimConfig()
    adv = SwitchingTactics.stationary(TEAM_TACTICS[4])
    shape = ControllerShape(3, 2, cfg.n_actions)

    def bb(c, episodes, seed):
        return evaluate_blackbox(shape.decode(c), adv, episodes, seed, cfg, keep_returns=False)

    _, _, curve = optimize(GDiceConfig(iterations=8, samples=20, elites=3, episodes=10, seed=1), bb, shape)
    assert curve.is_monotone()
    assert curve.best_so_far[-1] > curve.iter_mean[0]
