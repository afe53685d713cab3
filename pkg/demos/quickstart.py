"""Quick tour: play a few episodes, train one stratagem briefly, print bound gaps.

Run with ``python demos/quickstart.py``; takes well under a minute.
"""
import numpy as np

from stratagem import bounds
from stratagem.controllers import JointPolicy, home_policy, uniform_controller
from stratagem.ctf import SimConfig, SwitchingTactics, TEAM_TACTICS, evaluate_blackbox, reward_bounds
from stratagem.gdice import ControllerShape, GDiceConfig, optimize

cfg = SimConfig()
print(f"grid {cfg.grid_width}x{cfg.grid_height}, {cfg.n_actions} macro-actions, "
      f"returns bounded by {reward_bounds(cfg)}")

# baselines against the first scripted team tactic
e1 = SwitchingTactics.stationary(TEAM_TACTICS[1])
for name, team in [("stay home", home_policy(cfg)),
                   ("uniform random", JointPolicy((uniform_controller(2, cfg.n_actions),) * 3))]:
    rep = evaluate_blackbox(team, e1, 100, seed=0, config=cfg)
    print(f"{name:>15}: {rep.mean_return:8.2f} ± {rep.std_error:.2f}")

# a short cross-entropy search for a 2-node controller team
shape = ControllerShape(3, 2, cfg.n_actions)


def blackbox(candidate, episodes, seed):
    return evaluate_blackbox(shape.decode(candidate), e1, episodes, seed, cfg, keep_returns=False)


best, _, curve = optimize(GDiceConfig(iterations=15, samples=30, elites=4, episodes=20, seed=1), blackbox, shape)
print("best-so-far:", np.round(curve.best_so_far, 1).tolist())
rep = evaluate_blackbox(shape.decode(best), e1, 200, seed=123, config=cfg)
print(f"trained team on fresh episodes: {rep.mean_return:.2f} ± {rep.std_error:.2f}")

# how the generalisation gap shrinks with the number of sampled opponents
for m in (1, 4, 16, 64):
    print(f"m={m:3d}  gap={bounds.theorem1_gap(0.0, m, 0.1):.4f}  hoeffding={bounds.hoeffding_gap(m, 0.1):.4f}")
