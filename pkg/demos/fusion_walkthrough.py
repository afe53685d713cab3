"""Train four stratagems, fuse them, and compare against a switching opponent.

A scaled-down version of ``stratagem pipeline``; about half a minute on one core.
Outputs land in ``runs/demo`` (CSV tables, controllers, SVG curves).
"""
from pathlib import Path

from stratagem import harness
from stratagem.gdice import GDiceConfig

small = GDiceConfig(iterations=20, samples=30, elites=4, episodes=20)
config = harness.ExperimentConfig.for_profile(
    "desk", nodes=2, train=small, fuse_one=GDiceConfig(iterations=20, episodes=40),
    fuse_all=GDiceConfig(iterations=20, episodes=5), candidates=8, eval_episodes=100)
out = Path("runs/demo")
result = harness.run_pipeline(config, out)

print((out / "cross_eval.csv").read_text())
print((out / "eval_unseen.csv").read_text())
diff, se = result.unseen.margin()
print(f"good-for-all minus good-for-one on held-out opponents: {diff:.2f} ± {se:.2f}")
print("learning curves:", ", ".join(str(p) for p in result.plots))
