"""Command-line entry point: ``stratagem <command> [options]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .ctf.config import ConfigError


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI experiment configuration")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--profile", choices=harness.PROFILES, default="desk")
    common.add_argument("--out", type=Path, default=Path("runs/default"), help="output directory")
    common.add_argument("--episodes", type=_positive, help="evaluation episodes per cell")

    p = argparse.ArgumentParser(prog="stratagem", description="Stratagem training, fusion and evaluation.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train-stratagems", parents=[common], help="train one stratagem per team tactic")
    sub.add_parser("cross-eval", parents=[common], help="stratagems against every tactic and E(u)")
    fuse = sub.add_parser("fuse", parents=[common], help="optimise switching between stratagems")
    fuse.add_argument("--mode", choices=harness.MODES, help="default: both modes")
    sub.add_parser("eval-unseen", parents=[common], help="fused policies against held-out E(u)")
    b = sub.add_parser("bounds", parents=[common], help="performance-gap table and coverage check")
    b.add_argument("--m", type=_ints, help="comma-separated candidate counts")
    b.add_argument("--delta", type=_floats, help="comma-separated confidence levels in (0, 1)")
    b.add_argument("--eps", type=_floats, help="comma-separated divergence bounds")
    b.add_argument("--no-coverage", action="store_true")
    plot = sub.add_parser("plot", parents=[common], help="render curve CSVs as SVG")
    plot.add_argument("csv", nargs="*", type=Path, help="curve files (default: <out>/curves/*.csv)")
    sub.add_parser("pipeline", parents=[common], help="run every phase in order")
    return p


def _config(args) -> harness.ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.episodes is not None:
        overrides["eval_episodes"] = args.episodes
    if args.config:
        return harness.ExperimentConfig.from_ini(args.config, args.profile, **overrides)
    return harness.ExperimentConfig.for_profile(args.profile, **overrides)


def run(args) -> None:
    cfg = _config(args)
    out = args.out
    cmd = args.command
    if cmd == "train-stratagems":
        harness.write_config(cfg, out)
        res = harness.cmd_train_stratagems(cfg, out)
        for s, c in enumerate(res.curves, start=1):
            print(f"C{s}: best {c.best_so_far[-1]:.3f}")
    elif cmd == "cross-eval":
        m = harness.cmd_cross_eval(cfg, out)
        print(",".join(["policy"] + m.adversaries))
        for row in m.rows():
            print(",".join(row))
    elif cmd == "fuse":
        for mode in [args.mode] if args.mode else harness.MODES:
            res = harness.cmd_fuse(cfg, out, mode)
            print(f"{mode}: best {res.curve.best_so_far[-1]:.3f}")
    elif cmd == "eval-unseen":
        res = harness.cmd_eval_unseen(cfg, out)
        diff, se = res.margin()
        print(f"good-for-all minus good-for-one: {diff:.3f} ± {se:.3f}")
    elif cmd == "bounds":
        res = harness.cmd_bounds(cfg, out, args.m, args.delta, args.eps, coverage=not args.no_coverage)
        print((Path(out) / "bounds.csv").read_text(encoding="utf-8"), end="")
        if "coverage" in res:
            rep = res["coverage"]
            print(f"coverage: {rep.violations}/{rep.trials} violations "
                  f"(threshold {rep.threshold:.4f}) {'PASS' if rep.passed else 'FAIL'}")
    elif cmd == "plot":
        paths = args.csv or sorted((Path(out) / "curves").glob("*.csv"))
        if not paths:
            raise harness.HarnessError(f"no curve files given and none under {Path(out) / 'curves'}")
        for p in harness.cmd_plot(paths, Path(out) / "plots"):
            print(p)
    elif cmd == "pipeline":
        res = harness.run_pipeline(cfg, out)
        diff, se = res.unseen.margin()
        print(f"outputs in {out}; good-for-all minus good-for-one on held-out u: {diff:.3f} ± {se:.3f}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args)
    except (harness.HarnessError, ConfigError, ValueError, OSError) as exc:
        print(f"stratagem {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
