"""Experiment pipeline: train stratagems, cross-evaluate, fuse, test on unseen adversaries.

Every phase draws its seeds from the master seed through a labelled split
(:func:`phase_seed`), so renaming or re-running one phase leaves the
streams of the others untouched::

    train-stratagems   phase_seed(master, "train", s)          s = 1..r
    fuse               phase_seed(master, "fuse", mode)
    switch weights     phase_seed(master, "switch-weights")     prior seed
    cross-eval         phase_seed(master, "cross-eval")
    eval-unseen        phase_seed(master, "eval-unseen")
    bounds             phase_seed(master, "bounds")

Output layout under ``out``::

    config.json
    stratagems/C<s>/agent<i>.fsc         trained controllers
    fused/<mode>/agent<i>.ufsc           unified controllers
    curves/train_C<s>.csv, curves/fuse_<mode>.csv
    switch_weights_{reference,train,held_out}.csv
    cross_eval.csv, eval_unseen.csv, bounds.csv, coverage.csv
    plots/*.svg

Every CSV starts with a ``# config_hash=... seed=...`` comment line.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bounds as bd
from . import rng as rngmod
from .controllers import Controller, JointPolicy, UnifiedController
from .ctf.config import ConfigError, SimConfig, _coerce, read_ini
from .ctf.tactics import TEAM_TACTICS, SwitchingTactics, parse_team_tactic, roster_columns
from .ctf.world import EvalReport, evaluate_blackbox
from .fusion import (AdversarySwitchWeights, FusionProblem, SwitchWeightPrior, optimize_switching,
                     write_switch_weights_csv)
from .gdice import ControllerShape, GDiceConfig, LearningCurve, optimize

MODES = ("good-for-one", "good-for-all")
PROFILES = ("desk", "full")


class HarnessError(RuntimeError):
    """A pipeline phase could not run (missing inputs, bad configuration)."""


def phase_seed(master: int, *labels) -> int:
    return rngmod.derive_key(master, "harness", *labels) & 0x7FFFFFFF


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    nodes: int = 3
    roster: tuple = tuple(TEAM_TACTICS[s] for s in sorted(TEAM_TACTICS))
    train: GDiceConfig = GDiceConfig(iterations=100, samples=50, elites=5, episodes=30)
    fuse_one: GDiceConfig = GDiceConfig(iterations=100, samples=50, elites=5, episodes=128)
    fuse_all: GDiceConfig = GDiceConfig(iterations=100, samples=50, elites=5, episodes=4)
    concentration: float = 1.0
    # adversary candidates of the good-for-all objective; with the 4 episodes
    # per candidate above, one evaluation costs as much as a good-for-one one
    candidates: int = 32
    gate: float = 0.1
    eval_episodes: int = 200
    held_out: int = 6
    bound_trials: int = 1000
    master_seed: int = 0
    profile: str = "desk"

    def __post_init__(self):
        if self.nodes < 1:
            raise ConfigError("nodes must be >= 1")
        roster = tuple(tuple(parse_team_tactic(t)) if isinstance(t, str) else tuple(t) for t in self.roster)
        if not roster or any(len(t) != self.sim.team_sizes[1] for t in roster):
            raise ConfigError("every roster entry needs one tactic per adversary robot")
        object.__setattr__(self, "roster", roster)
        if self.eval_episodes < 1 or self.held_out < 1 or self.bound_trials < 1:
            raise ConfigError("episode, held-out and trial counts must be >= 1")
        if self.candidates < 1 or self.concentration <= 0:
            raise ConfigError("need candidates >= 1 and concentration > 0")
        if not 0.0 <= self.gate <= 1.0:
            raise ConfigError("gate must lie in [0, 1]")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")

    @property
    def r(self) -> int:
        return len(self.roster)

    @classmethod
    def for_profile(cls, profile: str = "desk", **overrides) -> "ExperimentConfig":
        """Desk profile: 100 search iterations, 200 evaluation episodes.
        Full profile: 300 iterations, 1000 episodes."""
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}")
        base = {}
        if profile == "full":
            base = dict(train=GDiceConfig(iterations=300, episodes=30),
                        fuse_one=GDiceConfig(iterations=300, episodes=128),
                        fuse_all=GDiceConfig(iterations=300, episodes=4),
                        eval_episodes=1000)
        base.update(overrides)
        return cls(profile=profile, **base)

    @classmethod
    def from_ini(cls, path, profile: str = "desk", **overrides) -> "ExperimentConfig":
        """Read sections ``[sim]``, ``[experiment]``, ``[train]``, ``[fuse-one]``, ``[fuse-all]``.

        Values absent from the file keep the profile defaults; ``overrides``
        (from the command line) win over both.
        """
        try:
            parser = read_ini(path)
        except OSError as exc:
            raise HarnessError(f"cannot read config {path}: {exc}") from None
        known = {"sim", "experiment", "train", "fuse-one", "fuse-all"}
        extra = set(parser.sections()) - known
        if extra:
            raise ConfigError(f"{path}: unknown sections {sorted(extra)}")
        defaults = cls.for_profile(profile)
        kw = {}
        if parser.has_section("sim"):
            kw["sim"] = SimConfig.from_mapping(dict(parser["sim"]))
        for section, name in (("train", "train"), ("fuse-one", "fuse_one"), ("fuse-all", "fuse_all")):
            if parser.has_section(section):
                kw[name] = _gdice_from(getattr(defaults, name), dict(parser[section]), f"{path}: [{section}]")
        if parser.has_section("experiment"):
            fields = {f.name: f for f in dataclasses.fields(cls)}
            for key, raw in parser["experiment"].items():
                if key == "roster":
                    kw["roster"] = tuple(t.strip() for t in raw.split(";") if t.strip())
                    continue
                if key not in fields or key in ("sim", "train", "fuse_one", "fuse_all", "profile"):
                    raise ConfigError(f"{path}: unknown experiment key {key!r}")
                try:
                    kw[key] = _coerce(raw, getattr(defaults, key))
                except ValueError as exc:
                    raise ConfigError(f"{path}: bad value for {key!r}: {raw!r} ({exc})") from None
        kw.update(overrides)
        return cls.for_profile(profile, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sim"] = dataclasses.asdict(self.sim)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    def header(self, phase: str) -> str:
        return f"config_hash={self.config_hash()} seed={self.master_seed} phase={phase}"

    def prior(self) -> SwitchWeightPrior:
        return SwitchWeightPrior(n_agents=self.sim.team_sizes[1], r=self.r, concentration=self.concentration,
                                 m=self.candidates, seed=phase_seed(self.master_seed, "switch-weights"))

    def roster_matrix(self) -> np.ndarray:
        return roster_columns(self.roster)

    def adversary(self, s: int) -> SwitchingTactics:
        """Stationary scripted team tactic ``s`` (1-based)."""
        return SwitchingTactics.stationary(self.roster[s - 1])

    def shape(self) -> ControllerShape:
        return ControllerShape(self.sim.team_sizes[0], self.nodes, self.sim.n_actions)


def _gdice_from(base: GDiceConfig, values: dict, where: str) -> GDiceConfig:
    kw = {}
    for key, raw in values.items():
        if not hasattr(base, key):
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            kw[key] = _coerce(raw, getattr(base, key))
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {raw!r} ({exc})") from None
    try:
        return dataclasses.replace(base, **kw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ------------------------------------------------------------------ files

def _write_csv(path: Path, header: str, columns: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _cell(report: EvalReport) -> str:
    return f"{report.mean_return:.3f}±{report.std_error:.3f}"


def parse_cell(text: str) -> tuple[float, float]:
    """Inverse of the ``mean±stderr`` table cell format."""
    mean, _, se = text.partition("±")
    return float(mean), float(se)


def stratagem_dir(out, s: int) -> Path:
    return Path(out) / "stratagems" / f"C{s}"


def fused_dir(out, mode: str) -> Path:
    return Path(out) / "fused" / mode


def save_team(policy: JointPolicy, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, agent in enumerate(policy.agents):
        p = directory / (f"agent{i}.ufsc" if isinstance(agent, UnifiedController) else f"agent{i}.fsc")
        agent.save(p)
        paths.append(p)
    return paths


def load_team(directory: Path, n_agents: int) -> JointPolicy:
    agents = []
    for i in range(n_agents):
        plain, unified = directory / f"agent{i}.fsc", directory / f"agent{i}.ufsc"
        if unified.exists():
            agents.append(UnifiedController.load(unified))
        elif plain.exists():
            agents.append(Controller.load(plain))
        else:
            raise HarnessError(f"missing controller file {plain} (run the producing phase first)")
    return JointPolicy(tuple(agents))


def load_stratagems(config: ExperimentConfig, out) -> list[JointPolicy]:
    return [load_team(stratagem_dir(out, s), config.sim.team_sizes[0]) for s in range(1, config.r + 1)]


def reference_weights(config: ExperimentConfig) -> AdversarySwitchWeights:
    """The known adversary switching weights of the good-for-one setting and the E(u) column."""
    return config.prior().candidates("reference", 1)[0]


def held_out_weights(config: ExperimentConfig) -> list[AdversarySwitchWeights]:
    return config.prior().candidates("held-out", config.held_out)


def write_config(config: ExperimentConfig, out) -> Path:
    path = Path(out) / "config.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"config_hash": config.config_hash(), **config.to_dict()},
                               sort_keys=True, indent=2, default=list) + "\n", encoding="utf-8")
    return path


# ----------------------------------------------------------------- phases

@dataclass
class TrainResult:
    policies: list
    curves: list
    paths: list


def cmd_train_stratagems(config: ExperimentConfig, out) -> TrainResult:
    """One stratagem per roster entry, each a best response to its stationary tactic."""
    shape = config.shape()
    policies, curves, paths = [], [], []
    for s in range(1, config.r + 1):
        adversary = config.adversary(s)
        sim = config.sim

        def blackbox(candidate, episodes, seed, adversary=adversary):
            return evaluate_blackbox(shape.decode(candidate), adversary, episodes, seed, sim, keep_returns=False)

        gd = dataclasses.replace(config.train, seed=phase_seed(config.master_seed, "train", s))
        best, _, curve = optimize(gd, blackbox, shape, label=f"stratagem-{s}")
        policy = shape.decode(best)
        paths += save_team(policy, stratagem_dir(out, s))
        curve_path = Path(out) / "curves" / f"train_C{s}.csv"
        curve_path.parent.mkdir(parents=True, exist_ok=True)
        curve.write_csv(curve_path, config.header(f"train-stratagems C{s}"))
        paths.append(curve_path)
        policies.append(policy)
        curves.append(curve)
    return TrainResult(policies, curves, paths)


@dataclass
class CrossEvalMatrix:
    policies: list          # row labels
    adversaries: list       # column labels
    cells: dict             # (row, column) -> EvalReport

    def report(self, policy: str, adversary: str) -> EvalReport:
        return self.cells[(policy, adversary)]

    def rows(self):
        for p in self.policies:
            yield [p] + [_cell(self.cells[(p, a)]) for a in self.adversaries]


def cmd_cross_eval(config: ExperimentConfig, out, episodes: int | None = None,
                   include_fused: bool = True) -> CrossEvalMatrix:
    """Every stratagem (and the good-for-one fused policy when present) against
    every stationary tactic and the reference switching adversary E(u)."""
    episodes = episodes or config.eval_episodes
    teams = {f"C{s}": p for s, p in enumerate(load_stratagems(config, out), start=1)}
    fused = fused_dir(out, "good-for-one")
    if include_fused and fused.exists():
        teams["C(w)"] = load_team(fused, config.sim.team_sizes[0])
    adversaries = {f"E{s}": config.adversary(s) for s in range(1, config.r + 1)}
    adversaries["E(u)"] = reference_weights(config).adversary(config.roster_matrix())
    seed = phase_seed(config.master_seed, "cross-eval")
    cells = {(p, a): evaluate_blackbox(team, adv, episodes, seed, config.sim)
             for p, team in teams.items() for a, adv in adversaries.items()}
    matrix = CrossEvalMatrix(list(teams), list(adversaries), cells)
    _write_csv(Path(out) / "cross_eval.csv", config.header("cross-eval") + f" episodes={episodes}",
               ["policy"] + matrix.adversaries, matrix.rows())
    return matrix


@dataclass
class FuseResult:
    mode: str
    policy: JointPolicy
    curve: LearningCurve
    weights: list
    paths: list


def cmd_fuse(config: ExperimentConfig, out, mode: str) -> FuseResult:
    if mode not in MODES:
        raise HarnessError(f"mode must be one of {MODES}, got {mode!r}")
    stratagems = load_stratagems(config, out)
    one = mode == "good-for-one"
    gd = dataclasses.replace(config.fuse_one if one else config.fuse_all,
                             seed=phase_seed(config.master_seed, "fuse", mode))
    problem = FusionProblem(stratagems, gd, prior=config.prior(), sim=config.sim, roster=config.roster_matrix(),
                            known_weights=reference_weights(config) if one else None, gate=config.gate)
    result = optimize_switching(problem, label=mode)
    out = Path(out)
    paths = save_team(result.policy, fused_dir(out, mode))
    curve_path = out / "curves" / f"fuse_{mode}.csv"
    curve_path.parent.mkdir(parents=True, exist_ok=True)
    result.curve.write_csv(curve_path, config.header(f"fuse {mode}"))
    weights_path = out / ("switch_weights_reference.csv" if one else "switch_weights_train.csv")
    write_switch_weights_csv(weights_path, result.weights, config.header(f"fuse {mode}"))
    return FuseResult(mode, result.policy, result.curve, result.weights, paths + [curve_path, weights_path])


@dataclass
class UnseenResult:
    weights: list
    good_for_all: list      # EvalReport per held-out u
    good_for_one: list

    def margin(self) -> tuple[float, float]:
        """Mean of good-for-all minus good-for-one over all held-out episodes and its
        standard error; both policies play identical episodes, so the error is paired."""
        diffs = np.concatenate([a.returns - b.returns for a, b in zip(self.good_for_all, self.good_for_one)])
        return float(diffs.mean()), float(diffs.std(ddof=1) / math.sqrt(diffs.size))


def cmd_eval_unseen(config: ExperimentConfig, out, episodes: int | None = None) -> UnseenResult:
    episodes = episodes or config.eval_episodes
    n = config.sim.team_sizes[0]
    policies = {m: load_team(fused_dir(out, m), n) for m in MODES}
    held = held_out_weights(config)
    seed = phase_seed(config.master_seed, "eval-unseen")
    roster = config.roster_matrix()
    reports = {m: [evaluate_blackbox(policies[m], u.adversary(roster), episodes, seed, config.sim) for u in held]
               for m in MODES}
    out = Path(out)
    labels = [f"u{j + 1}" for j in range(len(held))]
    rows = []
    for m in reversed(MODES):
        means = np.mean([r.mean_return for r in reports[m]])
        rows.append([m] + [_cell(r) for r in reports[m]] + [f"{means:.3f}"])
    _write_csv(out / "eval_unseen.csv", config.header("eval-unseen") + f" episodes={episodes}",
               ["policy"] + labels + ["average"], rows)
    write_switch_weights_csv(out / "switch_weights_held_out.csv", held, config.header("eval-unseen"))
    return UnseenResult(held, reports["good-for-all"], reports["good-for-one"])


DEFAULT_BOUND_GRID = dict(m=(1, 2, 4, 8, 16, 32, 64, 128), delta=(0.05, 0.1, 0.25, 0.5), eps=(0.0, 1.0, 5.0))


def cmd_bounds(config: ExperimentConfig, out, m_values=None, deltas=None, eps_values=None,
               coverage: bool = True) -> dict:
    """Gap table over the (m, delta, eps) grid and the toy coverage check."""
    m_values = DEFAULT_BOUND_GRID["m"] if m_values is None else m_values
    deltas = DEFAULT_BOUND_GRID["delta"] if deltas is None else deltas
    eps_values = DEFAULT_BOUND_GRID["eps"] if eps_values is None else eps_values
    if not (len(m_values) and len(deltas) and len(eps_values)):
        raise HarnessError("bound grid must be non-empty in every dimension")
    for d in deltas:
        if not 0.0 < d < 1.0:
            raise HarnessError(f"delta must lie strictly inside (0, 1), got {d}")
    table = [bd.gap_row(int(m), float(d), float(e)) for m in m_values for d in deltas for e in eps_values]
    out = Path(out)
    cols = ["m", "delta", "eps", "gap_eq5", "gap_eq6", "gap_eq9", "gap_eq12"]
    _write_csv(out / "bounds.csv", config.header("bounds"), cols,
               ([row[c] if c == "m" else repr(row[c]) for c in cols] for row in table))
    result = {"table": table}
    if coverage:
        rep = bd.empirical_coverage_check(bd.DEFAULT_TOY, config.bound_trials, 4, 0.1,
                                          seed=phase_seed(config.master_seed, "bounds"))
        _write_csv(out / "coverage.csv", config.header("bounds coverage"),
                   ["trials", "m", "delta", "gap", "violations", "fraction", "threshold", "exact_probability",
                    "passed"],
                   [[rep.trials, rep.m, rep.delta, repr(rep.gap), rep.violations, repr(rep.fraction),
                     repr(rep.threshold), repr(rep.exact_probability), rep.passed]])
        result["coverage"] = rep
    return result


def cmd_plot(paths, out_dir) -> list[Path]:
    from .plotting import render_curve_file
    out_dir = Path(out_dir)
    return [render_curve_file(p, out_dir / (Path(p).stem + ".svg")) for p in paths]


@dataclass
class PipelineResult:
    train: TrainResult
    fuse: dict
    cross: CrossEvalMatrix
    unseen: UnseenResult
    bounds: dict
    plots: list


def run_pipeline(config: ExperimentConfig, out) -> PipelineResult:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_config(config, out)
    train = cmd_train_stratagems(config, out)
    fuse = {m: cmd_fuse(config, out, m) for m in MODES}
    cross = cmd_cross_eval(config, out)
    unseen = cmd_eval_unseen(config, out)
    bounds = cmd_bounds(config, out)
    curves = sorted((out / "curves").glob("*.csv"))
    plots = cmd_plot(curves, out / "plots")
    return PipelineResult(train, fuse, cross, unseen, bounds, plots)


def output_files(out) -> dict[str, bytes]:
    """Relative path -> bytes of every file under ``out``."""
    out = Path(out)
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()}
